"""Exception hierarchy shared across the package."""


class EchoLabError(Exception):
    pass


class GeometryError(EchoLabError):
    pass


class CrumpleFailed(GeometryError):
    pass


class PlacementFailed(GeometryError):
    pass


class RoomRegenerate(GeometryError):
    """Raised by the room sampler when a draw must be discarded and redone."""


class DeviceOutsidePolygon(GeometryError):
    pass


class NonSimplePolygon(GeometryError):
    pass


class ParseError(EchoLabError):
    pass


class RoomExceedsCanvas(EchoLabError):
    pass


class HeightExceedsCanvas(EchoLabError):
    pass


class ZeroEnergyRir(EchoLabError):
    pass


class ShapeMismatch(EchoLabError, ValueError):
    pass


class NonScalarRoot(EchoLabError, ValueError):
    pass


class NegativeFeature(EchoLabError, ValueError):
    pass


class NoInteriorPixels(EchoLabError, ValueError):
    pass


class NaNLoss(EchoLabError, FloatingPointError):
    pass


class DatasetError(EchoLabError):
    """Dataset directory is missing, inconsistent, or was built with other settings."""
