"""echolab: room geometry from multichannel room impulse responses."""
from echolab.errors import EchoLabError
from echolab.geometry import Polygon2D, RoomSpec, import_layout, sample_standard_room
from echolab.acoustics import RirSet, simulate_room
from echolab.model import EchoScanConfig, EchoScanNet, desk_profile, full_profile
from echolab.estimator import EchoScanEstimator, RirSimulator

__version__ = "0.1.0"

__all__ = [
    "EchoLabError",
    "Polygon2D",
    "RoomSpec",
    "import_layout",
    "sample_standard_room",
    "RirSet",
    "simulate_room",
    "EchoScanConfig",
    "EchoScanNet",
    "desk_profile",
    "full_profile",
    "EchoScanEstimator",
    "RirSimulator",
]
