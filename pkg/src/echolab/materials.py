"""Surface material table and random material assignment.

Absorption values are fixed single-band constants of this package; only the
material names follow the room dataset description.
"""
from dataclasses import dataclass

import numpy as np

SIDEWALL_MATERIALS = {
    "hard_surface": 0.02,
    "rough_concrete": 0.04,
    "rough_lime_wash": 0.06,
    "glass_window": 0.10,
    "plasterboard": 0.12,
}
CEILING_MATERIALS = {
    "gypsum_board": 0.10,
    "metal_panel": 0.15,
    "plasterboard_ceiling": 0.12,
}
FLOOR_MATERIALS = {
    "linoleum_on_concrete": 0.03,
    "carpet": 0.30,
    "wooden_floor": 0.09,
}

ABSORPTION = {**SIDEWALL_MATERIALS, **CEILING_MATERIALS, **FLOOR_MATERIALS}


@dataclass(frozen=True)
class MaterialAssignment:
    floor: str
    ceiling: str
    sidewall: str

    @property
    def alpha_floor(self) -> float:
        return ABSORPTION[self.floor]

    @property
    def alpha_ceiling(self) -> float:
        return ABSORPTION[self.ceiling]

    @property
    def alpha_sidewall(self) -> float:
        return ABSORPTION[self.sidewall]

    def to_dict(self):
        return {"floor": self.floor, "ceiling": self.ceiling, "sidewall": self.sidewall}

    @classmethod
    def from_dict(cls, d):
        for key, table in (("floor", FLOOR_MATERIALS), ("ceiling", CEILING_MATERIALS),
                           ("sidewall", SIDEWALL_MATERIALS)):
            if d[key] not in table:
                raise ValueError(f"unknown {key} material {d[key]!r}")
        return cls(d["floor"], d["ceiling"], d["sidewall"])


def assign_materials(rng) -> MaterialAssignment:
    """Draw one floor, one ceiling and one (shared) sidewall material uniformly."""
    rng = np.random.default_rng(rng)
    floor = list(FLOOR_MATERIALS)[rng.integers(len(FLOOR_MATERIALS))]
    ceiling = list(CEILING_MATERIALS)[rng.integers(len(CEILING_MATERIALS))]
    sidewall = list(SIDEWALL_MATERIALS)[rng.integers(len(SIDEWALL_MATERIALS))]
    return MaterialAssignment(floor, ceiling, sidewall)
