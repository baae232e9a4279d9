"""Electromagnetic material definitions and the default material table.

Materials are identified by name. A face references a material through its
name; the scenario owns the table that resolves those references. The
shipped defaults target the high-20-GHz range and can be overridden or
extended per scenario file.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Material:
    """Electrical description of a reflecting surface.

    Args:
        name: Identifier referenced by faces.
        rel_permittivity: Real relative permittivity, >= 1.
        conductivity: Conductivity in S/m, >= 0.
        perfect_conductor: When set, the surface reflects with unit
            magnitude and the other electrical fields are ignored.
    """

    name: str
    rel_permittivity: float = 1.0
    conductivity: float = 0.0
    perfect_conductor: bool = False

    def __post_init__(self):
        if not self.perfect_conductor:
            if self.rel_permittivity < 1.0:
                raise ValueError(
                    f"material {self.name!r}: rel_permittivity must be >= 1, "
                    f"got {self.rel_permittivity}"
                )
            if self.conductivity < 0.0:
                raise ValueError(
                    f"material {self.name!r}: conductivity must be >= 0, "
                    f"got {self.conductivity}"
                )


def default_materials() -> dict[str, Material]:
    """Return the built-in material table keyed by name.

    Vehicle bodywork is modeled as a perfect conductor. Glass and concrete
    constants follow the ITU-R P.2040 power-law model; asphalt and the
    pedestrian body are plain defaults. All values are overridable in the
    scenario file.
    """
    mats = [
        Material("metal", perfect_conductor=True),
        Material("glass", rel_permittivity=6.27, conductivity=0.2287),
        Material("concrete", rel_permittivity=5.31, conductivity=0.8967),
        Material("asphalt", rel_permittivity=4.0, conductivity=0.5),
        Material("body", rel_permittivity=50.0, conductivity=10.0),
    ]
    return {m.name: m for m in mats}
