"""Fresnel reflection coefficients for lossy dielectrics and conductors.

Sign conventions (pinned by tests): with complex relative permittivity
``eta = eps_r - j sigma / (2 pi f eps_0)`` and incidence angle theta
measured from the surface normal,

    TE (E perpendicular to the plane of incidence):
        gamma = (cos t - sqrt(eta - sin^2 t)) / (cos t + sqrt(eta - sin^2 t))
    TM (E parallel to the plane of incidence):
        gamma = (eta cos t - sqrt(eta - sin^2 t)) / (eta cos t + sqrt(eta - sin^2 t))

with the principal square root (non-negative real part). Under this
convention a perfect conductor gives gamma_TE = -1 and gamma_TM = +1, and
at normal incidence gamma_TM = -gamma_TE, consistent with the two
components describing the same field with oppositely oriented reference
vectors.
"""

import cmath
import math

from ..constants import VACUUM_PERMITTIVITY
from ..materials import Material

TE = "TE"
TM = "TM"


def complex_permittivity(material: Material, frequency: float) -> complex:
    """Relative permittivity with the conductivity loss term folded in."""
    return material.rel_permittivity - 1j * material.conductivity / (
        2.0 * math.pi * frequency * VACUUM_PERMITTIVITY
    )


def fresnel_reflection(material: Material, cos_incidence: float, frequency: float,
                       component: str) -> complex:
    """Reflection coefficient for one polarization component.

    Args:
        material: Surface material.
        cos_incidence: Cosine of the angle between the incident ray and the
            surface normal, in [0, 1].
        frequency: Carrier frequency in Hz.
        component: ``"TE"`` or ``"TM"``.
    """
    if not 0.0 <= cos_incidence <= 1.0:
        raise ValueError(f"cos_incidence must be in [0, 1], got {cos_incidence}")
    if component not in (TE, TM):
        raise ValueError(f"component must be 'TE' or 'TM', got {component!r}")
    if material.perfect_conductor:
        return -1.0 + 0.0j if component == TE else 1.0 + 0.0j
    eta = complex_permittivity(material, frequency)
    sin_sq = 1.0 - cos_incidence * cos_incidence
    root = cmath.sqrt(eta - sin_sq)
    if root.real < 0.0:
        root = -root
    if component == TE:
        return (cos_incidence - root) / (cos_incidence + root)
    return (eta * cos_incidence - root) / (eta * cos_incidence + root)
