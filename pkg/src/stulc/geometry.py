"""Pointing geometry between the satellite, the sea surface and the receiver.

The receiver sits at the origin, ``D`` metres below the calm sea surface,
and the satellite is ``H`` metres above it.  The transmit zenith angle is
chosen so that the beam, refracted at the calm surface, reaches the
receiver.  Flat-Earth throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

ETA_AIR_WATER = 0.75


class GeometryError(ValueError):
    """No pointing solution exists for the requested layout."""


def refraction_angle(zeta: float, eta: float = ETA_AIR_WATER) -> float:
    return math.asin(eta * math.sin(zeta))


def horizontal_offset(zeta: float, H: float, D: float, eta: float = ETA_AIR_WATER) -> float:
    """Horizontal distance between satellite nadir and receiver for zenith ``zeta``."""
    return D * math.tan(refraction_angle(zeta, eta)) + H * math.tan(zeta)


@dataclass(frozen=True)
class LinkGeometry:
    H: float
    D: float
    D_T: float
    zeta: float
    zeta_prime: float
    eta: float = ETA_AIR_WATER

    def __post_init__(self):
        if not self.H > 0:
            raise GeometryError("satellite height must be positive")
        if self.D < 0:
            raise GeometryError("receiver depth must be non-negative")
        if not 0.0 <= self.zeta < math.pi / 2:
            raise GeometryError("zenith angle must lie in [0, pi/2)")
        if not 0.0 < self.eta < 1.0:
            raise GeometryError("eta must lie in (0, 1)")

    @classmethod
    def from_zenith(cls, zeta: float, H: float, D: float, eta: float = ETA_AIR_WATER) -> "LinkGeometry":
        return cls(H=H, D=D, D_T=horizontal_offset(zeta, H, D, eta), zeta=zeta,
                   zeta_prime=refraction_angle(zeta, eta), eta=eta)

    @property
    def slant_length(self) -> float:
        return slant_path_length(self)


def solve_transmit_zenith(H: float, D: float, D_T: float, eta: float = ETA_AIR_WATER) -> LinkGeometry:
    """Find the transmit zenith angle that lands the beam on the receiver.

    The offset is strictly increasing in the zenith angle, so plain
    bisection on ``[0, pi/2)`` is used.
    """
    if not H > 0 or D < 0 or D_T < 0 or not 0 < eta < 1:
        raise GeometryError("invalid geometry inputs")
    if D_T == 0:
        return LinkGeometry(H=H, D=D, D_T=0.0, zeta=0.0, zeta_prime=0.0, eta=eta)

    lo, hi = 0.0, math.pi / 2
    # largest representable angle below pi/2 still gives a finite tangent
    top = math.nextafter(hi, 0.0)
    if horizontal_offset(top, H, D, eta) < D_T:
        raise GeometryError(f"offset D_T={D_T} m cannot be reached from H={H} m")
    hi = top
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if horizontal_offset(mid, H, D, eta) < D_T:
            lo = mid
        else:
            hi = mid
    lo_res = abs(horizontal_offset(lo, H, D, eta) - D_T)
    hi_res = abs(horizontal_offset(hi, H, D, eta) - D_T)
    zeta = lo if lo_res <= hi_res else hi
    residual = min(lo_res, hi_res)
    if residual > 1e-9 * max(1.0, D_T):
        raise GeometryError(f"zenith solve residual {residual:.3e} m too large; offset near grazing")
    return LinkGeometry(H=H, D=D, D_T=D_T, zeta=zeta, zeta_prime=refraction_angle(zeta, eta), eta=eta)


def slant_path_length(geom: LinkGeometry) -> float:
    """Straight atmospheric path from satellite to the sea surface, H sec(zeta)."""
    return geom.H / math.cos(geom.zeta)
