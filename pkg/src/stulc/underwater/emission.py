"""Photon emission from the above-surface irradiance grid into the water."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..atmosphere import IrradianceGrid
from ..geometry import LinkGeometry
from ..interface.seasurface import SeaSurfaceField
from ..interface.slopes import CoxMunkParams, fresnel_transmittance, pitch_from_uniform, refract_many

# uniforms consumed per photon at emission: cell, jitter x, jitter y, pitch, azimuth
EMISSION_UNIFORMS = 5


@dataclass
class EmittedPhotons:
    """Surface entry points of a batch; discarded photons are flagged, not removed."""

    position: np.ndarray  # (n, 3)
    direction: np.ndarray  # (n, 3)
    weight: np.ndarray  # fading weight p_i
    transmittance: np.ndarray  # Fresnel Tr_i
    valid: np.ndarray  # bool
    receiving_plane: np.ndarray  # (n, 2) x_r, y_r
    outside_surface: int = 0
    invalid_facet: int = 0

    @property
    def launch_weight(self) -> np.ndarray:
        return np.where(self.valid, self.weight * self.transmittance, 0.0)


def cell_cdf(mean_grid: IrradianceGrid) -> np.ndarray:
    """Cumulative cell probabilities in column-major order."""
    p = np.asarray(mean_grid.values, dtype=float).ravel(order="F")
    total = p.sum()
    if not total > 0:
        raise ValueError("mean irradiance grid carries no power")
    cdf = np.cumsum(p / total)
    cdf[-1] = 1.0
    return cdf


def sample_cells(cdf: np.ndarray, u: np.ndarray, m: int):
    """Map uniforms to (row, col) through the column-major CDF."""
    k = np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)
    return k % m, k // m


def interpolate_cell_field(values: np.ndarray, half_width: float, x, y):
    """Bilinear interpolation of cell-centre values, clamped at the outer half cells."""
    m = values.shape[0]
    d = 2.0 * half_width / m
    fx = np.clip((np.asarray(x) + half_width) / d - 0.5, 0.0, m - 1.0)
    fy = np.clip((np.asarray(y) + half_width) / d - 0.5, 0.0, m - 1.0)
    c0 = np.minimum(np.floor(fx).astype(np.int64), m - 2) if m > 1 else np.zeros_like(fx, dtype=np.int64)
    r0 = np.minimum(np.floor(fy).astype(np.int64), m - 2) if m > 1 else np.zeros_like(fy, dtype=np.int64)
    if m == 1:
        return np.full(np.shape(fx), values[0, 0])
    tx, ty = fx - c0, fy - r0
    v = values
    return ((1 - tx) * (1 - ty) * v[r0, c0] + tx * (1 - ty) * v[r0, c0 + 1]
            + (1 - tx) * ty * v[r0 + 1, c0] + tx * ty * v[r0 + 1, c0 + 1])


def emit_photons(
    mean_grid: IrradianceGrid,
    fading: Optional[np.ndarray],
    geom: LinkGeometry,
    surface: SeaSurfaceField,
    cox_munk: CoxMunkParams,
    uniforms: np.ndarray,
    cdf: Optional[np.ndarray] = None,
) -> EmittedPhotons:
    """Launch one photon per row of ``uniforms`` (shape ``(n, 5)``).

    Parameters
    ----------
    mean_grid : IrradianceGrid
        Mean irradiance over the receiving plane; sets where photons start.
    fading : ndarray or None
        Per-cell fading coefficients (``m x m``, unit mean).  The photon
        weight is their bilinear interpolant at the photon position;
        ``None`` gives unit weights.
    geom : LinkGeometry
    surface : SeaSurfaceField
        Supplies the surface elevation at the contact point.
    cox_munk : CoxMunkParams
        Facet slope statistics for refraction.
    uniforms : ndarray
        Columns: cell, x jitter, y jitter, facet pitch, facet azimuth.
    """
    u = np.asarray(uniforms, dtype=float)
    if u.ndim != 2 or u.shape[1] != EMISSION_UNIFORMS:
        raise ValueError("uniforms must have shape (n, 5)")
    n = u.shape[0]
    m = mean_grid.m
    W = mean_grid.half_width
    d = 2.0 * W / m
    if cdf is None:
        cdf = cell_cdf(mean_grid)
    row, col = sample_cells(cdf, u[:, 0], m)
    x_r = d * (col + u[:, 1]) - W
    y_r = d * (row + u[:, 2]) - W
    weight = np.ones(n) if fading is None else interpolate_cell_field(np.asarray(fading), W, x_r, y_r)

    # elliptical footprint on the sea surface
    x_s = x_r
    y_s = y_r / math.cos(geom.zeta)
    inside = surface.contains(x_s, y_s)
    z_surf = np.zeros(n)
    if inside.any():
        z_surf[inside] = surface.elevation_at(x_s[inside], y_s[inside])
    pos = np.stack([x_s, y_s + geom.D * math.tan(geom.zeta_prime), z_surf + geom.D], axis=-1)

    theta_p = pitch_from_uniform(1.0 - u[:, 3], cox_munk.sigma_sq)
    phi_p = 2.0 * math.pi * u[:, 4]
    st = np.sin(theta_p)
    N = np.stack([np.cos(phi_p) * st, np.sin(phi_p) * st, np.cos(theta_p)], axis=-1)
    E = np.broadcast_to(np.array([0.0, -math.sin(geom.zeta), -math.cos(geom.zeta)]), N.shape)
    T, cos_a, alpha, beta = refract_many(E, N, geom.eta)
    facet_ok = np.isfinite(cos_a)
    valid = inside & facet_ok
    Tr = np.where(facet_ok, fresnel_transmittance(np.where(facet_ok, alpha, 0.0), np.where(facet_ok, beta, 0.0)), 0.0)
    T = np.where(valid[:, None], T, np.array([0.0, 0.0, -1.0]))
    return EmittedPhotons(
        position=pos, direction=T, weight=weight, transmittance=Tr, valid=valid,
        receiving_plane=np.stack([x_r, y_r], axis=-1),
        outside_surface=int(np.count_nonzero(~inside)),
        invalid_facet=int(np.count_nonzero(inside & ~facet_ok)),
    )
