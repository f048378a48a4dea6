"""Analytical atmospheric channel.

Mean irradiance of a Gaussian beam after a turbulent slant path reduces to
a Gaussian with the long-term spot radius.  Intensity fluctuations over the
above-surface receiving plane are jointly lognormal with a covariance that
depends on the distance between grid cells.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import LinkGeometry, slant_path_length
from .numerics import (
    NumericError,
    QuadratureSpec,
    RngStream,
    adaptive_integrate,
    bessel_k,
    composite_gauss_legendre,
    hyp1f1,
)

_QUAD = QuadratureSpec(relative_tolerance=1e-11, max_subdivisions=500)


@dataclass(frozen=True)
class TurbulenceProfile:
    """Hufnagel-Valley profile parameters.

    ``cn2_ground`` is the structure parameter at sea level in m^(-2/3).
    """

    cn2_ground: float
    wind_high_altitude: float = 21.0
    outer_scale_L0: float = 10.0

    def __post_init__(self):
        if self.cn2_ground < 0:
            raise ValueError("cn2_ground must be non-negative")
        if not self.outer_scale_L0 > 0:
            raise ValueError("outer scale must be positive")
        if 0.715 * (2 * math.pi / self.outer_scale_L0) ** (1 / 3) >= 1.0:
            raise ValueError("outer scale too small: coherence-length correction becomes non-positive")

    @property
    def kappa0(self) -> float:
        return 2.0 * math.pi / self.outer_scale_L0


WEAK_TURBULENCE = TurbulenceProfile(cn2_ground=1.7e-17)
STRONG_TURBULENCE = TurbulenceProfile(cn2_ground=1.7e-13)
ATMOSPHERE_PRESETS = {"weak": WEAK_TURBULENCE, "strong": STRONG_TURBULENCE}


@dataclass(frozen=True)
class BeamParams:
    wavelength: float = 532e-9
    divergence_beta_T: float = 22e-6
    transmit_power: float = 5.0
    phase_front_radius_F0: float = math.inf
    atmospheric_transmittance_xi_t: float = 0.7

    def __post_init__(self):
        if not (self.wavelength > 0 and self.divergence_beta_T > 0 and self.transmit_power > 0):
            raise ValueError("wavelength, divergence and power must be positive")
        if not 0 < self.atmospheric_transmittance_xi_t <= 1:
            raise ValueError("atmospheric transmittance must lie in (0, 1]")

    @property
    def k(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def W0(self) -> float:
        return self.wavelength / (math.pi * self.divergence_beta_T)

    @property
    def I0(self) -> float:
        return self.transmit_power / (math.pi * self.W0**2)


@dataclass
class IrradianceGrid:
    """Square receiving plane of side ``2 * half_width`` split into ``m x m`` cells.

    ``values[row, col]``: row indexes y and col indexes x, both ascending.
    """

    m: int
    cell_size_dm: float
    half_width: float
    values: np.ndarray
    kind: str = "mean"

    @property
    def centers(self) -> np.ndarray:
        return self.cell_size_dm * (np.arange(self.m) + 0.5) - self.half_width


@dataclass
class FadingField:
    xi_f: np.ndarray
    sigma_ln: np.ndarray
    covariance: Optional[np.ndarray] = field(default=None, repr=False)


# ---------------------------------------------------------------------------
# turbulence profile


def cn2_profile(h, profile: TurbulenceProfile):
    """Hufnagel-Valley C_n^2(h) in m^(-2/3) at altitude ``h`` metres."""
    h = np.asarray(h, dtype=float)
    w = profile.wind_high_altitude
    val = (
        0.00594 * (w / 27.0) ** 2 * (h * 1e-5) ** 10 * np.exp(-h / 1000.0)
        + 2.7e-16 * np.exp(-h / 1500.0)
        + profile.cn2_ground * np.exp(-h / 100.0)
    )
    return float(val) if val.ndim == 0 else val


def _altitude_breaks(H: float):
    return [b for b in (100.0, 300.0, 1000.0, 1500.0, 3000.0, 6000.0, 10000.0, 15000.0, 25000.0, 50000.0) if b < H]


def cn2_weighted_integral(profile: TurbulenceProfile, H: float, weight) -> float:
    """int_0^H C_n^2(h) weight(h) dh by adaptive quadrature."""
    return adaptive_integrate(lambda h: cn2_profile(h, profile) * weight(h), 0.0, H, _QUAD,
                              points=_altitude_breaks(H))


# ---------------------------------------------------------------------------
# mean irradiance


def coherence_length_sq(beam: BeamParams, geom: LinkGeometry, profile: TurbulenceProfile) -> float:
    """Squared spherical-wave coherence length; ``inf`` for a turbulence-free path."""
    L = slant_path_length(geom)
    H = geom.H
    integral = cn2_weighted_integral(profile, H, lambda h: (1.0 - h / H) ** (5.0 / 3.0)) / H
    if integral <= 0.0:
        return math.inf
    outer = 1.0 - 0.715 * profile.kappa0 ** (1.0 / 3.0)
    return (1.46 * beam.k**2 * L * integral) ** (-6.0 / 5.0) / outer


def long_term_spot_radius(beam: BeamParams, geom: LinkGeometry, profile: TurbulenceProfile) -> float:
    """Turbulence-broadened Gaussian spot radius W_Lt at the end of the slant path."""
    L = slant_path_length(geom)
    k, W0 = beam.k, beam.W0
    F0 = beam.phase_front_radius_F0
    focus = (L / F0 - 1.0) ** 2 if math.isfinite(F0) else 1.0
    rho0_sq = coherence_length_sq(beam, geom, profile)
    turb = 0.0 if math.isinf(rho0_sq) else 4.0 * L**2 / (k**2 * W0**2 * rho0_sq)
    return W0 * math.sqrt(focus + L**2 / (k**2 * W0**4) + turb)


def mean_irradiance(r, beam: BeamParams, W_Lt: float):
    r = np.asarray(r, dtype=float)
    return beam.I0 * beam.W0**2 / W_Lt**2 * np.exp(-(r**2) / W_Lt**2)


def continuous_beam_power(beam: BeamParams, W_Lt: float) -> float:
    """Closed-form integral of the mean irradiance over the infinite plane."""
    return beam.I0 * beam.W0**2 / W_Lt**2 * math.pi * W_Lt**2


def mean_irradiance_grid(beam: BeamParams, W_Lt: float, m: int) -> IrradianceGrid:
    """Mean irradiance sampled at the cell centres of a ``2 W_Lt`` square plane."""
    if m < 1 or not W_Lt > 0:
        raise ValueError("need m >= 1 and W_Lt > 0")
    d = 2.0 * W_Lt / m
    c = d * (np.arange(m) + 0.5) - W_Lt
    r2 = c[None, :] ** 2 + c[:, None] ** 2
    values = beam.I0 * beam.W0**2 / W_Lt**2 * np.exp(-r2 / W_Lt**2)
    return IrradianceGrid(m=m, cell_size_dm=d, half_width=W_Lt, values=values, kind="mean")


# ---------------------------------------------------------------------------
# scintillation


def slant_rytov_variance(geom: LinkGeometry, profile: TurbulenceProfile, k: float) -> float:
    """Rytov variance of the slant downlink."""
    integral = cn2_weighted_integral(profile, geom.H, lambda h: h ** (5.0 / 6.0))
    return 2.25 * k ** (7.0 / 6.0) / math.cos(geom.zeta) ** (11.0 / 6.0) * integral


def log_irradiance_variances(sigma_R2: float):
    """Large- and small-scale log-irradiance variances for a Rytov variance."""
    s125 = sigma_R2 ** 1.2
    sx = 0.49 * sigma_R2 / (1.0 + 1.11 * s125) ** (7.0 / 6.0)
    sy = 0.51 * sigma_R2 / (1.0 + 0.69 * s125) ** (5.0 / 6.0)
    return sx, sy


def _eta_xy(sigma_R2: float):
    s125 = sigma_R2 ** 1.2
    return 0.92 / (1.0 + 1.11 * s125), 3.0 * (1.0 + 0.69 * s125)


def _mu4d_nodes(H: float, n_panels: int = 64, order: int = 12):
    # h = u**3 removes the xi**(-1/3) endpoint singularity
    u_edges = np.linspace(0.0, H ** (1.0 / 3.0), n_panels + 1)
    u, w = composite_gauss_legendre(u_edges, order)
    return u**3, w * 3.0 * u**2


def _mu4d_integrand(h, rho, geom, profile, k, eta_x):
    L = slant_path_length(geom)
    xi = np.asarray(h, dtype=float) / geom.H
    damp = 1.0 - 0.625 * xi
    base = cn2_profile(geom.H * xi, profile) / (xi ** (1.0 / 3.0) * damp**1.4)
    if rho == 0.0:
        return base
    z = -k * rho**2 * eta_x / (8.0 * L * xi ** (5.0 / 3.0) * damp)
    return base * hyp1f1(1.4, 1.0, z)


def mu4d(rho: float, geom: LinkGeometry, profile: TurbulenceProfile, k: float, eta_x: Optional[float] = None) -> float:
    """Structure integral of the large-scale covariance, by adaptive quadrature."""
    if eta_x is None:
        eta_x, _ = _eta_xy(slant_rytov_variance(geom, profile, k))
    f = lambda h: float(_mu4d_integrand(h, rho, geom, profile, k, eta_x))
    return adaptive_integrate(f, 0.0, geom.H, _QUAD, points=_altitude_breaks(geom.H)) / geom.H


def mu4d_many(rho: np.ndarray, geom: LinkGeometry, profile: TurbulenceProfile, k: float, eta_x: float) -> np.ndarray:
    """Vectorised ``mu4d`` over many separations on a fixed composite rule."""
    h, w = _mu4d_nodes(geom.H)
    L = slant_path_length(geom)
    xi = h / geom.H
    damp = 1.0 - 0.625 * xi
    base = cn2_profile(h, profile) / (xi ** (1.0 / 3.0) * damp**1.4) * w / geom.H
    scale = k * eta_x / (8.0 * L * xi ** (5.0 / 3.0) * damp)
    out = np.empty(len(rho))
    for i, r in enumerate(np.asarray(rho, dtype=float)):
        if r == 0.0:
            out[i] = base.sum()
        else:
            out[i] = np.dot(base, hyp1f1(1.4, 1.0, -scale * r * r))
    return out


def intensity_covariance(rho, geom: LinkGeometry, profile: TurbulenceProfile, k: float) -> np.ndarray:
    """Covariance B(rho) of the unit-mean fading coefficient at separations ``rho``.

    At zero separation the exact value exp(sx + sy) - 1 is returned.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    sR2 = slant_rytov_variance(geom, profile, k)
    sx, sy = log_irradiance_variances(sR2)
    eta_x, eta_y = _eta_xy(sR2)
    L = slant_path_length(geom)
    out = np.full(rho.shape, math.expm1(sx + sy))
    pos = rho > 0
    if not pos.any() or sR2 == 0.0:
        out[pos] = 0.0 if sR2 == 0.0 else out[pos]
        return out
    r = rho[pos]
    m_ratio = mu4d_many(r, geom, profile, k, eta_x) / mu4d_many(np.zeros(1), geom, profile, k, eta_x)[0]
    x = k * r**2 * eta_y / L
    small_scale = 0.99 * x ** (5.0 / 12.0) * bessel_k(5.0 / 6.0, np.sqrt(x))
    out[pos] = np.exp(m_ratio * sx + small_scale * sy) - 1.0
    return out


def fading_covariance(grid: IrradianceGrid, geom: LinkGeometry, profile: TurbulenceProfile, k: float) -> np.ndarray:
    """M x M covariance of the per-cell fading coefficients (row-major cell order)."""
    m = grid.m
    di = np.arange(m)
    # separations on a regular lattice only depend on |delta row|, |delta col|
    sq = (di[:, None] ** 2 + di[None, :] ** 2).ravel()
    uniq, inv = np.unique(sq, return_inverse=True)
    b_uniq = intensity_covariance(grid.cell_size_dm * np.sqrt(uniq), geom, profile, k)
    table = b_uniq[inv].reshape(m, m)
    rows, cols = np.divmod(np.arange(m * m), m)
    dr = np.abs(rows[:, None] - rows[None, :])
    dc = np.abs(cols[:, None] - cols[None, :])
    cov = table[dr, dc]
    return 0.5 * (cov + cov.T)


def _cholesky_with_jitter(mat: np.ndarray) -> np.ndarray:
    scale = float(np.max(np.diag(mat)))
    eps = 1e-10 * scale
    eye = np.eye(mat.shape[0])
    while True:
        try:
            return np.linalg.cholesky(mat + eps * eye)
        except np.linalg.LinAlgError:
            if eps >= 1e-6 * scale:
                raise NumericError("covariance is not positive semi-definite even after jitter") from None
            eps *= 10.0


def sample_fading_field(cov: np.ndarray, sigma_ln: np.ndarray, rng: RngStream, draws: int = 1) -> FadingField:
    """Draw jointly lognormal unit-mean fading coefficients.

    ``cov`` is the covariance of the coefficients themselves; the log-domain
    covariance is ``ln(1 + cov)``.
    """
    cov = np.asarray(cov, dtype=float)
    sigma_ln = np.asarray(sigma_ln, dtype=float)
    M = cov.shape[0]
    if np.max(np.abs(cov), initial=0.0) == 0.0:
        xi = np.ones((draws, M))
        return FadingField(xi_f=xi[0] if draws == 1 else xi, sigma_ln=sigma_ln, covariance=cov)
    log_cov = np.log1p(cov)
    log_cov = 0.5 * (log_cov + log_cov.T)
    chol = _cholesky_with_jitter(log_cov)
    z = rng.generator().standard_normal((draws, M))
    log_xi = z @ chol.T - 0.5 * sigma_ln[None, :]
    xi = np.exp(log_xi)
    return FadingField(xi_f=xi[0] if draws == 1 else xi, sigma_ln=sigma_ln, covariance=cov)


def fading_log_variance(geom: LinkGeometry, profile: TurbulenceProfile, k: float) -> float:
    """Per-cell variance of ln(xi_f), the zero-separation limit of the covariance."""
    sx, sy = log_irradiance_variances(slant_rytov_variance(geom, profile, k))
    return sx + sy


def instantaneous_irradiance(mean_grid: IrradianceGrid, fading: FadingField, xi_t: float) -> IrradianceGrid:
    xi = np.asarray(fading.xi_f).reshape(mean_grid.m, mean_grid.m)
    return IrradianceGrid(m=mean_grid.m, cell_size_dm=mean_grid.cell_size_dm, half_width=mean_grid.half_width,
                          values=mean_grid.values * xi_t * xi, kind="instantaneous")
