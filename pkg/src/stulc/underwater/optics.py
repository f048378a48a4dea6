"""Inherent optical properties and oceanic turbulence of the water column.

The refractive-index spectrum is the oceanic spectrum with a variable eddy
diffusivity ratio ``d_r``:

    Phi(k) = C0 / (4 pi) * a^2 chi_T / w^2 * eps^(-1/3) * k^(-11/3)
             * (1 + C1 (k eta)^(2/3))
             * (w^2 e^{-A_T delta} + d_r e^{-A_S delta} - w (1 + d_r) e^{-A_TS delta})

with ``delta = 1.5 C1^2 (k eta)^(4/3) + C1^3 (k eta)^2``,
``A_i = C0 C1^-2 / Pr_i`` and

    d_r = |w| + sqrt(|w|) sqrt(|w| - 1)   for |w| >= 1
    d_r = 1.85 |w| - 0.85                 for 0.5 <= |w| < 1
    d_r = 0.15 |w|                        for |w| < 0.5

Constants: ``C0 = 0.72``, ``C1 = 2.35``, Prandtl numbers 7 (temperature) and
700 (salinity), thermal expansion ``a = 2.6e-4`` 1/K, Kolmogorov scale
``eta = 1e-3`` m.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from ..numerics import QuadratureSpec, adaptive_integrate, composite_gauss_legendre

C0 = 0.72
C1 = 2.35
PRANDTL_T = 7.0
PRANDTL_S = 700.0
PRANDTL_TS = 2.0 * PRANDTL_T * PRANDTL_S / (PRANDTL_T + PRANDTL_S)
ALPHA_THERMAL = 2.6e-4
KOLMOGOROV_ETA = 1e-3


@dataclass(frozen=True)
class WaterOptics:
    k_a: float
    k_s: float
    g: float

    def __post_init__(self):
        if not (self.k_a > 0 and self.k_s > 0):
            raise ValueError("absorption and scattering coefficients must be positive")
        if not abs(self.g) < 1:
            raise ValueError("HG asymmetry must satisfy |g| < 1")

    @property
    def k_e(self) -> float:
        return self.k_a + self.k_s

    @property
    def albedo(self) -> float:
        return self.k_s / self.k_e


CLEAR_OCEAN = WaterOptics(0.069, 0.080, 0.8708)
COASTAL_OCEAN = WaterOptics(0.088, 0.216, 0.9470)
WATER_PRESETS = {"clear": CLEAR_OCEAN, "coastal": COASTAL_OCEAN}


@dataclass(frozen=True)
class OceanTurbulence:
    epsilon: float
    chi_T: float
    omega: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.chi_T < 0:
            raise ValueError("chi_T must be non-negative")
        if self.omega == 0:
            raise ValueError("omega must be non-zero")

    @property
    def is_null(self) -> bool:
        return self.chi_T == 0.0


WEAK_OCEAN = OceanTurbulence(1e-2, 1e-5, -3.0)
STRONG_OCEAN = OceanTurbulence(1e-3, 1e-4, -0.25)
NO_OCEAN_TURBULENCE = OceanTurbulence(1e-2, 0.0, -3.0)
OCEAN_PRESETS = {"weak": WEAK_OCEAN, "strong": STRONG_OCEAN, "none": NO_OCEAN_TURBULENCE}


def eddy_diffusivity_ratio(omega: float) -> float:
    w = abs(omega)
    if w >= 1.0:
        return w + math.sqrt(w) * math.sqrt(w - 1.0)
    if w >= 0.5:
        return 1.85 * w - 0.85
    return 0.15 * w


def oceanic_spectrum(kappa, turb: OceanTurbulence):
    """Refractive-index power spectrum Phi_n(kappa) in m^3."""
    kappa = np.asarray(kappa, dtype=float)
    w = turb.omega
    dr = eddy_diffusivity_ratio(w)
    ke = kappa * KOLMOGOROV_ETA
    delta = 1.5 * C1**2 * ke ** (4.0 / 3.0) + C1**3 * ke**2
    a = C0 / C1**2
    bracket = (w * w * np.exp(-a / PRANDTL_T * delta)
               + dr * np.exp(-a / PRANDTL_S * delta)
               - w * (1.0 + dr) * np.exp(-a / PRANDTL_TS * delta))
    pref = C0 / (4.0 * math.pi) * ALPHA_THERMAL**2 * turb.chi_T / (w * w) * turb.epsilon ** (-1.0 / 3.0)
    return pref * kappa ** (-11.0 / 3.0) * (1.0 + C1 * ke ** (2.0 / 3.0)) * bracket


def _sinc_deficit(a):
    """1 - sin(a)/a, with a series near zero to avoid cancellation."""
    a = np.asarray(a, dtype=float)
    small = np.abs(a) < 1e-3
    a2 = a * a
    series = a2 / 6.0 - a2 * a2 / 120.0
    safe = np.where(small, 1.0, a)
    return np.where(small, series, 1.0 - np.sin(safe) / safe)


# log-kappa panels wide enough to cover the inertial range and both cut-offs
_LOG_K_EDGES = np.linspace(math.log(1e-6), math.log(1e7), 131)


def underwater_rytov(L_u: float, turb: OceanTurbulence, k: float) -> float:
    """Rytov variance of a horizontal underwater leg of length ``L_u``.

    The path integral over ``xi`` is done in closed form,
    ``int_0^1 (1 - cos(a xi)) dxi = 1 - sin(a)/a`` with ``a = L_u kappa^2 / k``,
    leaving one wavenumber integral, which is evaluated in ``ln kappa`` by a
    composite Gauss-Legendre rule (13 decades, 12 nodes per panel).
    """
    if not L_u > 0:
        raise ValueError("leg length must be positive")
    if turb.is_null:
        return 0.0
    t, w = _log_kappa_rule()
    kap = np.exp(t)
    integrand = kap * kap * oceanic_spectrum(kap, turb) * _sinc_deficit(L_u * kap * kap / k)
    return float(8.0 * math.pi**2 * k * k * L_u * np.dot(w, integrand))


@lru_cache(maxsize=1)
def _log_kappa_rule():
    return composite_gauss_legendre(_LOG_K_EDGES, 12)


def underwater_rytov_nested(L_u: float, turb: OceanTurbulence, k: float,
                            spec: QuadratureSpec = QuadratureSpec(1e-8, 500)) -> float:
    """Literal nested adaptive evaluation (inner kappa mapped to a finite domain)."""
    if turb.is_null:
        return 0.0
    lo, hi = _LOG_K_EDGES[0], _LOG_K_EDGES[-1]
    breaks = list(np.linspace(lo, hi, 14)[1:-1])

    def inner(xi):
        def f(t):
            kap = math.exp(t)
            # 1 - cos x written as 2 sin^2(x/2) to avoid cancellation
            return kap * kap * float(oceanic_spectrum(kap, turb)) * 2.0 * math.sin(0.5 * L_u * kap * kap * xi / k) ** 2
        return adaptive_integrate(f, lo, hi, spec, points=breaks)

    outer = adaptive_integrate(inner, 0.0, 1.0, spec)
    return 8.0 * math.pi**2 * k * k * L_u * outer


def log_irradiance_variances(sigma_R_sq: float):
    s = sigma_R_sq ** (6.0 / 5.0)  # sigma^(12/5) from sigma^2
    sx = 0.49 * sigma_R_sq / (1.0 + 1.11 * s) ** (7.0 / 6.0)
    sy = 0.51 * sigma_R_sq / (1.0 + 0.69 * s) ** (5.0 / 6.0)
    return sx, sy


def scintillation_moment(sigma_R_sq):
    """Second irradiance moment M2 of one leg.

    ``exp(sigma_R^2)`` in weak turbulence; above ``sigma_R^2 = 1`` the
    saturated index ``1 + sigma_I^2 = exp(s_lnX + s_lnY)`` replaces it.
    """
    s2 = np.asarray(sigma_R_sq, dtype=float)
    if np.any(s2 < 0):
        raise ValueError("Rytov variance must be non-negative")
    p = s2 ** 1.2
    sat = 0.49 * s2 / (1.0 + 1.11 * p) ** (7.0 / 6.0) + 0.51 * s2 / (1.0 + 0.69 * p) ** (5.0 / 6.0)
    out = np.exp(np.where(s2 <= 1.0, s2, sat))
    return float(out) if out.ndim == 0 else out


def log_m2(sigma_R_sq):
    """``ln M2``; the kernels accumulate products of M2 as sums of these."""
    return np.log(scintillation_moment(sigma_R_sq))


@dataclass(frozen=True)
class RytovTable:
    """Memo of the underwater Rytov variance on a log-spaced leg grid.

    Between nodes ``ln sigma^2`` is linear in ``ln L``, which keeps the
    interpolant monotone; outside the grid the end segments are extended.
    """

    log_d_min: float
    log_d_step: float
    log_sigma: np.ndarray  # ln sigma_R^2 at the nodes, or all -inf when turbulence is off
    null: bool = False

    @classmethod
    def build(cls, turb: OceanTurbulence, k: float, nodes: int = 128,
              d_min: float = 1e-3, d_max: float = 1e3) -> "RytovTable":
        ld = np.linspace(math.log(d_min), math.log(d_max), nodes)
        if turb.is_null:
            return cls(float(ld[0]), float(ld[1] - ld[0]), np.full(nodes, -np.inf), True)
        vals = np.array([underwater_rytov(math.exp(x), turb, k) for x in ld])
        return cls(float(ld[0]), float(ld[1] - ld[0]), np.log(vals), False)

    @property
    def nodes(self) -> int:
        return len(self.log_sigma)

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        if self.null:
            out = np.zeros_like(d)
        else:
            u = (np.log(d) - self.log_d_min) / self.log_d_step
            i = np.clip(np.floor(u).astype(np.int64), 0, self.nodes - 2)
            t = u - i
            out = np.exp(self.log_sigma[i] + t * (self.log_sigma[i + 1] - self.log_sigma[i]))
        return float(out) if out.ndim == 0 else out
