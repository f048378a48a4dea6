"""Communication performance of the channel under thermal noise.

The received power is lognormal about the simulated mean, with log-variance
equal to the composed scintillation coefficient::

    ln P_r ~ N(ln <P_r> - s / 2, s)

so that ``E[P_r] = <P_r>``.  On-off keying with direct detection then has a
conditional error rate ``Q(R_d P_r / sqrt(2 N0))`` with ``N0 = 4KTB/R``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .numerics import NumericError, QuadratureSpec, adaptive_integrate, q_function

BOLTZMANN = 1.380649e-23  # J/K, exact since 2019
HERMITE_NODES = 64
BER_AGREEMENT = 1e-6

_GH_X, _GH_W = np.polynomial.hermite.hermgauss(HERMITE_NODES)


class NumericWarning(UserWarning):
    """Two evaluation routes of the same quantity disagree."""


class DegenerateDistributionError(NumericError):
    """A power distribution cannot be formed from the given results."""


@dataclass(frozen=True)
class NoiseModel:
    """Thermal-noise receiver front end (SI units)."""

    boltzmann: float = BOLTZMANN
    temperature: float = 300.0
    bandwidth: float = 1e9
    resistance: float = 1e6
    responsivity: float = 0.7

    def __post_init__(self):
        for name in ("boltzmann", "temperature", "bandwidth", "resistance", "responsivity"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")

    @property
    def n0(self) -> float:
        """Thermal noise spectral level ``4KTB/R``."""
        return 4.0 * self.boltzmann * self.temperature * self.bandwidth / self.resistance

    @property
    def ktb(self) -> float:
        return self.boltzmann * self.temperature * self.bandwidth


@dataclass(frozen=True)
class PowerDistribution:
    """Lognormal received power with mean ``mean_power`` and log-variance ``sigma_tur_sq``."""

    mean_power: float
    sigma_tur_sq: float

    def __post_init__(self):
        if not (math.isfinite(self.mean_power) and self.mean_power >= 0):
            raise ValueError(f"mean power must be finite and >= 0, got {self.mean_power!r}")
        if not (math.isfinite(self.sigma_tur_sq) and self.sigma_tur_sq >= 0):
            raise ValueError(f"sigma_tur_sq must be finite and >= 0, got {self.sigma_tur_sq!r}")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma_tur_sq)

    @property
    def log_mean(self) -> float:
        """Mean of ``ln P_r``."""
        return math.log(self.mean_power) - 0.5 * self.sigma_tur_sq

    def pdf(self, p):
        """Density in 1/W; zero for ``p <= 0``."""
        p = np.asarray(p, dtype=float)
        s = self.sigma
        if s == 0 or self.mean_power == 0:
            raise DegenerateDistributionError("degenerate lognormal has no density")
        safe = np.where(p > 0, p, 1.0)
        z = (np.log(safe) - self.log_mean) / s
        return np.where(p > 0, np.exp(-0.5 * z * z) / (s * math.sqrt(2.0 * math.pi) * safe), 0.0)

    def cdf(self, p):
        """``Pr(P_r <= p)``; a unit step at the mean when the variance is zero."""
        p = np.asarray(p, dtype=float)
        if self.mean_power == 0:
            return np.where(p >= 0, 1.0, 0.0)
        if self.sigma == 0:
            return np.where(p >= self.mean_power, 1.0, 0.0)
        safe = np.where(p > 0, p, 1.0)
        return np.where(p > 0, special.ndtr((np.log(safe) - self.log_mean) / self.sigma), 0.0)


@dataclass(frozen=True)
class BerResult:
    """Mean bit error rate plus its adaptive-quadrature cross-check."""

    value: float
    check: float
    discrepancy: float
    warning: str = ""

    def __float__(self) -> float:
        return self.value


def conditional_ber(p, noise: NoiseModel = NoiseModel()):
    """``Q(R_d P_r / sqrt(2 N0))``."""
    return q_function(noise.responsivity * np.asarray(p, dtype=float) / math.sqrt(2.0 * noise.n0))


def mean_ber(dist: PowerDistribution, noise: NoiseModel = NoiseModel()) -> BerResult:
    """Mean OOK bit error rate averaged over the lognormal power.

    Evaluated with 64-node Gauss-Hermite quadrature in ``ln P_r`` and checked
    against adaptive quadrature of the same integrand.  A disagreement above
    ``1e-6`` absolute raises :class:`NumericWarning` and is recorded on the
    result.
    """
    if dist.mean_power == 0:
        return BerResult(0.5, 0.5, 0.0)
    if dist.sigma_tur_sq == 0:
        v = float(conditional_ber(dist.mean_power, noise))
        return BerResult(v, v, 0.0)
    mu, s = dist.log_mean, dist.sigma
    a = noise.responsivity / math.sqrt(2.0 * noise.n0)

    gh = float(np.dot(_GH_W, q_function(a * np.exp(mu + math.sqrt(2.0) * s * _GH_X))) / math.sqrt(math.pi))

    def integrand(z):
        return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi) * float(q_function(a * math.exp(mu + s * z)))

    # the Gaussian weight is below 1e-30 past |z| = 12
    check = adaptive_integrate(integrand, -12.0, 12.0, QuadratureSpec(1e-12, 400), points=[0.0])
    gap = abs(gh - check)
    note = ""
    if gap > BER_AGREEMENT:
        note = f"Gauss-Hermite and adaptive BER disagree by {gap:.3e}"
        warnings.warn(note, NumericWarning, stacklevel=2)
    return BerResult(gh, check, gap, note)


def snr(p, noise: NoiseModel = NoiseModel()):
    """Electrical SNR ``2 R R_d^2 P_r^2 / (4KTB)``."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValueError("received power must be >= 0")
    out = 2.0 * noise.resistance * noise.responsivity**2 * p * p / (4.0 * noise.ktb)
    return float(out) if out.ndim == 0 else out


def outage_threshold_power(gamma_th, noise: NoiseModel = NoiseModel()):
    """Received power at which the SNR equals ``gamma_th``."""
    g = np.asarray(gamma_th, dtype=float)
    return np.sqrt(2.0 * g * noise.ktb / (noise.responsivity**2 * noise.resistance))


def outage_probability(dist: PowerDistribution, noise: NoiseModel, gamma_th):
    """``Pr(gamma_s < gamma_th)`` under the lognormal power model.

    With zero variance the power is deterministic and the result is a step
    that switches to 1 once the threshold power reaches the mean (taken
    right-continuous).
    """
    g = np.asarray(gamma_th, dtype=float)
    if np.any(~(g > 0)):
        raise ValueError("gamma_th must be > 0")
    pth = outage_threshold_power(g, noise)
    if dist.mean_power == 0:
        out = np.ones_like(pth)
    elif dist.sigma_tur_sq == 0:
        out = np.where(pth >= dist.mean_power, 1.0, 0.0)
    else:
        s = dist.sigma
        out = special.ndtr((np.log(pth / dist.mean_power) + 0.5 * dist.sigma_tur_sq) / s)
    return float(out) if out.ndim == 0 else out


def fit_power_distribution(results: Sequence) -> PowerDistribution:
    """Pool channel results into one lognormal model.

    Both the mean power and the scintillation coefficient are averaged with
    photon-count weights.
    """
    results = list(results)
    if not results:
        raise DegenerateDistributionError("no channel results to fit")
    n = np.array([r.photon_count for r in results], dtype=float)
    p = np.array([r.total_power for r in results], dtype=float)
    s = np.array([r.sigma_tur_sq for r in results], dtype=float)
    if np.any(n <= 0):
        raise DegenerateDistributionError("photon counts must be positive")
    mean = float(np.dot(n, p) / n.sum())
    if not mean > 0:
        raise DegenerateDistributionError("received power is zero; BER and outage are undefined")
    return PowerDistribution(mean, float(np.dot(n, s) / n.sum()))
