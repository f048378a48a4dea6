"""Cox-Munk facet statistics, vector refraction and Fresnel transmittance."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ..geometry import ETA_AIR_WATER
from ..numerics import RngStream

RngLike = Union[RngStream, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RngStream) else rng


class RefractionError(ValueError):
    """The incident ray does not hit the facet from the air side."""


@dataclass(frozen=True)
class CoxMunkParams:
    """Wind-driven slope statistics.

    ``sigma_sq`` defaults to ``sqrt(0.003 + 0.00512 v)``; passing it
    explicitly overrides the wind law (useful for calm-limit checks).
    """

    wind_speed_v: float
    sigma_sq: Optional[float] = None

    def __post_init__(self):
        if self.wind_speed_v < 0:
            raise ValueError("wind speed must be non-negative")
        if self.sigma_sq is None:
            object.__setattr__(self, "sigma_sq", math.sqrt(0.003 + 0.00512 * self.wind_speed_v))
        elif not self.sigma_sq > 0:
            raise ValueError("sigma_sq must be positive")


def pitch_pdf(theta_p, sigma_sq: float):
    """One-sided Cox-Munk density of the facet pitch angle on [0, pi/2)."""
    t = np.tan(theta_p)
    return 2.0 / sigma_sq * np.exp(-t * t / sigma_sq) * t / np.cos(theta_p) ** 2


def signed_pitch_pdf(theta_p, sigma_sq: float):
    """Cox-Munk density split evenly over both tilt directions, on (-pi/2, pi/2)."""
    t = np.tan(theta_p)
    return 1.0 / sigma_sq * np.exp(-t * t / sigma_sq) * np.abs(t) / np.cos(theta_p) ** 2


def pitch_from_uniform(u, sigma_sq: float):
    """Inverse CDF of the pitch density: tan^2 theta_p is exponential with mean sigma^2."""
    return np.arctan(np.sqrt(-sigma_sq * np.log(u)))


def sample_pitch_angle(params: CoxMunkParams, rng: RngLike, size=None):
    gen = as_generator(rng)
    # 1 - U keeps the argument of the log inside (0, 1]
    return pitch_from_uniform(1.0 - gen.random(size), params.sigma_sq)


def normal_from_angles(theta_p, phi_p) -> np.ndarray:
    theta_p = np.asarray(theta_p, dtype=float)
    phi_p = np.asarray(phi_p, dtype=float)
    s = np.sin(theta_p)
    return np.stack([np.cos(phi_p) * s, np.sin(phi_p) * s, np.cos(theta_p)], axis=-1)


def facet_normal(params: CoxMunkParams, rng: RngLike, size=None) -> np.ndarray:
    """Upward unit facet normal(s) with Cox-Munk pitch and uniform azimuth."""
    gen = as_generator(rng)
    theta_p = pitch_from_uniform(1.0 - gen.random(size), params.sigma_sq)
    phi_p = 2.0 * math.pi * gen.random(size)
    return normal_from_angles(theta_p, phi_p)


@dataclass(frozen=True)
class RefractionEvent:
    incident_dir: np.ndarray
    facet_normal: np.ndarray
    refracted_dir: np.ndarray
    alpha: float
    beta: float
    transmittance: float


def refract_many(incident: np.ndarray, normal: np.ndarray, eta: float = ETA_AIR_WATER):
    """Vectorised refraction; returns ``(T, cos_alpha, alpha, beta)``.

    Rows with ``cos_alpha <= 0`` come back as NaN and must be discarded by
    the caller.
    """
    E = np.asarray(incident, dtype=float)
    N = np.asarray(normal, dtype=float)
    cos_a = -np.sum(N * E, axis=-1)
    bad = cos_a <= 0.0
    cos_a_safe = np.where(bad, np.nan, cos_a)
    cos_b = np.sqrt(1.0 - eta**2 * (1.0 - cos_a_safe**2))
    T = eta * E + N * (eta * cos_a_safe - cos_b)[..., None]
    T = T / np.linalg.norm(T, axis=-1, keepdims=True)
    alpha = np.arccos(np.clip(cos_a_safe, -1.0, 1.0))
    beta = np.arcsin(eta * np.sin(alpha))
    return T, cos_a_safe, alpha, beta


def refract(incident, normal, eta: float = ETA_AIR_WATER) -> RefractionEvent:
    """Refract one ray through a facet (air to water)."""
    E = np.asarray(incident, dtype=float)
    N = np.asarray(normal, dtype=float)
    cos_a = -float(N @ E)
    if cos_a <= 0.0:
        raise RefractionError("incident ray does not enter the facet")
    T, _, alpha, beta = refract_many(E[None, :], N[None, :], eta)
    a, b = float(alpha[0]), float(beta[0])
    return RefractionEvent(E, N, T[0], a, b, float(fresnel_transmittance(a, b)))


def fresnel_transmittance(alpha, beta):
    """Unpolarised air-water transmittance for incidence ``alpha`` and refraction ``beta``.

    At normal incidence the ratio of sines is replaced by its limit
    ``4 r / (1 + r)**2`` with ``r = beta / alpha``.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    small = alpha < 1e-6
    a = np.where(small, 1.0, alpha)
    b = np.where(small, 1.0, beta)
    ts = np.sin(2 * a) * np.sin(2 * b) / np.sin(a + b) ** 2
    c2 = np.cos(a - b) ** 2
    tr = np.abs(0.5 * ts * (1.0 + c2) / c2)
    if small.any():
        # beta/alpha -> eta as alpha -> 0, and cos(alpha - beta) -> 1
        ratio = np.where(alpha > 0, beta / np.where(alpha > 0, alpha, 1.0), ETA_AIR_WATER)
        tr = np.where(small, 4.0 * ratio / (1.0 + ratio) ** 2, tr)
    return float(tr) if tr.ndim == 0 else tr
