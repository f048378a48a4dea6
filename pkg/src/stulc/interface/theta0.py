"""Closed-form distribution of the refracted-direction deviation theta_0.

theta_0 is the angle between a photon refracted by a tilted facet and the
calm-surface refraction direction T'.  With in-plane facet tilt of random
sign, a refraction that bends the ray by ``gamma = alpha - beta`` lands at
``|delta - gamma|`` (tilt on the far side of the beam) or ``delta + gamma``
(tilt on the near side), where ``delta = zeta - zeta'``.  Inverting
``gamma(alpha)`` and changing variables gives a three-piece density on
``[0, support_max]``.

Facets tilted so far that the beam would hit them from behind
(``alpha >= pi/2``) cannot refract, so the density is conditioned on a valid
refraction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..geometry import ETA_AIR_WATER, refraction_angle
from ..numerics import NumericError, QuadratureSpec, adaptive_integrate, composite_gauss_legendre
from .slopes import CoxMunkParams, RngLike, as_generator, pitch_from_uniform, refract_many, signed_pitch_pdf


def deflection(alpha, eta: float = ETA_AIR_WATER):
    """Angle between incident and refracted ray, gamma(alpha) = alpha - beta."""
    return alpha - np.arcsin(eta * np.sin(alpha))


def incidence_from_deflection(gamma, eta: float = ETA_AIR_WATER):
    """Inverse of :func:`deflection` on ``[0, arccos(eta)]``.

    ``sin^2 alpha = (1 - cos^2 gamma) / (1 + eta^2 - 2 eta cos gamma)``; with
    ``eta = 3/4`` this is ``4 (x^2 - 1) / (6 x - 25/4)`` in ``x = cos gamma``.
    """
    gamma = np.asarray(gamma, dtype=float)
    s2 = np.sin(gamma) ** 2 / (1.0 + eta**2 - 2.0 * eta * np.cos(gamma))
    return np.arcsin(np.sqrt(np.clip(s2, 0.0, 1.0)))


def incidence_derivative(alpha, eta: float = ETA_AIR_WATER):
    """d alpha / d gamma, positive on [0, pi/2]."""
    cos_b = np.sqrt(1.0 - (eta * np.sin(alpha)) ** 2)
    return cos_b / (cos_b - eta * np.cos(alpha))


@dataclass(frozen=True)
class Theta0Pdf:
    zeta: float
    zeta_prime: float
    sigma_sq: float
    eta: float = ETA_AIR_WATER

    @classmethod
    def for_link(cls, zeta: float, params: CoxMunkParams, eta: float = ETA_AIR_WATER) -> "Theta0Pdf":
        return cls(zeta=zeta, zeta_prime=refraction_angle(zeta, eta), sigma_sq=params.sigma_sq, eta=eta)

    @property
    def delta(self) -> float:
        return self.zeta - self.zeta_prime

    @property
    def near_side_limit(self) -> float:
        """End of the near-side (negative tilt) contribution."""
        return self.delta + float(deflection(math.pi / 2 - self.zeta, self.eta))

    @property
    def support_max(self) -> float:
        far = abs(self.delta - math.acos(self.eta))
        return max(far, self.delta, self.near_side_limit)

    @property
    def valid_fraction(self) -> float:
        """Probability that a facet is hit from the air side."""
        if self.zeta == 0.0:
            return 1.0
        cot = 1.0 / math.tan(self.zeta)
        return 1.0 - 0.5 * math.exp(-cot * cot / self.sigma_sq)


def theta0_pdf(pdf: Theta0Pdf, theta0):
    """Density of theta_0 in 1/rad; zero outside ``[0, support_max]``."""
    th = np.asarray(theta0, dtype=float)
    eta, zeta, delta = pdf.eta, pdf.zeta, pdf.delta
    gmax = math.acos(eta)
    out = np.zeros(th.shape)

    def term(gamma, mask, near_side):
        g = np.where(mask, gamma, 0.0)
        a = incidence_from_deflection(g, eta)
        tilt = a + zeta if near_side else a - zeta
        val = signed_pitch_pdf(tilt, pdf.sigma_sq) * incidence_derivative(a, eta)
        return np.where(mask, val, 0.0)

    inside = (th >= 0.0) & (th <= pdf.support_max)
    # far-side tilt, gamma = delta + theta0 (every branch)
    g1 = delta + th
    out += term(g1, inside & (g1 <= gmax), near_side=False)
    # far-side tilt, gamma = delta - theta0 (first branch only)
    out += term(delta - th, inside & (th < delta), near_side=False)
    # near-side tilt, gamma = theta0 - delta (middle branch)
    out += term(th - delta, inside & (th >= delta) & (th < pdf.near_side_limit), near_side=True)
    out /= pdf.valid_fraction
    return float(out) if out.ndim == 0 else out


def theta0_breakpoints(pdf: Theta0Pdf):
    pts = [pdf.delta, pdf.near_side_limit, math.acos(pdf.eta) - pdf.delta]
    return sorted(p for p in pts if 0.0 < p < pdf.support_max)


def pdf_normalization(pdf: Theta0Pdf, rtol: float = 1e-9) -> float:
    spec = QuadratureSpec(relative_tolerance=rtol, max_subdivisions=2000)
    return adaptive_integrate(lambda t: theta0_pdf(pdf, t), 0.0, pdf.support_max, spec,
                              points=theta0_breakpoints(pdf))


def branch_gaps(pdf: Theta0Pdf, eps: float = 1e-9):
    """Relative jumps of the density across its interior breakpoints."""
    gaps = {}
    for name, p in (("delta", pdf.delta), ("near_side_limit", pdf.near_side_limit)):
        if 0.0 < p < pdf.support_max:
            left, right = theta0_pdf(pdf, p - eps), theta0_pdf(pdf, p + eps)
            scale = max(abs(left), abs(right), 1e-300)
            gaps[name] = abs(left - right) / scale
    return gaps


# ---------------------------------------------------------------------------
# sampling


class Theta0Sampler:
    """Inverse-transform sampler on a tabulated CDF.

    Nodes cluster near zero (``theta = support * u**3``) where the mass of
    a calm sea concentrates; cell masses come from 4-point Gauss-Legendre.
    """

    def __init__(self, pdf: Theta0Pdf, nodes: int = 4096):
        self.pdf = pdf
        u = np.linspace(0.0, 1.0, nodes)
        grid = pdf.support_max * u**3
        grid = np.unique(np.concatenate([grid, theta0_breakpoints(pdf)]))
        x, w = composite_gauss_legendre(grid, 4)
        dens = theta0_pdf(pdf, x)
        if not np.all(np.isfinite(dens)):
            raise NumericError("non-finite theta0 density while tabulating the CDF")
        mass = (dens * w).reshape(-1, 4).sum(axis=1)
        cdf = np.concatenate([[0.0], np.cumsum(mass)])
        if not cdf[-1] > 0:
            raise NumericError("theta0 density integrates to zero")
        self.grid = grid
        self.cdf = cdf / cdf[-1]
        self.cell_mass = mass / cdf[-1]

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        idx = np.clip(np.searchsorted(self.cdf, u, side="right") - 1, 0, len(self.grid) - 2)
        lo, hi = self.cdf[idx], self.cdf[idx + 1]
        width = hi - lo
        frac = np.where(width > 0, (u - lo) / np.where(width > 0, width, 1.0), 0.0)
        return self.grid[idx] + np.clip(frac, 0.0, 1.0) * (self.grid[idx + 1] - self.grid[idx])

    def sample(self, rng: RngLike, size=None):
        return self.quantile(as_generator(rng).random(size))


def sample_theta0(pdf: Theta0Pdf, rng: RngLike, size=None, nodes: int = 4096):
    return Theta0Sampler(pdf, nodes).sample(rng, size)


def solid_angle_density_table(pdf: Theta0Pdf, cells: int = 4096):
    """Per-steradian density of the refracted direction around T'.

    Directions have zenith density ``f(theta0)`` about T' and uniform azimuth;
    each annulus holds its probability mass spread over its solid angle.
    Returns ``(theta_edges, density)`` with ``len(density) == cells``.
    """
    edges = np.linspace(0.0, pdf.support_max, cells + 1)
    pts = theta0_breakpoints(pdf)
    fine = np.unique(np.concatenate([edges, pts]))
    x, w = composite_gauss_legendre(fine, 6)
    mass_fine = (theta0_pdf(pdf, x) * w).reshape(-1, 6).sum(axis=1)
    # fold the breakpoint-split cells back onto the uniform annuli
    owner = np.clip(np.searchsorted(edges, fine[:-1], side="right") - 1, 0, cells - 1)
    mass = np.bincount(owner, weights=mass_fine, minlength=cells)
    solid = 2.0 * math.pi * (np.cos(edges[:-1]) - np.cos(edges[1:]))
    return edges, mass / solid


# ---------------------------------------------------------------------------
# brute-force refraction reference


def refracted_deviation_samples(zeta: float, params: CoxMunkParams, rng: RngLike, n: int,
                                eta: float = ETA_AIR_WATER, in_plane: bool = True):
    """Refract ``n`` rays through random Cox-Munk facets; return angles to T' in rad.

    ``in_plane=True`` tilts each facet within the plane of incidence with an
    equiprobable sign, the setting the closed form describes.  With
    ``in_plane=False`` the tilt azimuth is uniform on the circle.  Facets hit
    from behind are dropped; the second return value counts them.
    """
    gen = as_generator(rng)
    theta_p = pitch_from_uniform(1.0 - gen.random(n), params.sigma_sq)
    if in_plane:
        sign = np.where(gen.random(n) < 0.5, -1.0, 1.0)
        t = sign * theta_p
        # positive tilt leans the normal away from the incoming beam (towards -y)
        N = np.stack([np.zeros(n), -np.sin(t), np.cos(t)], axis=-1)
    else:
        phi = 2.0 * math.pi * gen.random(n)
        s = np.sin(theta_p)
        N = np.stack([np.cos(phi) * s, np.sin(phi) * s, np.cos(theta_p)], axis=-1)
    E = np.array([0.0, -math.sin(zeta), -math.cos(zeta)])
    zp = refraction_angle(zeta, eta)
    T_calm = np.array([0.0, -math.sin(zp), -math.cos(zp)])
    T, cos_a, _, _ = refract_many(np.broadcast_to(E, N.shape), N, eta)
    ok = np.isfinite(cos_a)
    dev = np.arccos(np.clip(T[ok] @ T_calm, -1.0, 1.0))
    return dev, int(n - ok.sum())


def l1_distance(pdf: Theta0Pdf, samples: np.ndarray, bins: int = 100) -> float:
    """L1 distance between a normalised histogram of ``samples`` and the closed form.

    The closed form is averaged over each bin so that steep parts of the
    density are compared like for like.
    """
    edges = np.linspace(0.0, pdf.support_max, bins + 1)
    hist, _ = np.histogram(samples, bins=edges)
    width = np.diff(edges)
    emp = hist / (len(samples) * width)
    x, w = composite_gauss_legendre(edges, 8)
    exact = (theta0_pdf(pdf, x) * w).reshape(bins, 8).sum(axis=1) / width
    outside = np.count_nonzero(samples > pdf.support_max) / len(samples)
    return float(np.sum(np.abs(emp - exact) * width) + outside)
