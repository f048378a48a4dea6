"""Photon-level primitives: free paths, HG deflection, direction update, detection."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from ..interface.slopes import RngLike, as_generator
from .optics import WaterOptics

DEGENERATE_AXIS = 1e-10


class DegenerateGeometryError(ValueError):
    """The scoring point coincides with the receiver."""


@dataclass(frozen=True)
class Receiver:
    """Submerged receiver at ``position`` looking along its FOV axis.

    ``theta_R`` is measured from the horizontal plane, so the defaults
    (90 deg, 90 deg) point the axis straight up at the sea surface.
    """

    aperture_area: float = 1.77e-4
    theta_R: float = math.pi / 2
    phi_R: float = math.pi / 2
    beta_R: float = math.pi / 2
    position: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.aperture_area > 0:
            raise ValueError("aperture area must be positive")
        if not 0.0 < self.beta_R <= math.pi:
            raise ValueError("FOV half-angle must lie in (0, pi]")

    @property
    def aperture_radius(self) -> float:
        return math.sqrt(self.aperture_area / math.pi)

    @property
    def fov_axis(self) -> np.ndarray:
        c = math.cos(self.theta_R)
        axis = np.array([c * math.cos(self.phi_R), c * math.sin(self.phi_R), math.sin(self.theta_R)])
        return axis / np.linalg.norm(axis)


@dataclass
class Photon:
    position: np.ndarray
    direction: np.ndarray
    weight: float = 1.0
    transmittance: float = 1.0
    scatter_order: int = 0
    leg_lengths: List[float] = field(default_factory=list)
    alive: bool = True


def step_from_uniform(u, k_e: float):
    """Free path ``-ln(xi)/k_e``; callers pass ``xi = 1 - U`` with ``U`` in [0, 1)."""
    return -np.log(u) / k_e


def sample_step(k_e: float, rng: RngLike, size=None):
    if not k_e > 0:
        raise ValueError("extinction coefficient must be positive")
    return step_from_uniform(1.0 - as_generator(rng).random(size), k_e)


def hg_cos_from_uniform(u, g: float):
    """Inverse CDF of the Henyey-Greenstein phase function in ``cos(theta)``."""
    u = np.asarray(u, dtype=float)
    if g == 0.0:
        return 2.0 * u - 1.0
    frac = (1.0 - g * g) / (1.0 - g + 2.0 * g * u)
    return np.clip((1.0 + g * g - frac * frac) / (2.0 * g), -1.0, 1.0)


def sample_hg_angle(g: float, rng: RngLike, size=None):
    return np.arccos(hg_cos_from_uniform(as_generator(rng).random(size), g))


def hg_density(cos_theta, g: float):
    """HG phase function per steradian, normalised over the sphere."""
    c = np.asarray(cos_theta, dtype=float)
    return (1.0 - g * g) / (4.0 * math.pi * (1.0 + g * g - 2.0 * g * c) ** 1.5)


def hg_angle_density(theta, g: float):
    """Density of the deflection angle itself on [0, pi] (integrates to 1)."""
    theta = np.asarray(theta, dtype=float)
    return (1.0 - g * g) * np.sin(theta) / (2.0 * (1.0 + g * g - 2.0 * g * np.cos(theta)) ** 1.5)


def rotate_direction(mu, theta, phi):
    """Deflect unit vector(s) ``mu`` by polar angle ``theta`` and azimuth ``phi``.

    Near the vertical (``sqrt(1 - mu_z^2) < 1e-10``) the frame is taken
    from the fixed axes.  The result is renormalised.
    """
    mu = np.asarray(mu, dtype=float)
    single = mu.ndim == 1
    mu = np.atleast_2d(mu)
    theta = np.broadcast_to(np.asarray(theta, dtype=float), mu.shape[:1])
    phi = np.broadcast_to(np.asarray(phi, dtype=float), mu.shape[:1])
    out = rotate_cs(mu, np.cos(theta), np.sin(theta), np.cos(phi), np.sin(phi))
    return out[0] if single else out


def rotate_cs(mu, ct, st, cp, sp):
    """Rows of ``mu`` rotated given cos/sin of the polar and azimuthal angles."""
    mx, my, mz = mu[:, 0], mu[:, 1], mu[:, 2]
    den = np.sqrt(np.maximum(1.0 - mz * mz, 0.0))
    degenerate = den < DEGENERATE_AXIS
    safe = np.where(degenerate, 1.0, den)
    out = np.empty_like(mu)
    out[:, 0] = ct * mx + st * (mx * mz * cp - my * sp) / safe
    out[:, 1] = ct * my + st * (my * mz * cp + mx * sp) / safe
    out[:, 2] = ct * mz - st * cp * den
    if degenerate.any():
        sgn = np.where(mz >= 0, 1.0, -1.0)
        deg = np.stack([st * cp, st * sp, sgn * ct], axis=-1)
        out = np.where(degenerate[:, None], deg, out)
    return out / np.sqrt(np.sum(out * out, axis=-1, keepdims=True))


def receiver_solid_angle(d, aperture_radius: float):
    """``2 pi (1 - d / sqrt(d^2 + r_A^2))`` in a cancellation-free form."""
    d = np.asarray(d, dtype=float)
    h = np.sqrt(d * d + aperture_radius**2)
    return 2.0 * math.pi * aperture_radius**2 / (h * (h + d))


def detection_probability(position, direction, receiver: Receiver, optics: WaterOptics,
                          direction_density=None) -> float:
    """Probability that a photon leaving ``position`` reaches the aperture.

    Parameters
    ----------
    position : array_like
        Scattering point r_n.
    direction : array_like
        Propagation direction before the event; the deflection angle is
        measured between it and the line to the receiver.
    direction_density : callable, optional
        Per-steradian density of that angle.  Defaults to the HG phase
        function with the single-scatter albedo; when supplied (the
        zero-order refraction density) the albedo factor is omitted.
    """
    r = np.asarray(position, dtype=float) - np.asarray(receiver.position, dtype=float)
    d = float(np.linalg.norm(r))
    if d == 0.0:
        raise DegenerateGeometryError("scoring point lies on the receiver")
    out_dir = r / d
    cos_fov = float(receiver.fov_axis @ out_dir)
    if cos_fov < math.cos(receiver.beta_R) or cos_fov <= 0.0:
        return 0.0
    cos_scatter = float(np.asarray(direction, dtype=float) @ (-out_dir))
    if direction_density is None:
        dens = float(hg_density(cos_scatter, optics.g))
        albedo = optics.albedo
    else:
        dens = float(direction_density(math.acos(max(-1.0, min(1.0, cos_scatter)))))
        albedo = 1.0
    omega = float(receiver_solid_angle(d, receiver.aperture_radius))
    return albedo * math.exp(-optics.k_e * d) * cos_fov * min(1.0, dens * omega)
