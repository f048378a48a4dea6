"""Random sea-surface elevations by spectral (linear) filtering of white noise.

A real white-noise field is transformed, weighted by the square root of the
directional wave spectrum and transformed back.  Using real noise makes the
spectrum Hermitian, so the elevation is real without post-hoc symmetrisation.

The wave spectrum is Pierson-Moskowitz in wavenumber form,

    S(k) = alpha / (2 k^3) * exp(-beta g^2 / (k^2 U^4)),

spread over direction with ``cos^2(theta) / pi`` about the wind (x axis), so
the two-dimensional density is ``S(k) D(theta) / k``.  Its variance is
``alpha U^4 / (4 beta g^2)``, which gives ``H_s = 4 sqrt(var) ~ 0.21 U^2 / g``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .slopes import RngLike, as_generator

GRAVITY = 9.81
PM_ALPHA = 8.1e-3
PM_BETA = 0.74
SPECTRUM_NAME = "pierson-moskowitz/cos2"


class SurfaceConfigError(ValueError):
    pass


def pierson_moskowitz(kappa, wind_speed: float):
    """Omnidirectional elevation spectrum in m^3 (per unit wavenumber)."""
    kappa = np.asarray(kappa, dtype=float)
    out = np.zeros_like(kappa)
    if wind_speed <= 0:
        return out
    pos = kappa > 0
    k = kappa[pos]
    out[pos] = PM_ALPHA / (2.0 * k**3) * np.exp(-PM_BETA * GRAVITY**2 / (k**2 * wind_speed**4))
    return out


def directional_spectrum(kx, ky, wind_speed: float):
    """Two-dimensional spectrum S(k) cos^2(theta) / (pi k), zero at the origin."""
    kappa = np.hypot(kx, ky)
    safe = np.where(kappa > 0, kappa, 1.0)
    spread = np.where(kappa > 0, (kx / safe) ** 2 / math.pi, 0.0)
    return np.where(kappa > 0, pierson_moskowitz(kappa, wind_speed) * spread / safe, 0.0)


def pm_significant_wave_height(wind_speed: float) -> float:
    return 4.0 * math.sqrt(PM_ALPHA / (4.0 * PM_BETA)) * wind_speed**2 / GRAVITY


@dataclass
class SeaSurfaceField:
    """Periodic elevation field centred on the origin.

    ``elevation[i, j]`` is the height at ``x_i = (i - Mx/2) dx`` and
    ``y_j = (j - My/2) dy``.
    """

    Lx: float
    Ly: float
    Mx: int
    My: int
    elevation: np.ndarray
    wind_speed: float = 0.0
    seed: Optional[int] = None
    spectrum: str = SPECTRUM_NAME

    def __post_init__(self):
        self.elevation = np.asarray(self.elevation, dtype=float)
        if self.elevation.shape != (self.Mx, self.My):
            raise SurfaceConfigError("elevation shape does not match (Mx, My)")

    @property
    def dx(self) -> float:
        return self.Lx / self.Mx

    @property
    def dy(self) -> float:
        return self.Ly / self.My

    def contains(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        hx, hy = self.Lx / 2, self.Ly / 2
        return (x >= -hx) & (x < hx) & (y >= -hy) & (y < hy)

    def elevation_at(self, x, y):
        """Bilinear elevation; the field is periodic so the last cell wraps."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if not np.all(self.contains(x, y)):
            raise SurfaceConfigError("point outside the synthesised patch")
        fx = (x + self.Lx / 2) / self.dx
        fy = (y + self.Ly / 2) / self.dy
        i0 = np.floor(fx).astype(np.int64)
        j0 = np.floor(fy).astype(np.int64)
        tx, ty = fx - i0, fy - j0
        i0 %= self.Mx
        j0 %= self.My
        i1 = (i0 + 1) % self.Mx
        j1 = (j0 + 1) % self.My
        e = self.elevation
        val = ((1 - tx) * (1 - ty) * e[i0, j0] + tx * (1 - ty) * e[i1, j0]
               + (1 - tx) * ty * e[i0, j1] + tx * ty * e[i1, j1])
        return float(val) if val.ndim == 0 else val


def flat_surface(Lx: float = 20.0, Ly: float = 20.0, Mx: int = 2, My: int = 2) -> SeaSurfaceField:
    return SeaSurfaceField(Lx, Ly, Mx, My, np.zeros((Mx, My)))


def synthesize_sea_surface(
    wind_speed: float,
    Lx: float,
    Ly: float,
    Mx: int,
    My: int,
    rng: RngLike,
    spectrum: Optional[Callable] = None,
) -> SeaSurfaceField:
    """Filter white noise by ``sqrt(S2(kx, ky) dkx dky)`` to synthesise heights.

    Parameters
    ----------
    wind_speed : float
        Wind speed in m/s driving the default spectrum.
    Lx, Ly : float
        Patch size in metres.
    Mx, My : int
        Even sample counts.
    rng : RngStream or Generator
    spectrum : callable, optional
        ``spectrum(kx, ky)`` overriding the Pierson-Moskowitz default.
    """
    if Mx < 2 or My < 2 or Mx % 2 or My % 2:
        raise SurfaceConfigError("Mx and My must be even and >= 2")
    if not (Lx > 0 and Ly > 0):
        raise SurfaceConfigError("patch lengths must be positive")
    gen = as_generator(rng)
    noise = gen.standard_normal((Mx, My))
    kx = 2.0 * math.pi * np.fft.fftfreq(Mx, d=Lx / Mx)
    ky = 2.0 * math.pi * np.fft.fftfreq(My, d=Ly / My)
    KX, KY = np.meshgrid(kx, ky, indexing="ij")
    s2 = spectrum(KX, KY) if spectrum is not None else directional_spectrum(KX, KY, wind_speed)
    dk = (2.0 * math.pi / Lx) * (2.0 * math.pi / Ly)
    # E|fft(noise)|^2 = Mx My, and ifft2 divides by Mx My
    amp = np.sqrt(np.asarray(s2, dtype=float) * dk * Mx * My)
    amp[0, 0] = 0.0
    elev = np.fft.ifft2(np.fft.fft2(noise) * amp).real
    elev -= elev.mean()
    seed = getattr(rng, "seed", None)
    return SeaSurfaceField(Lx, Ly, Mx, My, elev, wind_speed=wind_speed, seed=seed)


# ---------------------------------------------------------------------------
# export


def export_surface(surface: SeaSurfaceField, path) -> Path:
    """Write a text header followed by little-endian float64 samples (C order)."""
    path = Path(path)
    header = (
        "stulc-sea-surface 1\n"
        f"Mx {surface.Mx}\nMy {surface.My}\n"
        f"dx {surface.dx!r}\ndy {surface.dy!r}\n"
        f"wind_speed {surface.wind_speed!r}\n"
        f"seed {surface.seed if surface.seed is not None else 'none'}\n"
        f"spectrum {surface.spectrum}\n"
        "END\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(surface.elevation.astype("<f8").tobytes(order="C"))
    return path


def read_surface(path) -> SeaSurfaceField:
    with open(path, "rb") as fh:
        meta = {}
        first = fh.readline().decode("ascii").strip()
        if first != "stulc-sea-surface 1":
            raise SurfaceConfigError(f"{path}: not a sea-surface file")
        while True:
            line = fh.readline().decode("ascii").strip()
            if line == "END":
                break
            if not line:
                raise SurfaceConfigError(f"{path}: truncated header")
            key, _, value = line.partition(" ")
            meta[key] = value
        Mx, My = int(meta["Mx"]), int(meta["My"])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != Mx * My:
        raise SurfaceConfigError(f"{path}: expected {Mx * My} samples, found {data.size}")
    seed = None if meta["seed"] == "none" else int(meta["seed"])
    return SeaSurfaceField(
        Lx=float(meta["dx"]) * Mx, Ly=float(meta["dy"]) * My, Mx=Mx, My=My,
        elevation=data.reshape(Mx, My).copy(), wind_speed=float(meta["wind_speed"]),
        seed=seed, spectrum=meta.get("spectrum", SPECTRUM_NAME),
    )


def export_theta0_curve(pdf, path, points: int = 512) -> Path:
    """CSV of (theta0_rad, density) over the support, for plotting."""
    from .theta0 import theta0_pdf

    path = Path(path)
    th = np.linspace(0.0, pdf.support_max, points)
    dens = theta0_pdf(pdf, th)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta0_rad", "density_per_rad"])
        for t, d in zip(th, dens):
            w.writerow([repr(float(t)), repr(float(d))])
    return path
