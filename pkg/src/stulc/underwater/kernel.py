"""Photon-transport kernel interface and backend selection.

Two interchangeable backends score photon batches: the compiled extension
``_kernel`` and the numpy implementation in ``_kernel_py``.  The compiled one
is used when it imports, unless ``STULC_BACKEND=python`` is set.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _kernel_py

UNIFORMS_PER_ORDER = 3  # step, HG polar, HG azimuth
WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True)
class KernelParams:
    """Everything the kernels need besides the photon arrays."""

    n_orders: int
    k_e: float
    albedo: float
    g: float
    surface_z: float
    mu_T: np.ndarray
    mu_R: np.ndarray
    cos_beta_R: float
    aperture_radius: float
    theta0_step: float
    theta0_density: np.ndarray  # per steradian, one value per annulus
    rytov_log_d_min: float
    rytov_log_d_step: float
    rytov_log_sigma: np.ndarray
    rytov_null: bool
    ln_m2_atm: float
    weight_floor: float = WEIGHT_FLOOR
    leg_step: float = 0.0  # spacing of ``leg_table``; 0 disables it
    leg_table: np.ndarray = None  # ln M2 on d = j * leg_step, linear in d


@dataclass
class BatchTally:
    """Per-receiver, per-order sums over one photon batch."""

    power: np.ndarray  # (R, N_s + 1) sum of w * p_d
    sq: np.ndarray  # (R,) sum over photons of (sum over orders of w * p_d)^2
    count: np.ndarray  # (R, N_s + 1) photons whose scoring point lies in the FOV
    m2: np.ndarray  # (R, N_s + 1) sum of (prod M2 - 1) over those photons
    alive: np.ndarray  # (N_s + 1,) photons still propagating at each order
    escaped: int = 0
    degenerate: int = 0

    @classmethod
    def zeros(cls, n_receivers: int, n_orders: int) -> "BatchTally":
        return cls(
            power=np.zeros((n_receivers, n_orders + 1)),
            sq=np.zeros(n_receivers),
            count=np.zeros((n_receivers, n_orders + 1), dtype=np.int64),
            m2=np.zeros((n_receivers, n_orders + 1)),
            alive=np.zeros(n_orders + 1, dtype=np.int64),
        )

    def add(self, other: "BatchTally") -> None:
        self.power += other.power
        self.sq += other.sq
        self.count += other.count
        self.m2 += other.m2
        self.alive += other.alive
        self.escaped += other.escaped
        self.degenerate += other.degenerate


def _load_compiled():
    try:
        from . import _kernel  # type: ignore[attr-defined]
    except ImportError:
        return None
    return _kernel


_COMPILED = None if os.environ.get("STULC_BACKEND", "").lower() == "python" else _load_compiled()
BACKEND = "cython" if _COMPILED is not None else "python"


def available_backends():
    names = ["python"]
    if _load_compiled() is not None:
        names.insert(0, "cython")
    return names


def transport_batch(r0, mu0, w0, uniforms, receivers, params: KernelParams, backend: str = None) -> BatchTally:
    """Score one photon batch against every receiver.

    Parameters
    ----------
    r0, mu0 : ndarray, shape (n, 3)
        Entry points below the surface and refracted directions.
    w0 : ndarray, shape (n,)
        Launch weights ``p_i Tr_i``; zero for discarded photons.
    uniforms : ndarray, shape (n, 3 * N_s)
        Per order: free path, HG polar angle, azimuth.
    receivers : ndarray, shape (R, 3)
        Receiver positions.
    """
    name = backend or BACKEND
    args = (
        np.ascontiguousarray(r0, dtype=np.float64),
        np.ascontiguousarray(mu0, dtype=np.float64),
        np.ascontiguousarray(w0, dtype=np.float64),
        np.ascontiguousarray(uniforms, dtype=np.float64),
        np.ascontiguousarray(receivers, dtype=np.float64),
    )
    if args[3].shape != (args[0].shape[0], UNIFORMS_PER_ORDER * params.n_orders):
        raise ValueError("uniforms must have 3 columns per scattering order")
    if name == "python":
        out = _kernel_py.transport_batch(*args, params)
    elif name == "cython":
        mod = _COMPILED if _COMPILED is not None else _load_compiled()
        if mod is None:
            raise RuntimeError("compiled kernel is not available")
        out = mod.transport_batch(*args, params)
    else:
        raise ValueError(f"unknown backend {name!r}")
    return BatchTally(*out)


def rotate_chain(mu0, cos_theta, phi, backend: str = None) -> np.ndarray:
    """Rotate ``mu0`` successively by each (polar cosine, azimuth) pair; returns every direction."""
    ct = np.ascontiguousarray(cos_theta, dtype=np.float64)
    ph = np.ascontiguousarray(phi, dtype=np.float64)
    if ct.shape != ph.shape or ct.ndim != 1:
        raise ValueError("cos_theta and phi must be 1-D arrays of equal length")
    name = backend or BACKEND
    if name == "python":
        return _kernel_py.rotate_chain(mu0, ct, ph)
    mod = _COMPILED if _COMPILED is not None else _load_compiled()
    if name != "cython" or mod is None:
        raise ValueError(f"backend {name!r} is not available")
    return mod.rotate_chain(np.asarray(mu0, dtype=np.float64), ct, ph)


def ln_m2_from_sigma(s2: float) -> float:
    """Log of the per-leg second moment; see :func:`optics.scintillation_moment`."""
    if s2 <= 1.0:
        return s2
    p = s2**1.2
    return 0.49 * s2 / (1.0 + 1.11 * p) ** (7.0 / 6.0) + 0.51 * s2 / (1.0 + 0.69 * p) ** (5.0 / 6.0)


LEG_TABLE_STEP = 1e-3
LEG_TABLE_SIZE = 1 << 16


def leg_table(log_d_min, log_d_step, log_sigma, null, step=LEG_TABLE_STEP, size=LEG_TABLE_SIZE):
    """ln M2 tabulated uniformly in leg length.

    Sampled from the log-log Rytov memo so lookups skip the log/exp/pow
    chain; legs beyond ``step * (size - 1)`` fall back to the memo itself.
    """
    d = step * np.arange(size, dtype=float)
    probe = KernelParams(0, 1.0, 1.0, 0.0, 0.0, np.zeros(3), np.zeros(3), 0.0, 0.0, 1.0, np.zeros(1),
                         log_d_min, log_d_step, np.asarray(log_sigma, dtype=float), bool(null), 0.0)
    out = _kernel_py._ln_m2_memo(d, probe)
    out[0] = 0.0
    return out


def theta0_lookup(theta, step: float, table: np.ndarray):
    theta = np.asarray(theta, dtype=float)
    idx = np.floor(theta / step).astype(np.int64)
    ok = (idx >= 0) & (idx < len(table))
    return np.where(ok, table[np.clip(idx, 0, len(table) - 1)], 0.0)

