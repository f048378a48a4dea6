"""Semi-analytic Monte Carlo transport from the sea surface to the receiver(s).

Photons are processed in fixed-size batches.  Batch ``b`` draws all of its
uniforms from stream ``PHOTON_STREAM_BASE + b`` of the run seed and produces
its own tally; tallies are reduced in batch order.  Results therefore depend
on the seed and the batch size only, never on the number of worker threads.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from ..atmosphere import IrradianceGrid
from ..geometry import LinkGeometry
from ..interface.seasurface import SeaSurfaceField
from ..interface.slopes import CoxMunkParams
from ..interface.theta0 import Theta0Pdf, solid_angle_density_table
from ..numerics import NumericError, RngStream
from .emission import EMISSION_UNIFORMS, cell_cdf, emit_photons
from .kernel import (LEG_TABLE_STEP, UNIFORMS_PER_ORDER, BatchTally, KernelParams, leg_table, ln_m2_from_sigma,
                     transport_batch)
from .optics import OceanTurbulence, RytovTable, WaterOptics
from .photon import Receiver, detection_probability

PHOTON_STREAM_BASE = 1 << 20
DEFAULT_BATCH = 4096
DEFAULT_ORDERS = 4
THETA0_CELLS = 4096


class EmptyResultError(NumericError):
    """Every photon was discarded before reaching the water."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(f"{message}: {diagnostics}")
        self.diagnostics = diagnostics


@dataclass
class ChannelSetup:
    """Deterministic inputs shared by every photon of a run."""

    mean_grid: IrradianceGrid
    fading: Optional[np.ndarray]  # m x m fading coefficients, None for unit weights
    geom: LinkGeometry
    surface: SeaSurfaceField
    cox_munk: CoxMunkParams
    optics: WaterOptics
    receiver: Receiver
    params: KernelParams
    transmit_power: float
    xi_t: float

    @classmethod
    def build(cls, mean_grid, fading, geom, surface, cox_munk, optics, turb: OceanTurbulence,
              receiver, wavelength, sigma_R_atm, transmit_power, xi_t,
              n_orders: int = DEFAULT_ORDERS, rytov_table: Optional[RytovTable] = None,
              theta0_cells: int = THETA0_CELLS) -> "ChannelSetup":
        k = 2.0 * math.pi / wavelength
        table = rytov_table if rytov_table is not None else RytovTable.build(turb, k)
        pdf = Theta0Pdf.for_link(geom.zeta, cox_munk, geom.eta)
        edges, dens = solid_angle_density_table(pdf, theta0_cells)
        zp = geom.zeta_prime
        params = KernelParams(
            n_orders=n_orders,
            k_e=optics.k_e,
            albedo=optics.albedo,
            g=optics.g,
            surface_z=geom.D,
            mu_T=np.array([0.0, -math.sin(zp), -math.cos(zp)]),
            mu_R=receiver.fov_axis,
            cos_beta_R=math.cos(receiver.beta_R),
            aperture_radius=receiver.aperture_radius,
            theta0_step=float(edges[1] - edges[0]),
            theta0_density=dens,
            rytov_log_d_min=table.log_d_min,
            rytov_log_d_step=table.log_d_step,
            rytov_log_sigma=table.log_sigma,
            rytov_null=table.null,
            ln_m2_atm=ln_m2_from_sigma(sigma_R_atm),
            leg_step=LEG_TABLE_STEP,
            leg_table=leg_table(table.log_d_min, table.log_d_step, table.log_sigma, table.null),
        )
        return cls(mean_grid, fading, geom, surface, cox_munk, optics, receiver, params, transmit_power, xi_t)


@dataclass
class ChannelResult:
    per_order_power: List[float]
    total_power: float
    sigma_tur_sq: float
    per_order_sigma_tur_sq: List[float]
    photon_count: int
    seed: int
    scenario_id: str = ""
    standard_error: float = 0.0
    fov_counts: List[int] = field(default_factory=list)
    discarded_outside_surface: int = 0
    discarded_invalid_facet: int = 0
    escaped: int = 0
    alive_per_order: List[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class TransportTally:
    """Reduced tallies of a run over all receivers."""

    tally: BatchTally
    photons: int
    seed: int
    prefactor: float
    outside_surface: int = 0
    invalid_facet: int = 0

    @property
    def power(self) -> np.ndarray:
        """Per-receiver, per-order received power in W."""
        return self.prefactor * self.tally.power

    @property
    def total_power(self) -> np.ndarray:
        return self.power.sum(axis=1)

    @property
    def standard_error(self) -> np.ndarray:
        # power = prefactor * sum_i x_i, so SE = prefactor * sqrt(n * sample variance of x)
        n = self.photons
        s = self.tally.power.sum(axis=1)
        ss = np.maximum(self.tally.sq - s * s / n, 0.0)
        return self.prefactor * np.sqrt(ss * n / (n - 1)) if n > 1 else np.zeros_like(s)

    @property
    def per_order_sigma_tur_sq(self) -> np.ndarray:
        c = self.tally.count
        return np.where(c > 0, self.tally.m2 / np.maximum(c, 1), 0.0)

    @property
    def sigma_tur_sq(self) -> np.ndarray:
        return compose_scintillation(self.power, self.per_order_sigma_tur_sq)

    def result(self, index: int = 0, scenario_id: str = "") -> ChannelResult:
        return ChannelResult(
            per_order_power=[float(v) for v in self.power[index]],
            total_power=float(self.total_power[index]),
            sigma_tur_sq=float(self.sigma_tur_sq[index]),
            per_order_sigma_tur_sq=[float(v) for v in self.per_order_sigma_tur_sq[index]],
            photon_count=self.photons,
            seed=self.seed,
            scenario_id=scenario_id,
            standard_error=float(self.standard_error[index]),
            fov_counts=[int(v) for v in self.tally.count[index]],
            discarded_outside_surface=self.outside_surface,
            discarded_invalid_facet=self.invalid_facet,
            escaped=int(self.tally.escaped),
            alive_per_order=[int(v) for v in self.tally.alive],
        )


def compose_scintillation(power, per_order_var):
    """``sum_n (P_n / P)^2 sigma_n^2`` along the last axis; zero where P = 0."""
    power = np.asarray(power, dtype=float)
    total = power.sum(axis=-1, keepdims=True)
    frac = np.where(total > 0, power / np.where(total > 0, total, 1.0), 0.0)
    return np.sum(frac * frac * np.asarray(per_order_var, dtype=float), axis=-1)


def single_leg_scintillation(sigma_R_sq: float) -> float:
    """sigma_tur,n^2 of a photon set whose only leg has Rytov variance ``s``: ``M2 - 1``."""
    return math.expm1(ln_m2_from_sigma(sigma_R_sq))


def batch_uniforms(seed: int, batch: int, size: int, n_orders: int) -> np.ndarray:
    gen = RngStream(seed, PHOTON_STREAM_BASE + batch).generator()
    return gen.random((size, EMISSION_UNIFORMS + UNIFORMS_PER_ORDER * n_orders))


def _batch_sizes(photons: int, batch_size: int):
    full, rest = divmod(photons, batch_size)
    return [batch_size] * full + ([rest] if rest else [])


def run_transport(
    setup: ChannelSetup,
    photons: int,
    seed: int,
    receivers: Optional[np.ndarray] = None,
    threads: int = 1,
    batch_size: int = DEFAULT_BATCH,
    backend: Optional[str] = None,
) -> TransportTally:
    """Emit ``photons`` photons and score them against ``receivers`` (default: the origin)."""
    if photons < 1:
        raise ValueError("photon count must be >= 1")
    if batch_size < 1:
        raise ValueError("batch size must be >= 1")
    rec = np.zeros((1, 3)) if receivers is None else np.asarray(receivers, dtype=float).reshape(-1, 3)
    p = setup.params
    cdf = cell_cdf(setup.mean_grid)
    sizes = _batch_sizes(photons, batch_size)

    def work(b: int):
        U = batch_uniforms(seed, b, sizes[b], p.n_orders)
        em = emit_photons(setup.mean_grid, setup.fading, setup.geom, setup.surface, setup.cox_munk,
                          U[:, :EMISSION_UNIFORMS], cdf=cdf)
        tally = transport_batch(em.position, em.direction, em.launch_weight, U[:, EMISSION_UNIFORMS:],
                                rec, p, backend=backend)
        return tally, em.outside_surface, em.invalid_facet

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(b) for b in range(len(sizes))]

    total = BatchTally.zeros(rec.shape[0], p.n_orders)
    outside = invalid = 0
    for tally, o, f in parts:  # fixed batch order keeps the sums bit-stable
        total.add(tally)
        outside += o
        invalid += f
    if outside + invalid >= photons:
        raise EmptyResultError("all photons were discarded",
                               {"outside_surface": outside, "invalid_facet": invalid, "photons": photons})
    prefactor = setup.transmit_power * setup.xi_t / photons
    return TransportTally(total, photons, seed, prefactor, outside, invalid)


def transport(setup: ChannelSetup, photons: int, seed: int, threads: int = 1,
              scenario_id: str = "", **kwargs) -> ChannelResult:
    """Single receiver at the origin."""
    return run_transport(setup, photons, seed, None, threads, **kwargs).result(0, scenario_id)


# ---------------------------------------------------------------------------
# debug traces


def trace_photons(setup: ChannelSetup, seed: int, limit: int = 100, batch_size: int = DEFAULT_BATCH):
    """Per-photon, per-order records for the first ``limit`` photons of batch 0.

    Detection probabilities are recomputed with the scalar reference
    :func:`detection_probability` for the receiver at the origin.
    """
    from ._kernel_py import _propagate

    p = setup.params
    n = min(limit, batch_size)
    U = batch_uniforms(seed, 0, batch_size, p.n_orders)[:n]
    em = emit_photons(setup.mean_grid, setup.fading, setup.geom, setup.surface, setup.cox_munk,
                      U[:, :EMISSION_UNIFORMS])
    pos, inc, wt, _, _ = _propagate(em.position, em.direction, em.launch_weight, U[:, EMISSION_UNIFORMS:], p)
    step = p.theta0_step
    table = p.theta0_density

    def theta0_density(theta):
        i = int(theta // step)
        return float(table[i]) if i < len(table) else 0.0

    rows = []
    for i in range(n):
        for k in range(p.n_orders + 1):
            if wt[k, i] <= 0.0:
                break
            if float(np.linalg.norm(pos[k, i])) == 0.0:
                pd = 0.0
            elif k == 0:
                pd = detection_probability(pos[k, i], inc[k, i], setup.receiver, setup.optics, theta0_density)
            else:
                pd = detection_probability(pos[k, i], inc[k, i], setup.receiver, setup.optics)
            rows.append((i, k, *[float(c) for c in pos[k, i]], float(wt[k, i]), pd))
    return rows


def write_traces(rows, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["photon", "order", "x_m", "y_m", "z_m", "weight", "p_d"])
        for r in rows:
            w.writerow([r[0], r[1]] + [repr(v) for v in r[2:]])
    return path

