"""End-to-end runs: scenario in, tables and summaries out.

Random streams of a run seed::

    1            fading draw over the receiving grid
    2            sea-surface synthesis
    3 + case     interface validation samples
    2**20 + b    photon batch b
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import atmosphere as atm
from .export import provenance, write_csv, write_json
from .geometry import LinkGeometry
from .interface import (CoxMunkParams, Theta0Pdf, branch_gaps, l1_distance, pdf_normalization,
                        refracted_deviation_samples, synthesize_sea_surface)
from .metrics import (NoiseModel, PowerDistribution, conditional_ber, fit_power_distribution, mean_ber,
                      outage_probability, outage_threshold_power)
from .numerics import RngStream
from .scenario import ConfigError, Scenario
from .underwater import (OCEAN_PRESETS, WATER_PRESETS, ChannelResult, ChannelSetup, OceanTurbulence, Receiver,
                         WaterOptics, run_transport, trace_photons, write_traces)

FADING_STREAM = 1
SURFACE_STREAM = 2
INTERFACE_STREAM = 3

L1_LIMIT = 0.05
NORMALIZATION_LIMIT = 1e-3
GAP_LIMIT = 0.1


# ---------------------------------------------------------------------------
# scenario -> physics objects


def atmosphere_profile(s: Scenario) -> atm.TurbulenceProfile:
    cn2 = s["atmosphere.cn2_ground"]
    if s["atmosphere.preset"] != "custom":
        cn2 = atm.ATMOSPHERE_PRESETS[s["atmosphere.preset"]].cn2_ground
    return atm.TurbulenceProfile(cn2, s["atmosphere.wind_m_s"], s["atmosphere.outer_scale_m"])


def water_optics(s: Scenario) -> WaterOptics:
    if s["water.preset"] != "custom":
        return WATER_PRESETS[s["water.preset"]]
    return WaterOptics(s["water.k_a"], s["water.k_s"], s["water.g"])


def ocean_turbulence(s: Scenario) -> OceanTurbulence:
    if s["ocean.preset"] != "custom":
        return OCEAN_PRESETS[s["ocean.preset"]]
    return OceanTurbulence(s["ocean.epsilon"], s["ocean.chi_T"], s["ocean.omega"])


def noise_model(s: Scenario) -> NoiseModel:
    return NoiseModel(temperature=s["noise.temperature_K"], bandwidth=s["noise.bandwidth_Hz"],
                      resistance=s["noise.resistance_ohm"], responsivity=s["noise.responsivity"])


def receiver(s: Scenario) -> Receiver:
    return Receiver(aperture_area=s["receiver.aperture_m2"], theta_R=math.radians(s["receiver.theta_deg"]),
                    phi_R=math.radians(s["receiver.phi_deg"]), beta_R=math.radians(s["receiver.fov_deg"]))


def beam(s: Scenario) -> atm.BeamParams:
    return atm.BeamParams(wavelength=s["beam.wavelength_m"], divergence_beta_T=s["beam.divergence_rad"],
                          transmit_power=s["beam.power_W"], atmospheric_transmittance_xi_t=s["beam.xi_t"])


@dataclass
class Channel:
    """Every deterministic input of a transport run, built once per scenario."""

    scenario: Scenario
    geom: LinkGeometry
    beam: atm.BeamParams
    profile: atm.TurbulenceProfile
    spot_radius: float
    sigma_R_atm: float
    mean_grid: atm.IrradianceGrid
    fading: Optional[atm.FadingField]
    setup: ChannelSetup
    noise: NoiseModel

    def summary(self) -> dict:
        g = self.mean_grid
        return {
            "zeta_rad": self.geom.zeta,
            "zeta_prime_rad": self.geom.zeta_prime,
            "slant_length_m": self.geom.slant_length,
            "spot_radius_m": self.spot_radius,
            "slant_rytov_variance": self.sigma_R_atm,
            "grid_cells_per_side": g.m,
            "grid_cell_m": g.cell_size_dm,
            "grid_power_W": float(g.values.sum() * g.cell_size_dm**2),
            "fading_mode": self.scenario["fading.mode"],
            "surface_side_m": self.setup.surface.Lx,
        }


def build_channel(s: Scenario) -> Channel:
    """Atmosphere, fading draw, sea surface and kernel parameters for ``s``."""
    try:
        geom = LinkGeometry.from_zenith(math.radians(s["link.zeta_deg"]), s["link.H_m"], s["link.D_m"], s["link.eta"])
        b = beam(s)
        profile = atmosphere_profile(s)
        optics = water_optics(s)
        turb = ocean_turbulence(s)
        rec = receiver(s)
        noise = noise_model(s)
        cox = CoxMunkParams(s["surface.wind_m_s"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    seed = s["sim.seed"]
    W = atm.long_term_spot_radius(b, geom, profile)
    m = s["grid.m"] or max(1, int(round(2.0 * W / s["grid.cell_m"])))
    grid = atm.mean_irradiance_grid(b, W, m)
    sigma_R = atm.slant_rytov_variance(geom, profile, b.k)

    fading = None
    if s["fading.mode"] == "sampled":
        cov = atm.fading_covariance(grid, geom, profile, b.k)
        sigma_ln = np.full(m * m, atm.fading_log_variance(geom, profile, b.k))
        fading = atm.sample_fading_field(cov, sigma_ln, RngStream(seed, FADING_STREAM))
        fading.covariance = None  # m^4 floats; not needed after the draw

    side = s["surface.size_m"] or math.ceil(2.2 * W / math.cos(geom.zeta))
    n = s["surface.samples"]
    try:
        surface = synthesize_sea_surface(cox.wind_speed_v, side, side, n, n, RngStream(seed, SURFACE_STREAM))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    weights = None if fading is None else np.asarray(fading.xi_f).reshape(m, m)
    setup = ChannelSetup.build(grid, weights, geom, surface, cox, optics, turb, rec, b.wavelength, sigma_R,
                               b.transmit_power, b.atmospheric_transmittance_xi_t, n_orders=s["sim.orders"])
    return Channel(s, geom, b, profile, W, sigma_R, grid, fading, setup, noise)


def _transport(ch: Channel, receivers, threads: int, backend=None):
    s = ch.scenario
    return run_transport(ch.setup, s["sim.photons"], s["sim.seed"], receivers, threads=threads,
                         batch_size=s["sim.batch"], backend=backend)


def _meta(s: Scenario) -> dict:
    return provenance(s.hash, s["sim.seed"], s["sim.photons"])


# ---------------------------------------------------------------------------
# power map


@dataclass
class PowerMap:
    x: np.ndarray  # lattice coordinates, m
    y: np.ndarray
    power: np.ndarray  # (ny, nx) W; row indexes y
    standard_error: np.ndarray
    sigma_tur_sq: np.ndarray
    center: ChannelResult
    summary: dict
    files: List[Path] = field(default_factory=list)

    def mirror_asymmetry(self):
        """Largest |P - P_mirror| / SE over x- and y-mirrored cell pairs."""
        worst = 0.0
        for flip in (np.fliplr, np.flipud):
            diff = np.abs(self.power - flip(self.power))
            se = np.hypot(self.standard_error, flip(self.standard_error))
            ok = se > 0
            if ok.any():
                worst = max(worst, float(np.max(diff[ok] / se[ok])))
        return worst


def lattice(cells: int, half_width: float) -> np.ndarray:
    return half_width * ((2.0 * (np.arange(cells) + 0.5)) / cells - 1.0)


def run_power_map(s: Scenario, out_dir=None, threads: int = 1, grid_m: Optional[int] = None,
                  debug_traces: bool = False, backend=None) -> PowerMap:
    """Received power over a lattice of receiver offsets at the receiver depth.

    The receiver at the lattice origin is scored as well and returned as
    ``center``.
    """
    ch = build_channel(s)
    n = grid_m or s["map.cells"]
    h = s["map.half_width_m"] or ch.spot_radius
    xs = lattice(n, h)
    X, Y = np.meshgrid(xs, xs)
    rec = np.column_stack([X.ravel(), Y.ravel(), np.zeros(n * n)])
    rec = np.vstack([rec, np.zeros((1, 3))])
    tally = _transport(ch, rec, threads, backend)
    power = tally.total_power[:-1].reshape(n, n)
    se = tally.standard_error[:-1].reshape(n, n)
    sig = tally.sigma_tur_sq[:-1].reshape(n, n)
    center = tally.result(n * n, s.hash)
    summary = {
        "channel": ch.summary(),
        "center": center.to_dict(),
        "lattice": {"cells_per_side": n, "half_width_m": h, "peak_power_W": float(power.max()),
                    "mean_power_W": float(power.mean()), "degenerate_geometry": int(tally.tally.degenerate)},
    }
    pm = PowerMap(xs, xs.copy(), power, se, sig, center, summary)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        meta = _meta(s)
        rows = ((float(X.flat[i]), float(Y.flat[i]), float(power.flat[i]), float(se.flat[i]), float(sig.flat[i]))
                for i in range(n * n))
        pm.files.append(write_csv(out / "power_map.csv",
                                  ("x_m", "y_m", "power_W", "standard_error_W", "sigma_tur_sq"), rows, meta))
        pm.files.append(write_json(out / "power_map.json", summary, meta))
        if debug_traces:
            pm.files.append(write_traces(trace_photons(ch.setup, s["sim.seed"], batch_size=s["sim.batch"]),
                                         out / "traces.csv"))
    return pm


# ---------------------------------------------------------------------------
# BER and outage


@dataclass
class SweepTable:
    columns: tuple
    rows: list
    summary: dict
    files: List[Path] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])


BER_COLUMNS = ("variable", "value", "transmit_power_W", "mean_power_W", "sigma_tur_sq",
               "ber", "ber_check", "ber_deterministic", "warning")


def center_result(s: Scenario, threads: int = 1, backend=None):
    """Channel and the transport result for the receiver at the origin."""
    ch = build_channel(s)
    return ch, _transport(ch, None, threads, backend).result(0, s.hash)


def _ber_row(variable, value, ptx, mean_power, sig, noise, force_zero):
    if force_zero:
        sig = 0.0
    dist = PowerDistribution(mean_power, sig)
    r = mean_ber(dist, noise)
    det = float(conditional_ber(mean_power, noise))
    return (variable, float(value), float(ptx), float(mean_power), float(sig), r.value, r.check, det, r.warning)


def run_ber_sweep(s: Scenario, out_dir=None, threads: int = 1, backend=None) -> SweepTable:
    """Mean BER against transmit power (dBm) or transmit zenith angle."""
    force_zero = s["ber.force_zero_scintillation"]
    rows, per_run = [], []
    if s["ber.variable"] == "power":
        ch, res = center_result(s, threads, backend)
        dist = fit_power_distribution([res])
        p0 = s["beam.power_W"]
        for dbm in s["ber.power_dbm"]:
            ptx = 1e-3 * 10.0 ** (dbm / 10.0)
            # received power is linear in the transmit power; sigma_tur^2 is not affected
            rows.append(_ber_row("power_dbm", dbm, ptx, dist.mean_power * ptx / p0, dist.sigma_tur_sq,
                                 ch.noise, force_zero))
        per_run.append(res.to_dict())
    else:
        for zeta in s["ber.zeta_deg"]:
            ch, res = center_result(s.with_values({"link.zeta_deg": zeta}), threads, backend)
            dist = fit_power_distribution([res])
            rows.append(_ber_row("zeta_deg", zeta, s["beam.power_W"], dist.mean_power, dist.sigma_tur_sq,
                                 ch.noise, force_zero))
            per_run.append(res.to_dict())
    table = SweepTable(BER_COLUMNS, rows, {"runs": per_run, "force_zero_scintillation": force_zero})
    _write_table(table, s, out_dir, "ber_sweep")
    return table


OUTAGE_COLUMNS = ("gamma_th_db", "gamma_th", "threshold_power_W", "mean_power_W", "sigma_tur_sq", "outage")


def outage_table(dist: PowerDistribution, noise: NoiseModel, gamma_db) -> list:
    rows = []
    for gdb in gamma_db:
        g = 10.0 ** (gdb / 10.0)
        rows.append((float(gdb), g, float(outage_threshold_power(g, noise)), dist.mean_power, dist.sigma_tur_sq,
                     float(outage_probability(dist, noise, g))))
    return rows


def run_outage_sweep(s: Scenario, out_dir=None, threads: int = 1, backend=None) -> SweepTable:
    """Outage probability against the SNR threshold (dB)."""
    ch, res = center_result(s, threads, backend)
    dist = fit_power_distribution([res])
    table = SweepTable(OUTAGE_COLUMNS, outage_table(dist, ch.noise, s["outage.gamma_th_db"]),
                       {"runs": [res.to_dict()]})
    _write_table(table, s, out_dir, "outage_sweep")
    return table


def _write_table(table: SweepTable, s: Scenario, out_dir, stem: str):
    if out_dir is None:
        return
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = _meta(s)
    table.files.append(write_csv(out / f"{stem}.csv", table.columns, table.rows, meta))
    table.files.append(write_json(out / f"{stem}.json", table.summary, meta))


# ---------------------------------------------------------------------------
# interface validation


@dataclass
class InterfaceReport:
    cases: list
    passed: bool
    files: List[Path] = field(default_factory=list)


def interface_case(zeta_deg: float, wind: float, samples: int, rng, eta: float = 0.75) -> dict:
    """Closed-form deviation PDF against brute-force facet refraction for one (zeta, v)."""
    zeta = math.radians(zeta_deg)
    cox = CoxMunkParams(wind)
    pdf = Theta0Pdf.for_link(zeta, cox, eta)
    dev, bad = refracted_deviation_samples(zeta, cox, rng, samples, eta)
    gaps = branch_gaps(pdf)
    norm = abs(pdf_normalization(pdf) - 1.0)
    l1 = l1_distance(pdf, dev)
    gap = max(gaps.values(), default=0.0)
    return {
        "zeta_deg": float(zeta_deg), "wind_m_s": float(wind), "samples": int(samples),
        "invalid_facets": int(bad), "l1": float(l1), "normalization_residual": float(norm),
        "branch_gap": float(gap),
        "passed": bool(l1 < L1_LIMIT and norm < NORMALIZATION_LIMIT and gap < GAP_LIMIT),
    }


def validate_interface(s: Scenario, out_dir=None) -> InterfaceReport:
    """Run the (zeta, v) battery of closed-form-vs-brute-force checks."""
    cases = []
    seed = s["sim.seed"]
    i = 0
    for zeta in s["interface.zeta_deg"]:
        for wind in s["interface.wind_m_s"]:
            rng = RngStream(seed, INTERFACE_STREAM + i).generator()
            cases.append(interface_case(zeta, wind, s["interface.samples"], rng, s["link.eta"]))
            i += 1
    rep = InterfaceReport(cases, all(c["passed"] for c in cases))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        meta = provenance(s.hash, seed, s["interface.samples"])
        cols = ("zeta_deg", "wind_m_s", "l1", "normalization_residual", "branch_gap", "invalid_facets", "passed")
        rep.files.append(write_csv(out / "interface_report.csv", cols, [[c[k] for k in cols] for c in cases], meta))
        rep.files.append(write_json(out / "interface_report.json",
                                    {"passed": rep.passed, "cases": cases,
                                     "limits": {"l1": L1_LIMIT, "normalization": NORMALIZATION_LIMIT,
                                                "branch_gap": GAP_LIMIT}}, meta))
    return rep
