"""Acceptance suite: seven end-to-end criteria, one summary line each.

Every check records its outcome through ``conftest.record``; the terminal
summary prints one pass/fail line per criterion followed by the individual
checks.  Run directly with ``python tests/test_acceptance.py``.
"""
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate, special

from conftest import record
from oracles import point_source_setup, single_scatter_oracle
from stulc.atmosphere import (WEAK_TURBULENCE, BeamParams, continuous_beam_power, sample_fading_field,
                              slant_rytov_variance)
from stulc.geometry import LinkGeometry
from stulc.interface import CoxMunkParams, Theta0Pdf, l1_distance, refracted_deviation_samples, sample_pitch_angle
from stulc.metrics import NoiseModel, PowerDistribution, mean_ber, outage_probability, snr
from stulc.numerics import RngStream
from stulc.pipeline import build_channel, run_ber_sweep, run_outage_sweep, run_power_map, validate_interface
from stulc.scenario import Scenario
from stulc.underwater import (WaterOptics, available_backends, rotate_chain, run_transport,
                              sample_hg_angle, sample_step, single_leg_scintillation)

pytestmark = pytest.mark.acceptance

# desk-scale trend runs: grid m = 40 and 1e5 photons at the receiver
DESK = {"grid.m": 40, "sim.photons": 100_000}


def _within_3se(x, target):
    se = x.std(ddof=1) / math.sqrt(x.size)
    return abs(x.mean() - target) < 3 * se, f"mean {x.mean():.6g} vs {target:.6g}, 3 SE = {3 * se:.2g}"


# --- 1. interface PDF oracle --------------------------------------------------------------

def test_c1_interface_pdf_oracle():
    rep = validate_interface(Scenario())
    worst_l1 = max(c["l1"] for c in rep.cases)
    worst_norm = max(c["normalization_residual"] for c in rep.cases)
    # uniform-azimuth facets are reported for context; the closed form describes in-plane tilt
    off = []
    for i, c in enumerate(rep.cases):
        z, v = math.radians(c["zeta_deg"]), c["wind_m_s"]
        dev, _ = refracted_deviation_samples(z, CoxMunkParams(v), RngStream(31, i), 200_000, in_plane=False)
        off.append(l1_distance(Theta0Pdf.for_link(z, CoxMunkParams(v)), dev))
    above = sum(x >= 0.05 for x in off)
    record(1, "12 (zeta, v) cases at 1e6 samples", rep.passed and len(rep.cases) == 12,
           f"max L1 {worst_l1:.4f} (< 0.05), max |norm - 1| {worst_norm:.1e} (< 1e-3); "
           f"uniform-azimuth diagnostic: {above}/12 above 0.05, max {max(off):.3f}")
    assert len(rep.cases) == 12
    assert rep.passed


# --- 2. energy and conservation ----------------------------------------------------------

def test_c2_continuous_power():
    beam = BeamParams()
    errs = [abs(continuous_beam_power(beam, W) - beam.transmit_power) / beam.transmit_power
            for W in (0.5, 2.2270574659167734, 3.6, 10.0)]
    ok = max(errs) < 1e-12
    record(2, "continuous mean irradiance integrates to P_Tx", ok, f"max rel error {max(errs):.1e}")
    assert ok


def test_c2_power_bound_all_scenarios():
    worst = 0.0
    runs = 0
    rec = np.array([[0.0, 0.0, 0.0], [1.0, -0.5, 0.0], [0.0, 0.0, 9.5]])
    for water in ("clear", "coastal"):
        for atmos in ("weak", "strong"):
            for zeta in (0.0, 45.0):
                ch = build_channel(Scenario({"grid.m": 16, "surface.samples": 64, "water.preset": water,
                                             "atmosphere.preset": atmos, "link.zeta_deg": zeta}))
                cap = ch.setup.transmit_power * ch.setup.xi_t
                for seed in (1, 2, 3):
                    t = run_transport(ch.setup, 4096, seed, rec)
                    worst = max(worst, float(t.total_power.max()) / cap)
                    runs += 1
    ok = worst <= 1.0
    record(2, "P_r <= P_Tx xi_t", ok, f"{runs} runs x 3 receivers, max P_r / (P_Tx xi_t) = {worst:.3g}")
    assert ok


def test_c2_direction_norm_drift():
    backend = "cython" if "cython" in available_backends() else "python"
    gen = RngStream(41, 1).generator()
    n = 1_000_000
    out = rotate_chain([0.0, 0.6, -0.8], 1 - 2 * gen.random(n), 2 * math.pi * gen.random(n), backend=backend)
    drift = float(np.max(np.abs(np.linalg.norm(out, axis=1) - 1)))
    ok = drift < 1e-9
    record(2, "direction norm drift over 1e6 rotations", ok, f"{backend} kernel, max drift {drift:.1e}")
    assert ok


# --- 3. sampler moments --------------------------------------------------------------------

def test_c3_sampler_moments():
    n = 100_000
    s2 = slant_rytov_variance(LinkGeometry.from_zenith(0.0, 200e3, 10.0), WEAK_TURBULENCE, BeamParams().k)
    xi = sample_fading_field(np.array([[math.expm1(s2)]]), np.array([s2]), RngStream(43, 1), draws=n).xi_f[:, 0]
    cox = CoxMunkParams(6.0)
    tan2 = np.tan(sample_pitch_angle(cox, RngStream(43, 2), n)) ** 2
    g = 0.8708
    cos_hg = np.cos(sample_hg_angle(g, RngStream(43, 3), n))
    k_e = 0.149
    steps = sample_step(k_e, RngStream(43, 4), n)
    results = [
        ("E[xi_f] = 1", *_within_3se(xi, 1.0)),
        ("E[tan^2 theta_p] = sigma^2", *_within_3se(tan2, cox.sigma_sq)),
        ("E[cos theta_HG] = g", *_within_3se(cos_hg, g)),
        ("E[step] = 1/k_e", *_within_3se(steps, 1 / k_e)),
    ]
    for name, ok, detail in results:
        record(3, name, ok, detail)
    assert all(ok for _, ok, _ in results)


# --- 4. single-scatter oracle ------------------------------------------------------------

def test_c4_single_scatter_oracle():
    water = WaterOptics(0.02, 0.03, 0.87)
    setup = point_source_setup(water, orders=1)
    t = run_transport(setup, 200_000, 7, np.array([[3.0, 0.0, 0.0]]))
    mc = float(t.total_power[0])
    direct, single = single_scatter_oracle(water, (3.0, 0.0))
    ref = direct + single
    err = abs(mc - ref) / ref
    ok = err < 0.05
    record(4, "MC vs direct + single-scatter quadrature", ok,
           f"MC {mc:.5g} (SE {t.standard_error[0]:.2g}), oracle {ref:.5g}, rel diff {err:.2%}")
    assert ok


# --- 5. analytic identities ----------------------------------------------------------------

def test_c5_rytov_angle_ratio():
    k = BeamParams().k
    base = slant_rytov_variance(LinkGeometry.from_zenith(0.0, 200e3, 10.0), WEAK_TURBULENCE, k)
    errs = []
    for zd in (15.0, 30.0, 45.0, 60.0):
        z = math.radians(zd)
        r = slant_rytov_variance(LinkGeometry.from_zenith(z, 200e3, 10.0), WEAK_TURBULENCE, k) / base
        errs.append(abs(r / (1 / math.cos(z)) ** (11 / 6) - 1))
    ok = max(errs) < 1e-9
    record(5, "slant Rytov ratio = sec^(11/6)", ok, f"max rel error {max(errs):.1e} over 15..60 deg")
    assert ok


def test_c5_outage_closed_form():
    noise = NoiseModel()
    gen = RngStream(47, 1).generator()
    worst = 0.0
    for _ in range(20):
        mean = 10 ** gen.uniform(-9, -6)
        s2 = gen.uniform(0.01, 1.0)
        pth = mean * math.exp(gen.uniform(-1.5, 1.0))
        s, mu = math.sqrt(s2), math.log(mean) - s2 / 2
        oracle = integrate.quad(lambda t: math.exp(-0.5 * ((t - mu) / s) ** 2) / (s * math.sqrt(2 * math.pi)),
                                mu - 40 * s, math.log(pth), epsabs=1e-13, epsrel=1e-12, limit=200)[0]
        worst = max(worst, abs(outage_probability(PowerDistribution(mean, s2), noise, snr(pth)) - oracle))
    ok = worst < 1e-9
    record(5, "outage closed form = lognormal CDF quadrature", ok, f"max abs diff {worst:.1e} over 20 cases")
    assert ok


def test_c5_single_leg_scintillation():
    worst = 0.0
    for s in (0.05, 0.3, 1.0):
        t = run_transport(point_source_setup(WaterOptics(0.069, 0.08, 0.8708), orders=2, sigma_R_atm=s), 4096, 2,
                          np.array([[1.0, 0.0, 0.0]]))
        worst = max(worst, float(np.max(np.abs(t.per_order_sigma_tur_sq[0] / math.expm1(s) - 1))))
        worst = max(worst, abs(single_leg_scintillation(s) - math.expm1(s)))
    ok = worst < 1e-12
    record(5, "single-leg sigma_tur^2 = e^s - 1", ok, f"max rel error {worst:.1e}")
    assert ok


def test_c5_degenerate_ber_is_q():
    noise = NoiseModel()
    worst = 0.0
    for p in (1e-9, 5e-9, 2e-8, 1e-7):
        q = 0.5 * special.erfc(0.7 * p / math.sqrt(2 * noise.n0) / math.sqrt(2))
        worst = max(worst, abs(float(mean_ber(PowerDistribution(p, 0.0), noise)) / q - 1))
    ok = worst < 1e-12
    record(5, "BER with zero scintillation = Q formula", ok, f"max rel error {worst:.1e}")
    assert ok


# --- 6. qualitative trends -----------------------------------------------------------------

@pytest.fixture(scope="module")
def sweeps():
    out = {}
    for tag, extra in {"clear6": {}, "coastal6": {"water.preset": "coastal"},
                       "clear12": {"surface.wind_m_s": 12.0},
                       "coastal12": {"water.preset": "coastal", "surface.wind_m_s": 12.0}}.items():
        s = Scenario({**DESK, **extra})
        out[tag] = (run_ber_sweep(s), run_outage_sweep(s))
        flat = s.with_values({"ber.force_zero_scintillation": True})
        out[tag + "_flat"] = run_ber_sweep(flat)
    return out


def _center_power(ber_table):
    return float(ber_table.column("mean_power_W")[0] / ber_table.column("transmit_power_W")[0])


def test_c6_coastal_power_below_clear(sweeps):
    pc, pw = _center_power(sweeps["clear6"][0]), _center_power(sweeps["coastal6"][0])
    ok = pw < pc
    record(6, "coastal received power < clear", ok, f"P_r/P_Tx clear {pc:.3e}, coastal {pw:.3e}")
    assert ok


def test_c6_coastal_ber_worse_at_equal_scintillation(sweeps):
    bc, bw = sweeps["clear6_flat"].column("ber"), sweeps["coastal6_flat"].column("ber")
    ok = bool(np.all(bw >= bc) and np.any(bw > bc))
    record(6, "coastal BER > clear at equal scintillation", ok, "power-only comparison across the default sweep")
    assert ok


@pytest.mark.xfail(strict=True, reason="lower composed scintillation in coastal water reverses the BER order "
                                       "at high transmit power")
def test_c6_coastal_ber_worse_at_every_power(sweeps):
    b_clear, _ = sweeps["clear6"]
    b_coast, _ = sweeps["coastal6"]
    bc, bw = b_clear.column("ber"), b_coast.column("ber")
    dbm = b_clear.column("value")
    worse = bw >= bc
    cross = dbm[np.argmin(worse)] if not worse.all() else None
    detail = (f"sigma_tur^2 clear {b_clear.column('sigma_tur_sq')[0]:.3f}, "
              f"coastal {b_coast.column('sigma_tur_sq')[0]:.3f}; ")
    detail += f"coastal BER lower from {cross} dBm upward" if cross is not None else "coastal worse everywhere"
    record(6, "coastal BER > clear at every transmit power", bool(worse.all()), detail)
    assert worse.all()


def test_c6_strong_atmosphere_flattens_map():
    stats = {}
    for preset in ("weak", "strong"):
        m = run_power_map(Scenario({**DESK, "atmosphere.preset": preset, "map.cells": 21, "map.half_width_m": 6.0}))
        X, Y = np.meshgrid(m.x, m.y)
        P = m.power
        rms = math.sqrt(float((P * (X**2 + Y**2)).sum() / P.sum()))
        half = float((P >= 0.5 * P.max()).sum() * (m.x[1] - m.x[0]) ** 2)
        stats[preset] = (m.center.total_power, rms, half)
    (cw, rw, hw), (cs, rs, hs) = stats["weak"], stats["strong"]
    ok = cs < cw and rs > rw and hs > hw
    record(6, "strong atmosphere: lower center, wider map", ok,
           f"center {cw:.3e} -> {cs:.3e} W, RMS radius {rw:.2f} -> {rs:.2f} m, half-max area {hw:.1f} -> {hs:.1f} m^2")
    assert ok


def test_c6_wind_effect_is_marginal(sweeps):
    rows = []
    ok = True
    for water in ("clear", "coastal"):
        b6, o6 = sweeps[f"{water}6"]
        b12, o12 = sweeps[f"{water}12"]
        dp = abs(_center_power(b12) - _center_power(b6)) / _center_power(b6)
        dber = float(np.max(np.abs(np.log10(b12.column("ber")) - np.log10(b6.column("ber")))))
        dout = float(np.max(np.abs(o12.column("outage") - o6.column("outage"))))
        rows.append(f"{water}: dP {dp:.1%}, max dlog10 BER {dber:.2f}, max d outage {dout:.3f}")
        ok &= dp < 0.2
    # wind changes must stay small next to the water-type change at the same wind
    b_c, o_c = sweeps["clear6"]
    b_w, o_w = sweeps["coastal6"]
    ref_ber = float(np.max(np.abs(np.log10(b_w.column("ber")) - np.log10(b_c.column("ber")))))
    ref_out = float(np.max(np.abs(o_w.column("outage") - o_c.column("outage"))))
    for water in ("clear", "coastal"):
        b6, o6 = sweeps[f"{water}6"]
        b12, o12 = sweeps[f"{water}12"]
        ok &= float(np.max(np.abs(np.log10(b12.column("ber")) - np.log10(b6.column("ber"))))) < 0.5 * ref_ber
        ok &= float(np.max(np.abs(o12.column("outage") - o6.column("outage")))) < 0.5 * ref_out
    rows.append(f"water-type reference: dlog10 BER {ref_ber:.2f}, d outage {ref_out:.3f}")
    record(6, "wind 6 -> 12 m/s: |dP|/P < 20%, BER/outage marginal", ok, "; ".join(rows))
    assert ok


def test_c6_zenith_angle_degrades_links():
    s = Scenario({**DESK, "ber.variable": "zeta"})
    ber = run_ber_sweep(s).column("ber")
    outs = np.array([run_outage_sweep(s.with_values({"link.zeta_deg": z})).column("outage")
                     for z in s["ber.zeta_deg"]])
    ber_ok = bool(np.all(np.diff(ber) > 0))
    out_ok = bool(np.all(np.diff(outs, axis=0) >= 0) and np.all(np.any(np.diff(outs, axis=0) > 0, axis=1)))
    ok = ber_ok and out_ok
    record(6, "larger zeta degrades BER and outage", ok,
           f"BER at 0/15/30/45 deg: {', '.join(f'{b:.2e}' for b in ber)}; outage non-decreasing: {out_ok}")
    assert ok


# --- 7. determinism and runtime ------------------------------------------------------------

def test_c7_cli_threads_byte_identical(tmp_path):
    times = {}
    for threads in ("1", "2"):
        t0 = time.perf_counter()
        proc = subprocess.run([sys.executable, "-m", "stulc.cli", "power-map", "--photons", "100000",
                               "--threads", threads, "--out-dir", str(tmp_path / threads)],
                              capture_output=True, text=True)
        times[threads] = time.perf_counter() - t0
        assert proc.returncode == 0, proc.stderr
    same = all((tmp_path / "1" / f).read_bytes() == (tmp_path / "2" / f).read_bytes()
               for f in ("power_map.csv", "power_map.json"))
    record(7, "CSV/JSON byte-identical for --threads 1 and 2", same, "default scenario, power-map, 1e5 photons")
    fast = max(times.values()) < 60.0
    record(7, "default scenario at 1e5 photons < 60 s", fast,
           f"wall time {times['1']:.1f} s (1 thread), {times['2']:.1f} s (2 threads)")
    assert same and fast


if __name__ == "__main__":
    sys.exit(pytest.main([str(Path(__file__).resolve()), "-q", "-rx"]))
