"""Acceptance suite: one PASS/FAIL line per headline criterion.

Run under pytest (lines are repeated in the terminal summary) or directly
with ``python3 tests/test_acceptance.py``.  Tolerances are pinned below and
never relaxed to make a run pass.
"""

import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from ltpa import pasim
from ltpa.basis import BasisSpec, parameter_count
from ltpa.dpd import DpdConfig, run_dpd_loop
from ltpa.ident import FitConfig, fit, jacobian
from ltpa.ltmodel import LtModel, predict, predict_samples
from ltpa.metrics import acpr_db, block_nmse, error_spectrum, nmse_db
from ltpa.signal import BurstProfile, generate_bursty
from ltpa.state import StateFilter, effective_memory, frequency_response
from ltpa.twotone import (SampledResponse, fit_initial_filter, response_from_measurements,
                          solve_static_params, synthesize_measurements)

# pinned tolerances
JAC_CONFIGS, JAC_SAMPLES, JAC_H, JAC_RTOL, JAC_SECONDS = 100, 512, 1e-6, 1e-6, 60.0
ALPHA_TOL, THETA_RTOL, NOISELESS_NMSE_DB, NOISY_BAND_DB = 5e-4, 0.01, -80.0, 1.0
MAX_OUTER, FIT_SECONDS, GN_SOFT_TARGET = 8, 120.0, 6
AB_AVG_DB, AB_WORST_DB = 1.5, 4.0
MULTI_DB = 0.3
TWOTONE_RTOL, TWOTONE_ALPHA_TOL = 1e-6, 1e-4
# (alpha, quoted tau, decimals quoted)
TAU_CASES = ((0.99986, 7143, 0), (0.949, 19.6, 1), (0.991, 111, 0))
DPD_AVG_DB, DPD_WORST_DB, DPD_POWER_DB = 1.0, 2.0, 0.1
PARSEVAL_RTOL = 1e-8

FS = 30.72e6
BW = 4 / 30.72
SEG = 50_000
LT_BASIS = BasisSpec.mp(5, 2, odd_only=True)
# plain MP rivals with at least as many coefficients as the LT model (pole included)
MP_RIVALS = (BasisSpec.mp(5, 3), BasisSpec.mp(7, 2), BasisSpec.mp(7, 4),
             BasisSpec.mp(9, 6, odd_only=True), BasisSpec.mp(7, 10))

RESULTS = []


def record(name: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
    print(line, flush=True)
    RESULTS.append(line)
    assert ok, line


def ar(alpha):
    return StateFilter.ar(alpha, normalized=True)


@pytest.fixture(scope="module")
def drive():
    return generate_bursty(BurstProfile(SEG, (0, -10, 0, -10), pasim.NOMINAL_RMS), BW, 7, FS)


@pytest.fixture(scope="module")
def fixture_pa():
    return pasim.default_doherty_like()


@pytest.fixture(scope="module")
def noisy_fit(drive, fixture_pa):
    y = fixture_pa.evaluate(drive)
    t = time.perf_counter()
    rep = fit(LT_BASIS, [ar(0.99)], drive, y)
    return y, rep, time.perf_counter() - t


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(2024)
    t = time.perf_counter()
    worst = 0.0
    for i in range(JAC_CONFIGS):
        spec = BasisSpec.mp(int(rng.integers(1, 6)), int(rng.integers(0, 3)))
        q = parameter_count(spec)
        th0, th1 = (rng.standard_normal(q) + 1j * rng.standard_normal(q) for _ in range(2))
        alpha = rng.uniform(-0.9, 0.999)
        beta = rng.uniform(-0.9, 0.9)
        f = StateFilter.arma(alpha, beta, normalized=bool(i % 2))
        x = 0.4 * (rng.standard_normal(JAC_SAMPLES) + 1j * rng.standard_normal(JAC_SAMPLES))
        model = LtModel(spec, th0, (f,), (th1,))
        J = jacobian(model, x)
        p = np.real(f.params())
        for j in range(2):
            e = np.zeros(2)
            e[j] = JAC_H
            hi = predict_samples(model.with_filter(0, f.with_params(p + e)), x)
            lo = predict_samples(model.with_filter(0, f.with_params(p - e)), x)
            fd = (hi - lo) / (2 * JAC_H)
            worst = max(worst, np.linalg.norm(J[:, j] - fd) / np.linalg.norm(fd))
    secs = time.perf_counter() - t
    record("jacobian", worst < JAC_RTOL and secs < JAC_SECONDS,
           f"{JAC_CONFIGS} ARMA(1,1) configs, worst rel err {worst:.2e} "
           f"(< {JAC_RTOL:g}), {secs:.1f} s (< {JAC_SECONDS:g} s)")


def test_oracle_recovery(drive, fixture_pa, noisy_fit):
    truth = fixture_pa.true_model
    y0 = fixture_pa.noiseless().evaluate(drive)
    t = time.perf_counter()
    rep = fit(LT_BASIS, [ar(0.99)], drive, y0, FitConfig(gn_tol=1e-9, max_outer_iters=MAX_OUTER))
    secs0 = time.perf_counter() - t
    m = rep.final_model
    da = abs(m.state_filters[0].alpha[0] - truth.state_filters[0].alpha[0])
    e0 = np.linalg.norm(m.theta0 - truth.theta0) / np.linalg.norm(truth.theta0)
    e1 = (np.linalg.norm(m.theta_dyn[0] - truth.theta_dyn[0])
          / np.linalg.norm(truth.theta_dyn[0]))
    _, noisy, secs1 = noisy_fit
    gn = max(max(s) for s in noisy.gn_steps())
    ok = (da <= ALPHA_TOL and max(e0, e1) <= THETA_RTOL and rep.final_nmse_db < NOISELESS_NMSE_DB
          and len(rep.outer_trace) <= MAX_OUTER and len(noisy.outer_trace) <= MAX_OUTER
          and abs(noisy.final_nmse_db + 60) <= NOISY_BAND_DB and noisy.converged
          and max(secs0, secs1) < FIT_SECONDS)
    record("oracle-recovery", ok,
           f"|da| {da:.1e} (<= {ALPHA_TOL:g}), theta0 {e0:.2e} / theta1 {e1:.2e} rel "
           f"(<= {THETA_RTOL:g}), noiseless {rep.final_nmse_db:.1f} dB (< {NOISELESS_NMSE_DB:g}) "
           f"in {len(rep.outer_trace)} outer; noisy {noisy.final_nmse_db:.2f} dB "
           f"(-60 +/- {NOISY_BAND_DB:g}) in {len(noisy.outer_trace)} outer (<= {MAX_OUTER}), "
           f"max GN steps {gn} (soft target {GN_SOFT_TARGET}); "
           f"{secs0:.1f} s / {secs1:.1f} s (< {FIT_SECONDS:g} s)")


def test_ab_against_plain_mp(drive, noisy_fit):
    y, rep, _ = noisy_fit
    lt_pred = predict(rep.final_model, drive)
    lt_avg = nmse_db(lt_pred, y)
    lt_worst = block_nmse(lt_pred, y).max_nmse_db
    n_lt = rep.final_model.parameter_count(include_filters=True)
    rivals = []
    for spec in MP_RIVALS:
        assert parameter_count(spec) >= n_lt
        m = fit(spec, [], drive, y).final_model
        p = predict(m, drive)
        rivals.append((str(spec), nmse_db(p, y), block_nmse(p, y).max_nmse_db))
    best_avg = min(rivals, key=lambda r: r[1])
    best_worst = min(rivals, key=lambda r: r[2])
    g_avg, g_worst = best_avg[1] - lt_avg, best_worst[2] - lt_worst
    record("ab-trend", g_avg >= AB_AVG_DB and g_worst >= AB_WORST_DB,
           f"LT {n_lt} params {lt_avg:.2f}/{lt_worst:.2f} dB vs best MP "
           f"{best_avg[0]} {best_avg[1]:.2f} dB avg, {best_worst[0]} {best_worst[2]:.2f} dB worst; "
           f"gains {g_avg:.2f} dB (>= {AB_AVG_DB:g}) / {g_worst:.2f} dB (>= {AB_WORST_DB:g})")


def test_multi_state(drive):
    pa = pasim.two_state_pa()
    y = pa.evaluate(drive)
    spec = pa.true_model.basis
    one = fit(spec, [ar(0.999)], drive, y).final_nmse_db
    two = fit(spec, [ar(0.999), ar(0.95)], drive, y).final_nmse_db
    record("multi-state", one - two >= MULTI_DB,
           f"one state {one:.2f} dB, two states {two:.2f} dB, gain {one - two:.2f} dB "
           f"(>= {MULTI_DB:g})")


def test_twotone_round_trip():
    w = 2 * np.pi * np.logspace(np.log10(100), np.log10(100e3), 16) / FS
    truth = ar(0.999)
    g = np.abs(frequency_response(truth, w))
    theta0, theta1 = 1.0, -0.05
    meas = synthesize_measurements(theta0, theta1, 0.4, 0.4, w, g)
    t0, t1 = solve_static_params(meas)
    resp = response_from_measurements(meas, t0, t1)
    e_g = float(np.max(np.abs(resp.magnitudes - g) / g))
    e_t = max(abs(t0 - theta0) / abs(theta0), abs(t1 - theta1) / abs(theta1))
    fitted = fit_initial_filter(SampledResponse(w, g), "ar1")
    da = abs(fitted.alpha[0] - 0.999)
    record("twotone", max(e_g, e_t) <= TWOTONE_RTOL and da <= TWOTONE_ALPHA_TOL,
           f"theta rel err {e_t:.1e}, |G| rel err {e_g:.1e} (<= {TWOTONE_RTOL:g}); "
           f"AR(1) |da| {da:.1e} (<= {TWOTONE_ALPHA_TOL:g})")


def test_effective_memory():
    got = [effective_memory(StateFilter.ar(a)) for a, _, _ in TAU_CASES]
    ok = all(round(t, d) == w for t, (_, w, d) in zip(got, TAU_CASES))
    record("tau", ok, ", ".join(f"alpha {a} -> {t:.2f} (~{w})"
                                for t, (a, w, _) in zip(got, TAU_CASES)))


def test_dpd_trend(drive, fixture_pa, noisy_fit):
    _, rep, _ = noisy_fit
    filters = rep.final_model.state_filters
    cfg = DpdConfig()
    lt = run_dpd_loop(fixture_pa.evaluate, drive, LT_BASIS, filters, cfg)
    mp_spec = BasisSpec.mp(5, 3)
    mp = run_dpd_loop(fixture_pa.evaluate, drive, mp_spec, (), cfg)

    def best(res):
        return next(i for i in res.iterations if i.iteration == res.best_iteration)

    a, b = best(lt), best(mp)
    switch = b.block.worst_block
    g_avg = b.nmse_db - a.nmse_db
    g_worst = b.block.max_nmse_db - a.block.max_nmse_db
    g_switch = b.block.per_block_nmse_db[switch] - a.block.per_block_nmse_db[switch]
    dp = [abs(10 * np.log10(r.output_power / lt.target_output_power)) for r in (a, b)]
    ok = (g_avg >= DPD_AVG_DB and g_worst >= DPD_WORST_DB and g_switch >= DPD_WORST_DB
          and max(dp) <= DPD_POWER_DB and switch * cfg.block_size <= 2 * SEG
          < (switch + 1) * cfg.block_size)
    record("dpd-trend", ok,
           f"LT-DPD {a.nmse_db:.2f}/{a.block.max_nmse_db:.2f} dB vs {mp_spec} DPD "
           f"({parameter_count(mp_spec)} vs {2 * parameter_count(LT_BASIS)} params) "
           f"{b.nmse_db:.2f}/{b.block.max_nmse_db:.2f} dB; gains {g_avg:.2f} dB avg "
           f"(>= {DPD_AVG_DB:g}), {g_worst:.2f} dB worst, {g_switch:.2f} dB at switch block "
           f"{switch} (>= {DPD_WORST_DB:g}); power offsets {max(dp):.4f} dB "
           f"(<= {DPD_POWER_DB:g})")


def test_metric_identities(drive, fixture_pa, noisy_fit):
    y, rep, _ = noisy_fit
    fixtures = {"default": (fixture_pa, rep.final_model)}
    for name, pa in (("two-state", pasim.two_state_pa()), ("mismatched", pasim.mismatched_pa())):
        fixtures[name] = (pa, None)
    gaps, parseval, scale = [], [], []
    for name, (pa, model) in fixtures.items():
        meas = pa.evaluate(drive)
        preds = [fit(LT_BASIS, [], drive, meas).final_model]
        preds.append(model or fit(LT_BASIS, [ar(0.99)], drive, meas).final_model)
        for m in preds:
            p = predict(m, drive)
            whole = nmse_db(p, meas)
            for skip in (0, 2):
                gaps.append(block_nmse(p, meas, 4000, skip).max_nmse_db - whole)
            psd = error_spectrum(p, meas)
            e = meas.samples - p.samples
            parseval.append(abs(psd.total_power() / np.mean(np.abs(e) ** 2) - 1))
            for c in (2.0, 0.5):
                scale.append(nmse_db(p.with_samples(c * p.samples),
                                     meas.with_samples(c * meas.samples)) == whole)
                scale.append(acpr_db(meas.with_samples(c * meas.samples), BW, 5 / 30.72)
                             == acpr_db(meas, BW, 5 / 30.72))
    ok = min(gaps) >= 0 and max(parseval) <= PARSEVAL_RTOL and all(scale)
    record("metric-identities", ok,
           f"{len(gaps)} block profiles, min(max block - whole) {min(gaps):.2f} dB (>= 0); "
           f"Parseval worst {max(parseval):.1e} (<= {PARSEVAL_RTOL:g}); "
           f"{sum(scale)}/{len(scale)} exact scaling checks")


PIPELINE = (
    ("gen", "--out", "x.iq"),
    ("sim", "--in", "x.iq", "--out", "y.iq"),
    ("fit", "--in", "x.iq", "--meas", "y.iq", "--out", "m.model", "--odd", "--init-alpha", "0.99"),
    ("eval", "--model", "m.model", "--in", "x.iq", "--meas", "y.iq", "--out", "eval.txt",
     "--blocks", "eval.blocks.csv", "--psd", "eval.psd.csv"),
    ("twotone-measure", "--out", "tt.csv", "--points", "8"),
    ("twotone-init", "--measurements", "tt.csv", "--out", "g.filter"),
    ("fit", "--in", "x.iq", "--meas", "y.iq", "--out", "m2.model", "--odd",
     "--state", "arma11", "--init-filter", "g.filter"),
    ("dpd", "--in", "x.iq", "--freeze-filters", "m.model", "--compare-orders", "5,3",
     "--out", "dpd.txt", "--signal-out", "u.iq"),
)


def run_pipeline(workdir: Path) -> dict:
    workdir.mkdir(parents=True, exist_ok=True)
    for args in PIPELINE:
        subprocess.run([sys.executable, "-m", "ltpa", *args], cwd=workdir, check=True,
                       capture_output=True)
    return {p.name: p.read_bytes() for p in sorted(workdir.iterdir())}


def test_cli_determinism(tmp_path):
    a = run_pipeline(tmp_path / "a")
    b = run_pipeline(tmp_path / "b")
    diff = sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))
    record("determinism", not diff and len(a) >= 12,
           f"{len(a)} artifacts from {len(PIPELINE)} commands, "
           f"{'all byte-identical' if not diff else 'differ: ' + ', '.join(diff)}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
