"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) before it
asserts, so a failing criterion still reports its measured value.
Run on its own with ``pytest tests/test_acceptance.py -v -rA``.
"""

import glob
import math
import os
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import poisson

from cqed_readout.cli import parse_config
from cqed_readout.experiments import (
    FIG3C_DELTA_Z,
    FIG4_ETA,
    run_fig2,
    run_fig3b,
    run_fig3c,
    run_fig4,
    run_fig5_dephasing,
    run_fig5_diffusion,
    simulate_pair,
)
from cqed_readout.lindblad import IntegratorConfig, default_grid
from cqed_readout.models import DiffusionSpec, PhysicalParams, cooperativity, default_epsilon, sample_diffusion
from cqed_readout.readout import CountsPair, threshold_and_success

CONFIG_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def brute_force_ps(n0, n1):
    """Equal-prior success probability with the threshold scanned exhaustively."""
    k = np.arange(0, int(n1 + 20 * math.sqrt(n1 + 1)) + 50)
    value = 0.5 * poisson.cdf(k, n0) + 0.5 * poisson.sf(k, n1)
    return float(value.max())


def shipped_points():
    """(label, model, params, n_fock, cfg) for every simulated point in configs/."""
    points = []
    for path in sorted(glob.glob(os.path.join(CONFIG_DIR, "*.json"))):
        scn = parse_config(path)
        name = os.path.splitext(os.path.basename(path))[0]
        if scn.model == "analytic":
            continue
        models = ("three_level", "four_level") if name == "fig3b" else (scn.model,)
        base = scn.params
        settings = []
        if scn.sweep is None:
            settings.append(("", base))
        else:
            key, values = scn.sweep
            for v in values:
                if key == "eta":
                    settings = [("", base)]  # trajectories do not depend on eta
                    break
                if key == "gamma_I":
                    spec = replace(scn.diffusion or DiffusionSpec(), gamma_I=v)
                    settings += [(f"gamma_I={v},dw={d:.4g}", base.with_(delta_omega=d)) for d, _ in sample_diffusion(spec)]
                elif key == "cooperativity":
                    settings.append((f"C={v}", base.with_(g=math.sqrt(v * base.kappa * base.gamma[0] / 2.0))))
                else:
                    settings.append((f"{key}={v}", base.with_(**{key: v})))
        for model in models:
            for tag, p in settings:
                points.append((f"{name}:{model}:{tag}", model, p, scn.n_fock, scn.grid))
    return points


@pytest.fixture(scope="module")
def three_level_timed():
    start = time.perf_counter()
    curve = run_fig3b("three_level", PhysicalParams())
    return curve, time.perf_counter() - start


@pytest.fixture(scope="module")
def three_level_curve(three_level_timed):
    return three_level_timed[0]


@pytest.fixture(scope="module")
def fig4_result():
    start = time.perf_counter()
    result = run_fig4(FIG4_ETA)
    return result, time.perf_counter() - start


def test_criterion_1_weak_excitation_transmission(criterion):
    p = PhysicalParams(gamma=(0.1, 0.0, 0.1, 0.1))
    start = time.perf_counter()
    eps = default_epsilon(p)
    cfg = IntegratorConfig(default_grid(n_points=200, t_end=60.0, n_geometric=50))
    loaded = simulate_pair("three_level", p.with_(epsilon=eps), cfg=cfg)[0]
    empty = simulate_pair("three_level", p.with_(g=0.0, epsilon=eps), cfg=cfg)[0]
    ratio = loaded.flux[-1] / empty.flux[-1]
    expected = 1.0 / (1.0 + cooperativity(p)) ** 2
    rel = abs(ratio / expected - 1.0)
    elapsed = time.perf_counter() - start
    ok = rel <= 0.02 and elapsed < 10.0
    criterion("1", ok, f"ratio={ratio:.6g} expected={expected:.6g} rel_err={rel:.3g} (tol 0.02), {elapsed:.1f} s")
    assert ok


def test_criterion_2_threshold_success_vs_oracle(criterion):
    rng = np.random.default_rng(2024)
    n1 = rng.uniform(1e-3, 50.0, 1000)
    n0 = n1 * rng.uniform(0.0, 1.0, 1000)
    start = time.perf_counter()
    worst = 0.0
    for a, b in zip(n0, n1):
        m, ps = threshold_and_success(CountsPair(float(a), float(b)))
        worst = max(worst, abs(ps - brute_force_ps(a, b)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 5.0
    criterion("2", ok, f"max |P_s - oracle|={worst:.3g} (tol 1e-12), {elapsed:.2f} s (limit 5 s)")
    assert ok


def test_criterion_3_three_level_optimum(criterion, three_level_timed):
    c, elapsed = three_level_timed
    ok = abs(c.ps_opt - 0.995) <= 0.005 and 115.0 <= c.t_opt <= 190.0 and elapsed < 120.0
    criterion("3", ok, f"P_s,opt={c.ps_opt:.6f} (0.995 +/- 0.005), T_opt={c.t_opt:.1f} ns ([115, 190]), {elapsed:.1f} s")
    assert ok


def test_criterion_4_four_level_optimum(criterion):
    start = time.perf_counter()
    c = run_fig3b("four_level", PhysicalParams())
    elapsed = time.perf_counter() - start
    ok = abs(c.ps_opt - 0.933) <= 0.010 and elapsed < 120.0
    criterion("4", ok, f"P_s,opt={c.ps_opt:.6f} (0.933 +/- 0.010), T_opt={c.t_opt:.1f} ns, {elapsed:.1f} s")
    assert ok


def test_criterion_5_zeeman_sweep(criterion, three_level_curve):
    start = time.perf_counter()
    result = run_fig3c(FIG3C_DELTA_Z)
    elapsed = time.perf_counter() - start
    ps = np.array([r.ps_opt for r in result.rows])
    worst_drop = float(np.max(-np.diff(ps))) if ps.size > 1 else 0.0
    last = result.rows[-1]
    gap = abs(last.ps_opt - three_level_curve.ps_opt)
    ok = worst_drop <= 1e-3 and gap <= 0.01 and elapsed < 15 * 60
    criterion(
        "5",
        ok,
        f"largest drop={worst_drop:.3g} (tol 1e-3), |P_s(dz={last.value:g}) - three-level|={gap:.3g} (tol 0.01), {elapsed:.0f} s",
    )
    assert ok


def test_criterion_6_efficiency_sweep(criterion, fig4_result):
    result, elapsed = fig4_result
    by_eta = {r.value: r.ps_opt for r in result.rows}
    ps = np.array([r.ps_opt for r in result.rows])
    monotone = bool(np.all(np.diff(ps) >= 0))
    ok = abs(by_eta[0.025] - 0.99) <= 0.005 and by_eta[0.0] == 0.5 and monotone and elapsed < 180.0
    criterion(
        "6",
        ok,
        f"P_s(eta=0.025)={by_eta[0.025]:.6f} (0.99 +/- 0.005), P_s(eta=0)={by_eta[0.0]!r}, monotone={monotone}, {elapsed:.1f} s",
    )
    assert ok


def test_criterion_7_pure_dephasing(criterion):
    start = time.perf_counter()
    row = run_fig5_dephasing([1.0]).rows[0]
    elapsed = time.perf_counter() - start
    ok = abs(row.ps_opt - 0.93) <= 0.01 and elapsed < 120.0
    criterion("7", ok, f"P_s,opt(gamma_d=1)={row.ps_opt:.6f} (0.93 +/- 0.01), {elapsed:.1f} s")
    assert ok


def test_criterion_8_spectral_diffusion(criterion, fig4_result):
    start = time.perf_counter()
    diffusion = run_fig5_diffusion([0.0, 1.0])
    elapsed = time.perf_counter() - start
    dephasing = run_fig5_dephasing([1.0]).rows[0].ps_opt
    by_gi = {r.value: r.ps_opt for r in diffusion.rows}
    reference = {r.value: r.ps_opt for r in fig4_result[0].rows}[0.025]
    above = by_gi[1.0] > dephasing + 0.01
    baseline = abs(by_gi[0.0] - reference)
    ok = above and baseline <= 1e-3 and elapsed < 30 * 60
    criterion(
        "8",
        ok,
        f"P_s(gamma_I=1)={by_gi[1.0]:.6f} vs P_s(gamma_d=1)+0.01={dephasing + 0.01:.6f}, "
        f"|P_s(gamma_I=0) - P_s(eta=0.025)|={baseline:.3g} (tol 1e-3), {elapsed:.0f} s",
    )
    assert ok


@pytest.mark.slow
def test_criterion_9a_state_invariants(criterion):
    worst = {"trace": 0.0, "herm": 0.0, "min_eig": 0.0}
    for _, model, p, n_fock, cfg in shipped_points():
        for traj in simulate_pair(model, p, n_fock, cfg):
            for key, value in (
                ("trace", traj.trace_error.max()),
                ("herm", traj.hermiticity_error.max()),
                ("min_eig", -traj.min_eigenvalue.min()),
            ):
                worst[key] = max(worst[key], float(value))
    ok = worst["trace"] <= 1e-8 and worst["herm"] <= 1e-8 and -worst["min_eig"] >= -1e-7
    criterion(
        "9a",
        ok,
        f"max trace err={worst['trace']:.3g}, max Hermiticity err={worst['herm']:.3g} (tol 1e-8), "
        f"min eigenvalue={-worst['min_eig']:.3g} (floor -1e-7)",
    )
    assert ok


def test_criterion_9b_fock_truncation(criterion):
    worst, where = 0.0, ""
    for label, model, p, _, cfg in shipped_points():
        small = simulate_pair(model, p, 3, cfg)
        large = simulate_pair(model, p, 4, cfg)
        for a, b in zip(small, large):
            rel = abs(a.accumulated[-1] - b.accumulated[-1]) / max(abs(b.accumulated[-1]), 1e-300)
            if rel > worst:
                worst, where = rel, label
    ok = worst < 1e-4
    criterion("9b", ok, f"max relative change of accumulated counts, n_fock 3 -> 4: {worst:.3g} at {where} (tol 1e-4)")
    assert ok


def test_criterion_10_zeeman_limits(criterion, three_level_curve):
    far = run_fig3b("four_level", PhysicalParams(delta_z=1e4))
    degenerate = run_fig3b("four_level", PhysicalParams(delta_z=0.0))
    gap = abs(far.ps_opt - three_level_curve.ps_opt)
    flat = float(np.max(np.abs(degenerate.ps - 0.5)))
    ok = gap <= 0.005 and flat <= 1e-6
    criterion("10", ok, f"|P_s(dz=1e4) - three-level|={gap:.3g} (tol 0.005), max |P_s(dz=0) - 1/2|={flat:.3g} (tol 1e-6)")
    assert ok


def test_criterion_11_analytic_ordering(criterion):
    start = time.perf_counter()
    rows = run_fig2()
    elapsed = time.perf_counter() - start
    table = {}
    for c, x, n0, n1, m, ps, err in rows:
        table.setdefault(c, []).append((x, m, ps, err))
    cs = sorted(table)
    err = np.array([[r[3] for r in table[c]] for c in cs])
    ps = np.array([[r[2] for r in table[c]] for c in cs])
    ms = np.array([[r[1] for r in table[c]] for c in cs])
    # strict ordering in C at every x, judged on 1 - P_s since P_s rounds to 1
    ordered = bool(np.all(err[1:] < err[:-1]))
    # any dip in P_s must sit on a threshold step or be rounding-level
    dps = np.diff(ps, axis=1)
    allowed = (np.diff(ms, axis=1) != 0) | (dps > -1e-12)
    ripple_ok = bool(np.all(allowed[dps < 0]))
    large = bool(np.all(ps[:, -1] > 0.999))
    ok = ordered and ripple_ok and large and elapsed < 1.0
    criterion(
        "11",
        ok,
        f"strictly ordered={ordered}, non-decreasing up to threshold ripple={ripple_ok}, "
        f"P_s>0.999 at largest x={large}, {elapsed:.3f} s (limit 1 s)",
    )
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v"]))
