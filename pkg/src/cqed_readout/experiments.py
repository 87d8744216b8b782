"""Scenario runners that regenerate the readout figures as tables."""

import csv
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone

import numpy as np

from .lindblad import IntegratorConfig, default_grid, evolve_many
from .models import (
    DiffusionSpec,
    PhysicalParams,
    build_model,
    cooperativity,
    sample_diffusion,
)
from .readout import (
    ReadoutCurve,
    analytic_counts,
    calibrate_nin,
    error_probability,
    ps_curve,
    threshold_and_success,
)

log = logging.getLogger(__name__)

SWEEP_PARAMS = ("eta", "delta_z", "gamma_d", "gamma_I", "cooperativity", "eta_T_nin")
SCENARIO_MODELS = ("three_level", "four_level", "analytic")

FIG2_COOPERATIVITIES = (0.4, 4.0, 40.0)
FIG3C_DELTA_Z = (0.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0)
FIG4_ETA = (0.0, 0.0025, 0.005, 0.0075, 0.01, 0.015, 0.02, 0.025, 0.03, 0.04, 0.05, 0.075, 0.1)
FIG5_GAMMA_D = (0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0)
FIG5_GAMMA_I = (0.0, 0.5, 1.0, 1.5, 2.0, 3.0)

DEFAULT_N_FOCK = 7
SYMMETRY_TOL = 1e-9


@dataclass
class Scenario:
    model: str = "three_level"
    params: PhysicalParams = field(default_factory=PhysicalParams)
    n_fock: int = DEFAULT_N_FOCK
    grid: IntegratorConfig = field(default_factory=lambda: IntegratorConfig(default_grid()))
    diffusion: DiffusionSpec = None
    sweep: tuple = None  # (name, values)

    def __post_init__(self):
        if self.model not in SCENARIO_MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if self.sweep is not None:
            name, values = self.sweep
            if name not in SWEEP_PARAMS:
                raise ValueError(f"cannot sweep {name!r}; choose from {SWEEP_PARAMS}")
            self.sweep = (name, tuple(float(v) for v in values))

    def describe(self):
        """JSON-safe resolved configuration, recorded in CSV headers."""
        out = {
            "model": self.model,
            "n_fock": self.n_fock,
            "params": asdict(self.params),
            "integrator": {
                "method": self.grid.method,
                "rel_tol": self.grid.rel_tol,
                "abs_tol": self.grid.abs_tol,
                "max_step": None if math.isinf(self.grid.max_step) else self.grid.max_step,
                "n_times": int(self.grid.output_grid.size),
                "t_end": float(self.grid.output_grid[-1]),
            },
        }
        if self.diffusion is not None:
            out["diffusion"] = asdict(self.diffusion)
        if self.sweep is not None:
            out["sweep"] = {"name": self.sweep[0], "values": list(self.sweep[1])}
        return out


@dataclass
class SweepRow:
    value: float
    ps_opt: float
    t_opt: float
    m_opt: int
    n0: float
    n1: float
    model: str = ""


@dataclass
class SweepResult:
    parameter: str
    rows: list
    reference: SweepRow = None
    nodes: list = field(default_factory=list)  # per-quadrature-node detail for diffusion sweeps


def resolve_threads(threads=None):
    if threads is None:
        threads = os.environ.get("READOUT_SIM_THREADS", "1")
    if threads == "auto":
        return os.cpu_count() or 1
    n = int(threads)
    if n < 1:
        raise ValueError(f"threads must be positive, got {threads}")
    return n


def _map(fn, items, threads):
    items = list(items)
    n = min(resolve_threads(threads), len(items)) if items else 1
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))  # map keeps input order


def simulate_pair(model, params, n_fock=DEFAULT_N_FOCK, cfg=None):
    """Trajectories started in |g0> and |g1>, both with an empty cavity."""
    cfg = cfg or IntegratorConfig(default_grid())
    system = build_model(model, params, n_fock)
    layout = system.layout
    return evolve_many(system, [layout.basis_state(0), layout.basis_state(1)], cfg)


def curve_from_pair(pair, eta):
    t0, t1 = pair
    curve = ps_curve(t0.times, t0.accumulated, t1.accumulated, eta)
    curve.diagnostics = {
        "flux0": t0.flux,
        "flux1": t1.flux,
        "photon_flux0": t0.photon_flux,
        "photon_flux1": t1.photon_flux,
    }
    return curve


def _row(value, curve, model=""):
    i = curve.i_opt
    return SweepRow(
        value=float(value),
        ps_opt=curve.ps_opt,
        t_opt=curve.t_opt,
        m_opt=curve.m_opt,
        n0=float(curve.n0[i]),
        n1=float(curve.n1[i]),
        model=model,
    )


def analytic_curve(times, eta_nin, c):
    """P_s(T) from the weak-excitation count formulas, counts linear in T."""
    times = np.asarray(times, dtype=float)
    n0 = np.empty(times.size)
    n1 = np.empty(times.size)
    ps = np.empty(times.size)
    ms = np.empty(times.size, dtype=int)
    for i, t in enumerate(times):
        counts = analytic_counts(eta_nin * t, c)
        n0[i], n1[i] = counts.n0, counts.n1
        ms[i], ps[i] = threshold_and_success(counts)
    i = int(np.argmax(ps))
    return ReadoutCurve(times, ps, ms, n0, n1, float(times[i]), int(ms[i]), float(ps[i]))


def run_fig2(c_values=FIG2_COOPERATIVITIES, eta_T_nin_max=200.0, n_points=400):
    """Rows (C, eta T n_in, n0, n1, M, P_s, 1 - P_s) from the analytic count formulas."""
    if not c_values:
        raise ValueError("need at least one cooperativity")
    xs = np.linspace(0.0, eta_T_nin_max, n_points + 1)[1:]
    rows = []
    for c in c_values:
        for x in xs:
            counts = analytic_counts(float(x), c)
            m, ps = threshold_and_success(counts)
            rows.append((float(c), float(x), counts.n0, counts.n1, m, ps, error_probability(counts)))
    return rows


def run_fig3b(model, params=None, n_fock=DEFAULT_N_FOCK, cfg=None):
    params = params or PhysicalParams()
    return curve_from_pair(simulate_pair(model, params, n_fock, cfg), params.eta)


def run_fig3c(delta_z_values=FIG3C_DELTA_Z, params=None, n_fock=DEFAULT_N_FOCK, cfg=None, threads=None):
    params = params or PhysicalParams()

    def one(dz):
        p = params.with_(delta_z=dz)
        return _row(dz, run_fig3b("four_level", p, n_fock, cfg), "four_level")

    rows = _map(one, sorted(delta_z_values), threads)
    ref = _row(math.inf, run_fig3b("three_level", params, n_fock, cfg), "three_level")
    return SweepResult("delta_z", rows, reference=ref)


def run_fig4(eta_values=FIG4_ETA, params=None, n_fock=DEFAULT_N_FOCK, cfg=None, model="four_level"):
    """The trajectories do not depend on eta, so they are computed once."""
    params = params or PhysicalParams()
    pair = simulate_pair(model, params, n_fock, cfg)
    rows = [_row(eta, curve_from_pair(pair, eta), model) for eta in sorted(eta_values)]
    return SweepResult("eta", rows)


def run_fig5_dephasing(gamma_d_values=FIG5_GAMMA_D, params=None, n_fock=DEFAULT_N_FOCK, cfg=None, threads=None):
    params = params or PhysicalParams(eta=0.025)

    def one(gd):
        return _row(gd, run_fig3b("four_level", params.with_(gamma_d=gd), n_fock, cfg), "four_level")

    return SweepResult("gamma_d", _map(one, sorted(gamma_d_values), threads))


def diffusion_average(params, spec, n_fock=DEFAULT_N_FOCK, cfg=None, model="four_level", threads=None):
    """Gaussian-weighted mean of P_s(T, delta_omega), then maximized over T.

    Returns (averaged ReadoutCurve, list of (delta_omega, weight, curve)).
    When the outermost +/- node pair gives identical curves the mirror
    images of the remaining nodes are reused instead of recomputed.
    """
    nodes = sample_diffusion(spec)

    def one(d):
        return curve_from_pair(simulate_pair(model, params.with_(delta_omega=d), n_fock, cfg), params.eta)

    curves = {}
    symmetric = False
    if len(nodes) > 1:
        lo, hi = nodes[0][0], nodes[-1][0]
        curves[lo], curves[hi] = _map(one, [lo, hi], threads)
        symmetric = bool(np.max(np.abs(curves[lo].ps - curves[hi].ps)) <= SYMMETRY_TOL)
        log.info("diffusion node symmetry %s", "holds" if symmetric else "broken")
    todo = [d for d, _ in nodes if d not in curves and not (symmetric and d > 0)]
    curves.update(zip(todo, _map(one, todo, threads)))
    if symmetric:
        for d, _ in nodes:
            if d > 0 and d not in curves:
                curves[d] = curves[-d]

    detail = [(d, w, curves[d]) for d, w in nodes]
    times = detail[0][2].times
    ps = sum(w * c.ps for _, w, c in detail)
    n0 = sum(w * c.n0 for _, w, c in detail)
    n1 = sum(w * c.n1 for _, w, c in detail)
    i = int(np.argmax(ps))
    centre = min(detail, key=lambda item: abs(item[0]))[2]
    avg = ReadoutCurve(
        times=times,
        ps=ps,
        thresholds=centre.thresholds,
        n0=n0,
        n1=n1,
        t_opt=float(times[i]),
        m_opt=int(centre.thresholds[i]),
        ps_opt=float(ps[i]),
        diagnostics={"symmetric_nodes": symmetric},
    )
    return avg, detail


def run_fig5_diffusion(gamma_I_values=FIG5_GAMMA_I, params=None, spec=None, n_fock=DEFAULT_N_FOCK, cfg=None, threads=None):
    """Rows carry the weighted mean counts; exact per-node counts are in ``nodes``."""
    params = params or PhysicalParams(eta=0.025, gamma_d=0.0)
    spec = spec or DiffusionSpec()
    rows, node_rows = [], []
    for gi in sorted(gamma_I_values):
        avg, detail = diffusion_average(params, replace(spec, gamma_I=gi), n_fock, cfg, threads=threads)
        rows.append(_row(gi, avg, "four_level"))
        i = avg.i_opt
        for d, w, c in detail:
            node_rows.append((gi, d, w, avg.t_opt, float(c.n0[i]), float(c.n1[i]), int(c.thresholds[i]), float(c.ps[i])))
    return SweepResult("gamma_I", rows, nodes=node_rows)


def run_scenario(scn, threads=None):
    """Evaluate a scenario: a ReadoutCurve, or a SweepResult if it sweeps."""
    p = scn.params
    cfg = scn.grid
    if scn.sweep is None:
        if scn.model == "analytic":
            return analytic_curve(cfg.output_grid, p.eta * calibrate_nin(p), cooperativity(p))
        if scn.diffusion is not None and scn.diffusion.gamma_I > 0:
            return diffusion_average(p, scn.diffusion, scn.n_fock, cfg, scn.model, threads)[0]
        return run_fig3b(scn.model, p, scn.n_fock, cfg)

    name, values = scn.sweep
    if scn.model == "analytic":
        return _sweep_analytic(scn, name, values)
    if name in ("eta_T_nin",):
        raise ValueError("eta_T_nin sweeps apply to the analytic model only")
    if name == "eta":
        return run_fig4(values, p, scn.n_fock, cfg, model=scn.model)
    if name == "gamma_I":
        spec = scn.diffusion or DiffusionSpec()
        rows = []
        for gi in sorted(values):
            avg, _ = diffusion_average(p, replace(spec, gamma_I=gi), scn.n_fock, cfg, scn.model, threads)
            rows.append(_row(gi, avg, scn.model))
        return SweepResult(name, rows)

    def one(v):
        if name == "cooperativity":
            # reach the requested C by scaling g at fixed kappa, gamma0
            q = p.with_(g=math.sqrt(v * p.kappa * p.gamma[0] / 2.0))
        else:
            q = p.with_(**{name: v})
        return _row(v, run_fig3b(scn.model, q, scn.n_fock, cfg), scn.model)

    return SweepResult(name, _map(one, sorted(values), threads))


def _sweep_analytic(scn, name, values):
    p = scn.params
    times = scn.grid.output_grid
    rate = p.eta * calibrate_nin(p)
    rows = []
    for v in sorted(values):
        if name == "cooperativity":
            rows.append(_row(v, analytic_curve(times, rate, v), "analytic"))
        elif name == "eta_T_nin":
            counts = analytic_counts(v, cooperativity(p))
            m, ps = threshold_and_success(counts)
            t = v / rate if rate > 0 else math.nan
            rows.append(SweepRow(v, ps, t, m, counts.n0, counts.n1, "analytic"))
        elif name == "eta":
            rows.append(_row(v, analytic_curve(times, v * calibrate_nin(p), cooperativity(p)), "analytic"))
        else:
            raise ValueError(f"{name} sweeps need a simulated model, not 'analytic'")
    return SweepResult(name, rows)


# --- CSV output -----------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    # shortest string that reads back to the same double (up to 17 digits)
    return repr(float(v))


def write_csv(path, columns, rows, config=None, notes=(), stamp=False):
    """Header comments ('#'), one column-name row, then exactly round-tripping values."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        if stamp:
            fh.write(f"# generated: {datetime.now(timezone.utc).isoformat(timespec='seconds')}\n")
        if config is not None:
            fh.write("# config: " + json.dumps(config, sort_keys=True, default=_json_default) + "\n")
        for note in notes:
            fh.write(f"# {note}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


CURVE_COLUMNS = ["t_ns", "n0", "n1", "threshold", "ps", "flux0", "flux1", "photon_flux0", "photon_flux1"]
SWEEP_COLUMNS = ["model", "value", "ps_opt", "t_opt_ns", "m_opt", "n0_at_topt", "n1_at_topt"]
NODE_COLUMNS = ["gamma_I_ghz", "delta_omega_ghz", "weight", "t_ns", "n0", "n1", "threshold", "ps"]
FIG2_COLUMNS = ["cooperativity", "eta_T_nin", "n0", "n1", "threshold", "ps", "error"]


def curve_rows(curve):
    nan = np.full(curve.times.size, np.nan)
    d = curve.diagnostics
    cols = [
        curve.times,
        curve.n0,
        curve.n1,
        curve.thresholds,
        curve.ps,
        d.get("flux0", nan),
        d.get("flux1", nan),
        d.get("photon_flux0", nan),
        d.get("photon_flux1", nan),
    ]
    return [
        (float(t), float(a), float(b), int(m), float(p), float(f0), float(f1), float(q0), float(q1))
        for t, a, b, m, p, f0, f1, q0, q1 in zip(*cols)
    ]


def write_curve(path, curve, config=None, stamp=False):
    notes = [f"ps_opt={curve.ps_opt!r} t_opt_ns={curve.t_opt!r} m_opt={curve.m_opt}"]
    return write_csv(path, CURVE_COLUMNS, curve_rows(curve), config, notes, stamp)


def sweep_rows(result):
    rows = [(r.model, r.value, r.ps_opt, r.t_opt, r.m_opt, r.n0, r.n1) for r in result.rows]
    if result.reference is not None:
        r = result.reference
        rows.append((r.model + "_reference", r.value, r.ps_opt, r.t_opt, r.m_opt, r.n0, r.n1))
    return rows


def write_sweep(path, result, config=None, stamp=False):
    columns = list(SWEEP_COLUMNS)
    columns[1] = result.parameter
    return write_csv(path, columns, sweep_rows(result), config, (), stamp)
