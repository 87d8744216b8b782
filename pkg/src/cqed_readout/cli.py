"""Command-line front end.

    cqed-readout fig3b --output-dir out/
    cqed-readout sweep --config my.json --set sweep.values=[0,1,2]
    cqed-readout validate --config my.json

Exit status: 0 on success, 1 on configuration errors, 2 on numerical
failures. Errors are printed as a single line starting with ``ERROR:``.
"""

import argparse
import copy
import json
import logging
import math
import os
import sys
import time

import numpy as np

from .errors import ConfigError, IntegrationError
from .experiments import (
    DEFAULT_N_FOCK,
    FIG2_COOPERATIVITIES,
    FIG3C_DELTA_Z,
    FIG4_ETA,
    FIG5_GAMMA_D,
    FIG5_GAMMA_I,
    NODE_COLUMNS,
    SCENARIO_MODELS,
    SWEEP_PARAMS,
    FIG2_COLUMNS,
    Scenario,
    run_fig2,
    run_fig3b,
    run_fig3c,
    run_fig4,
    run_fig5_dephasing,
    run_fig5_diffusion,
    resolve_threads,
    run_scenario,
    write_csv,
    write_curve,
    write_sweep,
)
from .lindblad import METHODS, IntegratorConfig, default_grid, evolve
from .models import DiffusionSpec, PhysicalParams, build_model

log = logging.getLogger("cqed_readout")

COMMANDS = ("run", "sweep", "fig2", "fig3b", "fig3c", "fig4", "fig5-dephasing", "fig5-diffusion", "validate")

# config key -> PhysicalParams field
PARAM_KEYS = {
    "g_ghz": "g",
    "kappa_ghz": "kappa",
    "gamma_ghz": "gamma",
    "gamma_d_ghz": "gamma_d",
    "delta_z_ghz": "delta_z",
    "omega_c_ghz": "omega_c",
    "omega_a_ghz": "omega_a",
    "omega_laser_ghz": "omega_laser",
    "delta_omega_ghz": "delta_omega",
    "epsilon": "epsilon",
    "eta": "eta",
    "input_coupling": "input_coupling",
}
NON_NEGATIVE = {"g_ghz", "kappa_ghz", "gamma_d_ghz", "eta", "epsilon"}
GRID_KEYS = {"n_points", "t_switch", "t_end", "t_first", "n_geometric", "times"}
INTEGRATOR_KEYS = {"rel_tol", "abs_tol", "max_step", "method", "grid"}
DIFFUSION_KEYS = {"gamma_I_ghz", "n_nodes"}
SWEEP_KEYS = {"name", "values"}
TOP_KEYS = {"model", "n_fock", "params", "integrator", "diffusion", "sweep"}

# defaults each preset layers under the user's configuration
PRESETS = {
    "fig3b": {},
    "fig3c": {"model": "four_level"},
    "fig4": {"model": "four_level"},
    "fig5-dephasing": {"model": "four_level", "params": {"eta": 0.025}},
    "fig5-diffusion": {"model": "four_level", "params": {"eta": 0.025, "gamma_d_ghz": 0.0}},
}


def _number(value, key, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}", key)
    if not math.isfinite(value):
        raise ConfigError(f"{key}: number must be finite", key)
    if integer and int(value) != value:
        raise ConfigError(f"{key}: expected an integer, got {value!r}", key)
    return int(value) if integer else float(value)


def _check_keys(section, allowed, prefix):
    if not isinstance(section, dict):
        raise ConfigError(f"{prefix or 'config'}: expected an object", prefix)
    for key in section:
        if key not in allowed:
            path = f"{prefix}.{key}" if prefix else key
            raise ConfigError(f"unknown key {path!r}", path)


def _parse_params(raw):
    _check_keys(raw, set(PARAM_KEYS) | {"epsilon_auto"}, "params")
    kwargs = {}
    for key, value in raw.items():
        path = f"params.{key}"
        if key == "epsilon_auto":
            if not isinstance(value, bool):
                raise ConfigError(f"{path}: expected true/false", path)
            continue
        if key == "gamma_ghz":
            if not isinstance(value, list) or not value:
                raise ConfigError(f"{path}: expected a non-empty list of rates", path)
            rates = [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]
            for i, r in enumerate(rates):
                if r < 0:
                    raise ConfigError(f"{path}[{i}]: must be >= 0", f"{path}[{i}]")
            if len(rates) == 2:
                rates = rates * 2  # (gamma0, gamma1) also fills gamma2, gamma3
            kwargs["gamma"] = tuple(rates)
            continue
        if key == "epsilon" and value is None:
            continue
        number = _number(value, path)
        if key in NON_NEGATIVE and number < 0:
            raise ConfigError(f"{path}: must be >= 0, got {number}", path)
        if key == "eta" and number > 1:
            raise ConfigError(f"{path}: must lie in [0, 1], got {number}", path)
        if key == "input_coupling" and not 0 < number <= 1:
            raise ConfigError(f"{path}: must lie in (0, 1], got {number}", path)
        kwargs[PARAM_KEYS[key]] = number
    if raw.get("epsilon_auto") is True:
        if raw.get("epsilon") is not None:
            raise ConfigError("params.epsilon: conflicts with epsilon_auto=true", "params.epsilon")
        kwargs["epsilon"] = None
    try:
        return PhysicalParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"params: {exc}", "params") from exc


def _parse_integrator(raw):
    _check_keys(raw, INTEGRATOR_KEYS, "integrator")
    opts = {}
    for key in ("rel_tol", "abs_tol", "max_step"):
        if key in raw:
            v = _number(raw[key], f"integrator.{key}")
            if v <= 0:
                raise ConfigError(f"integrator.{key}: must be positive", f"integrator.{key}")
            opts[key] = v
    if "method" in raw:
        if raw["method"] not in METHODS:
            raise ConfigError(f"integrator.method: choose from {METHODS}", "integrator.method")
        opts["method"] = raw["method"]
    grid_raw = raw.get("grid", {})
    _check_keys(grid_raw, GRID_KEYS, "integrator.grid")
    if "times" in grid_raw:
        if len(grid_raw) > 1:
            raise ConfigError("integrator.grid.times: cannot combine with other grid keys", "integrator.grid")
        times = [_number(t, f"integrator.grid.times[{i}]") for i, t in enumerate(grid_raw["times"])]
        grid = np.asarray(times)
    else:
        kw = {}
        for key in ("t_switch", "t_end", "t_first"):
            if key in grid_raw:
                kw[key] = _number(grid_raw[key], f"integrator.grid.{key}")
        for key in ("n_points", "n_geometric"):
            if key in grid_raw:
                kw[key] = _number(grid_raw[key], f"integrator.grid.{key}", integer=True)
        try:
            grid = default_grid(**kw)
        except ValueError as exc:
            raise ConfigError(f"integrator.grid: {exc}", "integrator.grid") from exc
    try:
        return IntegratorConfig(grid, **opts)
    except ValueError as exc:
        raise ConfigError(f"integrator: {exc}", "integrator") from exc


def _parse_diffusion(raw):
    _check_keys(raw, DIFFUSION_KEYS, "diffusion")
    gi = _number(raw.get("gamma_I_ghz", 0.0), "diffusion.gamma_I_ghz")
    if gi < 0:
        raise ConfigError("diffusion.gamma_I_ghz: must be >= 0", "diffusion.gamma_I_ghz")
    n = _number(raw.get("n_nodes", 21), "diffusion.n_nodes", integer=True)
    if n < 3 or n % 2 == 0:
        raise ConfigError("diffusion.n_nodes: must be odd and >= 3", "diffusion.n_nodes")
    return DiffusionSpec(gamma_I=gi, n_nodes=n)


def _parse_sweep(raw):
    _check_keys(raw, SWEEP_KEYS, "sweep")
    name = raw.get("name")
    if name not in SWEEP_PARAMS:
        raise ConfigError(f"sweep.name: choose from {SWEEP_PARAMS}", "sweep.name")
    values = raw.get("values")
    if not isinstance(values, list) or not values:
        raise ConfigError("sweep.values: expected a non-empty list", "sweep.values")
    return name, tuple(_number(v, f"sweep.values[{i}]") for i, v in enumerate(values))


def _parse_override(text):
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value", text)
    key, raw = text.split("=", 1)
    key = key.strip()
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.split(".")
    if len(parts) == 1:
        # bare names resolve to params.<name> or a top-level key
        if key in PARAM_KEYS or key == "epsilon_auto":
            parts = ["params", key]
        elif key not in TOP_KEYS:
            raise ConfigError(f"unknown override key {key!r}", key)
    return parts, value


def apply_overrides(doc, overrides):
    doc = copy.deepcopy(doc)
    for text in overrides or ():
        parts, value = _parse_override(text)
        node = doc
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {text!r} descends into a non-object", ".".join(parts))
        node[parts[-1]] = value
    return doc


def merge(base, top):
    out = copy.deepcopy(base)
    for key, value in top.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_document(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return doc


def scenario_from_document(doc):
    _check_keys(doc, TOP_KEYS, "")
    model = doc.get("model", "three_level")
    if model not in SCENARIO_MODELS:
        raise ConfigError(f"model: choose from {SCENARIO_MODELS}", "model")
    n_fock = _number(doc.get("n_fock", DEFAULT_N_FOCK), "n_fock", integer=True)
    if n_fock < 2:
        raise ConfigError("n_fock: must be >= 2", "n_fock")
    params = _parse_params(doc.get("params", {}))
    grid = _parse_integrator(doc.get("integrator", {}))
    diffusion = _parse_diffusion(doc["diffusion"]) if "diffusion" in doc else None
    sweep = _parse_sweep(doc["sweep"]) if "sweep" in doc else None
    return Scenario(model=model, params=params, n_fock=n_fock, grid=grid, diffusion=diffusion, sweep=sweep)


def parse_config(path, overrides=(), base=None):
    """Load a JSON scenario, apply ``key=value`` overrides, fill defaults."""
    doc = merge(base or {}, load_document(path))
    return scenario_from_document(apply_overrides(doc, overrides))


def validate_scenario(scn):
    """Parse-level checks plus one short integrator step on the model."""
    if scn.model == "analytic":
        return
    system = build_model(scn.model, scn.params, scn.n_fock)
    cfg = IntegratorConfig([0.0, 1e-3], scn.grid.rel_tol, scn.grid.abs_tol, method="rk")
    evolve(system, system.layout.basis_state(0), cfg)


def build_parser():
    parser = argparse.ArgumentParser(prog="cqed-readout", description="Cavity-QED single-shot qubit readout simulator")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", "-c", help="JSON scenario file")
    parser.add_argument("--output-dir", "-o", default=".", help="directory for CSV output")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. params.eta=0.025 (repeatable)")
    parser.add_argument("--threads", default=None, help="worker count or 'auto' (env READOUT_SIM_THREADS)")
    parser.add_argument("--stamp", action="store_true", help="record a timestamp in CSV headers")
    parser.add_argument("--values", help="comma-separated sweep values for preset commands")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _values(text, default):
    if text is None:
        return default
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"--values: {exc}", "--values") from exc


def _preset_values(args, scn, name, default):
    """--values wins, then a matching sweep section, then the preset list."""
    if args.values is not None:
        return _values(args.values, default)
    if scn.sweep is not None:
        if scn.sweep[0] != name:
            raise ConfigError(f"sweep.name: {args.command} sweeps {name!r}, not {scn.sweep[0]!r}", "sweep.name")
        return scn.sweep[1]
    return default


def _dispatch(args, out):
    base = PRESETS.get(args.command, {})
    scn = parse_config(args.config, args.overrides, base=base)
    cfg_doc = scn.describe()
    written = []
    p, nf, grid = scn.params, scn.n_fock, scn.grid

    if args.command == "validate":
        validate_scenario(scn)
        print("OK")
        return written
    if args.command == "fig2":
        cs = _preset_values(args, scn, "cooperativity", FIG2_COOPERATIVITIES)
        rows = run_fig2(cs)
        written.append(write_csv(os.path.join(out, "fig2.csv"), FIG2_COLUMNS, rows,
                                 {"cooperativities": list(cs)}, stamp=args.stamp))
    elif args.command == "fig3b":
        for model in ("three_level", "four_level"):
            curve = run_fig3b(model, p, nf, grid)
            doc = dict(cfg_doc, model=model)
            written.append(write_curve(os.path.join(out, f"fig3b_{model}.csv"), curve, doc, args.stamp))
            log.info("%s: ps_opt=%.4f at T=%.1f ns", model, curve.ps_opt, curve.t_opt)
    elif args.command == "fig3c":
        res = run_fig3c(_preset_values(args, scn, "delta_z", FIG3C_DELTA_Z), p, nf, grid, args.threads)
        written.append(write_sweep(os.path.join(out, "fig3c.csv"), res, cfg_doc, args.stamp))
    elif args.command == "fig4":
        res = run_fig4(_preset_values(args, scn, "eta", FIG4_ETA), p, nf, grid)
        written.append(write_sweep(os.path.join(out, "fig4.csv"), res, cfg_doc, args.stamp))
    elif args.command == "fig5-dephasing":
        res = run_fig5_dephasing(_preset_values(args, scn, "gamma_d", FIG5_GAMMA_D), p, nf, grid, args.threads)
        written.append(write_sweep(os.path.join(out, "fig5_dephasing.csv"), res, cfg_doc, args.stamp))
    elif args.command == "fig5-diffusion":
        spec = scn.diffusion or DiffusionSpec()
        res = run_fig5_diffusion(_preset_values(args, scn, "gamma_I", FIG5_GAMMA_I), p, spec, nf, grid, args.threads)
        written.append(write_sweep(os.path.join(out, "fig5_diffusion.csv"), res, cfg_doc, args.stamp))
        written.append(write_csv(os.path.join(out, "fig5_diffusion_nodes.csv"), NODE_COLUMNS, res.nodes,
                                 cfg_doc, stamp=args.stamp))
    elif args.command == "run":
        if scn.sweep is not None:
            raise ConfigError("'run' takes no sweep section; use 'sweep'", "sweep")
        curve = run_scenario(scn, args.threads)
        written.append(write_curve(os.path.join(out, f"run_{scn.model}.csv"), curve, cfg_doc, args.stamp))
    elif args.command == "sweep":
        if scn.sweep is None:
            raise ConfigError("'sweep' needs a sweep section", "sweep")
        res = run_scenario(scn, args.threads)
        written.append(write_sweep(os.path.join(out, f"sweep_{scn.sweep[0]}.csv"), res, cfg_doc, args.stamp))
    return written


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    started = time.perf_counter()
    try:
        if args.threads is not None:
            resolve_threads(args.threads)
        written = _dispatch(args, args.output_dir)
    except (ConfigError, ZeroDivisionError) as exc:
        print(f"ERROR: config: {exc}", file=sys.stderr)
        return 1
    except (IntegrationError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"ERROR: numerical: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:  # parameter checks inside the models
        print(f"ERROR: config: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    print(f"done in {time.perf_counter() - started:.1f} s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
