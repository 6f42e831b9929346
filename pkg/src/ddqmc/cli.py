"""Batch front-end: config parsing, run orchestration, CSV/JSON output.

Subcommands:
  run             one simulation, streaming time-series CSV + summary JSON
  sweep           repeat a run over a list of transverse couplings
  susceptibility  the 3+3+1 applied-field protocol
  exact           dense reference solution (small systems)
  extrapolate     runs over several initiator thresholds, fitted to zero

All physical quantities in the config are in units of the loss rate.
Exit codes: 0 success, 2 config error, 3 simulation died, 4 population
explosion or too-large time step.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import estimators, oracle
from .engine import (EngineParams, PopulationExplosion, SimulationDied,
                     TimeStepTooLarge, run)
from .lattice import ModelParams, build_lattice


class ConfigError(Exception):
    pass


_MISSING = object()


def _get(section, key, kinds, default=_MISSING, where=""):
    if key not in section:
        if default is _MISSING:
            raise ConfigError(f"missing required field {where}{key}")
        return default
    val = section[key]
    if kinds is bool:
        if not isinstance(val, bool):
            raise ConfigError(f"field {where}{key} must be a boolean")
        return val
    if kinds is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"field {where}{key} must be an integer")
        return val
    if kinds is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"field {where}{key} must be a number")
        return float(val)
    raise AssertionError(kinds)


def load_config(path):
    try:
        with open(path) as f:
            cfg = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def parse_lattice(cfg):
    sec = cfg.get("lattice")
    if not isinstance(sec, dict):
        raise ConfigError("missing required section lattice")
    try:
        return build_lattice(
            rows=_get(sec, "rows", int, where="lattice."),
            cols=_get(sec, "cols", int, where="lattice."),
            periodic=_get(sec, "periodic", bool, True, where="lattice."),
            dedupe_bonds=_get(sec, "dedupe_bonds", bool, False, where="lattice."),
        )
    except ValueError as e:
        raise ConfigError(f"lattice: {e}")


def parse_model(cfg):
    sec = cfg.get("model")
    if not isinstance(sec, dict):
        raise ConfigError("missing required section model")
    try:
        return ModelParams(
            Jx=_get(sec, "Jx", float, where="model."),
            Jy=_get(sec, "Jy", float, where="model."),
            Jz=_get(sec, "Jz", float, where="model."),
            gamma=_get(sec, "gamma", float, 1.0, where="model."),
            h=_get(sec, "h", float, 0.0, where="model."),
            theta=_get(sec, "theta", float, 0.0, where="model."),
        )
    except ValueError as e:
        raise ConfigError(f"model: {e}")


def parse_engine(cfg, seed_override=None):
    sec = cfg.get("engine")
    if not isinstance(sec, dict):
        raise ConfigError("missing required section engine")
    kw = dict(
        dt=_get(sec, "dt", float, where="engine."),
        target_population=_get(sec, "target_population", float, where="engine."),
        delta=_get(sec, "delta", float, 0.05, where="engine."),
        shift_update_interval=_get(sec, "shift_update_interval", int, 10, where="engine."),
        s_init=_get(sec, "S_init", float, -0.5, where="engine."),
        i_limit=_get(sec, "I_limit", float, 0.0, where="engine."),
        importance_p=_get(sec, "importance_p", float, 0.0, where="engine."),
        equilibration_steps=_get(sec, "equilibration_steps", int, 0, where="engine."),
        measurement_steps=_get(sec, "measurement_steps", int, 0, where="engine."),
        seed=_get(sec, "seed", int, 1, where="engine."),
        n0=_get(sec, "n0", int, 1000, where="engine."),
        hard_cap=_get(sec, "hard_cap", float, 1e8, where="engine."),
        nw_mode=sec.get("nw_mode", "abs"),
        shards=_get(sec, "shards", int, 1, where="engine."),
    )
    if "max_growth_steps" in sec:
        kw["max_growth_steps"] = _get(sec, "max_growth_steps", int, where="engine.")
    if not isinstance(kw["nw_mode"], str):
        raise ConfigError("field engine.nw_mode must be a string")
    if seed_override is not None:
        kw["seed"] = seed_override
    try:
        return EngineParams(**kw)
    except ValueError as e:
        raise ConfigError(f"engine: {e}")


def parse_observables(cfg):
    names = cfg.get("observables", ["mz"])
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise ConfigError("field observables must be a list of strings")
    try:
        return estimators.build_observables(names)
    except ValueError as e:
        raise ConfigError(str(e))


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


class CsvWriter:
    """Streams one row per step; every row is flushed so a killed run
    leaves a parseable prefix."""

    def __init__(self, path, obs_names):
        self.f = open(path, "w")
        cols = ["step", "time", "shift", "n_diag", "n_total"]
        for n in obs_names:
            cols += [f"{n}_num_re", f"{n}_num_im", f"{n}_den"]
        self.f.write(",".join(cols) + "\n")
        self.f.flush()

    def __call__(self, step, t, shift, n_diag, n_total, obs_row):
        parts = [str(step), repr(float(t)), repr(float(shift)), str(n_diag), str(n_total)]
        for r, i, d in obs_row.values():
            parts += [repr(float(r)), repr(float(i)), repr(float(d))]
        self.f.write(",".join(parts) + "\n")
        self.f.flush()

    def close(self):
        self.f.close()


def _estimates(result):
    out = {}
    if result.step.size - result.measure_start >= 64:
        for name in result.observable_names:
            est = estimators.ratio_estimate(result, name)
            out[name] = {
                "value": est.value,
                "error": est.error,
                "value_im": est.value_im,
                "n_samples": est.n_samples,
            }
    return out


def _summary(result, runtime):
    n = result.step.size
    last_half = result.shift[n // 2:]
    body = {
        "model": dataclasses.asdict(result.model),
        "lattice": {"rows": result.lattice.rows, "cols": result.lattice.cols,
                    "periodic": result.lattice.periodic,
                    "nsites": result.lattice.nsites},
        "engine": dataclasses.asdict(result.params),
        "growth_steps": result.growth_steps,
        "total_steps": int(n),
        "measurement_steps_recorded": int(n - result.measure_start),
        "mean_shift_measurement": result.mean_shift(),
        "mean_shift_last_half": float(last_half.mean()) if last_half.size else None,
        "mean_occupied": result.mean_occupied(),
        "final": {
            "n_total": int(result.n_total[-1]) if n else None,
            "n_diag": int(result.n_diag[-1]) if n else None,
            "occupied": int(result.n_occupied[-1]) if n else None,
        },
        "estimates": _estimates(result),
        "runtime_seconds": runtime,
    }
    return body


def _write_json(path, payload):
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def cmd_run(cfg, out_dir, seed_override, threads):
    lattice = parse_lattice(cfg)
    model = parse_model(cfg)
    params = parse_engine(cfg, seed_override)
    obs = parse_observables(cfg)
    writer = CsvWriter(out_dir / "run.csv", [n for n, _ in obs])
    t0 = time.perf_counter()
    try:
        result = run(model, lattice, params, observables=obs, on_record=writer)
    finally:
        writer.close()
    summary = _summary(result, time.perf_counter() - t0)
    _write_json(out_dir / "summary.json", summary)
    return 0


def cmd_sweep(cfg, out_dir, seed_override, threads):
    lattice = parse_lattice(cfg)
    model = parse_model(cfg)
    params = parse_engine(cfg, seed_override)
    obs = parse_observables(cfg)
    names = [n for n, _ in obs]
    values = cfg.get("sweep", {}).get("Jy", [])
    if not isinstance(values, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
    ):
        raise ConfigError("field sweep.Jy must be a list of numbers")

    def job(idx_v):
        idx, v = idx_v
        mdl = dataclasses.replace(model, Jy=float(v))
        prm = dataclasses.replace(params, seed=params.seed + idx)
        t0 = time.perf_counter()
        res = run(mdl, lattice, prm, observables=obs)
        return idx, _summary(res, time.perf_counter() - t0)

    rows = [None] * len(values)
    if values:
        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            for idx, summ in pool.map(job, enumerate(values)):
                rows[idx] = summ

    with open(out_dir / "sweep.csv", "w") as f:
        cols = ["Jy"]
        for n in names:
            cols += [n, f"{n}_err"]
        cols += ["mean_shift", "growth_steps"]
        f.write(",".join(cols) + "\n")
        for v, summ in zip(values, rows):
            est = summ["estimates"]
            parts = [repr(float(v))]
            for n in names:
                if n in est:
                    parts += [repr(est[n]["value"]), repr(est[n]["error"])]
                else:
                    parts += ["", ""]
            parts += [repr(summ["mean_shift_measurement"]), str(summ["growth_steps"])]
            f.write(",".join(parts) + "\n")
    _write_json(out_dir / "sweep.json", {"Jy": values, "runs": rows})
    return 0


def cmd_susceptibility(cfg, out_dir, seed_override, threads):
    lattice = parse_lattice(cfg)
    model = parse_model(cfg)
    params = parse_engine(cfg, seed_override)
    sec = cfg.get("susceptibility", {})
    fields = sec.get("fields", [0.05, 0.10, 0.15])
    if not isinstance(fields, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in fields
    ):
        raise ConfigError("field susceptibility.fields must be a list of numbers")
    n_boot = _get(sec, "bootstrap_samples", int, 4000, where="susceptibility.")
    try:
        result = estimators.susceptibility(
            model, lattice, params, fields=tuple(fields),
            n_bootstrap=n_boot, n_threads=max(1, threads),
        )
    except ValueError as e:
        raise ConfigError(f"susceptibility: {e}")
    _write_json(out_dir / "susceptibility.json", result.to_dict())
    return 0


def cmd_exact(cfg, out_dir, seed_override, threads):
    lattice = parse_lattice(cfg)
    model = parse_model(cfg)
    if lattice.nsites > oracle.MAX_ORACLE_SITES:
        raise ConfigError(
            f"exact solver capped at {oracle.MAX_ORACLE_SITES} sites; "
            f"got {lattice.nsites}"
        )
    record = oracle.golden_record(model, lattice)
    _write_json(out_dir / "exact.json", record)
    return 0


def cmd_extrapolate(cfg, out_dir, seed_override, threads):
    lattice = parse_lattice(cfg)
    model = parse_model(cfg)
    params = parse_engine(cfg, seed_override)
    sec = cfg.get("extrapolate", {})
    limits = sec.get("I_limit", [])
    if not isinstance(limits, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in limits
    ):
        raise ConfigError("field extrapolate.I_limit must be a list of numbers")
    obs_name = sec.get("observable", "mz")
    if obs_name not in estimators.OBSERVABLES:
        raise ConfigError(f"extrapolate.observable: unknown observable {obs_name!r}")
    if len(limits) == 1 and float(limits[0]) != 0.0:
        raise ConfigError("extrapolation needs at least two initiator thresholds "
                          "(a single value is only allowed when it is 0)")
    if not limits:
        raise ConfigError("field extrapolate.I_limit must not be empty")
    obs = estimators.build_observables([obs_name])

    def job(idx_v):
        idx, v = idx_v
        prm = dataclasses.replace(params, i_limit=float(v), seed=params.seed + idx)
        res = run(model, lattice, prm, observables=obs)
        est = estimators.ratio_estimate(res, obs_name)
        return idx, {"I_limit": float(v), "value": est.value, "error": est.error,
                     "mean_shift": res.mean_shift()}

    points = [None] * len(limits)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for idx, row in pool.map(job, enumerate(limits)):
            points[idx] = row

    if len(points) == 1:
        intercept, err = points[0]["value"], points[0]["error"]
        fitted = points
    else:
        fitted = sorted(points, key=lambda r: r["I_limit"])[:3]
        intercept, err = estimators.initiator_extrapolate(
            [(r["I_limit"], r["value"], r["error"]) for r in fitted]
        )
    payload = {
        "observable": obs_name,
        "points": points,
        "fitted_points": [r["I_limit"] for r in fitted],
        "intercept": intercept,
        "intercept_error": err,
    }
    _write_json(out_dir / "extrapolate.json", payload)
    return 0


_COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "susceptibility": cmd_susceptibility,
    "exact": cmd_exact,
    "extrapolate": cmd_extrapolate,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="ddqmc",
        description="Stochastic steady-state solver for driven-dissipative "
                    "spin-1/2 lattices.",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="path to a JSON config")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override engine.seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="parallel jobs for sweep-style commands")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, out_dir, args.seed, args.threads)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except SimulationDied as e:
        print(f"simulation died: {e}", file=sys.stderr)
        return 3
    except (PopulationExplosion, TimeStepTooLarge) as e:
        print(f"aborted: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
