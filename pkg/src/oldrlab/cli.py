"""Command line driver: run, sweep, verify and golden generation."""

from __future__ import annotations

import argparse
import copy
import itertools
import json
import logging
import math
import os
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from oldrlab.config import (
    PRESETS,
    SCENARIOS,
    ConfigError,
    ExperimentConfig,
    apply_overrides,
    config_from_dict,
    dump_config,
    load_config,
)
from oldrlab.diagnostics import read_series_csv, write_series_csv
from oldrlab.io import canonical_json, config_hash, write_snapshot

log = logging.getLogger("oldrlab")

EXIT_OK, EXIT_ERROR, EXIT_BLOWUP = 0, 1, 2


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def build_config(scenario: str, path=None, seed=None, overrides=()) -> ExperimentConfig:
    """Preset for the scenario, then the config file, then --seed and --override."""
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")
    d = _merge(PRESETS[scenario], {"scenario": scenario})
    if path is not None:
        user = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(user, dict):
            raise ConfigError("config file must hold a mapping")
        if user.get("scenario", scenario) != scenario:
            raise ConfigError(f"config is for scenario {user['scenario']!r}, not {scenario!r}")
        d = _merge(d, user)
    cfg = config_from_dict(d)
    if seed is not None:
        cfg.seed = int(seed)
    return apply_overrides(cfg, list(overrides)) if overrides else cfg


def run_scenario(cfg: ExperimentConfig, out_dir) -> tuple[int, dict]:
    """Run one scenario, writing series.csv, summary.json, config.yaml and snapshots."""
    from oldrlab.scenarios import REGISTRY

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.yaml")
    t0 = time.perf_counter()
    summary = {"scenario": cfg.scenario, "config_hash": config_hash(cfg.hashable()), "version": cfg.version}
    try:
        res = REGISTRY[cfg.scenario](cfg)
    except Exception as exc:  # recorded, never swallowed silently
        summary.update(status="error", error=f"{type(exc).__name__}: {exc}", traceback=traceback.format_exc())
        summary["wall_clock"] = time.perf_counter() - t0
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
        log.error("scenario %s failed: %s", cfg.scenario, exc)
        return EXIT_ERROR, summary
    summary.update(status=res.status, **res.summary)
    write_series_csv(out / "series.csv", res.records, res.extra_columns, comment=f"scenario={cfg.scenario}")
    for name, (dim, n, fields) in res.snapshots.items():
        write_snapshot(out / f"{name}.oldr", dim, n, fields)
    summary["wall_clock"] = time.perf_counter() - t0
    (out / "summary.json").write_text(json.dumps(_clean(summary), indent=2, sort_keys=True))
    code = EXIT_BLOWUP if res.status == "blowup_flag" else EXIT_OK
    return code, summary


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


# ------------------------------------------------------------------- sweep


def _cell(args):
    scenario, d, out = args
    os.environ.setdefault("OLDRLAB_THREADS", "1")
    try:
        if "__invalid__" in d:
            raise ConfigError(d["__invalid__"])
        cfg = config_from_dict(d)
        code, summary = run_scenario(cfg, out)
    except Exception as exc:
        return {"status": "error", "error": f"{type(exc).__name__}: {exc}", "exit_code": EXIT_ERROR}
    s = {"status": summary.get("status"), "exit_code": code}
    for k, v in (summary.get("fitted") or {}).items():
        if isinstance(v, (int, float)):
            s[k] = v
    return s


def expand_grid(grid: dict) -> list[dict]:
    keys = list(grid)
    values = [grid[k] if isinstance(grid[k], list) else [grid[k]] for k in keys]
    return [dict(zip(keys, combo)) for combo in itertools.product(*values)]


def sweep(template: ExperimentConfig, grid: dict, out_dir, workers: int | None = None) -> list[dict]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = expand_grid(grid)
    jobs = []
    for i, cell in enumerate(cells):
        overrides = [f"{k}={yaml.safe_dump(v, default_flow_style=True).strip().removesuffix('...').strip()}" for k, v in cell.items()]
        d = template.to_dict()
        try:
            d = apply_overrides(template, overrides).to_dict()
        except ConfigError as exc:
            d = {"__invalid__": str(exc)}
        jobs.append((template.scenario, d, str(out / f"cell_{i:03d}")))
    workers = workers or max(1, int(os.environ.get("OLDRLAB_THREADS", "1")))
    if workers == 1:
        results = [_cell(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_cell, jobs))
    rows = [dict(cell=i, **cells[i], **r) for i, r in enumerate(results)]
    cols = []
    for r in rows:
        cols += [c for c in r if c not in cols]
    with open(out / "sweep.csv", "w") as fh:
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join(str(r.get(c, "")) for c in cols) + "\n")
    return rows


# ------------------------------------------------------------------ verify

DEFAULT_RTOL = 1e-6
DEFAULT_ATOL = 1e-10


def compare_series(golden: dict, fresh: dict, tolerances: dict | None = None) -> list[str]:
    """Column report of differences beyond tolerance (rtol/atol, overridable per column)."""
    tolerances = tolerances or {}
    problems = []
    for col, g in golden.items():
        if col not in fresh:
            problems.append(f"{col}: missing")
            continue
        f = fresh[col]
        if f.shape != g.shape:
            problems.append(f"{col}: length {f.shape[0]} != {g.shape[0]}")
            continue
        rtol = tolerances.get(f"{col}.rtol", tolerances.get("rtol", DEFAULT_RTOL))
        atol = tolerances.get(f"{col}.atol", tolerances.get("atol", DEFAULT_ATOL))
        both_nan = np.isnan(g) & np.isnan(f)
        ok = both_nan | np.isclose(f, g, rtol=rtol, atol=atol)
        if not ok.all():
            i = int(np.argmin(ok))
            problems.append(f"{col}: row {i} golden={float(g[i])!r} fresh={float(f[i])!r}")
    return problems


def verify(golden_dir, out_dir) -> tuple[bool, dict]:
    golden = Path(golden_dir)
    out = Path(out_dir)
    report = {}
    if not golden.is_dir():
        return False, {"status": "missing", "detail": f"golden directory {golden} not found"}
    cases = sorted(p for p in golden.iterdir() if p.is_dir())
    if not cases:
        return False, {"status": "missing", "detail": "no golden cases"}
    all_ok = True
    for case in cases:
        entry = {}
        need = [case / "config.yaml", case / "summary.json", case / "series.csv"]
        if not all(p.exists() for p in need):
            report[case.name] = {"status": "missing", "detail": "incomplete golden case"}
            all_ok = False
            continue
        cfg = load_config(case / "config.yaml")
        _, fresh = run_scenario(cfg, out / case.name)
        gold = json.loads((case / "summary.json").read_text())
        entry["invariants"] = canonical_json(gold.get("invariants")) == canonical_json(fresh.get("invariants"))
        entry["status_match"] = gold.get("status") == fresh.get("status")
        entry["series"] = compare_series(read_series_csv(case / "series.csv"), read_series_csv(out / case.name / "series.csv"), cfg.tolerances)
        ok = entry["invariants"] and entry["status_match"] and not entry["series"]
        entry["status"] = "pass" if ok else "fail"
        all_ok &= ok
        report[case.name] = entry
    (out / "verify_report.json").parent.mkdir(parents=True, exist_ok=True)
    (out / "verify_report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    return all_ok, report


GOLDEN_SET = ("equilibrium2d", "relaxationless-det", "cone-invariance", "calderon-monitor")


def make_goldens(out_dir, scenarios=GOLDEN_SET):
    for sc in scenarios:
        cfg = build_config(sc)
        run_scenario(cfg, Path(out_dir) / sc)


# -------------------------------------------------------------------- main


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oldrlab", description="Oldroyd-B stress experiments on the periodic domain")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("scenario", choices=SCENARIOS)
    r.add_argument("--config")
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    s = sub.add_parser("sweep", help="run a parameter grid")
    s.add_argument("--config", required=True)
    s.add_argument("--grid", required=True)
    s.add_argument("--out", required=True)
    v = sub.add_parser("verify", help="rerun golden cases and compare")
    v.add_argument("--golden", required=True)
    v.add_argument("--out", required=True)
    g = sub.add_parser("make-goldens", help="generate golden cases from the pinned presets")
    g.add_argument("--out", required=True)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            cfg = build_config(args.scenario, args.config, args.seed, args.override)
            code, summary = run_scenario(cfg, args.out)
            print(f"{cfg.scenario}: {summary.get('status')} -> {args.out}")
            return code
        if args.command == "sweep":
            data = yaml.safe_load(Path(args.config).read_text()) or {}
            template = build_config(data.get("scenario", "equilibrium2d"), args.config)
            grid = yaml.safe_load(Path(args.grid).read_text()) or {}
            rows = sweep(template, grid, args.out)
            bad = sum(r.get("status") == "error" for r in rows)
            print(f"sweep: {len(rows)} cells, {bad} errors -> {args.out}")
            return EXIT_ERROR if bad else EXIT_OK
        if args.command == "verify":
            ok, report = verify(args.golden, args.out)
            for name, e in report.items():
                print(f"{name}: {e.get('status') if isinstance(e, dict) else e}")
            return EXIT_OK if ok else EXIT_ERROR
        if args.command == "make-goldens":
            make_goldens(args.out)
            return EXIT_OK
    except (ConfigError, OSError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
