"""Command-line driver: ``metricda {bench,game,lowerbound,selfcheck}``.

Every run writes ``manifest.json`` (the validated config), data CSVs and
``summary.json`` into ``--out``. CSV files start with a ``# metricda-csv v1``
comment, then a header row; floats carry 17 significant digits so reruns
with equal manifests produce identical bytes.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .experiments import (
    BenchConfig,
    GameConfig,
    LowerBoundConfig,
    SelfCheckConfig,
    config_from_dict,
    run_bench,
    run_game,
    run_lowerbound,
    run_selfcheck,
)

CSV_SCHEMA = "metricda-csv v1"
COMMANDS = {
    "bench": BenchConfig,
    "game": GameConfig,
    "lowerbound": LowerBoundConfig,
    "selfcheck": SelfCheckConfig,
}


# -- serialization --------------------------------------------------------------------

def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, columns: list[str], data: list) -> None:
    """Write equal-length columns ``data`` under a versioned header."""
    cols = [np.asarray(c).ravel() for c in data]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError("columns differ in length")
    lines = [f"# {CSV_SCHEMA}", ",".join(columns)]
    lines += [",".join(_cell(c[i]) for c in cols) for i in range(n)]
    path.write_text("\n".join(lines) + "\n")


def read_csv(path) -> dict[str, np.ndarray]:
    """Inverse of :func:`write_csv` (columns as float arrays)."""
    text = Path(path).read_text().splitlines()
    if not text or text[0] != f"# {CSV_SCHEMA}":
        raise ValueError(f"{path}: missing '# {CSV_SCHEMA}' header")
    cols = text[1].split(",")
    rows = [list(map(float, line.split(","))) for line in text[2:] if line]
    arr = np.array(rows, dtype=float).reshape(len(rows), len(cols))
    return {c: arr[:, i] for i, c in enumerate(cols)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if not math.isfinite(float(obj)) else float(obj)
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")


def _tag(selector: str) -> str:
    return selector.replace(":", "_")


def _band(x: np.ndarray):
    return x.mean(axis=1), np.quantile(x, 0.1, axis=1), np.quantile(x, 0.9, axis=1)


# -- writers ---------------------------------------------------------------------------

def write_bench(out: Path, res: dict) -> None:
    t = res["t"]
    for alg, series in res["series"].items():
        mean, q10, q90 = _band(series)
        bound = np.nanmean(res["bound"][alg], axis=1) if np.isfinite(res["bound"][alg]).any() else np.full(t.size, np.nan)
        write_csv(out / f"series_{_tag(alg)}.csv", ["t", "mean", "q10", "q90", "bound"], [t, mean, q10, q90, bound])
    write_json(out / "summary.json", res["summary"])


def write_game(out: Path, res: dict) -> None:
    t = res["t"]
    value = res["summary"]["value"]
    mean, q10, q90 = _band(res["payoff"])
    gap = np.abs(mean - value) if value is not None else np.full(t.size, np.nan)
    write_csv(out / "series_payoff.csv", ["t", "mean", "q10", "q90", "value_gap"], [t, mean, q10, q90, gap])
    for p in (1, 2):
        mean, q10, q90 = _band(res[f"regret{p}"])
        write_csv(out / f"series_regret_{p}.csv", ["t", "mean", "q10", "q90", "bound"],
                  [t, mean, q10, q90, res[f"bound{p}"]])
        if f"cdf{p}" in res:
            tc, ks = res[f"cdf{p}"]
            write_csv(out / f"cdf_{p}.csv", ["t", "mean", "q10", "q90"], [tc, *_band(ks)])
        edges = res[f"edges{p}"]
        for s, dens in res[f"hist{p}"].items():
            if len(edges) == 1:
                e = edges[0]
                cols, data = ["bin_left", "bin_right", "density"], [e[:-1], e[1:], dens]
            else:
                ex, ey = edges
                ix, iy = np.meshgrid(np.arange(ex.size - 1), np.arange(ey.size - 1), indexing="ij")
                ix, iy = ix.ravel(), iy.ravel()
                cols = ["x_left", "x_right", "y_left", "y_right", "density"]
                data = [ex[ix], ex[ix + 1], ey[iy], ey[iy + 1], dens.ravel()]
            write_csv(out / f"hist_{p}_{s}.csv", cols, data)
    if "alpha" in res:
        a = res["alpha"].mean(axis=1)
        ab = res["alphabar"].mean(axis=1)
        write_csv(out / "alpha_trace.csv", ["t", "alpha1", "alpha2", "alphabar1", "alphabar2"],
                  [t, a[:, 0], a[:, 1], ab[:, 0], ab[:, 1]])
    write_json(out / "summary.json", res["summary"])


def write_lowerbound(out: Path, res: dict) -> None:
    write_csv(out / "series_lowerbound.csv", ["t", "mean", "se", "mean_realized", "bound", "dominates"],
              [res["t"], res["mean"], res["se"], res["realized"].mean(axis=1), res["bound"], res["dominates"]])
    write_json(out / "summary.json", res["summary"])


# -- entry point ------------------------------------------------------------------------

def _threads(value) -> int:
    raw = value if value is not None else os.environ.get("CR_THREADS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"threads: expected a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"threads: expected a positive integer, got {n}")
    return n


def _load(command: str, args) -> object:
    data: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise ConfigError(f"--config: no such file {args.config!r}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--config: invalid JSON ({exc.msg} at line {exc.lineno})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{command}: expected a JSON object at the top level")
    if args.seed is not None:
        data["seed"] = args.seed
    if getattr(args, "reps", None) is not None:
        data["reps"] = args.reps
    if getattr(args, "T", None) is not None:
        data["T"] = args.T
    if getattr(args, "quick", False):
        data["quick"] = True
    return config_from_dict(COMMANDS[command], data, command)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metricda", description="Dual averaging experiments on metric spaces.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "bench": "regret of several algorithms on one reward stream",
        "game": "repeated play of a built-in zero-sum game",
        "lowerbound": "mean regret against the random-sign lower bound",
        "selfcheck": "invariant audits with a pass/fail report",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="JSON file with config fields")
        p.add_argument("--seed", type=int, help="master seed")
        if name != "selfcheck":
            p.add_argument("--reps", type=int, help="number of repetitions")
            p.add_argument("--T", type=int, help="number of rounds")
            p.add_argument("--threads", type=int, help="worker threads (default: $CR_THREADS or 1)")
        else:
            p.add_argument("--quick", action="store_true", help="smaller sample sizes")
        p.add_argument("--out", default=None, help=f"output directory (default: results/{name})")
        p.add_argument("--print-defaults", action="store_true", help="print the default config and exit")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cmd = args.command
    if args.print_defaults:
        print(json.dumps(asdict(COMMANDS[cmd]()), indent=2))
        return 0
    try:
        cfg = _load(cmd, args)
        threads = _threads(getattr(args, "threads", None))
    except ConfigError as exc:
        print(f"metricda {cmd}: config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out or f"results/{cmd}")
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "manifest.json", {"command": cmd, "config": asdict(cfg), "csv_schema": CSV_SCHEMA})
    if cmd == "bench":
        write_bench(out, run_bench(cfg, threads))
    elif cmd == "game":
        write_game(out, run_game(cfg, threads))
    elif cmd == "lowerbound":
        write_lowerbound(out, run_lowerbound(cfg, threads))
    else:
        results = run_selfcheck(cfg)
        for r in results:
            print(json.dumps(_jsonable(r.as_dict()), sort_keys=True))
        write_json(out / "report.json", [r.as_dict() for r in results])
        failed = [r.name for r in results if not r.passed]
        print(f"selfcheck: {len(results) - len(failed)}/{len(results)} passed", file=sys.stderr)
        return 1 if failed else 0
    print(f"wrote {out}", file=sys.stderr)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
