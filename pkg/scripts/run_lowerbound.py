"""Mean regret of DA against random-sign rewards next to the sqrt(t) lower bound."""
import argparse
from pathlib import Path

from metricda.cli import write_json, write_lowerbound
from metricda.experiments import LowerBoundConfig, run_lowerbound


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", type=int, default=1024)
    ap.add_argument("--reps", type=int, default=1000)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="results/lowerbound")
    args = ap.parse_args()
    for stream in ("rademacher:alpha=1", "rademacher:alpha=0.5"):
        cfg = LowerBoundConfig(stream=stream, T=args.T, reps=args.reps).validate()
        out = Path(args.out) / stream.replace(":", "_").replace("=", "")
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "manifest.json", {"command": "lowerbound", "config": vars(cfg)})
        res = run_lowerbound(cfg, args.threads)
        write_lowerbound(out, res)
        s = res["summary"]
        print(f"{stream}: mean R_T {s['mean_regret_final']:.3f} +- {s['se_final']:.3f}, "
              f"bound {s['bound_final']:.3f}, dominates {s['dominates_all']}")


if __name__ == "__main__":
    main()
