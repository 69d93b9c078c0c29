"""Quadratic-stream benchmark (all baselines and DA) for n = 2 and n = 3."""
import argparse
from pathlib import Path

from metricda.cli import write_bench, write_json
from metricda.experiments import BenchConfig, run_bench


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", type=int, default=10_000)
    ap.add_argument("--reps", type=int, default=100)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="results/table2")
    args = ap.parse_args()
    for n in (2, 3):
        cfg = BenchConfig(stream=f"quad:n={n}", T=args.T, reps=args.reps).validate()
        out = Path(args.out) / f"n{n}"
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "manifest.json", {"command": "bench", "config": vars(cfg)})
        res = run_bench(cfg, args.threads)
        write_bench(out, res)
        print(f"n={n}")
        for alg, e in res["summary"]["algorithms"].items():
            ref = e.get("reference_simulation")
            print(f"  {alg:12s} slope {e['slope']:+.3f}  bound slope {e['slope_bound']:+.3f}  reference {ref}")


if __name__ == "__main__":
    main()
