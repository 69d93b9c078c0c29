"""Alternating-affine stream: greedy failure and DA rates for several potentials."""
import argparse
from pathlib import Path

from metricda.cli import write_bench, write_json
from metricda.experiments import BenchConfig, run_bench

ALGS = ["greedy", "da:exp", "da:rho:1.01", "da:rho:1.05", "da:rho:1.5", "da:rho:1.75"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", type=int, default=100_000)
    ap.add_argument("--reps", type=int, default=50)
    ap.add_argument("--L", type=float, default=5.0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="results/altaffine")
    args = ap.parse_args()
    cfg = BenchConfig(stream=f"altaffine:L={args.L}", algorithms=ALGS, T=args.T, reps=args.reps,
                      fit_window=[args.T / 100, args.T], chunk=args.reps).validate()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "manifest.json", {"command": "bench", "config": vars(cfg)})
    res = run_bench(cfg, args.threads)
    write_bench(out, res)
    for alg, e in res["summary"]["algorithms"].items():
        print(f"{alg:12s} final R/t {e['final_mean']:.4f}  slope {e['slope']:+.3f}  "
              f"violations {e.get('bound_violations', '-')}")


if __name__ == "__main__":
    main()
