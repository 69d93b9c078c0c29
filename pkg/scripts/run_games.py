"""Both-DA play of the three built-in games with histograms, regret and CDF distances."""
import argparse
from pathlib import Path

from metricda.cli import write_game, write_json
from metricda.experiments import GameConfig, run_game

HORIZON = {"g1": 100_000, "g2": 100_000, "g3": 7_500}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("games", nargs="*", default=list(HORIZON))
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--scale", type=float, default=1.0, help="multiply every horizon")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="results/games")
    args = ap.parse_args()
    for name in args.games:
        T = max(10, int(HORIZON[name] * args.scale))
        cfg = GameConfig(game=name, T=T, reps=args.reps).validate()
        out = Path(args.out) / name
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "manifest.json", {"command": "game", "config": vars(cfg)})
        res = run_game(cfg, args.threads)
        write_game(out, res)
        s = res["summary"]
        print(f"{name}: average payoff {s['average_payoff_final']:.4f} (value {s['value']}), "
              f"regret/t {s['regret1_final']:.4g} / {s['regret2_final']:.4g}")
        if "alphabar_final" in s:
            print(f"  time-averaged alpha {s['alphabar_final']}")


if __name__ == "__main__":
    main()
