"""Configurable experiment runners: benchmarks, games, lower bound, self-check.

Each runner takes a dataclass config, processes repetitions in fixed chunks
(optionally on a thread pool) and returns plain arrays. Results depend only on
the config: every repetition draws from its own seeded stream and chunk
boundaries do not depend on the number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Any, Callable

import numpy as np

from . import checks
from .adversaries import RewardStream, parse_stream
from .baselines import DALearner, Learner, make_learner
from .domains import Hypercube, Interval, LShape
from .errors import ConfigError
from .games import GAMES, builtin_game, cdf_distance, histogram_l1, run_repeated_game
from .regret import (
    RegretLedger,
    bound_entropy,
    bound_ewoo,
    bound_fdiv_scan,
    bound_ftal,
    bound_gp,
    bound_lower,
    bound_ogd,
    fit_rate,
    log_checkpoints,
    reward_sup_norm,
)
from .seeding import rep_rngs

__all__ = [
    "BenchConfig",
    "GameConfig",
    "LowerBoundConfig",
    "SelfCheckConfig",
    "config_from_dict",
    "run_bench",
    "run_game",
    "run_lowerbound",
    "run_selfcheck",
    "config_defaults",
    "QUAD_REFERENCE",
    "ALTAFFINE_REFERENCE",
]

DEFAULT_ALGORITHMS = ("greedy", "gp", "ogd", "ewoo", "ftal", "da:exp", "da:rho:1.5")

# reported decay rates of R_t / t: (simulation, theory)
QUAD_REFERENCE = {
    2: {"gp": (-0.564, -0.497), "ogd": (-0.920, -0.900), "ftal": (-0.780, -0.900),
        "ewoo": (-0.809, -0.900), "da:exp": (-0.519, -0.446), "da:rho:1.5": (-0.452, -0.333)},
    3: {"gp": (-0.515, -0.495), "ogd": (-0.892, -0.888), "ftal": (-0.705, -0.888),
        "ewoo": (-0.676, -0.888), "da:exp": (-0.481, -0.439), "da:rho:1.5": (-0.396, -0.286)},
}
ALTAFFINE_REFERENCE = {
    "da:exp": (-0.557, -0.446), "da:rho:1.01": (-0.546, -0.495), "da:rho:1.05": (-0.477, -0.476),
    "da:rho:1.5": (-0.307, -0.333), "da:rho:1.75": (-0.279, -0.286),
}


# -- configs --------------------------------------------------------------------------

def _int(value, path, lo=None, hi=None):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(f"{path}: must be >= {lo}, got {value}")
    if hi is not None and value > hi:
        raise ConfigError(f"{path}: must be <= {hi}, got {value}")
    return int(value)


def _float(value, path, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if not math.isfinite(value) or (positive and value <= 0):
        raise ConfigError(f"{path}: expected a {'positive ' if positive else ''}finite number, got {value!r}")
    return float(value)


def _str(value, path):
    if not isinstance(value, str) or not value.strip():
        raise ConfigError(f"{path}: expected a non-empty string, got {value!r}")
    return value.strip().lower()


_SEED_MAX = 2**64 - 1


@dataclass
class BenchConfig:
    """Regret benchmark of several algorithms on one reward stream.

    ``algorithms`` of ``None`` runs every algorithm the stream supports.
    ``fit_window`` defaults to ``[T/10, T]``.
    """

    stream: str = "quad:n=2"
    algorithms: list | None = None
    T: int = 10_000
    reps: int = 100
    seed: int = 0
    m: int | None = 64
    theta: float | None = None
    regret: str = "expected"
    fit_window: list | None = None
    per_decade: int = 40
    chunk: int = 25

    def validate(self, path="bench"):
        self.stream = _str(self.stream, f"{path}.stream")
        try:
            probe = parse_stream(self.stream, [0], 0)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{path}.stream: {exc}") from None
        if self.algorithms is not None:
            if isinstance(self.algorithms, str) or not isinstance(self.algorithms, (list, tuple)) or not self.algorithms:
                raise ConfigError(f"{path}.algorithms: expected a non-empty list of selectors")
            algs = [_str(a, f"{path}.algorithms[{i}]") for i, a in enumerate(self.algorithms)]
            for i, a in enumerate(algs):
                why = _unsupported(a, probe)
                if why:
                    raise ConfigError(f"{path}.algorithms[{i}]: {why}")
            if len(set(algs)) != len(algs):
                raise ConfigError(f"{path}.algorithms: duplicate selectors")
            self.algorithms = algs
        self.T = _int(self.T, f"{path}.T", 1)
        self.reps = _int(self.reps, f"{path}.reps", 1)
        self.seed = _int(self.seed, f"{path}.seed", 0, _SEED_MAX)
        if self.m is not None:
            self.m = _int(self.m, f"{path}.m", 2)
        if self.theta is not None:
            self.theta = _float(self.theta, f"{path}.theta", positive=True)
        if self.regret not in ("expected", "realized"):
            raise ConfigError(f"{path}.regret: expected 'expected' or 'realized', got {self.regret!r}")
        if self.fit_window is not None:
            if not isinstance(self.fit_window, (list, tuple)) or len(self.fit_window) != 2:
                raise ConfigError(f"{path}.fit_window: expected [t_lo, t_hi]")
            lo = _float(self.fit_window[0], f"{path}.fit_window[0]", positive=True)
            hi = _float(self.fit_window[1], f"{path}.fit_window[1]", positive=True)
            if hi <= lo:
                raise ConfigError(f"{path}.fit_window: t_hi must exceed t_lo")
            self.fit_window = [lo, hi]
        self.per_decade = _int(self.per_decade, f"{path}.per_decade", 1)
        self.chunk = _int(self.chunk, f"{path}.chunk", 1)
        return self

    def selected(self, stream: RewardStream) -> list[str]:
        if self.algorithms is not None:
            return list(self.algorithms)
        return [a for a in DEFAULT_ALGORITHMS if not _unsupported(a, stream)]


@dataclass
class GameConfig:
    """Repeated play of a built-in game.

    ``bins`` defaults to 200 for one-dimensional and 40 per axis for
    two-dimensional action sets; ``hist_at`` to the decades from 100 and ``T``.
    """

    game: str = "g1"
    strategy1: str = "da"
    strategy2: str = "da"
    T: int = 10_000
    reps: int = 10
    seed: int = 0
    m: list | None = None
    theta: float | None = None
    bins: int | None = None
    hist_at: list | None = None
    per_decade: int = 20
    chunk: int = 5

    def validate(self, path="game"):
        self.game = _str(self.game, f"{path}.game")
        if self.game not in GAMES:
            raise ConfigError(f"{path}.game: unknown game {self.game!r}; choose from {GAMES}")
        for k in ("strategy1", "strategy2"):
            sel = _str(getattr(self, k), f"{path}.{k}")
            if sel != "fixed" and sel.partition(":")[0] not in ("da", "greedy"):
                raise ConfigError(f"{path}.{k}: expected da[:exp|:rho:<r>], greedy or fixed, got {sel!r}")
            if sel == "fixed" and builtin_game(self.game).equilibrium_sampler is None:
                raise ConfigError(f"{path}.{k}: {self.game} has no known equilibrium to play")
            setattr(self, k, sel)
        self.T = _int(self.T, f"{path}.T", 1)
        self.reps = _int(self.reps, f"{path}.reps", 1)
        self.seed = _int(self.seed, f"{path}.seed", 0, _SEED_MAX)
        if self.m is not None:
            if not isinstance(self.m, (list, tuple)) or len(self.m) != 2:
                raise ConfigError(f"{path}.m: expected [m1, m2]")
            self.m = [_int(v, f"{path}.m[{i}]", 2) for i, v in enumerate(self.m)]
        if self.theta is not None:
            self.theta = _float(self.theta, f"{path}.theta", positive=True)
        if self.bins is not None:
            self.bins = _int(self.bins, f"{path}.bins", 1)
        if self.hist_at is not None:
            if not isinstance(self.hist_at, (list, tuple)):
                raise ConfigError(f"{path}.hist_at: expected a list of rounds")
            self.hist_at = sorted({_int(v, f"{path}.hist_at[{i}]", 1, self.T) for i, v in enumerate(self.hist_at)})
        self.per_decade = _int(self.per_decade, f"{path}.per_decade", 1)
        self.chunk = _int(self.chunk, f"{path}.chunk", 1)
        return self


@dataclass
class LowerBoundConfig:
    """One algorithm against the random-sign stream, many repetitions."""

    stream: str = "rademacher:alpha=1"
    algorithm: str = "da:exp"
    T: int = 1024
    reps: int = 1000
    seed: int = 0
    m: int | None = 1024
    per_decade: int = 20
    chunk: int = 250

    def validate(self, path="lowerbound"):
        self.stream = _str(self.stream, f"{path}.stream")
        if not self.stream.startswith("rademacher"):
            raise ConfigError(f"{path}.stream: the lower-bound study needs a rademacher stream")
        try:
            probe = parse_stream(self.stream, [0], 0)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{path}.stream: {exc}") from None
        self.algorithm = _str(self.algorithm, f"{path}.algorithm")
        why = _unsupported(self.algorithm, probe)
        if why:
            raise ConfigError(f"{path}.algorithm: {why}")
        self.T = _int(self.T, f"{path}.T", 1)
        self.reps = _int(self.reps, f"{path}.reps", 2)
        self.seed = _int(self.seed, f"{path}.seed", 0, _SEED_MAX)
        if self.m is not None:
            self.m = _int(self.m, f"{path}.m", 2)
        self.per_decade = _int(self.per_decade, f"{path}.per_decade", 1)
        self.chunk = _int(self.chunk, f"{path}.chunk", 1)
        return self


@dataclass
class SelfCheckConfig:
    """Invariant audits; ``quick`` shrinks the sample sizes."""

    seed: int = 0
    quick: bool = False

    def validate(self, path="selfcheck"):
        self.seed = _int(self.seed, f"{path}.seed", 0, _SEED_MAX)
        if not isinstance(self.quick, bool):
            raise ConfigError(f"{path}.quick: expected true or false")
        return self


def config_from_dict(cls, data: dict, path: str):
    """Build and validate a config; errors name the offending field."""
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    names = {f.name for f in fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"{path}.{key}: unknown field (known: {', '.join(sorted(names))})")
    return cls(**data).validate(path)


# -- stream / algorithm compatibility ----------------------------------------------------

def _unsupported(selector: str, stream: RewardStream) -> str | None:
    """Reason why ``selector`` cannot run on ``stream``, or ``None``."""
    kind, _, arg = selector.partition(":")
    tags = stream.tags
    convex = isinstance(stream.domain, (Interval, Hypercube))
    has_grad = bool(tags.get("convex") or tags.get("affine"))
    if kind == "greedy":
        return None
    if kind == "da":
        try:
            from .potentials import parse_potential

            parse_potential(arg or "exp")
        except ValueError as exc:
            return str(exc)
        return None
    if kind not in ("gp", "ogd", "ewoo", "ftal"):
        return f"unknown algorithm {selector!r}"
    if not convex:
        return f"{kind} needs a convex action set"
    if kind == "gp" and not has_grad:
        return "gp needs rewards with gradients"
    if kind == "ogd" and not tags.get("strongly_convex"):
        return "ogd needs strongly concave rewards"
    if kind in ("ewoo", "ftal") and not tags.get("exp_concave"):
        return f"{kind} needs exp-concave losses"
    return None


def _build(selector: str, stream: RewardStream, batch: int, m, theta) -> Learner:
    tags = stream.tags
    return make_learner(
        selector, stream.domain, batch, m=m, M=stream.M, alpha_holder=stream.holder[0], theta=theta,
        H=tags.get("strongly_convex"), G=tags.get("G", stream.holder[1]), exp_concavity=tags.get("exp_concave"),
    )


def _chunks(reps: int, size: int) -> list[list[int]]:
    return [list(range(i, min(i + size, reps))) for i in range(0, reps, size)]


def _map(fn: Callable, items: list, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _band(x: np.ndarray) -> dict:
    """Mean and 10% / 90% quantiles over the last axis."""
    return {
        "mean": x.mean(axis=-1),
        "q10": np.quantile(x, 0.1, axis=-1),
        "q90": np.quantile(x, 0.9, axis=-1),
    }


# -- bench ----------------------------------------------------------------------------

def _bench_chunk(cfg: BenchConfig, algs: list[str], idx: list[int]) -> dict:
    stream = parse_stream(cfg.stream, idx[:1] if _is_det(cfg.stream) else idx, cfg.seed)
    B = len(idx)
    Lb = 1 if stream.deterministic else B
    dom = stream.domain
    cps = log_checkpoints(cfg.T, cfg.per_decade)
    learners = {a: _build(a, stream, Lb, cfg.m, cfg.theta) for a in algs}
    rngs = {a: rep_rngs(cfg.seed, idx, f"play/{a}") for a in algs}
    ledgers = {a: RegretLedger(dom, B, cfg.m, checkpoints=cps, track_norms=False) for a in algs}
    want_norms = any(isinstance(L, DALearner) for L in learners.values())
    norms = []
    for _ in range(cfg.T):
        reward = stream.next()
        cache: dict[int, np.ndarray] = {}

        def values_on(grid):
            if id(grid) not in cache:
                cache[id(grid)] = reward.on(grid.nodes)
            return cache[id(grid)]

        for a, L in learners.items():
            acts = L.play(rngs[a])
            acts_b = np.broadcast_to(acts, (B, dom.dim))
            grid = getattr(L, "grid", None)
            realized = reward.at(acts_b)
            expected = L.update(reward, acts, None if grid is None else values_on(grid))
            led = ledgers[a]
            led.record(reward, realized, expected, None if led.form is not None else values_on(led.grid))
        if want_norms:
            norms.append(reward_sup_norm(reward, dom, None if reward.form is not None else values_on(dom.grid(cfg.m))))
    out = {"norms": np.stack(norms) if norms else None}
    for a, led in ledgers.items():
        t, R = led.series(cfg.regret)
        out[a] = R
    out["t"] = t
    return out


def _is_det(spec: str) -> bool:
    return parse_stream(spec, [0], 0).deterministic


def run_bench(cfg: BenchConfig, threads: int = 1) -> dict:
    """Run every selected algorithm on ``cfg.stream``.

    Returns a dict with ``t`` (checkpoint rounds), per-algorithm ``series``
    (``R_t / t`` per repetition, shape ``(len(t), reps)``), ``bound`` (mean
    bound on ``R_t / t``; NaN where none applies) and a ``summary``.
    """
    probe = parse_stream(cfg.stream, [0], cfg.seed)
    algs = cfg.selected(probe)
    parts = _map(lambda idx: _bench_chunk(cfg, algs, idx), _chunks(cfg.reps, cfg.chunk), threads)
    t = parts[0]["t"]
    series = {a: np.concatenate([p[a] for p in parts], axis=1) / t[:, None] for a in algs}
    norms = parts[0]["norms"]
    if norms is not None and not probe.deterministic:
        norms = np.concatenate([p["norms"] for p in parts], axis=1)
    bounds, thetas = {}, {}
    for a in algs:
        b, th = _bench_bound(a, probe, cfg, t, norms)
        bounds[a], thetas[a] = b, th
    window = cfg.fit_window or [cfg.T / 10.0, cfg.T]
    summary = {"stream": cfg.stream, "T": cfg.T, "reps": cfg.reps, "regret": cfg.regret,
               "fit_window": window, "algorithms": {}}
    ref = _references(cfg.stream)
    for a in algs:
        mean = series[a].mean(axis=1)
        entry: dict[str, Any] = {"final_mean": float(mean[-1]), "slope": _safe_fit(t, mean, window)}
        bmean = bounds[a].mean(axis=1)
        entry["bound_final"] = float(bmean[-1])
        entry["slope_bound"] = _safe_fit(t, bmean, window)
        if a.startswith("da"):
            entry["bound_violations"] = int(np.sum(series[a] > bounds[a] * (1 + 1e-12)))
            entry["theta_final"] = float(np.median(thetas[a][-1]))
        if a in ref:
            entry["reference_simulation"], entry["reference_theory"] = ref[a]
        summary["algorithms"][a] = entry
    return {"t": t, "series": series, "bound": bounds, "summary": summary}


def _safe_fit(t, y, window):
    try:
        return fit_rate(t, y, window)
    except ValueError:
        return float("nan")


def _references(spec: str) -> dict:
    kind, _, args = spec.partition(":")
    if kind == "quad":
        n = int(dict(kv.split("=") for kv in args.split(",") if "=" in kv).get("n", 2))
        return QUAD_REFERENCE.get(n, {})
    if kind == "altaffine":
        return ALTAFFINE_REFERENCE
    return {}


def _bench_bound(alg: str, stream: RewardStream, cfg: BenchConfig, t: np.ndarray, norms):
    """Per-repetition bound on ``R_t / t`` (shape ``(len(t), reps)``) and the chosen radius."""
    reps = cfg.reps
    dom = stream.domain
    D = dom.diameter
    n = dom.dim
    tags = stream.tags
    G = tags.get("G", stream.holder[1])
    kind = alg.partition(":")[0]
    nan = np.full((t.size, reps), np.nan)
    if kind == "da":
        L = _build(alg, stream, 1, cfg.m, cfg.theta)
        pot = L.state.potential
        reg = dom.regularity_constants()
        b, th = bound_fdiv_scan(t, L.state.schedule, reg, pot.f_phi, stream.chi, norms,
                                pot.gamma_tilde_inverse, L.grid.cell_diameter)
        b = np.broadcast_to(b.reshape(t.size, -1), (t.size, reps))
        th = np.broadcast_to(np.asarray(th).reshape(t.size, -1), (t.size, reps))
        return np.array(b), np.array(th)
    if kind == "gp":
        b = bound_gp(t, D, G)
    elif kind == "ogd":
        b = bound_ogd(t, G, tags["strongly_convex"])
    elif kind == "ftal":
        b = bound_ftal(t, n, tags["exp_concave"], G, D)
    elif kind == "ewoo":
        b = bound_ewoo(t, n, tags["exp_concave"])
    else:
        return nan, nan
    return np.repeat(np.asarray(b, float)[:, None], reps, axis=1), nan


# -- games ----------------------------------------------------------------------------

def _hist_edges(game, player: int, bins: int):
    dom = game.domain(player)
    lo, hi = dom.bounds
    return [np.linspace(lo[i], hi[i], bins + 1) for i in range(dom.dim)]


def _game_chunk(cfg: GameConfig, idx: list[int], hist_rounds: list[int], cps, cdf_rounds, edges) -> dict:
    game = builtin_game(cfg.game)
    sess = run_repeated_game(game, cfg.strategy1, cfg.strategy2, cfg.T, cfg.seed, idx,
                             None if cfg.m is None else tuple(cfg.m), cfg.theta, cps)
    cum = np.cumsum(sess.payoffs, axis=0)
    out = {"payoff": cum[cps - 1] / cps[:, None]}
    for p in (1, 2):
        t, R = sess.ledgers[p - 1].series("realized")
        out[f"regret{p}"] = R / t[:, None]
        h = sess.history(p)
        out[f"hist{p}"] = {
            s: np.histogramdd(h[:s].reshape(-1, h.shape[-1]), bins=edges[p - 1])[0] for s in hist_rounds
        }
        ref = game.equilibrium_cdf[p - 1] if game.equilibrium_cdf is not None else None
        if ref is not None:
            out[f"cdf{p}"] = np.stack([cdf_distance(sess, p, ref, s) for s in cdf_rounds])
    if sess.alpha_trace is not None:
        a = sess.alpha_trace
        abar = np.cumsum(a, axis=0) / np.arange(1, cfg.T + 1)[:, None, None]
        out["alpha"] = a[cps - 1]
        out["alphabar"] = abar[cps - 1]
    return out


def _density(counts: np.ndarray, edges) -> np.ndarray:
    widths = np.ones_like(counts, dtype=float)
    for ax, e in enumerate(edges):
        shape = [1] * counts.ndim
        shape[ax] = -1
        widths = widths * np.diff(e).reshape(shape)
    total = counts.sum()
    return counts / (total * widths) if total else np.zeros_like(counts, dtype=float)


def run_game(cfg: GameConfig, threads: int = 1) -> dict:
    """Repeated play with per-checkpoint payoff, regret, CDF distance and histograms."""
    game = builtin_game(cfg.game)
    decades = [10**k for k in range(1, int(math.log10(cfg.T)) + 1) if 10**k <= cfg.T]
    cdf_rounds = sorted(set(decades) | {cfg.T})
    hist_at = cfg.hist_at or sorted({d for d in decades if d >= 100} | {cfg.T})
    # summaries read regret at decades and histogram rounds, so those are always recorded
    cps = np.union1d(log_checkpoints(cfg.T, cfg.per_decade), np.array(cdf_rounds + hist_at, dtype=int))
    hist_rounds = sorted(set(hist_at) | {max(1, s // 2) for s in hist_at})
    edges = []
    for p in (1, 2):
        dim = game.domain(p).dim
        edges.append(_hist_edges(game, p, cfg.bins or (200 if dim == 1 else 40)))
    parts = _map(lambda idx: _game_chunk(cfg, idx, hist_rounds, cps, cdf_rounds, edges),
                 _chunks(cfg.reps, cfg.chunk), threads)
    res: dict[str, Any] = {"t": cps, "payoff": np.concatenate([p["payoff"] for p in parts], axis=1)}
    summary: dict[str, Any] = {"game": cfg.game, "T": cfg.T, "reps": cfg.reps,
                               "strategies": [cfg.strategy1, cfg.strategy2], "value": game.value}
    avg = res["payoff"]
    summary["average_payoff_final"] = float(avg[-1].mean())
    if game.value is not None:
        summary["value_gap_final"] = float(abs(avg[-1].mean() - game.value))
    reg = None
    for p in (1, 2):
        R = np.concatenate([q[f"regret{p}"] for q in parts], axis=1)
        res[f"regret{p}"] = R
        dom = game.domain(p)
        reg = dom.regularity_constants()
        sel = cfg.strategy1 if p == 1 else cfg.strategy2
        if sel in ("da", "da:exp"):
            lip = game.lipschitz[p - 1]
            res[f"bound{p}"] = np.asarray(bound_entropy(cps, game.M[p - 1], reg, lip, 1.0, cfg.theta))
        else:
            res[f"bound{p}"] = np.full(cps.size, np.nan)
        counts = {s: sum(q[f"hist{p}"][s] for q in parts) for s in hist_rounds}
        res[f"hist{p}"] = {s: _density(counts[s], edges[p - 1]) for s in hist_at}
        res[f"edges{p}"] = edges[p - 1]
        summary[f"regret{p}_final"] = float(R[-1].mean())
        summary[f"regret{p}_at"] = {int(d): float(R[np.searchsorted(cps, d)].mean())
                                    for d in sorted(set(decades) | set(hist_at) | {cfg.T}) if d in cps}
        summary[f"hist{p}_self_l1"] = {
            int(s): histogram_l1(_density(counts[s], edges[p - 1]), _density(counts[max(1, s // 2)], edges[p - 1]),
                                 edges[p - 1])
            for s in hist_at
        }
        if f"cdf{p}" in parts[0]:
            ks = np.concatenate([q[f"cdf{p}"] for q in parts], axis=1)
            res[f"cdf{p}"] = (np.array(cdf_rounds), ks)
            summary[f"cdf{p}_distance"] = {int(s): float(k.mean()) for s, k in zip(cdf_rounds, ks)}
    if "alpha" in parts[0]:
        res["alpha"] = np.concatenate([q["alpha"] for q in parts], axis=1)
        res["alphabar"] = np.concatenate([q["alphabar"] for q in parts], axis=1)
        summary["alphabar_final"] = res["alphabar"][-1].mean(axis=0).tolist()
    res["summary"] = summary
    return res


# -- lower bound ------------------------------------------------------------------------

def _lower_chunk(cfg: LowerBoundConfig, idx: list[int], cps) -> tuple[np.ndarray, np.ndarray]:
    stream = parse_stream(cfg.stream, idx, cfg.seed)
    B = len(idx)
    L = _build(cfg.algorithm, stream, B, cfg.m, None)
    rngs = rep_rngs(cfg.seed, idx, f"play/{cfg.algorithm}")
    led = RegretLedger(stream.domain, B, cfg.m, checkpoints=cps, track_norms=False)
    for _ in range(cfg.T):
        reward = stream.next()
        grid = getattr(L, "grid", None)
        values = None if grid is None else reward.on(grid.nodes)
        acts = L.play(rngs)
        realized = reward.at(acts)
        expected = L.update(reward, acts, values)
        led_vals = None
        if led.form is None or reward.form is None:
            led_vals = values if grid is led.grid and values is not None else reward.on(led.grid.nodes)
        led.record(reward, realized, expected, led_vals)
    _, Re = led.series("expected")
    _, Rr = led.series("realized")
    return Re, Rr


def run_lowerbound(cfg: LowerBoundConfig, threads: int = 1) -> dict:
    """Mean worst-case regret over repetitions against the ``w(D_S) sqrt(t) / (2 sqrt 2)`` bound.

    The verdict at each checkpoint is ``mean + 3 se >= bound``.
    """
    cps = log_checkpoints(cfg.T, cfg.per_decade)
    parts = _map(lambda idx: _lower_chunk(cfg, idx, cps), _chunks(cfg.reps, cfg.chunk), threads)
    Re = np.concatenate([p[0] for p in parts], axis=1)
    Rr = np.concatenate([p[1] for p in parts], axis=1)
    probe = parse_stream(cfg.stream, [0], cfg.seed)
    w_D = float(probe.w(probe.domain.diameter))
    bound = bound_lower(cps, w_D)
    mean = Re.mean(axis=1)
    se = Re.std(axis=1, ddof=1) / math.sqrt(cfg.reps)
    ok = mean + 3 * se >= bound
    summary = {
        "stream": cfg.stream, "algorithm": cfg.algorithm, "T": cfg.T, "reps": cfg.reps,
        "w_of_diameter": w_D, "mean_regret_final": float(mean[-1]), "se_final": float(se[-1]),
        "bound_final": float(bound[-1]), "dominates_final": bool(ok[-1]),
        "dominates_all": bool(ok.all()),
    }
    return {"t": cps, "expected": Re, "realized": Rr, "mean": mean, "se": se, "bound": bound,
            "dominates": ok, "summary": summary}


# -- self-check -------------------------------------------------------------------------

def run_selfcheck(cfg: SelfCheckConfig) -> list[checks.CheckResult]:
    """Invariant audits: duality, warm start, normalization, metric axioms, continuity."""
    q = cfg.quick
    s = cfg.seed
    out = [
        checks.duality_agreement(20 if q else 100, 1024 if q else 4096, seed=s),
        checks.warm_start_containment(1000 if q else 10_000, seed=s),
        checks.normalization_audit(50 if q else 200, seed=s),
        checks.dual_map_lipschitz(100 if q else 500, seed=s),
    ]
    for dom in (Interval(), Hypercube(2, 0.5), LShape()):
        out.append(checks.metric_axioms(dom, 500 if q else 2000, seed=s))
        out.append(checks.q_regularity_audit(dom, 50 if q else 200, 5000 if q else 20_000, seed=s))
    pairs = 2000 if q else 10_000
    for spec in ("altaffine:L=5", "quad:n=2", "rademacher:alpha=1", "rademacher:alpha=0.5,domain=lshape"):
        stream = parse_stream(spec, [0], s)
        a, C = stream.holder
        worst = None
        for _ in range(3):
            r = stream.next()
            res = checks.holder_audit(lambda p, r=r: r.on(p)[0], stream.domain, a, C, pairs, seed=s + stream.t)
            worst = res if worst is None or res.value > worst.value else worst
        worst.name = f"holder_audit[{spec}]"
        out.append(worst)
    for name in GAMES:
        game = builtin_game(name)
        rng = np.random.default_rng(s)
        for p in (1, 2):
            dom, other = game.domain(p), game.domain(3 - p)
            fixed = other.sample_uniform(rng, 1)[0]

            def fn(x, p=p, fixed=fixed):
                y = np.broadcast_to(fixed, (x.shape[0], fixed.size))
                return game.u(x, y) if p == 1 else game.u(y, x)

            res = checks.holder_audit(fn, dom, 1.0, game.lipschitz[p - 1], pairs, seed=s)
            res.name = f"holder_audit[{name}/player{p}]"
            out.append(res)
    return out


def config_defaults() -> dict:
    return {
        "bench": asdict(BenchConfig()),
        "game": asdict(GameConfig()),
        "lowerbound": asdict(LowerBoundConfig()),
        "selfcheck": asdict(SelfCheckConfig()),
    }
