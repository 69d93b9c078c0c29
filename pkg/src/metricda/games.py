"""Continuous two-player zero-sum games and repeated play.

Player 1 receives ``u(s1, s2)`` and player 2 receives ``-u(s1, s2)``. After
each round every player observes its partial payoff function, the reward it
would have obtained with any other action against the opponent's actual play,
and feeds it to its learner. Play is batched over independent repetitions and
each player draws from its own random streams.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from .baselines import DALearner, GreedyLearner, Learner, make_learner
from .domains import Domain, Interval, LShape
from .regret import RegretLedger, log_checkpoints
from .rewards import QuadraticForm, Reward
from .seeding import rep_rngs

__all__ = [
    "ZeroSumGame",
    "PartialPayoff",
    "FixedLearner",
    "PlaySession",
    "builtin_game",
    "partial_payoffs",
    "run_repeated_game",
    "empirical_distribution",
    "cdf_distance",
    "histogram_l1",
    "GAMES",
]

GAMES = ("g1", "g2", "g3")


@dataclass
class ZeroSumGame:
    """Two action sets and player 1's payoff.

    ``payoff(s1, s2)`` broadcasts over leading axes of point arrays. ``M`` holds
    each player's bound on ``sup |u|`` and ``lipschitz`` the per-player
    continuity constants in their own action.
    """

    name: str
    S1: Domain
    S2: Domain
    payoff: Callable
    M: tuple[float, float]
    lipschitz: tuple[float, float]
    value: float | None = None
    equilibrium_pdf: tuple | None = None
    equilibrium_cdf: tuple | None = None
    equilibrium_sampler: tuple | None = None
    affine_partials: Callable | None = None  # (player, opponent points) -> QuadraticForm
    m: tuple[int | None, int | None] = (None, None)

    def domain(self, player: int) -> Domain:
        return self.S1 if player == 1 else self.S2

    def u(self, s1, s2) -> np.ndarray:
        return self.payoff(np.asarray(s1, dtype=float), np.asarray(s2, dtype=float))


class PartialPayoff(Reward):
    """``u(., s2)`` for player 1 or ``-u(s1, .)`` for player 2, one opponent point per row."""

    def __init__(self, game: ZeroSumGame, player: int, opponent):
        self.game = game
        self.player = player
        self.opponent = np.atleast_2d(np.asarray(opponent, dtype=float))
        self.batch = self.opponent.shape[0]
        self.form = None
        if game.affine_partials is not None:
            self.form = game.affine_partials(player, self.opponent)

    def on(self, points):
        pts = np.asarray(points, dtype=float)[None, :, :]
        opp = self.opponent[:, None, :]
        if self.player == 1:
            return self.game.u(pts, opp)
        return -self.game.u(opp, pts)

    def at(self, s):
        s = np.asarray(s, dtype=float)
        if self.player == 1:
            return self.game.u(s, self.opponent)
        return -self.game.u(self.opponent, s)


def partial_payoffs(game: ZeroSumGame, s1, s2) -> tuple[PartialPayoff, PartialPayoff]:
    """Partial payoff functions of both players after the play ``(s1, s2)``."""
    s1 = game.S1.check(np.atleast_2d(s1))
    s2 = game.S2.check(np.atleast_2d(s2))
    return PartialPayoff(game, 1, s2), PartialPayoff(game, 2, s1)


# -- built-in games -------------------------------------------------------------------

def _g1_payoff(s1, s2):
    x, y = s1[..., 0], s2[..., 0]
    return (1 + x) * (1 + y) * (1 - x * y) / (1 + x * y) ** 2


def _g1_pdf(s):
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore"):
        return 2.0 / (math.pi * np.sqrt(s) * (1 + s))


def _g1_cdf(s):
    return 4.0 / math.pi * np.arctan(np.sqrt(np.clip(s, 0.0, 1.0)))


def _g1_sample(rng, size):
    return np.tan(math.pi * rng.random(size) / 4.0) ** 2


A1 = (math.e - 2) / (math.e - 1)
A2 = 1 / (math.e - 1)


def _g2_payoff(s1, s2):
    x, y = s1[..., 0], s2[..., 0]
    return x * y - A1 * x - A2 * y


def _g2_partials(player, opp):
    B = opp.shape[0]
    o = opp[:, 0]
    A = np.zeros((B, 1, 1))
    if player == 1:
        # u(s, s2) = (s2 - a1) s - a2 s2
        return QuadraticForm(A, (o - A1)[:, None], -A2 * o)
    # -u(s1, s) = (a2 - s1) s + a1 s1
    return QuadraticForm(A, (A2 - o)[:, None], A1 * o)


_E1 = math.e - 1


def _g2_pdf1(s):
    return np.exp(np.asarray(s, dtype=float)) / _E1


def _g2_pdf2(s):
    return np.exp(1 - np.asarray(s, dtype=float)) / _E1


def _g2_cdf1(s):
    return np.expm1(np.clip(s, 0.0, 1.0)) / _E1


def _g2_cdf2(s):
    return (math.e - np.exp(1 - np.clip(s, 0.0, 1.0))) / _E1


def _g2_sample1(rng, size):
    return np.log1p(rng.random(size) * _E1)


def _g2_sample2(rng, size):
    return 1.0 - np.log(math.e - rng.random(size) * _E1)


class _G3Payoff:
    """``d(s1, s2) - d(s1, 0) / 10`` with the geodesic metric of the holed square.

    Distances to the origin are cached for the last point array seen, since
    player 1's partial payoff is evaluated on the same grid every round.
    """

    def __init__(self, dom: LShape):
        self.dom = dom
        self._origin = np.zeros(2)
        self._last = (None, None)

    def _to_origin(self, s1):
        key = s1.base if s1.ndim == 3 and s1.shape[0] == 1 else None
        if key is not None:
            if self._last[0] is not key:
                self._last = (key, self.dom._distance(s1[0], self._origin))
            return self._last[1][None, :]
        return self.dom._distance(s1, self._origin)

    def _pair(self, s1, s2):
        # grid against one opponent point per row: use the cached corner legs
        if s1.ndim == 3 and s1.shape[0] == 1 and s2.ndim == 3 and s2.shape[1] == 1:
            return self.dom.pairwise(s1[0], s2[:, 0])
        if s2.ndim == 3 and s2.shape[0] == 1 and s1.ndim == 3 and s1.shape[1] == 1:
            return self.dom.pairwise(s2[0], s1[:, 0])
        return self.dom._distance(s1, s2)

    def __call__(self, s1, s2):
        return self._pair(s1, s2) - 0.1 * self._to_origin(s1)


def builtin_game(name: str) -> ZeroSumGame:
    """``"g1"`` (unique mixed equilibrium), ``"g2"`` (affine partial payoffs) or ``"g3"`` (holed square)."""
    name = name.strip().lower()
    if name == "g1":
        I = Interval(0.0, 1.0, default_resolution=1024)
        return ZeroSumGame(
            "g1", I, I, _g1_payoff, M=(2.0, 2.0), lipschitz=(8.0, 8.0), value=4 / math.pi,
            equilibrium_pdf=(_g1_pdf, _g1_pdf), equilibrium_cdf=(_g1_cdf, _g1_cdf),
            equilibrium_sampler=(_g1_sample, _g1_sample),
        )
    if name == "g2":
        I = Interval(0.0, 1.0, default_resolution=1024)
        # |u| and |du/ds^i| are at most a2 > a1 on the unit square
        return ZeroSumGame(
            "g2", I, I, _g2_payoff, M=(A2, A2), lipschitz=(A2, A2), value=-A1 * A2,
            equilibrium_pdf=(_g2_pdf1, _g2_pdf2), equilibrium_cdf=(_g2_cdf1, _g2_cdf2),
            equilibrium_sampler=(_g2_sample1, _g2_sample2), affine_partials=_g2_partials,
        )
    if name == "g3":
        L = LShape(default_resolution=50)
        D = L.diameter
        return ZeroSumGame("g3", L, L, _G3Payoff(L), M=(D, D), lipschitz=(1.1, 1.0))
    raise ValueError(f"unknown game {name!r}; choose from {GAMES}")


# -- strategies -----------------------------------------------------------------------

class FixedLearner(Learner):
    """Plays iid draws from a fixed distribution given by its sampler."""

    name = "fixed"
    randomized = True

    def __init__(self, sampler: Callable, batch: int):
        self.sampler = sampler
        self.batch = batch

    def play(self, rngs):
        return np.stack([np.atleast_1d(self.sampler(r, 1)).reshape(1, -1)[0] for r in rngs])

    def update(self, reward, actions, values=None):
        return reward.at(actions)


def _strategy(spec, game: ZeroSumGame, player: int, batch: int, m, theta) -> Learner:
    if isinstance(spec, Learner):
        return spec
    dom = game.domain(player)
    sel = spec.strip().lower()
    if sel == "fixed":
        if game.equilibrium_sampler is None:
            raise ValueError(f"{game.name} has no known equilibrium to play")
        samp = game.equilibrium_sampler[player - 1]
        return FixedLearner(lambda rng, k: samp(rng, (k, 1)), batch)
    return make_learner(sel, dom, batch, m=m, M=game.M[player - 1], alpha_holder=1.0, theta=theta)


# -- sessions -------------------------------------------------------------------------

@dataclass
class PlaySession:
    game: ZeroSumGame
    learners: tuple[Learner, Learner]
    ledgers: tuple[RegretLedger, RegretLedger]
    history1: np.ndarray  # (T, B, n1)
    history2: np.ndarray  # (T, B, n2)
    payoffs: np.ndarray  # (T, B) player 1's realized payoff
    alpha_trace: np.ndarray | None = None  # (T, B, 2) for affine partial payoffs
    t: int = 0

    @property
    def batch(self) -> int:
        return self.payoffs.shape[1]

    def history(self, player: int) -> np.ndarray:
        return (self.history1 if player == 1 else self.history2)[: self.t]

    def average_payoff(self, t: int | None = None) -> np.ndarray:
        t = self.t if t is None else t
        return self.payoffs[:t].mean(axis=0)


def run_repeated_game(game: ZeroSumGame, strategy1="da", strategy2="da", T: int = 1000, seed: int = 0,
                      reps=1, m: tuple | None = None, theta: float | None = None,
                      checkpoints=None) -> PlaySession:
    """Play ``T`` rounds for a batch of repetitions.

    Strategies are selector strings (``"da"``, ``"da:rho:1.5"``, ``"greedy"``,
    ``"fixed"`` for the known equilibrium) or learner objects. ``reps`` is a
    count or the global repetition indices, which key the random streams.
    """
    idx = list(range(reps)) if isinstance(reps, (int, np.integer)) else list(reps)
    B = len(idx)
    m = game.m if m is None else m
    L1 = _strategy(strategy1, game, 1, B, m[0], theta)
    L2 = _strategy(strategy2, game, 2, B, m[1], theta)
    rngs1 = rep_rngs(seed, idx, f"{game.name}/player1")
    rngs2 = rep_rngs(seed, idx, f"{game.name}/player2")
    cps = log_checkpoints(T) if checkpoints is None else np.asarray(checkpoints)
    led1 = RegretLedger(game.S1, B, m[0], checkpoints=cps)
    led2 = RegretLedger(game.S2, B, m[1], checkpoints=cps)
    g1 = game.S1.grid(m[0])
    g2 = game.S2.grid(m[1])
    h1 = np.empty((T, B, game.S1.dim))
    h2 = np.empty((T, B, game.S2.dim))
    pay = np.empty((T, B))
    trace = np.empty((T, B, 2)) if game.affine_partials is not None else None
    session = PlaySession(game, (L1, L2), (led1, led2), h1, h2, pay, trace)
    for t in range(T):
        a1 = L1.play(rngs1)
        a2 = L2.play(rngs2)
        u = game.u(a1, a2)
        r1, r2 = PartialPayoff(game, 1, a2), PartialPayoff(game, 2, a1)
        v1 = r1.on(g1.nodes)
        v2 = r2.on(g2.nodes)
        e1 = L1.update(r1, a1, v1)
        e2 = L2.update(r2, a2, v2)
        led1.record(r1, u, e1, v1)
        led2.record(r2, -u, e2, v2)
        h1[t], h2[t], pay[t] = a1, a2, u
        if trace is not None:
            trace[t] = np.stack([_alpha(L1, B), _alpha(L2, B)], axis=1)
        session.t = t + 1
    if trace is not None:
        session.alpha_trace = trace
    return session


def _alpha(learner: Learner, batch: int) -> np.ndarray:
    """``eta_t`` times the slope of the affine cumulative reward, per repetition (NaN if none)."""
    if isinstance(learner, DALearner) and learner.state.U.form is not None:
        return np.broadcast_to(learner.state.eta * learner.state.U.form.b[:, 0], (batch,))
    return np.full(batch, np.nan)


# -- diagnostics ----------------------------------------------------------------------

def empirical_distribution(session: PlaySession, player: int, bins=100, t: int | None = None,
                           rep: int | None = None):
    """Normalized histogram of the plays up to round ``t``.

    Pools all repetitions unless ``rep`` is given. Returns ``(density, edges)``
    where ``edges`` is one array per axis and the density integrates to one
    against the (raw) bin areas.
    """
    t = session.t if t is None else t
    h = session.history(player)[:t]
    pts = h[:, rep] if rep is not None else h.reshape(-1, h.shape[-1])
    dom = session.game.domain(player)
    lo, hi = dom.bounds
    nb = [bins] * dom.dim if np.isscalar(bins) else list(bins)
    edges = [np.linspace(lo[k], hi[k], nb[k] + 1) for k in range(dom.dim)]
    dens, _ = np.histogramdd(pts, bins=edges, density=True)
    return dens, edges


def histogram_l1(d1: np.ndarray, d2: np.ndarray, edges) -> float:
    """L1 distance between two histogram densities on the same bins."""
    area = np.ones_like(d1)
    for k, e in enumerate(edges):
        shape = [1] * d1.ndim
        shape[k] = -1
        area = area * np.diff(e).reshape(shape)
    return float(np.sum(np.abs(d1 - d2) * area))


def cdf_distance(session: PlaySession, player: int, reference_cdf: Callable | None = None,
                 t: int | None = None) -> np.ndarray:
    """Kolmogorov distance per repetition between empirical and reference CDFs (1-D)."""
    game = session.game
    if reference_cdf is None:
        if game.equilibrium_cdf is None:
            raise ValueError(f"{game.name} has no reference distribution")
        reference_cdf = game.equilibrium_cdf[player - 1]
    t = session.t if t is None else t
    h = session.history(player)[:t, :, 0]
    return np.array([stats.kstest(h[:, b], reference_cdf).statistic for b in range(h.shape[1])])
