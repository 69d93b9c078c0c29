"""Reward streams with declared contracts.

A stream is a stateful iterator over rounds ``t = 1, 2, ...``; ``next()``
returns the batched reward of the next round. Each stream declares

* ``M``: bound on ``sup_s |u_t(s)|``,
* ``holder = (alpha, C_alpha)``: ``|u_t(s) - u_t(s')| <= C_alpha d(s, s')^alpha``,
* ``tags``: structural facts used by the baselines, e.g. the strong
  convexity ``H``, gradient bound ``G`` and exp-concavity of the losses.

Random streams draw from one generator per repetition and generate their
parameters in fixed-size blocks, so the sequence depends only on the seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domains import Domain, Hypercube, Interval, LShape
from .rewards import QuadraticForm, QuadraticReward, Reward, ScaledReward
from .seeding import rep_rngs

__all__ = [
    "RewardStream",
    "QuadraticStream",
    "AlternatingAffineStream",
    "RademacherStream",
    "quadratic_stream",
    "alternating_affine_stream",
    "rademacher_stream",
    "parse_stream",
]

BLOCK = 256


class RewardStream:
    name = "stream"
    domain: Domain
    batch: int = 1
    M: float = 1.0
    holder: tuple[float, float] = (1.0, 1.0)
    # rewards identical across repetitions (no randomness in the stream)
    deterministic: bool = False

    def __init__(self):
        self.t = 0
        self.tags: dict = {}

    def chi(self, r):
        a, C = self.holder
        return C * np.asarray(r, dtype=float) ** a

    def reward(self, t: int) -> Reward:
        raise NotImplementedError

    def next(self) -> Reward:
        self.t += 1
        return self.reward(self.t)

    def __iter__(self):
        return self

    def __next__(self) -> Reward:
        return self.next()


# -- random quadratics ----------------------------------------------------------------

@dataclass
class QuadraticParams:
    Q: np.ndarray  # (B, n, n)
    mu: np.ndarray  # (B, n)
    c: np.ndarray  # (B,)


class QuadraticStream(RewardStream):
    """``u_t(s) = -k (0.5 (s - mu_t)^T Q_t (s - mu_t) + c_t)`` on ``[-0.5, 0.5]^n``.

    ``Q_t = R diag(lam) R^T`` with eigenvalues log-uniform in ``eig_range`` and
    a Haar-random rotation ``R``; ``mu_t`` is uniform on the cube and ``c_t``
    uniform on ``[0, c_max]``. The single scale ``k`` is the largest value for
    which every possible instance meets all three targets: Lipschitz constant
    ``target_L``, sup norm ``target_sup`` and L4 norm ``target_4norm``.
    """

    name = "quad"

    def __init__(self, rngs, n: int = 2, target_L: float = 5.0, target_sup: float = 3.75,
                 target_4norm: float = 1.6, eig_range=(0.2, 2.0), c_max: float = 0.0):
        super().__init__()
        if n not in (1, 2, 3):
            raise ValueError("quadratic stream supports n in {1, 2, 3}")
        self.rngs = list(rngs)
        self.batch = len(self.rngs)
        self.n = n
        self.domain = Hypercube(n, 0.5)
        self.eig_range = tuple(float(e) for e in eig_range)
        self.c_max = float(c_max)
        lam_lo, lam_hi = self.eig_range
        D = self.domain.diameter
        lip = lam_hi * D
        sup = 0.5 * lam_hi * D**2 + self.c_max
        corner = np.full(n, 0.5)
        g = self.domain.grid(64 if n < 3 else 24)
        worst = 0.5 * lam_hi * np.sum((g.nodes - corner) ** 2, axis=1) + self.c_max
        l4 = float((worst**4 @ g.weights) ** 0.25)
        self.k = min(target_L / lip, target_sup / sup, target_4norm / l4)
        self.M = self.k * sup
        self.lipschitz = self.k * lip
        self.holder = (1.0, self.lipschitz)
        H = self.k * lam_lo
        G = self.lipschitz
        # exp(-a l) is concave iff k Q >= a k^2 Q d d^T Q for d = s - mu, i.e.
        # a <= 1 / (k d^T Q d); the worst case over the family is k lam_hi D^2 = 2 sup
        self.tags = {"convex": True, "strongly_convex": H, "G": G, "exp_concave": 1.0 / (2.0 * self.k * (sup - self.c_max))}
        self._cache: QuadraticParams | None = None
        self._block_start = 0

    def _draw_block(self):
        n, K = self.n, BLOCK
        lam_lo, lam_hi = self.eig_range
        Qs, mus, cs = [], [], []
        for rng in self.rngs:
            lam = np.exp(rng.uniform(math.log(lam_lo), math.log(lam_hi), size=(K, n)))
            Z = rng.standard_normal((K, n, n))
            R, T = np.linalg.qr(Z)
            R = R * np.sign(np.diagonal(T, axis1=1, axis2=2))[:, None, :]
            Qs.append(np.einsum("kij,kj,klj->kil", R, lam, R))
            mus.append(rng.uniform(-0.5, 0.5, size=(K, n)))
            cs.append(rng.uniform(0.0, self.c_max, size=K) if self.c_max > 0 else np.zeros(K))
        return QuadraticParams(np.stack(Qs, 1), np.stack(mus, 1), np.stack(cs, 1))

    def params(self, t: int) -> QuadraticParams:
        """Parameters of round ``t``; rounds must be requested in order."""
        while self._cache is None or t > self._block_start + BLOCK:
            if self._cache is not None:
                self._block_start += BLOCK
            self._cache = self._draw_block()
        if t <= self._block_start:
            raise ValueError("quadratic stream rounds must be requested in increasing order")
        i = t - 1 - self._block_start
        return QuadraticParams(self._cache.Q[i], self._cache.mu[i], self._cache.c[i])

    def reward(self, t: int) -> QuadraticReward:
        p = self.params(t)
        k = self.k
        Qmu = np.einsum("bij,bj->bi", p.Q, p.mu)
        form = QuadraticForm(
            -0.5 * k * p.Q,
            k * Qmu,
            -k * (0.5 * np.einsum("bi,bi->b", p.mu, Qmu) + p.c),
        )
        return QuadraticReward(form)


def quadratic_stream(rng, n: int = 2, target_L: float = 5.0, target_sup: float = 3.75,
                     target_4norm: float = 1.6, **kw) -> QuadraticStream:
    rngs = [rng] if isinstance(rng, np.random.Generator) else rng
    return QuadraticStream(rngs, n, target_L, target_sup, target_4norm, **kw)


# -- alternating affine ---------------------------------------------------------------

class AlternatingAffineStream(RewardStream):
    """``u(s) = -<a_k, s> - c_k`` with ``a_0 = [L/2, 0]``, ``c_0 = L/4`` and
    ``a_k = [(-1)^k L, 0]``, ``c_k = L/2`` for ``k >= 1``.

    Round ``t`` uses index ``k = t - 1``, so the first cumulative reward is
    ``-(L/2) s_1 - L/4`` and every maximizer of ``U_t`` minimizes ``U_{t+1}``.
    """

    name = "altaffine"
    deterministic = True

    def __init__(self, L: float = 5.0, batch: int = 1):
        super().__init__()
        self.L = float(L)
        self.batch = int(batch)
        self.domain = Hypercube(2, 0.5)
        self.M = self.L
        self.holder = (1.0, self.L)
        self.tags = {"affine": True, "convex": True, "G": self.L}

    def coefficients(self, k: int) -> tuple[np.ndarray, float]:
        L = self.L
        if k == 0:
            return np.array([L / 2, 0.0]), L / 4
        return np.array([(-1.0) ** k * L, 0.0]), L / 2

    def function(self, k: int) -> QuadraticReward:
        a, c = self.coefficients(k)
        B = self.batch
        return QuadraticReward(QuadraticForm(np.zeros((B, 2, 2)), np.tile(-a, (B, 1)), np.full(B, -c)))

    def reward(self, t: int) -> QuadraticReward:
        return self.function(t - 1)


def alternating_affine_stream(L: float = 5.0, batch: int = 1) -> AlternatingAffineStream:
    return AlternatingAffineStream(L, batch)


# -- Rademacher lower-bound stream ----------------------------------------------------

class RademacherStream(RewardStream):
    """``u_t = V_t v`` with iid signs ``V_t`` and ``v(s) = w(d(s, s_b))``.

    ``w(r) = kappa r^alpha`` where ``kappa = min(C_alpha, M / ||d(., s_b)^alpha||_q)``
    makes ``v`` Hoelder with constant ``C_alpha`` and bounded by ``M`` in the
    ``q``-norm, ``q = p / (p - 1)``; ``s_a, s_b`` realize the diameter.
    """

    name = "rademacher"

    def __init__(self, rngs, domain: Domain, M: float = 1.0, alpha: float = 1.0, C_alpha: float = 1.0,
                 p: float = 2.0, m: int | None = None):
        super().__init__()
        if not 0 < alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        self.rngs = list(rngs)
        self.batch = len(self.rngs)
        self.domain = domain
        self.alpha = float(alpha)
        self.C_alpha = float(C_alpha)
        self.q = p / (p - 1.0)
        self.s_a, self.s_b = domain.diameter_endpoints
        g = domain.grid(m)
        d_alpha = domain._distance(g.nodes, self.s_b) ** self.alpha
        qnorm = float((d_alpha**self.q @ g.weights) ** (1.0 / self.q))
        self.kappa = min(self.C_alpha, M / qnorm)
        self.M_dual = float(M)
        self.M = self.w(domain.diameter)
        self.holder = (self.alpha, self.kappa)
        self.tags = {"affine": self._is_affine}
        self._signs = None
        self._block_start = 0
        self._cache: dict = {}

    @property
    def _is_affine(self) -> bool:
        return isinstance(self.domain, Interval) and self.alpha == 1.0

    def w(self, r):
        out = self.kappa * np.asarray(r, dtype=float) ** self.alpha
        return float(out) if out.ndim == 0 else out

    def v(self, points) -> np.ndarray:
        return self.w(self.domain._distance(np.asarray(points, dtype=float), self.s_b))

    def signs(self, t: int) -> np.ndarray:
        while self._signs is None or t > self._block_start + BLOCK:
            if self._signs is not None:
                self._block_start += BLOCK
            self._signs = np.stack([r.choice([-1.0, 1.0], size=BLOCK) for r in self.rngs], 1)
        if t <= self._block_start:
            raise ValueError("rademacher stream rounds must be requested in increasing order")
        return self._signs[t - 1 - self._block_start]

    def reward(self, t: int) -> Reward:
        V = self.signs(t)
        if self._is_affine:
            # v(s) = kappa |s - s_b| is affine on the interval: sign fixed by s_b's end
            sgn = 1.0 if self.s_b[0] <= self.domain.lo else -1.0
            b = (V * self.kappa * sgn)[:, None]
            c = -V * self.kappa * sgn * self.s_b[0]
            return QuadraticReward(QuadraticForm(np.zeros((self.batch, 1, 1)), b, c))
        return ScaledReward(self.v, V, self._cache)


def rademacher_stream(rng, domain: Domain, M: float = 1.0, alpha: float = 1.0, C_alpha: float = 1.0,
                      **kw) -> RademacherStream:
    rngs = [rng] if isinstance(rng, np.random.Generator) else rng
    return RademacherStream(rngs, domain, M, alpha, C_alpha, **kw)


# -- selector strings -----------------------------------------------------------------

_DOMAINS = {"interval": Interval, "lshape": LShape, "square": lambda: Hypercube(2, 0.5)}


def _kv(args: str) -> dict:
    out = {}
    for part in filter(None, (a.strip() for a in args.split(","))):
        key, eq, val = part.partition("=")
        if not eq:
            raise ValueError(f"expected key=value, got {part!r}")
        out[key.strip().lower()] = val.strip()
    return out


def parse_stream(spec: str, reps, seed: int = 0) -> RewardStream:
    """Build a stream from ``"altaffine:L=5"``, ``"quad:n=2"`` or
    ``"rademacher:alpha=1,C=1,M=1,p=2,domain=interval"``.

    ``reps`` is a count or the global repetition indices of this batch.
    """
    kind, _, args = spec.strip().partition(":")
    kw = _kv(args)
    kind = kind.lower()
    idx = list(range(reps)) if isinstance(reps, (int, np.integer)) else list(reps)
    if kind == "altaffine":
        return AlternatingAffineStream(float(kw.get("l", 5.0)), len(idx))
    if kind == "quad":
        return QuadraticStream(
            rep_rngs(seed, idx, "quad"),
            n=int(kw.get("n", 2)),
            c_max=float(kw.get("c_max", 0.0)),
        )
    if kind == "rademacher":
        dom_name = kw.get("domain", "interval")
        if dom_name not in _DOMAINS:
            raise ValueError(f"unknown rademacher domain {dom_name!r}")
        return RademacherStream(
            rep_rngs(seed, idx, "rademacher"),
            _DOMAINS[dom_name](),
            M=float(kw.get("m", 1.0)),
            alpha=float(kw.get("alpha", 1.0)),
            C_alpha=float(kw.get("c", 1.0)),
            p=float(kw.get("p", 2.0)),
        )
    raise ValueError(f"unknown stream spec {spec!r}")
