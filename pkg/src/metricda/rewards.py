"""Reward functions shared by streams, learners and games.

All rewards are *batched*: a reward with ``batch = B`` describes ``B``
independent functions, one per experiment repetition. ``on(points)`` evaluates
every member at common points and returns shape ``(B, P)``; ``at(s)`` evaluates
member ``b`` at its own point ``s[b]`` and returns shape ``(B,)``.

Rewards that are quadratic in the action carry a :class:`QuadraticForm`, which
lets cumulative rewards be summed in closed form and maximized exactly over
boxes.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "QuadraticForm",
    "box_qp_min",
    "Reward",
    "QuadraticReward",
    "FunctionReward",
    "ScaledReward",
]


@dataclass
class QuadraticForm:
    """``U(s) = s^T A s + b^T s + c`` for a batch of symmetric ``A``."""

    A: np.ndarray  # (B, n, n)
    b: np.ndarray  # (B, n)
    c: np.ndarray  # (B,)

    @classmethod
    def zeros(cls, batch: int, n: int) -> "QuadraticForm":
        return cls(np.zeros((batch, n, n)), np.zeros((batch, n)), np.zeros(batch))

    @property
    def batch(self) -> int:
        return self.b.shape[0]

    @property
    def dim(self) -> int:
        return self.b.shape[1]

    @property
    def is_affine(self) -> bool:
        return not np.any(self.A)

    def on(self, points) -> np.ndarray:
        x = np.asarray(points, dtype=float)
        lin = self.b @ x.T + self.c[:, None]
        if self.is_affine:
            return lin
        feats = (x[:, :, None] * x[:, None, :]).reshape(x.shape[0], -1)
        return self.A.reshape(self.batch, -1) @ feats.T + lin

    def at(self, s) -> np.ndarray:
        """Member ``b`` at ``s[b]``; a single-member form broadcasts over rows of ``s``."""
        s = np.asarray(s, dtype=float)
        As = (self.A @ s[..., None])[..., 0]
        return np.sum(s * As, axis=-1) + np.sum(self.b * s, axis=-1) + self.c

    def grad(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return 2.0 * (self.A @ s[..., None])[..., 0] + self.b

    def __add__(self, other: "QuadraticForm") -> "QuadraticForm":
        return QuadraticForm(self.A + other.A, self.b + other.b, self.c + other.c)

    def scaled(self, k) -> "QuadraticForm":
        k = np.broadcast_to(np.asarray(k, dtype=float), (self.batch,))
        return QuadraticForm(self.A * k[:, None, None], self.b * k[:, None], self.c * k)

    def sup_box(self, lo, hi) -> tuple[np.ndarray, np.ndarray]:
        """Exact maximum over the box ``[lo, hi]``; requires concave members."""
        if self.is_affine:
            n = self.dim
            lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,))
            hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,))
            # an affine function peaks at the vertex picked coordinate-wise by the sign of b
            x = np.where(self.b > 0, hi, lo)
            return np.sum(self.b * x, axis=1) + self.c, x
        x, fmin = box_qp_min(-2.0 * self.A, -self.b, lo, hi)
        return self.c - fmin, x


def box_qp_min(H, g, lo, hi, feas_tol: float = 1e-10):
    """Minimize ``0.5 x^T H x + g^T x`` over a box for a batch of PSD ``H``.

    Exact for small dimensions: every pattern of free / lower / upper
    coordinates is solved and the best feasible candidate kept. Among the
    minimizers there is one whose free block of ``H`` is nonsingular, so the
    solve of that pattern recovers the optimum. Candidates from ill-conditioned
    blocks are either infeasible or scored by their exact objective, so they
    never displace it.

    Returns
    -------
    x : ndarray, shape (B, n)
    fmin : ndarray, shape (B,)
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    B, n = g.shape
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,))
    best_x = np.zeros((B, n))
    best_f = np.full(B, np.inf)
    span = hi - lo
    for free, fixed, vals in _box_patterns(n):
        # all assignments of the fixed coordinates share one stacked solve
        K = vals.shape[0]
        x = np.empty((K, B, n))
        x[:, :, fixed] = np.where(vals, hi[fixed], lo[fixed])[:, None, :]
        ok = np.ones((K, B), dtype=bool)
        if free.size:
            Hff = H[:, free[:, None], free[None, :]]
            rhs = np.broadcast_to(-g[:, free], (K, B, free.size))
            if fixed.size:
                rhs = rhs - np.einsum("bij,kbj->kbi", H[:, free[:, None], fixed[None, :]], x[:, :, fixed])
            xf = _psd_solve(np.broadcast_to(Hff, (K,) + Hff.shape).reshape(K * B, free.size, free.size),
                            rhs.reshape(K * B, free.size)).reshape(K, B, free.size)
            tol = feas_tol * span[free]
            ok = np.all((xf >= lo[free] - tol) & (xf <= hi[free] + tol), axis=2)
            x[:, :, free] = np.clip(xf, lo[free], hi[free])
        f = 0.5 * np.einsum("kbi,bij,kbj->kb", x, H, x) + np.einsum("bi,kbi->kb", g, x)
        for j in range(K):
            take = ok[j] & (f[j] < best_f)
            best_f = np.where(take, f[j], best_f)
            best_x[take] = x[j, take]
    return best_x, best_f


_PATTERNS: dict[int, list] = {}


def _box_patterns(n: int) -> list:
    """Per free set: free indices, fixed indices and the 0/1 (lower/upper) assignments."""
    if n not in _PATTERNS:
        out = []
        for mask in itertools.product((True, False), repeat=n):
            free = np.flatnonzero(mask)
            fixed = np.flatnonzero(~np.array(mask))
            combos = list(itertools.product((False, True), repeat=fixed.size))
            vals = np.array(combos, dtype=bool).reshape(len(combos), fixed.size)
            out.append((free, fixed, vals))
        _PATTERNS[n] = out
    return _PATTERNS[n]


def _psd_solve(H, rhs):
    """Batched solve, falling back to the pseudoinverse when a block is singular."""
    try:
        return np.linalg.solve(H, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        return np.einsum("bij,bj->bi", np.linalg.pinv(H, hermitian=True), rhs)


class Reward:
    """Batched reward; subclasses implement :meth:`on` and :meth:`at`."""

    batch: int = 1
    form: QuadraticForm | None = None

    def on(self, points) -> np.ndarray:
        raise NotImplementedError

    def at(self, s) -> np.ndarray:
        raise NotImplementedError

    def grad(self, s) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no analytic gradient")


class QuadraticReward(Reward):
    def __init__(self, form: QuadraticForm):
        self.form = form
        self.batch = form.batch

    def on(self, points):
        return self.form.on(points)

    def at(self, s):
        return self.form.at(s)

    def grad(self, s):
        return self.form.grad(s)


class FunctionReward(Reward):
    """The same function for every batch member.

    ``fn`` maps points of shape ``(..., n)`` to values of shape ``(...)``.
    """

    def __init__(self, fn: Callable, batch: int = 1, grad: Callable | None = None):
        self.fn = fn
        self.batch = batch
        self._grad = grad

    def on(self, points):
        vals = np.asarray(self.fn(np.asarray(points, dtype=float)), dtype=float)
        return np.broadcast_to(vals, (self.batch, vals.shape[-1]))

    def at(self, s):
        return np.asarray(self.fn(np.asarray(s, dtype=float)), dtype=float)

    def grad(self, s):
        if self._grad is None:
            return super().grad(s)
        return np.asarray(self._grad(np.asarray(s, dtype=float)))


class ScaledReward(Reward):
    """``u_b(s) = coeff[b] * base(s)`` with a fixed base function.

    ``base_on`` caches base values at the last set of points it saw, since
    learners evaluate on the same quadrature grid every round.
    """

    def __init__(self, base: Callable, coeff, cache: dict | None = None):
        self.base = base
        self.coeff = np.asarray(coeff, dtype=float)
        self.batch = self.coeff.shape[0]
        self._cache = {} if cache is None else cache

    def base_on(self, points) -> np.ndarray:
        key = id(points)
        hit = self._cache.get(key)
        if hit is None or hit[0] is not points:
            hit = (points, np.asarray(self.base(np.asarray(points, dtype=float)), dtype=float))
            self._cache[key] = hit
        return hit[1]

    def on(self, points):
        return self.coeff[:, None] * self.base_on(points)[None, :]

    def at(self, s):
        return self.coeff * np.asarray(self.base(np.asarray(s, dtype=float)), dtype=float)
