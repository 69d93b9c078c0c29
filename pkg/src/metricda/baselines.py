"""Comparison learners for online optimization over convex sets.

Every learner is batched over ``B`` independent repetitions and exposes

* ``play(rngs) -> (B, n)`` the actions for the current round, and
* ``update(reward, actions, values=None) -> (B,)`` which feeds back the
  round's reward and returns the expected reward of the strategy that was
  played (equal to the realized reward for deterministic learners).

``values`` optionally carries the reward already evaluated on the learner's
grid, so that several learners can share one evaluation per round.

Gradients are taken of the *loss* ``l = -u``; rewards supply ``grad`` of ``u``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domains import Domain
from .dual_averaging import DensityState, default_learning_rate
from .errors import UnsupportedDomainError
from .potentials import parse_potential
from .rewards import QuadraticForm, box_qp_min

__all__ = [
    "greedy_step",
    "gp_step",
    "ewoo_step",
    "ewoo_step_quadratic",
    "FTALState",
    "ftal_step",
    "pinv_psd",
    "seminorm_projection",
    "Learner",
    "GreedyLearner",
    "GradientLearner",
    "EWOOLearner",
    "FTALLearner",
    "DALearner",
    "make_learner",
    "ALGORITHMS",
]

ALGORITHMS = ("greedy", "gp", "ogd", "ewoo", "ftal", "da")
PINV_CUTOFF = 1e-10


def _require_convex(domain: Domain):
    if not domain.is_box:
        raise UnsupportedDomainError(f"{domain!r} is not convex; gradient baselines need a convex set")


# -- single steps --------------------------------------------------------------------

def greedy_step(U, domain: Domain, m: int | None = None) -> np.ndarray:
    """Grid maximizer of the cumulative reward, lowest node index on ties.

    ``U`` has shape ``(N,)`` or ``(B, N)`` on ``domain.grid(m)``.
    """
    U = np.asarray(U, dtype=float)
    return domain.grid(m).nodes[np.argmax(U, axis=-1)]


def gp_step(s, grad, eta, domain: Domain) -> np.ndarray:
    """Projected gradient step ``proj(s - eta * grad)`` on a loss gradient."""
    _require_convex(domain)
    s = np.asarray(s, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if eta.ndim == 1:
        eta = eta[:, None]
    return domain.project(s - eta * np.asarray(grad, dtype=float))


def ewoo_step(L, alpha: float, domain: Domain, m: int | None = None) -> np.ndarray:
    """Mean of the density proportional to ``exp(-alpha L)`` on the grid.

    ``L`` is the cumulative loss on ``domain.grid(m)``, shape ``(N,)`` or ``(B, N)``.
    """
    grid = domain.grid(m)
    z = -alpha * np.asarray(L, dtype=float)
    z = z - z.max(axis=-1, keepdims=True)
    p = np.exp(z) * grid.weights
    p = p / p.sum(axis=-1, keepdims=True)
    return p @ grid.nodes


EWOO_WINDOW_LOG = 50.0


def ewoo_step_quadratic(form: QuadraticForm, alpha: float, domain: Domain, m: int | None = None) -> np.ndarray:
    """Mean of ``exp(alpha U)`` for a concave quadratic ``U`` on a box.

    The quadrature grid is fitted per member to the window where the density
    exceeds ``exp(-EWOO_WINDOW_LOG)`` times its peak. At the box maximizer
    ``s*`` optimality gives ``U(s) - U(s*) <= -lam |s - s*|^2 / 2`` with
    ``lam`` the smallest curvature of ``-U``, which bounds the window.
    """
    lo, hi = (np.asarray(v, dtype=float) for v in domain.bounds)
    n = form.dim
    m = int(m or 64)
    _, s_star = form.sup_box(lo, hi)
    lam = np.linalg.eigvalsh(-2.0 * form.A)[:, 0]
    with np.errstate(divide="ignore"):
        r = np.where(lam > 0, np.sqrt(2.0 * EWOO_WINDOW_LOG / (alpha * np.maximum(lam, 1e-300))), np.inf)
    wlo = np.maximum(lo, s_star - r[:, None])
    whi = np.minimum(hi, s_star + r[:, None])
    u = (np.arange(m) + 0.5) / m
    mesh = np.stack([g.ravel() for g in np.meshgrid(*([u] * n), indexing="ij")], axis=-1)
    nodes = wlo[:, None, :] + mesh[None] * (whi - wlo)[:, None, :]  # (B, m^n, n)
    quad = np.einsum("bpi,bij,bpj->bp", nodes, form.A, nodes)
    z = alpha * (quad + np.einsum("bi,bpi->bp", form.b, nodes))
    z -= z.max(axis=1, keepdims=True)
    w = np.exp(z)
    w /= w.sum(axis=1, keepdims=True)
    return np.einsum("bp,bpi->bi", w, nodes)


def pinv_psd(A, cutoff: float = PINV_CUTOFF) -> np.ndarray:
    """Pseudoinverse of a batch of symmetric PSD matrices.

    Eigenvalues below ``cutoff * lambda_max`` are treated as zero.
    """
    lam, V = np.linalg.eigh(np.asarray(A, dtype=float))
    top = lam.max(axis=-1, keepdims=True)
    keep = lam > cutoff * np.maximum(top, 0.0)
    inv = np.where(keep & (top > 0), 1.0 / np.where(keep, lam, 1.0), 0.0)
    return np.einsum("...ik,...k,...jk->...ij", V, inv, V)


def seminorm_projection(A, target, domain: Domain, cutoff: float = PINV_CUTOFF) -> np.ndarray:
    """``argmin_{s in S} (s - target)^T A (s - target)`` for PSD ``A``.

    When ``A`` is singular the minimizers form a face of the box; the one
    closest to ``target`` in Euclidean distance is returned. This is done by
    adding ``eps I`` with ``eps = cutoff * lambda_max`` (or ``I`` if ``A = 0``).
    """
    _require_convex(domain)
    A = np.asarray(A, dtype=float)
    target = np.asarray(target, dtype=float)
    n = target.shape[-1]
    top = np.linalg.eigvalsh(A)[..., -1]
    eps = np.where(top > 0, cutoff * top, 1.0)
    Hm = A + eps[:, None, None] * np.eye(n)
    lo, hi = domain.bounds
    x, _ = box_qp_min(2.0 * Hm, -2.0 * np.einsum("bij,bj->bi", Hm, target), lo, hi)
    return x


@dataclass
class FTALState:
    """Running statistics of Follow The Approximate Leader.

    ``A = sum g g^T`` and ``v = sum (g g^T s - g / beta)`` over past rounds.
    """

    A: np.ndarray  # (B, n, n)
    v: np.ndarray  # (B, n)
    s: np.ndarray  # (B, n)
    t: int = 0

    @classmethod
    def start(cls, s0) -> "FTALState":
        s0 = np.atleast_2d(np.asarray(s0, dtype=float))
        B, n = s0.shape
        return cls(np.zeros((B, n, n)), np.zeros((B, n)), s0.copy(), 0)


def ftal_step(state: FTALState, g, s, beta: float, domain: Domain) -> FTALState:
    """One update with loss gradient ``g`` observed at the played point ``s``.

    Rows with ``g = 0`` keep their statistics and their point.
    """
    _require_convex(domain)
    g = np.atleast_2d(np.asarray(g, dtype=float))
    s = np.atleast_2d(np.asarray(s, dtype=float))
    gg = g[:, :, None] * g[:, None, :]
    A = state.A + gg
    v = state.v + np.einsum("bij,bj->bi", gg, s) - g / beta
    target = np.einsum("bij,bj->bi", pinv_psd(A), v)
    new_s = seminorm_projection(A, target, domain)
    moved = np.any(g != 0, axis=1)
    new_s = np.where(moved[:, None], new_s, state.s)
    return FTALState(A, v, new_s, state.t + 1)


# -- batched learners ----------------------------------------------------------------

class Learner:
    """Interface shared by all algorithms."""

    name = "learner"
    randomized = False

    def play(self, rngs) -> np.ndarray:
        raise NotImplementedError

    def update(self, reward, actions, values=None) -> np.ndarray:
        raise NotImplementedError


class GreedyLearner(Learner):
    """Play the grid maximizer of the cumulative reward (follow the leader)."""

    name = "greedy"

    def __init__(self, domain: Domain, batch: int, m: int | None = None):
        self.domain = domain
        self.grid = domain.grid(m)
        self.m = m
        self.U = np.zeros((batch, self.grid.size))

    def play(self, rngs=None):
        return self.grid.nodes[np.argmax(self.U, axis=1)]

    def update(self, reward, actions, values=None):
        self.U += reward.on(self.grid.nodes) if values is None else values
        return reward.at(actions)


class GradientLearner(Learner):
    """Projected gradient ascent on rewards (descent on losses).

    The step taken after observing round ``t`` uses ``eta_t = schedule(t)``:
    ``1/sqrt(t)`` for GP and ``1/(H t)`` for the strongly convex variant.
    """

    def __init__(self, domain: Domain, batch: int, schedule, name: str = "gp"):
        _require_convex(domain)
        self.domain = domain
        self.schedule = schedule
        self.name = name
        lo, hi = domain.bounds
        self.s = np.tile(0.5 * (lo + hi), (batch, 1))
        self.t = 0

    def play(self, rngs=None):
        return self.s.copy()

    def update(self, reward, actions, values=None):
        self.t += 1
        self.s = gp_step(actions, -reward.grad(actions), self.schedule(self.t), self.domain)
        return reward.at(actions)


class EWOOLearner(Learner):
    """Play the mean of ``exp(alpha U_t)`` computed by quadrature.

    While every reward carries a concave quadratic form the cumulative form is
    kept and integrated on a window fitted to the density; otherwise the
    cumulative reward lives on the fixed grid.
    """

    name = "ewoo"

    def __init__(self, domain: Domain, batch: int, alpha: float, m: int | None = None):
        _require_convex(domain)
        self.domain = domain
        self.alpha = float(alpha)
        self.grid = domain.grid(m)
        self.m = m
        self.U = np.zeros((batch, self.grid.size))
        self.form: QuadraticForm | None = QuadraticForm.zeros(batch, domain.dim)

    def play(self, rngs=None):
        if self.form is not None:
            return ewoo_step_quadratic(self.form, self.alpha, self.domain, self.m)
        return ewoo_step(-self.U, self.alpha, self.domain, self.m)

    def update(self, reward, actions, values=None):
        self.U += reward.on(self.grid.nodes) if values is None else values
        f = getattr(reward, "form", None)
        if self.form is not None and f is not None and np.all(np.linalg.eigvalsh(f.A) <= 1e-12):
            self.form = self.form + f
        else:
            self.form = None
        return reward.at(actions)


class FTALLearner(Learner):
    name = "ftal"

    def __init__(self, domain: Domain, batch: int, beta: float):
        _require_convex(domain)
        self.domain = domain
        self.beta = float(beta)
        lo, hi = domain.bounds
        self.state = FTALState.start(np.tile(0.5 * (lo + hi), (batch, 1)))

    def play(self, rngs=None):
        return self.state.s.copy()

    def update(self, reward, actions, values=None):
        self.state = ftal_step(self.state, -reward.grad(actions), actions, self.beta, self.domain)
        return reward.at(actions)


class DALearner(Learner):
    """Dual averaging; actions are sampled from the current density."""

    randomized = True

    def __init__(self, state: DensityState, name: str = "da"):
        self.state = state
        self.name = name
        self.grid = state.grid

    def play(self, rngs):
        return self.state.sample(rngs)

    def update(self, reward, actions, values=None):
        return self.state.step(reward, values)


def make_learner(selector: str, domain: Domain, batch: int, *, m: int | None = None, M: float = 1.0,
                 alpha_holder: float = 1.0, theta: float | None = None, H: float | None = None,
                 G: float | None = None, exp_concavity: float | None = None, schedule=None) -> Learner:
    """Build a learner from ``greedy | gp | ogd | ewoo | ftal | da[:exp|:rho:<r>]``.

    Stream constants: ``M`` bounds ``sup |u_t|``, ``alpha_holder`` is the
    continuity exponent, ``H`` the strong convexity and ``G`` the gradient
    bound of the losses, ``exp_concavity`` their exp-concavity parameter.
    """
    sel = selector.strip().lower()
    kind, _, arg = sel.partition(":")
    if kind == "greedy":
        return GreedyLearner(domain, batch, m)
    if kind == "gp":
        return GradientLearner(domain, batch, lambda t: 1.0 / np.sqrt(t), "gp")
    if kind == "ogd":
        if H is None:
            raise ValueError("ogd needs the strong convexity constant H")
        return GradientLearner(domain, batch, lambda t: 1.0 / (H * t), "ogd")
    if kind == "ewoo":
        if exp_concavity is None:
            raise ValueError("ewoo needs the exp-concavity parameter")
        return EWOOLearner(domain, batch, exp_concavity, m)
    if kind == "ftal":
        if exp_concavity is None or G is None:
            raise ValueError("ftal needs exp-concavity and the gradient bound G")
        beta = min(1.0 / (8 * G * domain.diameter), exp_concavity / 2)
        return FTALLearner(domain, batch, beta)
    if kind == "da":
        potential = parse_potential(arg or "exp")
        if schedule is None:
            reg = domain.regularity_constants()
            schedule = default_learning_rate(potential, M, reg, alpha_holder, theta)
        state = DensityState(potential, domain, schedule, M, m=m, batch=batch)
        return DALearner(state, f"da:{potential.name}")
    raise ValueError(f"unknown algorithm {selector!r}; choose from {ALGORITHMS}")
