"""Dual averaging over probability densities.

The play after ``t`` rounds is the density ``x(s) = phi(eta_t (U_t(s) + nu))_+``
where ``U_t`` is the cumulative reward and the scalar ``nu`` makes ``x``
integrate to one. Everything is computed on a quadrature grid and is batched
over independent repetitions: ``U`` has shape ``(B, N)`` and ``nu`` shape
``(B,)``. A state created with ``batch=None`` is a single repetition and its
outputs drop the batch axis.

Internally the solver works with the shifted variable ``w = nu + max U`` so
that ``eta * (U - max U + w)`` stays of order one however large ``t`` is.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .domains import Domain, Grid, Regularity
from .errors import EnvelopeError, SolverError, StaleStateError, StreamContractError
from .potentials import ExponentialPotential, Potential
from .rewards import QuadraticForm, Reward

__all__ = [
    "LearningRate",
    "entropy_learning_rate",
    "power_learning_rate",
    "default_learning_rate",
    "CumulativeReward",
    "DensityState",
    "solve_nu_star",
    "warm_start_interval",
    "general_warm_start_interval",
    "density_at",
    "entropy_closed_form",
    "dual_map",
    "da_step",
    "sample_action",
    "consistency_probe",
]

WIDTH_TOL = 1e-12
MIN_ACCEPTANCE = 1e-4


@dataclass(frozen=True)
class LearningRate:
    """``eta_t = eta * t^-beta``, optionally times ``sqrt(log t)``.

    With the log factor the raw sequence rises until ``t = exp(1/(2 beta))``;
    it is held at its peak value before that point so the schedule is
    non-increasing for every ``t >= 1``. ``eta_0`` equals ``eta_1``.
    """

    eta: float
    beta: float = 0.5
    log_factor: bool = False

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.log_factor and self.beta == 0:
            raise ValueError("log factor needs beta > 0 to be non-increasing")

    def __call__(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 1.0)
        if self.log_factor:
            t = np.maximum(t, math.exp(0.5 / self.beta))
            out = self.eta * np.sqrt(np.log(t)) * t ** (-self.beta)
        else:
            out = self.eta * t ** (-self.beta)
        return float(out) if out.ndim == 0 else out


def entropy_learning_rate(M: float, reg: Regularity, alpha: float = 1.0, theta: float | None = None) -> LearningRate:
    """``eta sqrt(log t / t)`` with ``eta`` minimizing the entropy regret bound.

    ``eta = (1/M) sqrt((C0 / (2 c0)) (log(theta^{-Q/alpha} / c0) + Q/(2 alpha)))``
    balances the regularizer and stability terms of the ball-construction bound;
    the resulting constant is the one reported by :func:`regret.bound_entropy`.
    """
    Q, c0, C0, r0 = reg
    theta = r0 / 2 if theta is None else theta
    A = math.log(theta ** (-Q / alpha) / c0) + Q / (2 * alpha)
    eta = math.sqrt(C0 / (2 * c0) * A) / M
    return LearningRate(eta, 0.5, True)


def power_learning_rate(potential: Potential, M: float, reg: Regularity, alpha: float = 1.0, theta: float | None = None) -> LearningRate:
    """``eta t^-beta`` tuned for ``f_phi(x) <= C_phi x^(1+kappa)``.

    ``beta = 1 / (2 + kappa Q / alpha)`` and
    ``eta = (1/M) ((1 + kQ/a)/(2 + kQ/a) C0 C_phi / (c0^(1+kappa) theta^(kappa Q)))^(1/2)``.
    """
    Q, c0, C0, r0 = reg
    theta = r0 / 2 if theta is None else theta
    k = potential.kappa
    e = k * Q / alpha
    eta = math.sqrt((1 + e) / (2 + e) * C0 * potential.c_phi / (c0 ** (1 + k) * theta ** (k * Q))) / M
    return LearningRate(eta, 1.0 / (2 + e), False)


def default_learning_rate(potential: Potential, M: float, reg: Regularity, alpha: float = 1.0, theta: float | None = None) -> LearningRate:
    if isinstance(potential, ExponentialPotential):
        return entropy_learning_rate(M, reg, alpha, theta)
    return power_learning_rate(potential, M, reg, alpha, theta)


class CumulativeReward:
    """Running sum of rewards on the grid, plus a closed form while one exists.

    ``form`` holds the exact quadratic (or affine) cumulative reward as long as
    every added reward carried one; it becomes ``None`` otherwise.
    """

    def __init__(self, grid: Grid, batch: int, M: float, n: int):
        self.values = np.zeros((batch, grid.size))
        self.t = 0
        self.M = float(M)
        self.form: QuadraticForm | None = QuadraticForm.zeros(batch, n)
        self.revision = 0

    @property
    def representation(self) -> str:
        if self.form is None:
            return "gridded"
        return "affine" if self.form.is_affine else "quadratic"

    def add(self, values: np.ndarray, form: QuadraticForm | None = None):
        self.values += values
        if self.form is not None and form is not None:
            self.form = self.form + form
        else:
            self.form = None
        self.t += 1
        self.revision += 1


def warm_start_interval(nu_prev, eta_prev: float, eta_next: float, M: float, t: int):
    """Bracket for the next dual variable when rewards take values in ``[0, M]``.

    ``[(eta_t/eta_{t+1}) nu_t - M, (eta_t/eta_{t+1}) nu_t + ((eta_t - eta_{t+1})/eta_{t+1}) t M]``
    """
    r = eta_prev / eta_next
    nu_prev = np.asarray(nu_prev, dtype=float)
    return r * nu_prev - M, r * nu_prev + (r - 1.0) * t * M


def general_warm_start_interval(nu_prev, eta_prev, eta_next, U_inf, U_sup, u_inf, u_sup):
    """Bracket valid for rewards of any sign.

    Uses the range of the previous cumulative reward and of the new reward::

        lo = r nu - sup u + (r - 1) inf U
        hi = r nu - inf u + (r - 1) sup U,      r = eta_t / eta_{t+1}

    It reduces to :func:`warm_start_interval` when ``0 <= u <= M`` and
    ``0 <= U_t <= t M``.
    """
    r = eta_prev / eta_next
    nu_prev = np.asarray(nu_prev, dtype=float)
    return r * nu_prev - u_sup + (r - 1.0) * U_inf, r * nu_prev - u_inf + (r - 1.0) * U_sup


def _mass(potential: Potential, eta, Up, w, weights):
    z = eta[:, None] * (Up + w[:, None])
    return potential._phi(z) @ weights


def _solve_shifted(potential, eta, Up, weights, lo, hi, tol, method, max_iter=200):
    """Find ``w`` with ``sum_i weights_i phi(eta (Up_i + w))_+ = 1`` per batch row.

    ``Up`` must satisfy ``max(Up) = 0`` row-wise. ``method`` is ``"bisection"``
    (plain halving) or ``"newton"`` (Newton steps accepted only when they stay
    strictly inside the current bracket, halving otherwise).
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    f_lo = _mass(potential, eta, Up, lo, weights) - 1.0
    f_hi = _mass(potential, eta, Up, hi, weights) - 1.0
    for _ in range(64):
        bad_lo = f_lo > 0
        bad_hi = f_hi < 0
        if not (bad_lo.any() or bad_hi.any()):
            break
        width = np.maximum(hi - lo, 1.0 / eta)
        lo = np.where(bad_lo, lo - width, lo)
        hi = np.where(bad_hi, hi + width, hi)
        f_lo = np.where(bad_lo, _mass(potential, eta, Up, lo, weights) - 1.0, f_lo)
        f_hi = np.where(bad_hi, _mass(potential, eta, Up, hi, weights) - 1.0, f_hi)
    else:
        raise SolverError(f"bracket does not straddle 1: f(lo)-1={f_lo}, f(hi)-1={f_hi}")

    w = np.where(np.abs(f_lo) <= tol, lo, np.where(np.abs(f_hi) <= tol, hi, 0.5 * (lo + hi)))
    for _ in range(max_iter):
        z = eta[:, None] * (Up + w[:, None])
        F = potential._phi(z) @ weights - 1.0
        done = (np.abs(F) <= tol) | (hi - lo <= WIDTH_TOL * np.maximum(1.0, np.abs(w)))
        if done.all():
            return w
        hi = np.where(F > 0, w, hi)
        lo = np.where(F <= 0, w, lo)
        mid = 0.5 * (lo + hi)
        if method == "newton":
            dF = eta * (potential._phi_prime(z) @ weights)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = w - F / dF
            ok = np.isfinite(step) & (step > lo) & (step < hi)
            nxt = np.where(ok, step, mid)
        else:
            nxt = mid
        w = np.where(done, w, nxt)
    raise SolverError("dual variable solver did not converge")


def _closed_form_shifted(eta, Up, weights):
    # exp potential: integral of exp(eta (Up + w) - 1) = 1
    return (1.0 - np.log(np.exp(eta[:, None] * Up) @ weights)) / eta


def dual_map(potential: Potential, xi, grid: Grid, tol: float = 1e-10, method: str = "auto"):
    """Density ``phi(xi + nu)_+`` normalized on the grid (the map ``Dh*``)."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    eta = np.ones(xi.shape[0])
    top = xi.max(axis=1)
    Up = xi - top[:, None]
    if method == "auto":
        method = "closed" if isinstance(potential, ExponentialPotential) else "newton"
    if method == "closed":
        w = _closed_form_shifted(eta, Up, grid.weights)
    else:
        y1 = float(potential.phi_inverse(1.0))
        lo = np.full(xi.shape[0], y1)
        hi = y1 - Up.min(axis=1)
        w = _solve_shifted(potential, eta, Up, grid.weights, lo, hi, tol, method)
    return potential._phi(Up + w[:, None])


class DensityState:
    """Dual averaging state for ``batch`` independent repetitions.

    Parameters
    ----------
    potential : Potential
    domain : Domain
    schedule : callable
        Learning rate ``t -> eta_t``; must be positive and non-increasing.
    M : float
        Declared bound on ``sup |u_t|``, audited each round.
    m : int, optional
        Grid resolution per axis.
    batch : int, optional
        Number of repetitions; ``None`` for a single unbatched state.
    solver : {"auto", "closed", "newton", "bisection"}
        ``"auto"`` uses the closed form for the exponential potential and the
        safeguarded Newton-bisection otherwise.
    contract : {"error", "warn", "off"}
        Reaction when a reward exceeds ``M`` on the grid.
    """

    def __init__(self, potential: Potential, domain: Domain, schedule, M: float, m: int | None = None,
                 batch: int | None = None, solver: str = "auto", tol: float = 1e-10,
                 contract: str = "error"):
        self.potential = potential
        self.domain = domain
        self.grid = domain.grid(m)
        self.schedule = schedule
        self.batched = batch is not None
        self.B = 1 if batch is None else int(batch)
        self.U = CumulativeReward(self.grid, self.B, M, domain.dim)
        self.tol = tol
        self.contract = contract
        if solver == "auto":
            solver = "closed" if isinstance(potential, ExponentialPotential) else "newton"
        self.solver = solver
        self.eta = float(schedule(1))  # eta_0 := eta_1
        self._w = np.full(self.B, float(potential.phi_inverse(1.0)) / self.eta)
        self._top = np.zeros(self.B)
        self._solved_revision = self.U.revision
        self._density_cache = None

    # -- basic views ------------------------------------------------------------
    @property
    def t(self) -> int:
        return self.U.t

    @property
    def nu(self):
        nu = self._w - self._top
        return nu if self.batched else float(nu[0])

    @property
    def eta_t(self) -> float:
        return self.eta

    def _out(self, arr):
        return arr if self.batched else arr[0]

    def _check_fresh(self):
        if self._solved_revision != self.U.revision:
            raise StaleStateError("cumulative reward changed since the dual variable was solved")

    def _grid_density(self) -> np.ndarray:
        self._check_fresh()
        if self._density_cache is None:
            z = self.eta * (self.U.values - self._top[:, None] + self._w[:, None])
            self._density_cache = self.potential._phi(z)
        return self._density_cache

    def density_on_grid(self) -> np.ndarray:
        return self._out(self._grid_density())

    def density_at(self, points) -> np.ndarray:
        """Density at arbitrary points of the domain.

        Uses the closed-form cumulative reward when available and the value of
        the containing grid cell otherwise.
        """
        self._check_fresh()
        pts = np.atleast_2d(self.domain.check(points))
        if self.U.form is not None:
            U = self.U.form.on(pts)
        else:
            idx = self.grid.locate(pts)
            U = self.U.values[:, idx]
        z = self.eta * (U - self._top[:, None] + self._w[:, None])
        return self._out(self.potential._phi(z))

    def mass(self) -> np.ndarray:
        return self._out(self._grid_density() @ self.grid.weights)

    # -- solving ------------------------------------------------------------------
    def _solve(self, lo_nu=None, hi_nu=None, method=None):
        method = method or self.solver
        U = self.U.values
        top = U.max(axis=1)
        Up = U - top[:, None]
        eta = np.full(self.B, self.eta)
        if method == "closed":
            if not isinstance(self.potential, ExponentialPotential):
                raise ValueError("closed form exists only for the exponential potential")
            w = _closed_form_shifted(eta, Up, self.grid.weights)
        else:
            if lo_nu is None:
                y1 = float(self.potential.phi_inverse(1.0))
                lo_w = np.full(self.B, y1 / self.eta)
                hi_w = y1 / self.eta - Up.min(axis=1)
            else:
                lo_w, hi_w = lo_nu + top, hi_nu + top
            w = _solve_shifted(self.potential, eta, Up, self.grid.weights, lo_w, hi_w, self.tol, method)
        self._w, self._top = w, top
        self._solved_revision = self.U.revision
        self._density_cache = None

    def resolve(self, method: str | None = None):
        """Re-solve the dual variable from scratch (cold bracket)."""
        self._solve(method=method)
        return self.nu

    # -- the update ---------------------------------------------------------------
    def _audit(self, values):
        if self.contract == "off":
            return
        worst = float(np.max(np.abs(values)))
        if worst > self.U.M * (1 + 1e-9):
            msg = f"reward sup {worst:.6g} exceeds declared M={self.U.M:.6g} at round {self.t + 1}"
            if self.contract == "error":
                raise StreamContractError(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=3)

    def step(self, reward, values=None):
        """Add one reward, advance the learning rate and re-solve.

        Returns the expected reward of the density that was in force during
        the round (``<u_t, x_t>`` by quadrature).
        """
        if values is None:
            values = reward.on(self.grid.nodes)
        values = np.broadcast_to(np.asarray(values, dtype=float), (self.B, self.grid.size))
        self._audit(values)
        expected = (self._grid_density() * values) @ self.grid.weights
        U_inf = self.U.values.min(axis=1)
        U_sup = self.U.values.max(axis=1)
        nu_prev = self._w - self._top
        t_old = self.t
        eta_prev = self.eta
        form = getattr(reward, "form", None)
        if form is not None and form.batch != self.B:
            form = QuadraticForm(*(np.broadcast_to(a, (self.B,) + a.shape[1:]).copy() for a in (form.A, form.b, form.c)))
        self.U.add(values, form)
        self.eta = float(self.schedule(t_old + 1))
        if self.eta > eta_prev * (1 + 1e-12):
            raise ValueError("learning-rate schedule must be non-increasing")
        lo, hi = general_warm_start_interval(
            nu_prev, eta_prev, self.eta, U_inf, U_sup, values.min(axis=1), values.max(axis=1)
        )
        self.last_bracket = (lo, hi)
        self._solve(lo, hi)
        return self._out(expected)

    # -- sampling -----------------------------------------------------------------
    def sample(self, rng, size: int | None = None) -> np.ndarray:
        """Draw actions, one stream per batch row.

        ``rng`` is a Generator (shared by all rows, in row order) or a sequence
        of Generators, one per row. A state with a single row may be given
        ``R`` generators: it then draws once per generator from its one
        density, which is how repetitions share a deterministic run. Returns
        ``(R, n)`` or ``(R, size, n)`` for batched states and drops the leading
        axis otherwise.
        """
        self._check_fresh()
        rngs = [rng] * self.B if isinstance(rng, np.random.Generator) else list(rng)
        if len(rngs) != self.B and self.B != 1:
            raise ValueError("need one generator per batch row")
        k = 1 if size is None else int(size)
        form = self.U.form
        if isinstance(self.potential, ExponentialPotential) and form is not None and form.is_affine and self.domain.is_box:
            out = self._sample_truncated_exponential(rngs, k)
        elif form is not None and self.domain.is_box:
            out = self._sample_rejection(rngs, k)
        else:
            out = self._sample_cells(rngs, k)
        if size is None:
            out = out[:, 0]
        return out if (self.batched or len(rngs) != 1) else out[0]

    def _row(self, i: int) -> int:
        return 0 if self.B == 1 else i

    def _sample_truncated_exponential(self, rngs, k):
        lo, hi = self.domain.bounds
        rate = self.eta * self.U.form.b  # (B, n)
        u = np.stack([r.random((k, self.domain.dim)) for r in rngs])  # (R, k, n)
        return truncated_exponential_icdf(u, rate[:, None, :], lo, hi)

    def _sample_rejection(self, rngs, k):
        lo, hi = self.domain.bounds
        sup, _ = self.U.form.sup_box(lo, hi)
        env = self.potential._phi(self.eta * (sup - self._top + self._w))
        acc = 1.0 / np.maximum(env, 1e-300)
        if np.any(acc < MIN_ACCEPTANCE):
            raise EnvelopeError(f"acceptance rate {acc.min():.2e} below {MIN_ACCEPTANCE}; rebuild the envelope on a finer grid")
        R, n = len(rngs), self.domain.dim
        rows = np.array([self._row(i) for i in range(R)])
        F = self.U.form
        A, b, c = F.A[rows], F.b[rows], F.c[rows]
        shift = (self._w - self._top)[rows]
        env_r = env[rows]
        batch = max(8, int(2 * k / acc[rows].min()) + 8)
        got = [[] for _ in range(R)]
        n_got = np.zeros(R, dtype=int)
        while True:
            need = np.flatnonzero(n_got < k)
            if need.size == 0:
                break
            # each row consumes its own generator: proposals, then acceptance uniforms
            draws = [(rngs[i].random((batch, n)), rngs[i].random(batch)) for i in need]
            cand = lo + (hi - lo) * np.stack([d[0] for d in draws])
            u = np.stack([d[1] for d in draws])
            U = (np.einsum("rpi,rij,rpj->rp", cand, A[need], cand) + np.einsum("rpi,ri->rp", cand, b[need])
                 + c[need, None])
            dens = self.potential._phi(self.eta * (U + shift[need, None]))
            keep = u * env_r[need, None] < dens
            for j, i in enumerate(need):
                got[i].append(cand[j][keep[j]])
                n_got[i] += int(keep[j].sum())
        return np.stack([np.concatenate(g)[:k] for g in got])

    def _sample_cells(self, rngs, k):
        p = self._grid_density() * self.grid.weights
        cdf = np.cumsum(p, axis=1)
        cdf = cdf / cdf[:, -1:]
        R = len(rngs)
        u = np.stack([r.random(k) for r in rngs])
        if self.B == 1:
            idx = np.searchsorted(cdf[0], u, side="right")
        else:
            # one searchsorted over all rows: row b lives in [b, b + 1]
            rows = np.arange(R)[:, None]
            flat = np.searchsorted((cdf + rows).ravel(), (u + rows).ravel(), side="right").reshape(R, k)
            idx = flat - rows * self.grid.size
        idx = np.minimum(idx, self.grid.size - 1)
        jitter = np.stack([r.random((k, self.domain.dim)) for r in rngs])
        return self.grid.nodes[idx] + (jitter - 0.5) * self.grid.h


def truncated_exponential_icdf(u, rate, lo, hi):
    """Inverse CDF of the density proportional to ``exp(rate * s)`` on ``[lo, hi]``."""
    u, rate = np.broadcast_arrays(np.asarray(u, float), np.asarray(rate, float))
    lo = np.broadcast_to(lo, u.shape)
    hi = np.broadcast_to(hi, u.shape)
    width = hi - lo
    aw = rate * width
    out = lo + u * width
    pos = aw > 1e-12
    neg = aw < -1e-12
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        out = np.where(pos, hi + np.log(u + (1 - u) * np.exp(-aw)) / rate, out)
        out = np.where(neg, lo + np.log1p(u * np.expm1(aw)) / rate, out)
    return np.clip(out, lo, hi)


# -- functional interface -----------------------------------------------------------

def solve_nu_star(state: DensityState, tol: float | None = None, method: str = "bisection"):
    """Solve the normalization equation from a cold bracket and return ``nu``."""
    if tol is not None:
        state.tol = tol
    return state.resolve(method)


def density_at(state: DensityState, s):
    return state.density_at(s)


def da_step(state: DensityState, u_t: Reward) -> DensityState:
    state.step(u_t)
    return state


def sample_action(state: DensityState, rng):
    return state.sample(rng)


def entropy_closed_form(U, eta: float, domain: Domain, m: int | None = None) -> np.ndarray:
    """``exp(eta U) / int exp(eta U) dmu`` on the grid, computed after subtracting the max."""
    vals = U.values if isinstance(U, CumulativeReward) else np.asarray(U, dtype=float)
    grid = domain.grid(m)
    z = eta * vals
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / (e @ grid.weights)[..., None] if e.ndim > 1 else e / (e @ grid.weights)


def consistency_probe(U, potential: Potential, scale: float, delta: float, domain: Domain,
                      m: int | None = None, rel_tol: float = 1e-12) -> float:
    """Mass that ``Dh*(scale * U)`` puts within ``delta`` of the maximizers of ``U``.

    ``U`` is given by its values on ``domain.grid(m)``.
    """
    grid = domain.grid(m)
    U = np.asarray(U, dtype=float)
    x = dual_map(potential, scale * U, grid)[0]
    top = U.max()
    arg = grid.nodes[U >= top - rel_tol * max(1.0, abs(top))]
    near = np.zeros(grid.size, dtype=bool)
    for chunk in np.array_split(arg, max(1, len(arg) // 256)):
        d = domain._distance(grid.nodes[:, None, :], chunk[None, :, :])
        near |= (d <= delta).any(axis=1)
    return float((x * grid.weights)[near].sum())
