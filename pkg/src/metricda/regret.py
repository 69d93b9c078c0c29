"""Regret accounting, theoretical bounds and rate fitting.

Regret against the best fixed action is ``R_t = sup_s U_t(s) - sum_tau r_tau``
where ``U_t`` is the cumulative reward and ``r_tau`` either the realized reward
``u_tau(s_tau)`` or the expected reward ``<u_tau, x_tau>`` of a mixed strategy.
The supremum is exact on boxes while every reward carries a quadratic form
(affine or concave) and is taken over the quadrature grid otherwise.

Bound calculators return bounds on the time-average regret ``R_t / t`` unless
their name says otherwise.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .domains import Domain
from .rewards import QuadraticForm

__all__ = [
    "RegretLedger",
    "reward_sup_norm",
    "worst_case_regret",
    "box_vertices",
    "bound_general_da",
    "bound_general_da_power",
    "bound_fdiv",
    "bound_fdiv_scan",
    "theta_grid",
    "bound_entropy",
    "bound_lower",
    "bound_lower_holder",
    "bound_cor_d1",
    "cor_d1_exponent",
    "bound_gp",
    "bound_ogd",
    "bound_ftal",
    "bound_ewoo",
    "fit_rate",
    "log_checkpoints",
]


def box_vertices(lo, hi) -> np.ndarray:
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    return np.array([np.where(bits, hi, lo) for bits in itertools.product((0, 1), repeat=lo.size)])


def log_checkpoints(T: int, per_decade: int = 40) -> np.ndarray:
    """Integer rounds in ``[1, T]``, log-spaced, always including ``T``."""
    pts = np.unique(np.round(np.logspace(0, math.log10(T), int(per_decade * math.log10(max(T, 10))) + 1)))
    return np.unique(np.append(pts.astype(np.int64), T))


def reward_sup_norm(reward, domain: Domain, values=None, grid=None) -> np.ndarray:
    """``sup_s |u(s)|`` per batch member.

    Exact for quadratic rewards on boxes (affine: at the vertices; concave:
    maximum by :meth:`QuadraticForm.sup_box`, minimum at a vertex), the grid
    maximum of ``values`` or of ``u`` on ``grid`` otherwise.
    """
    if values is not None:
        return np.abs(values).max(axis=1)
    form = getattr(reward, "form", None)
    if form is not None and domain.is_box:
        lo, hi = domain.bounds
        at_vertices = form.on(box_vertices(lo, hi))
        if form.is_affine:
            return np.abs(at_vertices).max(axis=1)
        sup, _ = form.sup_box(lo, hi)
        return np.maximum(np.abs(sup), np.abs(at_vertices.min(axis=1)))
    grid = domain.grid() if grid is None else grid
    return np.abs(reward.on(grid.nodes)).max(axis=1)


class RegretLedger:
    """Running cumulative reward and regret for ``batch`` repetitions.

    Parameters
    ----------
    domain : Domain
    batch : int
    m : int, optional
        Grid resolution for the gridded supremum.
    checkpoints : array of int, optional
        Rounds at which the supremum is evaluated and the series recorded
        (every round when omitted).
    exact : bool
        Use the closed-form supremum on boxes whenever all rewards carry a
        quadratic form.
    track_norms : bool
        Store ``sup |u_t|`` every round (needed by the bound calculators).
    """

    def __init__(self, domain: Domain, batch: int, m: int | None = None, checkpoints=None, exact: bool = True,
                 track_norms: bool = True):
        self.domain = domain
        self.batch = int(batch)
        self.grid = domain.grid(m)
        self.exact = exact and domain.is_box
        self.form: QuadraticForm | None = QuadraticForm.zeros(self.batch, domain.dim) if self.exact else None
        self.U = None if self.exact else np.zeros((self.batch, self.grid.size))
        self._lazy_grid = self.exact
        self.realized = np.zeros(self.batch)
        self.expected = np.zeros(self.batch)
        self.t = 0
        self.checkpoints = None if checkpoints is None else set(int(c) for c in checkpoints)
        self.rows: list[tuple[int, np.ndarray, np.ndarray, np.ndarray]] = []
        self.u_norms: list[np.ndarray] = []
        self.track_norms = track_norms
        if self.exact:
            lo, hi = domain.bounds
            self._vertices = box_vertices(lo, hi)

    # -- accumulation ---------------------------------------------------------
    def record(self, reward, realized, expected=None, values=None, track_norm: bool | None = None):
        """Add round ``t + 1``.

        ``realized`` is ``u_t(s_t)`` per repetition and ``expected`` the
        quadrature reward of the played density (defaults to ``realized``).
        ``values`` is the reward on ``self.grid`` if already computed.
        """
        realized = np.broadcast_to(np.asarray(realized, dtype=float), (self.batch,))
        expected = realized if expected is None else np.broadcast_to(np.asarray(expected, dtype=float), (self.batch,))
        form = getattr(reward, "form", None)
        if self.form is not None:
            if form is None:
                self._switch_to_grid()
            else:
                if form.batch != self.batch:
                    form = QuadraticForm(*(np.broadcast_to(a, (self.batch,) + a.shape[1:]) for a in (form.A, form.b, form.c)))
                self.form = self.form + form
        if self.U is not None:
            self.U += reward.on(self.grid.nodes) if values is None else values
        elif not self._lazy_grid:
            raise RuntimeError("gridded supremum requested without grid values")
        self.realized += realized
        self.expected += expected
        if self.track_norms if track_norm is None else track_norm:
            self.u_norms.append(reward_sup_norm(reward, self.domain, values, self.grid))
        self.t += 1
        if self.checkpoints is None or self.t in self.checkpoints:
            sup = self.sup_U()
            self.rows.append((self.t, sup, self.realized.copy(), self.expected.copy()))

    def _switch_to_grid(self):
        if self.t > 0:
            self.U = self.form.on(self.grid.nodes)
        else:
            self.U = np.zeros((self.batch, self.grid.size))
        self.form = None

    def sup_U(self) -> np.ndarray:
        """``sup_s U_t(s)`` per repetition."""
        if self.form is not None:
            lo, hi = self.domain.bounds
            if self.form.is_affine:
                return self.form.on(self._vertices).max(axis=1)
            sup, _ = self.form.sup_box(lo, hi)
            return sup
        return self.U.max(axis=1)

    def sup_U_grid(self) -> np.ndarray:
        """Grid supremum recomputed from the stored cumulative reward."""
        U = self.form.on(self.grid.nodes) if self.form is not None else self.U
        return U.max(axis=1)

    def rigor_term(self) -> float:
        """``t * chi(cell diameter)`` scale of the grid-supremum error (``chi`` applied by the caller)."""
        return self.t * self.grid.cell_diameter

    def regret(self, kind: str = "realized") -> np.ndarray:
        acc = self.realized if kind == "realized" else self.expected
        return self.sup_U() - acc

    # -- series ---------------------------------------------------------------
    def series(self, kind: str = "realized") -> tuple[np.ndarray, np.ndarray]:
        """Recorded rounds and regret ``R_t`` of shape ``(len(t), batch)``."""
        if not self.rows:
            return np.zeros(0, dtype=np.int64), np.zeros((0, self.batch))
        t = np.array([r[0] for r in self.rows])
        sup = np.stack([r[1] for r in self.rows])
        acc = np.stack([r[2] if kind == "realized" else r[3] for r in self.rows])
        return t, sup - acc

    def norm_series(self) -> np.ndarray:
        """``sup |u_tau|`` for every round, shape ``(t, batch)``."""
        return np.stack(self.u_norms) if self.u_norms else np.zeros((0, self.batch))


def worst_case_regret(ledger: RegretLedger, kind: str = "realized") -> np.ndarray:
    if ledger.t == 0:
        return np.zeros(ledger.batch)
    return ledger.regret(kind)


# -- upper bounds for dual averaging ----------------------------------------------------

def _eta_seq(schedule, t_max: int) -> np.ndarray:
    """``eta_0, ..., eta_{t_max}`` with ``eta_0 = eta_1``."""
    if callable(schedule):
        eta = np.asarray(schedule(np.arange(1, t_max + 1)), dtype=float).reshape(-1)
        return np.concatenate([[eta[0]], eta])
    eta = np.asarray(schedule, dtype=float)
    if eta.size < t_max + 1:
        raise ValueError("need eta_0 .. eta_t")
    return eta


def _stability_sums(eta: np.ndarray, norms: np.ndarray, gamma_tilde_inv) -> np.ndarray:
    """Cumulative ``sum_{tau<=t} ||u_tau|| gti(eta_{tau-1} ||u_tau|| / 2)`` for ``t = 1..T``."""
    norms = np.asarray(norms, dtype=float)
    T = norms.shape[0]
    e = eta[:T].reshape((T,) + (1,) * (norms.ndim - 1))
    return np.cumsum(norms * gamma_tilde_inv(e * norms / 2.0), axis=0)


def bound_general_da(t: int, h_sup: float, h_inf: float, schedule, norms, gamma_tilde_inv) -> float:
    """Regret bound ``(h_sup - h_inf)/eta_t + sum ||u|| gti(eta_{tau-1} ||u|| / 2)`` (not averaged).

    With ``gamma(r) = K r^2 / 2`` the sum equals ``sum eta_{tau-1} ||u_tau||^2 / K``.
    """
    if t == 0:
        return 0.0
    eta = _eta_seq(schedule, t)
    norms = np.broadcast_to(np.asarray(norms, dtype=float), (t,))
    stab = _stability_sums(eta, norms, gamma_tilde_inv)[-1]
    return float((h_sup - h_inf) / eta[t] + stab)


def bound_general_da_power(t, h_range: float, eta: float, beta: float, M: float, K: float = 1.0):
    """Integral form of the bound for ``eta_t = eta t^-beta`` and ``gamma = K r^2/2``.

    ``(h/eta) t^beta + (eta M^2 / K) t^(1-beta) / (1-beta)``, the continuous
    counterpart of :func:`bound_general_da`.
    """
    t = np.asarray(t, dtype=float)
    return h_range / eta * t**beta + eta * M**2 / K * t ** (1 - beta) / (1 - beta)


def theta_grid(cell: float, r0: float, size: int = 64) -> np.ndarray:
    """Log-spaced candidates for the ball radius in ``(cell, r0]``."""
    lo = max(cell, 1e-12)
    return np.logspace(math.log10(lo), math.log10(r0), size + 1)[1:]


def bound_fdiv(t, theta, schedule, reg, f_phi, chi, norms, gamma_tilde_inv):
    """Ball-construction bound on ``R_t / t`` for f-divergence regularizers.

    ``min(C0 theta^Q, 1) f_phi(theta^-Q / c0) / (t eta_t) + chi(theta)
    + (1/t) sum ||u_tau|| gti(eta_{tau-1} ||u_tau|| / 2)``.

    ``t`` may be an array of rounds; ``norms`` holds ``||u_tau||`` for
    ``tau = 1..max(t)`` (optionally with a trailing batch axis).
    """
    Q, c0, C0, r0 = reg
    theta = float(theta)
    if theta > r0 * (1 + 1e-12):
        raise ValueError(f"theta={theta} exceeds r0={r0}")
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.int64))
    T = int(t_arr.max())
    eta = _eta_seq(schedule, T)
    norms = np.asarray(norms, dtype=float)
    if norms.ndim == 0:
        norms = np.full(T, float(norms))
    stab = _stability_sums(eta, norms[:T], gamma_tilde_inv)[t_arr - 1]
    reg_term = min(C0 * theta**Q, 1.0) * float(f_phi(theta ** (-Q) / c0)) / (t_arr * eta[t_arr])
    reg_term = reg_term.reshape((-1,) + (1,) * (stab.ndim - 1))
    tt = t_arr.reshape(reg_term.shape).astype(float)
    out = reg_term + float(chi(theta)) + stab / tt
    return out[0] if np.ndim(t) == 0 else out


def bound_fdiv_scan(t, schedule, reg, f_phi, chi, norms, gamma_tilde_inv, cell: float, size: int = 64):
    """Minimum of :func:`bound_fdiv` over :func:`theta_grid`; returns ``(bound, theta)``."""
    thetas = theta_grid(cell, reg.r0 if hasattr(reg, "r0") else reg[3], size)
    vals = np.stack([np.asarray(bound_fdiv(t, th, schedule, reg, f_phi, chi, norms, gamma_tilde_inv)) for th in thetas])
    best = vals.argmin(axis=0)
    return vals.min(axis=0), thetas[best]


def bound_entropy(t, M: float, reg, C_alpha: float, alpha: float = 1.0, theta: float | None = None):
    """Entropy dual averaging bound on ``R_t / t`` with ``eta sqrt(log t / t)`` rates.

    ``(2M sqrt((2 C0/c0)(log(theta^(-Q/alpha)/c0) + Q/(2 alpha))) + C_alpha theta) sqrt(log t / t)``,
    valid while ``sqrt(log t / t) < r0^alpha / theta``; ``inf`` elsewhere.
    """
    Q, c0, C0, r0 = reg
    theta = r0 / 2 if theta is None else theta
    t = np.asarray(t, dtype=float)
    A = math.log(theta ** (-Q / alpha) / c0) + Q / (2 * alpha)
    const = 2 * M * math.sqrt(2 * C0 / c0 * A) + C_alpha * theta
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.sqrt(np.log(t) / t)
    out = np.where((t > 1) & (rate < r0**alpha / theta), const * rate, np.inf)
    return float(out) if out.ndim == 0 else out


def cor_d1_exponent(kappa: float, Q: float, alpha: float) -> float:
    """Decay exponent ``-1 / (2 + kappa Q / alpha)`` of the power-potential bound."""
    return -1.0 / (2.0 + kappa * Q / alpha)


def bound_cor_d1(t, M: float, Q: float, alpha: float, kappa: float, c0: float, C0: float,
                 C_phi: float, C_alpha: float, theta: float, r0: float | None = None):
    """``(2 M Ct theta^(-kappa Q/2) + C_alpha theta^alpha) t^(-1/(2 + kappa Q/alpha))`` with
    ``Ct = sqrt(((2 + kQ/a)/(1 + kQ/a)) C0 C_phi / c0^(1 + kappa))``.
    """
    if r0 is not None and not theta < r0:
        raise ValueError("theta must be below r0")
    e = kappa * Q / alpha
    Ct = math.sqrt((2 + e) / (1 + e) * C0 * C_phi / c0 ** (1 + kappa))
    t = np.asarray(t, dtype=float)
    out = (2 * M * Ct * theta ** (-kappa * Q / 2) + C_alpha * theta**alpha) * t ** cor_d1_exponent(kappa, Q, alpha)
    return float(out) if out.ndim == 0 else out


# -- lower bounds ---------------------------------------------------------------------

def bound_lower(t, w_of_DS: float):
    """Regret lower bound ``w(D_S) sqrt(t) / (2 sqrt 2)`` (not averaged)."""
    out = w_of_DS / (2 * math.sqrt(2)) * np.sqrt(np.asarray(t, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def bound_lower_holder(t, C_alpha: float, alpha: float, D_S: float, M: float):
    """``min(C_alpha^(1/alpha) D_S^alpha, M) sqrt(t) / (2 sqrt 2)``."""
    return bound_lower(t, min(C_alpha ** (1 / alpha) * D_S**alpha, M))


# -- baseline bounds on R_t / t -----------------------------------------------------------

def bound_gp(t, D: float, G: float):
    t = np.asarray(t, dtype=float)
    return (D**2 / 2 + G**2) / np.sqrt(t) - G**2 / (2 * t)


def bound_ogd(t, G: float, H: float):
    t = np.asarray(t, dtype=float)
    return G**2 / (2 * H) * (1 + np.log(t)) / t


def bound_ftal(t, n: int, alpha: float, G: float, D: float):
    t = np.asarray(t, dtype=float)
    return 64 * n * (1 / alpha + G * D) * (1 + np.log(t)) / t


def bound_ewoo(t, n: int, alpha: float):
    t = np.asarray(t, dtype=float)
    return n / alpha * (1 + np.log1p(t)) / t


# -- rate fitting ---------------------------------------------------------------------

def fit_rate(t, y, window=None) -> float:
    """Least-squares slope of ``log y`` against ``log t``.

    ``window`` is ``(t_lo, t_hi)``; by default the trailing 90% of the
    log-range is used, i.e. ``t >= t_max / 10``.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is None:
        window = (t.max() / 10.0, t.max())
    sel = (t >= window[0]) & (t <= window[1])
    if sel.sum() < 10:
        raise ValueError(f"need at least 10 points in the window, got {int(sel.sum())}")
    if np.any(y[sel] <= 0):
        raise ValueError("non-positive values in the fit window")
    slope, _ = np.polyfit(np.log(t[sel]), np.log(y[sel]), 1)
    return float(slope)
