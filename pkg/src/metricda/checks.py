"""Numerical audits shared by the self-check command and the test suite.

Each audit returns a :class:`CheckResult` holding the observed statistic,
the threshold it is compared with and whether it passed.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import norm

from .domains import Domain, Hypercube, Interval, LShape
from .dual_averaging import DensityState, LearningRate, dual_map, entropy_closed_form, warm_start_interval
from .potentials import ExponentialPotential, Potential, RhoNormPotential
from .rewards import FunctionReward

__all__ = [
    "CheckResult",
    "random_smooth_fields",
    "duality_agreement",
    "warm_start_containment",
    "normalization_audit",
    "dual_map_lipschitz",
    "khintchine_mean",
    "metric_axioms",
    "holder_audit",
    "q_regularity_audit",
]


@dataclass
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def random_smooth_fields(rng, count: int, points: np.ndarray, modes: int = 6, scale=(0.1, 20.0)) -> np.ndarray:
    """Random trigonometric fields on 1-D points with log-uniform amplitude."""
    x = np.asarray(points, dtype=float)[:, 0]
    k = np.arange(1, modes + 1)
    amp = np.exp(rng.uniform(np.log(scale[0]), np.log(scale[1]), size=(count, 1)))
    coef = rng.standard_normal((count, modes)) / k
    phase = rng.uniform(0, 2 * np.pi, size=(count, modes))
    waves = np.cos(np.pi * k[None, :, None] * x[None, None, :] + phase[:, :, None])
    return amp * np.einsum("cm,cmp->cp", coef, waves)


def duality_agreement(count: int = 100, m: int = 4096, seed: int = 0, tol: float = 1e-8) -> CheckResult:
    """Entropy closed form against the bracketing solver on random fields."""
    rng = np.random.default_rng(seed)
    dom = Interval(0.0, 1.0)
    grid = dom.grid(m)
    U = random_smooth_fields(rng, count, grid.nodes)
    closed = entropy_closed_form(U, 1.0, dom, m)
    solved = dual_map(ExponentialPotential(), U, grid, tol=1e-13, method="bisection")
    worst = float(np.max(np.abs(closed - solved)))
    return CheckResult("duality_agreement", worst, tol, worst <= tol, f"{count} fields, m={m}")


def _bounded_stream(rng, M: float, modes: int = 4):
    """A reward in ``[0, M]``: a random mixture of shifted cosines."""
    w = rng.dirichlet(np.ones(modes))
    k = rng.integers(1, 8, size=modes)
    ph = rng.uniform(0, 2 * np.pi, size=modes)

    def fn(p):
        x = p[..., 0]
        return M * np.sum(w[:, None] * 0.5 * (1 + np.cos(2 * np.pi * k[:, None] * x[None] + ph[:, None])), axis=0)

    return fn


def warm_start_containment(steps: int = 10_000, runs: int = 4, M: float = 1.0, m: int = 512,
                           seed: int = 0, potentials: tuple[Potential, ...] | None = None) -> CheckResult:
    """Fraction of steps whose solved dual variable lies in the warm-start interval.

    Rewards take values in ``[0, M]``. Runs alternate between the exponential
    and a 1.5-norm potential and between the two schedule families.
    """
    rng = np.random.default_rng(seed)
    dom = Interval(0.0, 1.0)
    pots = potentials or (ExponentialPotential(), RhoNormPotential(1.5))
    scheds = (LearningRate(2.0, 0.5, False), LearningRate(1.0, 0.5, True))
    per_run = steps // runs
    total = inside = 0
    worst = -np.inf
    for r in range(runs):
        pot = pots[r % len(pots)]
        st = DensityState(pot, dom, scheds[(r // len(pots)) % 2], M, m=m, solver="newton")
        for _ in range(per_run):
            nu_prev, eta_prev, t = st.nu, st.eta_t, st.t
            st.step(FunctionReward(_bounded_stream(rng, M)))
            lo, hi = warm_start_interval(nu_prev, eta_prev, st.eta_t, M, t)
            slack = 1e-9 * max(1.0, abs(st.nu))
            ok = lo - slack <= st.nu <= hi + slack
            worst = max(worst, float(lo - st.nu), float(st.nu - hi))
            total += 1
            inside += ok
    frac = float(inside / total)
    return CheckResult("warm_start_containment", frac, 1.0, bool(frac == 1.0),
                       f"{total} steps, max excess {worst:.3g}")


def normalization_audit(steps: int = 200, seed: int = 0, tol: float = 1e-8) -> CheckResult:
    """``|int x dmu - 1|`` after every step for both potentials on two domains."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for dom, m in ((Interval(0.0, 1.0), 1024), (LShape(), 50)):
        for pot in (ExponentialPotential(), RhoNormPotential(1.5)):
            st = DensityState(pot, dom, LearningRate(1.0, 0.5, True), 2.0, m=m)
            c = dom.grid(m).nodes.mean(axis=0)
            for _ in range(steps):
                z = rng.standard_normal(dom.dim)
                st.step(FunctionReward(lambda p, z=z: np.tanh((p - c) @ z)))
                worst = max(worst, abs(float(st.mass()) - 1.0))
    return CheckResult("normalization", worst, tol, worst <= tol)


def dual_map_lipschitz(pairs: int = 500, m: int = 1024, seed: int = 0, slack: float = 1e-6) -> CheckResult:
    """Largest ``||Dh*(a) - Dh*(b)||_1 / ||a - b||_inf`` for the entropy map.

    Passes when every pair satisfies the bound with constant one plus ``slack``.
    """
    rng = np.random.default_rng(seed)
    dom = Interval(0.0, 1.0)
    grid = dom.grid(m)
    a = random_smooth_fields(rng, pairs, grid.nodes, scale=(0.1, 10.0))
    # perturbations at every scale, from tiny to comparable with the fields
    eps = np.exp(rng.uniform(np.log(1e-4), np.log(3.0), size=(pairs, 1)))
    b = a + eps * random_smooth_fields(rng, pairs, grid.nodes, scale=(1.0, 1.0))
    pot = ExponentialPotential()
    xa = dual_map(pot, a, grid)
    xb = dual_map(pot, b, grid)
    l1 = np.abs(xa - xb) @ grid.weights
    sup = np.abs(a - b).max(axis=1)
    ratio = float(np.max(l1 / sup))
    ok = bool(np.all(l1 <= sup + slack))
    return CheckResult("dual_map_lipschitz", ratio, 1.0, ok, "max ratio of L1 change to sup-norm change")


def khintchine_mean(t: int = 64, draws: int = 100_000, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo mean and standard error of ``|sum_{tau<=t} V_tau|`` for iid signs."""
    rng = np.random.default_rng(seed)
    S = 2.0 * rng.binomial(t, 0.5, size=draws) - t
    a = np.abs(S)
    return float(a.mean()), float(a.std(ddof=1) / math.sqrt(draws))


def metric_axioms(domain: Domain, triples: int = 2000, seed: int = 0, slack: float = 1e-9) -> CheckResult:
    rng = np.random.default_rng(seed)
    x, y, z = (domain.sample_uniform(rng, triples) for _ in range(3))
    dxy, dyx = domain.distance(x, y), domain.distance(y, x)
    dxz, dyz = domain.distance(x, z), domain.distance(y, z)
    dxx = domain.distance(x, x)
    viol = max(
        float(np.max(np.abs(dxy - dyx))),
        float(np.max(dxx)),
        float(np.max(dxz - dxy - dyz)),
        float(-np.min(dxy)),
    )
    return CheckResult(f"metric_axioms[{type(domain).__name__}]", viol, slack, viol <= slack)


def holder_audit(fn, domain: Domain, alpha: float, C: float, pairs: int = 10_000, seed: int = 0,
                 slack: float = 1e-9) -> CheckResult:
    """Largest ``|f(s) - f(s')| - C d(s, s')^alpha`` over random pairs."""
    rng = np.random.default_rng(seed)
    s, sp = domain.sample_uniform(rng, pairs), domain.sample_uniform(rng, pairs)
    gap = np.abs(fn(s) - fn(sp)) - C * domain.distance(s, sp) ** alpha
    worst = float(gap.max())
    return CheckResult("holder_audit", worst, slack, worst <= slack)


def q_regularity_audit(domain: Domain, balls: int = 200, samples: int = 20_000, seed: int = 0) -> CheckResult:
    """Monte Carlo ball measures against ``[c0 r^Q, C0 r^Q]``.

    The slack is a Bonferroni-corrected normal quantile so that the whole
    family of balls has a one percent false-alarm rate.
    """
    rng = np.random.default_rng(seed)
    Q, c0, C0, r0 = domain.regularity_constants()
    pts = domain.sample_uniform(rng, samples)
    centers = domain.sample_uniform(rng, balls)
    # include extreme points where the lower constant is tight
    lo, hi = domain.bounds
    centers[:2] = [lo, hi] if isinstance(domain, (Interval, Hypercube)) else [[0.0, 0.0], [1.0, 1.0]]
    radii = r0 * rng.uniform(0.05, 1.0, size=balls)
    z = float(norm.isf(0.01 / (2 * balls)))
    worst = -np.inf
    for c, r in zip(centers, radii):
        p = np.mean(domain._distance(pts, c) <= r)
        se = math.sqrt(max(p * (1 - p), 1.0 / samples) / samples)
        worst = max(worst, c0 * r**Q - (p + z * se), (p - z * se) - C0 * r**Q)
    return CheckResult(f"q_regularity[{type(domain).__name__}]", float(worst), 0.0, bool(worst <= 0.0))
