import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
from scipy.special import zeta

from metricda.checks import khintchine_mean
from metricda.domains import Hypercube, Interval
from metricda.dual_averaging import LearningRate
from metricda.experiments import BenchConfig, LowerBoundConfig, run_bench, run_lowerbound
from metricda.potentials import ExponentialPotential, RhoNormPotential
from metricda.regret import (
    RegretLedger,
    bound_cor_d1,
    bound_entropy,
    bound_fdiv,
    bound_fdiv_scan,
    bound_general_da,
    bound_general_da_power,
    bound_lower,
    bound_lower_holder,
    cor_d1_exponent,
    fit_rate,
    log_checkpoints,
    reward_sup_norm,
    theta_grid,
    worst_case_regret,
)
from metricda.rewards import FunctionReward, QuadraticForm, QuadraticReward

UNIT = Interval(0.0, 1.0)
EXP = ExponentialPotential()


def identity_reward():
    return QuadraticReward(QuadraticForm(np.zeros((1, 1, 1)), np.ones((1, 1)), np.zeros(1)))


# -- ledger ---------------------------------------------------------------------------

def test_worst_case_examples():
    led = RegretLedger(UNIT, 1, m=64)
    assert worst_case_regret(led)[0] == 0.0
    led.record(identity_reward(), realized=0.3)
    assert worst_case_regret(led)[0] == pytest.approx(0.7, abs=1e-15)


def test_exact_and_gridded_sup_agree_up_to_cell():
    led = RegretLedger(UNIT, 1, m=64)
    led.record(identity_reward(), realized=0.3)
    assert led.sup_U()[0] == 1.0
    assert led.sup_U_grid()[0] == pytest.approx(1.0 - 0.5 / 64)
    assert led.sup_U()[0] - led.sup_U_grid()[0] <= led.grid.cell_diameter


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_incremental_grid_matches_recompute(seed):
    rng = np.random.default_rng(seed)
    dom = Hypercube(2, 0.5)
    led = RegretLedger(dom, 2, m=16, exact=False)
    nodes = led.grid.nodes
    stored, acc = np.zeros((2, nodes.shape[0])), np.zeros(2)
    for _ in range(30):
        k = rng.normal(size=2)
        u = FunctionReward(lambda p, k=k: np.sin(k[0] * p[..., 0]) * np.cos(k[1] * p[..., 1]), batch=2)
        r = rng.normal(size=2)
        led.record(u, r)
        stored += u.on(nodes)
        acc += r
    np.testing.assert_allclose(led.regret(), stored.max(axis=1) - acc, atol=1e-9)


def test_quadratic_switch_to_grid_keeps_history():
    dom = Hypercube(2, 0.5)
    led = RegretLedger(dom, 1, m=32)
    q = QuadraticReward(QuadraticForm(-np.eye(2)[None], np.array([[0.2, 0.1]]), np.zeros(1)))
    led.record(q, 0.0)
    led.record(FunctionReward(lambda p: p[..., 0]), 0.0)
    assert led.form is None
    ref = (q.on(led.grid.nodes)[0] + led.grid.nodes[:, 0]).max()
    assert led.sup_U()[0] == pytest.approx(ref, abs=1e-12)


def test_checkpoints_and_series():
    led = RegretLedger(UNIT, 3, m=16, checkpoints=[1, 3])
    for _ in range(4):
        led.record(identity_reward(), realized=np.zeros(3))
    t, R = led.series()
    np.testing.assert_array_equal(t, [1, 3])
    np.testing.assert_allclose(R, [[1, 1, 1], [3, 3, 3]])
    assert led.norm_series().shape[0] == 4


def test_log_checkpoints():
    np.testing.assert_array_equal(log_checkpoints(10, 40), np.arange(1, 11))
    cp = log_checkpoints(10_000, 40)
    assert cp[0] == 1 and cp[-1] == 10_000 and np.all(np.diff(cp) > 0)


def test_reward_sup_norm_exact_on_box():
    dom = Hypercube(2, 0.5)
    q = QuadraticReward(QuadraticForm(-np.eye(2)[None], np.zeros((1, 2)), np.full(1, 0.1)))
    # sup |0.1 - |s|^2| on the square: max(0.1, 0.5 - 0.1)
    assert reward_sup_norm(q, dom)[0] == pytest.approx(0.4, abs=1e-14)


def test_azuma_audit_realized_vs_expected():
    cfg = BenchConfig(stream="rademacher:alpha=1", algorithms=["da:exp"], T=200, reps=200, m=256,
                      regret="realized", chunk=200)
    res = run_bench(cfg)
    t, real = res["t"], res["series"]["da:exp"]
    exp = run_bench(BenchConfig(**{**cfg.__dict__, "regret": "expected"}))["series"]["da:exp"]
    diff = (real - exp) * t[:, None]  # back to cumulative
    M, R, delta = 1.0, 200, 0.05
    slack = 3 * M * np.sqrt(2 * t * math.log(2 / delta)) / math.sqrt(R)
    assert np.all(np.abs(diff.mean(axis=1)) <= slack)


# -- upper bounds ---------------------------------------------------------------------

def test_general_da_identities():
    gti = EXP.gamma_tilde_inverse
    sched = LearningRate(0.7, 0.0)
    assert bound_general_da(10, 2.0, 0.5, sched, np.zeros(10), gti) == pytest.approx(1.5 / 0.7)
    t, eta, M = 25, 0.3, 1.7
    assert bound_general_da(t, 1.0, 0.0, LearningRate(eta, 0.0), np.full(t, M), gti) == pytest.approx(
        1.0 / eta + t * eta * M**2, rel=1e-14
    )
    assert bound_general_da(0, 1.0, 0.0, sched, np.zeros(0), gti) == 0.0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), beta=st.floats(0.0, 0.9), K=st.floats(0.5, 3.0))
def test_general_da_quadratic_modulus_identity(seed, beta, K):
    # gamma(r) = K r^2 / 2  =>  sum ||u|| gti(eta ||u|| / 2) = sum eta ||u||^2 / K
    rng = np.random.default_rng(seed)
    T = 40
    norms = rng.uniform(0, 2, T)
    sched = LearningRate(rng.uniform(0.1, 2), beta)
    gti = lambda y: 2 * np.asarray(y) / K  # noqa: E731
    eta = np.concatenate([[sched(1)], sched(np.arange(1, T + 1))])
    ref = 1.3 / eta[T] + np.sum(eta[:T] * norms**2 / K)
    assert bound_general_da(T, 1.3, 0.0, sched, norms, gti) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("beta", [0.25, 0.5])
def test_general_da_sum_vs_integral_form(beta):
    gti = EXP.gamma_tilde_inverse
    eta, M = 0.8, 1.5
    for t in (100, 1000, 10_000):
        s = bound_general_da(t, 1.0, 0.0, LearningRate(eta, beta), np.full(t, M), gti)
        c = bound_general_da_power(t, 1.0, eta, beta, M, 1.0)
        assert abs(s - c) / c <= 0.05


@pytest.mark.parametrize("beta", [0.25, 0.5, 0.75])
def test_general_da_sum_euler_maclaurin(beta):
    # eta_0 = eta_1, so the stability sum is eta M^2 (1 + sum_{tau < t} tau^-beta);
    # Euler-Maclaurin gives sum_{tau <= n} tau^-beta ~ n^(1-beta)/(1-beta) + zeta(beta) + n^-beta / 2
    gti = EXP.gamma_tilde_inverse
    eta, M = 0.8, 1.5
    for t in (100, 10_000):
        n = t - 1
        em = n ** (1 - beta) / (1 - beta) + zeta(beta) + 0.5 * n**-beta
        ref = t**beta / eta + eta * M**2 * (1 + em)
        s = bound_general_da(t, 1.0, 0.0, LearningRate(eta, beta), np.full(t, M), gti)
        assert s == pytest.approx(ref, rel=1e-4)


def test_fdiv_first_term_only():
    reg = UNIT.regularity_constants()
    sched = LearningRate(1.0, 0.5)
    Q, c0, C0, r0 = reg
    th = 0.1
    val = bound_fdiv(50, th, sched, reg, EXP.f_phi, lambda r: 0.0, np.zeros(50), EXP.gamma_tilde_inverse)
    ref = min(C0 * th**Q, 1.0) * float(EXP.f_phi(th**-Q / c0)) / (50 * sched(50))
    assert val == pytest.approx(ref, rel=1e-14)
    with pytest.raises(ValueError):
        bound_fdiv(50, 2 * r0, sched, reg, EXP.f_phi, lambda r: 0.0, np.zeros(50), EXP.gamma_tilde_inverse)


def test_entropy_constant():
    reg = Hypercube(2, 0.5).regularity_constants()
    Q, c0, C0, r0 = reg
    M, Ca, th = 5.0, 5.0, 0.1
    const = 2 * M * math.sqrt(2 * C0 / c0 * (math.log(c0**-1 * th ** (-Q)) + Q / 2)) + Ca * th
    t = 10_000.0
    assert bound_entropy(t, M, reg, Ca, 1.0, th) == pytest.approx(const * math.sqrt(math.log(t) / t), rel=1e-14)
    assert bound_entropy(1.0, M, reg, Ca, 1.0, th) == math.inf


def test_theta_scan_interior_for_large_t():
    reg = Interval().regularity_constants()
    sched = LearningRate(1.0, 0.5, True)
    T = 100_000
    norms = np.ones(T)
    cell = 1 / 4096
    b, th = bound_fdiv_scan(T, sched, reg, EXP.f_phi, lambda r: r, norms, EXP.gamma_tilde_inverse, cell)
    grid = theta_grid(cell, reg[3])
    assert grid[0] < th < grid[-1]
    assert b <= bound_fdiv(T, grid[0], sched, reg, EXP.f_phi, lambda r: r, norms, EXP.gamma_tilde_inverse)


def test_cor_d1_exponents():
    assert cor_d1_exponent(0.5, 2, 1) == pytest.approx(-1 / 3)
    assert cor_d1_exponent(0.75, 2, 1) == pytest.approx(-0.2857142857, abs=1e-9)
    assert cor_d1_exponent(1e-9, 2, 1) == pytest.approx(-0.5, abs=1e-8)
    p = RhoNormPotential(1.5)
    assert p.kappa == 0.5
    v1 = bound_cor_d1(100.0, 1.0, 2, 1, 0.5, 0.2, 3.0, p.c_phi, 1.0, 0.1)
    v2 = bound_cor_d1(800.0, 1.0, 2, 1, 0.5, 0.2, 3.0, p.c_phi, 1.0, 0.1)
    assert math.log(v2 / v1) / math.log(8) == pytest.approx(-1 / 3, rel=1e-12)
    with pytest.raises(ValueError):
        bound_cor_d1(10.0, 1.0, 2, 1, 0.5, 0.2, 3.0, 1.0, 1.0, 0.5, r0=0.5)


def test_da_runs_respect_bound():
    for stream, alg in (("altaffine:L=5", "da:exp"), ("altaffine:L=5", "da:rho:1.5"), ("quad:n=2", "da:exp")):
        res = run_bench(BenchConfig(stream=stream, algorithms=[alg], T=300, reps=3, m=32))
        assert res["summary"]["algorithms"][alg]["bound_violations"] == 0, (stream, alg)


# -- lower bounds ---------------------------------------------------------------------

def test_lower_bound_examples():
    assert bound_lower(0, 1.0) == 0.0
    assert bound_lower_holder(8, 1.0, 1.0, math.sqrt(2), 1e9) == pytest.approx(math.sqrt(2), rel=1e-14)
    np.testing.assert_allclose(bound_lower(np.array([4, 16]), 2.0), [2 / math.sqrt(2), 4 / math.sqrt(2)])


def test_khintchine_core():
    mean, se = khintchine_mean(64, 100_000, seed=0)
    # oracle: exact E|S_64| from the binomial pmf
    k = np.arange(65)
    exact = float(np.sum(np.abs(2 * k - 64) * stats.binom.pmf(k, 64, 0.5)))
    assert abs(mean - exact) <= 4 * se
    assert mean >= math.sqrt(32)


def test_lower_bound_dominance_short_run():
    res = run_lowerbound(LowerBoundConfig(T=128, reps=200, m=256, chunk=200))
    assert bool(np.all(res["dominates"]))


# -- rate fitting ---------------------------------------------------------------------

def test_fit_rate_examples():
    t = np.logspace(1, 5, 50)
    assert fit_rate(t, 3.0 * t**-0.5) == pytest.approx(-0.5, abs=1e-9)
    assert fit_rate(t, np.full(t.size, 2.0)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        fit_rate(t, -np.ones(t.size))
    with pytest.raises(ValueError):
        fit_rate(t[:5], t[:5])


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-2, 0), c=st.floats(1e-3, 1e3))
def test_fit_rate_recovers_power(a, c):
    t = np.logspace(0, 4, 60)
    assert fit_rate(t, c * t**a, window=(1, 1e4)) == pytest.approx(a, abs=1e-9)
