import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metricda.adversaries import AlternatingAffineStream, quadratic_stream
from metricda.baselines import (
    EWOOLearner,
    FTALState,
    GreedyLearner,
    ewoo_step,
    ewoo_step_quadratic,
    ftal_step,
    gp_step,
    greedy_step,
    make_learner,
    pinv_psd,
    seminorm_projection,
)
from metricda.domains import Hypercube, LShape
from metricda.errors import UnsupportedDomainError
from metricda.regret import RegretLedger, bound_ogd
from metricda.rewards import QuadraticForm, QuadraticReward
from metricda.seeding import rep_rngs

SQ = Hypercube(2, 0.5)


def test_greedy_tie_break_first_node():
    g = SQ.grid(16)
    np.testing.assert_array_equal(greedy_step(np.zeros(g.size), SQ, 16), g.nodes[0])


def test_greedy_after_first_altaffine_round():
    stream = AlternatingAffineStream(5.0)
    g = SQ.grid(64)
    U = stream.reward(1).on(g.nodes)[0]
    s = greedy_step(U, SQ, 64)
    assert s[0] == pytest.approx(-0.5 + g.h[0] / 2)


def _greedy_altaffine_oracle(L, T, m):
    """Scalar replay: U_t is linear in s1, so greedy sits at a face centre cell."""
    h = 1.0 / m
    left, right = -0.5 + h / 2, 0.5 - h / 2
    slope, const, total = 0.0, 0.0, 0.0
    sups = []
    for t in range(1, T + 1):
        # ties (slope 0) go to the lowest node index, which has the smallest s1
        s1 = right if slope > 0 else left
        k = t - 1
        a, c = (L / 2, L / 4) if k == 0 else ((-1) ** k * L, L / 2)
        total += -a * s1 - c
        slope -= a
        const -= c
        sups.append(max(slope * 0.5, -slope * 0.5) + const - total)
    return np.array(sups)


def test_greedy_regret_matches_scalar_replay():
    L, T, m = 5.0, 300, 64
    stream = AlternatingAffineStream(L)
    learner = GreedyLearner(SQ, 1, m)
    ledger = RegretLedger(SQ, 1, m=m)
    for t in range(1, T + 1):
        u = stream.reward(t)
        s = learner.play()
        ledger.record(u, learner.update(u, s))
    _, R = ledger.series()
    np.testing.assert_allclose(R[:, 0], _greedy_altaffine_oracle(L, T, m), atol=1e-9)
    # greedy plays the face that the next reward punishes, so R_t / t tends to L / 2
    assert R[-1, 0] / T == pytest.approx(L / 2, abs=0.05)


def test_gp_step_examples():
    np.testing.assert_allclose(gp_step([[0.4, 0.0]], [[0.4, 0.0]], 0.5, SQ), [[0.2, 0.0]])
    np.testing.assert_array_equal(gp_step([[0.1, -0.3]], [[0.0, 0.0]], 3.0, SQ), [[0.1, -0.3]])
    np.testing.assert_allclose(gp_step([[0.4, 0.0]], [[-1.0, 0.0]], 0.5, SQ), [[0.5, 0.0]])
    with pytest.raises(UnsupportedDomainError):
        gp_step([[0.1, 0.1]], [[1.0, 0.0]], 0.1, LShape())


def test_ewoo_centre_and_concentration():
    g = SQ.grid(64)
    np.testing.assert_allclose(ewoo_step(np.zeros(g.size), 1.0, SQ, 64), 0.0, atol=1e-14)
    L = np.sum(g.nodes**2, axis=1)
    L2 = np.sum((g.nodes - np.array([0.2, -0.1])) ** 2, axis=1)
    dist = [np.linalg.norm(ewoo_step(L2, a, SQ, 64) - [0.2, -0.1]) for a in (1, 10, 100, 1000)]
    assert np.all(np.diff(dist) < 0)
    assert np.linalg.norm(ewoo_step(L, 1e3, SQ, 64)) < 1e-10


def test_ftal_first_round_example():
    st0 = FTALState.start([[0.0, 0.0]])
    st1 = ftal_step(st0, [[1.0, 0.0]], [[0.0, 0.0]], 1.0, SQ)
    np.testing.assert_allclose(st1.s, [[-0.5, 0.0]], atol=1e-9)
    np.testing.assert_allclose(st1.A, [[[1.0, 0.0], [0.0, 0.0]]])


def test_ftal_zero_gradient_keeps_state():
    st0 = FTALState.start([[0.1, 0.2]])
    st1 = ftal_step(st0, [[0.0, 0.0]], [[0.1, 0.2]], 1.0, SQ)
    np.testing.assert_array_equal(st1.s, st0.s)
    np.testing.assert_array_equal(st1.A, st0.A)


def test_pinv_matches_numpy():
    rng = np.random.default_rng(0)
    G = rng.normal(size=(5, 3, 2))
    A = G @ G.transpose(0, 2, 1)
    np.testing.assert_allclose(pinv_psd(A), np.linalg.pinv(A, rcond=1e-10, hermitian=True), atol=1e-9)


def test_seminorm_projection_full_rank_inside():
    A = np.array([[[2.0, 0.3], [0.3, 1.0]]])
    np.testing.assert_allclose(seminorm_projection(A, [[0.1, -0.2]], SQ), [[0.1, -0.2]], atol=1e-12)


def test_seminorm_projection_against_grid_search():
    rng = np.random.default_rng(1)
    xs = np.linspace(-0.5, 0.5, 401)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    P = np.stack([X.ravel(), Y.ravel()], axis=1)
    for _ in range(10):
        G = rng.normal(size=(2, 2))
        A = G @ G.T
        tgt = rng.uniform(-2, 2, size=2)
        d = P - tgt
        vals = np.einsum("pi,ij,pj->p", d, A, d)
        best = vals.min()
        ours = seminorm_projection(A[None], tgt[None], SQ)[0]
        assert (ours - tgt) @ A @ (ours - tgt) <= best + 1e-9


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3))
def test_iterates_stay_in_domain_and_A_psd(seed, n):
    dom = Hypercube(n, 0.5)
    stream = quadratic_stream(rep_rngs(seed, [0, 1], "test"), n=n)
    tags = stream.tags
    learners = {
        sel: make_learner(sel, dom, 2, m=16 if n < 3 else 8, M=stream.M, H=tags["strongly_convex"],
                          G=tags["G"], exp_concavity=tags["exp_concave"])
        for sel in ("greedy", "gp", "ogd", "ewoo", "ftal")
    }
    for t in range(1, 15):
        u = stream.reward(t)
        for sel, lrn in learners.items():
            s = lrn.play()
            assert dom.contains(s).all(), sel
            lrn.update(u, s)
    A = learners["ftal"].state.A
    assert np.linalg.eigvalsh(A).min() >= -1e-10


def test_ogd_meets_logarithmic_bound():
    B, T = 8, 2000
    stream = quadratic_stream(rep_rngs(3, range(B), "ogd"), n=2)
    H, G = stream.tags["strongly_convex"], stream.tags["G"]
    lrn = make_learner("ogd", SQ, B, H=H, G=G)
    ledger = RegretLedger(SQ, B, m=16, track_norms=False)
    for t in range(1, T + 1):
        u = stream.reward(t)
        s = lrn.play()
        ledger.record(u, lrn.update(u, s))
    t, R = ledger.series()
    bound = bound_ogd(t, G, H)
    # the bound is on time-average regret
    assert np.all(R / t[:, None] <= bound[:, None] + 1e-9)
    assert bound[-1] == pytest.approx(G**2 / (2 * H) * (1 + math.log(T)) / T)


def test_learner_selector_errors():
    with pytest.raises(ValueError):
        make_learner("ogd", SQ, 1)
    with pytest.raises(ValueError):
        make_learner("newton", SQ, 1)
    with pytest.raises(UnsupportedDomainError):
        make_learner("gp", LShape(), 1)
    assert "rho" in make_learner("da:rho:1.5", SQ, 2, m=16).name


def test_ewoo_learner_tracks_static_optimum():
    # static reward -(s - c)^2: EWOO mean approaches c as U grows
    c = np.array([0.2, -0.3])
    form = QuadraticForm(-np.eye(2)[None], 2 * c[None], -np.array([c @ c]))
    lrn = EWOOLearner(SQ, 1, alpha=1.0, m=64)
    for _ in range(500):
        lrn.update(QuadraticReward(form), lrn.play())
    np.testing.assert_allclose(lrn.play()[0], c, atol=0.02)


@pytest.mark.parametrize("k", [1.0, 30.0, 300.0])
def test_ewoo_windowed_quadrature_matches_fine_grid(k):
    rng = np.random.default_rng(2)
    G = rng.normal(size=(2, 2))
    A = -(G @ G.T + 0.2 * np.eye(2))
    mu = np.array([0.45, -0.1])
    form = QuadraticForm(k * A[None], k * (-2 * A @ mu)[None], np.zeros(1))
    fine = ewoo_step(-form.on(SQ.grid(1024).nodes)[0], 1.0, SQ, 1024)
    np.testing.assert_allclose(ewoo_step_quadratic(form, 1.0, SQ, 64)[0], fine, atol=1e-4)


def test_ewoo_windowed_quadrature_sharp_interior_peak():
    # far narrower than any fixed grid cell: the mean is the interior mode
    mu = np.array([0.1, -0.2])
    A = -np.array([[2.0, 0.3], [0.3, 1.0]])
    form = QuadraticForm(1e7 * A[None], 1e7 * (-2 * A @ mu)[None], np.zeros(1))
    np.testing.assert_allclose(ewoo_step_quadratic(form, 1.0, SQ, 64)[0], mu, atol=1e-12)


def test_ewoo_learner_falls_back_to_grid_for_generic_rewards():
    from metricda.rewards import FunctionReward

    lrn = EWOOLearner(SQ, 1, alpha=1.0, m=32)
    lrn.update(FunctionReward(lambda p: np.sin(3 * p[..., 0])), lrn.play())
    assert lrn.form is None
    expected = ewoo_step(-np.sin(3 * SQ.grid(32).nodes[:, 0])[None], 1.0, SQ, 32)
    np.testing.assert_allclose(lrn.play(), expected)
