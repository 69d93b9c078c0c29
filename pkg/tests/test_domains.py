import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse.csgraph import dijkstra

from metricda.checks import metric_axioms, q_regularity_audit
from metricda.domains import (
    Hypercube,
    Interval,
    LShape,
    distance,
    integrate,
    parse_domain,
    project,
    regularity_constants,
    sample_uniform,
)
from metricda.errors import MembershipError, NumericError, UnsupportedDomainError

LSHAPE = LShape()
HOLE = (0.4, 1.0)


def _blocked_by_sampling(p, q, n=4001):
    """Oracle: does the open segment pass through the open hole (dense sampling)."""
    t = np.linspace(0, 1, n)[:, None]
    pts = p + t * (q - p)
    inside = np.all((pts > HOLE[0] + 1e-9) & (pts < HOLE[1] - 1e-9), axis=1)
    return bool(inside.any())


def _geodesic_oracle(p, q):
    """Dijkstra over the visibility graph {p, q, hole corners}."""
    corners = [np.array(c, float) for c in ((0.4, 0.4), (0.4, 1.0), (1.0, 0.4), (1.0, 1.0))]
    nodes = [np.asarray(p, float), np.asarray(q, float)] + corners
    n = len(nodes)
    W = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if not _blocked_by_sampling(nodes[i], nodes[j]):
                W[i, j] = W[j, i] = np.linalg.norm(nodes[i] - nodes[j]) or 1e-300
    return float(dijkstra(W, indices=0)[1])


def test_euclidean_examples():
    assert distance(Hypercube(2, 0.5), [0.0, 0.0], [0.5, 0.5]) == pytest.approx(math.sqrt(0.5), rel=1e-15)
    assert distance(Interval(0, 1), [0.0], [1.0]) == 1.0


def test_lshape_example_both_routes_tie():
    d = float(LSHAPE.distance([0.2, 0.2], [1.2, 1.2]))
    assert d == pytest.approx(2 * math.sqrt(0.68), rel=1e-12)
    # route via (1, 0.4) and via (0.4, 1) have equal length
    a = np.hypot(0.8, 0.2) + np.hypot(0.2, 0.8)
    assert d == pytest.approx(a, rel=1e-12)
    assert d == pytest.approx(_geodesic_oracle([0.2, 0.2], [1.2, 1.2]), rel=1e-9)


def test_lshape_against_visibility_oracle():
    rng = np.random.default_rng(3)
    p = LSHAPE.sample_uniform(rng, 60)
    q = LSHAPE.sample_uniform(rng, 60)
    ours = LSHAPE.distance(p, q)
    ref = np.array([_geodesic_oracle(a, b) for a, b in zip(p, q)])
    np.testing.assert_allclose(ours, ref, rtol=1e-9, atol=1e-12)


def test_lshape_pairwise_matches_distance():
    rng = np.random.default_rng(5)
    grid = LSHAPE.grid(30).nodes
    targets = LSHAPE.sample_uniform(rng, 17)
    pw = LSHAPE.pairwise(grid, targets)
    ref = LSHAPE.distance(grid[None, :, :], targets[:, None, :])
    np.testing.assert_allclose(pw, ref, rtol=0, atol=1e-13)
    # second call hits the cache and still agrees
    np.testing.assert_allclose(LSHAPE.pairwise(grid, targets[:3]), ref[:3], atol=1e-13)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_lshape_geodesic_dominates_euclidean(seed):
    rng = np.random.default_rng(seed)
    p, q = LSHAPE.sample_uniform(rng, 32), LSHAPE.sample_uniform(rng, 32)
    d = LSHAPE.distance(p, q)
    e = np.linalg.norm(p - q, axis=-1)
    assert np.all(d >= e - 1e-12)


def test_lshape_equals_euclidean_when_visible():
    rng = np.random.default_rng(11)
    p, q = LSHAPE.sample_uniform(rng, 200), LSHAPE.sample_uniform(rng, 200)
    d = LSHAPE.distance(p, q)
    e = np.linalg.norm(p - q, axis=-1)
    visible = np.array([not _blocked_by_sampling(a, b) for a, b in zip(p, q)])
    assert visible.sum() > 50
    np.testing.assert_allclose(d[visible], e[visible], rtol=1e-12)


@pytest.mark.parametrize("dom", [Interval(), Hypercube(2, 0.5), Hypercube(3, 0.5), LSHAPE], ids=repr)
def test_metric_axioms(dom):
    res = metric_axioms(dom, 2000, seed=0)
    assert res.passed, res


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_triangle_inequality_lshape(seed):
    rng = np.random.default_rng(seed)
    x, y, z = (LSHAPE.sample_uniform(rng, 16) for _ in range(3))
    assert np.all(LSHAPE.distance(x, z) <= LSHAPE.distance(x, y) + LSHAPE.distance(y, z) + 1e-9)


def test_membership_errors():
    with pytest.raises(MembershipError):
        LSHAPE.distance([0.5, 0.5], [0.0, 0.0])  # inside the hole
    with pytest.raises(MembershipError):
        LSHAPE.distance([2.5, 0.0], [0.0, 0.0])
    with pytest.raises(MembershipError):
        Interval().distance([1.5], [0.0])


@pytest.mark.parametrize("dom,m", [(Interval(), 64), (Hypercube(2, 0.5), 32), (Hypercube(3, 0.5), 8), (LSHAPE, 50)])
def test_weights_sum_to_one(dom, m):
    assert dom.grid(m).weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_integrate_examples():
    for dom in (Interval(), Hypercube(2, 0.5), LSHAPE):
        assert integrate(dom, lambda p: np.ones(p.shape[0])) == pytest.approx(1.0, abs=1e-12)
    assert integrate(Interval(), lambda p: p[:, 0], m=1024) == pytest.approx(0.5, abs=1e-6)
    assert integrate(LSHAPE, lambda p: np.ones(p.shape[0]), normalized=False) == pytest.approx(3.64, rel=1e-9)


def test_integrate_rejects_nonfinite():
    with pytest.raises(NumericError):
        integrate(Interval(), lambda p: np.where(p[:, 0] > 0.5, np.inf, 0.0), m=16)


def test_quadrature_converges():
    f = lambda p: np.exp(-np.sum((p - 0.3) ** 2, axis=1))  # noqa: E731
    for dom, m in ((Interval(), 512), (Hypercube(2, 0.5), 128), (LSHAPE, 200)):
        assert abs(integrate(dom, f, m) - integrate(dom, f, 2 * m)) < 1e-4


def test_regularity_constants():
    Q, c0, C0, r0 = regularity_constants(LSHAPE, normalized=False)
    assert (Q, c0, C0) == (2.0, pytest.approx(math.pi / 4), pytest.approx(math.pi))
    Qn, c0n, C0n, _ = regularity_constants(LSHAPE)
    assert c0n == pytest.approx(math.pi / 4 / 3.64) and C0n == pytest.approx(math.pi / 3.64)
    assert tuple(regularity_constants(Interval())) == (1.0, 1.0, 2.0, 0.5)
    Q2, c02, C02, r02 = regularity_constants(Hypercube(2, 0.5))
    assert (Q2, r02) == (2.0, 0.5)
    assert c02 == pytest.approx(math.pi / 4) and C02 == pytest.approx(math.pi)


@pytest.mark.parametrize("dom", [Interval(), Hypercube(2, 0.5), LSHAPE], ids=repr)
def test_q_regularity_audit(dom):
    res = q_regularity_audit(dom, balls=200, samples=20_000, seed=1)
    assert res.passed, res


def test_diameter_matches_grid_pairs():
    for dom, m in ((Interval(), 64), (Hypercube(2, 0.5), 16), (LSHAPE, 16)):
        nodes = dom.grid(m).nodes
        pair_max = dom.distance(nodes[:, None, :], nodes[None, :, :]).max()
        assert abs(dom.diameter - pair_max) <= dom.grid(m).cell_diameter + 1e-12
    # opposite corners route around the hole via (1, 0.4)
    assert LSHAPE.diameter == pytest.approx(math.hypot(1, 0.4) + math.hypot(1, 1.6), rel=1e-12)


def test_project_examples():
    np.testing.assert_array_equal(project(Hypercube(2, 0.5), [0.7, -0.9]), [0.5, -0.5])
    np.testing.assert_array_equal(project(Interval(), [0.3]), [0.3])
    np.testing.assert_array_equal(project(Hypercube(3, 0.5), [0.0, 0.0, 0.0]), [0.0, 0.0, 0.0])
    with pytest.raises(UnsupportedDomainError):
        project(LSHAPE, [0.1, 0.1])


@settings(max_examples=50, deadline=None)
@given(x=st.lists(st.floats(-5, 5), min_size=2, max_size=2))
def test_project_idempotent(x):
    dom = Hypercube(2, 0.5)
    p = dom.project(x)
    np.testing.assert_array_equal(dom.project(p), p)
    assert dom.contains(p)


def test_sample_uniform_statistics():
    rng = np.random.default_rng(0)
    assert sample_uniform(Interval(), rng, 100_000).mean() == pytest.approx(0.5, abs=0.01)
    pts = sample_uniform(LSHAPE, rng, 100_000)
    assert LSHAPE.contains(pts).all()
    frac = np.mean(np.all(pts <= 0.4, axis=1))
    assert frac == pytest.approx(0.16 / 3.64, abs=0.01)
    sq = sample_uniform(Hypercube(2, 0.5), rng, 100_000)
    np.testing.assert_allclose(sq.var(axis=0), 1 / 12, atol=0.005)


def test_parse_domain():
    assert parse_domain("interval:0,2") == Interval(0.0, 2.0)
    assert parse_domain("hypercube:3,0.5") == Hypercube(3, 0.5)
    assert isinstance(parse_domain("lshape"), LShape)
    with pytest.raises(ValueError):
        parse_domain("torus")
