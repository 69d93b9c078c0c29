"""Compact action sets with a metric, a normalized base measure and quadrature.

Points are always arrays with a trailing coordinate axis, so a single point of
the unit interval is ``np.array([0.3])`` and a batch of ``P`` points in the
plane has shape ``(P, 2)``.

Quadrature uses a tensor midpoint rule, masked by membership for the holed
square, with weights renormalized to sum to one. The grid also supports the
reverse lookup from a point to its cell, which lets gridded densities be
treated as piecewise constant off the nodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import MembershipError, NumericError, UnsupportedDomainError

__all__ = [
    "Regularity",
    "Grid",
    "Domain",
    "Interval",
    "Hypercube",
    "LShape",
    "parse_domain",
    "distance",
    "integrate",
    "regularity_constants",
    "project",
    "sample_uniform",
    "monte_carlo_grid",
]

_MEMBERSHIP_TOL = 1e-12


class Regularity(NamedTuple):
    """Ball-measure constants: ``c0 r^Q <= mu(B(s, r)) <= C0 r^Q`` for ``r <= r0``."""

    Q: float
    c0: float
    C0: float
    r0: float


@dataclass(frozen=True, eq=False)
class Grid:
    """Quadrature nodes with normalized weights.

    For tensor grids ``shape`` gives the cell count per axis and ``cell_index``
    maps a flat tensor index to a node index (``-1`` for cells removed by the
    membership mask). Monte Carlo grids have ``shape=None``.
    """

    nodes: np.ndarray
    weights: np.ndarray
    raw_weights: np.ndarray
    lo: np.ndarray
    h: np.ndarray
    shape: tuple[int, ...] | None
    cell_index: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def cell_diameter(self) -> float:
        return float(np.linalg.norm(self.h))

    def locate(self, points) -> np.ndarray:
        """Node index of the cell containing each point (``-1`` if none)."""
        if self.shape is None:
            raise TypeError("Monte Carlo grids have no cells")
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        idx = np.floor((pts - self.lo) / self.h).astype(np.int64)
        shape = np.asarray(self.shape)
        idx = np.clip(idx, 0, shape - 1)
        flat = np.ravel_multi_index(tuple(idx.T), self.shape)
        return self.cell_index[flat]

    def sample_in_cells(self, node_idx, rng) -> np.ndarray:
        """Uniform draw inside the cell of each given node."""
        node_idx = np.asarray(node_idx)
        u = rng.random(node_idx.shape + (self.dim,))
        return self.nodes[node_idx] + (u - 0.5) * self.h


class Domain:
    """Base class for compact metric spaces with a uniform probability measure."""

    dim: int = 1
    default_resolution: int = 256

    # -- geometry -------------------------------------------------------------
    def contains(self, points) -> np.ndarray:
        raise NotImplementedError

    def check(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1:] != (self.dim,):
            raise MembershipError(f"expected trailing axis of size {self.dim}, got {pts.shape}")
        inside = self.contains(pts)
        if not np.all(inside):
            bad = pts.reshape(-1, self.dim)[~np.asarray(inside).reshape(-1)][0]
            raise MembershipError(f"point {bad.tolist()} is not in {self!r}")
        return pts

    def distance(self, s, sp) -> np.ndarray:
        """Metric between broadcastable point arrays."""
        s = self.check(s)
        sp = self.check(sp)
        return self._distance(s, sp)

    def _distance(self, s, sp):
        return np.linalg.norm(s - sp, axis=-1)

    @property
    def volume(self) -> float:
        raise NotImplementedError

    @property
    def diameter_endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    @property
    def diameter(self) -> float:
        a, b = self.diameter_endpoints
        return float(self._distance(a, b))

    def regularity_constants(self, normalized: bool = True) -> Regularity:
        raise NotImplementedError

    @property
    def is_box(self) -> bool:
        return False

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def project(self, s) -> np.ndarray:
        raise UnsupportedDomainError(f"{self!r} is not convex; projection undefined")

    def sample_uniform(self, rng, size=None) -> np.ndarray:
        raise NotImplementedError

    # -- quadrature -----------------------------------------------------------
    def _tensor_axes(self, m: int) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
        lo, hi = self.bounds
        h = (hi - lo) / m
        axes = [lo[k] + h[k] * (np.arange(m) + 0.5) for k in range(self.dim)]
        return lo, h, axes

    def grid(self, m: int | None = None) -> Grid:
        """Masked tensor midpoint grid with ``m`` cells per axis (cached)."""
        m = int(m or self.default_resolution)
        cache = self.__dict__.setdefault("_grid_cache", {})
        if m not in cache:
            lo, h, axes = self._tensor_axes(m)
            mesh = np.meshgrid(*axes, indexing="ij")
            nodes = np.stack([g.ravel() for g in mesh], axis=-1)
            keep = self.contains(nodes)
            cell_index = np.full(nodes.shape[0], -1, dtype=np.int64)
            cell_index[keep] = np.arange(int(keep.sum()))
            nodes = nodes[keep]
            raw = np.full(nodes.shape[0], float(np.prod(h)))
            cache[m] = Grid(
                nodes=nodes,
                weights=raw / raw.sum(),
                raw_weights=raw,
                lo=lo,
                h=h,
                shape=(m,) * self.dim,
                cell_index=cell_index,
            )
        return cache[m]

    def integrate(self, f: Callable, m: int | None = None, normalized: bool = True) -> float:
        """Quadrature of ``f`` against the normalized (or raw Lebesgue) measure."""
        g = self.grid(m)
        vals = np.asarray(f(g.nodes), dtype=float)
        bad = ~np.isfinite(vals)
        if np.any(bad):
            where = g.nodes[np.argmax(bad)]
            raise NumericError(f"non-finite integrand at node {where.tolist()}")
        w = g.weights if normalized else g.raw_weights
        return float(vals @ w)


@dataclass(frozen=True)
class Interval(Domain):
    lo: float = 0.0
    hi: float = 1.0
    default_resolution: int = 4096

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("empty interval")

    @property
    def dim(self) -> int:
        return 1

    def contains(self, points):
        x = np.asarray(points, dtype=float)[..., 0]
        return (x >= self.lo - _MEMBERSHIP_TOL) & (x <= self.hi + _MEMBERSHIP_TOL)

    @property
    def volume(self) -> float:
        return self.hi - self.lo

    @property
    def diameter_endpoints(self):
        return np.array([self.hi]), np.array([self.lo])

    def regularity_constants(self, normalized: bool = True) -> Regularity:
        # endpoint ball has measure r, interior ball 2r (raw Lebesgue)
        scale = self.volume if normalized else 1.0
        return Regularity(1.0, 1.0 / scale, 2.0 / scale, self.volume / 2.0)

    @property
    def is_box(self) -> bool:
        return True

    @property
    def bounds(self):
        return np.array([self.lo]), np.array([self.hi])

    def project(self, s):
        return np.clip(np.asarray(s, dtype=float), self.lo, self.hi)

    def sample_uniform(self, rng, size=None):
        shape = (() if size is None else np.atleast_1d(size).tolist())
        return rng.uniform(self.lo, self.hi, size=tuple(shape) + (1,))


@dataclass(frozen=True)
class Hypercube(Domain):
    """``{s in R^n : ||s||_inf <= half_width}`` with the Euclidean metric."""

    n: int = 2
    half_width: float = 0.5

    def __post_init__(self):
        if self.n < 1 or self.half_width <= 0:
            raise ValueError("need n >= 1 and half_width > 0")

    @property
    def dim(self) -> int:
        return self.n

    @property
    def default_resolution(self) -> int:
        return {1: 4096, 2: 256}.get(self.n, 32)

    def contains(self, points):
        pts = np.asarray(points, dtype=float)
        return np.all(np.abs(pts) <= self.half_width + _MEMBERSHIP_TOL, axis=-1)

    @property
    def volume(self) -> float:
        return (2.0 * self.half_width) ** self.n

    @property
    def diameter_endpoints(self):
        hw = self.half_width
        return np.full(self.n, -hw), np.full(self.n, hw)

    def regularity_constants(self, normalized: bool = True) -> Regularity:
        # a corner ball is one orthant of the Euclidean ball
        ball = math.pi ** (self.n / 2) / gamma_fn(self.n / 2 + 1)
        scale = self.volume if normalized else 1.0
        return Regularity(float(self.n), float(ball / 2**self.n / scale), float(ball / scale), self.half_width)

    @property
    def is_box(self) -> bool:
        return True

    @property
    def bounds(self):
        return np.full(self.n, -self.half_width), np.full(self.n, self.half_width)

    def project(self, s):
        return np.clip(np.asarray(s, dtype=float), -self.half_width, self.half_width)

    def sample_uniform(self, rng, size=None):
        shape = () if size is None else tuple(np.atleast_1d(size).tolist())
        hw = self.half_width
        return rng.uniform(-hw, hw, size=shape + (self.n,))


# corners of the hole in counter-clockwise order
_HOLE_LO, _HOLE_HI = 0.4, 1.0
_CORNERS = np.array(
    [[_HOLE_LO, _HOLE_LO], [_HOLE_HI, _HOLE_LO], [_HOLE_HI, _HOLE_HI], [_HOLE_LO, _HOLE_HI]]
)


def _segment_crosses_hole(p, q, lo=_HOLE_LO, hi=_HOLE_HI, eps=1e-12) -> np.ndarray:
    """True where the segment ``p -> q`` meets the open square ``(lo, hi)^2``.

    Liang-Barsky clipping. Segments that only touch the boundary (along an edge
    or through a corner) do not count.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    p, q = np.broadcast_arrays(p, q)
    d = q - p
    t0 = np.zeros(p.shape[:-1])
    t1 = np.ones(p.shape[:-1])
    for k in range(2):
        dk, pk = d[..., k], p[..., k]
        flat = np.abs(dk) < 1e-15
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = np.where(flat, -np.inf, (lo - pk) / dk)
            tb = np.where(flat, np.inf, (hi - pk) / dk)
        tmin = np.minimum(ta, tb)
        tmax = np.maximum(ta, tb)
        outside = flat & ~((pk > lo) & (pk < hi))
        t0 = np.where(outside, 1.0, np.maximum(t0, tmin))
        t1 = np.where(outside, 0.0, np.minimum(t1, tmax))
    length = np.linalg.norm(d, axis=-1)
    return (t1 - t0) * length > eps


def _corner_graph() -> np.ndarray:
    """All-pairs shortest distances between hole corners along the boundary."""
    edge = _HOLE_HI - _HOLE_LO
    D = np.full((4, 4), np.inf)
    np.fill_diagonal(D, 0.0)
    for i in range(4):
        D[i, (i + 1) % 4] = D[(i + 1) % 4, i] = edge
    for k in range(4):
        D = np.minimum(D, D[:, [k]] + D[[k], :])
    return D


_CORNER_DIST = _corner_graph()


@dataclass(frozen=True)
class LShape(Domain):
    """The square ``[0, 2]^2`` with the open hole ``(0.4, 1)^2`` removed.

    Distances are geodesic: the length of the shortest path inside the set,
    computed on the visibility graph of the four hole corners.
    """

    outer: float = 2.0
    default_resolution: int = 250
    r0: float = 0.4

    def __post_init__(self):
        if self.outer != 2.0:
            raise ValueError("only the outer square [0, 2]^2 is supported")

    @property
    def dim(self) -> int:
        return 2

    def contains(self, points):
        pts = np.asarray(points, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        tol = _MEMBERSHIP_TOL
        in_outer = (x >= -tol) & (x <= self.outer + tol) & (y >= -tol) & (y <= self.outer + tol)
        in_hole = (x > _HOLE_LO) & (x < _HOLE_HI) & (y > _HOLE_LO) & (y < _HOLE_HI)
        return in_outer & ~in_hole

    def _distance(self, s, sp):
        s, sp = np.broadcast_arrays(np.asarray(s, float), np.asarray(sp, float))
        out_shape = s.shape[:-1]
        s, sp = s.reshape(-1, 2), sp.reshape(-1, 2)
        direct = np.linalg.norm(s - sp, axis=-1)
        blocked = _segment_crosses_hole(s, sp)
        if not np.any(blocked):
            return direct.reshape(out_shape)
        sb, pb = s[blocked], sp[blocked]
        # leg lengths to the corners, infinite when the leg crosses the hole
        c = _CORNERS[None, :, :]
        leg_s = np.linalg.norm(sb[:, None, :] - c, axis=-1)
        leg_s[_segment_crosses_hole(sb[:, None, :], c)] = np.inf
        leg_p = np.linalg.norm(pb[:, None, :] - c, axis=-1)
        leg_p[_segment_crosses_hole(pb[:, None, :], c)] = np.inf
        via = leg_s[:, :, None] + _CORNER_DIST[None] + leg_p[:, None, :]
        out = direct.copy()
        out[blocked] = via.reshape(via.shape[0], -1).min(axis=1)
        return out.reshape(out_shape)

    def distances_from(self, sources, targets) -> np.ndarray:
        """Pairwise geodesic distances, shape ``(len(sources), len(targets))``."""
        sources = np.atleast_2d(sources)
        return self._distance(sources[:, None, :], np.asarray(targets)[None, :, :])

    def _corner_legs(self, pts) -> np.ndarray:
        legs = np.linalg.norm(pts[:, None, :] - _CORNERS[None], axis=-1)
        legs[_segment_crosses_hole(pts[:, None, :], _CORNERS[None])] = np.inf
        return legs

    def pairwise(self, points, targets) -> np.ndarray:
        """Distances of shape ``(len(targets), len(points))``.

        Corner legs of ``points`` are cached for the last array seen, which
        makes repeated queries against a fixed grid cheap.
        """
        points = np.asarray(points, dtype=float)
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        owner = points if points.base is None else points.base
        key = (points.__array_interface__["data"][0], points.shape, points.strides)
        cache = self.__dict__.setdefault("_legs_cache", [None, None, None])
        if cache[0] is not owner or cache[1] != key:
            cache[:] = [owner, key, self._corner_legs(points)]
        legs_p = cache[2]
        direct = np.linalg.norm(points[None, :, :] - targets[:, None, :], axis=-1)
        blocked = _segment_crosses_hole(points[None, :, :], targets[:, None, :])
        if not blocked.any():
            return direct
        legs_t = self._corner_legs(targets)
        # best route through corner i (near the point) and corner j (near the target)
        via_t = (_CORNER_DIST[None, :, :] + legs_t[:, None, :]).min(axis=2)  # (T, 4)
        bi, pi = np.nonzero(blocked)
        direct[bi, pi] = (legs_p[pi] + via_t[bi]).min(axis=1)
        return direct

    @property
    def volume(self) -> float:
        return self.outer**2 - (_HOLE_HI - _HOLE_LO) ** 2

    @property
    def diameter_endpoints(self):
        return np.array([0.0, 0.0]), np.array([self.outer, self.outer])

    def regularity_constants(self, normalized: bool = True) -> Regularity:
        scale = self.volume if normalized else 1.0
        return Regularity(2.0, math.pi / 4 / scale, math.pi / scale, self.r0)

    @property
    def bounds(self):
        return np.zeros(2), np.full(2, self.outer)

    def sample_uniform(self, rng, size=None):
        n = 1 if size is None else int(np.prod(size))
        out = np.empty((0, 2))
        while out.shape[0] < n:
            cand = rng.uniform(0.0, self.outer, size=(2 * n + 16, 2))
            out = np.concatenate([out, cand[self.contains(cand)]])
        out = out[:n]
        if size is None:
            return out[0]
        return out.reshape(tuple(np.atleast_1d(size).tolist()) + (2,))


def parse_domain(spec: str) -> Domain:
    """Build a domain from ``"interval:lo,hi"``, ``"hypercube:n,hw"`` or ``"lshape"``."""
    spec = spec.strip().lower()
    kind, _, args = spec.partition(":")
    vals = [a for a in args.split(",") if a.strip()]
    if kind == "interval":
        lo, hi = (float(v) for v in vals) if vals else (0.0, 1.0)
        return Interval(lo, hi)
    if kind == "hypercube":
        n = int(vals[0]) if vals else 2
        hw = float(vals[1]) if len(vals) > 1 else 0.5
        return Hypercube(n, hw)
    if kind == "lshape":
        return LShape()
    raise ValueError(f"unknown domain spec {spec!r}")


def monte_carlo_grid(dom: Domain, size: int, rng) -> Grid:
    """Equal-weight random nodes, a fallback for higher-dimensional boxes."""
    nodes = dom.sample_uniform(rng, size).reshape(size, dom.dim)
    w = np.full(size, 1.0 / size)
    lo, hi = dom.bounds
    return Grid(nodes, w, w * dom.volume, lo, hi - lo, None, None)


def distance(dom: Domain, s, sp):
    return dom.distance(s, sp)


def integrate(dom: Domain, f: Callable, m: int | None = None, normalized: bool = True) -> float:
    return dom.integrate(f, m, normalized)


def regularity_constants(dom: Domain, normalized: bool = True) -> Regularity:
    return dom.regularity_constants(normalized)


def project(dom: Domain, s):
    return dom.project(s)


def sample_uniform(dom: Domain, rng, size=None):
    return dom.sample_uniform(rng, size)
