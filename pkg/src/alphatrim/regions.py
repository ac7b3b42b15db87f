"""Zonoid, integral and location trimmed regions of empirical measures.

Every region here is generated by the trimming polytope of a sample of size
``n``: weight vectors ``q`` with ``0 <= q_i <= 1 / (alpha * n)`` and
``sum(q) == 1``.  The zonoid region is the set of weighted means ``q @ X``;
its support function in a direction ``u`` is obtained by filling the caps
greedily in decreasing order of ``<u, X_i>``.  Membership queries that are
not support-function questions go through :mod:`alphatrim.lp`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import lp
from .families import FunctionFamily
from .measure import DiscreteMeasure, as_sample

__all__ = [
    "MEAN",
    "LocationEstimate",
    "LocationRegion",
    "SupportRegion",
    "direction_grid",
    "greedy_weights",
    "hausdorff_distance",
    "integral_lp",
    "integral_membership",
    "integral_region_mask",
    "location_region",
    "query_lattice",
    "support_values",
    "trim_cap",
    "zonoid_lp",
    "zonoid_membership",
    "zonoid_region",
    "zonoid_support",
    "zonoid_vertices_2d",
]

DEFAULT_DIRECTIONS_2D = 720
DEFAULT_DIRECTIONS_ND = 2000
VERTEX_LIMIT = 300
_CHUNK_CELLS = 4_000_000


# -- direction grids ---------------------------------------------------------

def direction_grid(d: int, m: int | None = None) -> np.ndarray:
    """Deterministic unit directions, shape ``(m, d)``.

    In 1-D the grid is ``{+1, -1}``.  In 2-D it is ``m`` equally spaced angles
    starting at 0 (``m`` must be a multiple of 4 so that both axes and all
    antipodes are present).  For ``d >= 3`` an unscrambled Sobol set mapped to
    the sphere is used, followed by ``±e_j``.
    """
    if d < 1:
        raise ValueError("dimension must be positive")
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        m = DEFAULT_DIRECTIONS_2D if m is None else int(m)
        if m < 4 or m % 4:
            raise ValueError("2-D direction grids need a positive multiple of 4 directions")
        t = 2 * np.pi * np.arange(m) / m
        u = np.column_stack([np.cos(t), np.sin(t)])
        # exact axis directions
        q = m // 4
        u[0], u[q], u[2 * q], u[3 * q] = (1, 0), (0, 1), (-1, 0), (0, -1)
        return u
    from scipy.stats import norm, qmc

    m = DEFAULT_DIRECTIONS_ND if m is None else int(m)
    if m < 1:
        raise ValueError("need at least one direction")
    bits = max(1, math.ceil(math.log2(m + 2)))
    # the first two unscrambled points (corner and centre) map to zero
    z = norm.ppf(qmc.Sobol(d, scramble=False).random_base2(bits)[2 : m + 2])
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    eye = np.eye(d)
    return np.vstack([z, eye, -eye])


# -- support regions ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SupportRegion:
    """A convex body given by support values on a direction grid.

    ``vertices`` is an optional counter-clockwise polygon (2-D only).
    """

    directions: np.ndarray
    h: np.ndarray
    vertices: np.ndarray | None = None

    def __post_init__(self):
        u = np.atleast_2d(np.asarray(self.directions, dtype=float))
        h = np.asarray(self.h, dtype=float).ravel()
        if h.size != u.shape[0]:
            raise ValueError("one support value per direction required")
        if not np.allclose(np.linalg.norm(u, axis=1), 1.0, rtol=0, atol=1e-12):
            raise ValueError("directions must be unit vectors")
        object.__setattr__(self, "directions", u)
        object.__setattr__(self, "h", h)
        if self.vertices is not None:
            v = np.asarray(self.vertices, dtype=float).reshape(-1, u.shape[1])
            object.__setattr__(self, "vertices", v)

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def __eq__(self, other):
        if not isinstance(other, SupportRegion):
            return NotImplemented
        same_v = (self.vertices is None and other.vertices is None) or (
            self.vertices is not None
            and other.vertices is not None
            and np.array_equal(self.vertices, other.vertices)
        )
        return (
            np.array_equal(self.directions, other.directions)
            and np.array_equal(self.h, other.h)
            and same_v
        )

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        """Outer (grid halfspace) membership of the rows of ``x``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.all(x @ self.directions.T <= self.h + tol, axis=1)

    def problems(self, tol: float = 1e-9) -> list[str]:
        """Invariant violations; an empty list means the region is sound."""
        out = []
        u, h = self.directions, self.h
        # antipodal pairs must not describe an empty slab
        dots = u @ u.T
        i, j = np.nonzero(np.isclose(dots, -1.0, atol=1e-12))
        if np.any(h[i] + h[j] < -tol):
            out.append("empty slab between antipodal directions")
        if self.vertices is not None and self.vertices.size:
            proj = self.vertices @ u.T
            if np.any(proj > h + tol):
                out.append("vertex outside a supporting halfspace")
            if np.any(np.abs(proj.max(axis=0) - h) > tol):
                out.append("support value not attained by the vertices")
        return out

    def to_dict(self) -> dict:
        out = {"directions": self.directions.tolist(), "h": self.h.tolist()}
        if self.vertices is not None:
            out["vertices"] = self.vertices.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SupportRegion":
        return cls(data["directions"], data["h"], data.get("vertices"))


def hausdorff_distance(a: SupportRegion, b: SupportRegion) -> float:
    """Largest support-value gap over the shared grid.

    For convex bodies this converges to the Hausdorff distance as the grid
    becomes dense.
    """
    if a.directions.shape != b.directions.shape or not np.array_equal(a.directions, b.directions):
        raise ValueError("direction grids differ")
    return float(np.max(np.abs(a.h - b.h)))


# -- greedy machinery --------------------------------------------------------

def trim_cap(n: int, alpha: float) -> float:
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    return 1.0 / (alpha * n)


def _fill_counts(n: int, alpha: float) -> tuple[int, float, float]:
    """Number of full caps, the cap, and the leftover mass of the greedy fill."""
    cap = trim_cap(n, alpha)
    full = min(n, int(math.floor(alpha * n + 1e-9)))
    rem = 1.0 - full * cap
    if full == n or rem < 1e-13:
        rem = 0.0
    return full, cap, rem


def support_values(proj: np.ndarray, alpha: float) -> np.ndarray:
    """Greedy maxima of ``q . proj[j]`` over the trimming polytope, per row."""
    proj = np.atleast_2d(proj)
    n = proj.shape[1]
    full, cap, rem = _fill_counts(n, alpha)
    if full == n:
        return cap * proj.sum(axis=1)
    kth = n - full - 1
    part = np.partition(proj, kth, axis=1)
    top = part[:, kth + 1 :].sum(axis=1) if full else np.zeros(proj.shape[0])
    return cap * top + rem * part[:, kth]


def greedy_weights(scores: np.ndarray, alpha: float) -> np.ndarray:
    """Trimming weights maximising ``q . scores`` (ties broken by index)."""
    scores = np.asarray(scores, dtype=float)
    n = scores.size
    return lp.greedy_fill(scores, np.full(n, trim_cap(n, alpha)))


def zonoid_support(sample: np.ndarray, alpha: float, u: np.ndarray) -> float:
    """Support function of the zonoid region in direction ``u``."""
    x = as_sample(sample)
    u = np.asarray(u, dtype=float).ravel()
    return float(support_values(x @ u, alpha)[0])


def _support_grid(x: np.ndarray, alpha: float, directions: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    step = max(1, _CHUNK_CELLS // n)
    out = np.empty(directions.shape[0])
    for s in range(0, directions.shape[0], step):
        out[s : s + step] = support_values(directions[s : s + step] @ x.T, alpha)
    return out


def zonoid_region(
    sample: np.ndarray,
    alpha: float,
    grid: np.ndarray | None = None,
    vertices: bool | None = None,
) -> SupportRegion:
    """Zonoid trimmed region of the empirical measure of ``sample``.

    Args:
        sample: ``(n, d)`` points.
        alpha: trimming level in (0, 1].
        grid: direction grid; defaults to :func:`direction_grid`.
        vertices: compute the exact polygon (2-D only).  ``None`` means
            "when d == 2 and n <= VERTEX_LIMIT".
    """
    x = as_sample(sample)
    n, d = x.shape
    trim_cap(n, alpha)
    u = direction_grid(d) if grid is None else np.atleast_2d(np.asarray(grid, dtype=float))
    h = _support_grid(x, alpha, u)
    if vertices is None:
        vertices = d == 2 and n <= VERTEX_LIMIT
    verts = zonoid_vertices_2d(x, alpha) if vertices else None
    return SupportRegion(u, h, verts)


def zonoid_vertices_2d(sample: np.ndarray, alpha: float, start_angle: float = 0.1234567) -> np.ndarray:
    """Exact vertices of a 2-D zonoid region, counter-clockwise.

    Rotates the direction from ``start_angle`` through a full turn, jumping
    from one change of the greedy optimiser to the next.  The optimiser can
    only change when a point inside the filled set swaps order with one
    outside it, so only those pairs are scanned.  Cost grows like
    ``n^2`` per vertex when ``alpha * n`` is an integer.
    """
    x = as_sample(sample)
    n, d = x.shape
    if d != 2:
        raise ValueError("vertex enumeration is 2-D only")
    full, cap, rem = _fill_counts(n, alpha)
    eta = 1e-9
    theta = start_angle
    stop = start_angle + 2 * np.pi
    verts = []
    while theta < stop:
        u = np.array([math.cos(theta), math.sin(theta)])
        order = np.argsort(-(x @ u), kind="stable")
        top = order[:full]
        v = cap * x[top].sum(axis=0)
        if rem > 0:
            frac = order[full]
            rest = order[full + 1 :]
            v = v + rem * x[frac]
            hi = np.concatenate([top, np.full(rest.size, frac)])
            lo = np.concatenate([np.full(top.size, frac), rest])
        else:
            rest = order[full:]
            hi = np.repeat(top, rest.size)
            lo = np.tile(rest, top.size)
        verts.append(v)
        w = x[hi] - x[lo]
        live = np.any(w != 0, axis=1)
        if not np.any(live):
            break
        w = w[live]
        delta = np.mod(np.arctan2(w[:, 1], w[:, 0]) + np.pi / 2 - theta, 2 * np.pi)
        delta = delta[delta > 1e-15]
        if delta.size == 0:
            break
        theta = theta + float(delta.min()) + eta
    verts = np.array(verts)
    scale = max(1.0, float(np.abs(x).max()))
    keep = [0]
    for i in range(1, len(verts)):
        if np.max(np.abs(verts[i] - verts[keep[-1]])) > 1e-12 * scale:
            keep.append(i)
    verts = verts[keep]
    if len(verts) > 1 and np.max(np.abs(verts[-1] - verts[0])) <= 1e-12 * scale:
        verts = verts[:-1]
    return verts


# -- LP-based membership -----------------------------------------------------

def zonoid_lp(sample: np.ndarray, alpha: float, x: np.ndarray) -> lp.BoundedLp:
    """Feasibility program for ``x`` being a trimmed weighted mean."""
    pts = as_sample(sample)
    n, d = pts.shape
    x = np.asarray(x, dtype=float).ravel()
    if x.size != d:
        raise ValueError("dimension mismatch")
    rows = np.vstack([pts.T, -pts.T])
    rhs = np.concatenate([x, -x])
    return lp.BoundedLp(np.zeros(n), np.full(n, trim_cap(n, alpha)), rows, rhs)


def zonoid_membership(sample: np.ndarray, alpha: float, x: np.ndarray) -> bool:
    """Exact test of ``x`` in the zonoid region (no direction grid involved)."""
    pts = as_sample(sample)
    prog = zonoid_lp(pts, alpha, x)
    toward = pts @ (np.asarray(x, dtype=float).ravel() - pts.mean(axis=0))
    return lp.feasible(prog, start=greedy_weights(toward, alpha)).ok


def integral_lp(
    sample: np.ndarray, alpha: float, family: FunctionFamily, x: np.ndarray, epsilon: float = 0.0
) -> lp.BoundedLp:
    """Program with one row ``sum q_i f(X_i) >= f(x) - epsilon`` per member."""
    pts = as_sample(sample)
    n = pts.shape[0]
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape != (1, pts.shape[1]):
        raise ValueError("dimension mismatch")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    rows = family.values(pts).T
    rhs = family.values(x)[0] - epsilon
    return lp.BoundedLp(np.zeros(n), np.full(n, trim_cap(n, alpha)), rows, rhs)


def integral_membership(
    sample: np.ndarray, alpha: float, family: FunctionFamily, x: np.ndarray, epsilon: float = 0.0
) -> bool:
    """Whether one trimmed measure dominates ``f(x) - epsilon`` for every member."""
    prog = integral_lp(sample, alpha, family, x, epsilon)
    if prog.rows.shape[0] == 0:
        return True
    start = greedy_weights(prog.rows.mean(axis=0), alpha)
    return lp.feasible(prog, start=start).ok


def _simplex_lattice(k: int, budget: int = 400) -> np.ndarray:
    """Points of the probability simplex in R^k on the finest lattice within budget."""
    if k == 1:
        return np.ones((1, 1))
    res = 1
    while math.comb(res + 1 + k - 1, k - 1) <= budget:
        res += 1
    pts = [c for c in itertools.product(range(res + 1), repeat=k) if sum(c) == res] if k <= 6 else None
    if pts is None:
        pts = list(np.eye(k, dtype=int) * res)
        pts.append(np.full(k, res // k))
    return np.asarray(pts, dtype=float) / res


def integral_region_mask(
    sample: np.ndarray,
    alpha: float,
    family: FunctionFamily,
    query: np.ndarray,
    epsilon: float = 0.0,
) -> np.ndarray:
    """Pointwise :func:`integral_membership` over the rows of ``query``.

    Most points are settled by exact certificates before any LP is run:
    a weight vector ``lam`` on the members with ``lam . r > h(lam)`` proves
    infeasibility (``h`` is the greedy support value of the scores
    ``lam . f(X_i)``), and a greedy vertex ``v`` with ``r <= v`` proves
    feasibility.  Only the remaining points get a warm-started LP.
    """
    pts = as_sample(sample)
    query = np.atleast_2d(np.asarray(query, dtype=float))
    if query.shape[0] == 0:
        raise ValueError("empty query grid")
    if query.shape[1] != pts.shape[1]:
        raise ValueError("dimension mismatch")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    k = len(family)
    if k == 0:
        return np.ones(query.shape[0], dtype=bool)
    n = pts.shape[0]
    caps = np.full(n, trim_cap(n, alpha))
    fvals = family.values(pts)  # (n, k)
    need = family.values(query) - epsilon  # (m, k)
    lams = _simplex_lattice(k)
    scores = lams @ fvals.T  # (L, n)
    weights = np.array([lp.greedy_fill(s, caps) for s in scores])
    h = np.einsum("ln,ln->l", weights, scores)
    vertices = weights @ fvals  # (L, k)

    scale = max(1.0, float(np.abs(fvals).max()), float(np.abs(need).max()))
    tol = lp.FEAS_TOL * scale
    gaps = h[None, :] - need @ lams.T  # (m, L)
    outside = np.any(gaps < -tol, axis=1)
    inside = np.zeros(query.shape[0], dtype=bool)
    for s in range(0, query.shape[0], 2048):
        block = need[s : s + 2048]
        inside[s : s + 2048] = np.any(np.all(block[:, None, :] <= vertices[None, :, :], axis=2), axis=1)
    inside &= ~outside
    found = []
    for i in np.flatnonzero(~outside & ~inside):
        r = need[i]
        if found and np.any(np.all(r <= np.asarray(found), axis=1)):
            inside[i] = True
            continue
        best = int(np.argmin(gaps[i]))
        prog = lp.BoundedLp(np.zeros(n), caps, fvals.T, r)
        res = lp.feasible(prog, start=weights[best])
        if res.ok:
            inside[i] = True
            found.append(fvals.T @ res.solution)
    return inside


def query_lattice(sample: np.ndarray, size: int = 101, inflate: float = 0.1) -> np.ndarray:
    """Axis-aligned lattice over the sample bounding box widened by ``inflate``.

    Rows run with the last coordinate varying fastest.
    """
    x = as_sample(sample)
    lo, hi = x.min(axis=0), x.max(axis=0)
    pad = 0.5 * inflate * np.where(hi > lo, hi - lo, 1.0)
    axes = [np.linspace(a, b, size) for a, b in zip(lo - pad, hi + pad)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


# -- location regions --------------------------------------------------------

@dataclass(frozen=True)
class LocationEstimate:
    """A point-valued location functional on discrete measures.

    ``exact`` marks estimators whose trimmed region is computed exactly
    (only the mean); anything else is approximated by vertex sampling.
    """

    kind: str
    evaluate: Callable[[DiscreteMeasure], np.ndarray] = field(compare=False)
    exact: bool = False


MEAN = LocationEstimate("mean", DiscreteMeasure.mean, exact=True)


@dataclass(frozen=True, eq=False)
class LocationRegion:
    points: np.ndarray
    region: SupportRegion | None
    approximate: bool


def location_region(
    sample: np.ndarray,
    alpha: float,
    estimate: LocationEstimate = MEAN,
    n_extreme: int = 64,
    seed: int = 0,
    grid: np.ndarray | None = None,
) -> LocationRegion:
    """Image of the trimming class under a location estimate.

    ``points`` holds the estimate at ``n_extreme`` vertices of the trimming
    polytope: the greedy optimisers for ``+e_1`` followed by random
    directions drawn from ``seed``.  For the mean the exact zonoid region is
    returned as well; for other estimates the cloud is an inner
    approximation and is flagged as such.
    """
    x = as_sample(sample)
    if n_extreme < 1:
        raise ValueError("n_extreme must be at least 1")
    n, d = x.shape
    rng = np.random.default_rng(seed)
    dirs = np.zeros((n_extreme, d))
    dirs[0, 0] = 1.0
    if n_extreme > 1:
        z = rng.standard_normal((n_extreme - 1, d))
        dirs[1:] = z / np.linalg.norm(z, axis=1, keepdims=True)
    pts = []
    for u in dirs:
        q = greedy_weights(x @ u, alpha)
        if estimate is MEAN:
            pts.append(q @ x)
        else:
            pts.append(np.asarray(estimate.evaluate(DiscreteMeasure.from_weights(x, q)), dtype=float))
    pts = np.array(pts)
    if estimate.exact:
        return LocationRegion(pts, zonoid_region(x, alpha, grid), approximate=False)
    return LocationRegion(pts, None, approximate=True)
