"""Closed-set oracles: membership, distance, best-approximation projection.

Sets are represented by oracles rather than meshes; every construction
downstream consumes only membership, distance, and projection.  The
primitive kinds (box, ball, halfspace, point cloud) have exact analytic
rules; composites are built on top:

  * product       - exact (per-factor slices)
  * union         - exact (min of member distances, argmin projection)
  * intersection  - distance() is a certified lower bound (max of member
                    distances); projection runs alternating projections
                    (<= 50 sweeps) and gives the matching upper bound
  * complement    - closure of the complement; projection from inside the
                    hole needs the base primitive's analytic boundary
                    rule and raises Unsupported otherwise
  * sublevel      - membership is exact; distance is the positive residual
                    divided by a declared Lipschitz constant (a lower
                    bound), projection is Unsupported

Also here: the contingent-direction residual test (a finite-ladder proxy
for liminf_{h->0+} d(x+hv, K)/h) and finite Painleve-Kuratowski limits
of point-cloud sequences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .common import INF
from .errors import Unsupported


class SetOracle:
    """A closed subset of R^dim described by membership/distance/projection."""

    kind = "abstract"

    def __init__(self, dim: int):
        self.dim = int(dim)

    # -- membership --------------------------------------------------------
    def margin(self, x) -> float:
        """Signed residual: <= 0 inside, > 0 outside (exact zero test)."""
        raise NotImplementedError

    def margin_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([self.margin(row) for row in X])

    def contains(self, x) -> bool:
        return bool(self.margin(np.asarray(x, dtype=float)) <= 0.0)

    def contains_many(self, X) -> np.ndarray:
        return self.margin_many(X) <= 0.0

    # -- metric -------------------------------------------------------------
    def distance(self, x) -> float:
        """Euclidean distance to the set (exact for primitive kinds)."""
        raise NotImplementedError

    def project(self, y) -> np.ndarray:
        """A best approximation of y in the set."""
        raise NotImplementedError

    # -- boundary helpers (used by characteristics) -------------------------
    def boundary_distance(self, x) -> float:
        """Distance from x to the topological boundary of the set."""
        raise Unsupported(f"boundary_distance not available for kind {self.kind!r}")

    def _project_to_boundary_from_inside(self, y) -> np.ndarray:
        raise Unsupported(f"no analytic interior boundary projection for kind {self.kind!r}")


# ---------------------------------------------------------------------------
# Primitives
# ---------------------------------------------------------------------------


class Box(SetOracle):
    """Axis-aligned box [lo, hi]; infinite bounds allowed (halfspaces/slabs)."""

    kind = "box"

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("box needs lo <= hi componentwise")
        super().__init__(len(lo))
        self.lo, self.hi = lo, hi

    def margin(self, x):
        return float(np.max(np.maximum(self.lo - x, x - self.hi)))

    def margin_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.max(np.maximum(self.lo - X, X - self.hi), axis=1)

    def distance(self, x):
        d = np.maximum(np.maximum(self.lo - x, x - self.hi), 0.0)
        return float(np.linalg.norm(d))

    def project(self, y):
        return np.clip(np.asarray(y, dtype=float), self.lo, self.hi)

    def boundary_distance(self, x):
        x = np.asarray(x, dtype=float)
        if self.margin(x) > 0.0:
            return self.distance(x)
        gaps = np.minimum(x - self.lo, self.hi - x)
        gaps = gaps[np.isfinite(gaps)]
        return float(gaps.min()) if len(gaps) else INF

    def _project_to_boundary_from_inside(self, y):
        y = np.asarray(y, dtype=float).copy()
        gap_lo = y - self.lo
        gap_hi = self.hi - y
        cands = np.concatenate([gap_lo, gap_hi])
        k = int(np.argmin(np.where(np.isfinite(cands), cands, np.inf)))
        if not np.isfinite(cands[k]):
            raise Unsupported("box has no finite face to project onto")
        if k < self.dim:
            y[k] = self.lo[k]
        else:
            y[k - self.dim] = self.hi[k - self.dim]
        return y


class Ball(SetOracle):
    """Closed Euclidean ball."""

    kind = "ball"

    def __init__(self, center, radius: float):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        super().__init__(len(center))
        self.center, self.radius = center, float(radius)

    def margin(self, x):
        return float(np.linalg.norm(x - self.center) - self.radius)

    def margin_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.linalg.norm(X - self.center, axis=1) - self.radius

    def distance(self, x):
        return max(self.margin(x), 0.0)

    def project(self, y):
        y = np.asarray(y, dtype=float)
        r = np.linalg.norm(y - self.center)
        if r <= self.radius:
            return y.copy()
        return self.center + (self.radius / r) * (y - self.center)

    def boundary_distance(self, x):
        return abs(self.margin(x))

    def _project_to_boundary_from_inside(self, y):
        y = np.asarray(y, dtype=float)
        d = y - self.center
        r = np.linalg.norm(d)
        if r == 0.0:
            d = np.zeros(self.dim)
            d[0] = 1.0
            r = 1.0
        return self.center + (self.radius / r) * d


class Halfspace(SetOracle):
    """{x : <normal, x> <= offset}."""

    kind = "halfspace"

    def __init__(self, normal, offset: float):
        normal = np.atleast_1d(np.asarray(normal, dtype=float))
        nn = np.linalg.norm(normal)
        if nn == 0:
            raise ValueError("normal must be nonzero")
        super().__init__(len(normal))
        self.normal, self.offset = normal, float(offset)
        self._unit = normal / nn
        self._scaled_offset = offset / nn

    def margin(self, x):
        return float(x @ self._unit - self._scaled_offset)

    def margin_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return X @ self._unit - self._scaled_offset

    def distance(self, x):
        return max(self.margin(x), 0.0)

    def project(self, y):
        y = np.asarray(y, dtype=float)
        m = self.margin(y)
        return y - max(m, 0.0) * self._unit

    def boundary_distance(self, x):
        return abs(self.margin(x))

    def _project_to_boundary_from_inside(self, y):
        y = np.asarray(y, dtype=float)
        return y - self.margin(y) * self._unit


class PointCloudSet(SetOracle):
    """A finite set of points; projection ties break to the lowest index."""

    kind = "point-cloud"

    def __init__(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        super().__init__(points.shape[1] if points.size else 1)
        self.points = points
        self._tree = cKDTree(points) if len(points) else None

    def margin(self, x):
        if self._tree is None:
            return INF
        d, _ = self._tree.query(np.asarray(x, dtype=float))
        return float(d)

    def margin_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self._tree is None:
            return np.full(len(X), INF)
        d, _ = self._tree.query(X)
        return np.asarray(d, dtype=float)

    def contains(self, x) -> bool:
        # membership tolerance for float round-off on exact points
        return bool(self.margin(x) <= 1e-9)

    def contains_many(self, X):
        return self.margin_many(X) <= 1e-9

    def distance(self, x):
        return self.margin(x)

    def project(self, y):
        if self._tree is None:
            raise Unsupported("cannot project onto the empty set")
        y = np.asarray(y, dtype=float)
        d = np.linalg.norm(self.points - y, axis=1)
        best = d.min()
        idx = int(np.flatnonzero(d <= best + 1e-12 * (1.0 + best))[0])
        return self.points[idx].copy()


# ---------------------------------------------------------------------------
# Composites
# ---------------------------------------------------------------------------


class Product(SetOracle):
    """Cartesian product of factor oracles over consecutive coordinate blocks."""

    kind = "product"

    def __init__(self, *factors: SetOracle):
        if not factors:
            raise ValueError("product needs at least one factor")
        super().__init__(sum(f.dim for f in factors))
        self.factors = factors
        self._slices = []
        start = 0
        for f in factors:
            self._slices.append(slice(start, start + f.dim))
            start += f.dim

    def _parts(self, x):
        return [np.asarray(x)[s] for s in self._slices]

    def margin(self, x):
        return max(f.margin(p) for f, p in zip(self.factors, self._parts(x)))

    def margin_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.full(len(X), -np.inf)
        for f, s in zip(self.factors, self._slices):
            out = np.maximum(out, f.margin_many(X[:, s]))
        return out

    def distance(self, x):
        sq = sum(f.distance(p) ** 2 for f, p in zip(self.factors, self._parts(x)))
        return float(np.sqrt(sq))

    def project(self, y):
        return np.concatenate([f.project(p) for f, p in zip(self.factors, self._parts(y))])

    def boundary_distance(self, x):
        if self.margin(x) > 0.0:
            return self.distance(x)
        return min(f.boundary_distance(p) for f, p in zip(self.factors, self._parts(x)))


class Union(SetOracle):
    kind = "union"

    def __init__(self, *members: SetOracle):
        if not members:
            raise ValueError("union needs at least one member")
        super().__init__(members[0].dim)
        self.members = members

    def margin(self, x):
        return min(m.margin(x) for m in self.members)

    def margin_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.full(len(X), np.inf)
        for m in self.members:
            out = np.minimum(out, m.margin_many(X))
        return out

    def distance(self, x):
        return min(m.distance(x) for m in self.members)

    def project(self, y):
        dists = [m.distance(y) for m in self.members]
        return self.members[int(np.argmin(dists))].project(y)

    def boundary_distance(self, x):
        # valid for disjoint members; good enough for boundary-data dispatch
        return min(m.boundary_distance(x) for m in self.members)


class Intersection(SetOracle):
    """Intersection; distance() is a certified lower bound (max of members)."""

    kind = "intersection"

    def __init__(self, *members: SetOracle, max_sweeps: int = 50):
        if not members:
            raise ValueError("intersection needs at least one member")
        super().__init__(members[0].dim)
        self.members = members
        self.max_sweeps = max_sweeps

    def margin(self, x):
        return max(m.margin(x) for m in self.members)

    def margin_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.full(len(X), -np.inf)
        for m in self.members:
            out = np.maximum(out, m.margin_many(X))
        return out

    def distance(self, x):
        return max(m.distance(x) for m in self.members)

    def project(self, y):
        """Alternating projections; the result certifies the upper bound."""
        z = np.asarray(y, dtype=float).copy()
        for _ in range(self.max_sweeps):
            moved = 0.0
            for m in self.members:
                zn = m.project(z)
                moved = max(moved, float(np.linalg.norm(zn - z)))
                z = zn
            if moved <= 1e-12:
                break
        return z

    def distance_interval(self, y):
        """(certified lower bound, alternating-projection upper bound)."""
        lo = self.distance(y)
        z = self.project(y)
        return lo, float(np.linalg.norm(z - np.asarray(y, dtype=float)))

    def boundary_distance(self, x):
        if self.margin(x) > 0.0:
            return self.distance(x)
        return min(abs(m.margin(x)) for m in self.members)


class Complement(SetOracle):
    """Closure of the complement of a primitive with a signed margin."""

    kind = "complement"

    def __init__(self, base: SetOracle):
        super().__init__(base.dim)
        self.base = base

    def margin(self, x):
        return -self.base.margin(x)

    def margin_many(self, X):
        return -self.base.margin_many(X)

    def distance(self, x):
        # exact when the base margin is a signed Euclidean distance
        # (ball, halfspace, box interiors); zero outside the base.
        return max(-self.base.margin(x), 0.0)

    def project(self, y):
        y = np.asarray(y, dtype=float)
        if self.contains(y):
            return y.copy()
        return self.base._project_to_boundary_from_inside(y)

    def boundary_distance(self, x):
        return abs(self.base.margin(x))


class Sublevel(SetOracle):
    """{x : fn(x) <= 0}; membership exact, distance a Lipschitz lower bound."""

    kind = "sublevel"

    def __init__(self, fn, dim: int, lipschitz: float = 1.0):
        super().__init__(dim)
        self.fn = fn
        self.lipschitz = float(lipschitz)

    def margin(self, x):
        v = np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)
        return float(v.reshape(-1)[0])

    def margin_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.asarray(self.fn(X), dtype=float).reshape(len(X))

    def distance(self, x):
        return max(self.margin(x), 0.0) / self.lipschitz

    def project(self, y):
        raise Unsupported("sublevel sets have no analytic projection")


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def box(lo, hi) -> Box:
    return Box(lo, hi)


def ball(center, radius: float) -> Ball:
    return Ball(center, radius)


def halfspace(normal, offset: float) -> Halfspace:
    return Halfspace(normal, offset)


def point_cloud_set(points) -> PointCloudSet:
    return PointCloudSet(points)


def product(*factors: SetOracle) -> Product:
    return Product(*factors)


def union(*members: SetOracle) -> Union:
    return Union(*members)


def intersection(*members: SetOracle) -> Intersection:
    return Intersection(*members)


def complement(base: SetOracle) -> Complement:
    return Complement(base)


def sublevel(fn, dim: int, lipschitz: float = 1.0) -> Sublevel:
    return Sublevel(fn, dim, lipschitz)


def sphere(center, radius: float) -> Intersection:
    """The sphere {|x - c| = r} as ball-intersect-complement; all rules exact."""
    return Intersection(Ball(center, radius), Complement(Ball(center, radius)))


def whole_space(dim: int) -> Box:
    return Box([-np.inf] * dim, [np.inf] * dim)


def empty_set(dim: int) -> PointCloudSet:
    return PointCloudSet(np.zeros((0, dim)))


# ---------------------------------------------------------------------------
# Point clouds and Painleve-Kuratowski limits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointCloud:
    """A finite point list with a merge radius; points >= tol/2 apart."""

    points: np.ndarray
    tol: float = 0.0

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.tol > 0 and len(points) > 1:
            points = _merge_points(points, self.tol / 2.0)
        points.flags.writeable = False
        object.__setattr__(self, "points", points)

    def __len__(self):
        return len(self.points)

    def as_oracle(self) -> PointCloudSet:
        return PointCloudSet(self.points)


def _merge_points(points: np.ndarray, radius: float) -> np.ndarray:
    """Greedy dedup keeping the earliest representative of each cluster."""
    if radius <= 0 or len(points) < 2:
        return points.copy()
    tree = cKDTree(points)
    keep = np.ones(len(points), dtype=bool)
    for i in range(len(points)):
        if not keep[i]:
            continue
        for j in tree.query_ball_point(points[i], radius):
            if j > i:
                keep[j] = False
    return points[keep]


def tangent_residual(K: SetOracle, x, v, h_min: float = 1e-6, h_max: float = 1e-2) -> float:
    """Finite-ladder proxy for liminf_{h->0+} d(x + h v, K) / h.

    A value near zero certifies v as a contingent direction to K at x;
    for a unit v pointing at angle theta off the set it is about
    sin(theta).  The ladder runs from h_max down to h_min with ratio 1/2.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if not K.contains(x):
        raise ValueError("tangent_residual requires x in K")
    if not (0.0 < h_min < h_max):
        raise ValueError("need 0 < h_min < h_max")
    best = np.inf
    h = h_max
    while h >= h_min * (1.0 - 1e-12):
        best = min(best, K.distance(x + h * v) / h)
        h *= 0.5
    return float(best)


def set_limit(clouds, mode: str, eps: float) -> PointCloud:
    """Finite proxy for the upper/lower limit of a sequence of point clouds.

    "Infinitely many" is approximated by the tail (the last half of the
    sequence): upper mode keeps candidates within eps of at least half
    of the tail clouds, lower mode requires all tail clouds.  Candidates
    are drawn from the union of all cloud points.
    """
    clouds = list(clouds)
    if len(clouds) < 2:
        raise ValueError("set_limit needs at least two clouds")
    if mode not in ("upper", "lower"):
        raise ValueError("mode must be 'upper' or 'lower'")
    tail = clouds[len(clouds) // 2:]
    trees = [cKDTree(np.atleast_2d(c.points)) for c in tail if len(c.points)]
    candidates = np.vstack([np.atleast_2d(c.points) for c in clouds if len(c.points)])
    counts = np.zeros(len(candidates), dtype=int)
    for tree in trees:
        d, _ = tree.query(candidates)
        counts += (d <= eps)
    if mode == "upper":
        selected = candidates[counts * 2 >= len(tail)]
    elif len(trees) < len(tail):
        selected = candidates[:0]  # an empty tail cloud defeats the lower limit
    else:
        selected = candidates[counts == len(tail)]
    return PointCloud(selected, tol=eps)
