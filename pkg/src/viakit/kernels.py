"""Exit/hitting times, capture margins, and grid fields of them.

Everything is evaluated along the RK4-selected solution: the toolkit
assumes the unique-solution regime, so the inf/sup over solution
bundles collapses to evaluation along one trajectory per start (stated
prominently in the README).  Exit and hitting events are bracketed by a
membership sign change between consecutive RK4 nodes and refined by
bisection on a single sub-step; a grazing touch that flips membership
counts as the event (closed-set convention).

Grid sweeps advance all nodes in one vectorized batch; per-node
arithmetic is elementwise, so splitting the node list across workers
changes nothing in the results (bit-identical gather).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .common import BLOWUP_NORM, INF
from .dynamics import VectorField, rk4_step, step_schedule
from .errors import NoConvergence, NonFinite
from .sets import SetOracle

#: default exit-time refinement: |error| <= REFINE_FRAC * T_max
REFINE_FRAC = 1e-8


# ---------------------------------------------------------------------------
# Grids and time fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Uniform sampling lattice: counts[k] cells (counts[k]+1 nodes) per axis."""

    lo: np.ndarray
    hi: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        counts = np.atleast_1d(np.asarray(self.counts, dtype=int))
        if np.any(lo >= hi):
            raise ValueError("grid needs lo < hi componentwise")
        if np.any(counts < 2):
            raise ValueError("grid needs at least 2 cells per axis")
        for a in (lo, hi, counts):
            a.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "counts", counts)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple:
        return tuple(int(c) + 1 for c in self.counts)

    @property
    def spacing(self) -> np.ndarray:
        return (self.hi - self.lo) / self.counts

    @property
    def cell_diagonal(self) -> float:
        return float(np.linalg.norm(self.spacing))

    @property
    def node_count(self) -> int:
        return int(np.prod(self.shape))

    def axes(self):
        return [np.linspace(self.lo[k], self.hi[k], int(self.counts[k]) + 1)
                for k in range(self.dim)]

    def nodes(self) -> np.ndarray:
        """All nodes as an (N, dim) array in row-major (C) order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)


@dataclass(frozen=True)
class TimeField:
    """Per-node nonnegative times (INF sentinel for +infinity).

    ``inside`` marks nodes that satisfied the operation's membership
    precondition (e.g. nodes of K for an exit field); values at nodes
    with inside=False are the convention stated by the producing op.
    """

    grid: GridSpec
    values: np.ndarray
    inside: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        inside = np.asarray(self.inside, dtype=bool)
        if len(values) != self.grid.node_count or len(inside) != len(values):
            raise ValueError("field length must match the grid node count")
        values.flags.writeable = False
        inside.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "inside", inside)

    def superlevel(self, T: float) -> np.ndarray:
        """Mask of inside nodes with value >= T (e.g. the T-viability kernel)."""
        return self.inside & (self.values >= T)

    def sublevel(self, T: float) -> np.ndarray:
        """Mask of nodes with value <= T (e.g. the T-capture basin)."""
        return self.values <= T


# ---------------------------------------------------------------------------
# Event detection along RK4 trajectories
# ---------------------------------------------------------------------------


def _bisect_crossing(field, t0, x0, h, entered, tol):
    """First s in (0, h] with entered(state at t0+s); assumes entered at h.

    Uses a single RK4 sub-step of size s from (t0, x0); its local error
    is far below the trajectory's own. Returns the "first true" end of
    the shrinking bracket so a grazing tie counts as the event.
    """
    lo, hi = 0.0, h
    for _ in range(80):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if entered(rk4_step(field, t0, x0, mid)):
            hi = mid
        else:
            lo = mid
    return hi


def _event_sweep(field, X0, T_max, h, K=None, C=None, refine_tol=None,
                 k_inside0=None):
    """Batched RK4 sweep recording first-exit (from K) and first-hit (of C).

    Returns (exit_times, hit_times, failed); missing events are INF.
    Rows whose integration blows up get failed=True and keep whatever
    events were already found.
    """
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    n = len(X0)
    if refine_tol is None:
        refine_tol = REFINE_FRAC * max(T_max, 1.0)
    want_exit = K is not None
    want_hit = C is not None

    exit_t = np.full(n, INF)
    hit_t = np.full(n, INF)
    failed = np.zeros(n, dtype=bool)

    if want_hit:
        hit_t[C.contains_many(X0)] = 0.0
    if want_exit:
        inside = k_inside0 if k_inside0 is not None else K.contains_many(X0)
        exit_t[~inside] = 0.0

    x = X0.copy()
    need_exit = np.full(n, want_exit) & (exit_t > 0.0)
    need_hit = np.full(n, want_hit) & (hit_t > 0.0)
    active = need_exit | need_hit

    for t, hj in step_schedule(0.0, T_max, h):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        xa = x[idx]
        xn = rk4_step(field, t, xa, hj)
        norms = np.linalg.norm(xn, axis=1)
        bad = ~np.isfinite(norms) | (norms > BLOWUP_NORM)
        if bad.any():
            failed[idx[bad]] = True
            active[idx[bad]] = False
            good = ~bad
            idx, xa, xn = idx[good], xa[good], xn[good]
            if len(idx) == 0:
                continue

        if want_exit:
            sub = need_exit[idx]
            if sub.any():
                left = ~K.contains_many(xn[sub])
                for row, xprev in zip(idx[sub][left], xa[sub][left]):
                    s = _bisect_crossing(field, t, xprev,
                                         hj, lambda z: not K.contains(z), refine_tol)
                    exit_t[row] = t + s
                    need_exit[row] = False
        if want_hit:
            sub = need_hit[idx]
            if sub.any():
                entered = C.contains_many(xn[sub])
                for row, xprev in zip(idx[sub][entered], xa[sub][entered]):
                    s = _bisect_crossing(field, t, xprev,
                                         hj, lambda z: C.contains(z), refine_tol)
                    hit_t[row] = t + s
                    need_hit[row] = False

        x[idx] = xn
        active = need_exit | need_hit
    return exit_t, hit_t, failed


# ---------------------------------------------------------------------------
# Scalar time functionals
# ---------------------------------------------------------------------------


def exit_time(field: VectorField, K: SetOracle, x, T_max: float, h: float,
              refine_tol=None) -> float:
    """First time the RK4 trajectory from x leaves K (INF if none by T_max)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not K.contains(x):
        raise ValueError("exit_time requires x in K")
    ex, _, failed = _event_sweep(field, x[None, :], T_max, h, K=K,
                                 refine_tol=refine_tol)
    if failed[0] and ex[0] >= INF:
        raise NonFinite("trajectory blew up before exiting K")
    return float(ex[0])


def hitting_time(field: VectorField, C: SetOracle, x, T_max: float, h: float,
                 refine_tol=None) -> float:
    """First time the RK4 trajectory from x enters C (0 if already there)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _, ht, failed = _event_sweep(field, x[None, :], T_max, h, C=C,
                                 refine_tol=refine_tol)
    if failed[0] and ht[0] >= INF:
        raise NonFinite("trajectory blew up before hitting C")
    return float(ht[0])


def capture_margin(field: VectorField, K: SetOracle, C: SetOracle, x,
                   T_max: float, h: float) -> float:
    """Hitting time of C minus exit time of K along the same solution.

    With C = K this is exactly -exit_time (the hitting term is zero).
    Nonpositive margins mean the trajectory reaches C no later than it
    leaves K.  Conventions: hit never found -> +INF; hit found but no
    exit by T_max -> -INF.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not K.contains(x):
        raise ValueError("capture_margin requires x in K")
    ex, ht, failed = _event_sweep(field, x[None, :], T_max, h, K=K, C=C)
    if failed[0] and ht[0] >= INF and ex[0] >= INF:
        raise NonFinite("trajectory blew up before either event")
    return _margin_of(float(ex[0]), float(ht[0]))


def _margin_of(exit_t: float, hit_t: float) -> float:
    if hit_t >= INF:
        return INF
    if exit_t >= INF:
        return -INF
    return hit_t - exit_t


# ---------------------------------------------------------------------------
# Grid fields (worker-pool dispatchable)
# ---------------------------------------------------------------------------


def _chunks(n: int, workers: int):
    workers = max(1, int(workers))
    size = max(1, -(-n // workers))
    return [(s, min(s + size, n)) for s in range(0, n, size)]


def _run_chunks(fn, n: int, workers: int):
    spans = _chunks(n, workers)
    if workers <= 1 or len(spans) == 1:
        return [fn(s, e) for s, e in spans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda se: fn(*se), spans))


def viab_field(field: VectorField, K: SetOracle, grid: GridSpec, T_max: float,
               h: float, workers: int = 1) -> TimeField:
    """Exit time of K at every grid node; {value >= T} is the T-viability kernel.

    Nodes outside K are marked inside=False and get value 0 (they are
    already out).  Per-node integration failures are recorded as 0.
    """
    nodes = grid.nodes()
    inside = K.contains_many(nodes)
    values = np.zeros(len(nodes))

    def run(s, e):
        blk = slice(s, e)
        ex, _, failed = _event_sweep(field, nodes[blk], T_max, h, K=K,
                                     k_inside0=inside[blk])
        ex = ex.copy()
        ex[failed & (ex >= INF)] = 0.0
        return ex

    parts = _run_chunks(run, len(nodes), workers)
    values = np.concatenate(parts)
    values[~inside] = 0.0
    return TimeField(grid, values, inside)


def capt_field(field: VectorField, C: SetOracle, grid: GridSpec, T_max: float,
               h: float, workers: int = 1) -> TimeField:
    """Hitting time of C at every grid node; {value <= T} is the T-capture basin.

    Nodes already in C get 0. A node whose integration blows up without
    hitting keeps INF (it never reached C).
    """
    nodes = grid.nodes()

    def run(s, e):
        _, ht, _ = _event_sweep(field, nodes[s:e], T_max, h, C=C)
        return ht

    values = np.concatenate(_run_chunks(run, len(nodes), workers))
    return TimeField(grid, values, np.ones(len(nodes), dtype=bool))


def viable_capt_field(field: VectorField, K: SetOracle, C: SetOracle,
                      grid: GridSpec, T_max: float, h: float,
                      workers: int = 1) -> TimeField:
    """Capture margin at every in-K node; {value <= 0} is the viable-capture basin."""
    nodes = grid.nodes()
    inside = K.contains_many(nodes)

    def run(s, e):
        blk = slice(s, e)
        ex, ht, _ = _event_sweep(field, nodes[blk], T_max, h, K=K, C=C,
                                 k_inside0=inside[blk])
        return np.array([_margin_of(a, b) for a, b in zip(ex, ht)])

    values = np.concatenate(_run_chunks(run, len(nodes), workers))
    values[~inside] = INF
    return TimeField(grid, values, inside)


def discrete_kernel(field: VectorField, K: SetOracle, grid: GridSpec,
                    h: float, flow_step=None, workers: int = 1):
    """Fixed-point node deletion: an outer approximation of the viability kernel.

    Start with all in-K nodes; repeatedly delete nodes whose one-step
    image flow(h, .) falls farther than (cell diagonal + h * local
    speed) from every surviving node; iterate to the fixed point.

    Returns:
        (alive, iterations): boolean node mask and the sweep count.

    Raises:
        NoConvergence: if the iteration count exceeds the node count
            (impossible for monotone deletion; guards bugs).
    """
    nodes = grid.nodes()
    inside = K.contains_many(nodes)
    alive = inside.copy()
    if not alive.any():
        return alive, 0
    if flow_step is None:
        flow_step = h / 100.0

    idx = np.flatnonzero(alive)
    pts = nodes[idx]
    speed = np.linalg.norm(np.atleast_2d(field(0.0, pts)), axis=1)
    radius = grid.cell_diagonal + h * speed

    def fly(s, e):
        x = pts[s:e].copy()
        ok = np.ones(len(x), dtype=bool)
        for t, hj in step_schedule(0.0, h, flow_step):
            xn = rk4_step(field, t, x[ok], hj)
            nrm = np.linalg.norm(xn, axis=1)
            good = np.isfinite(nrm) & (nrm <= BLOWUP_NORM)
            sub = np.flatnonzero(ok)
            x[sub[good]] = xn[good]
            ok[sub[~good]] = False
        return x, ok

    parts = _run_chunks(fly, len(pts), workers)
    images = np.vstack([p for p, _ in parts])
    img_ok = np.concatenate([o for _, o in parts])

    live = img_ok.copy()  # rows of pts still alive
    iterations = 0
    while True:
        iterations += 1
        if iterations > len(nodes) + 1:
            raise NoConvergence("discrete_kernel failed to reach a fixed point")
        survivors = pts[live]
        if len(survivors) == 0:
            break
        tree = cKDTree(survivors)
        d, _ = tree.query(images[live])
        kill = d > radius[live]
        if not kill.any():
            break
        sub = np.flatnonzero(live)
        live[sub[kill]] = False
    alive[:] = False
    alive[idx[live]] = True
    return alive, iterations


@dataclass(frozen=True)
class RepellerReport:
    is_repeller: bool
    t_bar: float  # sup of finite exit times over in-K nodes


def repeller_check(field: VectorField, K: SetOracle, grid: GridSpec,
                   T_max: float, h: float, workers: int = 1) -> RepellerReport:
    """True iff every in-K node exits before T_max; also the sup exit time."""
    tf = viab_field(field, K, grid, T_max, h, workers=workers)
    vals = tf.values[tf.inside]
    if len(vals) == 0:
        return RepellerReport(True, 0.0)
    finite = vals[vals < INF]
    t_bar = float(finite.max()) if len(finite) else 0.0
    return RepellerReport(bool(np.all(vals < INF)), t_bar)
