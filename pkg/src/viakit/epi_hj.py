"""Value functions via trajectory optimization and epigraph kernels/basins.

Two routes to the same objects, kept deliberately independent so they can
cross-validate:

  * direct route: sample J(t) = e^{at} u(x(t)) + int_0^t e^{a tau}
    l(x, x') dtau along the RK4 trajectory and take sup (value_sup) or
    inf (value_inf) over the finite horizon;
  * epigraph route: lift the dynamics to (x, y) with
    y' = -a y - l(x, f(x)) and compute the viability kernel (sup) or
    capture basin (inf) of the epigraph of u on an (x, y) grid; the
    lower envelope of the result is the value function.

The finite horizon T_max stands in for sup/inf over all t >= 0, so
value_sup is a lower approximation and value_inf an upper one, both
monotone in T_max.  A supremum attained at the horizon endpoint is
reported as +infinity (the sampled J is still climbing, which is how a
divergent integral shows up at desk scale).

Also here: contingent-epiderivative estimation on gridded value fields
and the variational-inequality residual checks built from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .common import INF
from .dynamics import VectorField, integrate, rk4_step, step_schedule
from .errors import CapTooSmall, DescentViolation
from .kernels import GridSpec, TimeField, capt_field, viab_field
from .sets import SetOracle, Sublevel


# ---------------------------------------------------------------------------
# Problem data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LagrangianProblem:
    """(f, l, a, u): dynamics, running cost, discount rate, obstacle.

    ``lagrangian(x, p)`` and ``obstacle(x)`` take (m, dim) batches and
    return (m,) arrays; the obstacle may return the +inf sentinel.  Both
    must be nonnegative wherever sampled.
    """

    field: VectorField
    lagrangian: Callable
    discount: float
    obstacle: Callable
    value_cap: float = 1e6


@dataclass(frozen=True)
class LiftedField:
    """State-cost dynamics (x, y) -> (f(x), -a y - l(x, f(x)))."""

    base: LagrangianProblem
    field: VectorField


def lift(p: LagrangianProblem) -> LiftedField:
    n = p.field.dim

    def ev(t, z):
        z2 = np.atleast_2d(np.asarray(z, dtype=float))
        x, y = z2[:, :n], z2[:, n]
        fx = np.atleast_2d(p.field(t, x))
        ly = np.asarray(p.lagrangian(x, fx), dtype=float)
        out = np.concatenate([fx, (-p.discount * y - ly)[:, None]], axis=1)
        return out if np.asarray(z).ndim > 1 else out[0]

    return LiftedField(p, VectorField(n + 1, ev, name=p.field.name + "+cost"))


# common Lagrangians / obstacles (batched)


def zero_lagrangian(x, p):
    return np.zeros(len(np.atleast_2d(x)))


def unit_lagrangian(x, p):
    return np.ones(len(np.atleast_2d(x)))


def const_lagrangian(c: float):
    return lambda x, p: np.full(len(np.atleast_2d(x)), float(c))


def speed_lagrangian(x, p):
    """l(x, p) = |p|, evaluated along trajectories as |f(x)| (arc length)."""
    return np.linalg.norm(np.atleast_2d(p), axis=1)


def abs_obstacle(x):
    return np.linalg.norm(np.atleast_2d(x), axis=1)


def zero_obstacle(x):
    return np.zeros(len(np.atleast_2d(x)))


def indicator_obstacle(K: SetOracle):
    """psi_K: 0 on K, +inf off it."""

    def u(x):
        return np.where(K.contains_many(np.atleast_2d(x)), 0.0, INF)

    return u


# ---------------------------------------------------------------------------
# Cost paths and the direct value functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CostPath:
    """Sampled J(t) along one trajectory, with continuous re-evaluation."""

    times: np.ndarray
    states: np.ndarray
    values: np.ndarray       # J at sample times (INF-clamped)
    cumulative: np.ndarray   # int_0^{t_j} e^{a tau} l dtau
    problem: LagrangianProblem

    def value_at(self, t: float) -> float:
        """J(t) for arbitrary t in [0, T]; single sub-step re-integration."""
        p = self.problem
        times = self.times
        t = min(max(t, times[0]), times[-1])
        j = int(np.searchsorted(times, t, side="right")) - 1
        j = min(j, len(times) - 2)
        dt = t - times[j]
        xj = self.states[j]
        xt = rk4_step(p.field, times[j], xj, dt) if dt > 0 else xj
        x2 = np.atleast_2d(np.vstack([xj, xt]))
        f2 = np.atleast_2d(p.field(times[j], x2))
        lw = p.lagrangian(x2, f2) * np.exp(p.discount * np.array([times[j], t]))
        cum = self.cumulative[j] + 0.5 * (lw[0] + lw[1]) * dt
        ut = float(p.obstacle(xt[None, :])[0])
        if ut >= INF:
            return INF
        J = math.exp(p.discount * t) * ut + cum
        return INF if J > p.value_cap else J


def running_cost_path(p: LagrangianProblem, x, T_max: float, h: float) -> CostPath:
    """Sampled cost J along the trajectory from x; J(0) = u(x)."""
    traj = integrate(p.field, x, 0.0, T_max, h)
    times, states = traj.times, traj.states
    F = np.atleast_2d(p.field(0.0, states))
    L = np.asarray(p.lagrangian(states, F), dtype=float)
    w = np.exp(p.discount * times)
    integrand = w * L
    cum = np.concatenate([[0.0], np.cumsum(
        0.5 * (integrand[1:] + integrand[:-1]) * np.diff(times))])
    U = np.asarray(p.obstacle(states), dtype=float)
    J = np.where(U >= INF, INF, w * U + cum)
    J = np.where(J > p.value_cap, INF, J)
    return CostPath(times, states, J, cum, p)


def _finish_sup(values: np.ndarray) -> float:
    if np.any(values >= INF):
        return INF
    i = int(np.argmax(values))  # first attainment
    if i == len(values) - 1:
        return INF  # still climbing at the horizon: divergent at desk scale
    return float(values[i])


def _golden_min(fn, a: float, b: float, tol: float) -> float:
    """Golden-section minimum value of fn on [a, b] (INF-safe comparisons)."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    best = min(fn(a), fn(b), fc, fd)
    for _ in range(200):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
            best = min(best, fc)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
            best = min(best, fd)
    return best


def _bisect_finite(fn, t_bad: float, t_good: float, tol: float) -> float:
    """Edge of the finite region between an INF point and a finite one."""
    for _ in range(80):
        if abs(t_good - t_bad) <= tol:
            break
        mid = 0.5 * (t_bad + t_good)
        if fn(mid) < INF:
            t_good = mid
        else:
            t_bad = mid
    return t_good


def _finish_inf(path: CostPath, refine: bool, t_tol: float = 1e-8) -> float:
    values = path.values
    if np.all(values >= INF):
        return INF
    i = int(np.argmin(values))
    best = float(values[i])
    if refine:
        k = len(values)
        a = path.times[max(i - 1, 0)]
        b = path.times[min(i + 1, k - 1)]
        # indicator-style obstacles make J infinite off a narrow valley;
        # locate the finite edges first so golden section has a real bracket
        if i > 0 and values[i - 1] >= INF:
            a = _bisect_finite(path.value_at, a, path.times[i], t_tol)
        if i < k - 1 and values[i + 1] >= INF:
            b = _bisect_finite(path.value_at, b, path.times[i], t_tol)
        best = min(best, path.value_at(a), path.value_at(b))
        if b > a:
            best = min(best, _golden_min(path.value_at, a, b, t_tol))
    return best


def value_sup(p: LagrangianProblem, x, T_max: float, h: float) -> float:
    """sup_t J(t) over [0, T_max] along the solution from x (INF if divergent)."""
    return _finish_sup(running_cost_path(p, x, T_max, h).values)


def value_inf(p: LagrangianProblem, x, T_max: float, h: float,
              refine: bool = True) -> float:
    """inf_t J(t); the arg-min bracket is golden-section refined to 1e-8 in t."""
    return _finish_inf(running_cost_path(p, x, T_max, h), refine)


def lyapunov(p: LagrangianProblem, x, T_max: float, h: float) -> float:
    """value_sup specialization for l = 0, with the descent inequality verified.

    Raises:
        DescentViolation: if u(x(t)) <= e^{-at} * result fails beyond 1e-6
            along the trajectory (T_max too small or sampling too coarse).
    """
    probe = np.atleast_2d(np.asarray(x, dtype=float))
    if np.any(np.asarray(p.lagrangian(probe, np.atleast_2d(p.field(0.0, probe)))) != 0.0):
        raise ValueError("lyapunov requires a problem with l identically 0")
    path = running_cost_path(p, x, T_max, h)
    val = _finish_sup(path.values)
    if val < INF:
        U = np.asarray(p.obstacle(path.states), dtype=float)
        bound = np.exp(-p.discount * path.times) * val + 1e-6
        if np.any(U > bound):
            raise DescentViolation("u(x(t)) exceeded e^{-at} * value along the path")
    return val


def minimal_time(field: VectorField, K: SetOracle, x, T_max: float, h: float) -> float:
    """First-arrival value: value_inf with u = psi_K, l = 1, a = 0."""
    p = LagrangianProblem(field, unit_lagrangian, 0.0, indicator_obstacle(K))
    return value_inf(p, x, T_max, h)


def minimal_length(field: VectorField, K: SetOracle, x, T_max: float, h: float) -> float:
    """Arc length to reach K: value_inf with l(x, p) = |p|, u = psi_K, a = 0."""
    p = LagrangianProblem(field, speed_lagrangian, 0.0, indicator_obstacle(K))
    return value_inf(p, x, T_max, h)


# ---------------------------------------------------------------------------
# Batched tabulation (shares exact semantics with the scalar ops)
# ---------------------------------------------------------------------------


def tabulate_values(p: LagrangianProblem, xs, mode: str, T_max: float, h: float,
                    refine: bool = True) -> np.ndarray:
    """value_sup/value_inf at every row of xs via one vectorized sweep.

    Stores the whole (steps, m, dim) state history, so keep it for
    modest tabulations (1D/2D value fields); the per-row finishing rules
    are exactly those of the scalar operations.
    """
    if mode not in ("sup", "inf"):
        raise ValueError("mode must be 'sup' or 'inf'")
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    m = len(xs)
    schedule = list(step_schedule(0.0, T_max, h))
    k = len(schedule) + 1
    times = np.array([0.0] + [t + hj for t, hj in schedule])
    states = np.empty((k, m, xs.shape[1]))
    states[0] = xs
    x = xs.copy()
    for j, (t, hj) in enumerate(schedule):
        x = rk4_step(p.field, t, x, hj)
        states[j + 1] = x
    flat = states.reshape(k * m, xs.shape[1])
    F = np.atleast_2d(p.field(0.0, flat))
    L = np.asarray(p.lagrangian(flat, F), dtype=float).reshape(k, m)
    U = np.asarray(p.obstacle(flat), dtype=float).reshape(k, m)
    w = np.exp(p.discount * times)[:, None]
    integrand = w * L
    cum = np.vstack([np.zeros((1, m)), np.cumsum(
        0.5 * (integrand[1:] + integrand[:-1]) * np.diff(times)[:, None], axis=0)])
    J = np.where(U >= INF, INF, w * U + cum)
    J = np.where(J > p.value_cap, INF, J)

    out = np.empty(m)
    for i in range(m):
        if mode == "sup":
            out[i] = _finish_sup(J[:, i])
        else:
            path = CostPath(times, states[:, i, :], J[:, i], cum[:, i], p)
            out[i] = _finish_inf(path, refine)
    return out


# ---------------------------------------------------------------------------
# Epigraph route
# ---------------------------------------------------------------------------


def epigraph_oracle(obstacle, state_dim: int, lipschitz: float = 1.0) -> Sublevel:
    """{(x, y) : u(x) <= y} as a sublevel oracle (membership is exact)."""

    def fn(z):
        Z = np.atleast_2d(np.asarray(z, dtype=float))
        r = np.asarray(obstacle(Z[:, :state_dim]), dtype=float) - Z[:, state_dim]
        return r if np.asarray(z).ndim > 1 else float(r[0])

    return Sublevel(fn, state_dim + 1, lipschitz=lipschitz)


@dataclass(frozen=True)
class GridFunction:
    """Values on a state grid with multilinear interpolation (INF-aware)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if len(values) != self.grid.node_count:
            raise ValueError("values length must match the grid node count")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def interp(self, x) -> float:
        g = self.grid
        x = np.atleast_1d(np.asarray(x, dtype=float))
        sp = g.spacing
        if np.any(x < g.lo - 1e-9 * sp) or np.any(x > g.hi + 1e-9 * sp):
            return INF
        pos = (x - g.lo) / sp
        base = np.clip(np.floor(pos).astype(int), 0, g.counts - 1)
        frac = pos - base
        shape = g.shape
        total, wsum = 0.0, 0.0
        for corner in range(1 << g.dim):
            offs = np.array([(corner >> k) & 1 for k in range(g.dim)])
            w = float(np.prod(np.where(offs == 1, frac, 1.0 - frac)))
            if w < 1e-12:
                continue
            idx = np.ravel_multi_index(tuple(base + offs), shape)
            v = self.values[idx]
            if v >= INF:
                return INF
            total += w * v
            wsum += w
        return total / wsum if wsum > 0 else INF


@dataclass(frozen=True)
class EpigraphResult:
    envelope: GridFunction   # least y in the kernel/basin per state node
    time_field: TimeField    # the raw (x, y)-grid exit/hitting field


def epigraph_value_field(p: LagrangianProblem, grid2d: GridSpec, mode: str,
                         T_max: float, h: float, workers: int = 1) -> EpigraphResult:
    """Value function as the lower envelope of an epigraph kernel or basin.

    The last grid axis is the cost coordinate y; it must cover
    [0, value_cap] of interest.  mode 'sup' runs the viability kernel of
    the epigraph of u under the lifted dynamics, mode 'inf' its capture
    basin.

    Raises:
        CapTooSmall: if some column's envelope sits on the top y row
            (the value got truncated by the grid roof).
    """
    if mode not in ("sup", "inf"):
        raise ValueError("mode must be 'sup' or 'inf'")
    n = grid2d.dim - 1
    ep = epigraph_oracle(p.obstacle, n)
    lf = lift(p).field
    if mode == "sup":
        tf = viab_field(lf, ep, grid2d, T_max, h, workers=workers)
        qualified = tf.superlevel(T_max)
    else:
        tf = capt_field(lf, ep, grid2d, T_max, h, workers=workers)
        qualified = tf.values < INF

    shape = grid2d.shape
    ny = shape[-1]
    q = qualified.reshape(shape[:-1] + (ny,))
    y_axis = grid2d.axes()[-1]
    any_q = q.any(axis=-1)
    first = np.argmax(q, axis=-1)
    env = np.where(any_q, y_axis[np.minimum(first, ny - 1)], INF)
    if np.any(any_q & (first == ny - 1)):
        raise CapTooSmall("epigraph envelope touches the top of the y-range")
    state_grid = GridSpec(grid2d.lo[:n], grid2d.hi[:n], grid2d.counts[:n])
    return EpigraphResult(GridFunction(state_grid, env.reshape(-1)), tf)


# ---------------------------------------------------------------------------
# Repeller sufficient condition (advisory for mode-inf uniqueness claims)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RepellerCondition:
    ok: bool
    gamma_minus: float   # inf of <x, f(x)> / (|x| (|x|+1)) over the samples
    delta_minus: float   # inf of l(x, f(x)) / (|x|+1)
    discount: float


def repeller_condition(p: LagrangianProblem, samples) -> RepellerCondition:
    """Estimate the outward-drift and cost lower bounds; require a + gamma > 0.

    Together with delta > 0 this certifies (on the sampled region) that
    the state-cost half-space is a repeller, the hypothesis behind the
    uniqueness of the stopping-time value.
    """
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    norms = np.linalg.norm(X, axis=1)
    keep = norms > 0
    X, norms = X[keep], norms[keep]
    F = np.atleast_2d(p.field(0.0, X))
    radial = np.einsum("ij,ij->i", X, F) / norms
    gamma = float(np.min(radial / (norms + 1.0)))
    delta = float(np.min(np.asarray(p.lagrangian(X, F)) / (norms + 1.0)))
    return RepellerCondition(bool(p.discount + gamma > 0 and delta > 0),
                             gamma, delta, p.discount)


# ---------------------------------------------------------------------------
# Contingent epiderivatives and variational-inequality residuals
# ---------------------------------------------------------------------------


def epiderivative(u_field: GridFunction, x, v, h_min: Optional[float] = None,
                  h_max: Optional[float] = None, perturb: Optional[float] = None) -> float:
    """Lower difference-quotient estimate of D_up u(x)(v) on a gridded field.

    Minimizes (u(x + h v') - u(x)) / h over a geometric h-ladder (ratio
    1/2) and a small direction stencil v' = v, v +- delta e_k, with
    multilinear interpolation of the field; +inf when every probe lands
    outside the finite domain.  Defaults scale with the grid cell.
    """
    g = u_field.grid
    cell = float(np.min(g.spacing))
    if h_max is None:
        h_max = 4.0 * cell
    if h_min is None:
        h_min = 0.5 * cell
    if perturb is None:
        perturb = 0.5 * cell
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    u0 = u_field.interp(x)
    if u0 >= INF:
        return INF
    dirs = [v]
    for k in range(g.dim):
        e = np.zeros(g.dim)
        e[k] = perturb
        dirs.extend([v + e, v - e])
    best = INF
    h = h_max
    while h >= h_min * (1.0 - 1e-12):
        for d in dirs:
            uv = u_field.interp(x + h * d)
            if uv < INF:
                best = min(best, (uv - u0) / h)
        h *= 0.5
    return best


@dataclass(frozen=True)
class HJReport:
    """Residuals of the variational-inequality characterization at samples.

    ``residual_fwd``/``residual_bwd`` are the forward/backward
    epiderivative residuals (NaN where the clause does not apply);
    ``complementarity`` is the positive slack of the clause that only
    binds where the solution sits strictly off the obstacle.
    """

    samples: np.ndarray
    residual_fwd: np.ndarray
    residual_bwd: np.ndarray
    complementarity: np.ndarray
    violations: list
    tol: float

    @property
    def ok(self) -> bool:
        return len(self.violations) == 0


def hj_check_sup(p: LagrangianProblem, u_field: GridFunction, sample_points,
                 tol: float = 0.05, comp_tol: Optional[float] = None) -> HJReport:
    """Check the sup-value characterization at the samples.

    Clauses: v >= u (obstacle bound); D_up v(x)(f(x)) + l + a v <= 0
    everywhere; and where u(x) < v(x) - comp_tol additionally
    D_up v(x)(-f(x)) - l - a v <= 0 (the complementarity side).  The
    off-obstacle threshold comp_tol decouples from the residual
    tolerance; both default to 0.05 in grid units.
    """
    if comp_tol is None:
        comp_tol = tol
    X = np.atleast_2d(np.asarray(sample_points, dtype=float))
    m = len(X)
    r_fwd = np.full(m, np.nan)
    r_bwd = np.full(m, np.nan)
    comp = np.zeros(m)
    violations = []
    F = np.atleast_2d(p.field(0.0, X))
    L = np.asarray(p.lagrangian(X, F), dtype=float)
    U = np.asarray(p.obstacle(X), dtype=float)
    for i in range(m):
        v = u_field.interp(X[i])
        if v >= INF:
            continue
        if v < U[i] - comp_tol:
            violations.append(("obstacle", i, float(U[i] - v)))
        r_fwd[i] = epiderivative(u_field, X[i], F[i]) + L[i] + p.discount * v
        if r_fwd[i] > tol:
            violations.append(("forward", i, float(r_fwd[i])))
        if U[i] < v - comp_tol:
            r_bwd[i] = epiderivative(u_field, X[i], -F[i]) - L[i] - p.discount * v
            comp[i] = max(r_bwd[i], 0.0)
            if r_bwd[i] > tol:
                violations.append(("complementarity", i, float(r_bwd[i])))
    return HJReport(X, r_fwd, r_bwd, comp, violations, tol)


def hj_check_inf(p: LagrangianProblem, u_field: GridFunction, sample_points,
                 tol: float = 0.05, comp_tol: Optional[float] = None) -> HJReport:
    """Check the stopping-time characterization at the samples.

    Clauses: 0 <= v <= u; where v(x) < u(x) - comp_tol the forward
    inequality D_up v(x)(f(x)) + l + a v <= 0; and the backward
    inequality D_up v(x)(-f(x)) - l - a v <= 0 everywhere on the domain.
    """
    if comp_tol is None:
        comp_tol = tol
    X = np.atleast_2d(np.asarray(sample_points, dtype=float))
    m = len(X)
    r_fwd = np.full(m, np.nan)
    r_bwd = np.full(m, np.nan)
    comp = np.zeros(m)
    violations = []
    F = np.atleast_2d(p.field(0.0, X))
    L = np.asarray(p.lagrangian(X, F), dtype=float)
    U = np.asarray(p.obstacle(X), dtype=float)
    for i in range(m):
        v = u_field.interp(X[i])
        if v >= INF:
            continue
        if v < -comp_tol:
            violations.append(("lower-bound", i, float(-v)))
        if v > U[i] + comp_tol:
            violations.append(("upper-bound", i, float(v - U[i])))
        if v < U[i] - comp_tol:
            r_fwd[i] = epiderivative(u_field, X[i], F[i]) + L[i] + p.discount * v
            comp[i] = max(r_fwd[i], 0.0)
            if r_fwd[i] > tol:
                violations.append(("forward", i, float(r_fwd[i])))
        r_bwd[i] = epiderivative(u_field, X[i], -F[i]) - L[i] - p.discount * v
        if r_bwd[i] > tol:
            violations.append(("backward", i, float(r_bwd[i])))
    return HJReport(X, r_fwd, r_bwd, comp, violations, tol)
