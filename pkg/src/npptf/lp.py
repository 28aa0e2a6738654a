"""Dense bounded-variable simplex for small linear programs.

The programs solved here are small (at most a few hundred columns and a few
dozen rows) but badly scaled and highly degenerate: many variables sit at
their bounds at the optimum.  The solver therefore

* keeps every variable (structural and row activity) boxed, so no slack
  bookkeeping is needed for ranged rows,
* runs a composite phase 1 that minimizes the sum of bound violations,
* uses a two-pass (Harris) ratio test for pivot stability, and
* falls back to Bland's rule after a streak of degenerate pivots.

Callers are expected to scale their rows so that the feasibility tolerance
(``1e-9``) is meaningful.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import LpSolverError, StructuralError

LE, EQ, GE = "<=", "==", ">="
OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"
STALLED = "stalled"  # internal: returned as OPTIMAL with ``stalled=True``

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-12
_DUAL_TOL = 1e-11
_DEGENERATE_STREAK = 20


@dataclass(frozen=True)
class LinearProgram:
    """maximize ``objective @ x`` s.t. ``a[i] @ x  senses[i]  rhs[i]``, ``lo <= x <= hi``."""

    objective: np.ndarray
    a: np.ndarray
    senses: tuple
    rhs: np.ndarray
    bounds: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        n = c.shape[0] if c.ndim == 1 else -1
        if n < 0:
            raise StructuralError("objective must be a vector")
        a = np.asarray(self.a, dtype=float).reshape(-1, n) if np.size(self.a) else np.zeros((0, n))
        rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        bounds = np.asarray(self.bounds, dtype=float)
        if a.shape[1] != n:
            raise StructuralError(f"constraint width {a.shape[1]} != objective width {n}")
        if rhs.shape[0] != a.shape[0] or len(self.senses) != a.shape[0]:
            raise StructuralError("rhs/senses length does not match number of rows")
        if bounds.shape != (n, 2):
            raise StructuralError(f"bounds must have shape ({n}, 2), got {bounds.shape}")
        if np.any(bounds[:, 0] > bounds[:, 1]):
            raise StructuralError("lower bound exceeds upper bound")
        if np.any(np.isnan(a)) or np.any(np.isnan(rhs)) or np.any(np.isnan(c)):
            raise StructuralError("NaN in program data")
        for s in self.senses:
            if s not in (LE, EQ, GE):
                raise StructuralError(f"unknown relation {s!r}")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "senses", tuple(self.senses))

    @classmethod
    def from_rows(cls, objective, constraints=(), bounds=None):
        """Build from ``[(coefficients, relation, rhs), ...]``; default bounds ``[0, inf)``."""
        c = np.asarray(objective, dtype=float)
        n = c.shape[0]
        rows = [np.asarray(coef, dtype=float) for coef, _, _ in constraints]
        for r in rows:
            if r.shape != (n,):
                raise StructuralError(f"row of width {r.shape} does not match objective width {n}")
        a = np.array(rows) if rows else np.zeros((0, n))
        senses = tuple(rel for _, rel, _ in constraints)
        rhs = np.array([float(b) for _, _, b in constraints])
        if bounds is None:
            bounds = np.column_stack([np.zeros(n), np.full(n, np.inf)])
        return cls(c, a, senses, rhs, bounds)

    @property
    def n_vars(self):
        return self.objective.shape[0]

    def with_objective(self, objective):
        return LinearProgram(objective, self.a, self.senses, self.rhs, self.bounds)

    def residuals(self, x):
        """Amount by which ``x`` violates each row (0 when satisfied)."""
        act = self.a @ x
        out = np.zeros(len(self.senses))
        for i, s in enumerate(self.senses):
            if s == LE:
                out[i] = max(0.0, act[i] - self.rhs[i])
            elif s == GE:
                out[i] = max(0.0, self.rhs[i] - act[i])
            else:
                out[i] = abs(act[i] - self.rhs[i])
        return out


@dataclass(frozen=True)
class LpOutcome:
    """Solver result.

    ``bound`` is a certified bound on the optimum (upper for maximization,
    lower for minimization) obtained from the final row multipliers by weak
    duality; it is valid even when the simplex stalled on an ill-conditioned
    basis, and ``bound - value`` measures how far from optimal ``point`` may be.
    """

    status: str
    value: float | None = None
    point: np.ndarray | None = None
    iterations: int = 0
    basis: object = field(default=None, repr=False, compare=False)
    bound: float | None = None
    stalled: bool = False

    @property
    def optimal(self):
        return self.status == OPTIMAL


@dataclass(frozen=True)
class _WarmStart:
    fingerprint: str
    basis: tuple
    x: np.ndarray


@dataclass
class _Standard:
    """Program in the form  M z = 0,  lo <= z <= hi,  z = (x, row activities)."""

    m: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    n: int
    fingerprint: str


def _standardize(lp):
    n = lp.n_vars
    # rows sharing identical coefficients become one ranged activity
    groups = {}
    order = []
    for i in range(lp.a.shape[0]):
        key = lp.a[i].tobytes()
        if key not in groups:
            groups[key] = [i, -np.inf, np.inf]
            order.append(key)
        g = groups[key]
        s, b = lp.senses[i], lp.rhs[i]
        if s in (GE, EQ):
            g[1] = max(g[1], b)
        if s in (LE, EQ):
            g[2] = min(g[2], b)
    rows = [lp.a[groups[k][0]] for k in order]
    r_lo = np.array([groups[k][1] for k in order])
    r_hi = np.array([groups[k][2] for k in order])
    k = len(rows)
    a = np.array(rows).reshape(k, n)
    m = np.hstack([a, -np.eye(k)])
    lo = np.concatenate([lp.bounds[:, 0], r_lo])
    hi = np.concatenate([lp.bounds[:, 1], r_hi])
    h = hashlib.sha1()
    for arr in (m, lo, hi):
        h.update(np.ascontiguousarray(arr).tobytes())
    return _Standard(m, lo, hi, n, h.hexdigest())


def _initial_point(std):
    lo, hi = std.lo, std.hi
    x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
    basis = list(range(std.n, std.m.shape[1]))
    return basis, x


def _run(std, cost, basis, x, phase1, max_iter, tol=FEAS_TOL):
    """Simplex iterations from a given basis.  Returns (status, basis, x, iterations)."""
    M, lo, hi = std.m, std.lo, std.hi
    k, total = M.shape
    dual_tol = _DUAL_TOL * max(1.0, float(np.max(np.abs(cost)))) if cost is not None else _DUAL_TOL
    degenerate = 0
    force_bland = False
    best, stale = -np.inf, 0
    stall_limit = 5 * total if phase1 else max(100, 2 * k)
    is_basic = np.zeros(total, dtype=bool)
    for it in range(max_iter):
        is_basic[:] = False
        is_basic[basis] = True
        if k:
            try:
                binv = np.linalg.inv(M[:, basis])
            except np.linalg.LinAlgError as exc:
                raise LpSolverError("singular basis matrix") from exc
            xn = np.where(is_basic, 0.0, x)
            x[basis] = -binv @ (M @ xn)
        xb = x[basis]
        lb, ub = lo[basis], hi[basis]
        if phase1:
            below = xb < lb - tol
            above = xb > ub + tol
            if not (below.any() or above.any()):
                return OPTIMAL, basis, x, it
            cb = below.astype(float) - above.astype(float)
            d = -(cb @ binv) @ M
            progress = -float(np.sum(np.maximum(lb - xb, 0) + np.maximum(xb - ub, 0)))
        else:
            cb = cost[basis]
            d = cost - ((cb @ binv) @ M if k else 0.0)
            progress = float(cost @ x)
        # numerical cycling on ill-conditioned bases shows up as no progress
        if progress > best + 1e-12 * (1.0 + abs(best) if np.isfinite(best) else 0.0):
            best, stale = progress, 0
        else:
            stale += 1
            if stale > stall_limit and not force_bland:
                # Bland's rule cannot cycle; give it one more stall window
                force_bland, stale = True, 0
            elif stale > stall_limit:
                if phase1:
                    raise LpSolverError("phase 1 stalled without reaching feasibility")
                return STALLED, basis, x, it
        d[is_basic] = 0.0
        can_inc = ~is_basic & (x < hi)
        can_dec = ~is_basic & (x > lo)
        eligible = ((d > dual_tol) & can_inc) | ((d < -dual_tol) & can_dec)
        if not eligible.any():
            return (INFEASIBLE if phase1 else OPTIMAL), basis, x, it
        cand = np.flatnonzero(eligible)
        bland = force_bland or degenerate >= _DEGENERATE_STREAK
        j = int(cand[0]) if bland else int(cand[np.argmax(np.abs(d[cand]))])
        sigma = 1.0 if d[j] > 0 else -1.0
        alpha = binv @ M[:, j] if k else np.zeros(0)
        rate = -sigma * alpha

        # per-row limiting bound along the ray
        dec = rate < -PIVOT_TOL
        inc = rate > PIVOT_TOL
        target = np.full(k, np.nan)
        if phase1:
            # infeasible variables stop at their violated bound; moving
            # further away from it imposes no limit
            target[dec] = np.where(above[dec], ub[dec], np.where(below[dec], np.nan, lb[dec]))
            target[inc] = np.where(below[inc], lb[inc], np.where(above[inc], np.nan, ub[inc]))
        else:
            target[dec] = lb[dec]
            target[inc] = ub[inc]
        active = (dec | inc) & np.isfinite(target)
        flip = hi[j] - lo[j]
        if not active.any():
            if np.isfinite(flip):
                step, leave = flip, None
            elif phase1:
                raise LpSolverError("phase 1 found an unbounded improving ray")
            else:
                return UNBOUNDED, basis, x, it
        else:
            idx = np.flatnonzero(active)
            r = rate[idx]
            gap = np.where(r > 0, target[idx] - xb[idx], xb[idx] - target[idx])
            exact = np.maximum(gap, 0.0) / np.abs(r)
            if bland:
                tmin = exact.min()
                ties = idx[exact <= tmin * (1 + 1e-12) + 1e-300]
                leave = int(min(ties, key=lambda i: basis[i]))
                step = float(exact[idx == leave][0])
            else:
                relaxed = (np.maximum(gap, 0.0) + tol) / np.abs(r)
                bound = relaxed.min()
                ok = exact <= bound
                pick = np.flatnonzero(ok)[np.argmax(np.abs(r[ok]))]
                leave, step = int(idx[pick]), float(exact[pick])
            if np.isfinite(flip) and flip <= step:
                step, leave = flip, None
        if step <= 1e-14:
            degenerate += 1
        else:
            degenerate = 0
        x[j] += sigma * step
        if k:
            x[basis] += rate * step
        if leave is None:
            x[j] = hi[j] if sigma > 0 else lo[j]
        else:
            out = basis[leave]
            t = target[leave]
            x[out] = t
            basis[leave] = j
    raise LpSolverError(f"simplex did not terminate within {max_iter} iterations")


def solve_lp(program, *, warm_start=None, max_iter=None, feas_tol=FEAS_TOL):
    """Maximize a linear program.

    ``warm_start`` may be the ``basis`` attribute of a previous outcome on a
    program with identical constraints and bounds; it is ignored otherwise.
    """
    if not isinstance(program, LinearProgram):
        raise StructuralError("solve_lp expects a LinearProgram")
    std = _standardize(program)
    if not 0 < feas_tol < 1e-3:
        raise StructuralError(f"feasibility tolerance must lie in (0, 1e-3), got {feas_tol}")
    if np.any(std.lo > std.hi + feas_tol):
        return LpOutcome(INFEASIBLE)
    total = std.m.shape[1]
    if max_iter is None:
        max_iter = 50 * (total + 10)
    warm = isinstance(warm_start, _WarmStart) and warm_start.fingerprint == std.fingerprint
    if warm:
        basis, x = list(warm_start.basis), warm_start.x.copy()
    else:
        basis, x = _initial_point(std)
    try:
        status, basis, x, it1 = _run(std, None, basis, x, True, max_iter, feas_tol)
    except LpSolverError:
        if not warm:
            raise
        status = INFEASIBLE
    if status == INFEASIBLE and warm:
        # a warm basis can be ill-conditioned enough to strand phase 1; retry cold
        basis, x = _initial_point(std)
        status, basis, x, it1 = _run(std, None, basis, x, True, max_iter, feas_tol)
    if status == INFEASIBLE:
        return LpOutcome(INFEASIBLE, iterations=it1)
    cost = np.concatenate([program.objective, np.zeros(total - std.n)])
    status, basis, x, it2 = _run(std, cost, basis, x, False, max_iter, feas_tol)
    if status == UNBOUNDED:
        return LpOutcome(UNBOUNDED, iterations=it1 + it2)
    point = np.clip(x[: std.n], program.bounds[:, 0], program.bounds[:, 1])
    value = float(program.objective @ point)
    bound = max(value, _dual_bound(std, cost, basis))
    return LpOutcome(OPTIMAL, value, point, it1 + it2,
                     _WarmStart(std.fingerprint, tuple(basis), x.copy()),
                     bound=bound, stalled=status == STALLED)


def _dual_bound(std, cost, basis):
    """Weak-duality upper bound on max cost.z over {M z = 0, lo <= z <= hi}.

    For any multipliers pi, cost.z = (cost - pi M).z <= sum_j max(r_j lo_j, r_j hi_j).
    Multipliers that would pair with an infinite bound are zeroed first.
    """
    M, lo, hi = std.m, std.lo, std.hi
    k = M.shape[0]
    if k:
        try:
            pi = np.linalg.solve(M[:, basis].T, cost[basis])
        except np.linalg.LinAlgError:
            pi = np.zeros(k)
        # activity column n+i has reduced cost pi_i
        r_lo, r_hi = lo[std.n:], hi[std.n:]
        pi = np.where((pi > 0) & ~np.isfinite(r_hi), 0.0, pi)
        pi = np.where((pi < 0) & ~np.isfinite(r_lo), 0.0, pi)
        r = cost - pi @ M
    else:
        r = cost.copy()
    with np.errstate(invalid="ignore"):
        terms = np.where(r > 0, r * hi, np.where(r < 0, r * lo, 0.0))
    if not np.all(np.isfinite(terms)):
        return np.inf
    # pad for rounding in the summation
    return float(terms.sum() + 1e-14 * np.abs(terms).sum())


def solve_lp_min(program, **kwargs):
    """Minimize; the reported value is the true minimum."""
    out = solve_lp(program.with_objective(-program.objective), **kwargs)
    if not out.optimal:
        return out
    return LpOutcome(OPTIMAL, float(program.objective @ out.point), out.point,
                     out.iterations, out.basis, bound=-out.bound, stalled=out.stalled)
