"""Certified upper bound on Eve's information.

The leakage objective is

    F(x) = h(x_ee/Q, x_oe/Q) + h(x_oo/Q, x_eo/Q),

maximized over a box intersected with the simplex sum(x) = Q.  F is concave,
so for any interior point x0 the tangent plane F(x0) + grad F(x0).(x - x0)
majorizes F on the whole region; its maximum over the region is a fractional
knapsack and is solved exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .channel import code_gain_and_error, fock_yield
from .crossterm import CLASSES, _PARITY
from .errors import EstimationError
from .numerics import pair_entropy, parity_sqrt_sums, poisson_pmf, poisson_pmf_array

DEFAULT_TOLERANCE = 1e-7
INTERIOR_MARGIN = 1e-12
_MAX_FW_ITER = 500
_LN2 = math.log(2.0)

# objective pairs: (ee, oe) and (oo, eo) in CLASSES order
_PARTNER = (1, 0, 3, 2)


@dataclass(frozen=True)
class XConstraints:
    """Box [lo, hi] per parity class (CLASSES order) and the sum rule sum(x) = total."""

    lo: tuple
    hi: tuple
    total: float
    mode: str = "improved"

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != 4 or len(hi) != 4:
            raise EstimationError("constraints need one interval per parity class")
        if not self.total > 0:
            raise EstimationError(f"code-mode gain must be > 0, got {self.total}")
        if any(a > b for a, b in zip(lo, hi)):
            raise EstimationError("empty class interval (lo > hi)")

    @property
    def feasible(self):
        slack = 1e-12 * self.total
        return sum(self.lo) <= self.total + slack and sum(self.hi) >= self.total - slack

    def as_dict(self):
        return {cls: [self.lo[i], self.hi[i]] for i, cls in enumerate(CLASSES)}


@dataclass(frozen=True)
class LeakageResult:
    upper_bound: float
    witness: tuple
    certificate_gap: float
    constraint_mode: str
    converged: bool = True


def objective(z):
    """F on normalized coordinates z = x / Q."""
    return pair_entropy(z[0], z[1]) + pair_entropy(z[2], z[3])


def _gradient(z, free):
    g = np.zeros(4)
    for i in range(4):
        if free[i]:
            s = z[i] + z[_PARTNER[i]]
            g[i] = (math.log(s) - math.log(z[i])) / _LN2
    return g


def _linear_max(c, a, b):
    """max c.z over a <= z <= b, sum(z) = 1 (greedy fill, exact)."""
    z = a.copy()
    room = 1.0 - a.sum()
    for i in np.argsort(-c, kind="stable"):
        if room <= 0:
            break
        step = min(b[i] - a[i], room)
        z[i] += step
        room -= step
    return z


def _pair_value(s, a1, b1, a2, b2):
    """max h(z1, s - z1) over the feasible z1; h(., s - .) peaks at s/2."""
    lo, hi = max(a1, s - b2), min(b1, s - a2)
    z1 = min(max(0.5 * s, lo), hi)
    z1 = min(max(z1, 0.0), s)
    return pair_entropy(z1, s - z1), z1


def _reduced_maximizer(a, b):
    """Maximize F by the split s of mass between the two objective pairs.

    For fixed s each pair is optimized in closed form; the resulting
    function of s is concave.
    """
    s_lo = max(a[0] + a[1], 1.0 - b[2] - b[3])
    s_hi = min(b[0] + b[1], 1.0 - a[2] - a[3])
    s_lo, s_hi = max(0.0, s_lo), min(1.0, max(s_hi, s_lo))

    def value(s):
        v1, _ = _pair_value(s, a[0], b[0], a[1], b[1])
        v2, _ = _pair_value(1.0 - s, a[2], b[2], a[3], b[3])
        return v1 + v2

    if s_hi - s_lo > 1e-15:
        res = minimize_scalar(lambda s: -value(s), bounds=(s_lo, s_hi), method="bounded",
                              options={"xatol": 1e-13 * max(1.0, s_hi)})
        cands = [s_lo, s_hi, float(res.x)]
    else:
        cands = [s_lo]
    s = max(cands, key=value)
    _, z1 = _pair_value(s, a[0], b[0], a[1], b[1])
    _, z3 = _pair_value(1.0 - s, a[2], b[2], a[3], b[3])
    return np.array([z1, s - z1, z3, (1.0 - s) - z3])


def _interior(z, a, b, free):
    """Pull z a relative distance INTERIOR_MARGIN towards a strictly interior point."""
    width = b - a
    lam = (1.0 - a.sum()) / width.sum()
    centre = a + lam * width
    out = z + INTERIOR_MARGIN * (centre - z)
    out = np.where(free, np.clip(out, a, b), a)
    # restore the sum rule on the free coordinates
    out[free] += (1.0 - out.sum()) / free.sum()
    # subnormal widths underflow the margin; any positive value keeps the
    # gradient finite, and the tangent bound holds wherever F is differentiable
    return np.where(free & (out <= 0.0), b, out)


def _certify(z0, a, b, free):
    g = _gradient(z0, free)
    vertex = _linear_max(g, a, b)
    f0 = objective(z0)
    lin = float(g @ (vertex - z0))
    pad = 1e-15 * (1.0 + float(np.abs(g).sum()))
    return f0 + max(lin, 0.0) + pad, f0, vertex


def max_leakage(constraints, tolerance=DEFAULT_TOLERANCE):
    """Certified upper bound on F over the constraint region.

    Returns a :class:`LeakageResult` whose ``witness`` is in absolute units
    (multiply-back by the total) and whose ``upper_bound`` is in [0, 1].
    """
    if not tolerance > 0:
        raise EstimationError("tolerance must be > 0")
    if not constraints.feasible:
        raise EstimationError(
            f"constraint region is empty: sum(lo)={sum(constraints.lo):.6e}, "
            f"sum(hi)={sum(constraints.hi):.6e}, total={constraints.total:.6e}")
    q = constraints.total
    a = np.clip(np.array(constraints.lo) / q, 0.0, 1.0)
    b = np.clip(np.array(constraints.hi) / q, 0.0, 1.0)
    b = np.maximum(a, b)
    mode = constraints.mode
    width = b - a
    free = width > 0
    room = 1.0 - a.sum()
    if not free.any() or room <= 0 or room >= width.sum():
        # single feasible point (up to rounding): evaluate directly
        z = a.copy() if room <= 0 or not free.any() else b.copy()
        z = z / z.sum() if z.sum() > 0 else z
        f = min(1.0, objective(z))
        return LeakageResult(f, tuple(z * q), 0.0, mode)

    z = _reduced_maximizer(a, b)
    z0 = _interior(z, a, b, free)
    best_ub, f0, vertex = _certify(z0, a, b, free)
    best_z, best_f = z0, f0
    it = 0
    while best_ub - best_f > tolerance and it < _MAX_FW_ITER:
        # conditional-gradient step with exact line search
        direction = vertex - z0
        res = minimize_scalar(lambda t: -objective(z0 + t * direction), bounds=(0.0, 1.0),
                              method="bounded", options={"xatol": 1e-14})
        z0 = _interior(z0 + float(res.x) * direction, a, b, free)
        ub, f0, vertex = _certify(z0, a, b, free)
        if f0 > best_f:
            best_f, best_z = f0, z0
        best_ub = min(best_ub, ub)
        it += 1
    upper = min(1.0, max(best_ub, best_f))
    gap = max(0.0, upper - best_f)
    return LeakageResult(upper, tuple(best_z * q), gap, mode, converged=gap <= tolerance)


# -- constraint assembly -----------------------------------------------------


def _class_sqrt_tail(mu, cutoff, cls):
    """Upper bound on sum over class members beyond ``cutoff`` of sqrt(p_n p_m)."""
    even, odd, tail = parity_sqrt_sums(mu, cutoff)
    part = (even, odd)
    pa, pb = part[_PARITY[cls[0]]], part[_PARITY[cls[1]]]
    return (pa + tail) * (pb + tail) - pa * pb


def x_constraints_original(yields, mu, q_code):
    """Constraints available without phase-locked decoys: x_c <= (sum sqrt(p p Ybar))^2."""
    if not 0 < q_code <= 1:
        raise EstimationError(f"code-mode gain must lie in (0, 1], got {q_code}")
    n = yields.cutoff
    roots = np.sqrt(np.outer(poisson_pmf_array(mu, n), poisson_pmf_array(mu, n)) * yields.upper)
    hi = []
    for cls in CLASSES:
        a, b = _PARITY[cls[0]], _PARITY[cls[1]]
        amp = float(roots[a::2, b::2].sum()) + _class_sqrt_tail(mu, n, cls)
        hi.append(min(q_code, amp * amp))
    return XConstraints((0.0,) * 4, tuple(hi), q_code, mode="original")


def x_constraints_improved(intervals, q_code, mode="improved"):
    """x_c in [Omega_lo + Phi_lo, Omega_hi + Phi_hi], clipped to [0, q_code]."""
    if not 0 < q_code <= 1:
        raise EstimationError(f"code-mode gain must lie in (0, 1], got {q_code}")
    lo, hi = [], []
    for cls in CLASSES:
        (o_lo, o_hi), (p_lo, p_hi) = intervals.omega[cls], intervals.phi[cls]
        lo.append(max(0.0, o_lo + p_lo))
        hi.append(min(q_code, o_hi + p_hi))
    if any(l > h for l, h in zip(lo, hi)):
        raise EstimationError("a parity class has an empty interval after clipping to [0, Q]")
    cons = XConstraints(tuple(lo), tuple(hi), q_code, mode=mode)
    if not cons.feasible:
        raise EstimationError(
            f"gains are inconsistent: class bounds sum to [{sum(lo):.6e}, {sum(hi):.6e}] "
            f"but the code-mode gain is {q_code:.6e}")
    return cons


def exact_class_weights(params, mu, distance_km, cutoff=None):
    """Honest-channel Omega per class by direct summation (all terms positive)."""
    if cutoff is None:
        cutoff = int(mu + 20.0 * math.sqrt(mu) + 40)
    p = np.array([poisson_pmf(mu, k) for k in range(cutoff + 1)])
    y = np.array([[fock_yield(params, n, m, distance_km) for m in range(cutoff + 1)]
                  for n in range(cutoff + 1)])
    w = np.outer(p, p) * y
    out = {}
    for cls in CLASSES:
        a, b = _PARITY[cls[0]], _PARITY[cls[1]]
        out[cls] = float(w[a::2, b::2].sum())
    return out


def leakage_infinite(params, mu, distance_km):
    """Leakage with exactly known yields and no cross terms."""
    q, _ = code_gain_and_error(params, mu, distance_km)
    if q == 0:
        return 0.0
    omega = exact_class_weights(params, mu, distance_km)
    z = [omega[cls] / q for cls in CLASSES]
    return min(1.0, objective(z))
