"""Non-cross terms (Omega) and certified cross-term bounds (Phi) per parity class.

For the code state the squared norm of each parity component splits as
``Omega + Phi``: the diagonal part is fixed by the yields, the off-diagonal
part involves Eve's unknown inner products.  Phase-locked decoy gains pin
the off-diagonal part through linear constraints on the variables

    y_{n,m,k,l} = 2 Re<gamma_{n,m}|gamma_{k,l}> sqrt(Y_{n,m} Y_{k,l}).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DataIntegrityError, LpSolverError
from .lp import EQ, FEAS_TOL, GE, LE, LinearProgram, solve_lp, solve_lp_min
from .numerics import poisson_pmf_array, poisson_sqrt_mass, poisson_tail_mass

CLASSES = ("ee", "oe", "oo", "eo")
DEFAULT_PAIR_CUTOFF = 6

_PARITY = {"e": 0, "o": 1}


def class_of(n, m):
    return ("e" if n % 2 == 0 else "o") + ("e" if m % 2 == 0 else "o")


def class_members(cls, cutoff):
    a, b = _PARITY[cls[0]], _PARITY[cls[1]]
    return [(n, m) for n in range(a, cutoff + 1, 2) for m in range(b, cutoff + 1, 2)]


class PairIndex(NamedTuple):
    first: tuple
    second: tuple
    cls: str


def enumerate_pairs(cls, pair_cutoff):
    """All distinct unordered pairs of photon-number pairs in ``cls``, lexicographic."""
    if cls not in CLASSES:
        raise ValueError(f"unknown parity class {cls!r}")
    if pair_cutoff < 1:
        raise ValueError("pair_cutoff must be >= 1")
    return [PairIndex(p, q, cls) for p, q in itertools.combinations(class_members(cls, pair_cutoff), 2)]


@dataclass(frozen=True)
class ClassIntervals:
    """Per-class ``omega`` and ``phi`` intervals, each a dict class -> (lo, hi)."""

    omega: dict
    phi: dict


def _class_tail_mass(mean, cutoff, cls):
    """Upper bound on the Poisson mass of class members with n > cutoff or m > cutoff."""
    p = poisson_pmf_array(mean, cutoff)
    a, b = _PARITY[cls[0]], _PARITY[cls[1]]
    part_a, part_b = p[a::2].sum(), p[b::2].sum()
    t = poisson_tail_mass(mean, cutoff)
    return t * (part_b + t) + part_a * t


def omega_bounds(yields, mu, cls):
    """Interval for the non-cross term of ``cls`` at code intensity ``mu``."""
    n_cut = yields.cutoff
    p = poisson_pmf_array(mu, n_cut)
    w = np.outer(p, p)
    mask = np.zeros_like(w, dtype=bool)
    a, b = _PARITY[cls[0]], _PARITY[cls[1]]
    mask[a::2, b::2] = True
    lo = float(np.sum(w[mask] * yields.lower[mask]))
    hi = float(np.sum(w[mask] * yields.upper[mask])) + _class_tail_mass(mu, n_cut, cls)
    return lo, hi


def _root_weights(omega1, omega2, cutoff, yields):
    """v[n, m] = sqrt(p_n p_m Ybar_{n,m}) for n, m <= cutoff (Ybar = 1 without yields)."""
    w = np.outer(poisson_pmf_array(omega1, cutoff), poisson_pmf_array(omega2, cutoff))
    if yields is not None:
        ybar = np.ones_like(w)
        k = min(cutoff, yields.cutoff) + 1
        ybar[:k, :k] = yields.upper[:k, :k]
        w = w * ybar
    return np.sqrt(w)


def omitted_pair_mass(omega1, omega2, pair_cutoff, yields=None):
    """Per class, upper bound on sum over non-retained pairs of v_p v_q.

    A pair is retained when all four photon numbers are <= ``pair_cutoff``.
    With ``yields`` the weights include sqrt(Ybar), matching the box
    |y| <= 2 sqrt(Ybar Ybar); without, |y| <= 2 is assumed.
    """
    ref = max(pair_cutoff, yields.cutoff if yields is not None else 0) + 30
    v = _root_weights(omega1, omega2, ref, yields)
    # sqrt(p) tail mass beyond ``ref`` (Ybar <= 1 there)
    s1, t1 = poisson_sqrt_mass(omega1, ref)
    s2, t2 = poisson_sqrt_mass(omega2, ref)
    out = {}
    for cls in CLASSES:
        a, b = _PARITY[cls[0]], _PARITY[cls[1]]
        sub = v[a::2, b::2]
        ia = np.arange(a, ref + 1, 2)
        ib = np.arange(b, ref + 1, 2)
        kept = (ia[:, None] <= pair_cutoff) & (ib[None, :] <= pair_cutoff)
        v_cut = float(sub[kept].sum())
        beyond = (s1 + t1) * t2 + t1 * s2
        v_out = float(sub[~kept].sum()) + beyond
        v2_out = float(np.square(sub[~kept]).sum())
        out[cls] = max(0.0, v_out * v_cut + 0.5 * (v_out * v_out - v2_out))
    return out


def pair_tail_slack(omega1, omega2, pair_cutoff, yields=None):
    """Bound on the contribution of non-retained pairs to one phase-locked gain difference."""
    if omega1 == 0 and omega2 == 0:
        return 0.0
    return 2.0 * sum(omitted_pair_mass(omega1, omega2, pair_cutoff, yields).values())


def _pair_coefficients(pairs, omega1, omega2, cutoff):
    p1 = poisson_pmf_array(omega1, cutoff)
    p2 = poisson_pmf_array(omega2, cutoff)
    return np.array([math.sqrt(p1[n] * p2[m] * p1[k] * p2[l]) for (n, m), (k, l), _ in pairs])


@dataclass(frozen=True)
class CrossTermProgram:
    """Shared feasible region for the four cross-term objectives.

    Variables are u_p = y_p / box_p in [-1, 1].
    """

    pairs: list
    box: np.ndarray
    lp: LinearProgram | None
    row_pairs: list


def build_crossterm_program(gains, yields, intensities, pair_cutoff=DEFAULT_PAIR_CUTOFF):
    all_pairs = [p for cls in CLASSES for p in enumerate_pairs(cls, pair_cutoff)]
    box = np.array([2.0 * math.sqrt(yields.upper_at(*p.first) * yields.upper_at(*p.second))
                    for p in all_pairs])
    keep = box > 0
    pairs = [p for p, k in zip(all_pairs, keep) if k]
    box = box[keep]
    rows, senses, rhs, row_pairs = [], [], [], []
    for w1, w2 in itertools.product(intensities.i2, repeat=2):
        diff = gains.d2(w1, w2) - gains.d1(w1, w2)
        slack = pair_tail_slack(w1, w2, pair_cutoff, yields)
        coef = _pair_coefficients(pairs, w1, w2, pair_cutoff) * box
        if not np.any(coef > 0):
            if abs(diff) > slack:
                raise DataIntegrityError(
                    f"phase-locked gain differs from phase-randomized gain at ({w1}, {w2}) "
                    f"by {diff:.3e}, which no cross term can explain", module="crossterm",
                    pair=(w1, w2))
            continue
        norm = gains.d1(w1, w2)
        norm = norm if norm > 0 else 1.0
        if slack == 0.0:
            rows.append(coef / norm)
            senses.append(EQ)
            rhs.append(diff / norm)
        else:
            rows += [coef / norm, coef / norm]
            senses += [LE, GE]
            rhs += [(diff + slack) / norm, (diff - slack) / norm]
        row_pairs.append((w1, w2))
    if not pairs:
        return CrossTermProgram([], box, None, row_pairs)
    bounds = np.column_stack([-np.ones(len(pairs)), np.ones(len(pairs))])
    lp = LinearProgram(np.zeros(len(pairs)), np.array(rows).reshape(-1, len(pairs)),
                       tuple(senses), np.array(rhs), bounds)
    return CrossTermProgram(pairs, box, lp, row_pairs)


def _diagnose(prog):
    lp = prog.lp
    for pair in prog.row_pairs:
        rows = [i for i in range(lp.a.shape[0]) if _row_pair(prog, i) != pair]
        sub = LinearProgram(lp.objective, lp.a[rows], tuple(lp.senses[i] for i in rows),
                            lp.rhs[rows], lp.bounds)
        if solve_lp(sub).optimal:
            return pair
    return None


def _row_pair(prog, row):
    # rows come in (<=, >=) couples or single == rows, in row_pairs order
    idx, i = 0, 0
    senses = prog.lp.senses
    while i < len(senses):
        width = 1 if senses[i] == EQ else 2
        if row < i + width:
            return prog.row_pairs[idx]
        i += width
        idx += 1
    raise IndexError(row)


def phi_bounds(gains, yields, intensities, mu=None, pair_cutoff=DEFAULT_PAIR_CUTOFF, *,
               lp_tol=FEAS_TOL):
    """Certified interval for the cross term of each parity class at the code intensity."""
    mu = intensities.mu if mu is None else mu
    prog = build_crossterm_program(gains, yields, intensities, pair_cutoff)
    tails = omitted_pair_mass(mu, mu, pair_cutoff, yields)
    out = {}
    if prog.lp is None:
        for cls in CLASSES:
            out[cls] = (-2.0 * tails[cls], 2.0 * tails[cls])
        return out
    obj_all = _pair_coefficients(prog.pairs, mu, mu, pair_cutoff) * prog.box
    warm = None
    for cls in CLASSES:
        c = np.where([p.cls == cls for p in prog.pairs], obj_all, 0.0)
        lp = prog.lp.with_objective(c)
        if not np.any(c):
            hi_v = lo_v = 0.0
        else:
            try:
                hi = solve_lp(lp, warm_start=warm, feas_tol=lp_tol)
                warm = hi.basis if hi.optimal else warm
                lo = solve_lp_min(lp, warm_start=warm, feas_tol=lp_tol)
                warm = lo.basis if lo.optimal else warm
            except LpSolverError as exc:
                raise LpSolverError(f"cross-term LP ({cls}) failed: {exc}", module="crossterm") from exc
            if not (hi.optimal and lo.optimal):
                pair = _diagnose(prog)
                where = f" (violated at intensity pair {pair})" if pair is not None else ""
                raise DataIntegrityError("phase-locked gains are inconsistent with any cross terms"
                                         + where, module="crossterm", pair=pair)
            hi_v, lo_v = hi.bound, lo.bound
        # pairs beyond the cutoff contribute at most 2 v_p v_q each
        out[cls] = (lo_v - 2.0 * tails[cls], hi_v + 2.0 * tails[cls])
    return out


def worst_case_phi(yields, mu, cls, pair_cutoff=DEFAULT_PAIR_CUTOFF):
    """Interval obtained by letting every inner product take its extreme value."""
    pairs = enumerate_pairs(cls, pair_cutoff)
    coef = _pair_coefficients(pairs, mu, mu, pair_cutoff)
    box = np.array([2.0 * math.sqrt(yields.upper_at(*p.first) * yields.upper_at(*p.second))
                    for p in pairs])
    total = float(coef @ box) + 2.0 * omitted_pair_mass(mu, mu, pair_cutoff, yields)[cls]
    return -total, total


def class_intervals(gains, yields, intensities, pair_cutoff=DEFAULT_PAIR_CUTOFF, *, lp_tol=FEAS_TOL):
    mu = intensities.mu
    omega = {cls: omega_bounds(yields, mu, cls) for cls in CLASSES}
    phi = phi_bounds(gains, yields, intensities, mu, pair_cutoff, lp_tol=lp_tol)
    return ClassIntervals(omega, phi)
