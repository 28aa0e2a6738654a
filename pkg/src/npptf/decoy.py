"""Decoy-state bounds on the two-mode Fock yields Y_{n,m}."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DataIntegrityError, DomainError, LpSolverError
from .lp import FEAS_TOL, GE, LE, LinearProgram, solve_lp, solve_lp_min
from .numerics import poisson_pmf_array, poisson_tail_mass

DEFAULT_YIELD_CUTOFF = 10
# relative widening of every gain row; loosening keeps the bounds valid and
# keeps the simplex off exactly-degenerate equality rows
ROW_RELAX = 1e-8


@dataclass(frozen=True)
class IntensityConfig:
    """Code intensity ``mu``, decoy-mode-1 set ``i1`` and decoy-mode-2 set ``i2``."""

    mu: float
    i1: tuple
    i2: tuple

    def __post_init__(self):
        i1 = tuple(float(v) for v in self.i1)
        i2 = tuple(float(v) for v in self.i2)
        object.__setattr__(self, "i1", i1)
        object.__setattr__(self, "i2", i2)
        object.__setattr__(self, "mu", float(self.mu))
        if not self.mu > 0:
            raise DomainError(f"code intensity must be > 0, got {self.mu}", module="decoy")
        if any(v < 0 for v in i1 + i2):
            raise DomainError("intensities must be >= 0", module="decoy")
        if len(set(i1)) != len(i1) or len(set(i2)) != len(i2):
            raise DomainError("intensities within a set must be distinct", module="decoy")
        if list(i1) != sorted(i1):
            raise DomainError("i1 must be sorted ascending", module="decoy")
        if not set(i2) <= set(i1):
            extra = sorted(set(i2) - set(i1))
            raise DomainError(f"i2 must be a subset of i1; not in i1: {extra}", module="decoy")
        if self.mu not in i2:
            raise DomainError("the code intensity must belong to i2", module="decoy")
        if 0.0 not in i1:
            raise DomainError("i1 must contain the vacuum intensity 0", module="decoy")

    @classmethod
    def standard(cls, mu, nu1=0.005, nu2=0.002, vacuum=0.0, mu3=1.3):
        """Decoy mode 2 uses {mu, nu1, nu2, vacuum}; decoy mode 1 adds ``mu3`` (None to omit)."""
        i2 = sorted({mu, nu1, nu2, vacuum})
        i1 = sorted(set(i2) | ({mu3} if mu3 is not None else set()))
        return cls(mu, tuple(i1), tuple(i2))

    def with_mu(self, mu):
        """Replace the code intensity in both sets."""
        swap = lambda s: tuple(sorted(mu if v == self.mu else v for v in s))
        return IntensityConfig(mu, swap(self.i1), swap(self.i2))

    @property
    def extra(self):
        """Intensities used only in decoy mode 1."""
        return tuple(v for v in self.i1 if v not in self.i2)


@dataclass(frozen=True)
class YieldBounds:
    """Certified interval [lower[n, m], upper[n, m]] for every n, m <= cutoff."""

    cutoff: int
    lower: np.ndarray
    upper: np.ndarray

    def upper_at(self, n, m):
        return float(self.upper[n, m]) if n <= self.cutoff and m <= self.cutoff else 1.0

    def lower_at(self, n, m):
        return float(self.lower[n, m]) if n <= self.cutoff and m <= self.cutoff else 0.0

    @classmethod
    def exact(cls, table):
        """Degenerate bounds lower = upper = ``table``."""
        t = np.asarray(table, dtype=float)
        return cls(t.shape[0] - 1, t.copy(), t.copy())


def _truncated_mass(omega1, omega2, cutoff):
    # union bound on P(a > cutoff or b > cutoff)
    return min(1.0, poisson_tail_mass(omega1, cutoff) + poisson_tail_mass(omega2, cutoff))


def yield_program(gains, decoy_set, cutoff):
    """Feasible region for the yields, one ranged row per intensity pair.

    Each row  Q - T <= sum p_a p_b Y_ab <= Q  is scaled by 1/Q, and every
    yield is expressed as Y_ab = s_ab Z_ab with Z_ab in [0, 1], where
    s_ab = min(1, min_rows Q / (p_a p_b)) is the single-row upper bound.
    This keeps all coefficients in [0, 1]; without it the program spans
    ~40 orders of magnitude.

    Returns ``(program_without_objective, scale, pairs)``.
    """
    size = cutoff + 1
    pairs = list(itertools.product(decoy_set, repeat=2))
    coefs, qs, tails = [], [], []
    scale = np.ones(size * size)
    for w1, w2 in pairs:
        q = gains.d1(w1, w2)
        coef = np.outer(poisson_pmf_array(w1, cutoff), poisson_pmf_array(w2, cutoff)).ravel()
        with np.errstate(divide="ignore"):
            scale = np.minimum(scale, np.where(coef > 0, q / np.where(coef > 0, coef, 1.0), np.inf))
        coefs.append(coef)
        qs.append(q)
        tails.append(_truncated_mass(w1, w2, cutoff))
    rows, senses, rhs = [], [], []
    for coef, q, tail in zip(coefs, qs, tails):
        norm = q if q > 0 else 1.0
        row = coef * scale / norm
        rows += [row, row]
        senses += [LE, GE]
        rhs += [q / norm + ROW_RELAX, (q - tail) / norm - ROW_RELAX]
    bounds = np.column_stack([np.zeros(size * size), np.ones(size * size)])
    lp = LinearProgram(np.zeros(size * size), np.array(rows), tuple(senses), np.array(rhs), bounds)
    return lp, scale, pairs


def _diagnose(lp, pairs):
    """Name the first intensity pair whose removal makes the program feasible."""
    for k, pair in enumerate(pairs):
        keep = [i for i in range(lp.a.shape[0]) if i // 2 != k]
        sub = LinearProgram(lp.objective, lp.a[keep], tuple(lp.senses[i] for i in keep),
                            lp.rhs[keep], lp.bounds)
        if solve_lp(sub).optimal:
            return pair
    return None


def bound_yields(gains, intensities, cutoff=DEFAULT_YIELD_CUTOFF, *, decoy_set=None, lp_tol=FEAS_TOL):
    """Lower and upper bounds on Y_{n,m} for n, m <= cutoff from decoy-mode-1 gains.

    Parameters
    ----------
    gains : GainTable
    intensities : IntensityConfig
    cutoff : int
        Photon-number truncation N; the Poisson mass beyond it enters as slack.
    decoy_set : sequence of float, optional
        Phase-randomized intensities to use (default ``intensities.i1``).
    lp_tol : float
        Primal feasibility tolerance of the simplex (rows are scaled to O(1)).
    """
    if cutoff < 3:
        raise DomainError("yield cutoff must be >= 3", module="decoy")
    decoy_set = tuple(intensities.i1 if decoy_set is None else decoy_set)
    lp, scale, pairs = yield_program(gains, decoy_set, cutoff)
    size = cutoff + 1
    lower = np.zeros((size, size))
    upper = np.ones((size, size))
    warm = None
    for n, m in itertools.product(range(size), repeat=2):
        c = np.zeros(size * size)
        c[n * size + m] = scale[n * size + m]
        prog = lp.with_objective(c)
        try:
            hi = solve_lp(prog, warm_start=warm, feas_tol=lp_tol)
            if hi.optimal:
                warm = hi.basis
                lo = solve_lp_min(prog, warm_start=warm, feas_tol=lp_tol)
                warm = lo.basis
        except LpSolverError as exc:
            raise LpSolverError(f"yield LP for Y[{n},{m}] failed: {exc}", module="decoy") from exc
        if not hi.optimal or not lo.optimal:
            pair = _diagnose(lp, pairs)
            where = f" (violated at intensity pair {pair})" if pair is not None else ""
            raise DataIntegrityError("decoy-mode-1 gains admit no yields in [0, 1]" + where,
                                     module="decoy", pair=pair)
        # certified (dual) bounds, not the primal vertex values
        upper[n, m] = min(1.0, hi.bound)
        lower[n, m] = max(0.0, lo.bound)
    np.minimum(lower, upper, out=lower)
    return YieldBounds(cutoff, lower, upper)
