"""Secret key rate pipeline, intensity optimization, sweeps and loss limits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import build_gain_table, fock_yield
from .crossterm import DEFAULT_PAIR_CUTOFF, class_intervals
from .decoy import DEFAULT_YIELD_CUTOFF, YieldBounds, bound_yields
from .errors import DomainError, LpSolverError, NpptfError
from .leakage import (DEFAULT_TOLERANCE, leakage_infinite, max_leakage,
                      x_constraints_improved, x_constraints_original)
from .lp import FEAS_TOL
from .numerics import binary_entropy

MODES = ("improved", "original", "infinite_improved", "infinite_original")
DEFAULT_MU_GRID = (0.01, 1.0, 50)
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class RatePoint:
    distance_km: float
    total_loss_db: float
    mode: str
    mu: float
    q_code: float
    e_code: float
    i_ae_upper: float
    skr: float
    plob_bound: float
    certificate_gap: float = 0.0
    no_key: bool = False
    error: str | None = None
    detail: dict = field(default_factory=dict, compare=False, repr=False)


def secret_key_rate(q_code, e_code, f, i_ae):
    """max(0, Q (1 - f H(E) - I_AE))."""
    if not f >= 1.0:
        raise DomainError(f"error-correction efficiency must be >= 1, got {f}", module="keyrate")
    if not 0.0 <= i_ae <= 1.0:
        raise DomainError(f"leakage must lie in [0, 1], got {i_ae}", module="keyrate")
    if not 0.0 <= q_code <= 1.0:
        raise DomainError(f"gain must lie in [0, 1], got {q_code}", module="keyrate")
    return max(0.0, q_code * (1.0 - f * binary_entropy(e_code) - i_ae))


def plob_bound(loss_coeff, distance_km):
    """Repeaterless capacity -log2(1 - eta) of the bare fiber."""
    if not (loss_coeff >= 0 and distance_km >= 0):
        raise DomainError("loss coefficient and distance must be >= 0", module="keyrate")
    eta = 10.0 ** (-loss_coeff * distance_km / 10.0)
    if eta >= 1.0:
        return math.inf
    return -math.log1p(-eta) / math.log(2.0)


def honest_yields(params, distance_km, cutoff=DEFAULT_YIELD_CUTOFF):
    table = [[fock_yield(params, n, m, distance_km) for m in range(cutoff + 1)]
             for n in range(cutoff + 1)]
    return YieldBounds.exact(table)


def _leakage(params, intensities, distance_km, mode, gains, yield_cutoff, pair_cutoff, tol, lp_tol):
    """Returns (i_ae, certificate_gap, detail)."""
    mu = intensities.mu
    q = gains.code_gain
    if mode == "infinite_improved":
        return leakage_infinite(params, mu, distance_km), 0.0, {}
    if mode == "infinite_original":
        cons = x_constraints_original(honest_yields(params, distance_km, yield_cutoff), mu, q)
        res = max_leakage(cons, tol)
        return res.upper_bound, res.certificate_gap, {"x": cons.as_dict()}
    if mode == "improved":
        yields = bound_yields(gains, intensities, yield_cutoff, lp_tol=lp_tol)
        ci = class_intervals(gains, yields, intensities, pair_cutoff, lp_tol=lp_tol)
        cons = x_constraints_improved(ci, q)
        res = max_leakage(cons, tol)
        detail = {"omega": {k: list(v) for k, v in ci.omega.items()},
                  "phi": {k: list(v) for k, v in ci.phi.items()},
                  "x": cons.as_dict(), "witness": list(res.witness)}
        return res.upper_bound, res.certificate_gap, detail
    if mode == "original":
        # the baseline protocol only has the phase-randomized decoys of I2
        yields = bound_yields(gains, intensities, yield_cutoff, decoy_set=intensities.i2,
                              lp_tol=lp_tol)
        cons = x_constraints_original(yields, mu, q)
        res = max_leakage(cons, tol)
        return res.upper_bound, res.certificate_gap, {"x": cons.as_dict(), "witness": list(res.witness)}
    raise DomainError(f"unknown mode {mode!r}; expected one of {MODES}", module="keyrate")


def evaluate_point(params, intensities, distance_km, mode, *, gains=None,
                   yield_cutoff=DEFAULT_YIELD_CUTOFF, pair_cutoff=DEFAULT_PAIR_CUTOFF,
                   leakage_tol=DEFAULT_TOLERANCE, lp_tol=FEAS_TOL):
    """Key rate at one distance and code intensity.

    ``gains`` replaces the honest channel model by a supplied table; the
    distance is then only reported.  Infinite-decoy modes always use the model.
    """
    if mode not in MODES:
        raise DomainError(f"unknown mode {mode!r}; expected one of {MODES}", module="keyrate")
    if gains is None:
        gains = build_gain_table(params, intensities, distance_km)
    elif mode.startswith("infinite"):
        raise DomainError("infinite-decoy modes are defined only for the channel model",
                          module="keyrate")
    q, e = gains.code_gain, gains.code_error
    loss = params.loss_coeff * distance_km
    plob = plob_bound(params.loss_coeff, distance_km)
    if q == 0.0:
        return RatePoint(distance_km, loss, mode, intensities.mu, q, e, 1.0, 0.0, plob, no_key=True)
    i_ae, gap, detail = _leakage(params, intensities, distance_km, mode, gains,
                                 yield_cutoff, pair_cutoff, leakage_tol, lp_tol)
    raw = q * (1.0 - params.ec_eff * binary_entropy(e) - i_ae)
    skr = secret_key_rate(q, e, params.ec_eff, i_ae)
    detail["gains"] = gains.to_csv()
    return RatePoint(distance_km, loss, mode, intensities.mu, q, e, i_ae, skr, plob,
                     certificate_gap=float(gap), no_key=bool(raw <= 0.0), detail=detail)


def _rate_at(params, intensities, distance_km, mode, mu, **kw):
    """Rate at one trial intensity, or None if that intensity cannot be evaluated.

    A trial mu may collide with a decoy intensity, or (rarely) drive the
    simplex into a numerically singular basis; either way the optimizer just
    skips it, the returned rate at the chosen mu is still certified.
    """
    try:
        cfg = intensities.with_mu(mu)
        return evaluate_point(params, cfg, distance_km, mode, **kw)
    except (DomainError, LpSolverError):
        return None


def optimize_mu(params, intensities, distance_km, mode, grid=DEFAULT_MU_GRID, rel_tol=1e-3, **kw):
    """Maximize the key rate over the code intensity.

    A log-spaced grid locates the best cell; golden-section search refines
    inside the neighbouring cells.  Ties go to the smaller intensity.
    Returns ``(mu_star, RatePoint)``.
    """
    lo, hi, steps = grid
    if not (0 < lo < hi) or steps < 2:
        raise DomainError(f"invalid intensity grid {grid}", module="keyrate")
    mus = np.geomspace(lo, hi, int(steps))
    cache = {}

    def point(mu):
        mu = float(mu)
        if mu not in cache:
            cache[mu] = _rate_at(params, intensities, distance_km, mode, mu, **kw)
        return cache[mu]

    def skr(mu):
        p = point(mu)
        return -1.0 if p is None else p.skr

    values = [skr(m) for m in mus]
    best = int(np.argmax(values))
    if values[best] <= 0.0:
        for m in mus:
            if point(m) is not None:
                return float(m), replace(point(m), no_key=True)
        raise LpSolverError(f"no trial intensity in {grid} could be evaluated", module="keyrate")
    # golden-section search on log(mu) across the two cells around the grid optimum
    a = math.log(mus[max(best - 1, 0)])
    b = math.log(mus[min(best + 1, len(mus) - 1)])
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = skr(math.exp(c)), skr(math.exp(d))
    while (b - a) > rel_tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = skr(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = skr(math.exp(d))
    mu_star = min((m for m, p in cache.items() if p is not None),
                  key=lambda m: (-cache[m].skr, m))
    return mu_star, cache[mu_star]


def sweep(params, intensities, distances, modes, *, optimize=False, grid=DEFAULT_MU_GRID, **kw):
    """Rows ordered by (distance, mode); per-point failures are recorded, not raised."""
    if not len(distances) or not len(modes):
        raise DomainError("sweep needs at least one distance and one mode", module="keyrate")
    rows = []
    for d in distances:
        for mode in modes:
            try:
                if optimize:
                    _, p = optimize_mu(params, intensities, d, mode, grid, **kw)
                else:
                    p = evaluate_point(params, intensities, d, mode, **kw)
            except NpptfError as exc:
                p = RatePoint(d, params.loss_coeff * d, mode, intensities.mu, math.nan, math.nan,
                              math.nan, 0.0, plob_bound(params.loss_coeff, d), no_key=True,
                              error=f"{exc.code}: {exc}")
            rows.append(p)
    return rows


def max_tolerable_loss(params, intensities, mode, resolution_db=0.25, *, max_loss_db=160.0,
                       grid=DEFAULT_MU_GRID, **kw):
    """Largest total fiber loss (dB) with a positive optimized key rate.

    Returns ``(loss_db, point)``; ``point`` is the rate at that loss (None
    when even 0 dB gives no key).
    """
    if not resolution_db > 0:
        raise DomainError("resolution must be > 0", module="keyrate")
    if params.loss_coeff <= 0:
        raise DomainError("loss search needs a positive loss coefficient", module="keyrate")

    def probe(loss):
        _, p = optimize_mu(params, intensities, loss / params.loss_coeff, mode, grid, **kw)
        return p if p.skr > 0 else None

    good = probe(0.0)
    if good is None:
        return 0.0, None
    lo, hi = 0.0, max_loss_db
    top = probe(hi)
    if top is not None:
        return hi, top
    while hi - lo > resolution_db:
        mid = 0.5 * (lo + hi)
        p = probe(mid)
        if p is None:
            hi = mid
        else:
            lo, good = mid, p
    return lo, good
