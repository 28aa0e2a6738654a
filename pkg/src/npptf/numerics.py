"""Poisson statistics, entropies and rigorously bounded tail sums."""

import math
from functools import lru_cache

import numpy as np

from .errors import DomainError

_LOG_DOMAIN_FROM = 20
# relative inflation applied to tail bounds to absorb float rounding
_ROUNDING_PAD = 1.0 + 1e-12


def _check_mean(mean):
    if not mean >= 0 or math.isinf(mean):
        raise DomainError(f"Poisson mean must be finite and >= 0, got {mean!r}", module="numerics")


def poisson_pmf(mean, n):
    """Probability of ``n`` photons in a coherent pulse of mean photon number ``mean``."""
    _check_mean(mean)
    if n < 0:
        raise DomainError(f"photon number must be >= 0, got {n!r}", module="numerics")
    if mean == 0:
        return 1.0 if n == 0 else 0.0
    if n <= _LOG_DOMAIN_FROM:
        return math.exp(-mean) * mean**n / math.factorial(n)
    return math.exp(-mean + n * math.log(mean) - math.lgamma(n + 1))


@lru_cache(maxsize=4096)
def _pmf_tuple(mean, nmax):
    return tuple(poisson_pmf(mean, n) for n in range(nmax + 1))


def poisson_pmf_array(mean, nmax):
    """``[poisson_pmf(mean, n) for n in 0..nmax]`` as a (cached) array."""
    _check_mean(mean)
    return np.array(_pmf_tuple(float(mean), int(nmax)))


def _tail_bound(mean, cutoff, power):
    """Upper bound on sum_{n>cutoff} p_n**power.

    Terms are summed explicitly until the ratio of consecutive terms drops to
    1/2 and the current term is negligible; the remainder is majorized by a
    geometric series (the ratio (mean/(n+1))**power is decreasing in n).
    The stopping index depends only on ``mean`` and ``n``, so bounds for
    increasing cutoffs are nested.
    """
    if mean == 0:
        return 0.0
    n = cutoff + 1
    total = 0.0
    term = poisson_pmf(mean, n) ** power
    while True:
        ratio = (mean / (n + 1)) ** power
        if ratio <= 0.5 and term <= 1e-30:
            total += term / (1.0 - ratio)
            break
        total += term
        n += 1
        term = poisson_pmf(mean, n) ** power
    return total * _ROUNDING_PAD


def poisson_sqrt_mass(mean, cutoff):
    """Partial sum of sqrt(p_n) up to ``cutoff`` and an upper bound on the rest.

    Returns
    -------
    partial : float
        sum_{n=0..cutoff} sqrt(p_n)
    tail_upper : float
        rigorous upper bound on sum_{n>cutoff} sqrt(p_n)
    """
    _check_mean(mean)
    if cutoff < 0:
        raise DomainError("cutoff must be >= 0", module="numerics")
    partial = float(np.sqrt(poisson_pmf_array(mean, cutoff)).sum())
    return partial, _tail_bound(mean, cutoff, 0.5)


def poisson_tail_mass(mean, cutoff):
    """Upper bound on the Poisson probability of more than ``cutoff`` photons."""
    _check_mean(mean)
    return _tail_bound(mean, cutoff, 1.0)


def parity_sqrt_sums(mean, cutoff):
    """Even/odd split of :func:`poisson_sqrt_mass`.

    Returns ``(partial_even, partial_odd, tail_upper)``; the tail bound covers
    either parity.
    """
    roots = np.sqrt(poisson_pmf_array(mean, cutoff))
    return float(roots[0::2].sum()), float(roots[1::2].sum()), _tail_bound(mean, cutoff, 0.5)


def binary_entropy(p):
    """Shannon entropy H(p) in bits."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability outside [0, 1]: {p!r}", module="numerics")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def pair_entropy(x, y):
    """h(x, y) = -x log2 x - y log2 y + (x+y) log2 (x+y).

    Positively homogeneous: h(x, y) = (x+y) H(x/(x+y)).
    """
    if x < 0 or y < 0:
        raise DomainError(f"pair_entropy needs non-negative arguments, got ({x!r}, {y!r})",
                          module="numerics")
    if x == 0.0 or y == 0.0:
        return 0.0
    # x log2(1 + y/x) + y log2(1 + x/y): no cancellation when x << y
    return (_xlog1p_ratio(x, y) + _xlog1p_ratio(y, x)) / math.log(2.0)


def _xlog1p_ratio(a, b):
    """a ln(1 + b/a) for a, b > 0, safe when b/a overflows (subnormal a)."""
    if b < a * 1e300:
        return a * math.log1p(b / a)
    return a * (math.log(a + b) - math.log(a))


def pair_entropy_grad(x, y):
    if not (x > 0 and y > 0):
        raise DomainError(f"gradient of h needs strictly positive arguments, got ({x!r}, {y!r})",
                          module="numerics")
    s = math.log2(x + y)
    return s - math.log2(x), s - math.log2(y)
