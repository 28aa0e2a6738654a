import numpy as np
import pytest

from npptf.channel import ChannelParams, GainTable, build_gain_table, fock_yield
from npptf.decoy import IntensityConfig, YieldBounds, bound_yields
from npptf.errors import DataIntegrityError, DomainError

TABLE1 = ChannelParams()


def honest(params, d, cutoff=10):
    return np.array([[fock_yield(params, n, m, d) for m in range(cutoff + 1)]
                     for n in range(cutoff + 1)])


@pytest.fixture(scope="module")
def bounds_100():
    ic = IntensityConfig.standard(0.1)
    return bound_yields(build_gain_table(TABLE1, ic, 100), ic)


def test_intensity_config_standard():
    ic = IntensityConfig.standard(0.1)
    assert ic.i2 == (0.0, 0.002, 0.005, 0.1)
    assert ic.i1 == (0.0, 0.002, 0.005, 0.1, 1.3)
    assert ic.extra == (1.3,)
    assert IntensityConfig.standard(0.1, mu3=None).i1 == ic.i2
    assert ic.with_mu(0.3).i1 == (0.0, 0.002, 0.005, 0.3, 1.3)


@pytest.mark.parametrize("args", [
    (0.1, (0.0, 0.1), (0.0, 0.1, 0.2)),      # i2 not within i1
    (0.1, (0.0, 0.2), (0.0, 0.2)),           # mu missing
    (0.1, (0.002, 0.1), (0.1,)),             # no vacuum
    (0.1, (0.1, 0.0), (0.1,)),               # unsorted
    (0.0, (0.0,), (0.0,)),                   # mu not positive
])
def test_intensity_config_invalid(args):
    with pytest.raises(DomainError):
        IntensityConfig(*args)


def test_vacuum_isolates_dark_yield(bounds_100):
    q00 = fock_yield(TABLE1, 0, 0, 100)
    assert bounds_100.lower[0, 0] <= q00 <= bounds_100.upper[0, 0]
    assert bounds_100.upper[0, 0] - bounds_100.lower[0, 0] < 1e-12


def test_invariants(bounds_100):
    assert np.all(bounds_100.lower >= 0) and np.all(bounds_100.upper <= 1)
    assert np.all(bounds_100.lower <= bounds_100.upper)
    assert bounds_100.upper_at(11, 0) == 1.0 and bounds_100.lower_at(0, 11) == 0.0


@pytest.mark.parametrize("d", [0, 100, 250, 450])
def test_bracketing_honest_yields(d):
    ic = IntensityConfig.standard(0.1)
    b = bound_yields(build_gain_table(TABLE1, ic, d), ic)
    y = honest(TABLE1, d)
    for n in range(5):
        for m in range(5 - n):
            assert b.lower[n, m] <= y[n, m] * (1 + 1e-9) + 1e-15
            assert y[n, m] <= b.upper[n, m] * (1 + 1e-9) + 1e-15


def test_large_intensity_tightens_two_two():
    gains_ic = IntensityConfig.standard(0.1)
    gains = build_gain_table(TABLE1, gains_ic, 100)
    full = bound_yields(gains, gains_ic)
    reduced = bound_yields(gains, IntensityConfig.standard(0.1, mu3=None))
    w_full = full.upper[2, 2] - full.lower[2, 2]
    w_red = reduced.upper[2, 2] - reduced.lower[2, 2]
    assert w_red > w_full


def test_adding_intensity_never_widens():
    ic = IntensityConfig(0.1, (0.0, 0.002, 0.005, 0.1, 0.4, 1.3), (0.0, 0.002, 0.005, 0.1))
    gains = build_gain_table(TABLE1, ic, 150)
    big = bound_yields(gains, ic)
    small = bound_yields(gains, ic, decoy_set=(0.0, 0.002, 0.005, 0.1, 1.3))
    assert np.all(big.upper <= small.upper + 1e-9)
    assert np.all(big.lower >= small.lower - 1e-9)


def test_cutoff_increase_keeps_bounds_valid():
    ic = IntensityConfig.standard(0.1)
    gains = build_gain_table(TABLE1, ic, 100)
    b10 = bound_yields(gains, ic, 10)
    b12 = bound_yields(gains, ic, 12)
    y = honest(TABLE1, 100, 12)
    assert np.all(b12.lower <= y + 1e-9) and np.all(y <= b12.upper + 1e-9)
    # both are valid enclosures, so they overlap on the common range
    assert np.all(np.maximum(b10.lower, b12.lower[:11, :11]) <=
                  np.minimum(b10.upper, b12.upper[:11, :11]) + 1e-9)


def test_inconsistent_gains_name_a_pair():
    ic = IntensityConfig.standard(0.1)
    g = build_gain_table(TABLE1, ic, 100)
    d1 = dict(g.d1_gains)
    d1[(0.0, 0.0)] = 0.2   # vacuum cannot click more often than any other pulse pair
    bad = GainTable(g.mu, g.code_gain, g.code_error, d1, g.d2_gains)
    with pytest.raises(DataIntegrityError) as info:
        bound_yields(bad, ic, 4)
    assert info.value.pair is not None


def test_cutoff_validated():
    ic = IntensityConfig.standard(0.1)
    with pytest.raises(DomainError):
        bound_yields(build_gain_table(TABLE1, ic, 10), ic, 2)


def test_exact_bounds_helper():
    y = honest(TABLE1, 50, 5)
    b = YieldBounds.exact(y)
    assert b.cutoff == 5 and np.array_equal(b.lower, b.upper)
