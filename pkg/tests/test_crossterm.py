import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from npptf.channel import ChannelParams, GainTable, build_gain_table, decoy1_gain
from npptf.crossterm import (CLASSES, class_intervals, class_members, class_of, enumerate_pairs,
                             omega_bounds, omitted_pair_mass, pair_tail_slack, phi_bounds,
                             worst_case_phi)
from npptf.decoy import IntensityConfig, YieldBounds, bound_yields
from npptf.errors import DataIntegrityError
from npptf.keyrate import honest_yields
from npptf.numerics import poisson_pmf_array

TABLE1 = ChannelParams()

# independent brute-force sums (mpmath, photon numbers to 200)
SLACK_01_01_6 = 8.3511050206204707e-6
SLACK_05_02_4 = 0.037049951293341628


def honest_setup(d, mu=0.1, i2_extra=()):
    i2 = tuple(sorted({0.0, 0.002, 0.005, mu, *i2_extra}))
    ic = IntensityConfig(mu, tuple(sorted(set(i2) | {1.3})), i2)
    gains = build_gain_table(TABLE1, ic, d)
    return ic, gains, bound_yields(gains, ic)


def test_classes_partition():
    seen = {class_of(n, m) for n in range(4) for m in range(4)}
    assert seen == set(CLASSES)
    total = sum(len(class_members(c, 5)) for c in CLASSES)
    assert total == 36


def test_enumerate_examples():
    ee = enumerate_pairs("ee", 2)
    assert class_members("ee", 2) == [(0, 0), (0, 2), (2, 0), (2, 2)]
    assert len(ee) == 6
    assert enumerate_pairs("oo", 1) == []
    oe = enumerate_pairs("oe", 3)
    assert class_members("oe", 3) == [(1, 0), (1, 2), (3, 0), (3, 2)]
    assert len(oe) == 6
    assert oe[0].first == (1, 0) and oe[0].second == (1, 2)


@given(st.sampled_from(CLASSES), st.integers(1, 7))
def test_pair_invariants(cls, cutoff):
    pairs = enumerate_pairs(cls, cutoff)
    assert pairs == enumerate_pairs(cls, cutoff)
    assert pairs == sorted(pairs)
    for (n, m), (k, l), c in pairs:
        assert c == cls and (n, m) < (k, l)
        assert n % 2 == k % 2 and m % 2 == l % 2
        assert max(n, m, k, l) <= cutoff
    size = len(class_members(cls, cutoff))
    assert len(pairs) == size * (size - 1) // 2


def test_enumerate_rejects_bad_input():
    with pytest.raises(ValueError):
        enumerate_pairs("xx", 3)
    with pytest.raises(ValueError):
        enumerate_pairs("ee", 0)


def test_omega_vacuum():
    y = honest_yields(TABLE1, 100)
    lo, hi = omega_bounds(y, 0.0, "ee")
    assert lo == pytest.approx(y.lower[0, 0]) and hi == pytest.approx(y.upper[0, 0])
    for cls in ("oe", "oo", "eo"):
        lo, hi = omega_bounds(y, 0.0, cls)
        assert lo == 0.0 and hi < 1e-300


def test_omega_exact_yields_width_is_tail():
    y = honest_yields(TABLE1, 100)
    p = poisson_pmf_array(0.1, 10)
    tail = 1.0 - p.sum() ** 2
    widths = [omega_bounds(y, 0.1, c)[1] - omega_bounds(y, 0.1, c)[0] for c in CLASSES]
    assert all(0 <= w <= 3 * tail + 1e-18 for w in widths)


@pytest.mark.parametrize("d", [0, 150, 400])
def test_omega_decomposes_gain(d):
    ic, gains, yields = honest_setup(d)
    bounds = [omega_bounds(yields, ic.mu, c) for c in CLASSES]
    q = gains.d1(ic.mu, ic.mu)
    assert sum(b[0] for b in bounds) <= q <= sum(b[1] for b in bounds)


def test_slack_oracle_values():
    assert pair_tail_slack(0.0, 0.0, 6) == 0.0
    assert pair_tail_slack(0.1, 0.1, 6) == pytest.approx(SLACK_01_01_6, rel=1e-9)
    assert pair_tail_slack(0.5, 0.2, 4) == pytest.approx(SLACK_05_02_4, rel=1e-9)


@given(st.floats(0.0, 1.5), st.floats(0.0, 1.5), st.integers(1, 8))
def test_slack_shrinks_with_cutoff(w1, w2, cutoff):
    assert pair_tail_slack(w1, w2, cutoff + 1) <= pair_tail_slack(w1, w2, cutoff) * (1 + 1e-12)
    assert pair_tail_slack(w1, w2, cutoff) >= 0.0


def test_yield_weighted_slack_is_smaller():
    y = honest_yields(TABLE1, 200)
    for w1, w2 in [(0.1, 0.1), (0.5, 0.002)]:
        assert pair_tail_slack(w1, w2, 6, y) <= pair_tail_slack(w1, w2, 6)


@pytest.mark.parametrize("d", [0, 100, 300])
def test_honest_cross_terms_contain_zero_and_are_dominated(d):
    ic, gains, yields = honest_setup(d)
    phi = phi_bounds(gains, yields, ic)
    for cls in CLASSES:
        lo, hi = phi[cls]
        assert lo <= 0.0 <= hi
        w_lo, w_hi = worst_case_phi(yields, ic.mu, cls)
        assert w_lo - 1e-15 <= lo and hi <= w_hi + 1e-15


def test_extra_decoy_intensity_never_widens():
    ic, gains, yields = honest_setup(100)
    ic2, gains2, _ = honest_setup(100, i2_extra=(0.05,))
    base = phi_bounds(gains, yields, ic)
    more = phi_bounds(gains2, yields, ic2)
    for cls in CLASSES:
        assert more[cls][0] >= base[cls][0] - 1e-12
        assert more[cls][1] <= base[cls][1] + 1e-12


def test_larger_pair_cutoff_does_not_widen():
    ic, gains, yields = honest_setup(100)
    w = []
    for pc in (3, 5):
        phi = phi_bounds(gains, yields, ic, pair_cutoff=pc)
        w.append(sum(phi[c][1] - phi[c][0] for c in CLASSES))
    assert w[1] <= w[0] * (1 + 1e-6)


def toy_yields(entries, cutoff=10):
    up = np.zeros((cutoff + 1, cutoff + 1))
    for n, m in entries:
        up[n, m] = 1.0
    return YieldBounds(cutoff, np.zeros_like(up), up)


def test_single_variable_toy():
    # only Y00 and Y20 may be nonzero, so one cross-term variable survives
    yields = toy_yields([(0, 0), (2, 0)])
    ic = IntensityConfig(0.1, (0.0, 0.1), (0.0, 0.1))
    y_true = 1.0
    p = {w: poisson_pmf_array(w, 2) for w in ic.i2}
    d1, d2 = {}, {}
    coef = {}
    for w1, w2 in itertools.product(ic.i2, repeat=2):
        c = np.sqrt(p[w1][0] * p[w2][0] * p[w1][2] * p[w2][0])
        coef[(w1, w2)] = c
        d1[(w1, w2)] = 0.5
        d2[(w1, w2)] = 0.5 + c * y_true
    gains = GainTable(0.1, 0.5, 0.0, d1, d2)
    phi = phi_bounds(gains, yields, ic)
    # exact answer: y in the intersection of the slackened rows and the box [-2, 2]
    lo_y, hi_y = -2.0, 2.0
    for key, c in coef.items():
        if c > 0:
            s = pair_tail_slack(*key, 6, yields)
            lo_y, hi_y = max(lo_y, (c * y_true - s) / c), min(hi_y, (c * y_true + s) / c)
    c_mu = coef[(0.1, 0.1)]
    pad = 2.0 * omitted_pair_mass(0.1, 0.1, 6, yields)["ee"]
    assert phi["ee"][0] == pytest.approx(c_mu * lo_y - pad, abs=1e-12)
    assert phi["ee"][1] == pytest.approx(c_mu * hi_y + pad, abs=1e-12)
    assert phi["ee"][1] - phi["ee"][0] < 1e-7
    assert phi["ee"][0] <= c_mu * y_true <= phi["ee"][1]


def test_no_pairs_means_no_cross_terms():
    yields = toy_yields([(0, 0)])
    ic = IntensityConfig(0.1, (0.0, 0.1), (0.0, 0.1))
    keys = list(itertools.product(ic.i2, repeat=2))
    gains = GainTable(0.1, 0.5, 0.0, {k: 0.5 for k in keys}, {k: 0.5 for k in keys})
    phi = phi_bounds(gains, yields, ic)
    for cls in CLASSES:
        assert abs(phi[cls][0]) < 1e-9 and abs(phi[cls][1]) < 1e-9


def test_unexplainable_difference_names_pair():
    ic, gains, yields = honest_setup(100)
    d2 = dict(gains.d2_gains)
    d2[(0.1, 0.005)] = gains.d2_gains[(0.1, 0.005)] * 1.5
    bad = GainTable(gains.mu, gains.code_gain, gains.code_error, gains.d1_gains, d2)
    with pytest.raises(DataIntegrityError) as info:
        phi_bounds(bad, yields, ic)
    assert info.value.pair == (0.1, 0.005)


def test_class_intervals_bundle():
    ic, gains, yields = honest_setup(50)
    ci = class_intervals(gains, yields, ic)
    assert set(ci.omega) == set(ci.phi) == set(CLASSES)
    for cls in CLASSES:
        assert ci.omega[cls][0] <= ci.omega[cls][1]
        assert ci.phi[cls][0] <= ci.phi[cls][1]
