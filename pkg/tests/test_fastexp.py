import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from metrovec import fastexp
from metrovec.fastexp import (
    ACCURATE_LO, FAST_FACTOR, FAST_HI, FAST_LO, error_scan, exp_accurate, exp_accurate_core, exp_fast,
    octave_means,
)

LN2 = math.log(2)
F32 = np.float32


def bit_construction(x):
    """Independent numpy rendering of the integer-view construction."""
    x = np.asarray(x, np.float32)
    i = np.rint(np.multiply(x, FAST_FACTOR, dtype=np.float32)).astype(np.int64) + (127 << 23)
    return i.astype(np.int32).view(np.float32) * F32(2 * LN2 * LN2)


# frozen values: 127*2^23 and 128*2^23 read as 1.0 and 2.0, times 2 ln^2 2
def test_fast_at_zero_and_ln2():
    assert exp_fast(F32(0)) == F32(0.9609060287475586)
    assert exp_fast(F32(LN2)) == F32(1.9218120574951172)
    assert float(exp_fast(F32(0))) / 1.0 - 1 == pytest.approx(-0.0391, abs=5e-5)


def test_fast_matches_bit_construction():
    x = np.linspace(-80, 80, 100_001).astype(np.float32)
    assert np.array_equal(exp_fast(x).view(np.int32), bit_construction(x).view(np.int32))


def test_unscaled_mean_offset():
    # without the 2 ln^2 2 factor the interpolation sits 1/(2 ln^2 2) - 1 high on average
    x = fastexp.scan_points(0.0, LN2, 2_000_001)[:-1]
    raw = exp_fast(x).astype(np.float64) / float(F32(2 * LN2 * LN2))
    offset = np.mean(raw / np.exp(x.astype(np.float64))) - 1
    assert offset == pytest.approx(0.04068449050280387, abs=2e-4)
    assert offset == pytest.approx(0.0407, abs=1e-4)


def test_fast_octave_mean_near_zero():
    for _, m in octave_means("fast", -20 * LN2, 20 * LN2, 400_001):
        assert abs(m) <= 0.002


@given(st.floats(float(FAST_LO), float(FAST_HI), width=32, exclude_max=True),
       st.floats(float(FAST_LO), float(FAST_HI), width=32, exclude_max=True))
def test_fast_monotone(a, b):
    a, b = sorted((F32(a), F32(b)))
    assert exp_fast(a) <= exp_fast(b)


@given(st.integers(-100 * 2**23, 100 * 2**23))
def test_fast_doubles_on_grid_step(j):
    x1 = F32(j / float(FAST_FACTOR))
    x2 = F32((j + 2**23) / float(FAST_FACTOR))
    assume(int(np.rint(x1 * FAST_FACTOR)) + 2**23 == int(np.rint(x2 * FAST_FACTOR)))
    assert exp_fast(x2) == F32(2) * exp_fast(x1)


def test_fast_doubles_at_integer_log2():
    hits = 0
    for k in range(-120, 120):
        x1, x2 = F32(k * LN2), F32((k + 1) * LN2)
        if int(np.rint(x1 * FAST_FACTOR)) == k * 2**23 and int(np.rint(x2 * FAST_FACTOR)) == (k + 1) * 2**23:
            hits += 1
            assert exp_fast(x2) / exp_fast(x1) == 2
    assert hits > 50


def test_fast_out_of_range_is_finite():
    x = np.array([-1e30, -200, 100, 1e30, FAST_HI], np.float32)
    y = exp_fast(x)
    assert np.all(np.isfinite(y)) and np.all(y >= 0)
    assert np.all(np.diff(y) >= 0)


# --------------------------------------------------------------- accurate

def test_accurate_core_at_zero():
    v = float(exp_accurate_core(F32(0)))
    assert v == 0.9900798797607422
    assert v == pytest.approx((2 * LN2 * LN2) ** 0.25, abs=1e-7)
    assert abs(v / 0.990084 - 1) <= 0.003


def test_accurate_masks():
    assert exp_accurate(F32(0)) == F32(1)
    assert exp_accurate(F32(3.5)) == F32(1)
    assert exp_accurate(F32(-30)) == F32(0)
    assert exp_accurate(np.nextafter(ACCURATE_LO, F32(-np.inf))) == F32(0)
    assert exp_accurate(ACCURATE_LO) > 0


@pytest.mark.parametrize("k,frozen", [(-30, -0.009918272495269775), (-25, -0.009920120239257812)])
def test_accurate_relative_error_points(k, frozen):
    rel = float(exp_accurate(F32(k * LN2))) / 2.0**k - 1
    assert rel == pytest.approx(frozen, abs=1e-9)
    assert -0.011 < rel < 0.0055


@given(st.floats(width=32, allow_nan=False, allow_infinity=False))
def test_accurate_mask_contract(x):
    v = exp_accurate(F32(x))
    if x >= 0:
        assert v == 1.0
    elif F32(x) < ACCURATE_LO:
        assert v == 0.0
    else:
        assert 0 < v <= 1


@given(st.floats(-1e6, 1e6, width=32))
def test_pure(x):
    a = np.array([x] * 3, np.float32)
    for fn in (exp_fast, exp_accurate):
        out = fn(a).view(np.uint32)
        assert out[0] == out[1] == out[2] == fn(F32(x)).view(np.uint32)


# ----------------------------------------------------------------- scans

def test_scan_single_point():
    r = error_scan("fast", 1.0, 1.0, 1)
    assert r.min_rel_error == r.max_rel_error == r.mean_rel_error


def test_scan_report_order_and_bounds():
    r = error_scan("fast", -80, 80, 200_001)
    assert r.min_rel_error <= r.mean_rel_error <= r.max_rel_error
    assert r.max_rel_error <= 0.0205 and r.min_rel_error >= -0.0395
    a = error_scan("accurate", -21.8, 22.1, 200_001)
    assert -0.011 < a.min_rel_error and a.max_rel_error < 0.0055


def test_scan_analytic_extremes():
    # the ratio approx/true spans [2 ln^2 2, 2 ln^2 2 / (ln 2 * 2^(1/ln 2 - 1))]
    lo = 2 * LN2 * LN2 - 1
    hi = 2 * LN2 * LN2 / (LN2 * 2 ** (1 / LN2 - 1)) - 1
    r = error_scan("fast", -10, 10, 2_000_001)
    assert r.min_rel_error == pytest.approx(lo, abs=2e-5)
    assert r.max_rel_error == pytest.approx(hi, abs=2e-5)


@pytest.mark.parametrize("variant,lo,hi,samples", [
    ("fast", -100, 0, 10), ("accurate", -30, 0, 10), ("accurate", 0, 23, 10),
    ("fast", 1, 0, 10), ("nope", 0, 1, 10), ("fast", 0, 1, 0),
])
def test_scan_rejects_bad_domain(variant, lo, hi, samples):
    with pytest.raises(ValueError):
        error_scan(variant, lo, hi, samples)
