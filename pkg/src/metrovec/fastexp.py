"""Exponential approximations built from the IEEE-754 single-precision layout.

A positive float32 with exponent field ``x`` and mantissa ``m`` reads as the
integer ``2**23 * x + m``.  Adding ``2**23`` to that integer doubles the float,
so writing ``round(2**23 * (y + 127))`` into the bits gives a piecewise-linear
``2**y`` that is exact at integer ``y``.  Scaling by ``2 ln^2 2`` centres the
relative error on zero.

``exp_fast`` is that construction applied to ``y = x log2 e``.
``exp_accurate`` builds ``2**(4y)`` the same way (exact at quarter steps of
``y``) and takes a fourth root, with the masking a Metropolis acceptance test
needs: exactly 1.0 for ``x >= 0`` and exactly 0.0 below ``-31.5 ln 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, vectorize

from ._bits import i32_as_f32

LN2 = math.log(2.0)
SCALE = np.float32(2.0 * LN2 * LN2)
ONE_BITS = np.int32(0x3F800000)  # 127 * 2**23
FAST_FACTOR = np.float32(2.0**23 / LN2)
ACCURATE_FACTOR = np.float32(2.0**25 / LN2)

FAST_LO = np.float32(-126.0 * LN2)
FAST_HI = np.float32(128.0 * LN2)
ACCURATE_LO = np.float32(-31.5 * LN2)
ACCURATE_HI = np.float32(32.0 * LN2)

_MAX_FINITE_BITS = np.int32(0x7F7FFFFF)
_INPUT_CLAMP_HI = np.nextafter(FAST_HI, np.float32(0.0))


@njit(inline="always")
def exp_fast_scalar(x):
    x = np.float32(x)
    x = min(max(x, FAST_LO), _INPUT_CLAMP_HI)
    i = np.int32(np.rint(x * FAST_FACTOR)) + ONE_BITS
    i = min(i, _MAX_FINITE_BITS)
    return i32_as_f32(i) * SCALE


@njit(inline="always")
def exp_accurate_core_scalar(x):
    x = np.float32(x)
    i = np.int32(np.rint(x * ACCURATE_FACTOR)) + ONE_BITS
    return np.float32(math.sqrt(math.sqrt(i32_as_f32(i) * SCALE)))


@njit(inline="always")
def exp_accurate_scalar(x):
    x = np.float32(x)
    # core on the clamped input, then the masks as selects (no branches)
    r = exp_accurate_core_scalar(min(max(x, ACCURATE_LO), np.float32(0.0)))
    r = np.float32(1.0) if x >= np.float32(0.0) else r
    return np.float32(0.0) if x < ACCURATE_LO else r


@njit(inline="always")
def exp_exact_scalar(x):
    return np.float32(math.exp(np.float64(x)))


@vectorize(["float32(float32)"], cache=True)
def _exp_fast_ufunc(x):
    return exp_fast_scalar(x)


@vectorize(["float32(float32)"], cache=True)
def _exp_accurate_ufunc(x):
    return exp_accurate_scalar(x)


@vectorize(["float32(float32)"], cache=True)
def _exp_accurate_core_ufunc(x):
    return exp_accurate_core_scalar(x)


def _call(ufunc, x):
    out = ufunc(np.asarray(x, dtype=np.float32))
    return out[()] if np.ndim(out) == 0 else out


def exp_fast(x):
    """Piecewise-linear e**x, relative error in [-0.0391, +0.0200]."""
    return _call(_exp_fast_ufunc, x)


def exp_accurate(x):
    """Fourth-root refined e**x, clamped to 1.0 for x >= 0 and 0.0 far below."""
    return _call(_exp_accurate_ufunc, x)


def exp_accurate_core(x):
    """The unmasked fourth-root approximation, valid on [-31.5 ln 2, 32 ln 2)."""
    return _call(_exp_accurate_core_ufunc, x)


VARIANTS = {
    "fast": (exp_fast, float(FAST_LO), float(FAST_HI)),
    "accurate": (exp_accurate_core, float(ACCURATE_LO), float(ACCURATE_HI)),
}


@dataclass(frozen=True)
class ErrorScanReport:
    variant: str
    lo: float
    hi: float
    samples: int
    max_rel_error: float
    min_rel_error: float
    mean_rel_error: float


def relative_errors(variant: str, x: np.ndarray) -> np.ndarray:
    fn = VARIANTS[variant][0]
    x32 = np.asarray(x, dtype=np.float32)
    truth = np.exp(x32.astype(np.float64))
    return (fn(x32).astype(np.float64) - truth) / truth


def scan_points(lo: float, hi: float, samples: int) -> np.ndarray:
    return np.linspace(lo, hi, samples, dtype=np.float64).astype(np.float32)


def check_domain(variant: str, lo: float, hi: float, samples: int) -> None:
    if variant not in VARIANTS:
        raise ValueError(f"unknown exponential variant {variant!r}")
    if samples < 1:
        raise ValueError("samples must be positive")
    if samples > 1 and not lo < hi:
        raise ValueError(f"empty scan domain [{lo}, {hi}]")
    _, vlo, vhi = VARIANTS[variant]
    if np.float32(lo) < np.float32(vlo) or np.float32(hi) >= np.float32(vhi):
        raise ValueError(
            f"[{lo}, {hi}] leaves the valid domain [{vlo:.6f}, {vhi:.6f}) of {variant}"
        )


def error_scan(variant: str, lo: float, hi: float, samples: int, chunk: int = 1 << 20) -> ErrorScanReport:
    """Relative error statistics at ``samples`` evenly spaced points of [lo, hi].

    A single sample evaluates ``lo`` alone.
    """
    check_domain(variant, lo, hi, samples)
    grid = np.linspace(lo, hi, samples, dtype=np.float64) if samples > 1 else np.array([lo])
    emax, emin, total = -np.inf, np.inf, 0.0
    for start in range(0, samples, chunk):
        err = relative_errors(variant, grid[start : start + chunk])
        emax = max(emax, float(err.max()))
        emin = min(emin, float(err.min()))
        total += math.fsum(err)
    mean = total / samples
    # the chunked float sum can land a hair outside [min, max] for constant errors
    mean = min(max(mean, emin), emax)
    return ErrorScanReport(variant, float(lo), float(hi), samples, emax, emin, mean)


def octave_means(variant: str, lo: float, hi: float, samples: int) -> list[tuple[float, float]]:
    """Mean relative error over each whole octave [k ln 2, (k+1) ln 2) inside [lo, hi]."""
    check_domain(variant, lo, hi, samples)
    x = scan_points(lo, hi, samples)
    err = relative_errors(variant, x)
    octave = np.floor(x.astype(np.float64) / LN2).astype(np.int64)
    first = math.ceil(lo / LN2)
    last = math.floor(hi / LN2) - 1
    result = []
    for k in range(first, last + 1):
        sel = octave == k
        if sel.any():
            result.append((k * LN2, float(err[sel].mean())))
    return result
