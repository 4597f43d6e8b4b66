"""MT19937 in scalar form and as K lane-interleaved generators.

The interleaved layout stores word ``w`` of lane ``k`` at ``w * K + k`` so that
one pass of the recurrence over a row of K adjacent words advances every lane.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._bits import f32_as_i32, i32_as_f32

N = 624
M = 397
MATRIX_A = np.uint32(0x9908B0DF)
UPPER_MASK = np.uint32(0x80000000)
LOWER_MASK = np.uint32(0x7FFFFFFF)

_TWO_POW_M32 = 2.0**-32


@njit(cache=True)
def _init_words(seed):
    words = np.empty(N, dtype=np.uint32)
    x = np.uint64(seed) & np.uint64(0xFFFFFFFF)
    words[0] = np.uint32(x)
    for i in range(1, N):
        x = (np.uint64(1812433253) * (x ^ (x >> np.uint64(30))) + np.uint64(i)) & np.uint64(0xFFFFFFFF)
        words[i] = np.uint32(x)
    return words


@njit(inline="always")
def _mix(upper, lower, far):
    # data[i] = data[i+397] ^ (y>>1) ^ ((y&1) ? MASK_A : 0)
    y = (upper & UPPER_MASK) | (lower & LOWER_MASK)
    mag = MATRIX_A if (y & np.uint32(1)) else np.uint32(0)
    return far ^ (y >> np.uint32(1)) ^ mag


@njit(cache=True, nogil=True)
def _twist(words):
    for i in range(N - M):
        words[i] = _mix(words[i], words[i + 1], words[i + M])
    for i in range(N - M, N - 1):
        words[i] = _mix(words[i], words[i + 1], words[i + M - N])
    words[N - 1] = _mix(words[N - 1], words[0], words[M - 1])


@njit(inline="always")
def _temper(y):
    y = y ^ (y >> np.uint32(11))
    y = y ^ ((y << np.uint32(7)) & np.uint32(0x9D2C5680))
    y = y ^ ((y << np.uint32(15)) & np.uint32(0xEFC60000))
    y = y ^ (y >> np.uint32(18))
    return np.uint32(y)


@njit(inline="always")
def _next_u32(words, cursor):
    """One tempered output; ``cursor`` is a length-1 array updated in place."""
    c = cursor[0]
    if c >= N:
        _twist(words)
        c = 0
    cursor[0] = c + 1
    return _temper(words[c])


@njit(inline="always")
def _to_unit(x):
    # x / 2^32 rounded toward zero in float32
    d = np.float64(x) * _TWO_POW_M32
    f = np.float32(d)
    return i32_as_f32(f32_as_i32(f) - np.int32(np.float64(f) > d))


@njit(cache=True, nogil=True)
def _fill_scalar(words, cursor, out):
    """Write ``out.size`` uniforms, one tempering pass per generator block."""
    c = cursor[0]
    pos = 0
    n = out.size
    while pos < n:
        if c >= N:
            _twist(words)
            c = 0
        m = min(N - c, n - pos)
        # slices let the conversion loop vectorize
        src = words[c:c + m]
        dst = out[pos:pos + m]
        for k in range(m):
            dst[k] = _to_unit(_temper(src[k]))
        pos += m
        c += m
    cursor[0] = c


@njit(inline="always")
def _mix_masked(upper, lower, far):
    y = (upper & UPPER_MASK) | (lower & LOWER_MASK)
    # lane-wise select: all-ones where the low bit is set, then AND with MASK_A
    mask = np.uint32(0) - (y & np.uint32(1))
    return far ^ (y >> np.uint32(1)) ^ (mask & MATRIX_A)


@njit(inline="always")
def _twist_all(words, K):
    # every lane at once: the interleaved state is three flat strided passes
    a = (N - M) * K
    mk = M * K
    for j in range(a):
        words[j] = _mix_masked(words[j], words[j + K], words[j + mk])
    b = (N - 1) * K
    for j in range(a, b):
        words[j] = _mix_masked(words[j], words[j + K], words[j - a])
    for k in range(K):
        words[b + k] = _mix_masked(words[b + k], words[k], words[mk - K + k])


@njit(cache=True, nogil=True)
def _twist4(words):
    # literal lane count lets the compiler vectorise across the stride
    _twist_all(words, 4)


@njit(cache=True, nogil=True)
def _twist_lanes(words, K, lo, hi):
    """Advance lanes [lo, hi) of a K-lane interleaved state by one block."""
    if lo == 0 and hi == K:
        _twist_all(words, K)
        return
    for i in range(N - M):
        a, b, m = i * K, (i + 1) * K, (i + M) * K
        for k in range(lo, hi):
            words[a + k] = _mix_masked(words[a + k], words[b + k], words[m + k])
    for i in range(N - M, N - 1):
        a, b, m = i * K, (i + 1) * K, (i + M - N) * K
        for k in range(lo, hi):
            words[a + k] = _mix_masked(words[a + k], words[b + k], words[m + k])
    a, m = (N - 1) * K, (M - 1) * K
    for k in range(lo, hi):
        words[a + k] = _mix_masked(words[a + k], words[k], words[m + k])


@njit(cache=True, nogil=True)
def _draw_lanes_u32(words, K, lo, hi, cursor, out):
    """Fill ``out`` (blocks x K) for lanes [lo, hi); returns the new cursor."""
    c = cursor
    for r in range(out.shape[0]):
        if c >= N:
            _twist_lanes(words, K, lo, hi)
            c = 0
        base = c * K
        for k in range(lo, hi):
            out[r, k] = _temper(words[base + k])
        c += 1
    return c


@njit(cache=True, nogil=True)
def _draw_lanes_unit(words, K, lo, hi, cursor, out):
    """Like ``_draw_lanes_u32`` but writes float32 uniforms."""
    c = cursor
    for r in range(out.shape[0]):
        if c >= N:
            _twist_lanes(words, K, lo, hi)
            c = 0
        base = c * K
        for k in range(lo, hi):
            out[r, k] = _to_unit(_temper(words[base + k]))
        c += 1
    return c


class Mt19937:
    """Scalar MT19937 generator (``init_genrand`` seeding)."""

    def __init__(self, words: np.ndarray, cursor: int = N):
        words = np.ascontiguousarray(words, dtype=np.uint32)
        if words.shape != (N,):
            raise ValueError(f"expected {N} state words, got shape {words.shape}")
        if not (words[0] & UPPER_MASK) and not words[1:].any():
            raise ValueError("degenerate all-zero MT19937 state")
        if not 0 <= cursor <= N:
            raise ValueError(f"cursor {cursor} outside [0, {N}]")
        self.words = words
        self._cursor = np.array([cursor], dtype=np.int64)

    @classmethod
    def seeded(cls, seed: int) -> "Mt19937":
        return cls(_init_words(int(seed) & 0xFFFFFFFF))

    @property
    def cursor(self) -> int:
        return int(self._cursor[0])

    def next_u32(self) -> int:
        if self._cursor[0] >= N:
            _twist(self.words)
            self._cursor[0] = 0
        c = int(self._cursor[0])
        self._cursor[0] = c + 1
        return int(_temper(self.words[c]))

    def draw_u32(self, n: int) -> np.ndarray:
        out = np.empty((n, 1), dtype=np.uint32)
        self._cursor[0] = _draw_lanes_u32(self.words, 1, 0, 1, int(self._cursor[0]), out)
        return out[:, 0]

    def draw_unit(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.float32)
        _fill_scalar(self.words, self._cursor, out)
        return out

    def copy(self) -> "Mt19937":
        return Mt19937(self.words.copy(), self.cursor)

    def __eq__(self, other):
        if not isinstance(other, Mt19937):
            return NotImplemented
        return self.cursor == other.cursor and np.array_equal(self.words, other.words)


class InterlacedMt:
    """K independent MT19937 generators advanced together.

    Lane ``k`` is an ordinary generator seeded with ``seeds[k]``; output block
    ``m`` holds the ``m``-th output of every lane.
    """

    def __init__(self, words: np.ndarray, lanes: int, cursor: int = N):
        if lanes < 1:
            raise ValueError("an interlaced generator needs at least one lane")
        words = np.ascontiguousarray(words, dtype=np.uint32)
        if words.shape != (N * lanes,):
            raise ValueError(f"expected {N * lanes} words for {lanes} lanes")
        if not 0 <= cursor <= N:
            raise ValueError(f"cursor {cursor} outside [0, {N}]")
        self.words = words
        self.lanes = lanes
        self.cursor = cursor

    @classmethod
    def seeded(cls, seeds) -> "InterlacedMt":
        seeds = [int(s) & 0xFFFFFFFF for s in seeds]
        if not seeds:
            raise ValueError("an interlaced generator needs at least one lane")
        rows = np.stack([_init_words(s) for s in seeds], axis=1)
        return cls(rows.reshape(-1), len(seeds))

    @classmethod
    def from_base_seed(cls, base_seed: int, lanes: int) -> "InterlacedMt":
        return cls.seeded([base_seed + k for k in range(lanes)])

    def lane_words(self, k: int) -> np.ndarray:
        return self.words[k :: self.lanes].copy()

    def lane_state(self, k: int) -> Mt19937:
        return Mt19937(self.lane_words(k), self.cursor)

    def next_block(self) -> np.ndarray:
        return self.draw_u32(1)[0]

    def draw_u32(self, blocks: int) -> np.ndarray:
        out = np.empty((blocks, self.lanes), dtype=np.uint32)
        self.cursor = _draw_lanes_u32(self.words, self.lanes, 0, self.lanes, self.cursor, out)
        return out

    def draw_unit(self, blocks: int) -> np.ndarray:
        out = np.empty((blocks, self.lanes), dtype=np.float32)
        self.cursor = _draw_lanes_unit(self.words, self.lanes, 0, self.lanes, self.cursor, out)
        return out

    def copy(self) -> "InterlacedMt":
        return InterlacedMt(self.words.copy(), self.lanes, self.cursor)

    def __eq__(self, other):
        if not isinstance(other, InterlacedMt):
            return NotImplemented
        return (
            self.lanes == other.lanes
            and self.cursor == other.cursor
            and np.array_equal(self.words, other.words)
        )


def mt_seed(seed: int) -> Mt19937:
    return Mt19937.seeded(seed)


def mt_next_u32(state: Mt19937) -> int:
    return state.next_u32()


def interlaced_seed(seeds) -> InterlacedMt:
    return InterlacedMt.seeded(seeds)


def interlaced_next_block(state: InterlacedMt) -> np.ndarray:
    return state.next_block()


def u32_to_unit(x):
    """Map 32-bit words to float32 in [0, 1) as x / 2^32 rounded toward zero."""
    arr = np.asarray(x, dtype=np.uint64)
    d = arr.astype(np.float64) * _TWO_POW_M32
    f = d.astype(np.float32)
    bits = f.view(np.int32) - (f.astype(np.float64) > d).astype(np.int32)
    out = bits.view(np.float32)
    return out[()] if np.ndim(x) == 0 else out
