"""Counter-based random streams.

Every variate is a pure function of ``(master_seed, stream_id, purpose, index)``
computed with Philox4x64-10, vectorized over stream ids.  A sample's draws
therefore do not depend on how samples are batched or on the worker count.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_MASK64 = (1 << 64) - 1

# Counter word 1 carries the purpose tag so that independent parts of a path
# (subordinator, Brownian sub-steps, start point) never share variates.
SUB_PLUS = 1
SUB_MINUS = 2
BM_PLUS = 3
BM_MINUS = 4
START = 5
EXTRA = 6


def _mulhilo(a, b):
    lo = a * b
    a0, a1 = a & _LO, a >> _S32
    b0, b1 = b & _LO, b >> _S32
    p00, p01, p10, p11 = a0 * b0, a0 * b1, a1 * b0, a1 * b1
    mid = (p00 >> _S32) + (p01 & _LO) + (p10 & _LO)
    hi = p11 + (p01 >> _S32) + (p10 >> _S32) + (mid >> _S32)
    return hi, lo


def philox4x64(counter, key):
    """Philox4x64-10 block function.

    ``counter`` is a sequence of four uint64 arrays and ``key`` a sequence of
    two; all are broadcast together.  Returns four uint64 arrays.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in counter)
    k0, k1 = (np.asarray(k, dtype=np.uint64) for k in key)
    c0, c1, c2, c3, k0, k1 = np.broadcast_arrays(c0, c1, c2, c3, k0, k1)
    with np.errstate(over="ignore"):
        for rnd in range(10):
            h0, l0 = _mulhilo(_M0, c0)
            h1, l1 = _mulhilo(_M1, c2)
            c0, c1, c2, c3 = h1 ^ c1 ^ k0, l1, h0 ^ c3 ^ k1, l0
            if rnd < 9:
                k0 = k0 + _W0
                k1 = k1 + _W1
    return c0, c1, c2, c3


def _raw(seed: int, ids: np.ndarray, purpose: int, start: int, count: int) -> np.ndarray:
    """Raw uint64 words ``start .. start+count`` for every stream id."""
    ids = np.asarray(ids, dtype=np.uint64).reshape(-1)
    if count == 0:
        return np.zeros((ids.size, 0), dtype=np.uint64)
    first, last = start // 4, (start + count - 1) // 4
    blocks = np.arange(first, last + 1, dtype=np.uint64)
    out = philox4x64(
        (blocks[None, :], np.uint64(purpose), np.uint64(0), np.uint64(0)),
        (np.uint64(seed & _MASK64), ids[:, None]),
    )
    words = np.stack(out, axis=-1).reshape(ids.size, -1)
    offset = start - 4 * first
    return words[:, offset:offset + count]


def _to_unit(words: np.ndarray) -> np.ndarray:
    # 53-bit mantissa, shifted half a step off zero: values lie strictly in (0, 1).
    return ((words >> _S11).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


@dataclass(frozen=True)
class RandomStream:
    """One sample's stream.  ``counter`` offsets every purpose's draw index."""

    master_seed: int
    stream_id: int
    counter: int = 0

    def uniform(self, n: int, purpose: int = EXTRA) -> np.ndarray:
        return StreamBatch(self.master_seed, np.array([self.stream_id]), self.counter).uniform(n, purpose)[0]

    def normal(self, n: int, purpose: int = EXTRA) -> np.ndarray:
        return StreamBatch(self.master_seed, np.array([self.stream_id]), self.counter).normal(n, purpose)[0]

    def advance(self, n: int) -> "RandomStream":
        return RandomStream(self.master_seed, self.stream_id, self.counter + n)

    def as_batch(self) -> "StreamBatch":
        return StreamBatch(self.master_seed, np.array([self.stream_id]), self.counter)


@dataclass(frozen=True)
class StreamBatch:
    """Many streams advanced in lockstep; row ``i`` is stream ``ids[i]``."""

    master_seed: int
    ids: np.ndarray
    counter: int = 0

    def __len__(self):
        return len(self.ids)

    def uniform(self, n: int, purpose: int = EXTRA) -> np.ndarray:
        return _to_unit(_raw(self.master_seed, self.ids, purpose, self.counter, n))

    def normal(self, n: int, purpose: int = EXTRA) -> np.ndarray:
        return ndtri(self.uniform(n, purpose))

    def stream(self, i: int) -> RandomStream:
        return RandomStream(self.master_seed, int(self.ids[i]), self.counter)


def derive_stream(master_seed: int, sample_index: int) -> RandomStream:
    """The stream owned by sample ``sample_index`` under ``master_seed``."""
    if sample_index < 0:
        raise ValueError("sample_index must be non-negative")
    return RandomStream(int(master_seed) & _MASK64, int(sample_index))


def stream_batch(master_seed: int, start: int, stop: int) -> StreamBatch:
    return StreamBatch(int(master_seed) & _MASK64, np.arange(start, stop, dtype=np.uint64))
