"""The Monte Carlo return type and deterministic sample-parallel evaluation."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

# Work is always split into chunks of this many samples, whatever the worker
# count, so per-sample arithmetic is identical for any pool size.
CHUNK = 512


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n: int
    seed: int
    n_excluded: int = 0
    bias_bound: float = 0.0
    extra: dict = field(default_factory=dict, compare=False)

    def within(self, target: float, k: float = 3.0, rel: float = 0.0) -> bool:
        """``|mean - target| <= max(k*stderr, rel*|target|)``."""
        tol = max(k * self.stderr, rel * abs(target))
        return abs(self.mean - target) <= tol + 1e-15 * max(1.0, abs(target))

    def as_dict(self) -> dict:
        return {"estimate": self.mean, "stderr": self.stderr, "n": self.n, "seed": self.seed}


def fsum_mean(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float).ravel()
    return math.fsum(values) / values.size


def estimate_from_samples(values, seed: int, n_excluded: int = 0, bound: float = 0.0, **extra) -> Estimate:
    """Mean and standard error with exactly rounded (order-free) sums."""
    values = np.asarray(values, dtype=float).ravel()
    n = values.size
    if n == 0:
        return Estimate(float("nan"), float("nan"), 0, seed, n_excluded, 0.0, extra)
    mean = math.fsum(values) / n
    if n > 1:
        var = math.fsum((values - mean) ** 2) / (n - 1)
        se = math.sqrt(var / n)
    else:
        se = float("nan")
    frac = n_excluded / (n + n_excluded)
    return Estimate(mean, se, n, seed, n_excluded, frac * bound, extra)


def pooled_sigma(estimates) -> float:
    return math.sqrt(math.fsum(e.stderr ** 2 for e in estimates) / len(estimates))


def map_chunks(fn, n: int, workers: int = 1, chunk: int = CHUNK):
    """Call ``fn(start, stop)`` on fixed sample-index chunks covering ``range(n)``.

    Results are returned in index order.  ``workers`` only changes wall time.
    """
    bounds = [(s, min(s + chunk, n)) for s in range(0, n, chunk)]
    if workers <= 1 or len(bounds) == 1:
        return [fn(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda ab: fn(*ab), bounds))


def concat_chunks(parts):
    """Concatenate per-chunk results (arrays, or dicts/tuples of arrays)."""
    first = parts[0]
    if isinstance(first, dict):
        return {k: np.concatenate([p[k] for p in parts]) for k in first}
    if isinstance(first, tuple):
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(len(first)))
    return np.concatenate(parts)
