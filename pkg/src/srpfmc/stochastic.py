"""Subordinator T_t, two-sided Brownian motion and subordinated paths.

The subordinator has Laplace exponent ``psi(u) = sqrt(2u + m^2) - m``; T_t is
the first time a unit-variance Brownian motion with drift ``m`` reaches level
``t``.  Paths are sampled as independent (+) and (-) branches that both start
at ``x``; branch (-) realizes negative path time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import ndtri

from . import rng

PLUS, MINUS, TWO_SIDED = "plus", "minus", "two_sided"


@dataclass(frozen=True)
class PathConfig:
    t: float
    n_slabs: int = 32
    n_substeps: int = 8
    m: float = 1.0
    d: int = 3
    brownian_time_cap: Optional[float] = None

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(f"{k}: {v}" for k, v in problems))

    def problems(self):
        out = []
        if not (math.isfinite(self.t) and self.t > 0):
            out.append(("t", "horizon must be positive and finite"))
        if self.n_slabs < 1:
            out.append(("n_slabs", "must be >= 1"))
        if self.n_substeps < 1:
            out.append(("n_substeps", "must be >= 1"))
        if not self.m >= 0:
            out.append(("m", "mass must be >= 0"))
        if self.d < 1:
            out.append(("d", "dimension must be >= 1"))
        if self.m == 0 and (self.brownian_time_cap is None or not math.isfinite(self.brownian_time_cap)):
            out.append(("brownian_time_cap", "a finite cap is required when m = 0"))
        if self.brownian_time_cap is not None and not self.brownian_time_cap > 0:
            out.append(("brownian_time_cap", "must be positive"))
        return out

    @property
    def slab_width(self) -> float:
        return self.t / self.n_slabs

    @property
    def slab_times(self) -> np.ndarray:
        return np.linspace(0.0, self.t, self.n_slabs + 1)

    def replace(self, **kw) -> "PathConfig":
        data = dict(self.__dict__)
        data.update(kw)
        return PathConfig(**data)


def bernstein_psi(u, m: float = 0.0):
    """Laplace exponent ``sqrt(2u + m^2) - m`` of T, written cancellation-free."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("u must be >= 0")
    out = 2.0 * u / (np.sqrt(2.0 * u + m * m) + m) if m > 0 else np.sqrt(2.0 * u)
    return out if out.ndim else float(out)


def bernstein_from_levy(u, drift: float, levy_density, upper=np.inf) -> float:
    """Generic Bernstein function ``b u + int (1 - e^{-uy}) lambda(dy)``.

    ``levy_density`` is the density of the Levy measure on ``(0, upper)``.
    """
    from scipy.integrate import quad

    integrand = lambda y: -math.expm1(-u * y) * levy_density(y)
    head, _ = quad(integrand, 0.0, 1.0, limit=200)
    tail, _ = quad(integrand, 1.0, upper, limit=200) if upper > 1.0 else (0.0, 0.0)
    return drift * u + head + tail


def subordinator_levy_density(m: float):
    """Levy density of T: ``(2 pi)^{-1/2} y^{-3/2} e^{-m^2 y / 2}``."""
    return lambda y: math.exp(-0.5 * m * m * y) / math.sqrt(2.0 * math.pi * y ** 3)


def subordinator_density(s, t: float, m: float = 0.0):
    """Density of T_t at ``s``; zero for ``s <= 0``."""
    s_arr = np.asarray(s, dtype=float)
    if not (math.isfinite(t) and t > 0) or not math.isfinite(m) or np.any(~np.isfinite(s_arr)):
        raise ValueError("subordinator_density needs finite s, t > 0 and finite m")
    out = np.zeros_like(s_arr)
    pos = s_arr > 0
    sp = s_arr[pos]
    # t e^{tm} s^{-3/2} e^{-(t^2/s + m^2 s)/2} = t s^{-3/2} e^{-(t - m s)^2 / (2 s)}
    out[pos] = t / math.sqrt(2.0 * math.pi) * sp ** -1.5 * np.exp(-((t - m * sp) ** 2) / (2.0 * sp))
    return out if out.ndim else float(out)


def subordinator_cdf(t: float, m: float = 0.0, s_max: float = 1e12, n_panels: int = 2400):
    """CDF of T_t by Gauss-Legendre integration of the density on a log grid.

    Returns a vectorized callable.  Mass beyond ``s_max`` (only relevant
    for m = 0, where it is about ``t sqrt(2 / (pi s_max))``) is not included.
    """
    s_min = t * t / 400.0  # the density is below e^-200 of its scale here
    edges = np.geomspace(s_min, s_max, n_panels + 1)
    nodes, weights = np.polynomial.legendre.leggauss(8)
    a, b = edges[:-1, None], edges[1:, None]
    s = 0.5 * (b - a) * nodes + 0.5 * (b + a)
    mass = np.sum(0.5 * (b - a) * weights * subordinator_density(s, t, m), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(mass)])
    spline = PchipInterpolator(np.log(edges), cum)

    def cdf(x):
        x = np.asarray(x, dtype=float)
        out = np.where(x <= s_min, 0.0, np.where(x >= s_max, cum[-1], spline(np.log(np.clip(x, s_min, s_max)))))
        return out if out.ndim else float(out)

    return cdf


def _increments_from_variates(dt: float, m: float, z: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Exact T_dt draws from a standard normal ``z`` and uniform ``u``.

    m > 0: inverse Gaussian with mean dt/m and shape dt^2 (transformation
    with a Bernoulli choice between the two roots).  m = 0: dt^2 / z^2.
    """
    if m == 0:
        return dt * dt / (z * z)
    mu = dt / m
    lam = dt * dt
    w = mu * z * z / (2.0 * lam)
    root = mu / (1.0 + w + np.sqrt(w * (w + 2.0)))
    return np.where(u <= mu / (mu + root), root, mu * mu / root)


def sample_subordinator_increment(dt: float, m: float, stream: rng.RandomStream, purpose: int = rng.EXTRA) -> float:
    if not dt > 0:
        raise ValueError("dt must be positive")
    v = stream.uniform(2, purpose)
    return float(_increments_from_variates(dt, m, ndtri(v[:1]), v[1:])[0])


def subordinator_increments(dt: float, m: float, batch: rng.StreamBatch, n: int, purpose: int) -> np.ndarray:
    """``n`` i.i.d. increments T_dt per stream: shape (len(batch), n)."""
    v = batch.uniform(2 * n, purpose)
    return _increments_from_variates(dt, m, ndtri(v[:, 0::2]), v[:, 1::2])


@dataclass(frozen=True)
class SubordinatedPath:
    """One realized path.  Arrays are read-only views.

    ``subordinator[b]`` has the values T_0 = 0 <= ... <= T_N on branch ``b``;
    ``positions[b]`` has shape (N * n_substeps + 1, d) with row 0 equal to x.
    """

    branch: str
    config: PathConfig
    x: np.ndarray
    subordinator: dict
    positions: dict
    capped: bool

    @property
    def slab_times(self) -> np.ndarray:
        return self.config.slab_times

    def slab_label(self, branch: str, a: int) -> float:
        """Path-time label of Brownian sub-step ``a``: left end of its slab."""
        j = a // self.config.n_substeps
        lab = self.config.slab_times[j]
        return lab if branch == PLUS else -lab

    def total_brownian_time(self) -> float:
        return float(sum(v[-1] for v in self.subordinator.values()))


class PathBatch:
    """Struct-of-arrays for many paths sampled with the same ``PathConfig``."""

    def __init__(self, config, branch, x, subordinator, positions, capped, ids):
        self.config = config
        self.branch = branch
        self.x = x
        self.subordinator = subordinator
        self.positions = positions
        self.capped = capped
        self.ids = ids

    def __len__(self):
        return self.x.shape[0]

    @property
    def branches(self):
        return [PLUS, MINUS] if self.branch == TWO_SIDED else [self.branch]

    def boundary_positions(self, branch: str) -> np.ndarray:
        """Positions at slab boundaries, shape (n, N + 1, d)."""
        return self.positions[branch][:, :: self.config.n_substeps, :]

    def path(self, i: int) -> SubordinatedPath:
        def ro(a):
            a = a[i]
            a.flags.writeable = False
            return a

        return SubordinatedPath(
            self.branch,
            self.config,
            ro(self.x),
            {b: ro(v) for b, v in self.subordinator.items()},
            {b: ro(v) for b, v in self.positions.items()},
            bool(self.capped[i]),
        )

    def select(self, mask) -> "PathBatch":
        return PathBatch(
            self.config,
            self.branch,
            self.x[mask],
            {b: v[mask] for b, v in self.subordinator.items()},
            {b: v[mask] for b, v in self.positions.items()},
            self.capped[mask],
            self.ids[mask],
        )


_SUB = {PLUS: rng.SUB_PLUS, MINUS: rng.SUB_MINUS}
_BM = {PLUS: rng.BM_PLUS, MINUS: rng.BM_MINUS}


def brownian_positions(x: np.ndarray, sub: np.ndarray, n_substeps: int, batch: rng.StreamBatch, purpose: int) -> np.ndarray:
    """Brownian sub-path over the realized intervals [T_{j-1}, T_j]."""
    n, d = x.shape
    n_slabs = sub.shape[1] - 1
    z = batch.normal(n_slabs * n_substeps * d, purpose).reshape(n, n_slabs, n_substeps, d)
    scale = np.sqrt(np.diff(sub, axis=1) / n_substeps)
    steps = (z * scale[:, :, None, None]).reshape(n, n_slabs * n_substeps, d)
    out = np.empty((n, n_slabs * n_substeps + 1, d))
    out[:, 0, :] = x
    np.cumsum(steps, axis=1, out=out[:, 1:, :])
    out[:, 1:, :] += x[:, None, :]
    return out


def sample_paths(config: PathConfig, x, batch: rng.StreamBatch, branch: str = TWO_SIDED, subordinator=None) -> PathBatch:
    """Sample ``len(batch)`` paths; row ``i`` uses only stream ``batch.ids[i]``.

    ``subordinator`` optionally freezes the subordinator: a dict branch ->
    array of T values of length n_slabs + 1 shared by every sample.
    """
    n = len(batch)
    x = np.broadcast_to(np.asarray(x, dtype=float).reshape(-1, config.d), (n, config.d)).copy()
    branches = [PLUS, MINUS] if branch == TWO_SIDED else [branch]
    subs, pos = {}, {}
    total = np.zeros(n)
    for b in branches:
        if subordinator is not None:
            s = np.broadcast_to(np.asarray(subordinator[b], dtype=float), (n, config.n_slabs + 1)).copy()
        else:
            inc = subordinator_increments(config.slab_width, config.m, batch, config.n_slabs, _SUB[b])
            s = np.zeros((n, config.n_slabs + 1))
            np.cumsum(inc, axis=1, out=s[:, 1:])
        subs[b] = s
        total += s[:, -1]
        pos[b] = brownian_positions(x, s, config.n_substeps, batch, _BM[b])
    cap = config.brownian_time_cap
    capped = total > cap if cap is not None else np.zeros(n, dtype=bool)
    return PathBatch(config, branch, x, subs, pos, capped, np.asarray(batch.ids))


def sample_path(config: PathConfig, x, stream: rng.RandomStream, branch: str = TWO_SIDED) -> SubordinatedPath:
    """Single-path form of :func:`sample_paths` (identical draws)."""
    return sample_paths(config, x, stream.as_batch(), branch).path(0)


def laplace_transform(t: float, u: float, m: float) -> float:
    return math.exp(-t * bernstein_psi(u, m))
