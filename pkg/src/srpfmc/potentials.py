"""External potentials V and the relativistic Kato-class diagnostic."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rng
from .estimate import estimate_from_samples, map_chunks, concat_chunks
from .stochastic import PLUS, PathConfig, sample_paths

KINDS = ("zero", "harmonic", "soft_coulomb", "coulomb3d", "square_well", "user_table")
DEFAULT_FLOOR = 1e6


@dataclass(frozen=True)
class PotentialSpec:
    """``kind`` plus its parameters.

    harmonic: ``omega0 |x|^2``; soft_coulomb: ``-g / sqrt(|x|^2 + a^2)``;
    coulomb3d: ``max(-g/|x|, -floor)``; square_well: ``-depth`` on
    ``|x| < width/2``; user_table: linear interpolation of (x, V) in d = 1,
    constant beyond the table ends.
    """

    kind: str = "zero"
    omega0: float = 1.0
    g: float = 0.0
    a: float = 1.0
    depth: float = 0.0
    width: float = 1.0
    floor: float = DEFAULT_FLOOR
    table_x: Optional[tuple] = None
    table_v: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "user_table":
            xs = np.asarray(self.table_x, float)
            if xs.size < 2 or np.any(np.diff(xs) <= 0):
                raise ValueError("user_table x grid must be strictly increasing with >= 2 points")
            if len(self.table_v) != xs.size:
                raise ValueError("user_table needs one V value per x")

    @property
    def decays(self) -> bool:
        """True when V tends to 0 at infinity."""
        return self.kind in ("zero", "soft_coulomb", "coulomb3d", "square_well")

    @property
    def confining(self) -> bool:
        return self.kind == "harmonic" and self.omega0 > 0

    def lower_bound(self) -> float:
        """A finite lower bound of V (uses the floor for coulomb3d)."""
        if self.kind == "soft_coulomb":
            return -abs(self.g) / self.a if self.g > 0 else 0.0
        if self.kind == "coulomb3d":
            return -self.floor if self.g > 0 else 0.0
        if self.kind == "square_well":
            return min(0.0, -self.depth)
        if self.kind == "user_table":
            return float(min(self.table_v))
        return 0.0 if self.kind == "zero" or self.omega0 >= 0 else -math.inf


def _coords(x, d):
    """(radius, first coordinate) for ``d=None`` scalar points or a trailing axis of length d."""
    x = np.asarray(x, dtype=float)
    if d is None:
        return np.abs(x), x
    if x.shape[-1] != d:
        raise ValueError(f"expected a trailing axis of length {d}, got shape {x.shape}")
    if d == 1:
        return np.abs(x[..., 0]), x[..., 0]
    return np.linalg.norm(x, axis=-1), x[..., 0]


def evaluate(spec: PotentialSpec, x, d: Optional[int] = None):
    """V at ``x``.  With ``d=None`` every element of ``x`` is a 1-d point;
    otherwise the last axis holds the ``d`` coordinates."""
    r, signed = _coords(x, d)
    k = spec.kind
    if k == "zero":
        out = np.zeros_like(r)
    elif k == "harmonic":
        out = spec.omega0 * r * r
    elif k == "soft_coulomb":
        out = -spec.g / np.sqrt(r * r + spec.a * spec.a)
    elif k == "coulomb3d":
        with np.errstate(divide="ignore"):
            out = np.maximum(-spec.g / r, -spec.floor)
    elif k == "square_well":
        out = np.where(r < 0.5 * spec.width, -spec.depth, 0.0)
    else:
        out = np.interp(signed, spec.table_x, spec.table_v)
    return out if out.ndim else float(out)


def positive_part(spec, x, d=None):
    return np.maximum(evaluate(spec, x, d), 0.0)


def negative_part(spec, x, d=None):
    return np.maximum(-np.asarray(evaluate(spec, x, d)), 0.0)


def floor_active(spec: PotentialSpec, x, d=None):
    """Mask of points where the coulomb3d floor replaced -g/|x|."""
    r, _ = _coords(x, d)
    if spec.kind != "coulomb3d" or spec.g <= 0:
        return np.zeros(r.shape, dtype=bool)
    return r < spec.g / spec.floor


def load_user_table(path) -> PotentialSpec:
    """Read a two-column text file ``x V(x)`` (``#`` comments allowed)."""
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ValueError("user table must have exactly two columns")
    return PotentialSpec(kind="user_table", table_x=tuple(data[:, 0]), table_v=tuple(data[:, 1]))


def save_user_table(path, xs, vs):
    np.savetxt(path, np.column_stack([xs, vs]), header="x V(x)")


def path_integral(spec: PotentialSpec, boundary_pos: np.ndarray, dt: float, rule: str = "trapezoid"):
    """Time integral of V along slab-boundary positions of shape (n, N+1, d).

    ``rule`` is ``trapezoid`` (both ends weighted 1/2) or ``right`` (sum of
    the N right endpoints, never touching the start point).
    Returns cumulative integrals of shape (n, N+1) with column 0 equal to 0.
    """
    vals = evaluate(spec, boundary_pos, d=boundary_pos.shape[-1])
    return cumulative(vals, dt, rule)


def cumulative(vals: np.ndarray, dt: float, rule: str = "trapezoid") -> np.ndarray:
    n, k = vals.shape
    out = np.zeros((n, k))
    if rule == "trapezoid":
        np.cumsum(0.5 * dt * (vals[:, 1:] + vals[:, :-1]), axis=1, out=out[:, 1:])
    elif rule == "right":
        np.cumsum(dt * vals[:, 1:], axis=1, out=out[:, 1:])
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return out


@dataclass
class KatoReport:
    t: float
    points: list
    estimates: list
    half_t_estimates: list
    max_estimate: object
    superlinear_flag: bool
    floor_activation_rate: float
    n_capped: int = 0
    extra: dict = field(default_factory=dict)


def relativistic_kato_diagnostic(spec, t, x_grid, n, params, seed: int = 1, n_slabs: int = 32, workers: int = 1,
                                 brownian_time_cap: Optional[float] = None):
    """Estimate ``E^x[exp(int_0^t V_-(z_s) ds)]`` on ``x_grid``.

    The time integral uses right endpoints on the path-time grid, so a start
    point sitting on a singularity of V never enters.  The same paths give
    the value at ``t/2``; ``superlinear_flag`` is raised when
    ``log M(t) > 2.5 log M(t/2)`` (M = grid max), a heuristic sign that
    the sup is not controlled.
    """
    if not t > 0 or len(x_grid) == 0:
        raise ValueError("need t > 0 and a nonempty grid")
    if n_slabs % 2:
        raise ValueError("n_slabs must be even (t/2 sits on the grid)")
    d = params.d
    pts = [np.atleast_1d(np.asarray(p, float)) for p in x_grid]
    cfg = PathConfig(t=t, n_slabs=n_slabs, n_substeps=1, m=params.m, d=d,
                     brownian_time_cap=brownian_time_cap if brownian_time_cap else (None if params.m > 0 else 1e12))
    dt = cfg.slab_width

    def chunk(a, b):
        paths = sample_paths(cfg, np.zeros(d), rng.stream_batch(seed, a, b), branch=PLUS)
        disp = paths.boundary_positions(PLUS)
        full, half, hits = [], [], 0
        for p in pts:
            pos = disp + p
            vneg = negative_part(spec, pos, d)
            hits += int(floor_active(spec, pos[:, 1:], d).sum())
            cum = cumulative(vneg, dt, "right")
            full.append(np.exp(cum[:, -1]))
            half.append(np.exp(cum[:, n_slabs // 2]))
        return np.array(full).T, np.array(half).T, paths.capped, np.full(b - a, hits)

    parts = map_chunks(chunk, n, workers)
    full = np.concatenate([p[0] for p in parts])
    half = np.concatenate([p[1] for p in parts])
    capped = np.concatenate([p[2] for p in parts])
    hits = sum(int(p[3][0]) for p in parts)
    keep = ~capped
    ests = [estimate_from_samples(full[keep, i], seed, int(capped.sum())) for i in range(len(pts))]
    hests = [estimate_from_samples(half[keep, i], seed, int(capped.sum())) for i in range(len(pts))]
    imax = int(np.argmax([e.mean for e in ests]))
    m_full, m_half = ests[imax].mean, max(e.mean for e in hests)
    flag = bool(m_half > 1.0 and math.log(m_full) > 2.5 * math.log(m_half))
    rate = hits / (n * len(pts) * n_slabs)
    return KatoReport(t, pts, ests, hests, ests[imax], flag, rate, int(capped.sum()))
