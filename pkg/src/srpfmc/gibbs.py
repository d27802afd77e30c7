"""Finite-volume Gibbs measure on two-sided paths and field-observable estimators.

Reference draws are the free two-sided process started at x uniform on a
box; each draw carries the log weight

    -(alpha^2/2) w_self - int_{-t}^{t} V + log phi(X_{-t}) + log phi(X_t),

and expectations are self-normalized importance-sampling averages.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import rng
from .errors import BetaOutOfRange, ConfigError, DegenerateEstimate, SupportOverlap
from .estimate import Estimate, estimate_from_samples, map_chunks
from .field import (FOUR_PI, CutoffSpec, KernelTable, TestFunctionSpec, build_kernel_table, qe_j0_form, qm_form,
                    supports_disjoint)
from .fk import GaussianWindow, _log_ratio_estimate
from .pairing import cross_pairing_batch, gram_self, increments, table_evaluator
from .params import ModelParams
from .potentials import cumulative, evaluate
from .stochastic import MINUS, PLUS, TWO_SIDED, PathBatch, PathConfig, sample_paths

MIN_ESS = 30.0


@lru_cache(maxsize=16)
def default_table(cutoff: CutoffSpec, tau_max: float, r_max: float) -> KernelTable:
    """Projected-kernel table shared by estimators with the same coverage."""
    return build_kernel_table(cutoff, tau_max, r_max, kind="projected", audit_points=200)


@dataclass(frozen=True)
class GibbsConfig:
    params: ModelParams = field(default_factory=ModelParams)
    window: GaussianWindow = None
    path: PathConfig = None
    x_box: tuple = None
    n_samples: int = 10000
    table: KernelTable = None
    seed: int = 1
    workers: int = 1
    truncation_tol: float = None

    def __post_init__(self):
        p = self.params
        if self.window is None:
            object.__setattr__(self, "window", GaussianWindow(center=(0.0,) * p.d))
        if self.path is None:
            cap = None if p.m > 0 else 1e16
            object.__setattr__(self, "path", PathConfig(t=1.0, n_slabs=8, n_substeps=2, m=p.m, d=p.d,
                                                        brownian_time_cap=cap))
        problems = []
        if self.path.m != p.m:
            problems.append(("paths.m", "must equal model.m"))
        if self.path.d != p.d or self.window.d != p.d:
            problems.append(("paths.d", "path, window and model dimensions must agree"))
        if p.alpha != 0 and p.d != 3:
            problems.append(("model.d", "the field coupling needs d = 3"))
        if self.n_samples < 2:
            problems.append(("sampling.n_samples", "must be at least 2"))
        if problems:
            raise ConfigError(problems)

    def replace(self, **kw) -> "GibbsConfig":
        from dataclasses import replace
        return replace(self, **kw)

    def box(self):
        if self.x_box is not None:
            return tuple(np.atleast_1d(np.asarray(b, float)) for b in self.x_box)
        # the x-marginal of the weight is roughly (k_t * phi)^2, a bump of
        # variance (s^2 + E[T_t]) / 2 around the window centre
        t, m, s = self.path.t, self.params.m, self.window.scale
        half = 4.0 * math.sqrt(0.5 * (s * s + t / m)) if m > 0 else 4.0 * s + 8.0 * t
        c = np.asarray(self.window.center)
        return c - half, c + half

    def kernel_table(self, tau_max: float) -> KernelTable:
        if self.table is not None:
            return self.table
        t, m = self.path.t, self.params.m
        r_max = 12.0 * math.sqrt(max(tau_max / max(m, 1e-3), 1.0))
        return default_table(self.params.cutoff, float(math.ceil(tau_max)), float(math.ceil(r_max)))


@dataclass(frozen=True)
class WeightedSample:
    path: object
    log_weight: float
    observables: dict


class WeightedSamples:
    """Reference draws with their log weights (capped draws excluded)."""

    def __init__(self, config, paths: PathBatch, log_weight, w_self, potential_integral, log_window, capped, volume):
        self.config = config
        self.paths = paths
        self.log_weight = log_weight
        self.w_self = w_self
        self.potential_integral = potential_integral
        self.log_window = log_window
        self.capped = capped
        self.volume = volume
        self.cache: dict = {}

    def __len__(self):
        return int((~self.capped).sum())

    @property
    def keep(self):
        return ~self.capped

    def weights(self) -> np.ndarray:
        """Kept weights scaled by the largest one (self-normalized use only)."""
        lw = self.log_weight[self.keep]
        return np.exp(lw - lw.max())

    @property
    def ess(self) -> float:
        return effective_sample_size(self.weights())

    def z_estimate(self) -> Estimate:
        n_all = self.log_weight.size
        vals = self.volume * np.exp(self.log_weight[self.keep])
        return estimate_from_samples(vals, self.config.seed, n_all - vals.size, self.volume, ess=self.ess)

    def sample(self, i: int) -> WeightedSample:
        obs = {"w_self": float(self.w_self[i]), "potential_integral": float(self.potential_integral[i])}
        return WeightedSample(self.paths.path(i), float(self.log_weight[i]), obs)


def effective_sample_size(w) -> float:
    w = np.asarray(w, float)
    s = math.fsum(w)
    return s * s / math.fsum(w * w)


def self_normalized(w, values, seed: int = 0, min_ess: float = MIN_ESS) -> Estimate:
    """``sum w F / sum w`` with a delete-one jackknife standard error.

    Values are centred on one sample's value first, so a constant F comes
    back exactly.
    """
    w = np.asarray(w, float)
    f = np.asarray(values, float)
    n = w.size
    W = math.fsum(w)
    ess = W * W / math.fsum(w * w) if W > 0 else 0.0
    if not ess >= min_ess:
        raise DegenerateEstimate(f"effective sample size {ess:.1f} below {min_ess:g}")
    c = f[int(np.argmax(w))]
    g = f - c
    S = math.fsum(w * g)
    mean = c + S / W
    rest = W - w
    loo = c + np.divide(S - w * g, rest, out=np.full(n, c), where=rest > 0)
    jm = math.fsum(loo) / n
    se = math.sqrt((n - 1) / n * math.fsum((loo - jm) ** 2))
    return Estimate(float(mean), se, n, seed, extra={"ess": ess})


def _positions_at(paths: PathBatch, s: float) -> np.ndarray:
    """Positions at path time s (a slab boundary, either sign)."""
    h = paths.config.slab_width
    j = s / h
    if abs(j - round(j)) > 1e-9 or abs(s) > paths.config.t + 1e-12:
        raise ConfigError([("event.time", f"time {s} is not a slab boundary within the horizon")])
    j = int(round(j))
    if j == 0:
        return paths.x
    return paths.boundary_positions(PLUS if j > 0 else MINUS)[:, abs(j)]


def _window_terms(cfg, paths, j):
    lw = cfg.window.log(paths.boundary_positions(PLUS)[:, j]) + cfg.window.log(paths.boundary_positions(MINUS)[:, j])
    return lw


def _self_terms(cfg, paths, j_max=None):
    """w_self on [-t_j, t_j] (whole window when ``j_max`` is None), clamped at 0."""
    inc = increments(paths)
    table = cfg.kernel_table(2.0 * paths.config.t)
    ev = table_evaluator(table, "direct")
    weights = None if j_max is None else (inc.slab < j_max).astype(float)
    w = gram_self(inc, ev, table.a00, weights=weights)
    return w


def draw_weighted_samples(cfg: GibbsConfig) -> WeightedSamples:
    p = cfg.params
    pc = cfg.path
    lo, hi = cfg.box()
    vol = float(np.prod(hi - lo))
    N = pc.n_slabs

    def chunk(a, b):
        batch = rng.stream_batch(cfg.seed, a, b)
        x = lo + (hi - lo) * batch.uniform(p.d, rng.START)
        paths = sample_paths(pc, x, batch, branch=TWO_SIDED)
        iv = sum(cumulative(evaluate(p.potential, paths.boundary_positions(br), p.d), pc.slab_width,
                            "trapezoid")[:, -1] for br in (PLUS, MINUS))
        lwin = _window_terms(cfg, paths, N)
        w = _self_terms(cfg, paths) if p.alpha != 0 else np.zeros(b - a)
        return paths, iv, lwin, w

    parts = map_chunks(chunk, cfg.n_samples, cfg.workers)
    paths = _concat_batches([q[0] for q in parts])
    iv = np.concatenate([q[1] for q in parts])
    lwin = np.concatenate([q[2] for q in parts])
    w_self = np.concatenate([q[3] for q in parts])
    lw = -0.5 * p.alpha ** 2 * np.maximum(w_self, 0.0) - iv + lwin
    return WeightedSamples(cfg, paths, lw, w_self, iv, lwin, paths.capped, vol)


def _concat_batches(batches) -> PathBatch:
    b0 = batches[0]
    cat = lambda get: np.concatenate([get(b) for b in batches])
    return PathBatch(b0.config, b0.branch, cat(lambda b: b.x),
                     {k: cat(lambda b: b.subordinator[k]) for k in b0.subordinator},
                     {k: cat(lambda b: b.positions[k]) for k in b0.positions},
                     cat(lambda b: b.capped), cat(lambda b: b.ids))


def gibbs_expectation(samples: WeightedSamples, F) -> Estimate:
    """Self-normalized ``E_mu[F]``; F is an array over all draws or a callable of the samples."""
    vals = F(samples) if callable(F) else np.asarray(F, float)
    vals = np.broadcast_to(vals, samples.log_weight.shape)[samples.keep]
    return self_normalized(samples.weights(), vals, samples.config.seed)


def box_event(samples_or_paths, event) -> np.ndarray:
    """Indicator of ``lo <= X_s < hi`` for every ``(s, lo, hi)`` in ``event``."""
    paths = samples_or_paths.paths if isinstance(samples_or_paths, WeightedSamples) else samples_or_paths
    out = np.ones(len(paths), dtype=bool)
    for s, lo, hi in event:
        pos = _positions_at(paths, s)
        out &= np.all((pos >= np.atleast_1d(lo)) & (pos < np.atleast_1d(hi)), axis=-1)
    return out.astype(float)


# -- vacuum matrix elements ------------------------------------------------------


def vacuum_green_function(f, g, cfg: GibbsConfig, t0: float, tn: float, indicators=(), return_samples=False):
    """``int dx E[f(X_{t0}) prod 1_{A_j}(X_{t_j}) g(X_{tn}) e^{-(alpha^2/2) q_E(I[t0,tn])} e^{-int V}]``.

    The process is time-homogeneous and Lebesgue measure is invariant, so the
    path is started at x = X_{t0} uniform on the box of f and run forward
    for tn - t0.  ``indicators`` holds ``(t_j, lo, hi)`` boxes.
    """
    p = cfg.params
    if not tn > t0:
        raise ConfigError([("times", "need t0 < tn")])
    h = cfg.path.slab_width
    span = tn - t0
    n_slabs = int(round(span / h))
    if abs(n_slabs * h - span) > 1e-9:
        raise ConfigError([("times", "tn - t0 must be a multiple of the slab width")])
    pc = cfg.path.replace(t=span, n_slabs=n_slabs)
    lo, hi = (f.box() if cfg.x_box is None else cfg.box())
    vol = float(np.prod(hi - lo))
    idx = []
    for s, a, b in indicators:
        j = (s - t0) / h
        if not (0 < s - t0 < span) or abs(j - round(j)) > 1e-9:
            raise ConfigError([("indicators", f"time {s} is not an interior slab boundary")])
        idx.append((int(round(j)), np.atleast_1d(a), np.atleast_1d(b)))
    table = cfg.kernel_table(span) if p.alpha != 0 else None

    def chunk(a, b):
        batch = rng.stream_batch(cfg.seed, a, b)
        x = lo + (hi - lo) * batch.uniform(p.d, rng.START)
        paths = sample_paths(pc, x, batch, branch=PLUS)
        z = paths.boundary_positions(PLUS)
        iv = cumulative(evaluate(p.potential, z, p.d), h, "trapezoid")[:, -1]
        val = vol * f(x) * g(z[:, -1]) * np.exp(-iv)
        for j, a_, b_ in idx:
            val = val * np.all((z[:, j] >= a_) & (z[:, j] < b_), axis=-1)
        if p.alpha != 0:
            w = gram_self(increments(paths), table_evaluator(table, "direct"), table.a00)
            val = val * np.exp(-0.5 * p.alpha ** 2 * np.maximum(w, 0.0))
        return val, paths.capped

    parts = map_chunks(chunk, cfg.n_samples, cfg.workers)
    vals = np.concatenate([q[0] for q in parts])
    capped = np.concatenate([q[1] for q in parts])
    est = estimate_from_samples(vals[~capped], cfg.seed, int(capped.sum()))
    return (est, vals) if return_samples else est


def fiber_vacuum_element(p_vec, t: float, cfg: GibbsConfig) -> Estimate:
    """Real part of ``E[e^{-i p.B_{T_t}} e^{-(alpha^2/2) q_E(I[0,t])}]`` (requires V = 0)."""
    prm = cfg.params
    if prm.potential.kind != "zero":
        raise ConfigError([("potential.kind", "the fiber element is defined for V = 0")])
    p_vec = np.atleast_1d(np.asarray(p_vec, float))
    if p_vec.size != prm.d:
        raise ConfigError([("p", f"needs {prm.d} components")])
    h = cfg.path.slab_width
    n_slabs = max(1, int(round(t / h)))
    pc = cfg.path.replace(t=t, n_slabs=n_slabs)
    table = cfg.kernel_table(t) if prm.alpha != 0 else None

    def chunk(a, b):
        paths = sample_paths(pc, np.zeros(prm.d), rng.stream_batch(cfg.seed, a, b), branch=PLUS)
        end = paths.positions[PLUS][:, -1]
        val = np.cos(end @ p_vec)
        if prm.alpha != 0:
            w = gram_self(increments(paths), table_evaluator(table, "direct"), table.a00)
            val = val * np.exp(-0.5 * prm.alpha ** 2 * np.maximum(w, 0.0))
        return val, paths.capped

    parts = map_chunks(chunk, cfg.n_samples, cfg.workers)
    vals = np.concatenate([q[0] for q in parts])
    capped = np.concatenate([q[1] for q in parts])
    return estimate_from_samples(vals[~capped], cfg.seed, int(capped.sum()), 1.0)


# -- field observables -------------------------------------------------------------


def cross_terms(samples: WeightedSamples, xi: TestFunctionSpec) -> np.ndarray:
    """w_cross for every draw (cached per test function)."""
    key = ("w_cross", xi)
    if key not in samples.cache:
        cutoff = samples.config.params.cutoff
        samples.cache[key] = cross_pairing_batch(samples.paths, xi, cutoff)
    return samples.cache[key]


def gaussian_characteristic(beta: float, q: float) -> float:
    return math.exp(-(beta * beta * q) / 2.0)


def field_characteristic_values(beta: float, xi: TestFunctionSpec, samples: WeightedSamples) -> np.ndarray:
    alpha = samples.config.params.alpha
    q = qe_j0_form(xi)
    c = cross_terms(samples, xi) if alpha != 0 else np.zeros(samples.log_weight.size)
    return np.exp(-(2.0 * alpha * beta * c + beta * beta * q) / 2.0)


def field_characteristic(beta: float, xi: TestFunctionSpec, samples: WeightedSamples) -> Estimate:
    """``E_mu[exp(-(2 alpha beta w_cross + beta^2 q_E(j_0 xi)) / 2)]``."""
    return gibbs_expectation(samples, field_characteristic_values(beta, xi, samples))


def spherical_quadrature_q(xi: TestFunctionSpec, n_radial: int = 64, n_polar: int = 16, n_azimuth: int = 32) -> float:
    """``1/2 int sum_mu |xi^_mu|^2 (1 - k_mu^2/|k|^2) d^3k`` on a 3-d spherical product grid.

    Independent of the angular-average shortcut used by ``qm_form``.
    """
    cth, wth = np.polynomial.legendre.leggauss(n_polar)
    phi = 2.0 * np.pi * np.arange(n_azimuth) / n_azimuth
    sth = np.sqrt(1.0 - cth ** 2)
    dirs = np.stack([np.outer(sth, np.cos(phi)), np.outer(sth, np.sin(phi)), np.outer(cth, np.ones_like(phi))], -1)
    wdir = np.outer(wth, np.full(n_azimuth, 2.0 * np.pi / n_azimuth))
    total = 0.0
    for mu, prof in enumerate(xi.components):
        if prof is None:
            continue
        lo, hi = prof.support
        hi = min(hi, 50.0)
        nodes, w = np.polynomial.legendre.leggauss(n_radial)
        edges = np.linspace(lo, hi, 9)
        ang = math.fsum((wdir * (1.0 - dirs[..., mu] ** 2)).ravel())
        for a, b in zip(edges[:-1], edges[1:]):
            k = 0.5 * (b - a) * nodes + 0.5 * (b + a)
            total += ang * float(np.sum(0.5 * (b - a) * w * prof(k) ** 2 * k * k))
    return 0.5 * total


def _double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1


def gaussian_moment_check(xi: TestFunctionSpec, samples: WeightedSamples, n_order: int = 4,
                          betas=(-2.0, -1.0, 0.0, 1.0, 2.0)) -> dict:
    """Moments of the Gaussian law implied by ``exp(-beta^2 q / 2)`` for a decoupled test function."""
    cutoff = samples.config.params.cutoff
    if not supports_disjoint(xi, cutoff):
        raise SupportOverlap("the test function meets the cutoff support")
    q = qm_form(xi, xi)
    q_grid = spherical_quadrature_q(xi)
    # derivatives at 0 of exp(-beta^2 q/2): f^(n) = -(n-1) q f^(n-2)
    deriv = [1.0, 0.0]
    for n in range(2, n_order + 1):
        deriv.append(-(n - 1) * q * deriv[n - 2])
    moments = [(-1) ** (n // 2) * deriv[n] if n % 2 == 0 else 0.0 for n in range(n_order + 1)]
    closed = [_double_factorial(n - 1) * q ** (n // 2) if n % 2 == 0 else 0.0 for n in range(n_order + 1)]
    c = cross_terms(samples, xi)
    rows = []
    for beta in betas:
        est = field_characteristic(beta, xi, samples)
        target = gaussian_characteristic(beta, q)
        rows.append({"beta": beta, "estimate": est, "target": target,
                     "pass": abs(est.mean - target) <= 3.0 * est.stderr + 1e-15})
    return {
        "q": q, "q_quadrature": q_grid, "moments": moments[1:], "closed_form": closed[1:],
        "max_abs_cross": float(np.max(np.abs(c))), "cross_variance": float(np.var(c)),
        "rows": rows, "pass": all(r["pass"] for r in rows) and abs(q - q_grid) <= 1e-6,
    }


def gaussian_domination(beta: float, xi: TestFunctionSpec, samples: WeightedSamples, n_nodes: int = 80) -> dict:
    """``(1 - 2 beta q)^{-1/2} E_mu[exp(-beta alpha^2 w_cross^2 / (1 - 2 beta q))]``.

    For beta <= 0 the same quantity is also computed as the Gaussian average
    of the characteristic curve, ``int phi(k) E_mu[F(k sqrt(-2 beta))] dk``
    (Gauss-Hermite), on the same draws.
    """
    q = qe_j0_form(xi)
    if q > 0 and beta >= 1.0 / (2.0 * q):
        raise BetaOutOfRange(f"beta must stay below 1/(2q) = {1.0 / (2.0 * q):.6g}")
    alpha = samples.config.params.alpha
    c = cross_terms(samples, xi) if alpha != 0 else np.zeros(samples.log_weight.size)
    den = 1.0 - 2.0 * beta * q
    direct = den ** -0.5 * np.exp(-beta * alpha ** 2 * c * c / den)
    seed = samples.config.seed
    out = {"beta": beta, "q": q, "estimate": gibbs_expectation(samples, direct)}
    if beta <= 0:
        s = math.sqrt(-2.0 * beta)
        k, wk = np.polynomial.hermite_e.hermegauss(n_nodes)
        wk = wk / math.sqrt(2.0 * math.pi)
        quad = np.zeros_like(c)
        for kj, wj in zip(k, wk):
            b = kj * s
            quad += wj * np.exp(-(2.0 * alpha * b * c + b * b * q) / 2.0)
        out["quadrature"] = gibbs_expectation(samples, quad)
        out["difference"] = gibbs_expectation(samples, quad - direct)
        est = out["estimate"]
        out["pass"] = abs(out["quadrature"].mean - est.mean) <= 3.0 * est.stderr + 1e-12
    return out


# -- long-time probes -------------------------------------------------------------------


def _horizon_samples(cfg: GibbsConfig, t_max: float):
    h = cfg.path.slab_width
    n_slabs = int(round(t_max / h))
    if abs(n_slabs * h - t_max) > 1e-9:
        raise ConfigError([("t_grid", "times must be multiples of the slab width")])
    return cfg.replace(path=cfg.path.replace(t=t_max, n_slabs=n_slabs))


def _prefix_log_weights(cfg, j_list):
    """Per-draw log weights on the windows [-t_j, t_j] for each grid index j."""
    p = cfg.params
    pc = cfg.path
    lo, hi = cfg.box()
    vol = float(np.prod(hi - lo))

    def chunk(a, b):
        batch = rng.stream_batch(cfg.seed, a, b)
        x = lo + (hi - lo) * batch.uniform(p.d, rng.START)
        paths = sample_paths(pc, x, batch, branch=TWO_SIDED)
        cums = [cumulative(evaluate(p.potential, paths.boundary_positions(br), p.d), pc.slab_width, "trapezoid")
                for br in (PLUS, MINUS)]
        out = {}
        for j in j_list:
            lw = -(cums[0][:, j] + cums[1][:, j]) + _window_terms(cfg, paths, j)
            if p.alpha != 0:
                lw = lw - 0.5 * p.alpha ** 2 * np.maximum(_self_terms(cfg, paths, j), 0.0)
            out[j] = lw
        return out, paths

    parts = map_chunks(chunk, cfg.n_samples, cfg.workers)
    lws = {j: np.concatenate([q[0][j] for q in parts]) for j in j_list}
    paths = _concat_batches([q[1] for q in parts])
    return lws, paths, vol


def ground_energy_full(cfg: GibbsConfig, t_grid, dt: float = 1.0) -> dict:
    """``-(1/(2 dt)) log(Z_{t+dt}/Z_t)`` on the two-sided window [-t, t] for t in ``t_grid``.

    The window [-t, t] has length 2t, hence the factor 1/(2 dt).
    """
    t_grid = sorted(float(t) for t in t_grid)
    cfg = _horizon_samples(cfg, t_grid[-1] + dt)
    h = cfg.path.slab_width
    idx = [(int(round(t / h)), int(round((t + dt) / h))) for t in t_grid]
    lws, paths, vol = _prefix_log_weights(cfg, sorted({j for pair in idx for j in pair}))
    keep = ~paths.capped
    ests = []
    for t, (i0, i1) in zip(t_grid, idx):
        za, zb = vol * np.exp(lws[i0][keep]), vol * np.exp(lws[i1][keep])
        for z in (za, zb):
            if effective_sample_size(z) < MIN_ESS:
                raise DegenerateEstimate(f"effective sample size below {MIN_ESS:g} at t = {t}")
        ests.append(_log_ratio_estimate(za, zb, cfg.seed, 2.0 * dt, t))
    stab = abs(ests[-1].mean - ests[-2].mean) / math.hypot(ests[-1].stderr, ests[-2].stderr) if len(ests) > 1 else 0.0
    return {"t_grid": t_grid, "estimates": ests, "stabilization_sigma": stab}


def fdd_stabilization_probe(event, t_grid, cfg: GibbsConfig) -> dict:
    """``mu_t(A)`` for a box event A over increasing t on shared draws."""
    t_grid = sorted(float(t) for t in t_grid)
    for s, _, _ in event:
        if abs(s) > t_grid[0] + 1e-12:
            raise ConfigError([("event.time", "event times must lie within the smallest window")])
    cfg = _horizon_samples(cfg, t_grid[-1])
    h = cfg.path.slab_width
    js = [int(round(t / h)) for t in t_grid]
    lws, paths, _ = _prefix_log_weights(cfg, js)
    keep = ~paths.capped
    ind = box_event(paths, event)[keep]
    ests = []
    for j in js:
        lw = lws[j][keep]
        ests.append(self_normalized(np.exp(lw - lw.max()), ind, cfg.seed))
    stat = abs(ests[-1].mean - ests[-2].mean) / math.hypot(ests[-1].stderr, ests[-2].stderr) if len(ests) > 1 else 0.0
    return {"t_grid": t_grid, "estimates": ests, "stabilization_sigma": stat}


def positive_definiteness_check(beta0: float, xi: TestFunctionSpec, samples: WeightedSamples) -> dict:
    """Eigenvalues of ``[F(b_i - b_j)]`` for b in {-beta0, 0, beta0} with F the characteristic curve."""
    betas = (-beta0, 0.0, beta0)
    diffs = sorted({round(a - b, 12) for a in betas for b in betas})
    ests = {d: field_characteristic(d, xi, samples) for d in diffs}
    M = np.array([[ests[round(a - b, 12)].mean for b in betas] for a in betas])
    S = np.array([[ests[round(a - b, 12)].stderr for b in betas] for a in betas])
    eig = np.linalg.eigvalsh(0.5 * (M + M.T))
    tol = 3.0 * float(np.linalg.norm(S, 2))
    return {"matrix": M, "eigenvalues": eig, "tolerance": tol, "pass": bool(eig.min() >= -tol)}
