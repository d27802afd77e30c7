"""Pathwise pair interaction q_E(I, I) and pairing q_E(I, j_0 xi).

A path contributes Brownian sub-increments dB_a, each with an evaluation
point X_a (the end of the sub-step nearest path time 0) and a path-time
label (the left end of its slab, negative on the (-) branch).  Increments
on the (-) branch enter with sign -1 (they are stored outward from x).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import NonDyadicSplit, RejectedMZero, TableCoverageExceeded
from .estimate import Estimate, estimate_from_samples, map_chunks
from .field import (CutoffSpec, KernelTable, TestFunctionSpec, cross_kernel_batch, pair_components,
                    scalar_kernel)
from .stochastic import MINUS, PLUS, PathBatch, PathConfig, sample_paths

GRAM_SLACK = 1e-8


@dataclass(frozen=True)
class PairingResult:
    w_self: float
    w_cross: float | None
    n_substeps_total: int
    truncation_radius_used: float


@dataclass(frozen=True)
class Increments:
    dB: np.ndarray      # (n, M, d)
    X: np.ndarray       # (n, M, d)
    labels: np.ndarray  # (M,)
    branch: np.ndarray  # (M,) +1 / -1
    slab: np.ndarray    # (M,) slab index within its branch


def increments(batch: PathBatch, branches=None) -> Increments:
    cfg = batch.config
    branches = batch.branches if branches is None else branches
    dbs, xs, labs, sgn, slabs = [], [], [], [], []
    slab_of = np.repeat(np.arange(cfg.n_slabs), cfg.n_substeps)
    left = cfg.slab_times[:-1][slab_of]
    for b in branches:
        P = batch.positions[b]
        s = 1.0 if b == PLUS else -1.0
        dbs.append(s * np.diff(P, axis=1))
        xs.append(P[:, :-1, :])
        labs.append(s * left)
        sgn.append(np.full(slab_of.size, s))
        slabs.append(slab_of)
    return Increments(np.concatenate(dbs, axis=1), np.concatenate(xs, axis=1), np.concatenate(labs),
                      np.concatenate(sgn), np.concatenate(slabs))


def table_evaluator(table: KernelTable, on_exceed: str = "raise"):
    """(tau, r) -> (a, b) from a table; ``on_exceed="direct"`` falls back to quadrature."""

    def ev(tau, r):
        try:
            return table.components(tau, r)
        except TableCoverageExceeded:
            if on_exceed != "direct":
                raise
        tau = np.abs(tau)
        inside = (tau <= table.tau_max) & (r <= table.r_max)
        a, b = np.empty(np.shape(r)), np.empty(np.shape(r))
        a[inside], b[inside] = table.components(tau[inside], r[inside])
        if table.kind == "projected":
            a[~inside], b[~inside] = pair_components(tau[~inside], r[~inside], table.cutoff)
        else:
            a[~inside], b[~inside] = scalar_kernel(tau[~inside], r[~inside], table.cutoff), 0.0
        return a, b

    return ev


def direct_evaluator(cutoff: CutoffSpec, kind: str = "projected"):
    """Table-free evaluator by Gauss-Legendre radial quadrature."""
    if kind == "projected":
        return lambda tau, r: pair_components(tau, r, cutoff)
    return lambda tau, r: (scalar_kernel(tau, r, cutoff), np.zeros(np.shape(r)))


def _pair_terms(dBi, dBj, diff, a, b):
    r2 = np.einsum("...k,...k->...", diff, diff)
    dot = np.einsum("...k,...k->...", dBi, dBj)
    pi = np.einsum("...k,...k->...", dBi, diff)
    pj = np.einsum("...k,...k->...", dBj, diff)
    safe = np.where(r2 > 0, r2, 1.0)
    return a * dot + np.where(r2 > 0, b * pi * pj / safe, 0.0)


def gram_self(inc: Increments, evaluator, diag_a: float, weights=None, truncation=None) -> np.ndarray:
    """``sum_{a,b} c_a c_b dB_a W(tau_ab, X_a - X_b) dB_b`` per sample (diagonal kept).

    ``weights`` (M,) are optional coefficients c_a (default 1).
    ``truncation`` is an optional boolean mask over the upper-triangle pairs.
    """
    n, M, _ = inc.dB.shape
    c = np.ones(M) if weights is None else np.asarray(weights, float)
    diag = diag_a * np.einsum("nmk,nmk->nm", inc.dB, inc.dB) @ (c * c)
    iu, ju = np.triu_indices(M, 1)
    keep = np.nonzero(c[iu] * c[ju])[0]
    if truncation is not None:
        keep = keep[truncation[keep]]
    iu, ju = iu[keep], ju[keep]
    if iu.size == 0:
        return diag
    cc = c[iu] * c[ju]
    tau = np.abs(inc.labels[iu] - inc.labels[ju])
    out = np.empty(n)
    group = max(1, 1_000_000 // iu.size)
    for s in range(0, n, group):
        sl = slice(s, s + group)
        X, dB = inc.X[sl], inc.dB[sl]
        diff = X[:, iu, :] - X[:, ju, :]
        r = np.sqrt(np.einsum("npk,npk->np", diff, diff))
        a, b = evaluator(np.broadcast_to(tau, r.shape), r)
        terms = _pair_terms(dB[:, iu, :], dB[:, ju, :], diff, a, b)
        out[sl] = diag[sl] + 2.0 * (terms @ cc)
    return out


def gram_bilinear(inc: Increments, evaluator, mask_a, mask_b) -> np.ndarray:
    """``sum_{a in A, b in B} dB_a K(tau_ab, X_a - X_b) dB_b`` per sample."""
    ia, ib = np.nonzero(mask_a)[0], np.nonzero(mask_b)[0]
    I, J = np.meshgrid(ia, ib, indexing="ij")
    I, J = I.ravel(), J.ravel()
    tau = np.abs(inc.labels[I] - inc.labels[J])
    diff = inc.X[:, I, :] - inc.X[:, J, :]
    r = np.sqrt(np.einsum("npk,npk->np", diff, diff))
    a, b = evaluator(np.broadcast_to(tau, r.shape), r)
    return _pair_terms(inc.dB[:, I, :], inc.dB[:, J, :], diff, a, b).sum(axis=1)


def truncation_mask(inc: Increments, table: KernelTable, tol: float):
    """Keep upper-triangle pairs whose tau-envelope of |W| is at least ``tol``."""
    M = inc.labels.size
    iu, ju = np.triu_indices(M, 1)
    tau = np.abs(inc.labels[iu] - inc.labels[ju])
    env = np.interp(tau, table.tau_grid, table.tau_envelope)
    return env >= tol


def self_pairing_batch(batch: PathBatch, table: KernelTable, truncation_tol: float | None = None,
                       on_exceed: str = "raise") -> np.ndarray:
    inc = increments(batch)
    trunc = truncation_mask(inc, table, truncation_tol) if truncation_tol else None
    return gram_self(inc, table_evaluator(table, on_exceed), table.a00, truncation=trunc)


def self_pairing(path, table: KernelTable, truncation_tol: float | None = None) -> PairingResult:
    """q_E(I, I) for one path, discretized as a full Gram form."""
    batch = _as_batch(path)
    w = float(self_pairing_batch(batch, table, truncation_tol)[0])
    M = increments(batch).labels.size
    return PairingResult(w, None, M, float("inf") if truncation_tol is None else truncation_tol)


def cross_pairing_batch(batch: PathBatch, xi: TestFunctionSpec, cutoff: CutoffSpec) -> np.ndarray:
    """``sum_a dB_a . G(label_a, X_a - x; xi)`` per sample.

    Positions enter relative to the start point x, so the value does not
    depend on x.
    """
    inc = increments(batch)
    rel = inc.X - batch.x[:, None, :]
    G = cross_kernel_batch(np.broadcast_to(inc.labels, rel.shape[:-1]), rel, xi, cutoff)
    return np.einsum("nmk,nmk->n", inc.dB, G)


def cross_pairing(path, xi: TestFunctionSpec, cutoff: CutoffSpec) -> float:
    return float(cross_pairing_batch(_as_batch(path), xi, cutoff)[0])


def _as_batch(path) -> PathBatch:
    if isinstance(path, PathBatch):
        return path
    return PathBatch(path.config, path.branch, path.x[None, :],
                     {b: v[None, :] for b, v in path.subordinator.items()},
                     {b: v[None, ...] for b, v in path.positions.items()},
                     np.array([path.capped]), np.array([0]))


def frozen_subordinator(config: PathConfig, seed: int, branches=(PLUS,)) -> dict:
    """One subordinator realization drawn from a stream reserved for freezing."""
    probe = sample_paths(config.replace(n_substeps=1), np.zeros(config.d),
                         rng.StreamBatch(seed, np.array([2 ** 62], dtype=np.uint64)),
                         branch=PLUS if len(branches) == 1 else "two_sided")
    return {b: probe.subordinator[b][0] for b in branches}


# -- batteries ------------------------------------------------------------------


def ito_isometry_battery(config: PathConfig, n_brownian: int, cutoff: CutoffSpec, seed: int = 1,
                         subordinator=None, table: KernelTable | None = None,
                         scalar_table: KernelTable | None = None, workers: int = 1) -> dict:
    """Brownian redraws over a frozen subordinator on [0, t].

    Checks E||I||_E^2 = d T_t ||phi^/sqrt(omega)||^2 (unprojected kernel) and
    E q_E(I, I) = (d-1)/2 T_t ||phi^/sqrt(omega)||^2 (projected).  Kernels
    come from the given tables, or from direct quadrature when none is given.
    """
    d = config.d
    sub = subordinator if subordinator is not None else frozen_subordinator(config, seed)
    T = float(sub[PLUS][-1])
    norm2 = cutoff.norm_sq_over_omega()
    target_e, target_p = d * T * norm2, 0.5 * (d - 1) * T * norm2
    ev_e = table_evaluator(scalar_table, "direct") if scalar_table is not None else direct_evaluator(cutoff, "scalar")
    ev_p = table_evaluator(table, "direct") if table is not None else direct_evaluator(cutoff, "projected")
    s00 = float(scalar_kernel(0.0, 0.0, cutoff))
    a00 = table.a00 if table is not None else float(pair_components(0.0, 0.0, cutoff)[0])

    def chunk(a, b):
        paths = sample_paths(config, np.zeros(d), rng.stream_batch(seed, a, b), branch=PLUS, subordinator=sub)
        inc = increments(paths)
        return np.stack([gram_self(inc, ev_e, s00), gram_self(inc, ev_p, a00)], axis=1)

    vals = np.concatenate(map_chunks(chunk, n_brownian, workers, chunk=256))
    est_e = estimate_from_samples(vals[:, 0], seed)
    est_p = estimate_from_samples(vals[:, 1], seed)
    return {
        "T_t": T,
        "target_unprojected": target_e,
        "estimate_unprojected": est_e,
        "target_projected": target_p,
        "estimate_projected": est_p,
        "pass_unprojected": est_e.within(target_e) if T > 0 else est_e.mean == 0.0,
        "pass_projected": est_p.within(target_p) if T > 0 else est_p.mean == 0.0,
        "min_projected": float(vals[:, 1].min()),
    }


def bdg_envelope_scale(t: float, m: float) -> float:
    """E[T_t^2] = t^2/m^2 + t/m^3 (m > 0)."""
    return t * t / (m * m) + t / m ** 3


def moment_battery(config: PathConfig, n: int, table: KernelTable, seed: int = 1,
                   t_grid=(1.0, 2.0, 4.0, 8.0), workers: int = 1) -> dict:
    """Fourth moment of the projected norm of I[0,t] across ``t_grid``.

    The envelope is ``C E[T_t^2] ||phi^/sqrt(omega)||^4`` with C fitted at
    the first grid time; the battery passes when every moment stays below
    its envelope by no more than 3 standard errors, and when the fourth
    moment dominates the squared second moment.
    """
    if config.m <= 0:
        raise RejectedMZero("the fourth-moment bound needs m > 0")
    norm2 = table.cutoff.norm_sq_over_omega()
    width = config.slab_width
    rows = []
    for t in t_grid:
        n_slabs = max(1, int(round(t / width)))
        cfg = config.replace(t=t, n_slabs=n_slabs)
        ev = table_evaluator(table, "direct")

        def chunk(a, b, cfg=cfg, ev=ev):
            paths = sample_paths(cfg, np.zeros(cfg.d), rng.stream_batch(seed, a, b), branch=PLUS)
            return gram_self(increments(paths), ev, table.a00)

        w = np.concatenate(map_chunks(chunk, n, workers, chunk=256))
        rows.append((t, estimate_from_samples(w, seed), estimate_from_samples(w * w, seed)))
    t0, _, m4_0 = rows[0]
    C = m4_0.mean / (bdg_envelope_scale(t0, config.m) * norm2 ** 2)
    report = {"C": C, "rows": [], "pass": True}
    for t, m2, m4 in rows:
        env = C * bdg_envelope_scale(t, config.m) * norm2 ** 2
        # the envelope inherits the t0 estimate's error, scaled
        env_se = m4_0.stderr * bdg_envelope_scale(t, config.m) / bdg_envelope_scale(t0, config.m)
        ok_env = m4.mean <= env + 3.0 * math.hypot(m4.stderr, env_se if t != t0 else 0.0)
        ok_jensen = m4.mean >= m2.mean ** 2
        report["rows"].append({"t": t, "second": m2, "fourth": m4, "envelope": env,
                               "ratio": m4.mean / env, "pass_envelope": ok_env, "pass_jensen": ok_jensen})
        report["pass"] &= ok_env and ok_jensen
    return report


def _is_dyadic(frac: float, max_level: int = 30) -> bool:
    for lvl in range(max_level + 1):
        x = frac * 2 ** lvl
        if abs(x - round(x)) < 1e-12:
            return True
    return False


def additivity_battery(config: PathConfig, n: int, cutoff: CutoffSpec, s: float, t: float,
                       seed: int = 1, scalar_table: KernelTable | None = None, workers: int = 1) -> dict:
    """Additivity and overlap covariance of I[a, b] on a path over [0, config.t].

    ``0 < s < t < config.t``; s and t must be dyadic fractions of the horizon
    that land on slab boundaries.  Reports: the exact residual of
    I[0,t] - I[0,s] - I[s,t]; the covariance of I[0,s] with I[s,t] (target 0);
    the covariance of I[0,t] with I[s,u] (target d (T_t - T_s) ||phi^/sqrt(omega)||^2).
    """
    u = config.t
    for val in (s, t):
        frac = val / u
        k = frac * config.n_slabs
        if not (0 < frac < 1) or not _is_dyadic(frac) or abs(k - round(k)) > 1e-9:
            raise NonDyadicSplit(f"split point {val} is not a dyadic slab boundary of [0, {u}]")
    if not s < t:
        raise NonDyadicSplit("need s < t")
    js, jt = int(round(s / u * config.n_slabs)), int(round(t / u * config.n_slabs))
    sub = frozen_subordinator(config, seed)
    T = sub[PLUS]
    norm2 = cutoff.norm_sq_over_omega()
    ev = table_evaluator(scalar_table, "direct") if scalar_table is not None else direct_evaluator(cutoff, "scalar")
    s00 = float(scalar_kernel(0.0, 0.0, cutoff))

    def chunk(a, b):
        paths = sample_paths(config, np.zeros(config.d), rng.stream_batch(seed, a, b), branch=PLUS, subordinator=sub)
        inc = increments(paths)
        in_0t, in_0s = inc.slab < jt, inc.slab < js
        in_st = (inc.slab >= js) & (inc.slab < jt)
        in_su = inc.slab >= js
        resid_coef = in_0t.astype(float) - in_0s - in_st
        residual = gram_self(inc, ev, s00, weights=resid_coef)
        disjoint = gram_bilinear(inc, ev, in_0s, in_st)
        overlap = gram_bilinear(inc, ev, in_0t, in_su)
        return np.stack([residual, disjoint, overlap], axis=1)

    vals = np.concatenate(map_chunks(chunk, n, workers, chunk=256))
    disjoint = estimate_from_samples(vals[:, 1], seed)
    overlap = estimate_from_samples(vals[:, 2], seed)
    target = config.d * (T[jt] - T[js]) * norm2
    return {
        "max_abs_residual": float(np.max(np.abs(vals[:, 0]))),
        "disjoint": disjoint,
        "overlap": overlap,
        "overlap_target": target,
        "pass": bool(np.all(vals[:, 0] == 0.0) and disjoint.within(0.0) and overlap.within(target)),
    }
