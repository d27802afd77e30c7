"""The fifteen acceptance criteria with pinned configurations.

``run_suite`` evaluates them in order and returns one ``CriterionResult``
each; ``serialize`` turns results into the byte-stable text the
``full-suite`` subcommand writes.  Sample sizes are the ``full`` scale;
``quick`` divides them (used for the determinism replay).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from . import fk, gibbs, pairing, rng, spectral
from .errors import RejectedMZero, SrpfmcError
from .estimate import estimate_from_samples, map_chunks
from .field import (CutoffSpec, RadialProfile, TestFunctionSpec, build_kernel_table, pair_potential, qe_j0_form)
from .kernel import characteristic_function, gaussian_overlap, radial_cdf
from .params import ModelParams
from .potentials import PotentialSpec
from .stochastic import PLUS, PathConfig, laplace_transform, sample_paths, subordinator_cdf, subordinator_increments

TITLES = {
    1: "subordinator Laplace law",
    2: "subordinator density (KS)",
    3: "relativistic kernel histogram and characteristic function",
    4: "zero-coupling reduction to the kernel convolution",
    5: "ground energies against the spectral oracle",
    6: "bound-state martingale flatness",
    7: "bound-state fall-off",
    8: "Ito isometry with a frozen subordinator",
    9: "pair potential at the origin",
    10: "Gram positivity and conditional mean",
    11: "decoupled test function",
    12: "Gaussian-domination consistency",
    13: "diamagnetic inequality",
    14: "fourth-moment battery",
    15: "determinism",
}

HARMONIC = PotentialSpec("harmonic", omega0=0.5)
SOFT = PotentialSpec("soft_coulomb", g=0.5, a=1.0)
FALLOFF_WELL = PotentialSpec("soft_coulomb", g=1.0, a=1.0)
OVERLAP_XI = TestFunctionSpec.single(RadialProfile("sharp_shell", r_in=0.2, r_out=0.8), 0)
DISJOINT_XI = TestFunctionSpec.single(RadialProfile("sharp_shell", r_in=1.5, r_out=2.5), 1)


@dataclass
class CriterionResult:
    number: int
    passed: bool
    summary: str
    records: list = field(default_factory=list)

    @property
    def title(self) -> str:
        return TITLES[self.number]

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number:2d} ({self.title}): {self.summary}"


class Context:
    """Pinned settings plus draws shared between criteria."""

    def __init__(self, seed: int = 1, workers: int = 1, scale: str = "full"):
        self.seed, self.workers, self.scale = seed, workers, scale
        self._cache = {}

    def n(self, full: int, floor: int = 200) -> int:
        return full if self.scale == "full" else max(floor, full // 10)

    def cached(self, key, make):
        if key not in self._cache:
            self._cache[key] = make()
        return self._cache[key]

    def coupled_samples(self, alpha: float):
        params = ModelParams(d=3, m=1.0, alpha=alpha)
        cfg = gibbs.GibbsConfig(params=params, path=PathConfig(t=1.0, n_slabs=8, n_substeps=2, m=1.0, d=3),
                                n_samples=self.n(10000, 3000), seed=self.seed, workers=self.workers)
        return self.cached(("gibbs", alpha), lambda: gibbs.draw_weighted_samples(cfg))

    def solution(self, spec, L, n, m=1.0):
        return self.cached(("spectral", spec, L, n, m), lambda: spectral.build_and_solve(L, n, m, spec))


def _est(e) -> dict:
    return {"estimate": e.mean, "stderr": e.stderr, "n": e.n}


def _fmt(x) -> str:
    return f"{x:.6g}"


# -- criteria ----------------------------------------------------------------------


def criterion_1(ctx: Context) -> CriterionResult:
    n = ctx.n(100000)
    records, worst, ok = [], 0.0, True
    for m in (0.0, 1.0):
        for t in (0.5, 1.0, 2.0):
            def chunk(a, b, t=t, m=m):
                return subordinator_increments(t, m, rng.stream_batch(ctx.seed, a, b), 1, rng.SUB_PLUS)[:, 0]

            T = np.concatenate(map_chunks(chunk, n, ctx.workers, chunk=8192))
            for u in (0.0, 0.5, 1.0, 2.0):
                est = estimate_from_samples(np.exp(-u * T), ctx.seed)
                target = laplace_transform(t, u, m)
                good = est.within(target)
                z = abs(est.mean - target) / est.stderr if est.stderr > 0 else 0.0
                worst = max(worst, z)
                ok &= good
                records.append({"t": t, "u": u, "m": m, **_est(est), "target": target, "pass": good})
    spot = laplace_transform(1.0, 1.0, 0.0)
    ok &= abs(spot - 0.24312) < 5e-6
    return CriterionResult(1, ok, f"24 grid points, worst |z| = {_fmt(worst)}; spot e^-sqrt2 = {_fmt(spot)}", records)


def criterion_2(ctx: Context) -> CriterionResult:
    n = ctx.n(10000)
    crit = 1.36 / math.sqrt(n)
    records, ok = [], True
    for m in (0.0, 1.0):
        T = subordinator_increments(1.0, m, rng.stream_batch(ctx.seed, 0, n), 1, rng.SUB_MINUS)[:, 0]
        cdf = subordinator_cdf(1.0, m)
        res = stats.kstest(T, cdf)
        good = res.statistic < crit
        ok &= good
        records.append({"t": 1.0, "m": m, "ks": float(res.statistic), "critical": crit, "pass": good})
    return CriterionResult(2, ok, ", ".join(f"m={r['m']:g}: D={_fmt(r['ks'])}" for r in records)
                           + f" (critical {_fmt(crit)})", records)


def _z_samples(ctx, t, m, n, purpose_offset=0):
    cfg = PathConfig(t=t, n_slabs=1, n_substeps=1, m=m, d=1, brownian_time_cap=None if m > 0 else 1e16)

    def chunk(a, b):
        p = sample_paths(cfg, np.zeros(1), rng.stream_batch(ctx.seed, purpose_offset + a, purpose_offset + b),
                         branch=PLUS)
        return p.positions[PLUS][:, -1, 0], p.capped

    parts = map_chunks(chunk, n, ctx.workers, chunk=8192)
    z = np.concatenate([q[0] for q in parts])
    capped = np.concatenate([q[1] for q in parts])
    return z[~capped]


def criterion_3(ctx: Context) -> CriterionResult:
    n = ctx.n(100000)
    t = 1.0
    records, ok = [], True
    for m in (0.0, 1.0):
        z = _z_samples(ctx, t, m, n, purpose_offset=1 << 40)
        cdf = radial_cdf(t, m, 1)
        L = optimize.brentq(lambda x: cdf(np.array([x]))[0] - 0.995, 0.1, 1e4)
        edges = np.linspace(-L, L, 49)
        probs = np.diff(np.concatenate([[0.0], cdf(edges), [1.0]]))
        counts = np.histogram(z, bins=np.concatenate([[-np.inf], edges, [np.inf]]))[0]
        expected = probs * z.size
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        p = float(stats.chi2.sf(chi2, df=counts.size - 1))
        good_hist = p > 0.01
        cf_rows = []
        for u in (0.5, 1.0, 2.0, 4.0):
            est = estimate_from_samples(np.cos(u * z), ctx.seed)
            target = characteristic_function(u, t, m)
            cf_rows.append({"u": u, **_est(est), "target": target, "pass": est.within(target)})
        good = good_hist and all(r["pass"] for r in cf_rows)
        ok &= good
        records.append({"m": m, "bins": int(counts.size), "chi2": chi2, "p_value": p, "cf": cf_rows, "pass": good})
    return CriterionResult(3, ok, ", ".join(f"m={r['m']:g}: chi2 p={_fmt(r['p_value'])}" for r in records)
                           + "; characteristic function on 4 points", records)


def criterion_4(ctx: Context) -> CriterionResult:
    params = ModelParams(d=1, m=1.0)
    f = g = fk.GaussianWindow((0.0,), 1.0)
    t = 1.0
    target = gaussian_overlap((0.0,), 1.0, (0.0,), 1.0, t, 1.0, 1)
    n = ctx.n(100000)
    sem = fk.semigroup_element(fk.FKQuery(f, g, params.potential, t, params, n, seed=ctx.seed, workers=ctx.workers))
    cfg = gibbs.GibbsConfig(params=params, path=PathConfig(t=t, n_slabs=8, n_substeps=1, m=1.0, d=1),
                            n_samples=n, seed=ctx.seed + 1, workers=ctx.workers)
    green = gibbs.vacuum_green_function(f, g, cfg, 0.0, t)
    ok_s = sem.within(target, rel=0.02)
    ok_g = green.within(target, rel=0.02)
    recs = [{"op": "semigroup_element", **_est(sem), "target": target, "pass": ok_s},
            {"op": "vacuum_green_function", **_est(green), "target": target, "pass": ok_g}]
    return CriterionResult(4, ok_s and ok_g, f"kernel {_fmt(target)}, semigroup {_fmt(sem.mean)}+-{_fmt(sem.stderr)}, "
                           f"green {_fmt(green.mean)}+-{_fmt(green.stderr)}", recs)


def criterion_5(ctx: Context) -> CriterionResult:
    params_base = ModelParams(d=1, m=1.0)
    records, ok = [], True
    for spec, L, ng in ((HARMONIC, 20.0, 1024), (SOFT, 40.0, 4096)):
        sol = ctx.solution(spec, L, ng)
        res = fk.ground_energy_estimate(spec, params_base.replace(potential=spec), (4.0, 8.0), ctx.n(40000, 4000),
                                        window=fk.GaussianWindow((0.0,), 1.0), dt=1.0, seed=ctx.seed,
                                        workers=ctx.workers)
        for e in res["estimates"]:
            good = e.within(sol.eigenvalue, rel=0.02)
            ok &= good
            records.append({"potential": spec.kind, "t": e.extra["t"], **_est(e), "oracle": sol.eigenvalue,
                            "pass": good})
    return CriterionResult(5, ok, "; ".join(f"{r['potential']} t={r['t']:g}: {_fmt(r['estimate'])} vs {_fmt(r['oracle'])}"
                                            for r in records), records)


def criterion_6(ctx: Context) -> CriterionResult:
    sol = ctx.solution(HARMONIC, 20.0, 1024)
    records, ok = [], True
    for x in (0.0, 1.0):
        res = fk.martingale_deviation(sol, HARMONIC, x, (0.5, 1.0, 2.0, 4.0), ctx.n(40000, 4000), seed=ctx.seed,
                                      workers=ctx.workers)
        good = res["max_deviation_sigma"] < 3.0
        ok &= good
        records.append({"x": x, "target": res["target"], "max_deviation_sigma": res["max_deviation_sigma"],
                        "estimates": [_est(e) for e in res["estimates"]], "pass": good})
    return CriterionResult(6, ok, ", ".join(f"x={r['x']:g}: max dev {_fmt(r['max_deviation_sigma'])} sigma"
                                            for r in records), records)


def criterion_7(ctx: Context) -> CriterionResult:
    sol0 = ctx.solution(FALLOFF_WELL, 2000.0, 65536, m=0.0)
    sol1 = ctx.solution(FALLOFF_WELL, 2000.0, 65536, m=1.0)
    r0 = fk.falloff_envelope(FALLOFF_WELL, ModelParams(d=1, m=0.0), list(np.geomspace(10.0, 100.0, 8)), 30.0, 1.0,
                             sol0.eigenvalue, ctx.n(40000, 4000), slab_width=0.25, seed=ctx.seed, workers=ctx.workers)
    r1 = fk.falloff_envelope(FALLOFF_WELL, ModelParams(d=1, m=1.0), list(np.linspace(1.0, 8.0, 8)), 20.0, 1.0,
                             sol1.eigenvalue, ctx.n(2000, 400), slab_width=0.25, seed=ctx.seed, workers=ctx.workers)
    ok0 = abs(r0.fit["exponent"] - 2.0) <= 0.3
    ok1 = r1.fit["r2"] > 0.98
    recs = [{"m": 0.0, "energy": sol0.eigenvalue, "fit": r0.fit, "envelope": [_est(e) for e in r0.estimates],
             "pass": ok0},
            {"m": 1.0, "energy": sol1.eigenvalue, "fit": r1.fit, "envelope": [_est(e) for e in r1.estimates],
             "pass": ok1}]
    return CriterionResult(7, ok0 and ok1, f"m=0 exponent {_fmt(r0.fit['exponent'])}, m=1 log-linear R2 "
                           f"{_fmt(r1.fit['r2'])}", recs)


def criterion_8(ctx: Context) -> CriterionResult:
    cfg = PathConfig(t=1.0, n_slabs=4, n_substeps=4, m=1.0, d=3)
    rep = pairing.ito_isometry_battery(cfg, ctx.n(1000), CutoffSpec(), seed=ctx.seed, workers=ctx.workers)
    ok = rep["pass_unprojected"] and rep["pass_projected"]
    e, p = rep["estimate_unprojected"], rep["estimate_projected"]
    rec = {"T_t": rep["T_t"], "unprojected": _est(e), "target_unprojected": rep["target_unprojected"],
           "projected": _est(p), "target_projected": rep["target_projected"], "pass": ok}
    return CriterionResult(8, ok, f"T_t={_fmt(rep['T_t'])}: {_fmt(e.mean)}+-{_fmt(e.stderr)} vs "
                           f"{_fmt(rep['target_unprojected'])}, projected {_fmt(p.mean)}+-{_fmt(p.stderr)} vs "
                           f"{_fmt(rep['target_projected'])}", [rec])


def pair_potential_3d_quadrature(cutoff: CutoffSpec, n_radial: int = 48, n_polar: int = 24, n_azimuth: int = 48):
    """``1/2 int |phi^|^2/|k| (delta - k k/|k|^2) d^3k`` on a spherical product grid."""
    lo, hi = cutoff.support
    kr, wr = np.polynomial.legendre.leggauss(n_radial)
    k = 0.5 * (hi - lo) * kr + 0.5 * (hi + lo)
    radial = float(np.sum(0.5 * (hi - lo) * wr * cutoff.phi_hat(k) ** 2 * k))
    cth, wth = np.polynomial.legendre.leggauss(n_polar)
    phi = 2.0 * np.pi * np.arange(n_azimuth) / n_azimuth
    sth = np.sqrt(1.0 - cth ** 2)
    n = np.stack([np.outer(sth, np.cos(phi)), np.outer(sth, np.sin(phi)), np.outer(cth, np.ones_like(phi))], -1)
    w = np.outer(wth, np.full(n_azimuth, 2.0 * np.pi / n_azimuth))
    proj = np.eye(3)[None, None] - n[..., :, None] * n[..., None, :]
    angular = np.einsum("ij,ijab->ab", w, proj)
    return 0.5 * radial * angular


def criterion_9(ctx: Context) -> CriterionResult:
    cutoff = CutoffSpec()
    W = pair_potential(0.0, np.zeros(3), cutoff)
    Wq = pair_potential_3d_quadrature(cutoff)
    ref = 1.0 / (12.0 * math.pi ** 2)
    trace_target = cutoff.norm_sq_over_omega() * (3 - 1) / 2.0
    ok_w = abs(W[0, 0] - Wq[0, 0]) < 1e-8 and abs(W[0, 0] - ref) < 1e-8
    ok_t = abs(np.trace(W) - trace_target) < 1e-8 and abs(np.trace(Wq) - trace_target) < 1e-8
    rec = {"W11": W[0, 0], "W11_quadrature": Wq[0, 0], "closed_form": ref, "trace": float(np.trace(W)),
           "trace_target": trace_target, "pass": ok_w and ok_t}
    return CriterionResult(9, ok_w and ok_t, f"W11(0,0)={W[0, 0]:.10e} (3-d quadrature {Wq[0, 0]:.10e}), "
                           f"trace {np.trace(W):.10e} vs {trace_target:.10e}", [rec])


def _projected_table(ctx, tau_max, r_max):
    return ctx.cached(("table", tau_max, r_max),
                      lambda: build_kernel_table(CutoffSpec(), tau_max, r_max, kind="projected", audit_points=200))


def criterion_10(ctx: Context) -> CriterionResult:
    cfg = PathConfig(t=1.0, n_slabs=8, n_substeps=2, m=1.0, d=3)
    table = _projected_table(ctx, 2.0, 16.0)
    norm2 = CutoffSpec().norm_sq_over_omega()

    def chunk(a, b):
        paths = sample_paths(cfg, np.zeros(3), rng.stream_batch(ctx.seed, a, b))
        w = pairing.self_pairing_batch(paths, table, on_exceed="direct")
        total = paths.subordinator[PLUS][:, -1] + paths.subordinator["minus"][:, -1]
        return np.stack([w, w - 0.5 * (3 - 1) * total * norm2], axis=1)

    vals = np.concatenate(map_chunks(chunk, ctx.n(10000), ctx.workers))
    w_min = float(vals[:, 0].min())
    resid = estimate_from_samples(vals[:, 1], ctx.seed)
    ok = w_min >= -1e-8 and resid.within(0.0)
    rec = {"n": int(vals.shape[0]), "min_w_self": w_min, "conditional_residual": _est(resid), "pass": ok}
    return CriterionResult(10, ok, f"min w_self {_fmt(w_min)}, mean(w - trace target) {_fmt(resid.mean)}"
                           f"+-{_fmt(resid.stderr)}", [rec])


def criterion_11(ctx: Context) -> CriterionResult:
    samples = ctx.coupled_samples(0.5)
    rep = gibbs.gaussian_moment_check(DISJOINT_XI, samples, n_order=4)
    exact = all(r["estimate"].stderr == 0.0 and r["estimate"].mean == r["target"] for r in rep["rows"])
    ok = rep["pass"] and rep["max_abs_cross"] < 1e-12 and rep["cross_variance"] == 0.0 and exact
    rec = {"q": rep["q"], "q_quadrature": rep["q_quadrature"], "max_abs_cross": rep["max_abs_cross"],
           "moments": rep["moments"], "closed_form": rep["closed_form"],
           "rows": [{"beta": r["beta"], **_est(r["estimate"]), "target": r["target"]} for r in rep["rows"]],
           "pass": ok}
    return CriterionResult(11, ok, f"max |w_cross| {_fmt(rep['max_abs_cross'])}, 5 beta points exact with zero "
                           f"variance: {exact}, q {_fmt(rep['q'])}", [rec])


def criterion_12(ctx: Context) -> CriterionResult:
    samples = ctx.coupled_samples(0.5)
    q = qe_j0_form(OVERLAP_XI)
    rep = gibbs.gaussian_domination(-0.5 / q, OVERLAP_XI, samples)
    e, qd = rep["estimate"], rep["quadrature"]
    rec = {"beta": rep["beta"], "q": q, "estimator": _est(e), "quadrature": _est(qd), "pass": rep["pass"]}
    return CriterionResult(12, rep["pass"], f"beta={_fmt(rep['beta'])}: estimator {_fmt(e.mean)}+-{_fmt(e.stderr)}, "
                           f"quadrature {_fmt(qd.mean)}", [rec])


def criterion_13(ctx: Context) -> CriterionResult:
    s5, s0 = ctx.coupled_samples(0.5), ctx.coupled_samples(0.0)
    per_sample = bool(np.all(s5.log_weight <= s0.log_weight))
    z5, z0 = s5.z_estimate(), s0.z_estimate()
    ok = per_sample and z5.mean <= z0.mean
    rec = {"per_sample": per_sample, "Z_alpha": _est(z5), "Z_zero": _est(z0), "pass": ok}
    return CriterionResult(13, ok, f"per-sample weights dominated: {per_sample}; Z(0.5)={_fmt(z5.mean)} <= "
                           f"Z(0)={_fmt(z0.mean)}", [rec])


def criterion_14(ctx: Context) -> CriterionResult:
    table = _projected_table(ctx, 8.0, 24.0)
    cfg = PathConfig(t=1.0, n_slabs=4, n_substeps=1, m=1.0, d=3)
    rep = pairing.moment_battery(cfg, ctx.n(4000, 400), table, seed=ctx.seed, workers=ctx.workers)
    try:
        pairing.moment_battery(cfg.replace(m=0.0, brownian_time_cap=1e12), 10, table, seed=ctx.seed)
        rejected = False
    except RejectedMZero:
        rejected = True
    ok = rep["pass"] and rejected
    rows = [{"t": r["t"], "fourth": _est(r["fourth"]), "envelope": r["envelope"], "ratio": r["ratio"],
             "pass_envelope": r["pass_envelope"], "pass_jensen": r["pass_jensen"]} for r in rep["rows"]]
    return CriterionResult(14, ok, "ratios to envelope " + ", ".join(_fmt(r["ratio"]) for r in rows)
                           + f"; m=0 rejected: {rejected}", [{"rows": rows, "C": rep["C"], "pass": ok}])


def criterion_15(ctx: Context) -> CriterionResult:
    """Replays the suite (quick scale) twice with one worker and once with three."""
    outs = []
    for workers in (1, 1, 3):
        res = run_suite(seed=ctx.seed, workers=workers, scale="quick", include_determinism=False)
        outs.append(serialize(res))
    same_run = outs[0] == outs[1]
    same_workers = outs[0] == outs[2]
    ok = same_run and same_workers
    rec = {"bytes": len(outs[0]), "identical_across_runs": same_run, "identical_across_workers": same_workers,
           "pass": ok}
    return CriterionResult(15, ok, f"{len(outs[0])} bytes; identical across runs: {same_run}, across worker "
                           f"counts: {same_workers}", [rec])


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 16)}


def run_suite(seed: int = 1, workers: int = 1, scale: str = "full", include_determinism: bool = True,
              only=None, progress=None):
    ctx = Context(seed, workers, scale)
    results = []
    for i, fn in CRITERIA.items():
        if only is not None and i not in only:
            continue
        if i == 15 and not include_determinism:
            continue
        try:
            res = fn(ctx)
        except SrpfmcError as exc:
            res = CriterionResult(i, False, f"raised {exc.code}: {exc}", [{"error": exc.code, "message": str(exc)}])
        results.append(res)
        if progress is not None:
            progress(res)
    return results


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    return obj


def result_record(res: CriterionResult, seed: int) -> dict:
    return {"op": f"criterion-{res.number}", "title": res.title, "pass": bool(res.passed), "seed": seed,
            "summary": res.summary, "records": _plain(res.records)}


def serialize(results, seed: int = 1) -> str:
    return "".join(json.dumps(result_record(r, seed), sort_keys=True) + "\n" for r in results)
