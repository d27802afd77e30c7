"""Command-line front end: ``srpfmc <subcommand> [--config PATH] ...``.

Every subcommand emits records with the fields ``op, params_digest,
estimate, stderr, n, ess, seed, runtime_ms`` plus subcommand-specific
columns, as JSON lines (default) or CSV.  Exit status: 0 success, 1
configuration or request error, 2 failed check or numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import acceptance, fk, gibbs, pairing, rng, spectral
from .config import SEED_ENV, RunConfig, build_config, defaults_text, parse_text
from .errors import (BetaOutOfRange, ConfigError, NonDyadicSplit, OutOfDomain, RejectedMZero, SrpfmcError,
                     SupportOverlap)
from .estimate import Estimate, estimate_from_samples, map_chunks
from .field import RadialProfile, TestFunctionSpec, build_kernel_table, pair_components, qe_j0_form, scalar_kernel
from .kernel import characteristic_function, gaussian_overlap, kernel_density
from .potentials import relativistic_kato_diagnostic
from .stochastic import PLUS, laplace_transform, subordinator_increments

REQUEST_ERRORS = (ConfigError, RejectedMZero, BetaOutOfRange, NonDyadicSplit, SupportOverlap, OutOfDomain)
BASE_FIELDS = ("op", "params_digest", "estimate", "stderr", "n", "ess", "seed", "runtime_ms")


@dataclass
class Outcome:
    records: list
    identity: str
    passed: bool = True
    plot: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)


class Recorder:
    def __init__(self, op: str, cfg: RunConfig):
        self.op, self.cfg = op, cfg
        self.records = []

    def add(self, estimate=None, stderr=None, n=None, ess=None, **extra):
        rec = {"op": self.op, "params_digest": self.cfg.digest(), "estimate": estimate, "stderr": stderr, "n": n,
               "ess": ess, "seed": self.cfg.seed, "runtime_ms": None}
        rec.update(extra)
        self.records.append(rec)
        return rec

    def add_est(self, est, **extra):
        ess = est.extra.get("ess") if est.extra else None
        return self.add(est.mean, est.stderr, est.n, ess, **extra)


def _run(cfg, key, default):
    val = cfg.run.get(key)
    return default if val is None else val


def _window(cfg):
    return fk.GaussianWindow((0.0,) * cfg.model.d, _run(cfg, "window_scale", 1.0))


def _gibbs_config(cfg, params=None):
    return gibbs.GibbsConfig(params=params or cfg.model, path=cfg.paths, n_samples=cfg.n_samples, seed=cfg.seed,
                             workers=cfg.workers)


def _xi(cfg):
    lo, hi = _run(cfg, "xi_shell", [0.2, 0.8])
    return TestFunctionSpec.single(RadialProfile("sharp_shell", r_in=lo, r_out=hi), _run(cfg, "xi_component", 0))


def _point(cfg, v):
    """Scalar grid value -> point on the first axis in d dimensions."""
    p = np.zeros(cfg.model.d)
    p[0] = v
    return p


def _require_d1(cfg, what):
    if cfg.model.d != 1:
        raise ConfigError([("model.d", f"{what} uses the one-dimensional spectral oracle; set model.d = 1")])


# -- subcommands --------------------------------------------------------------------


def cmd_sample_subordinator(cfg):
    rec = Recorder("sample-subordinator", cfg)
    m = cfg.model.m
    for t in _run(cfg, "t_grid", [cfg.paths.t]):
        def chunk(a, b, t=t):
            return subordinator_increments(t, m, rng.stream_batch(cfg.seed, a, b), 1, rng.SUB_PLUS)[:, 0]

        T = np.concatenate(map_chunks(chunk, cfg.n_samples, cfg.workers, chunk=8192))
        est = estimate_from_samples(T, cfg.seed)
        q10, q50, q90 = np.quantile(T, [0.1, 0.5, 0.9])
        rec.add_est(est, t=t, m=m, target=(t / m if m > 0 else None), q10=float(q10), q50=float(q50), q90=float(q90))
    return Outcome(rec.records, "mean of T_t; target t/m when m > 0",
                   plot=dict(x="t", y="estimate", err="stderr", target="target", ylabel="E[T_t]"))


def cmd_verify_laplace(cfg):
    rec = Recorder("verify-laplace", cfg)
    m, ok = cfg.model.m, True
    for t in _run(cfg, "t_grid", [0.5, 1.0, 2.0]):
        def chunk(a, b, t=t):
            return subordinator_increments(t, m, rng.stream_batch(cfg.seed, a, b), 1, rng.SUB_PLUS)[:, 0]

        T = np.concatenate(map_chunks(chunk, cfg.n_samples, cfg.workers, chunk=8192))
        for u in _run(cfg, "u_grid", [0.0, 0.5, 1.0, 2.0]):
            est = estimate_from_samples(np.exp(-u * T), cfg.seed)
            target = laplace_transform(t, u, m)
            good = est.within(target)
            ok &= good
            rec.add_est(est, t=t, u=u, m=m, target=target, passed=good)
    return Outcome(rec.records, "E[exp(-u T_t)] = exp(-t (sqrt(2u + m^2) - m))", ok,
                   plot=dict(x="u", y="estimate", err="stderr", target="target", group="t"))


def cmd_kernel(cfg):
    rec = Recorder("kernel", cfg)
    t, m, d = cfg.paths.t, cfg.model.m, cfg.model.d
    for x in _run(cfg, "x_grid", list(np.linspace(-5.0, 5.0, 21))):
        dens = kernel_density(_point(cfg, x) if d > 1 else x, t, m, d)
        cf = characteristic_function(_point(cfg, x) if d > 1 else x, t, m)
        rec.add(float(dens), x=x, t=t, m=m, d=d, characteristic_function=float(cf))
    return Outcome(rec.records, "density k_{t,m}(x) of z_t and E[exp(-i x.z_t)] at the same arguments",
                   plot=dict(x="x", y="estimate", ylabel="k_{t,m}(x)", logy=True))


def cmd_fk_element(cfg):
    rec = Recorder("fk-element", cfg)
    w = _window(cfg)
    q = fk.FKQuery(w, w, cfg.model.potential, cfg.paths.t, cfg.model, cfg.n_samples,
                   slab_width=cfg.paths.slab_width, seed=cfg.seed, workers=cfg.workers)
    est = fk.semigroup_element(q)
    target, ok = None, True
    if cfg.model.potential.kind == "zero":
        target = gaussian_overlap(w.center, w.scale, w.center, w.scale, cfg.paths.t, cfg.model.m, cfg.model.d)
        ok = est.within(target, rel=0.02)
    rec.add_est(est, t=cfg.paths.t, target=target, passed=ok if target is not None else None,
                n_excluded=est.n_excluded, bias_bound=est.bias_bound)
    return Outcome(rec.records, "(f, exp(-t H_p) g) by Feynman-Kac; target: kernel convolution when V = 0", ok)


def _oracle_solution(cfg):
    L = _run(cfg, "L", 20.0)
    n = _run(cfg, "n_grid", 1024)
    return spectral.build_and_solve(L, n, cfg.model.m, cfg.model.potential, _run(cfg, "k_eigs", 1))


def cmd_ground_energy(cfg):
    rec = Recorder("ground-energy", cfg)
    res = fk.ground_energy_estimate(cfg.model.potential, cfg.model, _run(cfg, "t_grid", [2.0, 4.0, 8.0]),
                                    cfg.n_samples, window=_window(cfg), dt=_run(cfg, "dt", 1.0),
                                    slab_width=cfg.paths.slab_width, seed=cfg.seed, workers=cfg.workers)
    oracle = _oracle_solution(cfg).eigenvalue if cfg.model.d == 1 else None
    ok = True
    for e in res["estimates"]:
        good = e.within(oracle, rel=0.02) if oracle is not None else None
        ok &= good is not False
        rec.add_est(e, t=e.extra["t"], oracle=oracle, passed=good, slope=res["slope"])
    return Outcome(rec.records, "-(1/dt) log(Z_{t+dt}/Z_t) -> inf spec(H_p); oracle: pseudospectral eigenvalue", ok,
                   plot=dict(x="t", y="estimate", err="stderr", target="oracle"))


def cmd_martingale(cfg):
    _require_d1(cfg, "martingale")
    rec = Recorder("martingale", cfg)
    sol = _oracle_solution(cfg)
    x = _run(cfg, "x", [0.0])[0]
    res = fk.martingale_deviation(sol, cfg.model.potential, x, _run(cfg, "t_grid", [0.5, 1.0, 2.0, 4.0]),
                                  cfg.n_samples, params=cfg.model, slab_width=cfg.paths.slab_width, seed=cfg.seed,
                                  workers=cfg.workers)
    ok = res["max_deviation_sigma"] < 3.0
    for t, e in zip(res["t_grid"], res["estimates"]):
        rec.add_est(e, t=t, x=x, target=res["target"], energy=sol.eigenvalue,
                    max_deviation_sigma=res["max_deviation_sigma"], passed=ok)
    return Outcome(rec.records, "E[exp(tE) exp(-int_0^t V(z_s + x) ds) phi_b(z_t + x)] = phi_b(x) for every t", ok,
                   plot=dict(x="t", y="estimate", err="stderr", target="target"))


def cmd_falloff(cfg):
    rec = Recorder("falloff", cfg)
    m = cfg.model.m
    energy = cfg.run.get("energy")
    if energy is None:
        _require_d1(cfg, "falloff without run.energy")
        energy = _oracle_solution(cfg).eigenvalue
    default_x = list(np.geomspace(10.0, 100.0, 8)) if m == 0 else list(np.linspace(1.0, 8.0, 8))
    xs = _run(cfg, "x_grid", default_x)
    res = fk.falloff_envelope(cfg.model.potential, cfg.model, [_point(cfg, x) for x in xs], cfg.paths.t,
                              _run(cfg, "R", 1.0), energy, cfg.n_samples, slab_width=cfg.paths.slab_width,
                              seed=cfg.seed, workers=cfg.workers)
    for x, e in zip(xs, res.estimates):
        rec.add_est(e, x=x, energy=energy, fit_kind=res.fit["kind"], fit_slope=res.fit["slope"], fit_r2=res.fit["r2"])
    return Outcome(rec.records, "E^x[exp(-int_0^{t ^ tau_R} (V - E) ds)] with tau_R the entry time into |z| < R",
                   plot=dict(x="x", y="estimate", err="stderr", logy=True, logx=(m == 0)))


def cmd_kato_check(cfg):
    rec = Recorder("kato-check", cfg)
    xs = _run(cfg, "x_grid", [0.0, 1.0, 2.0])
    rep = relativistic_kato_diagnostic(cfg.model.potential, cfg.paths.t, [_point(cfg, x) for x in xs],
                                       cfg.n_samples, cfg.model, seed=cfg.seed, n_slabs=cfg.paths.n_slabs
                                       + cfg.paths.n_slabs % 2, workers=cfg.workers,
                                       brownian_time_cap=cfg.paths.brownian_time_cap)
    for x, e, h in zip(xs, rep.estimates, rep.half_t_estimates):
        rec.add_est(e, x=x, t=cfg.paths.t, half_time_estimate=h.mean, superlinear_flag=rep.superlinear_flag,
                    floor_activation_rate=rep.floor_activation_rate)
    return Outcome(rec.records, "E^x[exp(int_0^t V_-(z_s) ds)] on a grid (relativistic Kato-class diagnostic)",
                   plot=dict(x="x", y="estimate", err="stderr"))


def cmd_pair_potential(cfg):
    rec = Recorder("pair-potential", cfg)
    tau = _run(cfg, "tau", 0.0)
    cutoff = cfg.model.cutoff
    norm2 = cutoff.norm_sq_over_omega()
    for r in _run(cfg, "r", list(np.linspace(0.0, 10.0, 11))):
        a, b = pair_components(tau, r, cutoff)
        a, b = float(a), float(b)
        s = float(scalar_kernel(tau, r, cutoff))
        rec.add(a + b if r > 0 else a, tau=tau, r=r, a=a, b=b, W11_along_X=(a + b if r > 0 else a),
                W22_along_X=a, trace=3 * a + (b if r > 0 else 0.0), unprojected=s,
                trace_target_at_origin=norm2 if (r == 0 and tau == 0) else None)
    return Outcome(rec.records, "W(tau, X) = a(tau,|X|) delta + b(tau,|X|) X^X^; trace at the origin "
                   "= ||phi^/sqrt(omega)||^2 (d-1)/2", plot=dict(x="r", y="a", xlabel="|X|"))


def cmd_build_table(cfg):
    rec = Recorder("build-table", cfg)
    tau_max = _run(cfg, "tau_max", 2.0 * cfg.paths.t)
    r_max = _run(cfg, "r_max", 16.0)
    t0 = time.perf_counter()
    table = build_kernel_table(cfg.model.cutoff, tau_max, r_max)
    path = _run(cfg, "table_path", "kernel_table.bin")
    table.save(path)
    rec.add(table.certified_error, tau_max=tau_max, r_max=r_max, n_tau=int(table.tau_grid.size),
            n_r=int(table.r_grid.size), path=str(path), build_seconds=None if not _TIMING else time.perf_counter() - t0)
    return Outcome(rec.records, "tabulated W components; estimate = certified max relative interpolation error")


def _load_table(cfg, tau_max, r_max):
    path = cfg.run.get("table_path")
    if path:
        from .field import KernelTable
        return KernelTable.load(path)
    return build_kernel_table(cfg.model.cutoff, tau_max, r_max, audit_points=200)


def cmd_ito_battery(cfg):
    rec = Recorder("ito-battery", cfg)
    if cfg.run.get("moments") and cfg.model.m == 0:
        raise RejectedMZero("the fourth-moment check needs m > 0")
    # long paths: tabulated kernels with direct quadrature past the table range
    tau_max, r_max = cfg.paths.t, _run(cfg, "r_max", 16.0)
    table = build_kernel_table(cfg.model.cutoff, tau_max, r_max, audit_points=200)
    scalar = build_kernel_table(cfg.model.cutoff, tau_max, r_max, kind="scalar", audit_points=200)
    rep = pairing.ito_isometry_battery(cfg.paths, cfg.n_samples, cfg.model.cutoff, seed=cfg.seed, table=table,
                                       scalar_table=scalar, workers=cfg.workers)
    ok = rep["pass_unprojected"] and rep["pass_projected"]
    rec.add_est(rep["estimate_unprojected"], kind="unprojected", T_t=rep["T_t"], target=rep["target_unprojected"],
                passed=rep["pass_unprojected"])
    rec.add_est(rep["estimate_projected"], kind="projected", T_t=rep["T_t"], target=rep["target_projected"],
                passed=rep["pass_projected"])
    out = Outcome(rec.records, "E||I||^2 = d T_t ||phi^/sqrt(omega)||^2 (unprojected); (d-1)/2 T_t "
                  "||phi^/sqrt(omega)||^2 (projected), subordinator frozen", ok)
    if cfg.run.get("moments"):
        more = cmd_moment_battery(cfg)
        out.records += more.records
        out.passed &= more.passed
    return out


def cmd_moment_battery(cfg):
    rec = Recorder("moment-battery", cfg)
    if cfg.model.m == 0:
        raise RejectedMZero("the fourth-moment bound needs m > 0")
    t_grid = _run(cfg, "t_grid", [1.0, 2.0, 4.0, 8.0])
    table = _load_table(cfg, max(t_grid), 24.0)
    rep = pairing.moment_battery(cfg.paths, cfg.n_samples, table, seed=cfg.seed, t_grid=t_grid, workers=cfg.workers)
    for r in rep["rows"]:
        rec.add_est(r["fourth"], t=r["t"], second_moment=r["second"].mean, envelope=r["envelope"], ratio=r["ratio"],
                    passed=r["pass_envelope"] and r["pass_jensen"])
    return Outcome(rec.records, "E[q_E(I[0,t])^2] against C E[T_t^2] ||phi^/sqrt(omega)||^4 fitted at the first t",
                   rep["pass"], plot=dict(x="t", y="estimate", err="stderr", target="envelope"))


def cmd_additivity_battery(cfg):
    rec = Recorder("additivity-battery", cfg)
    t = cfg.paths.t
    s, u = _run(cfg, "split", [t / 4.0, t / 2.0])
    table = build_kernel_table(cfg.model.cutoff, t, 16.0, kind="scalar", audit_points=200)
    rep = pairing.additivity_battery(cfg.paths, cfg.n_samples, cfg.model.cutoff, s, u, seed=cfg.seed,
                                     scalar_table=table, workers=cfg.workers)
    rec.add(rep["max_abs_residual"], 0.0, cfg.n_samples, None, kind="residual", target=0.0,
            passed=rep["max_abs_residual"] == 0.0)
    rec.add_est(rep["disjoint"], kind="disjoint_covariance", target=0.0, passed=rep["disjoint"].within(0.0))
    rec.add_est(rep["overlap"], kind="overlap_covariance", target=rep["overlap_target"],
                passed=rep["overlap"].within(rep["overlap_target"]))
    return Outcome(rec.records, "I[0,t] - I[0,s] - I[s,t] = 0; E(I[0,s], I[s,t]) = 0; E(I[0,t], I[s,u]) = "
                   "d (T_t - T_s) ||phi^/sqrt(omega)||^2", rep["pass"])


def cmd_green_function(cfg):
    rec = Recorder("green-function", cfg)
    w = _window(cfg)
    t0, tn = _run(cfg, "times", [0.0, cfg.paths.t])
    event = [(e[0], np.full(cfg.model.d, e[1]), np.full(cfg.model.d, e[2])) for e in _run(cfg, "event", [])]
    gc = _gibbs_config(cfg)
    est = gibbs.vacuum_green_function(w, w, gc, t0, tn, event)
    target = None
    if cfg.model.alpha == 0 and cfg.model.potential.kind == "zero" and not event:
        target = gaussian_overlap(w.center, w.scale, w.center, w.scale, tn - t0, cfg.model.m, cfg.model.d)
    ok = est.within(target, rel=0.02) if target is not None else True
    rec.add_est(est, t0=t0, tn=tn, target=target, passed=ok if target is not None else None)
    return Outcome(rec.records, "int dx E[f(X_t0) prod 1_A(X_tj) g(X_tn) exp(-(alpha^2/2) q_E) exp(-int V)]", ok)


def cmd_field_char(cfg):
    rec = Recorder("field-char", cfg)
    xi = _xi(cfg)
    samples = gibbs.draw_weighted_samples(_gibbs_config(cfg))
    q = qe_j0_form(xi)
    for beta in _run(cfg, "betas", [-2.0, -1.0, 0.0, 1.0, 2.0]):
        est = gibbs.field_characteristic(beta, xi, samples)
        rec.add_est(est, beta=beta, q=q, gaussian=gibbs.gaussian_characteristic(beta, q))
    return Outcome(rec.records, "E_mu[exp(-(2 alpha beta w_cross + beta^2 q_E(j0 xi))/2)] against exp(-beta^2 q/2)",
                   plot=dict(x="beta", y="estimate", err="stderr", target="gaussian"))


def cmd_gaussian_domination(cfg):
    rec = Recorder("gaussian-domination", cfg)
    xi = _xi(cfg)
    q = qe_j0_form(xi)
    beta = _run(cfg, "beta", -0.5 / q)
    samples = gibbs.draw_weighted_samples(_gibbs_config(cfg))
    rep = gibbs.gaussian_domination(beta, xi, samples)
    quad = rep.get("quadrature")
    rec.add_est(rep["estimate"], beta=beta, q=q, quadrature=None if quad is None else quad.mean,
                passed=rep.get("pass"))
    return Outcome(rec.records, "(1 - 2 beta q)^{-1/2} E_mu[exp(-beta alpha^2 w_cross^2 / (1 - 2 beta q))] against "
                   "the Gaussian average of the characteristic curve", rep.get("pass", True))


def cmd_fiber(cfg):
    rec = Recorder("fiber", cfg)
    p = _run(cfg, "p", [0.5] + [0.0] * (cfg.model.d - 1))
    est = gibbs.fiber_vacuum_element(p, cfg.paths.t, _gibbs_config(cfg))
    target = characteristic_function(np.asarray(p, float), cfg.paths.t, cfg.model.m) if cfg.model.alpha == 0 else None
    ok = est.within(target) if target is not None else True
    rec.add_est(est, p=list(p), t=cfg.paths.t, target=target, passed=ok if target is not None else None)
    return Outcome(rec.records, "Re E[exp(-i p.B_{T_t}) exp(-(alpha^2/2) q_E(I[0,t]))]; alpha = 0 target "
                   "exp(-t (sqrt(|p|^2 + m^2) - m))", ok)


def cmd_fdd_probe(cfg):
    rec = Recorder("fdd-probe", cfg)
    d = cfg.model.d
    event = [(e[0], np.full(d, e[1]), np.full(d, e[2])) for e in _run(cfg, "event", [[0.0, -0.5, 0.5]])]
    res = gibbs.fdd_stabilization_probe(event, _run(cfg, "t_grid", [1.0, 2.0, 4.0]), _gibbs_config(cfg))
    for t, e in zip(res["t_grid"], res["estimates"]):
        rec.add_est(e, t=t, stabilization_sigma=res["stabilization_sigma"])
    return Outcome(rec.records, "mu_t(A) for a box event A over increasing t",
                   plot=dict(x="t", y="estimate", err="stderr"))


def cmd_full_suite(cfg):
    scale = _run(cfg, "scale", "full")

    def progress(res):
        print(res.line(), file=sys.stderr, flush=True)

    results = acceptance.run_suite(seed=cfg.seed, workers=cfg.workers, scale=scale, progress=progress)
    recs = []
    for r in results:
        rec = acceptance.result_record(r, cfg.seed)
        recs.append({"op": rec["op"], "params_digest": cfg.digest(), "estimate": None, "stderr": None, "n": None,
                     "ess": None, "seed": cfg.seed, "runtime_ms": None, "title": rec["title"], "passed": rec["pass"],
                     "summary": rec["summary"], "details": rec["records"]})
    return Outcome(recs, "acceptance criteria 1-15 with pinned configurations", all(r.passed for r in results))


COMMANDS = {
    "sample-subordinator": cmd_sample_subordinator,
    "verify-laplace": cmd_verify_laplace,
    "kernel": cmd_kernel,
    "fk-element": cmd_fk_element,
    "ground-energy": cmd_ground_energy,
    "martingale": cmd_martingale,
    "falloff": cmd_falloff,
    "kato-check": cmd_kato_check,
    "pair-potential": cmd_pair_potential,
    "build-table": cmd_build_table,
    "ito-battery": cmd_ito_battery,
    "moment-battery": cmd_moment_battery,
    "additivity-battery": cmd_additivity_battery,
    "green-function": cmd_green_function,
    "field-char": cmd_field_char,
    "gaussian-domination": cmd_gaussian_domination,
    "fiber": cmd_fiber,
    "fdd-probe": cmd_fdd_probe,
    "full-suite": cmd_full_suite,
}

_TIMING = False


# -- output ---------------------------------------------------------------------------


def _jsonable(v):
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def _clean(obj):
    if isinstance(obj, Estimate):
        return obj.as_dict()
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return _jsonable(obj)


def render(outcome: Outcome, fmt: str) -> str:
    records = [_clean(r) for r in outcome.records]
    if fmt == "json":
        return "".join(json.dumps(r, sort_keys=False) + "\n" for r in records)
    buf = io.StringIO()
    buf.write(f"# identity: {outcome.identity}\n")
    cols = list(BASE_FIELDS)
    for r in records:
        cols += [k for k in r if k not in cols]
    writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    writer.writeheader()
    for r in records:
        writer.writerow({k: (json.dumps(v) if isinstance(v, (list, dict)) else ("" if v is None else v))
                         for k, v in r.items()})
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="srpfmc", description="Feynman-Kac Monte Carlo for semi-relativistic "
                                 "Schrodinger and Pauli-Fierz semigroups, with verification batteries.")
    ap.add_argument("command", nargs="?", choices=sorted(COMMANDS), help="subcommand to run")
    ap.add_argument("--config", help="config file (flat 'section.key = value' lines)")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    ap.add_argument("--seed", type=int, help="master seed (overrides the config and $" + SEED_ENV + ")")
    ap.add_argument("--workers", type=int, help="worker threads (results do not depend on it)")
    ap.add_argument("--out", help="output file (default: stdout)")
    ap.add_argument("--format", choices=("json", "csv"), help="record format")
    ap.add_argument("--plot-dir", help="also render the curve to a PNG in this directory")
    ap.add_argument("--timing", action="store_true", help="fill runtime_ms (output is then not byte-stable)")
    ap.add_argument("--print-defaults", action="store_true", help="print the config schema with defaults and exit")
    return ap


def load_run_config(args, env=None) -> RunConfig:
    raw = parse_text(Path(args.config).read_text(encoding="utf-8")) if args.config else {}
    overrides = parse_text("\n".join(args.set)) if args.set else {}
    raw.update(overrides)
    if args.seed is not None:
        raw["sampling.master_seed"] = args.seed
    if args.workers is not None:
        raw["sampling.workers"] = args.workers
    if args.format is not None:
        raw["output.format"] = args.format
    if args.out is not None:
        raw["output.path"] = args.out
    if args.plot_dir is not None:
        raw["output.plot_dir"] = args.plot_dir
    return build_config(raw, env)


def _error(exc, stream):
    rec = {"error": getattr(exc, "code", "error"), "message": str(exc)}
    if isinstance(exc, ConfigError):
        rec["violations"] = [{"key": k, "reason": why} for k, why in exc.violations]
    print(json.dumps(rec), file=stream)


def main(argv=None, env=None, stdout=None, stderr=None) -> int:
    global _TIMING
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    if args.print_defaults:
        stdout.write(defaults_text())
        return 0
    if args.command is None:
        print("srpfmc: a subcommand is required (see --help)", file=stderr)
        return 1
    _TIMING = args.timing
    try:
        cfg = load_run_config(args, os.environ if env is None else env)
        t0 = time.perf_counter()
        outcome = COMMANDS[args.command](cfg)
        if args.timing:
            ms = (time.perf_counter() - t0) * 1e3
            for r in outcome.records:
                r["runtime_ms"] = ms
    except REQUEST_ERRORS as exc:
        _error(exc, stderr)
        return 1
    except OSError as exc:
        _error(ConfigError([("io", str(exc))]), stderr)
        return 1
    except SrpfmcError as exc:
        _error(exc, stderr)
        return 2
    text = render(outcome, cfg.output["format"])
    if cfg.output["path"]:
        Path(cfg.output["path"]).write_text(text, encoding="utf-8")
    else:
        stdout.write(text)
    if cfg.output["plot_dir"] and outcome.plot:
        from . import plotting

        spec = dict(outcome.plot)
        spec.setdefault("title", args.command)
        plotting.curve([_clean(r) for r in outcome.records], path=Path(cfg.output["plot_dir"]) / f"{args.command}.png",
                       **spec)
    return 0 if outcome.passed else 2


if __name__ == "__main__":
    sys.exit(main())
