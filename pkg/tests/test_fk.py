import math

import numpy as np
import pytest
from scipy import integrate

from srpfmc import rng
from srpfmc.fk import (FKQuery, path_config, GaussianWindow, falloff_envelope, fit_tail, ground_energy_estimate,
                       martingale_deviation, semigroup_apply, semigroup_element)
from srpfmc.kernel import gaussian_overlap, kernel_density
from srpfmc.params import ModelParams
from srpfmc.potentials import PotentialSpec, cumulative, evaluate
from srpfmc.spectral import solve
from srpfmc.stochastic import PLUS, sample_paths

P1 = ModelParams(d=1, m=1.0)
HARMONIC = PotentialSpec("harmonic", omega0=0.5)


def test_window_box_and_log():
    w = GaussianWindow((1.0, -1.0), 0.5, 2.0)
    x = np.array([[1.3, -0.2]])
    assert np.log(w(x))[0] == pytest.approx(w.log(x)[0])
    lo, hi = w.box()
    np.testing.assert_allclose(hi - lo, 6.0)


def test_constant_potential_factorizes(seed):
    c = 0.3
    flat = PotentialSpec("square_well", depth=-c, width=1e9)  # V = c everywhere
    f = GaussianWindow((0.0,), 1.0)
    est = semigroup_apply(flat, 1.5, f, [0.0], P1, 20000, seed=seed, slab_width=0.5)
    free, _ = integrate.quad(lambda y: 2 * kernel_density(y, 1.5, 1.0, 1) * math.exp(-y * y / 2), 0, np.inf)
    assert est.within(math.exp(-c * 1.5) * free, k=4)


def test_free_matrix_element_is_kernel_overlap(seed):
    w = GaussianWindow((0.0,), 1.0)
    est = semigroup_element(FKQuery(w, w, PotentialSpec(), 1.0, P1, 40000, seed=seed, slab_width=0.5))
    assert est.within(gaussian_overlap([0.0], 1.0, [0.0], 1.0, 1.0, 1.0, 1), k=4)


def test_potential_lowers_matrix_element(seed):
    w = GaussianWindow((0.0,), 1.0)
    q = FKQuery(w, w, HARMONIC, 1.0, P1, 5000, seed=seed)
    assert semigroup_element(q).mean < semigroup_element(FKQuery(w, w, PotentialSpec(), 1.0, P1, 5000, seed=seed)).mean


def test_ground_energy_harmonic(seed):
    res = ground_energy_estimate(HARMONIC, P1, [3.0], 20000, window=GaussianWindow((0.0,), 1.0), seed=seed)
    e = res["estimates"][0]
    assert e.within(0.4410522897567345, k=4, rel=0.03)


def test_martingale_is_flat(seed):
    sol = solve(20.0, 512, 1.0, HARMONIC)
    res = martingale_deviation(sol, HARMONIC, 0.0, [0.5, 1.0, 2.0], 4000, seed=seed)
    assert res["max_deviation_sigma"] < 4.0
    assert res["estimates"][0].within(res["target"], k=4)
    assert res["exclusion_rate"] == 0.0


def test_conditional_falloff_agrees_with_direct(seed):
    well = PotentialSpec("square_well", depth=1.0, width=1.0)
    kw = dict(spec=well, params=P1, x_grid=[2.0, 4.0], t=8.0, R=0.5, energy=-0.2, n=6000, seed=seed)
    a = falloff_envelope(conditional=True, **kw).estimates
    b = falloff_envelope(conditional=False, **kw).estimates
    for ea, eb in zip(a, b):
        assert abs(ea.mean - eb.mean) < 4 * math.hypot(ea.stderr, eb.stderr)


def test_conditional_falloff_is_unbiased_without_weights(seed):
    # V = E = 0: every stopped path carries weight 1
    rep = falloff_envelope(PotentialSpec(), P1, [1.0, 3.0, 6.0], 8.0, 0.5, 0.0, 4000, seed=seed)
    for e in rep.estimates:
        assert e.within(1.0, k=4)


def test_fit_tail_recovers_exponents():
    r = np.linspace(1, 10, 10)
    assert fit_tail(r, 3 * np.exp(-0.7 * r), "exponential")["exponent"] == pytest.approx(0.7)
    r = np.geomspace(10, 100, 8)
    fit = fit_tail(r, 5 * r ** -2.0, "power")
    assert fit["exponent"] == pytest.approx(2.0) and fit["r2"] == pytest.approx(1.0)


def test_halving_step_consistent(seed):
    w = GaussianWindow((0.0,), 1.0)
    a = semigroup_element(FKQuery(w, w, HARMONIC, 1.0, P1, 20000, seed=seed, slab_width=1 / 16))
    b = semigroup_element(FKQuery(w, w, HARMONIC, 1.0, P1, 20000, seed=seed + 1, slab_width=1 / 32))
    assert abs(a.mean - b.mean) < 3 * math.hypot(a.stderr, b.stderr)


def test_sample_weights_nonnegative(seed):
    w = GaussianWindow((0.0,), 1.0)
    f = lambda x: np.abs(np.sin(x[..., 0])) if x.ndim > 1 else np.abs(np.sin(x))
    est = semigroup_apply(PotentialSpec("soft_coulomb", g=2.0), 1.0, f, [0.3], P1, 1000, seed=seed)
    assert est.mean >= 0
    cfg = path_config(1.0, P1, 1 / 32)
    z = sample_paths(cfg, np.array([0.3]), rng.stream_batch(seed, 0, 500), branch=PLUS).boundary_positions(PLUS)
    weights = w(z[:, -1]) * np.exp(-cumulative(evaluate(HARMONIC, z, 1), cfg.slab_width)[:, -1])
    assert np.all(weights >= 0)
