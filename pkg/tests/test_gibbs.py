import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from srpfmc.errors import BetaOutOfRange, ConfigError, DegenerateEstimate, SupportOverlap
from srpfmc.field import RadialProfile, TestFunctionSpec, qe_j0_form, qm_form
from srpfmc.fk import GaussianWindow
from srpfmc.gibbs import (GibbsConfig, positive_definiteness_check, _double_factorial, draw_weighted_samples, effective_sample_size,
                          fiber_vacuum_element, field_characteristic, gaussian_characteristic, gaussian_domination,
                          gaussian_moment_check, ground_energy_full, spherical_quadrature_q, self_normalized,
                          vacuum_green_function)
from srpfmc.kernel import characteristic_function, gaussian_overlap
from srpfmc.params import ModelParams
from srpfmc.potentials import PotentialSpec

OVERLAP_XI = TestFunctionSpec.single(RadialProfile("sharp_shell", r_in=0.2, r_out=0.8))
DISJOINT_XI = TestFunctionSpec.single(RadialProfile("sharp_shell", r_in=1.5, r_out=2.5), 1)


@pytest.fixture(scope="module")
def coupled():
    cfg = GibbsConfig(params=ModelParams(d=3, m=1.0, alpha=0.5), n_samples=4000, seed=11)
    return draw_weighted_samples(cfg)


@pytest.fixture(scope="module")
def uncoupled():
    cfg = GibbsConfig(params=ModelParams(d=3, m=1.0, alpha=0.0), n_samples=4000, seed=11)
    return draw_weighted_samples(cfg)


@given(st.lists(st.floats(1e-3, 10), min_size=1, max_size=50))
def test_ess_bounds(w):
    ess = effective_sample_size(w)
    assert 1 - 1e-9 <= ess <= len(w) + 1e-9


def test_ess_extremes():
    assert effective_sample_size(np.ones(40)) == pytest.approx(40)
    assert effective_sample_size(np.r_[1.0, np.zeros(9)]) == 1.0


def test_self_normalized_constant_is_exact():
    w = np.random.default_rng(1).uniform(0.5, 1.5, 200)
    est = self_normalized(w, np.full(200, 0.7))
    assert est.mean == 0.7 and est.stderr == 0.0


def test_self_normalized_matches_weighted_mean():
    g = np.random.default_rng(2)
    w, f = g.uniform(0.1, 1, 500), g.normal(size=500)
    est = self_normalized(w, f)
    assert est.mean == pytest.approx(np.sum(w * f) / np.sum(w), rel=1e-12)
    with pytest.raises(DegenerateEstimate):
        self_normalized(np.r_[1.0, np.full(99, 1e-6)], f[:100])


def test_config_validation():
    with pytest.raises(ConfigError):
        GibbsConfig(params=ModelParams(d=1, alpha=0.3))
    with pytest.raises(ConfigError):
        GibbsConfig(params=ModelParams(d=3), window=GaussianWindow((0.0,)))


def test_diamagnetic_weights(coupled, uncoupled):
    assert np.all(coupled.w_self >= 0)
    assert np.all(coupled.log_weight <= uncoupled.log_weight + 1e-12)
    assert coupled.z_estimate().mean <= uncoupled.z_estimate().mean


def test_uncoupled_characteristic_is_gaussian(uncoupled):
    q = qe_j0_form(OVERLAP_XI)
    for beta in (-1.0, 0.5, 2.0):
        est = field_characteristic(beta, OVERLAP_XI, uncoupled)
        assert est.mean == pytest.approx(gaussian_characteristic(beta, q), rel=1e-12)


def test_decoupled_test_function(coupled):
    rep = gaussian_moment_check(DISJOINT_XI, coupled)
    assert rep["max_abs_cross"] == 0.0 and rep["pass"]
    q = qm_form(DISJOINT_XI, DISJOINT_XI)
    assert rep["moments"] == [0.0, q, 0.0, 3 * q * q]
    assert rep["closed_form"] == pytest.approx(rep["moments"])
    with pytest.raises(SupportOverlap):
        gaussian_moment_check(OVERLAP_XI, coupled)


def test_spherical_quadrature_agrees_with_form():
    for xi in (OVERLAP_XI, DISJOINT_XI):
        assert spherical_quadrature_q(xi) == pytest.approx(qe_j0_form(xi), rel=1e-9)


def test_double_factorial():
    assert [_double_factorial(n) for n in (-1, 0, 1, 3, 5, 7)] == [1, 1, 1, 3, 15, 105]


@pytest.mark.parametrize("beta", [-0.5, -0.1, 0.0])
def test_gaussian_domination_identity(coupled, beta):
    rep = gaussian_domination(beta, OVERLAP_XI, coupled)
    assert abs(rep["difference"].mean) < 1e-12 * rep["estimate"].mean
    assert rep["pass"]


def test_gaussian_domination_beta_bound(coupled):
    q = qe_j0_form(OVERLAP_XI)
    with pytest.raises(BetaOutOfRange):
        gaussian_domination(0.5 / q, OVERLAP_XI, coupled)
    rep = gaussian_domination(0.25 / q, OVERLAP_XI, coupled)
    assert "quadrature" not in rep and rep["estimate"].mean > 0


def test_free_green_function_is_kernel_overlap():
    cfg = GibbsConfig(params=ModelParams(d=1, m=1.0), n_samples=20000, seed=5)
    w = GaussianWindow((0.0,), 1.0)
    est = vacuum_green_function(w, w, cfg, 0.0, 1.0)
    assert est.within(gaussian_overlap([0.0], 1.0, [0.0], 1.0, 1.0, 1.0, 1), k=4)


def test_uncoupled_fiber_is_characteristic_function():
    cfg = GibbsConfig(params=ModelParams(d=3, m=1.0), n_samples=20000, seed=5)
    p = np.array([0.5, 0.2, 0.0])
    assert fiber_vacuum_element(p, 1.0, cfg).within(characteristic_function(p, 1.0, 1.0), k=4)


def test_coupling_lowers_fiber_element():
    base = GibbsConfig(params=ModelParams(d=3, m=1.0), n_samples=2000, seed=5)
    p = np.zeros(3)
    free = fiber_vacuum_element(p, 1.0, base).mean
    coupled = fiber_vacuum_element(p, 1.0, base.replace(params=ModelParams(d=3, m=1.0, alpha=2.0))).mean
    assert free == 1.0 and coupled < 1.0


def test_two_sided_ground_energy():
    cfg = GibbsConfig(params=ModelParams(d=1, m=1.0, potential=PotentialSpec("harmonic", omega0=0.5)),
                      n_samples=20000, seed=9)
    rep = ground_energy_full(cfg, [2.0], dt=1.0)
    assert rep["estimates"][0].within(0.4410522897567345, k=4, rel=0.03)


def test_self_normalized_scale_invariance():
    g = np.random.default_rng(4)
    w, f = g.uniform(0.1, 1, 300), g.normal(size=300)
    base = self_normalized(w, f)
    assert self_normalized(8.0 * w, f).mean == base.mean
    assert self_normalized(3.0 * w, f).mean == pytest.approx(base.mean, rel=1e-14)


def test_characteristic_positive_definite(coupled):
    rep = positive_definiteness_check(0.7, OVERLAP_XI, coupled)
    assert rep["pass"]
