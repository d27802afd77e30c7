import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from srpfmc import rng
from srpfmc.estimate import estimate_from_samples, map_chunks
from srpfmc.stochastic import (MINUS, PLUS, TWO_SIDED, PathConfig, bernstein_from_levy, bernstein_psi,
                               laplace_transform, sample_path, sample_paths, subordinator_cdf,
                               subordinator_density, subordinator_increments, subordinator_levy_density)


@given(st.floats(0.0, 50.0), st.floats(0.0, 5.0))
def test_psi_matches_naive_formula(u, m):
    naive = math.sqrt(2 * u + m * m) - m
    assert bernstein_psi(u, m) == pytest.approx(naive, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("m", [0.0, 0.5, 2.0])
@pytest.mark.parametrize("u", [0.1, 1.0, 7.5])
def test_psi_from_levy_measure(u, m):
    got = bernstein_from_levy(u, 0.0, subordinator_levy_density(m))
    assert got == pytest.approx(bernstein_psi(u, m), rel=1e-7)


def test_psi_rejects_negative_argument():
    with pytest.raises(ValueError):
        bernstein_psi(-1.0, 1.0)


@pytest.mark.parametrize("t,m", [(0.3, 1.0), (1.0, 1.0), (2.0, 0.5)])
def test_density_is_inverse_gaussian(t, m):
    s = np.linspace(0.01, 10, 50)
    ref = stats.invgauss(mu=1.0 / (m * t), scale=t * t).pdf(s)
    np.testing.assert_allclose(subordinator_density(s, t, m), ref, rtol=1e-10)


def test_density_m0_is_levy():
    s = np.geomspace(1e-3, 1e3, 40)
    np.testing.assert_allclose(subordinator_density(s, 1.5, 0.0), stats.levy(scale=1.5 ** 2).pdf(s), rtol=1e-10)


def test_density_zero_off_support():
    assert subordinator_density(-1.0, 1.0, 1.0) == 0.0
    assert subordinator_density(0.0, 1.0, 1.0) == 0.0


@pytest.mark.parametrize("t,m", [(1.0, 1.0), (0.25, 2.0), (1.0, 0.0)])
def test_cdf_against_scipy(t, m):
    ref = stats.levy(scale=t * t) if m == 0 else stats.invgauss(mu=1.0 / (m * t), scale=t * t)
    s = np.geomspace(0.02, 40, 30) * t
    np.testing.assert_allclose(subordinator_cdf(t, m)(s), ref.cdf(s), atol=1e-7)


def test_increments_reproduce_laplace_transform(seed):
    T = subordinator_increments(1.0, 1.0, rng.stream_batch(seed, 0, 40000), 1, rng.SUB_PLUS)[:, 0]
    for u in (0.5, 2.0):
        est = estimate_from_samples(np.exp(-u * T), seed)
        assert est.within(laplace_transform(1.0, u, 1.0), k=4)


def test_increment_ks_m0(seed):
    T = subordinator_increments(0.5, 0.0, rng.stream_batch(seed, 0, 20000), 1, rng.SUB_PLUS)[:, 0]
    assert stats.kstest(T, stats.levy(scale=0.25).cdf).pvalue > 1e-3


def test_path_shapes_and_start_point(seed):
    cfg = PathConfig(t=1.0, n_slabs=4, n_substeps=3, m=1.0, d=2)
    batch = sample_paths(cfg, [0.5, -1.0], rng.stream_batch(seed, 0, 7))
    assert len(batch) == 7
    for b in (PLUS, MINUS):
        assert batch.positions[b].shape == (7, 13, 2)
        np.testing.assert_array_equal(batch.positions[b][:, 0], np.tile([0.5, -1.0], (7, 1)))
        assert np.all(np.diff(batch.subordinator[b], axis=1) > 0)
    assert batch.boundary_positions(PLUS).shape == (7, 5, 2)


def test_single_path_matches_batch_row(seed):
    cfg = PathConfig(t=2.0, n_slabs=8, n_substeps=2, m=0.7, d=3)
    batch = sample_paths(cfg, np.zeros(3), rng.stream_batch(seed, 3, 6))
    one = sample_path(cfg, np.zeros(3), rng.derive_stream(seed, 4))
    np.testing.assert_array_equal(one.positions[PLUS], batch.positions[PLUS][1])
    np.testing.assert_array_equal(one.subordinator[MINUS], batch.subordinator[MINUS][1])
    with pytest.raises(ValueError):
        one.positions[PLUS][0, 0] = 1.0


def test_labels_are_signed_left_slab_ends(seed):
    cfg = PathConfig(t=1.0, n_slabs=4, n_substeps=2, m=1.0, d=1)
    p = sample_path(cfg, [0.0], rng.derive_stream(seed, 0))
    assert [p.slab_label(PLUS, a) for a in range(8)] == [0, 0, 0.25, 0.25, 0.5, 0.5, 0.75, 0.75]
    assert p.slab_label(MINUS, 5) == -0.5


def test_m0_needs_cap():
    with pytest.raises(ValueError, match="cap"):
        PathConfig(t=1.0, m=0.0)
    cfg = PathConfig(t=1.0, m=0.0, n_slabs=2, n_substeps=1, d=1, brownian_time_cap=5.0)
    batch = sample_paths(cfg, [0.0], rng.stream_batch(1, 0, 2000))
    tot = batch.subordinator[PLUS][:, -1] + batch.subordinator[MINUS][:, -1]
    np.testing.assert_array_equal(batch.capped, tot > 5.0)
    assert 0 < batch.capped.mean() < 1


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2 ** 40))
def test_results_do_not_depend_on_worker_count(workers, s):
    cfg = PathConfig(t=1.0, n_slabs=4, n_substeps=2, m=1.0, d=2)

    def fn(a, b):
        return sample_paths(cfg, np.zeros(2), rng.stream_batch(s, a, b), branch=TWO_SIDED).positions[MINUS][:, -1]

    ref = np.concatenate(map_chunks(fn, 1100, 1, chunk=128))
    got = np.concatenate(map_chunks(fn, 1100, workers, chunk=128))
    np.testing.assert_array_equal(ref, got)


def test_streams_are_independent_of_purpose(seed):
    s = rng.derive_stream(seed, 0)
    a, b = s.uniform(1000, rng.SUB_PLUS), s.uniform(1000, rng.SUB_MINUS)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.1
    assert np.all((a > 0) & (a < 1))
    np.testing.assert_array_equal(a, rng.derive_stream(seed, 0).uniform(1000, rng.SUB_PLUS))


def test_philox_known_answer():
    # Random123 known-answer vector for philox4x64-10 with zero counter and key
    z = np.zeros(1, np.uint64)
    out = rng.philox4x64((z, z, z, z), (z, z))
    assert [hex(int(v[0])) for v in out] == ["0x16554d9eca36314c", "0xdb20fe9d672d0fdc",
                                             "0xd7e772cee186176b", "0x7e68b68aec7ba23b"]


def test_branches_independent(seed):
    cfg = PathConfig(t=1.0, n_slabs=4, n_substeps=1, m=1.0, d=1)
    b = sample_paths(cfg, [0.0], rng.stream_batch(seed, 0, 20000))
    plus, minus = b.positions[PLUS][:, -1, 0], b.positions[MINUS][:, -1, 0]
    r = np.corrcoef(plus, minus)[0, 1]
    assert abs(r) < 3 / math.sqrt(plus.size)


def test_subordinator_increments_stationary(seed):
    cfg = PathConfig(t=2.0, n_slabs=2, n_substeps=1, m=1.0, d=1)
    sub = sample_paths(cfg, [0.0], rng.stream_batch(seed, 0, 10000), branch=PLUS).subordinator[PLUS]
    later = sub[:, 2] - sub[:, 1]
    ref = stats.invgauss(mu=1.0, scale=1.0)  # T_1 at m = 1
    assert stats.kstest(later, ref.cdf).pvalue > 0.05
    assert stats.ks_2samp(later, sub[:, 1]).pvalue > 0.05
