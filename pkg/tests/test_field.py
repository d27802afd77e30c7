import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from srpfmc.errors import TableCoverageExceeded
from srpfmc.field import (CutoffSpec, KernelTable, RadialProfile, TestFunctionSpec, build_kernel_table,
                          direct_components, pair_components, pair_potential, qe_j0_form, qm_form, scalar_kernel,
                          supports_disjoint)

CUT = CutoffSpec()


def _sphere_rule(k_max, nk=40, nt=40, nphi=80):
    kn, kw = np.polynomial.legendre.leggauss(nk)
    k, kw = 0.5 * k_max * (kn + 1), 0.5 * k_max * kw
    ct, tw = np.polynomial.legendre.leggauss(nt)
    ph = np.linspace(0, 2 * np.pi, nphi, endpoint=False)
    K, CT, PH = np.meshgrid(k, ct, ph, indexing="ij")
    w = kw[:, None, None] * tw[None, :, None] * (2 * np.pi / nphi) * K ** 2
    s = np.sqrt(1 - CT ** 2)
    return K, np.stack([s * np.cos(PH), s * np.sin(PH), CT], -1), w


K, KHAT, WQ = _sphere_rule(1.0)


def brute_w(tau, X, cutoff=CUT):
    """Direct 3-d quadrature of int |phi^|^2/(2 omega) e^{-omega tau} cos(k.X) (delta - k^k^) d^3k."""
    ph = cutoff.phi_hat(K) ** 2 / (2 * K) * np.exp(-K * tau) * np.cos(K * (KHAT @ np.asarray(X))) * WQ
    return np.eye(3) * ph.sum() - np.einsum("ijk,ijkm,ijkn->mn", ph, KHAT, KHAT)


def brute_scalar(tau, X, cutoff=CUT):
    return 2 * np.sum(cutoff.phi_hat(K) ** 2 / (2 * K) * np.exp(-K * tau) * np.cos(K * (KHAT @ np.asarray(X))) * WQ)


def test_origin_value():
    a, b = pair_components(0.0, 0.0, CUT)
    assert float(a) == pytest.approx(1 / (12 * math.pi ** 2), rel=1e-13)
    assert float(b) == 0.0
    assert float(scalar_kernel(0.0, 0.0, CUT)) == pytest.approx(CUT.norm_sq_over_omega(), rel=1e-13)
    assert CUT.norm_sq_over_omega() == pytest.approx(1 / (4 * math.pi ** 2), rel=1e-13)


@pytest.mark.parametrize("tau,X", [(0.5, [0.7, 0.4, -0.3]), (0.0, [2.0, 0.0, 0.0]), (1.5, [0.0, -0.3, 0.9])])
def test_pair_potential_against_brute_quadrature(tau, X):
    np.testing.assert_allclose(pair_potential(tau, np.array(X), CUT), brute_w(tau, X), atol=1e-12)
    assert float(scalar_kernel(tau, np.linalg.norm(X), CUT)) == pytest.approx(brute_scalar(tau, X), abs=1e-12)


def test_gaussian_cutoff_against_brute_quadrature():
    cut = CutoffSpec("gaussian", sigma=0.5)
    k, kh, w = _sphere_rule(8 * 0.5, nk=60)
    X = np.array([0.3, -1.0, 0.4])
    ph = cut.phi_hat(k) ** 2 / (2 * k) * np.exp(-k * 0.2) * np.cos(k * (kh @ X)) * w
    ref = np.eye(3) * ph.sum() - np.einsum("ijk,ijkm,ijkn->mn", ph, kh, kh)
    np.testing.assert_allclose(pair_potential(0.2, X, cut), ref, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 3), st.lists(st.floats(-4, 4), min_size=3, max_size=3))
def test_pair_potential_symmetric_and_even(tau, X):
    X = np.array(X)
    W = pair_potential(tau, X, CUT)
    np.testing.assert_allclose(W, W.T, atol=1e-15)
    np.testing.assert_allclose(pair_potential(tau, -X, CUT), W, atol=1e-15)


def test_pair_potential_decays_in_tau():
    vals = [float(pair_components(t, 0.5, CUT)[0]) for t in (0, 1, 2, 4)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_table_matches_direct_and_roundtrips(tmp_path):
    table = build_kernel_table(CUT, 2.0, 8.0, audit_points=200)
    assert table.certified_error < 1e-5
    rng = np.random.default_rng(0)
    for tau, r in rng.uniform([0, 0], [2, 8], size=(10, 2)):
        a, b = table.components(tau, r)
        da, db = direct_components(tau, r, CUT)
        assert a == pytest.approx(da, abs=1e-8)
        assert b == pytest.approx(db, abs=1e-8)
    table.save(tmp_path / "w.bin")
    back = KernelTable.load(tmp_path / "w.bin")
    assert back.to_bytes() == table.to_bytes()
    with pytest.raises(TableCoverageExceeded):
        table.components(3.0, 1.0)


def test_table_build_is_deterministic():
    a = build_kernel_table(CUT, 1.0, 4.0, kind="scalar", audit_points=50)
    b = build_kernel_table(CUT, 1.0, 4.0, kind="scalar", audit_points=50)
    assert a.to_bytes() == b.to_bytes()


def test_quadratic_forms():
    xi = TestFunctionSpec.single(RadialProfile("sharp_shell", r_in=0.2, r_out=0.8))
    q = qe_j0_form(xi)
    assert q > 0
    assert qe_j0_form(xi.scaled(2.0)) == pytest.approx(4 * q)
    assert qm_form(xi, xi) > 0
    far = TestFunctionSpec.single(RadialProfile("sharp_shell", r_in=1.5, r_out=2.5), 1)
    assert supports_disjoint(far, CUT)
    assert not supports_disjoint(xi, CUT)


def test_profile_validation():
    with pytest.raises(ValueError):
        RadialProfile("sharp_shell", r_in=1.0, r_out=0.5)
    with pytest.raises(ValueError):
        CutoffSpec("sharp", lam=0.0)


def test_table_origin_is_isotropic():
    table = build_kernel_table(CUT, 1.0, 4.0, audit_points=0)
    np.testing.assert_array_equal(table.matrix(0.0, np.zeros(3)), table.a00 * np.eye(3))


def test_dominated_by_origin_trace():
    bound = np.trace(pair_potential(0.0, np.zeros(3), CUT))
    g = np.random.default_rng(7)
    for tau, *X in g.uniform([0, -6, -6, -6], [3, 6, 6, 6], size=(40, 4)):
        assert np.max(np.abs(pair_potential(tau, np.array(X), CUT))) <= bound


def test_gram_matrix_psd_on_fragments():
    g = np.random.default_rng(3)
    for _ in range(5):
        M = 6
        X = np.cumsum(g.normal(scale=0.5, size=(M, 3)), axis=0)
        labels = np.repeat([0.0, 0.25, 0.5], 2)
        G = np.zeros((3 * M, 3 * M))
        for i in range(M):
            for j in range(M):
                G[3 * i:3 * i + 3, 3 * j:3 * j + 3] = pair_potential(abs(labels[i] - labels[j]), X[i] - X[j], CUT)
        assert np.linalg.eigvalsh(G).min() >= -1e-8
