import math

import numpy as np
import pytest

from srpfmc.errors import ConfigError, OutOfDomain
from srpfmc.potentials import PotentialSpec, evaluate
from srpfmc.spectral import (build_and_solve, evaluate_eigenfunction, export_solution, grid, kinetic_symbol,
                             load_solution, nonrelativistic_harmonic_limit, rayleigh_quotient, solve, tail_fit)

HARMONIC = PotentialSpec("harmonic", omega0=0.5)
SOFT = PotentialSpec("soft_coulomb", g=0.5, a=1.0)


def dense_hamiltonian(L, n, m, spec):
    """The same discretization as an explicit symmetric matrix."""
    x = -L + 2 * L / n * np.arange(n)
    xi = 2 * np.pi * np.fft.fftfreq(n, d=2 * L / n)
    sym = np.sqrt(xi ** 2 + m * m) - m
    F = np.fft.fft(np.eye(n), axis=0)
    K = (np.fft.ifft(sym[:, None] * F, axis=0)).real
    return 0.5 * (K + K.T) + np.diag(evaluate(spec, x)), x


@pytest.mark.parametrize("spec,m", [(HARMONIC, 1.0), (SOFT, 1.0), (HARMONIC, 0.0), (SOFT, 3.0)])
def test_matches_dense_diagonalization(spec, m):
    H, x = dense_hamiltonian(16.0, 256, m, spec)
    w, v = np.linalg.eigh(H)
    sol = solve(16.0, 256, m, spec, k_eigs=2)
    assert sol.eigenvalue == pytest.approx(w[0], abs=1e-9)
    np.testing.assert_allclose(sol.eigenvalues[:2], w[:2], atol=1e-8)
    ref = v[:, 0] * np.sign(v[np.argmax(np.abs(v[:, 0])), 0]) / math.sqrt(sol.dx)
    np.testing.assert_allclose(sol.eigenfunction, ref, atol=1e-6)


def test_frozen_harmonic_energy():
    sol = build_and_solve(20.0, 1024, 1.0, HARMONIC)
    assert sol.eigenvalue == pytest.approx(0.4410522897567345, abs=1e-9)
    assert sol.doubling_delta < 1e-9
    assert sol.residual_norm < 1e-8


def test_frozen_soft_coulomb_energy():
    sol = solve(40.0, 4096, 1.0, SOFT)
    assert sol.eigenvalue == pytest.approx(-0.3007839423453631, abs=1e-8)


def test_normalized_positive_eigenfunction():
    sol = solve(20.0, 512, 1.0, HARMONIC)
    assert np.sum(sol.eigenfunction ** 2) * sol.dx == pytest.approx(1.0, rel=1e-12)
    assert sol.eigenfunction.min() > -1e-10
    assert rayleigh_quotient(sol, HARMONIC) == pytest.approx(sol.eigenvalue, abs=1e-10)


def test_heavy_mass_reaches_nonrelativistic_limit():
    sol = solve(20.0, 1024, 50.0, HARMONIC)
    assert sol.eigenvalue == pytest.approx(nonrelativistic_harmonic_limit(50.0), rel=1e-3)


def test_symbol_and_grid():
    x = grid(2.0, 8)
    assert x[0] == -2.0 and x[-1] == pytest.approx(1.5)
    sym = kinetic_symbol(2.0, 8, 1.0)
    assert sym[0] == 0.0 and np.all(sym >= 0)


@pytest.mark.parametrize("n", [7, 12, 4])
def test_rejects_bad_grid(n):
    with pytest.raises(ConfigError):
        solve(10.0, n, 1.0, HARMONIC)


def test_interpolation_exact_at_nodes_and_bounded_domain():
    sol = solve(10.0, 256, 1.0, HARMONIC)
    np.testing.assert_array_equal(evaluate_eigenfunction(sol, sol.grid[::7]), sol.eigenfunction[::7])
    mid = 0.5 * (sol.grid[100] + sol.grid[101])
    assert min(sol.eigenfunction[100:102]) - 1e-3 < evaluate_eigenfunction(sol, mid) < max(sol.eigenfunction[100:102]) + 1e-3
    with pytest.raises(OutOfDomain):
        evaluate_eigenfunction(sol, 10.5)


def test_export_roundtrip(tmp_path):
    sol = solve(10.0, 64, 1.0, HARMONIC)
    export_solution(sol, tmp_path / "phi.txt")
    back = load_solution(tmp_path / "phi.txt")
    assert back.eigenvalue == sol.eigenvalue and back.n == 64
    np.testing.assert_array_equal(back.eigenfunction, sol.eigenfunction)


def test_massive_tail_is_exponential():
    sol = solve(80.0, 4096, 1.0, SOFT)
    fit = tail_fit(sol, kind="exponential")
    # sqrt(m^2 - kappa^2) - m = E on the imaginary axis; the Coulomb tail adds a power prefactor
    kappa = math.sqrt(1.0 - (1.0 + sol.eigenvalue) ** 2)
    assert -fit["slope"] == pytest.approx(kappa, rel=0.1)
    assert fit["r2"] > 0.99


def test_lowering_potential_lowers_energy():
    shallow = PotentialSpec("square_well", depth=0.5, width=2.0)
    deep = PotentialSpec("square_well", depth=1.0, width=2.0)
    assert solve(20.0, 512, 1.0, deep).eigenvalue < solve(20.0, 512, 1.0, shallow).eigenvalue


def test_massless_tail_is_algebraic():
    sol = solve(2000.0, 65536, 0.0, PotentialSpec("soft_coulomb", g=1.0, a=1.0))
    fit = tail_fit(sol, kind="power")
    assert -fit["slope"] == pytest.approx(2.0, abs=0.3)
