"""Pseudospectral eigensolver for sqrt(p^2 + m^2) - m + V on a periodic 1-d grid."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import LinearOperator, lobpcg

from .errors import ConfigError, NoConvergence, OutOfDomain
from .potentials import PotentialSpec, evaluate

RESIDUAL_TARGET = 1e-8


@dataclass(frozen=True)
class SpectralSolution:
    grid: np.ndarray
    eigenvalue: float
    eigenfunction: np.ndarray
    residual_norm: float
    m: float
    L: float
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))
    doubling_delta: float = float("nan")

    @property
    def n(self) -> int:
        return self.grid.size

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.n


def grid(L: float, n: int) -> np.ndarray:
    return -L + (2.0 * L / n) * np.arange(n)


def kinetic_symbol(L: float, n: int, m: float) -> np.ndarray:
    xi = 2.0 * np.pi * np.fft.fftfreq(n, d=2.0 * L / n)
    return np.sqrt(xi * xi + m * m) - m


def _operator(sym, v):
    def apply(u):
        u = np.asarray(u)
        if u.ndim == 1:
            return np.fft.ifft(sym * np.fft.fft(u)).real + v * u
        return np.fft.ifft(sym[:, None] * np.fft.fft(u, axis=0), axis=0).real + v[:, None] * u
    return apply


def _validate(L, n, m):
    problems = []
    if not L > 0:
        problems.append(("L", "must be positive"))
    if n < 8 or n & (n - 1):
        problems.append(("n", "must be a power of two >= 8"))
    if not m >= 0:
        problems.append(("m", "must be nonnegative"))
    if problems:
        raise ConfigError(problems)


def solve(L: float, n: int, m: float, spec: PotentialSpec, k_eigs: int = 1, maxiter: int = 2000) -> SpectralSolution:
    """Lowest ``k_eigs`` eigenpairs of the multiplier-plus-potential operator."""
    _validate(L, n, m)
    x = grid(L, n)
    v = evaluate(spec, x)
    if not np.all(np.isfinite(v)):
        raise ConfigError([("potential", "must be bounded on the grid")])
    sym = kinetic_symbol(L, n, m)
    apply = _operator(sym, v)
    A = LinearOperator((n, n), matvec=apply, matmat=apply, dtype=float)
    shift = max(0.0, -float(v.min())) + 1.0
    pre_sym = 1.0 / (sym + float(v.mean()) + shift)
    M = LinearOperator((n, n), matvec=lambda u: np.fft.ifft(pre_sym * np.fft.fft(np.ravel(u))).real,
                       matmat=lambda U: np.fft.ifft(pre_sym[:, None] * np.fft.fft(U, axis=0), axis=0).real,
                       dtype=float)
    k = max(1, int(k_eigs))
    width = L / 8.0
    X0 = np.stack([(x / width) ** j * np.exp(-0.5 * (x / width) ** 2) for j in range(k + 2)], axis=1)
    X0[:, 0] += 1e-3  # overlap with a constant ground state
    vals, vecs = lobpcg(A, X0, M=M, tol=1e-11, maxiter=maxiter, largest=False)
    order = np.argsort(vals)
    vals, vecs = vals[order][:k], vecs[:, order][:, :k]
    phi = vecs[:, 0]
    # polish with Rayleigh quotients of the preconditioned residual
    for _ in range(50):
        phi = phi / np.linalg.norm(phi)
        E = float(phi @ apply(phi))
        res = apply(phi) - E * phi
        if np.linalg.norm(res) < 0.1 * RESIDUAL_TARGET:
            break
        d = M.matvec(res)
        basis, _ = np.linalg.qr(np.stack([phi, d], axis=1))
        H = basis.T @ apply(basis)
        w, u = np.linalg.eigh(0.5 * (H + H.T))
        phi = basis @ u[:, 0]
    phi = phi / np.linalg.norm(phi)
    E = float(phi @ apply(phi))
    resid = float(np.linalg.norm(apply(phi) - E * phi))
    if not resid < RESIDUAL_TARGET:
        raise NoConvergence(f"residual {resid:.3e} above {RESIDUAL_TARGET:g}")
    if phi.sum() < 0:
        phi = -phi
    dx = 2.0 * L / n
    phi = phi / np.sqrt(dx)
    vals = vals.copy()
    vals[0] = E
    return SpectralSolution(x, E, phi, resid, m, L, vals)


def build_and_solve(L: float, n: int, m: float, spec: PotentialSpec, k_eigs: int = 1,
                    check_doubling: bool = True) -> SpectralSolution:
    """Solve on n points and, optionally, on 2n to record the grid-doubling change in E."""
    sol = solve(L, n, m, spec, k_eigs)
    if not check_doubling:
        return sol
    fine = solve(L, 2 * n, m, spec, 1)
    return SpectralSolution(sol.grid, sol.eigenvalue, sol.eigenfunction, sol.residual_norm, m, L,
                            sol.eigenvalues, abs(fine.eigenvalue - sol.eigenvalue))


def rayleigh_quotient(sol: SpectralSolution, spec: PotentialSpec) -> float:
    apply = _operator(kinetic_symbol(sol.L, sol.n, sol.m), evaluate(spec, sol.grid))
    phi = sol.eigenfunction
    return float(phi @ apply(phi) / (phi @ phi))


def evaluate_eigenfunction(sol: SpectralSolution, x):
    """Periodic cubic interpolation of the stored eigenfunction."""
    xa = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xa)) or np.any(np.abs(xa) > sol.L):
        raise OutOfDomain(f"points outside [-{sol.L}, {sol.L}]")
    spline = _spline(sol)
    out = spline(xa)
    # exact at nodes
    idx = (xa + sol.L) / sol.dx
    node = np.isclose(idx, np.round(idx), rtol=0, atol=1e-9)
    if np.any(node):
        j = np.mod(np.round(idx[node]).astype(int), sol.n)
        out = np.array(out, dtype=float, copy=True)
        out[node] = sol.eigenfunction[j]
    return out if out.ndim else float(out)


_SPLINES: dict = {}


def _spline(sol: SpectralSolution) -> CubicSpline:
    key = id(sol)
    hit = _SPLINES.get(key)
    if hit is None or hit[0] is not sol:
        xs = np.append(sol.grid, sol.L)
        ys = np.append(sol.eigenfunction, sol.eigenfunction[0])
        hit = (sol, CubicSpline(xs, ys, bc_type="periodic"))
        _SPLINES[key] = hit
    return hit[1]


def nonrelativistic_harmonic_limit(m: float, omega0: float = 0.5) -> float:
    """Ground energy of p^2/(2m) + omega0 x^2, the m -> infinity limit."""
    return 0.5 * np.sqrt(2.0 * omega0 / m)


def export_solution(sol: SpectralSolution, path) -> None:
    header = f"E={sol.eigenvalue!r} m={sol.m!r} L={sol.L!r} n={sol.n}"
    np.savetxt(Path(path), np.column_stack([sol.grid, sol.eigenfunction]), header=header, fmt="%.17g")


def load_solution(path) -> SpectralSolution:
    path = Path(path)
    with path.open() as fh:
        head = fh.readline().lstrip("#").split()
    meta = dict(item.split("=", 1) for item in head)
    data = np.loadtxt(path)
    return SpectralSolution(data[:, 0], float(meta["E"]), data[:, 1], float("nan"), float(meta["m"]),
                            float(meta["L"]))


def tail_fit(sol: SpectralSolution, floor: float = 1e-10, kind: str = "exponential", x_max: float = None) -> dict:
    """Fit the decay of |phi_b| on x > 0 where phi_b exceeds ``floor``.

    ``kind="exponential"`` fits log phi against x; ``"power"`` fits log phi
    against log x over the last decade of the window.  The window stops at
    ``x_max`` (default L/4, away from the periodic images).
    """
    x, y = sol.grid, sol.eigenfunction
    x_max = sol.L / 4.0 if x_max is None else x_max
    peak = x[np.argmax(y)]
    sel = (x > peak + 1.0) & (y > floor) & (x <= x_max)
    x, y = x[sel], y[sel]
    if kind == "power":
        keep = x >= x.max() / 10.0
        X, Y = np.log(x[keep]), np.log(y[keep])
    else:
        X, Y = x, np.log(y)
    slope, intercept = np.polyfit(X, Y, 1)
    pred = slope * X + intercept
    r2 = 1.0 - np.sum((Y - pred) ** 2) / np.sum((Y - Y.mean()) ** 2)
    return {"slope": float(slope), "r2": float(r2), "x_min": float(x.min()), "x_max": float(x.max())}
