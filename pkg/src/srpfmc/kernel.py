"""Transition density of the relativistic Levy process z_t = B_{T_t}."""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .stochastic import bernstein_psi


def modified_bessel_K(order, z):
    """K_nu(z), evaluated as ``kve(nu, z) * exp(-z)`` to avoid overflow.

    For very large ``z`` the product underflows to 0; callers that need the
    scaled value should use :func:`modified_bessel_K_scaled`.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("K_nu needs z > 0")
    out = special.kve(order, z) * np.exp(-z)
    return out if out.ndim else float(out)


def modified_bessel_K_scaled(order, z):
    """``exp(z) K_nu(z)``."""
    out = special.kve(order, np.asarray(z, dtype=float))
    return out if np.ndim(out) else float(out)


def _unit_sphere_area(d: int) -> float:
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def _shape(r, t: float, m: float, d: int):
    """Unnormalized radial profile of k_{t,m}."""
    rho = np.sqrt(t * t + np.asarray(r, dtype=float) ** 2)
    nu = 0.5 * (d + 1)
    if m == 0:
        return t / rho ** (d + 1)
    # t e^{tm} K_nu(m rho) / rho^nu with the exponential folded in
    kv = special.k1e(m * rho) if nu == 1.0 else special.kve(nu, m * rho)
    return t * kv * np.exp(m * (t - rho)) / rho ** nu


@lru_cache(maxsize=256)
def kernel_normalization(t: float, m: float, d: int) -> float:
    """Constant c with ``c * shape`` integrating to one over R^d."""
    area = _unit_sphere_area(d)
    f = lambda r: area * r ** (d - 1) * float(_shape(r, t, m, d))
    scale = max(t, 1.0)
    head, _ = integrate.quad(f, 0.0, scale, limit=200, epsabs=0, epsrel=1e-13)
    tail, _ = integrate.quad(f, scale, np.inf, limit=200, epsabs=0, epsrel=1e-13)
    return 1.0 / (head + tail)


def standard_prefactor(t: float, m: float, d: int) -> float:
    """Closed-form constant of the normalized density (for comparison only)."""
    nu = 0.5 * (d + 1)
    if m == 0:
        return math.gamma(nu) / math.pi ** nu
    return 2.0 * (m / (2.0 * math.pi)) ** nu


def kernel_density(x, t: float, m: float = 0.0, d: int = 1):
    """Probability density of z_t at ``x`` (points along the last axis when d > 1).

    For d == 1 ``x`` may be any array of scalars.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    r = np.abs(x) if d == 1 else np.linalg.norm(x, axis=-1)
    out = kernel_normalization(float(t), float(m), int(d)) * _shape(r, t, m, d)
    return out if np.ndim(out) else float(out)


def characteristic_function(u, t: float, m: float = 0.0):
    """``E[exp(-i u.z_t)]`` for z_0 = 0, i.e. ``exp(-t(sqrt(|u|^2+m^2) - m))``."""
    if not t > 0:
        raise ValueError("t must be positive")
    u = np.asarray(u, dtype=float)
    norm2 = u * u if u.ndim == 0 else np.sum(u * u, axis=-1)
    # |u|^2 = 2 * (|u|^2 / 2) puts this on the subordinator's exponent
    out = np.exp(-t * bernstein_psi(0.5 * norm2, m))
    return out if np.ndim(out) else float(out)


def radial_cdf(t: float, m: float, d: int = 1):
    """CDF of z_t (d = 1) as a vectorized callable built by quadrature."""
    if d != 1:
        raise NotImplementedError("radial_cdf is provided for d = 1")

    def cdf(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        for i, xi in enumerate(x):
            half, _ = integrate.quad(lambda y: kernel_density(y, t, m, 1), 0.0, abs(xi), limit=200, epsabs=1e-13)
            out[i] = 0.5 + math.copysign(half, xi)
        return out

    return cdf


def gaussian_overlap(f_center, f_scale, g_center, g_scale, t: float, m: float, d: int) -> float:
    """``int int f(x) k_t(y - x) g(y) dx dy`` for Gaussian windows by radial quadrature.

    Windows are ``exp(-|x - c|^2 / (2 s^2))``.  Only concentric windows are
    supported (the convolution f * g is then radial).
    """
    f_center = np.atleast_1d(np.asarray(f_center, float))
    g_center = np.atleast_1d(np.asarray(g_center, float))
    if not np.allclose(f_center, g_center):
        raise ValueError("gaussian_overlap needs concentric windows")
    s2 = f_scale ** 2 + g_scale ** 2
    pref = (2.0 * math.pi * f_scale ** 2 * g_scale ** 2 / s2) ** (d / 2.0)
    # (f * g~)(z) = pref * exp(-|z|^2 / (2 s2)) for concentric Gaussians
    area = _unit_sphere_area(d)
    integrand = lambda r: area * r ** (d - 1) * kernel_density(r if d == 1 else np.array([r] + [0.0] * (d - 1)), t, m, d) * math.exp(-r * r / (2 * s2))
    cut = 12.0 * math.sqrt(s2)
    val, _ = integrate.quad(integrand, 0.0, cut, limit=400, epsabs=0, epsrel=1e-12)
    return pref * val
