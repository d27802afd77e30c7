"""Field-sector covariances in d = 3.

Field operators are never built.  Everything downstream goes through three
radial reductions of isotropic Fourier integrals:

    avg_{S^2} (delta - k^ k^) e^{-ik.X} = (j0 - j1/z) delta + j2 X^ X^,   z = |k||X|

so a matrix kernel ``1/2 int w(k) D(k) e^{-ik.X} e^{-|tau| k} dk`` becomes
``a(tau, r) delta + b(tau, r) X^ X^`` with two one-dimensional integrals.
"""
from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy.interpolate import RectBivariateSpline
from scipy.special import spherical_jn

from .errors import AuditFailed, QuadratureError, TableCoverageExceeded, ZeroWavevector

D = 3
FOUR_PI = 4.0 * math.pi
_GL_X, _GL_W = leggauss(16)


@dataclass(frozen=True)
class RadialProfile:
    """Real radial profile in momentum space with compact support [r_in, r_out].

    kind ``sharp_shell``: ``amplitude`` on the shell; ``gaussian_shell``:
    ``amplitude * exp(-(k - center)^2 / (2 width^2))`` on the shell;
    ``custom``: ``fn(k)`` on the shell.
    """

    kind: str = "sharp_shell"
    r_in: float = 0.0
    r_out: float = 1.0
    amplitude: float = 1.0
    center: float = 0.0
    width: float = 1.0
    fn: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.r_in < self.r_out < math.inf:
            raise ValueError("profile support must satisfy 0 <= r_in < r_out < inf")
        if self.kind not in ("sharp_shell", "gaussian_shell", "custom"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "custom" and self.fn is None:
            raise ValueError("custom profile needs fn")

    @property
    def support(self):
        return (self.r_in, self.r_out)

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        inside = (k >= self.r_in) & (k <= self.r_out)
        if self.kind == "sharp_shell":
            val = np.full_like(k, self.amplitude)
        elif self.kind == "gaussian_shell":
            val = self.amplitude * np.exp(-((k - self.center) ** 2) / (2.0 * self.width ** 2))
        else:
            val = np.asarray(self.fn(k), dtype=float) * np.ones_like(k)
        return np.where(inside, val, 0.0)

    def scaled(self, c: float) -> "RadialProfile":
        if self.kind == "custom":
            fn = self.fn
            return RadialProfile("custom", self.r_in, self.r_out, fn=lambda k: c * fn(k))
        return RadialProfile(self.kind, self.r_in, self.r_out, c * self.amplitude, self.center, self.width)


@dataclass(frozen=True)
class CutoffSpec:
    """Ultraviolet cutoff phi^(k).

    ``sharp``: ``norm * 1{|k| < lam}``; ``gaussian``: ``norm * exp(-k^2/(2 sigma^2))``.
    The default ``norm`` is (2 pi)^{-3/2}.
    """

    profile: str = "sharp"
    lam: float = 1.0
    sigma: float = 1.0
    norm: float = (2.0 * math.pi) ** -1.5

    def __post_init__(self):
        if self.profile not in ("sharp", "gaussian"):
            raise ValueError(f"unknown cutoff profile {self.profile!r}")
        if self.profile == "sharp" and not self.lam > 0:
            raise ValueError("sharp cutoff needs lam > 0")
        if self.profile == "gaussian" and not self.sigma > 0:
            raise ValueError("gaussian cutoff needs sigma > 0")

    @property
    def support(self):
        return (0.0, self.lam) if self.profile == "sharp" else (0.0, 8.0 * self.sigma)

    @property
    def k_scale(self) -> float:
        return self.lam if self.profile == "sharp" else 4.0 * self.sigma

    def phi_hat(self, k):
        k = np.asarray(k, dtype=float)
        if self.profile == "sharp":
            return np.where(k < self.lam, self.norm, 0.0)
        return self.norm * np.exp(-k * k / (2.0 * self.sigma ** 2))

    def norm_sq_over_omega(self) -> float:
        """``|| phi^ / sqrt(omega) ||^2 = 4 pi int |phi^|^2 k dk``."""
        lo, hi = self.support
        return FOUR_PI * radial_integral(lambda k: self.phi_hat(k) ** 2 * k, lo, hi)

    def norm_sq_omega3(self) -> float:
        """``|| omega^{3/2} phi^ ||^2`` (finite for both profiles)."""
        lo, hi = self.support
        return FOUR_PI * radial_integral(lambda k: self.phi_hat(k) ** 2 * k ** 5, lo, hi)

    def descriptor(self) -> tuple:
        code = 0 if self.profile == "sharp" else 1
        return code, (self.lam if code == 0 else self.sigma), self.norm


@dataclass(frozen=True)
class TestFunctionSpec:
    """xi = (xi_1, xi_2, xi_3); each component a radial profile or None (zero)."""

    __test__ = False  # not a pytest class despite the name

    components: tuple = (None, None, None)

    def __post_init__(self):
        if len(self.components) != D:
            raise ValueError("TestFunctionSpec needs three components")

    @classmethod
    def single(cls, profile: RadialProfile, mu: int = 0) -> "TestFunctionSpec":
        comps = [None] * D
        comps[mu] = profile
        return cls(tuple(comps))

    def scaled(self, c: float) -> "TestFunctionSpec":
        return TestFunctionSpec(tuple(None if p is None else p.scaled(c) for p in self.components))

    @property
    def is_zero(self) -> bool:
        return all(p is None or (p.kind != "custom" and p.amplitude == 0) for p in self.components)


def _panels(lo, hi, n_panels):
    edges = np.linspace(lo, hi, n_panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    nodes = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    weights = (half[:, None] * _GL_W[None, :]).ravel()
    return nodes, weights


def radial_nodes(lo: float, hi: float, r_max: float = 0.0, tau_max: float = 0.0):
    """Composite Gauss-Legendre nodes on [lo, hi] resolving e^{-k tau} j(kr).

    When ``lo == 0`` the substitution k = hi s^2 removes half-integer power
    behaviour at the origin.
    """
    if hi <= lo:
        return np.zeros(0), np.zeros(0)
    freq = max(r_max, 1.0) + 0.25 * tau_max
    n_panels = int(math.ceil((hi - lo) * freq / 1.0)) + 2
    if lo == 0.0:
        s, ws = _panels(0.0, 1.0, 2 * n_panels)
        return hi * s * s, 2.0 * hi * s * ws
    return _panels(lo, hi, n_panels)


def radial_integral(f, lo, hi, r_max=0.0) -> float:
    k, w = radial_nodes(lo, hi, r_max)
    return float(np.dot(w, f(k))) if k.size else 0.0


def _j1_over_z(z):
    small = z < 1e-3
    zs = np.where(small, 1.0, z)
    return np.where(small, 1.0 / 3.0 - z * z / 30.0 + z ** 4 / 840.0, spherical_jn(1, zs) / zs)


def radial_components(weight, support, tau, r, which=("a", "b")):
    """Integrals ``4 pi int w(k) e^{-k|tau|} k^2 J(kr) dk`` for J in ``which``.

    J is ``j0 - j1/z`` for "a", ``j2`` for "b" and ``j0`` for "s".
    ``tau`` and ``r`` broadcast together.  Returns a dict of arrays.
    """
    tau, r = np.broadcast_arrays(np.abs(np.asarray(tau, float)), np.asarray(r, float))
    shape = tau.shape
    tau, r = tau.ravel(), r.ravel()
    lo, hi = support
    out = {key: np.zeros(tau.size) for key in which}
    if hi <= lo or tau.size == 0:
        return {key: v.reshape(shape) for key, v in out.items()}
    k, w = radial_nodes(lo, hi, float(r.max()), float(tau.max()))
    base = w * weight(k) * k * k * FOUR_PI
    step = max(1, 2_000_000 // max(k.size, 1))
    for s in range(0, tau.size, step):
        tt, rr = tau[s:s + step, None], r[s:s + step, None]
        damp = base[None, :] * np.exp(-k[None, :] * tt)
        z = k[None, :] * rr
        if "a" in which or "s" in which:
            j0 = spherical_jn(0, z)
        if "a" in which:
            out["a"][s:s + step] = (damp * (j0 - _j1_over_z(z))).sum(axis=1)
        if "b" in which:
            out["b"][s:s + step] = (damp * spherical_jn(2, z)).sum(axis=1)
        if "s" in which:
            out["s"][s:s + step] = (damp * j0).sum(axis=1)
    return {key: v.reshape(shape) for key, v in out.items()}


def transversal_projector(k) -> np.ndarray:
    """``delta_{mu nu} - k_mu k_nu / |k|^2``."""
    k = np.asarray(k, dtype=float)
    n2 = float(k @ k)
    if n2 == 0.0:
        raise ZeroWavevector("transversal projector undefined at k = 0")
    return np.eye(k.size) - np.outer(k, k) / n2


def _overlap(a, b):
    lo, hi = max(a[0], b[0]), min(a[1], b[1])
    return (lo, hi) if hi > lo else None


def qm_form(f: TestFunctionSpec, g: TestFunctionSpec) -> float:
    """``1/2 int <f^(k), D(k) g^(k)> dk`` for radial components.

    The angular average of D is (2/3) delta, so only equal components pair.
    """
    total = 0.0
    for fp, gp in zip(f.components, g.components):
        if fp is None or gp is None:
            continue
        ov = _overlap(fp.support, gp.support)
        if ov is None:
            continue
        total += radial_integral(lambda k: fp(k) * gp(k) * k * k, *ov)
    return 0.5 * (2.0 / 3.0) * FOUR_PI * total


def qe_j0_form(xi: TestFunctionSpec, eta: Optional[TestFunctionSpec] = None) -> float:
    """``q_E(j_0 xi, j_0 eta)``; equal times make the k_0 weight integrate to one."""
    return qm_form(xi, xi if eta is None else eta)


def _pair_weight(cutoff):
    return lambda k: cutoff.phi_hat(k) ** 2 / k


def pair_components(tau, r, cutoff: CutoffSpec):
    """Scalar parts (a, b) of W(tau, X) = a delta + b X^ X^ at radius r."""
    comp = radial_components(_pair_weight(cutoff), cutoff.support, tau, r)
    return 0.5 * comp["a"], 0.5 * comp["b"]


def pair_potential(tau: float, X, cutoff: CutoffSpec) -> np.ndarray:
    """W_{mu nu}(tau, X) as a 3x3 matrix."""
    X = np.asarray(X, dtype=float)
    r = float(np.linalg.norm(X))
    a, b = pair_components(tau, r, cutoff)
    out = float(a) * np.eye(D)
    if r > 0:
        xh = X / r
        out += float(b) * np.outer(xh, xh)
    return out


def scalar_kernel(tau, r, cutoff: CutoffSpec):
    """Unprojected kernel ``int |phi^|^2/omega e^{-ik.X} e^{-|tau| omega} dk`` (norm of the E-space)."""
    return radial_components(_pair_weight(cutoff), cutoff.support, tau, r, which=("s",))["s"]


def _cross_weight(profile, cutoff):
    return lambda k: profile(k) * cutoff.phi_hat(k) / np.sqrt(k)


def cross_components(tau, r, xi: TestFunctionSpec, cutoff: CutoffSpec):
    """Per-component (A_mu, B_mu) arrays; None where xi_mu does not meet phi^."""
    out = []
    for prof in xi.components:
        ov = None if prof is None else _overlap(prof.support, cutoff.support)
        if ov is None:
            out.append(None)
            continue
        c = radial_components(_cross_weight(prof, cutoff), ov, tau, r)
        out.append((0.5 * c["a"], 0.5 * c["b"]))
    return out


def supports_disjoint(xi: TestFunctionSpec, cutoff: CutoffSpec) -> bool:
    return all(p is None or _overlap(p.support, cutoff.support) is None for p in xi.components)


def cross_kernel_batch(tau, X, xi: TestFunctionSpec, cutoff: CutoffSpec) -> np.ndarray:
    """G_nu(tau, X; xi) for arrays: tau shape S, X shape S + (3,); returns S + (3,)."""
    X = np.asarray(X, dtype=float)
    tau = np.broadcast_to(np.asarray(tau, float), X.shape[:-1])
    out = np.zeros(X.shape)
    if supports_disjoint(xi, cutoff):
        return out
    r = np.linalg.norm(X, axis=-1)
    safe = np.where(r > 0, r, 1.0)
    xh = np.where((r > 0)[..., None], X / safe[..., None], 0.0)
    comps = cross_components(tau, r, xi, cutoff)
    for mu, c in enumerate(comps):
        if c is None:
            continue
        A, B = c
        out[..., mu] += A
        out += (B * xh[..., mu])[..., None] * xh
    return out


def cross_kernel(tau: float, X, xi: TestFunctionSpec, cutoff: CutoffSpec) -> np.ndarray:
    """G_nu(tau, X; xi) = 1/2 int sum_mu xi^_mu phi^/sqrt(omega) D_{mu nu} e^{-ik.X} e^{-|tau| omega} dk."""
    return cross_kernel_batch(np.asarray(tau, float), np.asarray(X, float)[None, :], xi, cutoff)[0]


# -- tabulation ---------------------------------------------------------------

_MAGIC = b"SRPFKT01"
_HEADER = struct.Struct("<8sQQddQdddQ")


class KernelTable:
    """Tabulated a(tau, r), b(tau, r) with bicubic spline interpolation.

    ``kind`` is "projected" (the pair potential W) or "scalar" (the
    unprojected E-space kernel, b = 0).  Immutable after construction.
    """

    def __init__(self, cutoff, tau_grid, r_grid, a, b, kind="projected", certified_error=float("nan")):
        self.cutoff = cutoff
        self.tau_grid = np.asarray(tau_grid, float)
        self.r_grid = np.asarray(r_grid, float)
        self.a = np.asarray(a, float)
        self.b = np.asarray(b, float)
        self.kind = kind
        self.certified_error = certified_error
        for arr in (self.tau_grid, self.r_grid, self.a, self.b):
            arr.flags.writeable = False
        self._sa = RectBivariateSpline(self.tau_grid, self.r_grid, self.a, kx=3, ky=3, s=0)
        self._sb = RectBivariateSpline(self.tau_grid, self.r_grid, self.b, kx=3, ky=3, s=0)
        # per-tau envelope of |a| + |b| for optional truncation
        self.tau_envelope = np.max(np.abs(self.a) + np.abs(self.b), axis=1)

    @property
    def tau_max(self) -> float:
        return float(self.tau_grid[-1])

    @property
    def r_max(self) -> float:
        return float(self.r_grid[-1])

    @property
    def a00(self) -> float:
        return float(self.a[0, 0])

    def check_coverage(self, tau, r):
        tmax = float(np.max(np.abs(tau))) if np.size(tau) else 0.0
        rmax = float(np.max(r)) if np.size(r) else 0.0
        if tmax > self.tau_max * (1 + 1e-12) or rmax > self.r_max * (1 + 1e-12):
            raise TableCoverageExceeded(
                f"need tau <= {tmax:.4g}, r <= {rmax:.4g}; table covers tau <= {self.tau_max:.4g}, r <= {self.r_max:.4g}")

    def components(self, tau, r, check=True):
        tau = np.abs(np.asarray(tau, float))
        r = np.asarray(r, float)
        if check:
            self.check_coverage(tau, r)
        shape = np.broadcast(tau, r).shape
        tau, r = np.broadcast_to(tau, shape).ravel(), np.broadcast_to(r, shape).ravel()
        a = self._sa.ev(tau, r)
        b = self._sb.ev(tau, r) if self.kind == "projected" else np.zeros(tau.shape)
        # exact values where isotropy fixes them: b(tau, 0) = 0 and the stored a(0, 0)
        at_r0 = r == 0.0
        b[at_r0] = 0.0
        a[at_r0 & (tau == 0.0)] = self.a00
        return a.reshape(shape), b.reshape(shape)

    def matrix(self, tau, X) -> np.ndarray:
        X = np.asarray(X, float)
        r = float(np.linalg.norm(X))
        a, b = self.components(tau, r)
        out = float(a) * np.eye(D)
        if r > 0:
            xh = X / r
            out += float(b) * np.outer(xh, xh)
        return out

    def to_bytes(self) -> bytes:
        code, param, norm = self.cutoff.descriptor()
        head = _HEADER.pack(_MAGIC, self.tau_grid.size, self.r_grid.size, self.tau_max, self.r_max,
                            code, param, norm, self.certified_error, 0 if self.kind == "projected" else 1)
        buf = io.BytesIO()
        buf.write(head)
        buf.write(self.a.astype("<f8").tobytes(order="C"))
        buf.write(self.b.astype("<f8").tobytes(order="C"))
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "KernelTable":
        magic, nt, nr, tmax, rmax, code, param, norm, err, kind = _HEADER.unpack_from(data, 0)
        if magic != _MAGIC:
            raise ValueError("not a kernel table")
        off = _HEADER.size
        a = np.frombuffer(data, "<f8", nt * nr, off).reshape(nt, nr)
        b = np.frombuffer(data, "<f8", nt * nr, off + 8 * nt * nr).reshape(nt, nr)
        cutoff = CutoffSpec("sharp", lam=param, norm=norm) if code == 0 else CutoffSpec("gaussian", sigma=param, norm=norm)
        return cls(cutoff, np.linspace(0, tmax, nt), np.linspace(0, rmax, nr), a.copy(), b.copy(),
                   "projected" if kind == 0 else "scalar", err)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "KernelTable":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def direct_components(tau: float, r: float, cutoff: CutoffSpec, kind: str = "projected"):
    """(a, b) at one point by adaptive quadrature (independent of the Gauss-Legendre path)."""
    lo, hi = cutoff.support
    pref = 0.5 * FOUR_PI if kind == "projected" else FOUR_PI

    def f(k, which):
        z = k * r
        base = cutoff.phi_hat(k) ** 2 * k * math.exp(-k * tau)
        if which == "a":
            j1z = float(_j1_over_z(np.array(z)))
            return base * (float(spherical_jn(0, z)) - j1z)
        if which == "s":
            return base * float(spherical_jn(0, z))
        return base * float(spherical_jn(2, z))

    lim = 200 + int(4 * hi * max(r, 1.0))
    if kind == "projected":
        a, _ = integrate.quad(f, lo, hi, args=("a",), limit=lim, epsabs=1e-15, epsrel=1e-12)
        b, _ = integrate.quad(f, lo, hi, args=("b",), limit=lim, epsabs=1e-15, epsrel=1e-12)
        return pref * a, pref * b
    s, _ = integrate.quad(f, lo, hi, args=("s",), limit=lim, epsabs=1e-15, epsrel=1e-12)
    return pref * s, 0.0


def build_kernel_table(cutoff: CutoffSpec, tau_max: float, r_max: float, spacing: Optional[float] = None,
                       kind: str = "projected", audit_points: int = 1000, audit_seed: int = 0,
                       tolerance: float = 1e-6) -> KernelTable:
    """Tabulate the kernel and certify it against direct quadrature.

    ``spacing`` defaults to ``0.08 / k_scale`` in both directions.  The audit
    error is ``max |interp - direct|`` over random points divided by
    ``|a(0, 0)|``, the kernel's sup; pointwise relative error is meaningless
    at the kernel's zeros.  Raises :class:`AuditFailed` above ``tolerance``.
    """
    h = spacing if spacing is not None else 0.08 / cutoff.k_scale
    nt = max(4, int(math.ceil(tau_max / h)) + 1)
    nr = max(4, int(math.ceil(r_max / h)) + 1)
    tg, rg = np.linspace(0.0, tau_max, nt), np.linspace(0.0, r_max, nr)
    T, R = np.meshgrid(tg, rg, indexing="ij")
    if kind == "projected":
        a, b = pair_components(T, R, cutoff)
    elif kind == "scalar":
        a, b = scalar_kernel(T, R, cutoff), np.zeros_like(T)
    else:
        raise ValueError(f"unknown table kind {kind!r}")
    table = KernelTable(cutoff, tg, rg, a, b, kind)
    if audit_points:
        err = audit_table(table, audit_points, audit_seed)
        if not err < tolerance:
            raise AuditFailed(f"interpolation error {err:.3g} exceeds {tolerance:.3g}")
        table = KernelTable(cutoff, tg, rg, a, b, kind, err)
    return table


def audit_table(table: KernelTable, n_points: int = 1000, seed: int = 0) -> float:
    gen = np.random.default_rng(seed)
    taus = gen.uniform(0, table.tau_max, n_points)
    rs = gen.uniform(0, table.r_max, n_points)
    ia, ib = table.components(taus, rs)
    scale = abs(table.a00)
    worst = 0.0
    for t_, r_, a_, b_ in zip(taus, rs, ia, ib):
        da, db = direct_components(float(t_), float(r_), table.cutoff, table.kind)
        worst = max(worst, abs(a_ - da) / scale, abs(b_ - db) / scale)
    return worst
