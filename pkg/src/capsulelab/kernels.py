"""Drift-Poisson fundamental solution, kernel bounds, Biot-Savart and a local estimate harness.

The kernel of b . grad G - nu Lap G = delta_0 with b = U e1 is

    G(x) = exp(-lam (r - x1)) / (4 pi nu r),   lam = U / (2 nu).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy import integrate as sp_integrate

from .geometry import Capsule, QuadratureSpec, capsule_rule, gauge, scaled

Array = np.ndarray
FOUR_PI = 4.0 * math.pi


class SingularityError(ValueError):
    pass


class AccuracyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class OseenKernel:
    nu: float = 1.0
    U: float = 0.0

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"viscosity must be positive, got {self.nu}")
        if not self.U >= 0:
            raise ValueError(f"drift speed must be non-negative, got {self.U}")

    @property
    def lam(self) -> float:
        return self.U / (2.0 * self.nu)

    @property
    def b(self) -> Array:
        return np.array([self.U, 0.0, 0.0])


def _prep(x) -> tuple[Array, Array]:
    x = np.asarray(x, dtype=float)
    r = np.sqrt(np.einsum("...i,...i->...", x, x))
    if np.any(r == 0):
        raise SingularityError("kernel is singular at the origin")
    return x, r


def r_minus_x1(x) -> Array:
    """r - x1 without cancellation: rho^2 / (r + x1) when x1 > 0."""
    x, r = _prep(x)
    x1 = x[..., 0]
    rho2 = x[..., 1] ** 2 + x[..., 2] ** 2
    safe = np.where(x1 > 0, r + x1, 1.0)
    return np.where(x1 > 0, rho2 / safe, r - x1)


def gamma(k: OseenKernel, x) -> Array:
    x, r = _prep(x)
    return np.exp(-k.lam * r_minus_x1(x)) / (FOUR_PI * k.nu * r)


def _log_gradient(k: OseenKernel, x: Array, r: Array) -> Array:
    """grad log G = -(1/r + lam) x/r + lam e1."""
    v = -((1.0 / r + k.lam) / r)[..., None] * x
    v[..., 0] += k.lam
    return v


def grad_gamma(k: OseenKernel, x) -> Array:
    x, r = _prep(x)
    return gamma(k, x)[..., None] * _log_gradient(k, x, r)


def hessian_gamma(k: OseenKernel, x) -> Array:
    """G (v v^T + Dv) with v = grad log G and

    Dv_ij = -delta_ij/r^2 + 2 x_i x_j / r^4 - lam (delta_ij / r - x_i x_j / r^3).
    """
    x, r = _prep(x)
    v = _log_gradient(k, x, r)
    eye = np.eye(3)
    xx = x[..., :, None] * x[..., None, :]
    r_ = r[..., None, None]
    Dv = -eye / r_**2 + 2.0 * xx / r_**4 - k.lam * (eye / r_ - xx / r_**3)
    return gamma(k, x)[..., None, None] * (v[..., :, None] * v[..., None, :] + Dv)


def laplacian_gamma(k: OseenKernel, x) -> Array:
    """Lap G via the (r, x1) chain rule: G_rr + (2/r) G_r + 2 (x1/r) G_r1 + G_11.

    With a = 1/r + lam: G_r = -a G, G_rr = (a^2 + 1/r^2) G, G_1 = lam G,
    G_11 = lam^2 G, G_r1 = -lam a G.
    """
    x, r = _prep(x)
    inv = 1.0 / r
    a = inv + k.lam
    lam = k.lam
    radial = (a * a + inv * inv) - 2.0 * a * inv
    mixed = lam * lam - 2.0 * lam * a * (x[..., 0] * inv)
    return gamma(k, x) * (radial + mixed)


def pde_residual(k: OseenKernel, x) -> Array:
    """b . grad G - nu Lap G at x != 0."""
    return k.U * grad_gamma(k, x)[..., 0] - k.nu * laplacian_gamma(k, x)


def relative_residual(k: OseenKernel, x) -> Array:
    """|b . grad G - nu Lap G| / (|b| |grad G| + nu |Lap G| + 1e-300)."""
    g = grad_gamma(k, x)
    lap = laplacian_gamma(k, x)
    res = k.U * g[..., 0] - k.nu * lap
    scale = k.U * np.linalg.norm(g, axis=-1) + k.nu * np.abs(lap) + 1e-300
    return np.abs(res) / scale


def gradient_bound(k: OseenKernel, x) -> Array:
    """(sqrt 2 / (4 pi nu)) r^{-3/2} (r - x1)^{-1/2}."""
    x, r = _prep(x)
    return math.sqrt(2.0) / (FOUR_PI * k.nu) * r**-1.5 * r_minus_x1(x) ** -0.5


def sphere_rule(n_mu: int, n_phi: int | None = None) -> tuple[Array, Array]:
    """Unit directions and weights on S^2 (sum of weights 4 pi)."""
    n_phi = n_phi or 2 * n_mu
    mu, wmu = np.polynomial.legendre.leggauss(n_mu)
    phi = (np.arange(n_phi) + 0.5) * (2.0 * math.pi / n_phi)
    M, P = np.meshgrid(mu, phi, indexing="ij")
    s = np.sqrt(1.0 - M**2)
    dirs = np.stack([M, s * np.cos(P), s * np.sin(P)], axis=-1).reshape(-1, 3)
    w = (wmu[:, None] * np.full(n_phi, 2.0 * math.pi / n_phi)[None]).ravel()
    return dirs, w


def delta_normalization(k: OseenKernel, r: float, order: int = 64) -> float:
    """int over the sphere |x| = r of nu G / r dsigma, by spherical quadrature of G."""
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r}")
    dirs, w = sphere_rule(order)
    vals = k.nu * gamma(k, r * dirs) / r
    return float(np.sum(w * vals) * r * r)


def mixed_norm_integrand(rho: Array, x1: float) -> Array:
    """2 pi (rho^2 + x1^2)^{-9/8} (r - x1)^{-3/4} rho."""
    r = np.sqrt(rho * rho + x1 * x1)
    d = rho * rho / (r + x1) if x1 > 0 else r - x1
    return 2.0 * math.pi * (rho * rho + x1 * x1) ** -1.125 * d**-0.75 * rho


def mixed_norm_bound(x1: float) -> float:
    """int over R^2 of [r^{-3/2} (r - x1)^{-1/2}]^{3/2} dx2 dx3 at fixed x1.

    Radial quadrature in rho = w^2, which removes the rho^{-1/2} endpoint
    singularity present for x1 > 0.
    """
    if x1 == 0:
        raise ValueError("the integral diverges at x1 = 0")
    scale = math.sqrt(abs(x1))

    def f(w):
        if w == 0.0:
            return 0.0 if x1 < 0 else 2.0 * math.pi * abs(x1) ** -2.25 * (2.0 * x1) ** 0.75 * 2.0
        return float(mixed_norm_integrand(np.array(w * w), x1)) * 2.0 * w

    parts = [(0.0, scale), (scale, 10.0 * scale), (10.0 * scale, 100.0 * scale)]
    total = 0.0
    for a, b in parts:
        total += sp_integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-13, limit=200)[0]
    total += sp_integrate.quad(f, 100.0 * scale, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)[0]
    return total


def exit_distance(R: float, D: float, mu: Array) -> Array:
    """Distance from the center to the surface of the capsule (radius R, core half-length D)
    along a direction at angle arccos(mu) to the axis."""
    mu = np.abs(np.asarray(mu, dtype=float))
    sin2 = np.maximum(1.0 - mu * mu, 0.0)
    sin = np.sqrt(sin2)
    with np.errstate(divide="ignore"):
        t_cyl = np.where(sin > 0, R / np.where(sin > 0, sin, 1.0), np.inf)
    cap = t_cyl * mu > D
    t_cap = D * mu + np.sqrt(np.maximum(R * R - D * D * sin2, 0.0))
    return np.where(cap, t_cap, t_cyl)


def capsule_kernel_norm(R: float, L: float | None = None, dilation: float = 3.0) -> float:
    """int over dilation*C of |y - center|^{-3/2} dy, C a capsule of radius R, half-length L.

    In spherical coordinates about the center the radial integral is exact:
    int_0^t s^{-3/2} s^2 ds = (2/3) t^{3/2}, leaving a smooth integral over mu
    (split where the exit ray moves from the cylinder to the cap).
    """
    L = R if L is None else L
    if not (R > 0 and L >= R):
        raise ValueError(f"need R > 0 and L >= R, got R={R}, L={L}")
    Rd, D = dilation * R, dilation * (L - R)
    mu_star = D / math.hypot(D, Rd) if D > 0 else 0.0

    def f(mu):
        return (2.0 / 3.0) * float(exit_distance(Rd, D, mu)) ** 1.5

    pieces = [(0.0, mu_star), (mu_star, 1.0)] if 0 < mu_star < 1 else [(0.0, 1.0)]
    half = sum(sp_integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=200)[0] for a, b in pieces if b > a)
    return 2.0 * 2.0 * math.pi * half


# ---------------------------------------------------------------------------
# cut-off and Biot-Savart


def _smooth_step(t: Array) -> Array:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def cutoff(c: Capsule, y, inner: float = 1.5, outer: float = 2.0) -> Array:
    """Smooth bump equal to 1 on inner*C and 0 outside outer*C (|grad| ~ 1/R)."""
    return 1.0 - _smooth_step((gauge(c, y) - inner) / (outer - inner))


def _support_box(c: Capsule, outer: float) -> tuple[Array, Array]:
    p, q = scaled(c, outer).endpoints()
    Rd = outer * c.R
    return np.minimum(p, q) - Rd, np.maximum(p, q) + Rd


def biot_savart(
    omega: Callable[[Array], Array],
    support: Capsule,
    x,
    q: QuadratureSpec | None = None,
    outer: float = 2.0,
) -> Array:
    """v(x) = (1/4 pi) int (phi omega)(y) x (x - y)/|x - y|^3 dy, phi the cut-off of ``support``.

    mode "gauss": polar coordinates about x, v = (1/4 pi) int_{S^2} int_0^rho
    (phi omega)(x - rho w) x w drho dw, which has a smooth integrand; the
    resolution (order) sets the Gauss points per direction and per unit of
    radial panel.  mode "grid": midpoint cells over the support box, skipping
    the cell containing x.  mode "mc": uniform samples in the support box.
    """
    q = q or QuadratureSpec.gauss(16)
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1, 3)
    src = _source(omega, support, outer)
    if q.mode == "gauss":
        out = _bs_polar(src, support, flat, q, outer)
    else:
        out = _bs_cells(src, support, flat, q, outer)
    return out.reshape(x.shape)


def _source(omega, support: Capsule, outer: float):
    def src(y):
        phi = cutoff(support, y, outer=outer)
        return phi[..., None] * omega(y)

    return src


def _bs_polar(src, support: Capsule, xs: Array, q: QuadratureSpec, outer: float) -> Array:
    order = q.resolution if isinstance(q.resolution, int) else q.resolution[0]
    dirs, wd = sphere_rule(order)
    extent = outer * support.L
    t, wt = np.polynomial.legendre.leggauss(order)
    n_panels = 4
    out = np.zeros_like(xs)
    for i, x in enumerate(xs):
        rho_max = float(np.linalg.norm(x - support.c)) + extent
        edges = np.linspace(0.0, rho_max, n_panels + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1:] - edges[:-1])
        rho = (mid[:, None] + half[:, None] * t[None]).ravel()
        wr = (half[:, None] * wt[None]).ravel()
        y = x - rho[:, None, None] * dirs[None, :, :]  # (n_rho, n_dir, 3)
        s = src(y.reshape(-1, 3)).reshape(y.shape)
        integrand = np.cross(s, dirs[None, :, :])
        out[i] = np.einsum("r,d,rdk->k", wr, wd, integrand) / FOUR_PI
    return out


def _bs_cells(src, support: Capsule, xs: Array, q: QuadratureSpec, outer: float) -> Array:
    lo, hi = _support_box(support, outer)
    if q.mode == "mc":
        rng = np.random.default_rng(q.seed)
        ys = lo + (hi - lo) * rng.random((q.samples, 3))
        w = float(np.prod(hi - lo)) / q.samples
        h = None
    else:
        res = q.resolution if isinstance(q.resolution, tuple) else (q.resolution,) * 3
        axes = [lo[d] + (np.arange(res[d]) + 0.5) * (hi[d] - lo[d]) / res[d] for d in range(3)]
        ys = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        h = (hi - lo) / np.array(res)
        w = float(np.prod(h))
        inside = np.any(np.all((xs >= lo) & (xs <= hi), axis=-1))
        if inside and float(np.max(h)) > support.R / 4:
            warnings.warn(
                f"Biot-Savart cell size {float(np.max(h)):.3g} exceeds R/4 near targets inside the support",
                AccuracyWarning,
                stacklevel=3,
            )
    s = src(ys)
    keep = np.any(s != 0, axis=-1)
    ys, s = ys[keep], s[keep]
    out = np.zeros_like(xs)
    for i, x in enumerate(xs):
        d = x - ys
        r2 = np.einsum("ij,ij->i", d, d)
        if h is not None:
            # drop the cell containing x; its symmetric kernel contributes ~0
            own = np.all(np.abs(d) <= 0.5 * h * (1 + 1e-12), axis=-1)
            r2 = np.where(own, np.inf, r2)
        with np.errstate(divide="ignore", invalid="ignore"):
            kern = np.where(np.isfinite(r2) & (r2 > 0), r2**-1.5, 0.0)
        out[i] = w * np.sum(np.cross(s, d) * kern[:, None], axis=0) / FOUR_PI
    return out


def gaussian_vorticity(width: float = 0.3, amplitude: float = 1.0, center=(0.0, 0.0, 0.0), axis=(0.0, 0.0, 1.0)) -> Callable[[Array], Array]:
    """A Gaussian blob times a fixed axis; not divergence-free, nonzero total circulation."""
    k = np.asarray(axis, dtype=float)
    c = np.asarray(center, dtype=float)

    def omega(y):
        d = y - c
        return amplitude * np.exp(-np.einsum("...i,...i->...", d, d) / (2 * width**2))[..., None] * k

    return omega


# ---------------------------------------------------------------------------
# local estimate harness


@dataclass(frozen=True)
class ManufacturedScalar:
    """theta with analytic gradient and Laplacian."""

    name: str
    value: Callable[[Array], Array]
    grad: Callable[[Array], Array]
    laplacian: Callable[[Array], Array]

    @classmethod
    def constant(cls, value: float = 1.0) -> "ManufacturedScalar":
        return cls(
            "constant",
            lambda y: np.full(np.shape(y)[:-1], float(value)),
            lambda y: np.zeros(np.shape(y)),
            lambda y: np.zeros(np.shape(y)[:-1]),
        )

    @classmethod
    def gaussian(cls, width: float = 0.5, center=(0.0, 0.0, 0.0), amplitude: float = 1.0) -> "ManufacturedScalar":
        c = np.asarray(center, dtype=float)
        s2 = width**2

        def val(y):
            d = y - c
            return amplitude * np.exp(-np.einsum("...i,...i->...", d, d) / (2 * s2))

        def grad(y):
            return -(y - c) / s2 * val(y)[..., None]

        def lap(y):
            d = y - c
            return val(y) * (np.einsum("...i,...i->...", d, d) / s2**2 - 3.0 / s2)

        return cls("gaussian", val, grad, lap)


@dataclass(frozen=True)
class LocalEstimateReport:
    q: float
    r: float
    lhs: float
    f_term: float
    g_term: float
    theta_term: float
    mode: str

    @property
    def rhs(self) -> float:
        return self.f_term + self.g_term + self.theta_term

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else math.inf

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d.update(rhs=self.rhs, ratio=self.ratio)
        return d


def _lp(values: Array, w: Array, p: float) -> float:
    return float(np.sum(w * np.abs(values) ** p) ** (1.0 / p))


def local_estimate_check(
    k: OseenKernel,
    c: Capsule,
    theta: ManufacturedScalar,
    q_exp: float,
    quad: QuadratureSpec | None = None,
    mode: Literal["f", "g"] = "f",
) -> LocalEstimateReport:
    """Both sides of ||theta||_{L^r(C/2)} <~ R||f||_q + ||g||_q + (UR/L + 1/R)||theta||_q.

    The drift is b = U e with e the capsule axis.  mode "f": g = 0 and
    f = b . grad theta - nu Lap theta.  mode "g": f = 0 and
    g = b theta - nu grad theta, whose divergence is the same forcing.
    """
    if not 1 < q_exp < 3:
        raise ValueError(f"exponent must lie in (1, 3), got {q_exp}")
    r_exp = 1.0 / (1.0 / q_exp - 1.0 / 3.0)
    quad = quad or QuadratureSpec.gauss(10)
    b = k.U * c.axis
    pts, w = capsule_rule(c, quad)
    half_pts, half_w = capsule_rule(scaled(c, 0.5), quad)
    th = theta.value(pts)
    if mode == "f":
        f = theta.grad(pts) @ b - k.nu * theta.laplacian(pts)
        g = np.zeros(len(w))
    elif mode == "g":
        f = np.zeros(len(w))
        g = np.linalg.norm(th[:, None] * b - k.nu * theta.grad(pts), axis=-1)
    else:
        raise ValueError(f"unknown forcing mode {mode!r}")
    R, L = c.R, c.L
    lhs = _lp(theta.value(half_pts), half_w, r_exp)
    return LocalEstimateReport(
        q=float(q_exp),
        r=r_exp,
        lhs=lhs,
        f_term=R * _lp(f, w, q_exp),
        g_term=_lp(g, w, q_exp),
        theta_term=(k.U * R / L + 1.0 / R) * _lp(th, w, q_exp),
        mode=mode,
    )


def g_mode_divergence(k: OseenKernel, c: Capsule, theta: ManufacturedScalar, y, h: float = 1e-5) -> tuple[Array, Array]:
    """(div g by central differences, b . grad theta - nu Lap theta) at y for g = b theta - nu grad theta."""
    b = k.U * c.axis
    y = np.asarray(y, dtype=float)

    def g(p):
        return theta.value(p)[..., None] * b - k.nu * theta.grad(p)

    div = np.zeros(y.shape[:-1])
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        div += (g(y + e)[..., j] - g(y - e)[..., j]) / (2 * h)
    return div, theta.grad(y) @ b - k.nu * theta.laplacian(y)
