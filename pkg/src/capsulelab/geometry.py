"""Capsules (spherocylinders) and quadrature over them.

A capsule with center x, radius R, half-length L >= R and unit direction e is
the open set of points at distance < R from the core segment
[x - (L-R) e, x + (L-R) e].  When L == R it is the ball B_R(x).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Literal, Sequence

import numpy as np

Array = np.ndarray
ScalarFn = Callable[[Array], Array]


def _unit(v) -> Array:
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if not (n > 0 and math.isfinite(n)):
        raise ValueError(f"direction must be a nonzero finite vector, got {v}")
    return v / n


def orthonormal_frame(e) -> tuple[Array, Array, Array]:
    """Return (e, f1, f2), a right-handed orthonormal frame with first axis e."""
    e = _unit(e)
    helper = np.array([1.0, 0.0, 0.0]) if abs(e[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    f1 = np.cross(e, helper)
    f1 /= np.linalg.norm(f1)
    f2 = np.cross(e, f1)
    return e, f1, f2


@dataclass(frozen=True)
class Capsule:
    center: tuple[float, float, float]
    R: float
    L: float
    e: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        if len(c) != 3 or not all(math.isfinite(v) for v in c):
            raise ValueError(f"center must be a finite 3-vector, got {self.center}")
        R, L = float(self.R), float(self.L)
        if not (R > 0 and math.isfinite(R)):
            raise ValueError(f"radius must be positive, got {R}")
        if not (L >= R and math.isfinite(L)):
            raise ValueError(f"half-length must satisfy L >= R, got L={L}, R={R}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "e", tuple(float(v) for v in _unit(self.e)))

    @classmethod
    def ball(cls, center, R: float) -> "Capsule":
        return cls(tuple(center), R, R)

    @property
    def c(self) -> Array:
        return np.asarray(self.center)

    @property
    def axis(self) -> Array:
        return np.asarray(self.e)

    @property
    def core_half_length(self) -> float:
        return self.L - self.R

    @property
    def is_ball(self) -> bool:
        return self.L == self.R

    def endpoints(self) -> tuple[Array, Array]:
        d = self.core_half_length * self.axis
        return self.c - d, self.c + d

    def to_dict(self) -> dict:
        return {"center": list(self.center), "R": self.R, "L": self.L, "e": list(self.e)}

    @classmethod
    def from_dict(cls, d: dict) -> "Capsule":
        return cls(tuple(d["center"]), float(d["R"]), float(d["L"]), tuple(d.get("e", (1.0, 0.0, 0.0))))


def capsules_to_json(capsules: Iterable[Capsule]) -> str:
    return json.dumps([c.to_dict() for c in capsules], indent=1)


def capsules_from_json(text: str) -> list[Capsule]:
    return [Capsule.from_dict(d) for d in json.loads(text)]


# ---------------------------------------------------------------------------
# membership, distances


def _local_coords(c: Capsule, y) -> tuple[Array, Array]:
    """Axial coordinate and perpendicular distance of y relative to c."""
    d = np.asarray(y, dtype=float) - c.c
    a = d @ c.axis
    perp = d - a[..., None] * c.axis
    return a, np.sqrt(np.einsum("...i,...i->...", perp, perp))


def distance_to_core(c: Capsule, y) -> Array:
    a, rho = _local_coords(c, y)
    over = np.maximum(np.abs(a) - c.core_half_length, 0.0)
    return np.hypot(over, rho)


def contains(c: Capsule, y) -> Array:
    """Open-set membership: dist(y, core segment) < R."""
    return distance_to_core(c, y) < c.R


def gauge(c: Capsule, y) -> Array:
    """Smallest lam > 0 with y in the closure of lam*c (dilation about the center).

    So contains(scaled(c, lam), y) iff gauge(c, y) < lam.
    """
    a, rho = _local_coords(c, y)
    a = np.abs(a)
    R, D = c.R, c.core_half_length
    yy = a * a + rho * rho
    cap = rho * D < a * R
    disc = np.maximum(R * R * yy - D * D * rho * rho, 0.0)
    denom = a * D + np.sqrt(disc)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        lam_cap = np.where(denom > 0, yy / np.where(denom > 0, denom, 1.0), 0.0)
    return np.where(cap, lam_cap, rho / R)


def scaled(c: Capsule, lam: float) -> Capsule:
    """lam * c for any lam > 0 (same center and direction)."""
    if not lam > 0:
        raise ValueError(f"scale factor must be positive, got {lam}")
    return Capsule(c.center, lam * c.R, lam * c.L, c.e)


def dilate(c: Capsule, lam: float) -> Capsule:
    if not lam >= 1:
        raise ValueError(f"dilation factor must be >= 1, got {lam}")
    return scaled(c, lam)


def volume(c: Capsule) -> float:
    R = c.R
    return 4.0 / 3.0 * math.pi * R**3 + 2.0 * math.pi * R**2 * (c.L - R)


def _clamp01(v: Array) -> Array:
    return np.clip(v, 0.0, 1.0)


def segment_distance(p1, q1, p2, q2) -> Array:
    """Exact minimum distance between segments [p1,q1] and [p2,q2] (vectorised).

    Clamped minimisation of the quadratic |p1 + s d1 - p2 - t d2|^2 over the
    unit square, following the standard closest-point construction.
    """
    p1, q1, p2, q2 = (np.asarray(v, dtype=float) for v in (p1, q1, p2, q2))
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = np.einsum("...i,...i->...", d1, d1)
    e = np.einsum("...i,...i->...", d2, d2)
    f = np.einsum("...i,...i->...", d2, r)
    c = np.einsum("...i,...i->...", d1, r)
    b = np.einsum("...i,...i->...", d1, d2)
    tiny = 1e-300
    a_deg = a <= tiny
    e_deg = e <= tiny
    a_safe = np.where(a_deg, 1.0, a)
    e_safe = np.where(e_deg, 1.0, e)

    denom = a * e - b * b
    s_gen = np.where(denom > tiny * np.maximum(a * e, tiny), _clamp01((b * f - c * e) / np.where(denom > 0, denom, 1.0)), 0.0)
    t_gen = (b * s_gen + f) / e_safe
    s_gen = np.where(t_gen < 0, _clamp01(-c / a_safe), np.where(t_gen > 1, _clamp01((b - c) / a_safe), s_gen))
    t_gen = _clamp01(t_gen)

    s = np.where(a_deg, 0.0, np.where(e_deg, _clamp01(-c / a_safe), s_gen))
    t = np.where(a_deg, np.where(e_deg, 0.0, _clamp01(f / e_safe)), np.where(e_deg, 0.0, t_gen))
    diff = p1 + s[..., None] * d1 - (p2 + t[..., None] * d2)
    return np.sqrt(np.einsum("...i,...i->...", diff, diff))


def intersects(a: Capsule, b: Capsule) -> bool:
    pa, qa = a.endpoints()
    pb, qb = b.endpoints()
    return bool(segment_distance(pa, qa, pb, qb) < a.R + b.R)


@dataclass(frozen=True)
class CapsuleArrays:
    """Struct-of-arrays view of a capsule family for vectorised predicates."""

    centers: Array
    radii: Array
    half_lengths: Array
    directions: Array

    @classmethod
    def from_capsules(cls, family: Sequence[Capsule]) -> "CapsuleArrays":
        return cls(
            np.array([c.center for c in family], dtype=float).reshape(-1, 3),
            np.array([c.R for c in family], dtype=float),
            np.array([c.L for c in family], dtype=float),
            np.array([c.e for c in family], dtype=float).reshape(-1, 3),
        )

    def endpoints(self) -> tuple[Array, Array]:
        d = (self.half_lengths - self.radii)[:, None] * self.directions
        return self.centers - d, self.centers + d

    def __len__(self) -> int:
        return len(self.radii)


def intersects_many(c: Capsule, arrays: CapsuleArrays, idx: Array | None = None) -> Array:
    """intersects(c, family[i]) for all i (or for the subset idx)."""
    p, q = c.endpoints()
    P, Q = arrays.endpoints()
    radii = arrays.radii
    if idx is not None:
        P, Q, radii = P[idx], Q[idx], radii[idx]
    return segment_distance(p, q, P, Q) < c.R + radii


# ---------------------------------------------------------------------------
# chord length and the sliding-ball sandwich


def chord_length(R: float, l: float, x) -> Array:
    """Measure of {t in [-l, l] : x in B_R(t e1)} for l > R."""
    if not (l > R > 0):
        raise ValueError(f"chord_length needs l > R > 0, got R={R}, l={l}")
    x = np.asarray(x, dtype=float)
    rho2 = x[..., 1] ** 2 + x[..., 2] ** 2
    half = np.sqrt(np.maximum(R * R - rho2, 0.0))
    val = np.minimum(2.0 * half, np.maximum(half + l - np.abs(x[..., 0]), 0.0))
    return np.where(rho2 >= R * R, 0.0, val)


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureSpec:
    """How to integrate over a capsule.

    mode "mc": rejection Monte Carlo in the local bounding box (samples, seed).
    mode "grid": midpoint tensor grid in the local bounding box, keeping the
    cells whose centers are members (resolution per axis).
    mode "gauss": product Gauss rule on the cylinder plus the two caps
    (resolution = order).  Exact for low-degree polynomials, symmetric under
    reflection through the center, and continuous in (R, L).
    """

    mode: Literal["mc", "grid", "gauss"] = "mc"
    samples: int = 100_000
    seed: int = 0
    resolution: int | tuple[int, int, int] = 8

    def __post_init__(self):
        if self.mode not in ("mc", "grid", "gauss"):
            raise ValueError(f"unknown quadrature mode {self.mode!r}")
        if self.mode == "mc" and self.samples < 1:
            raise ValueError("Monte Carlo quadrature needs at least one sample")
        res = self.resolution if isinstance(self.resolution, tuple) else (self.resolution,) * 3
        if self.mode == "grid" and min(res) < 2:
            raise ValueError("tensor-grid resolution must be >= 2")
        if self.mode == "gauss" and min(res) < 1:
            raise ValueError("Gauss order must be >= 1")

    @classmethod
    def gauss(cls, order: int = 6) -> "QuadratureSpec":
        return cls(mode="gauss", resolution=order)

    @classmethod
    def mc(cls, samples: int = 100_000, seed: int = 0) -> "QuadratureSpec":
        return cls(mode="mc", samples=samples, seed=seed)

    @classmethod
    def grid(cls, resolution: int | tuple[int, int, int] = 32) -> "QuadratureSpec":
        return cls(mode="grid", resolution=resolution)


@lru_cache(maxsize=64)
def _gauss01(n: int) -> tuple[Array, Array]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=64)
def _hemisphere_rule(n: int) -> tuple[Array, Array]:
    """Unit half-ball {|y| < 1, y_1 > 0} in local (axial, f1, f2) coordinates."""
    r, wr = _gauss01(n)
    wr = wr * r**2
    mu, wmu = _gauss01(n)
    nphi = 2 * n
    phi = (np.arange(nphi) + 0.5) * (2.0 * math.pi / nphi)
    wphi = np.full(nphi, 2.0 * math.pi / nphi)
    R_, M_, P_ = np.meshgrid(r, mu, phi, indexing="ij")
    W = wr[:, None, None] * wmu[None, :, None] * wphi[None, None, :]
    s = np.sqrt(1.0 - M_**2)
    pts = np.stack([R_ * M_, R_ * s * np.cos(P_), R_ * s * np.sin(P_)], axis=-1)
    return pts.reshape(-1, 3), W.ravel()


@lru_cache(maxsize=64)
def _cylinder_rule(n: int) -> tuple[Array, Array]:
    """Unit cylinder {|t| < 1, rho < 1} in local coordinates."""
    t, wt = np.polynomial.legendre.leggauss(n)
    rho, wrho = _gauss01(n)
    wrho = wrho * rho
    nphi = 2 * n
    phi = (np.arange(nphi) + 0.5) * (2.0 * math.pi / nphi)
    wphi = np.full(nphi, 2.0 * math.pi / nphi)
    T_, P_, F_ = np.meshgrid(t, rho, phi, indexing="ij")
    W = wt[:, None, None] * wrho[None, :, None] * wphi[None, None, :]
    pts = np.stack([T_, P_ * np.cos(F_), P_ * np.sin(F_)], axis=-1)
    return pts.reshape(-1, 3), W.ravel()


def ball_rule(order: int) -> tuple[Array, Array]:
    """Points in the unit ball and weights summing to 1 (an averaging rule).

    Antipodally symmetric; exact for polynomials of degree <= 2*order - 1.
    """
    h, w = _hemisphere_rule(order)
    pts = np.concatenate([h, -h])
    wts = np.concatenate([w, w])
    return pts, wts / wts.sum()


def _to_world(c: Capsule, local: Array) -> Array:
    e, f1, f2 = orthonormal_frame(c.e)
    return c.c + local[..., 0:1] * e + local[..., 1:2] * f1 + local[..., 2:3] * f2


def capsule_rule(c: Capsule, q: QuadratureSpec) -> tuple[Array, Array]:
    """Quadrature nodes (n, 3) and weights (n,) with sum(weights) ~ volume(c)."""
    R, L, D = c.R, c.L, c.core_half_length
    if q.mode == "gauss":
        order = q.resolution if isinstance(q.resolution, int) else q.resolution[0]
        h, wh = _hemisphere_rule(order)
        front = h * R
        front[:, 0] += D
        parts = [front, -front]
        weights = [wh * R**3, wh * R**3]
        if D > 0:
            cyl, wc = _cylinder_rule(order)
            cyl = cyl * np.array([D, R, R])
            parts.append(cyl)
            weights.append(wc * D * R * R)
        return _to_world(c, np.concatenate(parts)), np.concatenate(weights)
    box = np.array([L, R, R])
    box_volume = 8.0 * L * R * R
    if q.mode == "mc":
        rng = np.random.default_rng(q.seed)
        local = rng.uniform(-1.0, 1.0, size=(q.samples, 3)) * box
        pts = _to_world(c, local)
        keep = contains(c, pts)
        return pts[keep], np.full(int(keep.sum()), box_volume / q.samples)
    res = q.resolution if isinstance(q.resolution, tuple) else (q.resolution,) * 3
    axes = [((np.arange(m) + 0.5) / m * 2.0 - 1.0) * b for m, b in zip(res, box)]
    local = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    pts = _to_world(c, local)
    keep = contains(c, pts)
    return pts[keep], np.full(int(keep.sum()), box_volume / float(np.prod(res)))


def integrate(c: Capsule, f: ScalarFn, q: QuadratureSpec | None = None) -> float:
    pts, w = capsule_rule(c, q or QuadratureSpec())
    if len(w) == 0:
        return 0.0
    return float(np.sum(w * f(pts)))


def average(c: Capsule, f: ScalarFn, q: QuadratureSpec | None = None) -> float:
    pts, w = capsule_rule(c, q or QuadratureSpec())
    if len(w) == 0:
        raise ValueError("quadrature produced no nodes inside the capsule")
    return float(np.sum(w * f(pts)) / np.sum(w))


def vector_average(c: Capsule, f: Callable[[Array], Array], q: QuadratureSpec | None = None) -> Array:
    pts, w = capsule_rule(c, q or QuadratureSpec())
    if len(w) == 0:
        raise ValueError("quadrature produced no nodes inside the capsule")
    return np.einsum("n,n...->...", w, f(pts)) / np.sum(w)


# ---------------------------------------------------------------------------
# boundary samples


def _unit_directions_26() -> Array:
    d = np.array([(i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1) if (i, j, k) != (0, 0, 0)], dtype=float)
    return d / np.linalg.norm(d, axis=1, keepdims=True)


DIRECTIONS_26 = _unit_directions_26()


def boundary_samples(c: Capsule, directions: Array | None = None, shrink: float = 1.0 - 1e-9) -> Array:
    """Points just inside the capsule surface, one per local-frame direction.

    Direction d (local coordinates, first axis along e) maps to the surface
    point center + (L-R) sign(d_1) e + R d, pulled toward the center by
    ``shrink`` so the open-set predicates count it as a member.
    """
    d = DIRECTIONS_26 if directions is None else np.asarray(directions, dtype=float)
    local = d * c.R
    local[:, 0] += np.sign(d[:, 0]) * c.core_half_length
    return _to_world(c, local * shrink)


def surface_samples(c: Capsule, n: int, seed: int = 0, shrink: float = 1.0 - 1e-9) -> Array:
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return boundary_samples(c, d, shrink)


def sandwich_check(
    f: ScalarFn,
    R: float,
    l: float,
    q: QuadratureSpec | None = None,
    t_order: int = 64,
    ball_order: int = 16,
) -> tuple[float, float, float]:
    """Return (lower, middle, upper) of the capsule sandwich inequality.

    middle = int_{-l}^{l} int_{B_R} f(x + t e1) dx dt, evaluated directly as an
    iterated integral; lower = (sqrt3 - 1)/2 * R * int over C_{R/2, l+R/2};
    upper = 2R * int over C_{R, l+R}.
    """
    q = q or QuadratureSpec.gauss(24)
    t, wt = np.polynomial.legendre.leggauss(t_order)
    t, wt = l * t, l * wt
    pts, wb = ball_rule(ball_order)
    ball_vol = 4.0 / 3.0 * math.pi * R**3
    shifted = pts[None, :, :] * R + t[:, None, None] * np.array([1.0, 0.0, 0.0])
    middle = float(np.sum(wt[:, None] * wb[None, :] * f(shifted)) * ball_vol)
    inner = Capsule((0.0, 0.0, 0.0), R / 2.0, l + R / 2.0)
    outer = Capsule((0.0, 0.0, 0.0), R, l + R)
    lower = (math.sqrt(3.0) - 1.0) / 2.0 * R * integrate(inner, f, q)
    upper = 2.0 * R * integrate(outer, f, q)
    return lower, middle, upper
