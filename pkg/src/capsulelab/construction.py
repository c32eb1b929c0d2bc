"""Per-point capsule construction.

At a point x and radius R the ball average b = U e of u fixes the direction,
the length rule fixes L, and the capsule average Xi~^2 of M_Phi[M(|grad u|^2)]
closes the search equation

    standard:    Xi~ L^{1-delta} R^{1+delta} = eps0,   L = max(U R, 1)^{1/(1+sigma)} R
    alternative: Xi~ L R^{lambda}            = eps0,   L = max(U R^gamma, 1) R

whose smallest root on a log grid, refined by a bracketing solver, defines the
capsule at x.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np
from scipy.optimize import brentq

from .fields import VectorField
from .geometry import (
    Capsule,
    QuadratureSpec,
    boundary_samples,
    capsule_rule,
    gauge,
    intersects,
    surface_samples,
    vector_average,
)
from .maximal import MaximalConfig, xi_tilde_squared

Array = np.ndarray


class BracketError(ValueError):
    """The search function is already non-negative at the lower end of the bracket."""


class NumericError(ArithmeticError):
    def __init__(self, message: str, R: float):
        super().__init__(message)
        self.R = R


@dataclass(frozen=True)
class CapsuleParams:
    eps0: float = 0.01
    eps1: float = 1e-4
    delta: float = 5.0 / 12.0
    sigma: float = 5.0 / 12.0
    mode: Literal["standard", "alternative"] = "standard"
    gamma: float = 1.0
    lambda_exp: float = 1.0
    R_lo: float = 1e-3
    R_hi: float = 1e3
    n_scan: int = 200
    root_rtol: float = 1e-7
    max_iter: int = 200

    def __post_init__(self):
        if not 0 < self.eps0 < 1:
            raise ValueError(f"eps0 must lie in (0, 1), got {self.eps0}")
        if not 0 < self.eps1 < self.eps0:
            raise ValueError(f"eps1 must lie in (0, eps0), got {self.eps1}")
        if not 0 <= self.delta <= 5.0 / 12.0:
            raise ValueError(f"delta must lie in [0, 5/12], got {self.delta}")
        if not self.sigma >= self.delta:
            raise ValueError(f"sigma must be >= delta, got sigma={self.sigma}, delta={self.delta}")
        if self.mode not in ("standard", "alternative"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.lambda_exp >= 1:
            raise ValueError(f"lambda_exp must be >= 1, got {self.lambda_exp}")
        if not 0 <= self.gamma <= self.lambda_exp:
            raise ValueError(f"gamma must lie in [0, lambda_exp], got {self.gamma}")
        if not 0 < self.R_lo < self.R_hi:
            raise ValueError(f"need 0 < R_lo < R_hi, got [{self.R_lo}, {self.R_hi}]")
        if self.n_scan < 2:
            raise ValueError("scan grid needs at least two points")
        if not self.root_rtol > 0:
            raise ValueError("root tolerance must be positive")

    def with_(self, **changes) -> "CapsuleParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class ConstructedCapsule:
    point: tuple[float, float, float]
    capsule: Capsule
    U: float
    b: tuple[float, float, float]
    xi: float
    classification: Literal["round", "long"]
    residual: float
    unbounded: bool
    params: CapsuleParams

    @property
    def R(self) -> float:
        return self.capsule.R

    @property
    def L(self) -> float:
        return self.capsule.L

    @property
    def is_long(self) -> bool:
        return self.classification == "long"

    @property
    def implied_eps1(self) -> float:
        """eps1 for which Xi~ = eps1/(L R) (L/R)^delta holds at this capsule."""
        R, L = self.R, self.L
        return self.xi * L * R * (R / L) ** self.params.delta

    def to_dict(self) -> dict:
        return {
            "point": list(self.point),
            "capsule": self.capsule.to_dict(),
            "U": self.U,
            "b": list(self.b),
            "xi": self.xi,
            "classification": self.classification,
            "residual": self.residual,
            "unbounded": self.unbounded,
            "implied_eps1": self.implied_eps1,
        }


def average_velocity(field: VectorField, x, R: float, q: QuadratureSpec | None = None) -> tuple[float, Array]:
    """(|b|, b/|b|) for b the average of u over B_R(x); e = e1 when b = 0."""
    if not R > 0:
        raise ValueError(f"radius must be positive, got {R}")
    b = vector_average(Capsule.ball(tuple(np.asarray(x, dtype=float)), R), field.evaluate, q or QuadratureSpec.gauss(4))
    U = float(np.linalg.norm(b))
    if U == 0.0:
        return 0.0, np.array([1.0, 0.0, 0.0])
    return U, b / U


def length_rule(U: float, R: float, params: CapsuleParams) -> float:
    if U < 0 or not R > 0:
        raise ValueError(f"need U >= 0 and R > 0, got U={U}, R={R}")
    if params.mode == "standard":
        m = max(U * R, 1.0)
        return R if m == 1.0 else m ** (1.0 / (1.0 + params.sigma)) * R
    m = max(U * R**params.gamma, 1.0)
    return R if m == 1.0 else m * R


def _search_value(xi: float, L: float, R: float, params: CapsuleParams) -> float:
    if params.mode == "standard":
        return xi * L ** (1.0 - params.delta) * R ** (1.0 + params.delta) - params.eps0
    return xi * L * R**params.lambda_exp - params.eps0


@dataclass
class _Evaluation:
    R: float
    U: float
    b: Array
    e: Array
    L: float
    xi: float
    g: float


class _SearchFunction:
    """g(R) with memoisation so the returned capsule reuses the last evaluation."""

    def __init__(self, field, x, params, cfg, q):
        self.field, self.x, self.params, self.cfg, self.q = field, np.asarray(x, dtype=float), params, cfg, q
        self.cache: dict[float, _Evaluation] = {}

    def evaluate(self, R: float) -> _Evaluation:
        R = float(R)
        hit = self.cache.get(R)
        if hit is not None:
            return hit
        U, e = average_velocity(self.field, self.x, R, self.q)
        L = length_rule(U, R, self.params)
        T = min(4.0 * L / U, self.cfg.horizon_cap) if U > 0 else self.cfg.horizon_cap
        cap = Capsule(tuple(self.x), R, L, tuple(e))
        xi2 = xi_tilde_squared(self.field, cap, self.cfg, self.q, horizon=T)
        xi = math.sqrt(max(xi2, 0.0))
        g = _search_value(xi, L, R, self.params)
        if not math.isfinite(g):
            raise NumericError(f"search function not finite at R={R:g}", R)
        ev = _Evaluation(R, U, U * e, e, L, xi, g)
        self.cache[R] = ev
        return ev

    def __call__(self, R: float) -> float:
        return self.evaluate(R).g


def _classify(U: float, R: float, L: float) -> str:
    return "round" if L == R else "long"


def default_construction_config() -> tuple[MaximalConfig, QuadratureSpec]:
    """A coarse discretisation that keeps a single construction under a second or so."""
    cfg = MaximalConfig(r_min=1e-3, r_max=1e2, n_r=24, n_s=24, ball_order=2, flow_steps=8)
    return cfg, QuadratureSpec.gauss(2)


def find_capsule(
    field: VectorField,
    x,
    params: CapsuleParams | None = None,
    cfg: MaximalConfig | None = None,
    q: QuadratureSpec | None = None,
) -> ConstructedCapsule:
    params = params or CapsuleParams()
    dcfg, dq = default_construction_config()
    cfg, q = cfg or dcfg, q or dq
    x = np.asarray(x, dtype=float)
    g = _SearchFunction(field, x, params, cfg, q)
    grid = np.geomspace(params.R_lo, params.R_hi, params.n_scan)

    first = g.evaluate(grid[0])
    if first.g > 0:
        raise BracketError(f"search function positive at R_lo={grid[0]:g} (g={first.g:.3e}); lower the bracket")
    tol = params.root_rtol * params.eps0
    hit = first if first.g == 0 else None
    lo = first
    for R in grid[1:]:
        if hit is not None:
            break
        cur = g.evaluate(R)
        if cur.g >= 0:
            hit = _refine(g, lo.R, cur.R, tol, params.max_iter)
            break
        lo = cur

    if hit is None:
        ev = g.evaluate(grid[-1])
        return _result(x, ev, params, unbounded=True)
    return _result(x, hit, params, unbounded=False)


def _refine(g: _SearchFunction, a: float, b: float, tol: float, max_iter: int) -> _Evaluation:
    """Bracketed root of g on [a, b] (g(a) < 0 <= g(b)) with |g| <= tol if reachable."""
    if g(b) == 0.0:
        return g.evaluate(b)
    root = brentq(g, a, b, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=max_iter)
    best = g.evaluate(root)
    if abs(best.g) <= tol:
        return best
    # fall back to plain bisection if the solver stalled on a non-smooth g
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        if mid in (a, b):
            break
        ev = g.evaluate(mid)
        if abs(ev.g) < abs(best.g):
            best = ev
        if abs(ev.g) <= tol:
            break
        if ev.g < 0:
            a = mid
        else:
            b = mid
    return best


def _result(x: Array, ev: _Evaluation, params: CapsuleParams, unbounded: bool) -> ConstructedCapsule:
    cap = Capsule(tuple(x), ev.R, ev.L, tuple(ev.e))
    return ConstructedCapsule(
        point=tuple(float(v) for v in x),
        capsule=cap,
        U=ev.U,
        b=tuple(float(v) for v in ev.b),
        xi=ev.xi,
        classification=_classify(ev.U, ev.R, ev.L),
        residual=abs(ev.g),
        unbounded=unbounded,
        params=params,
    )


def synthetic_capsule(center, R: float, L: float, e=(1.0, 0.0, 0.0), U: float = 1.0, params: CapsuleParams | None = None) -> ConstructedCapsule:
    """A hand-made capsule record with b = U e, for checks that need no root search."""
    cap = Capsule(tuple(center), R, L, tuple(e))
    return ConstructedCapsule(
        point=cap.center,
        capsule=cap,
        U=float(U),
        b=tuple(float(U) * v for v in cap.e),
        xi=float("nan"),
        classification="round" if L == R else "long",
        residual=0.0,
        unbounded=False,
        params=params or CapsuleParams(),
    )


@dataclass
class Classification:
    results: list[ConstructedCapsule | None]
    errors: dict[int, str] = field(default_factory=dict)

    @property
    def round(self) -> list[int]:
        return [i for i, r in enumerate(self.results) if r is not None and not r.unbounded and r.classification == "round"]

    @property
    def long(self) -> list[int]:
        return [i for i, r in enumerate(self.results) if r is not None and not r.unbounded and r.classification == "long"]

    @property
    def unbounded(self) -> list[int]:
        return [i for i, r in enumerate(self.results) if r is not None and r.unbounded]

    def constructed(self) -> list[ConstructedCapsule]:
        return [r for r in self.results if r is not None]


def classify_points(
    field: VectorField,
    points: Sequence,
    params: CapsuleParams | None = None,
    cfg: MaximalConfig | None = None,
    q: QuadratureSpec | None = None,
    workers: int = 1,
) -> Classification:
    """find_capsule at every point; per-point failures are collected, not raised."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)

    def one(i: int):
        try:
            return find_capsule(field, pts[i], params, cfg, q), None
        except (ValueError, ArithmeticError) as err:
            return None, f"{type(err).__name__}: {err}"

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(one, range(len(pts))))
    else:
        outs = [one(i) for i in range(len(pts))]
    result = Classification([o[0] for o in outs])
    for i, (_, err) in enumerate(outs):
        if err is not None:
            result.errors[i] = err
    return result


@dataclass(frozen=True)
class OscillationReport:
    sup: float
    bound: float
    normalized: float


def oscillation_check(field: VectorField, cc: ConstructedCapsule, q: QuadratureSpec | None = None) -> OscillationReport:
    """sup over capsule samples of |u - b|, divided by eps0 (R/L) U (long) or 1/R (round)."""
    c = cc.capsule
    nodes, _ = capsule_rule(c, q or QuadratureSpec.gauss(6))
    pts = np.concatenate([nodes, boundary_samples(c), surface_samples(c, 256, seed=1), c.c[None]])
    dev = field.evaluate(pts) - np.asarray(cc.b)
    sup = float(np.max(np.linalg.norm(dev, axis=-1)))
    if cc.is_long:
        bound = cc.params.eps0 * (c.R / c.L) * cc.U
    else:
        bound = 1.0 / c.R
    return OscillationReport(sup, bound, sup / bound if bound > 0 else math.inf)


@dataclass(frozen=True)
class ContainmentReport:
    K: float
    pairs_checked: int
    empirical_K: float
    failures: list[tuple[int, int, float]]


def containment_factor(outer: Capsule, inner: Capsule, samples: int = 256, seed: int = 0) -> float:
    """Smallest K (on samples of inner's surface) with inner inside K * outer."""
    pts = np.concatenate([boundary_samples(inner, shrink=1.0), surface_samples(inner, samples, seed, shrink=1.0)])
    return float(np.max(gauge(outer, pts)))


def capsule_property_check(family: Sequence[ConstructedCapsule], K: float, samples: int = 256) -> ContainmentReport:
    """For long x, z with intersecting capsules and R(z) <= 2 R(x), measure C_z within K C_x."""
    longs = [i for i, c in enumerate(family) if c.is_long]
    worst = 0.0
    checked = 0
    failures = []
    for i in longs:
        for j in longs:
            if i == j:
                continue
            cx, cz = family[i].capsule, family[j].capsule
            if cz.R > 2 * cx.R or not intersects(cx, cz):
                continue
            checked += 1
            need = containment_factor(cx, cz, samples)
            worst = max(worst, need)
            if need >= K:
                failures.append((i, j, need))
    return ContainmentReport(K, checked, worst, failures)
