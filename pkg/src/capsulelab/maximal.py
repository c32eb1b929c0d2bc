"""Classical and streamwise maximal functions, weak-L^p estimates.

The suprema over radii and time windows are taken on finite log-spaced grids,
so every computed maximal value underestimates the continuous one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .fields import DomainError, FlowMap, VectorField, gradient_energy
from .geometry import Capsule, QuadratureSpec, ball_rule, capsule_rule, dilate

Array = np.ndarray
ScalarFn = Callable[[Array], Array]

CHUNK = 1_000_000


@dataclass(frozen=True)
class MaximalConfig:
    """Discretisation of the suprema.

    Radii are log-spaced on [r_min, r_max] (n_r points); windows on
    [s_min, T] (n_s points) with T = ``horizon`` unless a caller supplies one.
    Ball averages use the product Gauss rule of order ``ball_order``.
    ``flow_steps`` fixes the number of RK4 steps per side of a trajectory;
    ``None`` uses the step size of the flow map.  ``horizon_cap`` bounds the
    horizon 4L/U used by the construction when U is small.
    """

    r_min: float = 1e-3
    r_max: float = 1e2
    n_r: int = 60
    s_min: float = 1e-3
    n_s: int = 60
    horizon: float = 1.0
    horizon_cap: float = 10.0
    ball_order: int = 4
    flow_steps: int | None = None
    flow_h: float = 1e-3

    def __post_init__(self):
        if not (0 < self.r_min <= self.r_max):
            raise ValueError(f"need 0 < r_min <= r_max, got {self.r_min}, {self.r_max}")
        if not (0 < self.s_min):
            raise ValueError(f"need s_min > 0, got {self.s_min}")
        if self.n_r < 1 or self.n_s < 1:
            raise ValueError("grid sizes must be >= 1")
        if not self.horizon > 0 or not self.horizon_cap > 0:
            raise ValueError("horizons must be positive")
        if self.ball_order < 1:
            raise ValueError("ball_order must be >= 1")
        if self.flow_steps is not None and self.flow_steps < 1:
            raise ValueError("flow_steps must be >= 1")

    def radii(self) -> Array:
        return np.geomspace(self.r_min, self.r_max, self.n_r)

    def windows(self, T: float | None = None) -> Array:
        T = self.horizon if T is None else T
        if T < self.s_min:
            return np.array([T])
        return np.geomspace(self.s_min, T, self.n_s)

    def with_(self, **changes) -> "MaximalConfig":
        return replace(self, **changes)


def _points(x) -> Array:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise ValueError(f"points must have trailing dimension 3, got shape {x.shape}")
    return x


def classical_maximal(f: ScalarFn, x, cfg: MaximalConfig | None = None) -> Array:
    """max over the radius grid of the average of |f| on B_r(x).

    Accepts a single point or an array (..., 3) of points.
    """
    cfg = cfg or MaximalConfig()
    x = _points(x)
    flat = x.reshape(-1, 3)
    pts, w = ball_rule(cfg.ball_order)
    offsets = cfg.radii()[:, None, None] * pts[None, :, :]  # (n_r, m, 3)
    per_point = offsets.shape[0] * offsets.shape[1]
    batch = max(1, CHUNK // per_point)
    out = np.empty(len(flat))
    for start in range(0, len(flat), batch):
        xs = flat[start:start + batch]
        y = xs[:, None, None, :] + offsets[None]
        vals = np.abs(np.asarray(f(y.reshape(-1, 3)), dtype=float)).reshape(y.shape[:-1])
        out[start:start + batch] = np.max(vals @ w, axis=1)
    return out.reshape(x.shape[:-1])


def _window_averages(taus: Array, g: Array, windows: Array) -> Array:
    """Exact averages over [-s, s] of the piecewise-linear interpolant of g.

    ``taus`` are symmetric equispaced nodes (2n+1,), ``g`` has shape
    (2n+1, N).  Returns (n_s, N).
    """
    dt = taus[1] - taus[0] if len(taus) > 1 else 1.0
    cum = np.concatenate([np.zeros((1,) + g.shape[1:]), np.cumsum(0.5 * dt * (g[1:] + g[:-1]), axis=0)])

    def primitive(t: float) -> Array:
        pos = (t - taus[0]) / dt
        k = int(min(max(math.floor(pos), 0), len(taus) - 2))
        frac = pos - k
        gt = g[k] * (1.0 - frac) + g[k + 1] * frac
        return cum[k] + 0.5 * frac * dt * (g[k] + gt)

    out = np.empty((len(windows),) + g.shape[1:])
    for i, s in enumerate(windows):
        out[i] = (primitive(s) - primitive(-s)) / (2.0 * s)
    return out


def _trajectory_steps(flow_map: FlowMap, T: float, cfg: MaximalConfig) -> int:
    if cfg.flow_steps is not None:
        return cfg.flow_steps
    return max(flow_map.n_steps(T), 1)


def streamwise_from_values(taus: Array, values: Array, windows: Array) -> Array:
    """Streamwise maximal value from |f| sampled on trajectory nodes."""
    return np.max(_window_averages(taus, np.abs(values), windows), axis=0)


def streamwise_maximal(
    f: ScalarFn,
    flow_map: FlowMap,
    x,
    cfg: MaximalConfig | None = None,
    horizon: float | None = None,
) -> Array:
    """max over the window grid of (1/2s) * int_{-s}^{s} |f(Phi_tau x)| dtau."""
    cfg = cfg or MaximalConfig()
    T = cfg.horizon if horizon is None else horizon
    x = _points(x)
    flat = x.reshape(-1, 3)
    n = _trajectory_steps(flow_map, T, cfg)
    taus, traj = flow_map.trajectory(flat, T, n)
    vals = np.asarray(f(traj.reshape(-1, 3)), dtype=float).reshape(traj.shape[:-1])
    return streamwise_from_values(taus, vals, cfg.windows(T)).reshape(x.shape[:-1])


def composite_maximal(
    field: VectorField,
    x,
    cfg: MaximalConfig | None = None,
    horizon: float | None = None,
    flow_map: FlowMap | None = None,
) -> Array:
    """Pointwise M_Phi[M(|grad u|^2)](x)."""
    cfg = cfg or MaximalConfig()
    flow_map = flow_map or FlowMap(field, cfg.flow_h)
    energy = gradient_energy(field)
    return streamwise_maximal(lambda y: classical_maximal(energy, y, cfg), flow_map, x, cfg, horizon)


def xi_tilde_squared(
    field: VectorField,
    c: Capsule,
    cfg: MaximalConfig | None = None,
    q: QuadratureSpec | None = None,
    horizon: float | None = None,
) -> float:
    """Capsule average of M_Phi[M(|grad u|^2)]."""
    q = q or QuadratureSpec.gauss(3)
    pts, w = capsule_rule(c, q)
    if len(w) == 0:
        raise ValueError("quadrature produced no nodes inside the capsule")
    vals = composite_maximal(field, pts, cfg, horizon)
    return float(np.sum(w * vals) / np.sum(w))


# ---------------------------------------------------------------------------
# weak L^p


@dataclass(frozen=True)
class WeakNormEstimate:
    p: float
    thresholds: Array
    measures: Array
    estimate: float
    samples: int
    box_volume: float

    @property
    def argmax(self) -> float:
        if len(self.thresholds) == 0:
            return float("nan")
        return float(self.thresholds[np.argmax(self.thresholds * self.measures ** (1.0 / self.p))])

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "thresholds": self.thresholds.tolist(),
            "measures": self.measures.tolist(),
            "estimate": self.estimate,
            "samples": self.samples,
            "box_volume": self.box_volume,
        }


def _box(box) -> tuple[Array, Array]:
    b = np.asarray(box, dtype=float)
    if b.shape == (2, 3):
        lo, hi = b
    elif b.shape == (6,):
        lo, hi = b[0::2], b[1::2]
    else:
        raise ValueError("box must be (lo, hi) 3-vectors or (xmin, xmax, ymin, ymax, zmin, zmax)")
    if np.any(hi <= lo) or not np.all(np.isfinite(b)):
        raise ValueError(f"degenerate or unbounded box {box}")
    return lo, hi


def weak_norm_from_values(values: Array, p: float, thresholds: Sequence[float], box_volume: float) -> WeakNormEstimate:
    """Weak-L^p quasi-norm from uniform samples of f over a region of known volume."""
    if not p > 0:
        raise ValueError(f"exponent must be positive, got {p}")
    alphas = np.sort(np.asarray(thresholds, dtype=float))
    if alphas.size == 0:
        raise ValueError("threshold grid is empty")
    values = np.asarray(values, dtype=float).ravel()
    # count of values > alpha via sorted search: identical sample set for all alpha
    srt = np.sort(values)
    counts = len(srt) - np.searchsorted(srt, alphas, side="right")
    measures = box_volume * counts / max(len(srt), 1)
    est = float(np.max(alphas * measures ** (1.0 / p))) if len(srt) else 0.0
    return WeakNormEstimate(float(p), alphas, measures, max(est, 0.0), len(srt), float(box_volume))


def weak_norm(
    f: ScalarFn,
    p: float,
    box,
    thresholds: Sequence[float],
    samples: int = 1_000_000,
    seed: int = 0,
) -> WeakNormEstimate:
    """Monte Carlo estimate of sup_alpha alpha |{x in box : f(x) > alpha}|^{1/p}."""
    if samples < 1:
        raise ValueError("need at least one sample")
    if len(thresholds) == 0:
        raise ValueError("threshold grid is empty")
    lo, hi = _box(box)
    rng = np.random.default_rng(seed)
    pts = lo + (hi - lo) * rng.random((samples, 3))
    vol = float(np.prod(hi - lo))
    return weak_norm_from_values(f(pts), p, thresholds, vol)


# ---------------------------------------------------------------------------
# streamline proximity and the Dirichlet comparison


def uniform_ball(center, R: float, n: int, seed: int = 0) -> Array:
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = R * rng.random(n) ** (1.0 / 3.0)
    return np.asarray(center, dtype=float) + r[:, None] * d


def lens_fraction(d: float, R: float) -> float:
    """|B_R(0) cap B_R(d e1)| / |B_R| = 1 - 3d/(4R) + d^3/(16 R^3) for d <= 2R."""
    if d >= 2 * R:
        return 0.0
    t = abs(d) / R
    return 1.0 - 0.75 * t + t**3 / 16.0


def streamline_proximity(flow_map: FlowMap, R: float, t0: float, t1: float, U: float, n: int = 10_000, seed: int = 0) -> float:
    """Fraction of B_R(t0 e1) carried into B_R(t1 e1) by the flow over time (t1-t0)/U."""
    if not U > 0:
        raise ValueError("streamline proximity needs U > 0")
    if n < 1000:
        raise ValueError("need at least 1000 samples")
    pts = uniform_ball((t0, 0.0, 0.0), R, n, seed)
    try:
        moved = flow_map.flow(pts, (t1 - t0) / U)
    except DomainError as err:
        raise DomainError(f"{err} ({err.exit_fraction} of samples outside)", err.exit_time, err.exit_fraction) from None
    d = moved - np.array([t1, 0.0, 0.0])
    inside = np.einsum("ij,ij->i", d, d) < R * R
    return float(np.mean(inside))


@dataclass(frozen=True)
class DirichletComparison:
    numerator: float
    denominator: float
    ratio: float | None
    degenerate: bool
    bound: float

    @property
    def bounded(self) -> bool:
        return self.degenerate or (self.ratio is not None and self.ratio <= self.bound)


def dirichlet_comparison(
    field: VectorField,
    c: Capsule,
    cfg: MaximalConfig | None = None,
    q: QuadratureSpec | None = None,
    bound: float = 20.0,
    horizon: float | None = None,
    tiny: float = 1e-300,
) -> DirichletComparison:
    """Average of |grad u|^2 over 2c against the capsule average of M_Phi[M(|grad u|^2)] on c."""
    q = q or QuadratureSpec.gauss(3)
    pts, w = capsule_rule(dilate(c, 2.0), q)
    num = float(np.sum(w * gradient_energy(field)(pts)) / np.sum(w))
    den = xi_tilde_squared(field, c, cfg, q, horizon)
    if den <= tiny:
        return DirichletComparison(num, den, None, True, bound)
    return DirichletComparison(num, den, num / den, False, bound)


def strong_type_ratio(
    f: ScalarFn,
    flow_map: FlowMap,
    box,
    cfg: MaximalConfig | None = None,
    p: float = 2.0,
    resolution: int = 24,
    speed: float = 0.0,
) -> tuple[float, float, float]:
    """(||M_Phi f||_p, ||f||_p, ratio) by midpoint quadrature.

    The box should contain supp f; it is enlarged by speed * horizon on every
    side so the maximal function's support is captured.
    """
    cfg = cfg or MaximalConfig()
    lo, hi = _box(box)
    pad = speed * cfg.horizon
    lo, hi = lo - pad, hi + pad
    axes = [lo[i] + (np.arange(resolution) + 0.5) * (hi[i] - lo[i]) / resolution for i in range(3)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    cell = float(np.prod((hi - lo) / resolution))
    fv = np.abs(f(pts))
    mv = streamwise_maximal(f, flow_map, pts, cfg)
    nf = float((cell * np.sum(fv**p)) ** (1.0 / p))
    nm = float((cell * np.sum(mv**p)) ** (1.0 / p))
    return nm, nf, nm / nf if nf > 0 else float("nan")
