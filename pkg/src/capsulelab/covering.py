"""Greedy Vitali-type selection over finite capsule families."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .construction import CapsuleParams, find_capsule
from .fields import VectorField
from .geometry import (
    Capsule,
    CapsuleArrays,
    QuadratureSpec,
    boundary_samples,
    contains,
    gauge,
    segment_distance,
    volume,
)
from .maximal import MaximalConfig, WeakNormEstimate, _box, weak_norm_from_values

Array = np.ndarray


@dataclass
class CoverSelection:
    selected: list[int]
    iterations: int
    disjoint: bool
    elimination_verified: bool
    unexplained: list[int] = field(default_factory=list)
    K: float | None = None

    def to_dict(self) -> dict:
        return {
            "selected": self.selected,
            "iterations": self.iterations,
            "disjoint": self.disjoint,
            "elimination_verified": self.elimination_verified,
            "unexplained": self.unexplained,
            "K": self.K,
        }


def _pair_distances(arr: CapsuleArrays, rows: Array, cols: Array) -> Array:
    P, Q = arr.endpoints()
    return segment_distance(P[rows][:, None], Q[rows][:, None], P[cols][None], Q[cols][None])


def vitali_select(family: Sequence[Capsule]) -> CoverSelection:
    """Repeatedly keep a capsule of maximal remaining radius and drop everything it meets.

    The pick always has radius > half the current supremum; ties go to the
    lowest index.  Each pass removes at least the pick itself.
    """
    arr = CapsuleArrays.from_capsules(family)
    n = len(arr)
    P, Q = arr.endpoints()
    active = np.ones(n, dtype=bool)
    selected: list[int] = []
    iterations = 0
    while active.any():
        iterations += 1
        idx = np.flatnonzero(active)
        radii = arr.radii[idx]
        j = int(idx[np.argmax(radii)])  # argmax returns the first maximal entry
        selected.append(j)
        hit = segment_distance(P[j], Q[j], P[idx], Q[idx]) < arr.radii[j] + arr.radii[idx]
        hit[idx == j] = True
        active[idx[hit]] = False
    sel = np.array(selected, dtype=int)
    disjoint = True
    if len(sel) > 1:
        d = _pair_distances(arr, sel, sel)
        touch = d < arr.radii[sel][:, None] + arr.radii[sel][None]
        np.fill_diagonal(touch, False)
        disjoint = not bool(touch.any())
    unexplained = []
    if n:
        d = _pair_distances(arr, np.arange(n), sel)
        meets = d < arr.radii[:, None] + arr.radii[sel][None]
        big = arr.radii[sel][None] > 0.5 * arr.radii[:, None]
        unexplained = np.flatnonzero(~np.any(meets & big, axis=1)).tolist()
    return CoverSelection(selected, iterations, disjoint, not unexplained, unexplained)


@dataclass
class CoverageReport:
    K: float
    center_fraction: float
    sample_fraction: float
    uncovered_indices: list[int]
    uncovered_samples: list[list[float]]
    empirical_K: float

    def to_dict(self) -> dict:
        return self.__dict__.copy()


def coverage_check(selection: CoverSelection, family: Sequence[Capsule], K: float) -> CoverageReport:
    """Test each capsule's center and 26 boundary samples against the union of K-dilated picks."""
    if not K >= 1:
        raise ValueError(f"K must be >= 1, got {K}")
    chosen = [family[i] for i in selection.selected]
    n = len(family)
    if n == 0:
        return CoverageReport(K, 1.0, 1.0, [], [], 1.0)
    pts = np.stack([np.concatenate([c.c[None], boundary_samples(c)]) for c in family])  # (n, 27, 3)
    need = np.full(pts.shape[:2], np.inf)
    for c in chosen:
        need = np.minimum(need, gauge(c, pts))
    inside = need < K
    center_ok = inside[:, 0]
    bad = ~inside.all(axis=1)
    samples = pts[~inside]
    return CoverageReport(
        K=float(K),
        center_fraction=float(center_ok.mean()),
        sample_fraction=float(inside.mean()),
        uncovered_indices=np.flatnonzero(bad).tolist(),
        uncovered_samples=samples.tolist(),
        empirical_K=float(need.max()),
    )


def union_volume(family: Sequence[Capsule], samples: int = 200_000, seed: int = 0) -> float:
    """Monte Carlo measure of the union of the family over its bounding box."""
    if not family:
        return 0.0
    lo = np.min([c.c - c.L for c in family], axis=0)
    hi = np.max([c.c + c.L for c in family], axis=0)
    rng = np.random.default_rng(seed)
    pts = lo + (hi - lo) * rng.random((samples, 3))
    hit = np.zeros(samples, dtype=bool)
    for c in family:
        hit |= contains(c, pts)
    return float(np.prod(hi - lo) * hit.mean())


@dataclass(frozen=True)
class MeasureInequality:
    union: float
    dilated_sum: float
    K: float

    @property
    def holds(self) -> bool:
        return self.union <= self.dilated_sum


def measure_inequality(selection: CoverSelection, family: Sequence[Capsule], K: float, samples: int = 200_000, seed: int = 0) -> MeasureInequality:
    """|union of family| against sum over picks of |K c|."""
    dilated = sum(K**3 * volume(family[i]) for i in selection.selected)
    return MeasureInequality(union_volume(family, samples, seed), float(dilated), float(K))


@dataclass
class SuperlevelReport:
    estimate: WeakNormEstimate
    points: Array
    values: Array
    errors: dict[int, str]


def superlevel_weak_norm(
    field: VectorField,
    params: CapsuleParams | None,
    cfg: MaximalConfig | None,
    q: QuadratureSpec | None,
    box,
    p: float,
    samples: int = 64,
    seed: int = 0,
    thresholds: Sequence[float] | None = None,
) -> SuperlevelReport:
    """Weak-L^p quasi-norm of Xi~ from |S_alpha| = |{Xi~^2 > alpha}| on uniform box samples.

    With no threshold grid, alpha runs just below every distinct sampled
    value, which is where sup alpha |S_alpha|^{1/p} is approached.
    """
    lo, hi = _box(box)
    rng = np.random.default_rng(seed)
    pts = lo + (hi - lo) * rng.random((samples, 3))
    values = np.full(samples, np.nan)
    errors: dict[int, str] = {}
    for i, x in enumerate(pts):
        try:
            values[i] = find_capsule(field, x, params, cfg, q).xi ** 2
        except (ValueError, ArithmeticError) as err:
            errors[i] = f"{type(err).__name__}: {err}"
    good = values[np.isfinite(values)]
    if thresholds is None:
        distinct = np.unique(good[good > 0])
        thresholds = distinct * (1.0 - 1e-12) if distinct.size else np.array([1.0])
    vol = float(np.prod(hi - lo)) * (good.size / samples if samples else 0.0)
    est = weak_norm_from_values(good, p, thresholds, vol)
    return SuperlevelReport(est, pts, values, errors)
