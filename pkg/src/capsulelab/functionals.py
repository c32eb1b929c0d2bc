"""Line integrals, mean oscillation, stream moments and exponent arithmetic."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Callable, Union

import numpy as np

from .construction import ConstructedCapsule
from .geometry import Capsule, QuadratureSpec, capsule_rule

Array = np.ndarray
Number = Union[float, Fraction]


def line_integral(field: Callable[[Array], Array], x0, x1, n: int = 16, points: int = 8) -> float:
    """int u . dl along the straight segment x0 -> x1, with n Gauss-Legendre panels."""
    if n < 2:
        raise ValueError(f"need at least two panels, got {n}")
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    t, w = np.polynomial.legendre.leggauss(points)
    edges = np.linspace(0.0, 1.0, n + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    s = (mid[:, None] + half[:, None] * t[None]).ravel()
    ws = (half[:, None] * w[None]).ravel()
    d = x1 - x0
    pts = x0 + s[:, None] * d
    return float(np.sum(ws * (field(pts) @ d)))


def line_integral_comparability(field: Callable[[Array], Array], cc: ConstructedCapsule, n: int = 16) -> float:
    """Line integral over the capsule axis divided by 2 L U."""
    if not cc.is_long:
        raise ValueError("line-integral comparability needs a long capsule")
    c = cc.capsule
    e = c.axis
    return line_integral(field, c.c - c.L * e, c.c + c.L * e, n) / (2.0 * c.L * cc.U)


def _ball(x, R: float) -> Capsule:
    return Capsule.ball(tuple(np.asarray(x, dtype=float)), R)


def _centered(psi: Callable[[Array], Array], x, R: float, q: QuadratureSpec | None) -> tuple[Array, Array, Array]:
    pts, w = capsule_rule(_ball(x, R), q or QuadratureSpec.gauss(8))
    vals = np.asarray(psi(pts), dtype=float)
    mean = np.einsum("n,n...->...", w, vals) / np.sum(w)
    return pts, w, vals - mean


def mean_oscillation(psi: Callable[[Array], Array], x0, R: float, s: float = 2.0, q: QuadratureSpec | None = None) -> float:
    """(average over B_R(x0) of |psi - mean psi|^s)^{1/s}."""
    if not s >= 1:
        raise ValueError(f"exponent must be >= 1, got {s}")
    _, w, dev = _centered(psi, x0, R, q)
    mag = np.linalg.norm(dev.reshape(len(w), -1), axis=-1)
    return float((np.sum(w * mag**s) / np.sum(w)) ** (1.0 / s))


def stream_moment(psi: Callable[[Array], Array], x, R: float, e=(1.0, 0.0, 0.0), q: QuadratureSpec | None = None) -> float:
    """int over B_R(x) of (psi - mean psi) . (e x (y - x)) dy."""
    e = np.asarray(e, dtype=float)
    pts, w, dev = _centered(psi, x, R, q)
    arm = np.cross(e, pts - np.asarray(x, dtype=float))
    return float(np.sum(w * np.einsum("ni,ni->n", dev, arm)))


def curl_moment(u: Callable[[Array], Array], x, R: float, e=(1.0, 0.0, 0.0), q: QuadratureSpec | None = None) -> float:
    """int over B_R(x) of u(y) . ((y-x).e) (y-x) dy.

    For u = curl psi this equals stream_moment(psi, x, R, e) after
    integrating by parts; the boundary term vanishes on the sphere since
    ((y-x).e)(y-x) is normal there.
    """
    e = np.asarray(e, dtype=float)
    pts, w = capsule_rule(_ball(x, R), q or QuadratureSpec.gauss(8))
    y = pts - np.asarray(x, dtype=float)
    return float(np.sum(w * (y @ e) * np.einsum("ni,ni->n", u(pts), y)))


def constant_moment(U: float, R: float) -> float:
    """Exact curl moment of u = U e1 on B_R: U int y1^2 = (4 pi / 15) U R^5."""
    return 4.0 * math.pi / 15.0 * U * R**5


def moment_oscillation_bound(psi: Callable[[Array], Array], x, R: float, s: float = 1.0, e=(1.0, 0.0, 0.0), q: QuadratureSpec | None = None) -> tuple[float, float]:
    """(|stream moment|, |B_R| R osc_s): since |e x y| <= R on the ball and Jensen."""
    moment = stream_moment(psi, x, R, e, q)
    bound = 4.0 * math.pi / 3.0 * R**4 * mean_oscillation(psi, x, R, s, q)
    return abs(moment), bound


# ---------------------------------------------------------------------------
# exponents


def _exact(v) -> Number:
    if isinstance(v, (Fraction, Rational)) and not isinstance(v, bool):
        return Fraction(v)
    return float(v)


@dataclass(frozen=True)
class ExponentInputs:
    alpha: Number = Fraction(0)
    beta: Number = Fraction(0)
    s: Number = Fraction(2)
    delta: Number = Fraction(5, 12)
    sigma: Number = Fraction(5, 12)

    def __post_init__(self):
        for name in ("alpha", "beta", "s", "delta", "sigma"):
            object.__setattr__(self, name, _exact(getattr(self, name)))
        if not 0 <= self.alpha < 1:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not 0 <= self.beta < 1:
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")
        if not self.s >= 1:
            raise ValueError(f"s must be >= 1, got {self.s}")
        cap = Fraction(5, 12) if isinstance(self.delta, Fraction) else 5.0 / 12.0
        if not 0 <= self.delta <= cap:
            raise ValueError(f"delta must lie in [0, 5/12], got {self.delta}")
        if not self.sigma >= self.delta:
            raise ValueError("sigma must be >= delta")


TARGET = Fraction(9, 2)


@dataclass(frozen=True)
class Thresholds:
    p_alpha: Number
    p_alpha_sigma: Number
    p_beta: Number
    alpha_crit: Number
    beta_crit: Number

    def to_dict(self) -> dict:
        return {k: str(v) for k, v in self.__dict__.items()}


def thresholds(inputs: ExponentInputs) -> Thresholds:
    """Integrability exponents implied by the oscillation and line-integral hypotheses.

    p_alpha = 4 / (1 - alpha) is the sigma -> infinity limit of
    p_alpha_sigma = (4 + 2 alpha (1 - delta)/(1 + sigma)) / (1 - alpha);
    p_beta = (4 - 2 beta (delta + 1)/(2 + sigma)) / (1 - beta), which is
    (4 - 34 beta / 29)/(1 - beta) at delta = sigma = 5/12.  The critical
    values solve p = 9/2.
    """
    a, b, d, sg = inputs.alpha, inputs.beta, inputs.delta, inputs.sigma
    one = Fraction(1) if all(isinstance(v, Fraction) for v in (a, b, d, sg)) else 1.0
    target = TARGET if one == 1 and isinstance(one, Fraction) else float(TARGET)
    p_alpha = 4 * one / (one - a)
    p_alpha_sigma = (4 * one + 2 * a * (one - d) / (one + sg)) / (one - a)
    c = 2 * (d + one) / (2 * one + sg)
    p_beta = (4 * one - c * b) / (one - b)
    alpha_crit = (target - 4) / target
    beta_crit = (target - 4) / (target - c)
    return Thresholds(p_alpha, p_alpha_sigma, p_beta, alpha_crit, beta_crit)


def seregin_alpha(s: Number) -> Number:
    s = _exact(s)
    if not s > 3:
        raise ValueError(f"competitor exponents need s > 3, got {s}")
    return (s - 3) / (6 * (s - 1))


def chae_wolf_alpha(s: Number) -> Number:
    s = _exact(s)
    if not s > 3:
        raise ValueError(f"competitor exponents need s > 3, got {s}")
    one = Fraction(1) if isinstance(s, Fraction) else 1.0
    return min(one / 3 - one / s, one / 6)


def competitor_exponents(s: Number) -> dict[str, Number]:
    return {"seregin_alpha": seregin_alpha(s), "chae_wolf_alpha": chae_wolf_alpha(s)}


def seregin_crossover(a: Number = Fraction(1, 9)) -> Number:
    """s with (s - 3)/(6 (s - 1)) = a, i.e. s = (3 - 6a)/(1 - 6a)."""
    a = _exact(a)
    if not 0 <= a < Fraction(1, 6):
        raise ValueError("crossover exists only for 0 <= a < 1/6")
    return (3 - 6 * a) / (1 - 6 * a)


def chae_wolf_crossover(a: Number = Fraction(1, 9)) -> Number:
    """s with min(1/3 - 1/s, 1/6) = a, i.e. s = 1/(1/3 - a) for a < 1/6."""
    a = _exact(a)
    if not 0 <= a < Fraction(1, 6):
        raise ValueError("crossover exists only for 0 <= a < 1/6")
    one = Fraction(1) if isinstance(a, Fraction) else 1.0
    return one / (one / 3 - a)
