"""Smooth 3D vector fields, their derivatives, and the incompressible flow map.

All evaluation accessors are vectorised: points have shape ``(..., 3)`` and
the gradient has shape ``(..., 3, 3)`` with ``grad[..., i, j] = du_i/dx_j``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

Array = np.ndarray
PointFn = Callable[[Array], Array]

GRID_MAGIC = b"VF3D"


class DomainError(ValueError):
    """A point (or a trajectory) left the domain of a gridded field."""

    def __init__(self, message: str, exit_time: float | None = None, exit_fraction: float | None = None):
        super().__init__(message)
        self.exit_time = exit_time
        self.exit_fraction = exit_fraction


def _as_points(x) -> Array:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise ValueError(f"points must have trailing dimension 3, got shape {x.shape}")
    return x


def _cross_matrix(k: Array) -> Array:
    """Matrix M with M @ y == np.cross(k, y)."""
    return np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])


def central_difference_gradient(evaluate: PointFn, x: Array, h: float) -> Array:
    x = _as_points(x)
    grad = np.empty(x.shape + (3,))
    for j in range(3):
        step = np.zeros(3)
        step[j] = h
        grad[..., :, j] = (evaluate(x + step) - evaluate(x - step)) / (2.0 * h)
    return grad


@dataclass(frozen=True)
class VectorField:
    """A smooth vector field with value and gradient accessors.

    ``gradient`` may be ``None``, in which case central differences with step
    ``h_fd`` are used.
    """

    name: str
    evaluate_fn: PointFn
    gradient_fn: PointFn | None = None
    params: Mapping[str, object] = field(default_factory=dict)
    divergence_free: bool = False
    decaying: bool = False
    lipschitz: float | None = None
    h_fd: float = 1e-4
    vorticity_fn: PointFn | None = None
    energy_fn: PointFn | None = None

    def __call__(self, x) -> Array:
        return self.evaluate(x)

    def evaluate(self, x) -> Array:
        return self.evaluate_fn(_as_points(x))

    def gradient(self, x) -> Array:
        x = _as_points(x)
        if self.gradient_fn is not None:
            return self.gradient_fn(x)
        return central_difference_gradient(self.evaluate_fn, x, self.h_fd)

    def curl(self, x) -> Array:
        return curl_from_gradient(self.gradient(x))

    def divergence(self, x) -> Array:
        return np.trace(self.gradient(x), axis1=-2, axis2=-1)

    def contains(self, x) -> Array:
        x = _as_points(x)
        return np.ones(x.shape[:-1], dtype=bool)


def curl_from_gradient(grad: Array) -> Array:
    return np.stack(
        [
            grad[..., 2, 1] - grad[..., 1, 2],
            grad[..., 0, 2] - grad[..., 2, 0],
            grad[..., 1, 0] - grad[..., 0, 1],
        ],
        axis=-1,
    )


def evaluate(field: VectorField, x) -> Array:
    return field.evaluate(x)


def gradient(field: VectorField, x) -> Array:
    return field.gradient(x)


def curl(field: VectorField, x) -> Array:
    return field.curl(x)


def gradient_energy(field: VectorField) -> PointFn:
    """Return the scalar function y -> |grad u(y)|^2 (Frobenius)."""

    if field.energy_fn is not None:
        return field.energy_fn

    def energy(y: Array) -> Array:
        g = field.gradient(y)
        return np.einsum("...ij,...ij->...", g, g)

    return energy


# ---------------------------------------------------------------------------
# analytic catalog


def constant(U: float = 1.0, direction=(1.0, 0.0, 0.0)) -> VectorField:
    e = np.asarray(direction, dtype=float)
    e = e / np.linalg.norm(e)
    value = U * e

    def ev(x):
        return np.broadcast_to(value, x.shape).copy()

    def gr(x):
        return np.zeros(x.shape + (3,))

    return VectorField(
        "constant", ev, gr, {"U": U, "direction": tuple(e)}, divergence_free=True, lipschitz=0.0
    )


def zero() -> VectorField:
    f = constant(0.0)
    return VectorField("zero", f.evaluate_fn, f.gradient_fn, {}, divergence_free=True, lipschitz=0.0)


def linear(matrix, offset=(0.0, 0.0, 0.0), name: str = "linear") -> VectorField:
    """u(x) = A x + c."""
    A = np.asarray(matrix, dtype=float)
    c = np.asarray(offset, dtype=float)

    def ev(x):
        return x @ A.T + c

    def gr(x):
        return np.broadcast_to(A, x.shape + (3,)).copy()

    return VectorField(
        name,
        ev,
        gr,
        {"matrix": A.tolist(), "offset": c.tolist()},
        divergence_free=bool(abs(np.trace(A)) == 0.0),
        lipschitz=float(np.linalg.norm(A, 2)),
    )


def shear(rate: float = 1.0) -> VectorField:
    """u = (rate * x2, 0, 0)."""
    A = np.zeros((3, 3))
    A[0, 1] = rate
    f = linear(A, name="shear")
    return VectorField(
        "shear", f.evaluate_fn, f.gradient_fn, {"rate": rate}, divergence_free=True, lipschitz=abs(rate)
    )


def rotation(omega=(0.0, 0.0, 1.0)) -> VectorField:
    """Rigid rotation u = omega x x."""
    w = np.asarray(omega, dtype=float)
    A = _cross_matrix(w)
    f = linear(A, name="rotation")
    return VectorField(
        "rotation",
        f.evaluate_fn,
        f.gradient_fn,
        {"omega": tuple(w)},
        divergence_free=True,
        lipschitz=float(np.linalg.norm(w)),
    )


def abc(A: float = 1.0, B: float = 1.0, C: float = 1.0) -> VectorField:
    """Arnold-Beltrami-Childress flow."""

    def ev(x):
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        return np.stack(
            [
                A * np.sin(x3) + C * np.cos(x2),
                B * np.sin(x1) + A * np.cos(x3),
                C * np.sin(x2) + B * np.cos(x1),
            ],
            axis=-1,
        )

    def gr(x):
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        g = np.zeros(x.shape + (3,))
        g[..., 0, 1] = -C * np.sin(x2)
        g[..., 0, 2] = A * np.cos(x3)
        g[..., 1, 0] = B * np.cos(x1)
        g[..., 1, 2] = -A * np.sin(x3)
        g[..., 2, 0] = -B * np.sin(x1)
        g[..., 2, 1] = C * np.cos(x2)
        return g

    return VectorField(
        "abc",
        ev,
        gr,
        {"A": A, "B": B, "C": C},
        divergence_free=True,
        lipschitz=float(math.sqrt(2.0) * max(abs(A), abs(B), abs(C)) * math.sqrt(3.0)),
    )


def _gaussian(y: Array, width: float) -> Array:
    return np.exp(-np.einsum("...i,...i->...", y, y) / (2.0 * width**2))


def gaussian_potential(amplitude: float = 1.0, width: float = 1.0, axis=(0.0, 0.0, 1.0), center=(0.0, 0.0, 0.0)) -> VectorField:
    """Vector potential psi(x) = amplitude * exp(-|x-c|^2 / 2 w^2) * k."""
    k = np.asarray(axis, dtype=float)
    c = np.asarray(center, dtype=float)

    def ev(x):
        g = _gaussian(x - c, width)
        return amplitude * g[..., None] * k

    def gr(x):
        y = x - c
        g = _gaussian(y, width)
        dg = -y * (g / width**2)[..., None]
        return amplitude * k[:, None] * dg[..., None, :]

    return VectorField(
        "gaussian_potential",
        ev,
        gr,
        {"amplitude": amplitude, "width": width, "axis": tuple(k), "center": tuple(c)},
        decaying=True,
    )


def gaussian_curl(amplitude: float = 1.0, width: float = 1.0, axis=(0.0, 0.0, 1.0), center=(0.0, 0.0, 0.0)) -> VectorField:
    """u = curl(psi) for the Gaussian vector potential: a swirl about ``axis``.

    u(x) = (amplitude * g / w^2) * k x (x - c), with g the Gaussian envelope.
    """
    k = np.asarray(axis, dtype=float)
    c = np.asarray(center, dtype=float)
    K = _cross_matrix(k)
    s2 = width**2

    def ev(x):
        y = x - c
        g = _gaussian(y, width)
        return (amplitude / s2) * g[..., None] * (y @ K.T)

    def gr(x):
        y = x - c
        g = _gaussian(y, width)
        ky = y @ K.T
        outer = ky[..., :, None] * y[..., None, :]
        return (amplitude / s2) * g[..., None, None] * (K - outer / s2)

    def vort(x):
        # curl curl psi = grad(div psi) - lap psi, written out for the Gaussian envelope
        y = x - c
        g = _gaussian(y, width)
        yk = y @ k
        yy = np.einsum("...i,...i->...", y, y)
        return amplitude * g[..., None] * (
            y * (yk / s2**2)[..., None] + k * (2.0 / s2 - yy / s2**2)[..., None]
        )

    def energy(x):
        # |K - (k x y) y^T / w^2|_F^2 = 2|k|^2 - 2|k x y|^2 / w^2 + |k x y|^2 |y|^2 / w^4
        y = x - c
        yy = np.einsum("...i,...i->...", y, y)
        kk = float(k @ k)
        ky2 = kk * yy - (y @ k) ** 2
        amp = amplitude / s2 * np.exp(-yy / (2.0 * s2))
        return amp * amp * (2.0 * kk - 2.0 * ky2 / s2 + ky2 * yy / s2**2)

    # sup |grad u| bound: |K| <= |k|, |k x y||y|/w^2 * g <= |k| * max_t t^2 e^{-t^2/2} = 2|k|/e
    lip = amplitude / s2 * float(np.linalg.norm(k)) * (1.0 + 2.0 / math.e)
    return VectorField(
        "gaussian_curl",
        ev,
        gr,
        {"amplitude": amplitude, "width": width, "axis": tuple(k), "center": tuple(c)},
        divergence_free=True,
        decaying=True,
        lipschitz=lip,
        vorticity_fn=vort,
        energy_fn=energy,
    )


def from_callables(name: str, evaluate_fn: PointFn, gradient_fn: PointFn | None = None, **flags) -> VectorField:
    return VectorField(name, evaluate_fn, gradient_fn, **flags)


@dataclass(frozen=True)
class FieldCatalogEntry:
    name: str
    factory: Callable[..., VectorField]
    parameters: Mapping[str, object]
    divergence_free: bool
    decaying: bool


CATALOG: dict[str, FieldCatalogEntry] = {
    "constant": FieldCatalogEntry("constant", constant, {"U": 1.0}, True, False),
    "zero": FieldCatalogEntry("zero", zero, {}, True, False),
    "shear": FieldCatalogEntry("shear", shear, {"rate": 1.0}, True, False),
    "rotation": FieldCatalogEntry("rotation", rotation, {"omega": (0.0, 0.0, 1.0)}, True, False),
    "abc": FieldCatalogEntry("abc", abc, {"A": 1.0, "B": 1.0, "C": 1.0}, True, False),
    "gaussian_curl": FieldCatalogEntry("gaussian_curl", gaussian_curl, {"amplitude": 1.0, "width": 1.0}, True, True),
    "gaussian_potential": FieldCatalogEntry("gaussian_potential", gaussian_potential, {"amplitude": 1.0, "width": 1.0}, False, True),
}


def make_field(name: str, **params) -> VectorField:
    try:
        entry = CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown field preset {name!r}; known: {sorted(CATALOG)}") from None
    return entry.factory(**params)


# ---------------------------------------------------------------------------
# gridded samples


class GridField(VectorField):
    """Trilinear interpolation of samples on a regular grid.

    ``values`` has shape (nz, ny, nx, 3); ``bounds`` is
    (xmin, xmax, ymin, ymax, zmin, zmax).
    """

    def __init__(self, values: Array, bounds, name: str = "grid", h_fd: float | None = None):
        values = np.ascontiguousarray(values, dtype=float)
        if values.ndim != 4 or values.shape[-1] != 3:
            raise ValueError("grid values must have shape (nz, ny, nx, 3)")
        nz, ny, nx, _ = values.shape
        if min(nx, ny, nz) < 2:
            raise ValueError("grid needs at least two nodes per axis")
        b = tuple(float(v) for v in bounds)
        lo = np.array([b[0], b[2], b[4]])
        hi = np.array([b[1], b[3], b[5]])
        if np.any(hi <= lo):
            raise ValueError(f"degenerate grid bounds {b}")
        diameter = float(np.linalg.norm(hi - lo))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "bounds", b)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "shape", (nx, ny, nz))
        super().__init__(
            name=name,
            evaluate_fn=self._interpolate,
            gradient_fn=None,
            params={"shape": (nx, ny, nz), "bounds": b},
            h_fd=h_fd if h_fd is not None else 1e-4 * diameter,
        )

    def node(self, i: int, j: int, k: int) -> Array:
        return np.array([self.axis(0)[i], self.axis(1)[j], self.axis(2)[k]])

    def axis(self, d: int) -> Array:
        return np.linspace(self.lo[d], self.hi[d], self.shape[d])

    def contains(self, x) -> Array:
        x = _as_points(x)
        return np.all((x >= self.lo) & (x <= self.hi), axis=-1)

    def _interpolate(self, x: Array) -> Array:
        inside = self.contains(x)
        if not np.all(inside):
            bad = x[~inside].reshape(-1, 3)[0]
            raise DomainError(f"point {bad.tolist()} outside grid bounds {self.bounds}")
        n = np.array(self.shape)
        pos = (x - self.lo) / (self.hi - self.lo) * (n - 1)
        snapped = np.round(pos)
        pos = np.where(np.abs(pos - snapped) < 1e-9, snapped, pos)
        idx = np.clip(np.floor(pos).astype(int), 0, n - 2)
        t = pos - idx
        i, j, k = idx[..., 0], idx[..., 1], idx[..., 2]
        tx, ty, tz = t[..., 0:1], t[..., 1:2], t[..., 2:3]
        v = self.values
        c00 = v[k, j, i] * (1 - tx) + v[k, j, i + 1] * tx
        c10 = v[k, j + 1, i] * (1 - tx) + v[k, j + 1, i + 1] * tx
        c01 = v[k + 1, j, i] * (1 - tx) + v[k + 1, j, i + 1] * tx
        c11 = v[k + 1, j + 1, i] * (1 - tx) + v[k + 1, j + 1, i + 1] * tx
        c0 = c00 * (1 - ty) + c10 * ty
        c1 = c01 * (1 - ty) + c11 * ty
        return c0 * (1 - tz) + c1 * tz

    def gradient(self, x) -> Array:
        # one-sided near the faces so stencils never leave the box
        x = _as_points(x)
        h = self.h_fd
        grad = np.empty(x.shape + (3,))
        for j in range(3):
            step = np.zeros(3)
            step[j] = h
            plus = np.minimum(x + step, self.hi)
            minus = np.maximum(x - step, self.lo)
            span = (plus - minus)[..., j]
            grad[..., :, j] = (self._interpolate(plus) - self._interpolate(minus)) / span[..., None]
        return grad


def sample_to_grid(field: VectorField, bounds, shape) -> GridField:
    nx, ny, nz = shape
    b = [float(v) for v in bounds]
    xs = np.linspace(b[0], b[1], nx)
    ys = np.linspace(b[2], b[3], ny)
    zs = np.linspace(b[4], b[5], nz)
    Z, Y, X = np.meshgrid(zs, ys, xs, indexing="ij")
    pts = np.stack([X, Y, Z], axis=-1)
    return GridField(field.evaluate(pts), b, name=f"grid[{field.name}]")


def write_grid(path: str | Path, grid: GridField) -> None:
    """Binary layout: b"VF3D", 3 x uint32 dims, 6 x float64 bounds, then values.

    Values are little-endian float64, component fastest, then x, y, z.
    """
    nx, ny, nz = grid.shape
    with open(path, "wb") as fh:
        fh.write(GRID_MAGIC)
        fh.write(struct.pack("<3I", nx, ny, nz))
        fh.write(struct.pack("<6d", *grid.bounds))
        fh.write(grid.values.astype("<f8").tobytes(order="C"))


def read_grid(path: str | Path) -> GridField:
    data = Path(path).read_bytes()
    if data[:4] != GRID_MAGIC:
        raise ValueError(f"{path}: bad magic {data[:4]!r}, expected {GRID_MAGIC!r}")
    nx, ny, nz = struct.unpack_from("<3I", data, 4)
    bounds = struct.unpack_from("<6d", data, 16)
    count = 3 * nx * ny * nz
    expected = 64 + 8 * count
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(data)}")
    values = np.frombuffer(data, dtype="<f8", count=count, offset=64).reshape(nz, ny, nx, 3)
    return GridField(values.astype(float), bounds, name=Path(path).stem)


# ---------------------------------------------------------------------------
# flow map


@dataclass(frozen=True)
class FlowMap:
    """Fixed-step classical RK4 integration of dx/ds = u(x)."""

    field: VectorField
    h: float = 1e-3

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"flow step must be positive and finite, got {self.h}")

    def _check(self, x: Array, t: float) -> None:
        inside = self.field.contains(x)
        if not np.all(inside):
            frac = float(np.mean(~inside))
            raise DomainError(f"trajectory left field domain at s={t:g}", exit_time=t, exit_fraction=frac)

    def _step(self, x: Array, dt: float) -> Array:
        u = self.field.evaluate
        k1 = u(x)
        k2 = u(x + 0.5 * dt * k1)
        k3 = u(x + 0.5 * dt * k2)
        k4 = u(x + dt * k3)
        return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def n_steps(self, s: float) -> int:
        return int(math.ceil(abs(s) / self.h - 1e-9))

    def __call__(self, x, s: float) -> Array:
        return self.flow(x, s)

    def flow(self, x, s: float) -> Array:
        x = _as_points(x).copy()
        n = self.n_steps(s)
        if n == 0:
            return x
        dt = s / n
        for i in range(n):
            self._check(x, i * dt)
            try:
                x = self._step(x, dt)
            except DomainError as err:
                raise DomainError(str(err), exit_time=i * dt, exit_fraction=err.exit_fraction) from None
        self._check(x, s)
        return x

    def trajectory(self, x, T: float, n: int | None = None) -> tuple[Array, Array]:
        """Positions at times tau_k = k*T/n for k = -n..n.

        Returns (taus, points) with points of shape (2n+1, ..., 3).
        """
        x = _as_points(x)
        if n is None:
            n = max(self.n_steps(T), 1)
        dt = T / n
        out = np.empty((2 * n + 1,) + x.shape)
        out[n] = x
        fwd = x.copy()
        bwd = x.copy()
        for i in range(1, n + 1):
            self._check(fwd, (i - 1) * dt)
            self._check(bwd, -(i - 1) * dt)
            fwd = self._step(fwd, dt)
            bwd = self._step(bwd, -dt)
            out[n + i] = fwd
            out[n - i] = bwd
        self._check(out, T)
        taus = dt * np.arange(-n, n + 1)
        return taus, out

    def flow_with_jacobian(self, x, s: float) -> tuple[Array, Array]:
        """Integrate the variational equation dJ/ds = grad u(Phi) J alongside Phi."""
        x = _as_points(x).copy()
        J = np.broadcast_to(np.eye(3), x.shape + (3,)).copy()
        n = self.n_steps(s)
        if n == 0:
            return x, J
        dt = s / n
        u, g = self.field.evaluate, self.field.gradient

        def rhs(p, M):
            return u(p), g(p) @ M

        for _ in range(n):
            a1, b1 = rhs(x, J)
            a2, b2 = rhs(x + 0.5 * dt * a1, J + 0.5 * dt * b1)
            a3, b3 = rhs(x + 0.5 * dt * a2, J + 0.5 * dt * b2)
            a4, b4 = rhs(x + dt * a3, J + dt * b3)
            x = x + (dt / 6.0) * (a1 + 2 * a2 + 2 * a3 + a4)
            J = J + (dt / 6.0) * (b1 + 2 * b2 + 2 * b3 + b4)
        return x, J


def flow(flow_map: FlowMap, x, s: float) -> Array:
    return flow_map.flow(x, s)
