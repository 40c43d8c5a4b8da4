"""Catalog of analytic parametric shapes and sampled interpolants.

Every ``embed`` is written with arithmetic and trigonometric functions only,
so it can be evaluated at complex parameters; derivatives are taken by the
complex-step method and are exact to rounding.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Axis:
    lo: float = 0.0
    hi: float = TWO_PI
    periodic: bool = True

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def nodes(self, n: int) -> np.ndarray:
        if self.periodic:
            return self.lo + self.length * np.arange(n) / n
        return np.linspace(self.lo, self.hi, n)

    def wrap(self, u):
        if self.periodic:
            return self.lo + np.mod(u - self.lo, self.length)
        return np.clip(u, self.lo, self.hi)

    def separation(self, a, b):
        d = np.abs(a - b)
        if self.periodic:
            d = np.minimum(d, self.length - d)
        return d


PERIODIC = Axis()
UNIT_INTERVAL = Axis(0.0, 1.0, periodic=False)


def _plane_embed(coord_dim, plane, center, c1, c2, extra=None):
    """Place in-plane coordinates (c1, c2) into R^coord_dim."""
    shape = np.broadcast(c1, c2).shape
    dtype = np.result_type(c1, c2, float)
    out = np.zeros(shape + (coord_dim,), dtype=dtype)
    out[..., plane[0]] = c1
    out[..., plane[1]] = c2
    if extra is not None:
        axis, value = extra
        out[..., axis] = value
    if center is not None:
        out = out + np.asarray(center, dtype=float)
    return out


@dataclass(frozen=True, eq=False)
class Shape:
    """Base class; subclasses define ``axes``, ``coord_dim`` and ``embed``."""

    def params(self) -> dict[str, Any]:
        raise NotImplementedError

    @property
    def param_dim(self) -> int:
        return len(self.axes)


@dataclass(frozen=True, eq=False)
class Circle(Shape):
    radius: float = 1.0
    coord_dim: int = 2
    center: tuple | None = None
    plane: tuple = (0, 1)
    name = "circle"

    @property
    def axes(self):
        return (PERIODIC,)

    def embed(self, u):
        t = u[..., 0]
        return _plane_embed(self.coord_dim, self.plane, self.center,
                            self.radius * np.cos(t), self.radius * np.sin(t))

    def params(self):
        return {"radius": self.radius, "dim": self.coord_dim, "center": self.center, "plane": list(self.plane)}


@dataclass(frozen=True, eq=False)
class Ellipse(Shape):
    a: float = 2.0
    b: float = 1.0
    coord_dim: int = 2
    center: tuple | None = None
    plane: tuple = (0, 1)
    name = "ellipse"

    @property
    def axes(self):
        return (PERIODIC,)

    def embed(self, u):
        t = u[..., 0]
        return _plane_embed(self.coord_dim, self.plane, self.center, self.a * np.cos(t), self.b * np.sin(t))

    def params(self):
        return {"a": self.a, "b": self.b, "dim": self.coord_dim, "center": self.center, "plane": list(self.plane)}


def _fourier(t, modes):
    total = 0.0
    for k, amp, phase in modes:
        total = total + amp * np.cos(k * t + phase)
    return total


@dataclass(frozen=True, eq=False)
class FourierCircle(Shape):
    """Circle with radius ``radius + sum a_k cos(k u + phi_k)``.

    In R^3 an optional height profile ``z_modes`` lifts the curve out of the
    plane.
    """

    radius: float = 1.0
    modes: tuple = ()
    z_modes: tuple = ()
    coord_dim: int = 2
    center: tuple | None = None
    name = "fourier_circle"

    @property
    def axes(self):
        return (PERIODIC,)

    def embed(self, u):
        t = u[..., 0]
        r = self.radius + _fourier(t, self.modes)
        extra = None
        if self.z_modes:
            extra = (2, _fourier(t, self.z_modes) + 0.0 * t)
        return _plane_embed(self.coord_dim, (0, 1), self.center, r * np.cos(t), r * np.sin(t), extra)

    def params(self):
        return {"radius": self.radius, "modes": [list(m) for m in self.modes],
                "z_modes": [list(m) for m in self.z_modes], "dim": self.coord_dim, "center": self.center}


@dataclass(frozen=True, eq=False)
class Torus(Shape):
    major: float = 2.0
    minor: float = 1.0
    center: tuple | None = None
    name = "torus"
    coord_dim = 3

    @property
    def axes(self):
        return (PERIODIC, PERIODIC)

    def embed(self, u):
        s, t = u[..., 0], u[..., 1]
        ring = self.major + self.minor * np.cos(t)
        out = np.stack([ring * np.cos(s), ring * np.sin(s), self.minor * np.sin(t) + 0.0 * s], axis=-1)
        if self.center is not None:
            out = out + np.asarray(self.center, dtype=float)
        return out

    def normal(self, u):
        """Analytic outward unit normal (used as a test oracle)."""
        s, t = u[..., 0], u[..., 1]
        return np.stack([np.cos(t) * np.cos(s), np.cos(t) * np.sin(s), np.sin(t)], axis=-1)

    def params(self):
        return {"major": self.major, "minor": self.minor, "center": self.center}


@dataclass(frozen=True, eq=False)
class Coil(Shape):
    """Toroidal helix winding ``turns`` times around a circle of radius ``major``."""

    major: float = 1.0
    minor: float = 0.05
    turns: int = 20
    name = "coil"
    coord_dim = 3

    @property
    def axes(self):
        return (PERIODIC,)

    def embed(self, u):
        t = u[..., 0]
        ring = self.major + self.minor * np.cos(self.turns * t)
        return np.stack([ring * np.cos(t), ring * np.sin(t), self.minor * np.sin(self.turns * t)], axis=-1)

    def params(self):
        return {"major": self.major, "minor": self.minor, "turns": self.turns}


@dataclass(frozen=True, eq=False)
class Segment(Shape):
    start: tuple = (0.0, 0.0)
    end: tuple = (1.0, 0.0)
    name = "segment"

    @property
    def coord_dim(self):
        return len(self.start)

    @property
    def axes(self):
        return (UNIT_INTERVAL,)

    def embed(self, u):
        t = u[..., 0:1]
        a = np.asarray(self.start, dtype=float)
        b = np.asarray(self.end, dtype=float)
        return a + t * (b - a)

    def params(self):
        return {"start": list(self.start), "end": list(self.end)}


@dataclass(frozen=True, eq=False)
class LatitudeCurve(Shape):
    """Curve on a sphere given as a latitude graph over the equator.

    Latitude ``height + sum a_k cos(k u + phi_k)``; ``height = 0`` with no
    modes is a great circle, a constant height a small circle.
    """

    height: float = 0.0
    modes: tuple = ()
    sphere_dim: int = 2
    radius: float = 1.0
    name = "latitude_curve"

    @property
    def coord_dim(self):
        return self.sphere_dim + 1

    @property
    def axes(self):
        return (PERIODIC,)

    def embed(self, u):
        t = u[..., 0]
        lat = self.height + _fourier(t, self.modes) + 0.0 * t
        return _plane_embed(self.coord_dim, (0, 1), None,
                            self.radius * np.cos(lat) * np.cos(t),
                            self.radius * np.cos(lat) * np.sin(t),
                            (2, self.radius * np.sin(lat)))

    def params(self):
        return {"height": self.height, "modes": [list(m) for m in self.modes],
                "sphere_dim": self.sphere_dim, "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Transformed(Shape):
    """Image of a shape under the affine isometry ``x -> A x + b``."""

    base: Shape
    matrix: np.ndarray
    offset: np.ndarray | None = None

    @property
    def name(self):
        return self.base.name

    @property
    def axes(self):
        return self.base.axes

    @property
    def coord_dim(self):
        return self.base.coord_dim

    def embed(self, u):
        out = self.base.embed(u) @ np.asarray(self.matrix).T
        if self.offset is not None:
            out = out + np.asarray(self.offset, dtype=float)
        return out

    def params(self):
        p = dict(self.base.params())
        p["isometry"] = {"matrix": np.asarray(self.matrix).tolist(),
                         "offset": None if self.offset is None else np.asarray(self.offset).tolist()}
        return p


def _trig_coefficients(values, axis_index):
    """Real cosine/sine coefficients of samples along a periodic axis."""
    n = values.shape[axis_index]
    c = np.moveaxis(np.fft.rfft(values, axis=axis_index), axis_index, 0) / n
    rows = [np.real(c[0])]
    for k in range(1, n // 2 + 1):
        if 2 * k == n:
            rows.append(np.real(c[k]))
        else:
            rows.extend([2.0 * np.real(c[k]), -2.0 * np.imag(c[k])])
    return np.moveaxis(np.stack(rows), 0, axis_index)


def _trig_basis(t, n, axis: Axis):
    """Cosine/sine rows matching :func:`_trig_coefficients`; analytic in t."""
    s = (t - axis.lo) * (TWO_PI / axis.length)
    cols = [np.ones_like(s)]
    for k in range(1, n // 2 + 1):
        if 2 * k == n:
            cols.append(np.cos(k * s))
        else:
            cols.extend([np.cos(k * s), np.sin(k * s)])
    return np.stack(cols, axis=-1)


def _lagrange_basis(t, n, axis: Axis):
    """Local 4-point Lagrange weights on an equispaced closed interval grid."""
    h = axis.length / (n - 1)
    s = (t - axis.lo) / h
    base = np.clip(np.floor(np.real(s)).astype(int) - 1, 0, max(n - 4, 0))
    weights = np.zeros(np.shape(t) + (n,), dtype=np.result_type(t, float))
    m = min(4, n)
    nodes = base[..., None] + np.arange(m)
    for a in range(m):
        w = 1.0
        for b in range(m):
            if a != b:
                w = w * (s - nodes[..., b]) / (nodes[..., a] - nodes[..., b])
        np.put_along_axis(weights, nodes[..., a:a + 1], w[..., None], axis=-1)
    return weights


@dataclass(frozen=True, eq=False)
class Sampled(Shape):
    """Interpolant through values on a parameter grid.

    Periodic axes use trigonometric interpolation, interval axes local cubic
    Lagrange interpolation. With ``radius`` set, the result is pushed
    radially onto the sphere of that radius.
    """

    values: np.ndarray
    axis_list: tuple
    radius: float | None = None
    label: str = "sampled"
    _coeffs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        coeffs = np.asarray(self.values, dtype=float)
        for i, axis in enumerate(self.axis_list):
            if axis.periodic:
                coeffs = _trig_coefficients(coeffs, i)
        object.__setattr__(self, "_coeffs", coeffs)

    @property
    def name(self):
        return self.label

    @property
    def axes(self):
        return tuple(self.axis_list)

    @property
    def coord_dim(self):
        return self.values.shape[-1]

    def embed(self, u):
        u = np.asarray(u)
        lead = u.shape[:-1]
        flat = u.reshape(-1, u.shape[-1])
        out = None
        for i, axis in enumerate(self.axis_list):
            n = self.values.shape[i]
            if axis.periodic:
                basis = _trig_basis(flat[:, i], n, axis)
            else:
                basis = _lagrange_basis(flat[:, i], n, axis)
            if out is None:
                out = np.tensordot(basis, self._coeffs, axes=([1], [0]))
            else:
                out = np.einsum("pk,pk...->p...", basis, out)
        out = out.reshape(lead + (self.coord_dim,))
        if self.radius is not None:
            out = self.radius * out / np.sqrt(np.sum(out * out, axis=-1, keepdims=True))
        return out

    def params(self):
        return {"interpolant": self.label, "grid": list(self.values.shape[:-1])}


CATALOG = {
    "circle": Circle,
    "ellipse": Ellipse,
    "fourier_circle": FourierCircle,
    "torus": Torus,
    "coil": Coil,
    "segment": Segment,
    "latitude_curve": LatitudeCurve,
}
