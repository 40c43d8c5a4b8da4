"""Closed-form riemannian kernels for Euclidean space and round spheres.

Points and tangent vectors are plain arrays in embedding coordinates
(``dim`` entries for Euclidean space, ``dim + 1`` for a sphere). All methods
broadcast over leading axes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BeyondInjectivity, DimensionMismatch
from .grassmann import Subspace

EUCLIDEAN = "euclidean"
SPHERE = "sphere"
MEMBERSHIP_TOL = 1e-10


def _dot(a, b):
    return np.sum(a * b, axis=-1, keepdims=True)


def _norm(a):
    return np.sqrt(_dot(a, a))


@dataclass(frozen=True)
class AmbientSpace:
    kind: str
    dim: int
    radius: float = 1.0

    def __post_init__(self):
        if self.kind not in (EUCLIDEAN, SPHERE):
            raise ValueError(f"unknown ambient kind {self.kind!r}")
        if self.dim < 2:
            raise ValueError("ambient dimension must be at least 2")
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @classmethod
    def euclidean(cls, dim: int) -> "AmbientSpace":
        return cls(EUCLIDEAN, dim)

    @classmethod
    def sphere(cls, dim: int, radius: float = 1.0) -> "AmbientSpace":
        return cls(SPHERE, dim, float(radius))

    @property
    def is_sphere(self) -> bool:
        return self.kind == SPHERE

    @property
    def coord_dim(self) -> int:
        return self.dim + 1 if self.is_sphere else self.dim

    @property
    def curvature_bound(self) -> float:
        """Bound on |sectional curvature| (exact for these models)."""
        return 1.0 / self.radius**2 if self.is_sphere else 0.0

    @property
    def injectivity_radius(self) -> float:
        return np.pi * self.radius if self.is_sphere else np.inf

    # -- membership ---------------------------------------------------------

    def check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.coord_dim:
            raise DimensionMismatch(f"expected {self.coord_dim} coordinates, got {x.shape[-1]}")
        if self.is_sphere and np.any(np.abs(_norm(x) - self.radius) > MEMBERSHIP_TOL * max(1.0, self.radius)):
            raise ValueError("point is not on the sphere")
        return x

    def project_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.is_sphere:
            return self.radius * x / _norm(x)
        return x

    def project_tangent(self, x, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.is_sphere:
            x = np.asarray(x, dtype=float)
            return v - _dot(x, v) / self.radius**2 * x
        return v

    def tangent_space(self, x) -> Subspace:
        """Orthonormal frame of T_xM in embedding coordinates."""
        if not self.is_sphere:
            return Subspace(np.eye(self.dim))
        x = np.asarray(x, dtype=float)
        u, _, _ = np.linalg.svd(x[:, None], full_matrices=True)
        return Subspace(u[:, 1:])

    # -- geometry -----------------------------------------------------------

    def distance(self, x, y) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if not self.is_sphere:
            d = np.linalg.norm(y - x, axis=-1)
        else:
            r2 = self.radius**2
            c = _dot(x, y)[..., 0] / r2
            # atan2 keeps full precision near 0 and near pi, where arccos does not
            s = np.linalg.norm(y - (c[..., None]) * x, axis=-1) / self.radius
            d = self.radius * np.arctan2(s, np.clip(c, -1.0, 1.0))
        return float(d) if np.ndim(d) == 0 else d

    def exp(self, x, v) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        if not self.is_sphere:
            return x + v
        R = self.radius
        nv = _norm(v)
        if np.any(nv >= np.pi * R):
            raise BeyondInjectivity("tangent vector longer than the injectivity radius")
        theta = nv / R
        safe = np.where(nv > 0, nv, 1.0)
        # sin(theta)/theta -> 1 as theta -> 0
        sinc = np.where(nv > 0, R * np.sin(theta) / safe, 1.0)
        y = np.cos(theta) * x + sinc * v
        return R * y / _norm(y)

    def log(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if not self.is_sphere:
            return y - x
        R = self.radius
        c = _dot(x, y) / R**2
        u = y - c * x
        nu = _norm(u)
        d = R * np.arctan2(nu / R, np.clip(c, -1.0, 1.0))
        if np.any((d >= np.pi * R * (1 - 1e-12)) | ((nu == 0) & (c < 0))):
            raise BeyondInjectivity("antipodal points have no unique minimizing geodesic")
        scale = np.where(nu > 0, d / np.where(nu > 0, nu, 1.0), 0.0)
        return scale * u

    def transport(self, x, y, v) -> np.ndarray:
        """Parallel transport of v from x to y along the minimizing geodesic."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        v = np.asarray(v, dtype=float)
        if not self.is_sphere:
            return np.broadcast_to(v, np.broadcast_shapes(v.shape, x.shape)).copy()
        R = self.radius
        u = self.log(x, y)
        d = _norm(u)
        e = u / np.where(d > 0, d, 1.0)
        theta = d / R
        along = _dot(e, v)
        return v + along * ((np.cos(theta) - 1.0) * e - np.sin(theta) * x / R)

    def transport_frame(self, x, y, frame: np.ndarray) -> np.ndarray:
        """Transport each column of an m x k frame from x to y."""
        return self.transport(x, y, np.asarray(frame).T).T

    def apply_isometry(self, matrix, offset, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = x @ np.asarray(matrix).T
        if offset is not None:
            out = out + offset
        return out


def exp_map(space: AmbientSpace, x, v):
    return space.exp(x, v)


def log_map(space: AmbientSpace, x, y):
    return space.log(x, y)


def parallel_transport(space: AmbientSpace, x, y, v):
    return space.transport(x, y, v)


def distance(space: AmbientSpace, x, y):
    return space.distance(x, y)
