"""Finite-dimensional Grassmannian geometry.

Subspaces are stored as orthonormal frames. Distances are the Finsler
(operator-norm) distance, i.e. the largest canonical angle, which also equals
``arcsin`` of the operator norm of the difference of the orthogonal
projections. Averaging is done on projections followed by spectral rounding.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    FullSpace,
    RankDeficient,
    SpectralGapTooSmall,
    WeightError,
)

ORTHO_TOL = 1e-10
RANK_TOL = 1e-8
GAP_THRESHOLD = 0.05
WEIGHT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Subspace:
    """A k-dimensional subspace of R^n given by an n x k orthonormal frame."""

    frame: np.ndarray

    def __post_init__(self):
        frame = np.array(self.frame, dtype=float)
        if frame.ndim == 1:
            frame = frame[:, None]
        if frame.ndim != 2 or frame.shape[1] < 1 or frame.shape[1] > frame.shape[0]:
            raise DimensionMismatch(f"frame must be n x k with 1 <= k <= n, got {frame.shape}")
        gram = frame.T @ frame
        if np.max(np.abs(gram - np.eye(frame.shape[1]))) > ORTHO_TOL:
            raise RankDeficient("frame columns are not orthonormal; use make_subspace")
        frame.setflags(write=False)
        object.__setattr__(self, "frame", frame)

    @property
    def ambient_dim(self) -> int:
        return self.frame.shape[0]

    @property
    def dim(self) -> int:
        return self.frame.shape[1]

    def transform(self, matrix: np.ndarray) -> "Subspace":
        """Image under an orthogonal map."""
        return make_subspace(np.asarray(matrix) @ self.frame)

    def contains(self, vector, tol: float = 1e-9) -> bool:
        v = np.asarray(vector, dtype=float)
        return bool(np.linalg.norm(v - self.frame @ (self.frame.T @ v)) <= tol * max(1.0, np.linalg.norm(v)))


@dataclass(frozen=True)
class AverageReport:
    result: Subspace
    spectral_gap: float
    max_member_distance: float


def make_subspace(vectors) -> Subspace:
    """Orthonormalize spanning columns.

    Raises RankDeficient when the smallest singular value is below
    ``1e-8`` times the largest.
    """
    a = np.asarray(vectors, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.shape[1] > a.shape[0]:
        raise RankDeficient(f"{a.shape[1]} vectors cannot be independent in R^{a.shape[0]}")
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s[0] == 0.0 or s[-1] <= RANK_TOL * s[0]:
        raise RankDeficient(f"singular values {s} fail the rank test")
    return Subspace(u)


def projection(F: Subspace) -> np.ndarray:
    return F.frame @ F.frame.T


def _check_pair(F: Subspace, F2: Subspace):
    if F.ambient_dim != F2.ambient_dim or F.dim != F2.dim:
        raise DimensionMismatch(
            f"subspaces of shape {F.frame.shape} and {F2.frame.shape} are not comparable"
        )


def canonical_angles(F: Subspace, F2: Subspace) -> np.ndarray:
    """Canonical angles sorted in descending order, each in [0, pi/2]."""
    _check_pair(F, F2)
    cosines = np.linalg.svd(F.frame.T @ F2.frame, compute_uv=False)
    by_cos = np.sort(np.arccos(np.clip(cosines, -1.0, 1.0)))[::-1]
    # arccos loses half the digits near 0; sines of small angles come from the
    # component of F2 orthogonal to F.
    residual = F2.frame - F.frame @ (F.frame.T @ F2.frame)
    sines = np.linalg.svd(residual, compute_uv=False)
    by_sin = np.sort(np.arcsin(np.clip(sines, 0.0, 1.0)))[::-1]
    angles = np.where(by_cos < np.pi / 4, by_sin, by_cos)
    return np.sort(angles)[::-1]


def finsler_distance(F: Subspace, F2: Subspace) -> float:
    """Largest canonical angle; equals ``arcsin ||P_F - P_F2||``."""
    return float(canonical_angles(F, F2)[0])


def complement(F: Subspace, within: Subspace | None = None) -> Subspace:
    """Orthogonal complement of F, optionally inside an enclosing subspace."""
    if within is None:
        if F.dim == F.ambient_dim:
            raise FullSpace("the complement of the whole space is zero-dimensional")
        u, _, _ = np.linalg.svd(F.frame, full_matrices=True)
        return Subspace(u[:, F.dim:])
    if within.ambient_dim != F.ambient_dim:
        raise DimensionMismatch("enclosing subspace lives in a different space")
    if F.dim >= within.dim:
        raise FullSpace("F fills the enclosing subspace")
    coeffs = within.frame.T @ F.frame
    u, _, _ = np.linalg.svd(coeffs, full_matrices=True)
    return make_subspace(within.frame @ u[:, F.dim:])


def graph_subspace(F: Subspace, u, perp: Subspace | None = None) -> Subspace:
    """Graph ``{x + u(x)}`` of a linear map u: F -> F-perp.

    ``u`` holds coefficients: column j is the image of ``F.frame[:, j]``
    written in the orthonormal frame ``perp`` of the complement (the
    complement from :func:`complement` when omitted).
    """
    if perp is None:
        perp = complement(F)
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if u.shape != (perp.dim, F.dim):
        raise DimensionMismatch(f"u must have shape {(perp.dim, F.dim)}, got {u.shape}")
    return make_subspace(F.frame + perp.frame @ u)


def _validate_members(members):
    if len(members) == 0:
        raise WeightError("at least one member is required")
    weights = np.array([w for w, _ in members], dtype=float)
    if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
        raise WeightError(f"weights must be positive, got {weights}")
    if abs(weights.sum() - 1.0) > WEIGHT_TOL:
        raise WeightError(f"weights sum to {weights.sum()!r}, not 1")
    first = members[0][1]
    for _, F in members[1:]:
        _check_pair(first, F)
    return weights


def average_subspaces(members: Sequence[tuple[float, Subspace]], gap_threshold: float = GAP_THRESHOLD) -> AverageReport:
    """Average by projections, then round to the span of eigenvalues above 1/2."""
    weights = _validate_members(members)
    k = members[0][1].dim
    pbar = sum(w * projection(F) for w, (_, F) in zip(weights, members))
    pbar = 0.5 * (pbar + pbar.T)
    evals, evecs = np.linalg.eigh(pbar)
    gap = float(np.min(np.abs(evals - 0.5)))
    if gap < gap_threshold:
        raise SpectralGapTooSmall(
            f"averaged projection has an eigenvalue within {gap:.3g} of 1/2", gap=gap
        )
    upper = evals > 0.5
    if int(upper.sum()) != k:
        raise SpectralGapTooSmall(
            f"{int(upper.sum())} eigenvalues exceed 1/2 but members have dimension {k}", gap=gap
        )
    result = Subspace(evecs[:, upper])
    spread = max(finsler_distance(F, result) for _, F in members)
    return AverageReport(result=result, spectral_gap=gap, max_member_distance=spread)


def pairwise_spread(subspaces: Sequence[Subspace]) -> float:
    """Largest Finsler distance between any two of the given subspaces."""
    best = 0.0
    for i in range(len(subspaces)):
        for j in range(i + 1, len(subspaces)):
            best = max(best, finsler_distance(subspaces[i], subspaces[j]))
    return best


def average_derivative_check(
    family: Callable[[float], Sequence[tuple[float, Subspace]]],
    mu0: float,
    h: float = 1e-5,
) -> tuple[float, float]:
    """Forward-difference speeds of the average and of the fastest member.

    Returns ``(lhs, rhs)`` with ``lhs`` the speed of the average at ``mu0``
    and ``rhs`` eight times the largest member speed.
    """
    before = family(mu0)
    after = family(mu0 + h)
    if len(before) != len(after):
        raise DimensionMismatch("family changed size along the parameter")
    avg0 = average_subspaces(before).result
    avg1 = average_subspaces(after).result
    lhs = finsler_distance(avg0, avg1) / h
    member_speed = max(finsler_distance(F0, F1) / h for (_, F0), (_, F1) in zip(before, after))
    return lhs, 8.0 * member_speed


def random_subspace(rng: np.random.Generator, n: int, k: int) -> Subspace:
    return make_subspace(rng.standard_normal((n, k)))


def random_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))
