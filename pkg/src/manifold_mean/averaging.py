"""Center-of-mass averaging of nearby submanifolds.

The averaged submanifold is the zero set of the doubly projected gradient:
the weighted mean of the potential gradients, projected onto the average of
the members' vertical spaces and then onto the quasi-vertical space of a
reference member. It is located slice by slice over the reference member's
mesh with a Newton iteration in normal-slice coordinates.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import optimize

from .ambient import AmbientSpace
from .errors import (
    DimensionMismatch,
    EpsilonTooLarge,
    LeftTube,
    ManifoldMeanError,
    NoConvergence,
    NoSignChange,
    NotPositive,
    NotUnique,
    SliceFailure,
    WeightError,
)
from .grassmann import Subspace, average_subspaces, make_subspace
from .shapes import Sampled
from .submanifold import (
    FootpointResult,
    ParametricSubmanifold,
    c1_pointwise,
    gauss_extended,
    nearest_point,
    normal_space,
    refine_foot,
    slice_derivative,
)

log = logging.getLogger(__name__)

WEIGHT_TOL = 1e-12
C0_SLACK = 1e-8


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 50
    jacobian_step: float = 1e-4
    epsilon_max: float = 0.15
    r_max: float | None = None
    gap_threshold: float = 0.05
    workers: int = 1
    reference_check: bool = False


@dataclass(frozen=True, eq=False)
class WeightedFamily:
    """Finitely many weighted submanifolds of one ambient space.

    ``isometries`` is set for families built as an isometry orbit: entry i is
    the ``(matrix, offset)`` carrying the base shape onto member i.
    """

    members: tuple
    reference_index: int = 0
    isometries: tuple | None = None

    def __post_init__(self):
        members = tuple((float(w), N) for w, N in self.members)
        if not members:
            raise WeightError("a family needs at least one member")
        weights = np.array([w for w, _ in members])
        if np.any(weights <= 0):
            raise WeightError(f"weights must be positive, got {weights.tolist()}")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise WeightError(f"weights sum to {weights.sum()!r}, not 1")
        first = members[0][1]
        for _, N in members[1:]:
            if N.ambient != first.ambient or N.param_dim != first.param_dim:
                raise DimensionMismatch("family members must share ambient space and dimension")
        if not 0 <= self.reference_index < len(members):
            raise IndexError(f"reference index {self.reference_index} out of range")
        object.__setattr__(self, "members", members)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.members])

    @property
    def submanifolds(self) -> list:
        return [N for _, N in self.members]

    @property
    def ambient(self) -> AmbientSpace:
        return self.members[0][1].ambient

    @property
    def reference(self) -> ParametricSubmanifold:
        return self.members[self.reference_index][1]

    def with_reference(self, index: int) -> "WeightedFamily":
        return replace(self, reference_index=index)

    def transformed(self, matrix, offset=None) -> "WeightedFamily":
        """Image of the whole family under an ambient isometry."""
        members = tuple((w, N.transformed(matrix, offset)) for w, N in self.members)
        return WeightedFamily(members, self.reference_index)


def orbit_family(base: ParametricSubmanifold, isometries: Sequence, reference_index: int = 0) -> WeightedFamily:
    """Uniformly weighted family ``{g . base}`` over a finite group of isometries."""
    isos = tuple((np.asarray(A, dtype=float), None if b is None else np.asarray(b, dtype=float))
                 for A, b in isometries)
    w = 1.0 / len(isos)
    members = tuple((w, base.transformed(A, b)) for A, b in isos)
    return WeightedFamily(members, reference_index, isometries=isos)


@dataclass
class SliceResult:
    vertex: int
    param: np.ndarray
    base_point: np.ndarray
    offset: np.ndarray
    point: np.ndarray
    residual: float
    iterations: int
    min_eigenvalue: float


@dataclass(eq=False)
class AveragedSection:
    """The averaged submanifold as normal offsets over the reference mesh."""

    base: ParametricSubmanifold
    offsets: np.ndarray
    points: np.ndarray
    residuals: np.ndarray
    iterations: np.ndarray
    min_eigenvalues: np.ndarray
    summary: dict = field(default_factory=dict)

    @property
    def offset_norms(self) -> np.ndarray:
        return np.linalg.norm(self.offsets, axis=-1)

    def as_submanifold(self, label: str = "average") -> ParametricSubmanifold:
        """Interpolate the section points into a smooth parametric submanifold."""
        N = self.base
        grid = self.points.reshape(N.resolution + (N.ambient.coord_dim,))
        radius = N.ambient.radius if N.ambient.is_sphere else None
        shape = Sampled(grid, tuple(N.axes), radius=radius, label=label)
        return ParametricSubmanifold(N.ambient, shape, N.resolution, label)


# -- C1 distance ----------------------------------------------------------------

def c1_distance(N: ParametricSubmanifold, N2: ParametricSubmanifold, detail: bool = False):
    """Nonsymmetric C1 distance from N to N2 sampled over the mesh of N2.

    For each vertex x' of N2: the larger of the distance to its foot x on N
    and the Finsler distance between T_x'N2 and T_xN transported to x'.
    """
    rhos = np.empty(N2.n_vertices)
    angles = np.empty(N2.n_vertices)
    for i, (u2, x2) in enumerate(zip(N2.mesh_params, N2.mesh_points)):
        foot = nearest_point(N, x2)
        rhos[i], angles[i] = c1_pointwise(N, N2, u2, foot)
    value = float(max(rhos.max(), angles.max()))
    if detail:
        return value, rhos, angles
    return value


def _identity_index(isometries) -> int | None:
    for i, (A, b) in enumerate(isometries):
        if np.allclose(A, np.eye(A.shape[0]), atol=1e-12) and (b is None or np.allclose(b, 0, atol=1e-12)):
            return i
    return None


def family_epsilon(family: WeightedFamily) -> float:
    """Largest C1 distance between ordered pairs of members.

    For orbit families only distances from the identity member are computed,
    since d(gN, hN) = d(N, g^-1 h N).
    """
    subs = family.submanifolds
    if len(subs) == 1:
        return 0.0
    if family.isometries is not None:
        e = _identity_index(family.isometries)
        if e is not None:
            return max(c1_distance(subs[e], N) for i, N in enumerate(subs) if i != e)
    return max(c1_distance(A, B) for i, A in enumerate(subs) for j, B in enumerate(subs) if i != j)


# -- averaged fields ------------------------------------------------------------

def _feet(family: WeightedFamily, x, hints=None) -> list[FootpointResult]:
    feet = []
    for i, N in enumerate(family.submanifolds):
        if hints is not None and hints[i] is not None:
            u, foot, rho, its = refine_foot(N, x, hints[i])
            feet.append(FootpointResult(u, foot, rho, True, its))
        else:
            feet.append(nearest_point(N, x))
    return feet


def averaged_gradient(family: WeightedFamily, x, feet=None) -> np.ndarray:
    """Weighted mean of the members' potential gradients at x."""
    x = np.asarray(x, dtype=float)
    if feet is None:
        feet = _feet(family, x)
    grads = [-family.ambient.log(x, f.foot) for f in feet]
    return sum(w * g for w, g in zip(family.weights, grads))


def gradient_deviation(family: WeightedFamily, x, feet=None) -> float:
    """Largest distance between the averaged gradient and a member's gradient at x."""
    x = np.asarray(x, dtype=float)
    if feet is None:
        feet = _feet(family, x)
    mean = averaged_gradient(family, x, feet)
    return max(float(np.linalg.norm(mean + family.ambient.log(x, f.foot))) for f in feet)


def averaged_gauss_field(family: WeightedFamily, x, feet=None, gap_threshold: float = 0.05) -> Subspace:
    """Projection average of the members' vertical spaces at x."""
    x = np.asarray(x, dtype=float)
    if feet is None:
        feet = _feet(family, x)
    spaces = [gauss_extended(N, x, f) for N, f in zip(family.submanifolds, feet)]
    report = average_subspaces(list(zip(family.weights, spaces)), gap_threshold=gap_threshold)
    return report.result


class _Slice:
    """Doubly projected gradient restricted to one normal slice of the reference."""

    def __init__(self, family: WeightedFamily, u, config: SolverConfig):
        self.family = family
        self.config = config
        ref = family.reference
        self.space = ref.ambient
        self.param = np.asarray(u, dtype=float)
        self.p = ref.point(self.param)
        self.normal = normal_space(ref, self.param).frame
        self.hints = [None] * len(family.members)

    def point(self, s) -> np.ndarray:
        return self.space.exp(self.p, self.normal @ s)

    def frame(self, s):
        """QR frame of the slice tangent space at exp_p(V s), with positive R diagonal."""
        D = slice_derivative(self.space, self.p, self.normal, self.normal @ s)
        Q, R = np.linalg.qr(D)
        signs = np.sign(np.diag(R))
        signs[signs == 0] = 1.0
        return Q * signs, (R.T * signs).T

    def field(self, s, use_hints=True) -> np.ndarray:
        x = self.point(s)
        try:
            feet = _feet(self.family, x, self.hints if use_hints else None)
        except NotUnique as exc:
            raise LeftTube(f"slice point left a member's tube: {exc}") from exc
        self.hints = [f.param for f in feet]
        grad = averaged_gradient(self.family, x, feet)
        gamma = averaged_gauss_field(self.family, x, feet, self.config.gap_threshold)
        Q, _ = self.frame(s)
        projected = gamma.frame @ (gamma.frame.T @ grad)
        return Q.T @ projected

    def jacobian(self, s) -> np.ndarray:
        h = self.config.jacobian_step * (1.0 + np.linalg.norm(s))
        c = len(s)
        J = np.empty((c, c))
        for j in range(c):
            e = np.zeros(c)
            e[j] = h
            J[:, j] = (self.field(s + e) - self.field(s - e)) / (2.0 * h)
        return J


def _r_max(epsilon: float, config: SolverConfig) -> float:
    if config.r_max is not None:
        return config.r_max
    return min(0.25, max(100.0 * epsilon, 10.0 * config.tol))


def v_field(family: WeightedFamily, u, w_coeffs, config: SolverConfig = SolverConfig()) -> np.ndarray:
    """Doubly projected gradient at ``exp_p(V w)`` in orthonormal slice coordinates.

    ``u`` is the reference-member parameter of p and ``w_coeffs`` the offset
    in the orthonormal normal frame V at p (see :func:`normal_frame`).
    """
    sl = _Slice(family, u, config)
    return sl.field(np.asarray(w_coeffs, dtype=float), use_hints=False)


def normal_frame(family: WeightedFamily, u) -> np.ndarray:
    """The normal frame at the reference point used for slice coordinates."""
    return normal_space(family.reference, u).frame


def solve_slice(family: WeightedFamily, u, epsilon: float, config: SolverConfig = SolverConfig(), vertex: int = -1) -> SliceResult:
    """Newton iteration for the zero of the doubly projected gradient on one slice."""
    sl = _Slice(family, u, config)
    r_max = _r_max(epsilon, config)
    c = sl.normal.shape[1]
    s = np.zeros(c)
    F = sl.field(s, use_hints=False)
    for it in range(1, config.max_iter + 1):
        res = float(np.linalg.norm(F))
        if res < config.tol * (1.0 + np.linalg.norm(s)):
            # certify with a fresh global foot search at the solution
            F = sl.field(s, use_hints=False)
            res = float(np.linalg.norm(F))
            if res < config.tol * (1.0 + np.linalg.norm(s)):
                break
        J = sl.jacobian(s)
        try:
            step = -np.linalg.solve(J, F)
        except np.linalg.LinAlgError as exc:
            raise NotPositive(f"singular slice Jacobian at vertex {vertex}") from exc
        size = np.linalg.norm(step)
        if size > r_max:
            step *= r_max / size
        s = s + step
        if np.linalg.norm(s) > r_max:
            raise LeftTube(f"slice iterate |w|={np.linalg.norm(s):.3g} exceeded r_max={r_max:.3g}")
        F = sl.field(s)
    else:
        raise NoConvergence(f"slice Newton did not converge in {config.max_iter} iterations")
    J = sl.jacobian(s)
    _, R = sl.frame(s)
    K = J @ np.linalg.inv(R)
    min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (K + K.T))))
    if not min_eig > 0:
        raise NotPositive(f"slice derivative is not positive (min eigenvalue {min_eig:.3g})")
    w = sl.normal @ s
    return SliceResult(vertex=vertex, param=sl.param, base_point=sl.p, offset=w, point=sl.point(s),
                       residual=res, iterations=it, min_eigenvalue=min_eig)


def _solve_vertex(args):
    family, index, epsilon, config = args
    u = family.reference.mesh_params[index]
    try:
        return index, solve_slice(family, u, epsilon, config, vertex=index)
    except ManifoldMeanError as exc:
        return index, exc


def _solve_all(family: WeightedFamily, epsilon: float, config: SolverConfig, label=None):
    jobs = [(family, i, epsilon, config) for i in range(family.reference.n_vertices)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = dict(pool.map(_solve_vertex, jobs, chunksize=8))
    else:
        outcomes = dict(map(_solve_vertex, jobs))
    failures = {i: r for i, r in outcomes.items() if isinstance(r, Exception)}
    if failures:
        raise SliceFailure(failures, label)
    return [outcomes[i] for i in range(len(jobs))]


def _section_from(ref: ParametricSubmanifold, results) -> AveragedSection:
    return AveragedSection(
        base=ref,
        offsets=np.array([r.offset for r in results]),
        points=np.array([r.point for r in results]),
        residuals=np.array([r.residual for r in results]),
        iterations=np.array([r.iterations for r in results]),
        min_eigenvalues=np.array([r.min_eigenvalue for r in results]),
    )


def hausdorff_to(points: np.ndarray, N: ParametricSubmanifold) -> float:
    """Largest distance from sample points to the continuous submanifold N."""
    return max(nearest_point(N, y, strict=False).rho for y in points)


def average_family(family: WeightedFamily, config: SolverConfig = SolverConfig(), epsilon: float | None = None,
                   label: str | None = None) -> AveragedSection:
    """Center-of-mass submanifold of the family, as a section over the reference mesh."""
    if epsilon is None:
        epsilon = family_epsilon(family)
    if not epsilon < config.epsilon_max:
        raise EpsilonTooLarge(
            f"members are {epsilon:.4g} apart in C1 distance; limit is {config.epsilon_max}",
            epsilon=epsilon, limit=config.epsilon_max,
        )
    ref = family.reference
    section = _section_from(ref, _solve_all(family, epsilon, config, label))
    averaged = section.as_submanifold()
    c1 = [c1_distance(N, averaged) for N in family.submanifolds]
    summary = {
        "epsilon": float(epsilon),
        "r_max": _r_max(epsilon, config),
        "max_offset": float(section.offset_norms.max()),
        "c0_bound": 100.0 * epsilon + C0_SLACK,
        "c1_to_members": [float(v) for v in c1],
        "c1_bound": 136.0 * float(np.sqrt(epsilon)),
        "max_residual": float(section.residuals.max()),
        "min_jacobian_eigenvalue": float(section.min_eigenvalues.min()),
    }
    if config.reference_check and len(family.members) > 1:
        other = (family.reference_index + 1) % len(family.members)
        alt = _section_from(family.submanifolds[other],
                            _solve_all(family.with_reference(other), epsilon, config, label))
        summary["reference_shift"] = hausdorff_to(alt.points, averaged)
    section.summary = summary
    return section


def midpoint(N1: ParametricSubmanifold, N2: ParametricSubmanifold, config: SolverConfig = SolverConfig(),
             epsilon: float | None = None) -> AveragedSection:
    return average_family(WeightedFamily(((0.5, N1), (0.5, N2)), 0), config, epsilon)


@dataclass
class MorphFrame:
    t: float
    submanifold: ParametricSubmanifold
    section: AveragedSection | None = None


def morph(N1: ParametricSubmanifold, N2: ParametricSubmanifold, depth: int,
          config: SolverConfig = SolverConfig()) -> list[MorphFrame]:
    """Repeated midpoints giving submanifolds at the dyadic times k / 2^depth."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    frames = [MorphFrame(0.0, N1), MorphFrame(1.0, N2)]
    for level in range(depth):
        refined = [frames[0]]
        for a, b in zip(frames, frames[1:]):
            t = 0.5 * (a.t + b.t)
            try:
                sec = midpoint(a.submanifold, b.submanifold, config)
            except SliceFailure as exc:
                wrapped = SliceFailure(exc.failures, label=f"t={t}")
                wrapped.dyadic_time = t
                raise wrapped from exc
            except ManifoldMeanError as exc:
                exc.dyadic_time = t
                raise
            refined.append(MorphFrame(t, sec.as_submanifold(f"t={t}"), sec))
            refined.append(b)
        frames = refined
    return frames


def _inverse(A, b):
    A = np.asarray(A, dtype=float)
    return A.T, (None if b is None else -A.T @ np.asarray(b, dtype=float))


def _closed_under_inverse(isometries) -> bool:
    def same(a, b):
        return np.allclose(a[0], b[0], atol=1e-9) and np.allclose(
            0 if a[1] is None else a[1], 0 if b[1] is None else b[1], atol=1e-9)

    return all(any(same(_inverse(*g), h) for h in isometries) for g in isometries)


def invariance_check(family: WeightedFamily, section: AveragedSection, isometries=None) -> float:
    """Largest distance from the images g.(section points) to the averaged submanifold.

    Inverses are applied as well unless the isometries already contain them,
    which makes the measure symmetric.
    """
    if isometries is None:
        isometries = family.isometries or ()
    isometries = [(np.asarray(A, dtype=float), b) for A, b in isometries]
    if not _closed_under_inverse(isometries):
        isometries = isometries + [_inverse(A, b) for A, b in isometries]
    averaged = section.as_submanifold()
    space = family.ambient
    worst = 0.0
    for A, b in isometries:
        images = space.apply_isometry(A, b, section.points)
        worst = max(worst, hausdorff_to(images, averaged))
    return float(worst)


# -- equidistant oracle -------------------------------------------------------------

def _dense_samples(N: ParametricSubmanifold, oversample: int):
    grids = np.meshgrid(*[ax.nodes(max(64, oversample * n)) for ax, n in zip(N.axes, N.resolution)], indexing="ij")
    params = np.stack([g.ravel() for g in grids], axis=-1)
    return params, N.shape.embed(params)


def _sampled_distances(N: ParametricSubmanifold, samples, xs) -> np.ndarray:
    """Distances from each row of xs to the densely sampled points of N."""
    _, pts = samples
    return np.array([N.ambient.distance(pts, x).min() for x in np.atleast_2d(xs)])


def oracle_distance(N: ParametricSubmanifold, x, oversample: int = 8, samples=None) -> float:
    """Distance from x to N by dense sampling and derivative-free polishing."""
    space = N.ambient
    params, pts = samples if samples is not None else _dense_samples(N, oversample)
    d = space.distance(pts, x)
    best = int(np.argmin(d))
    start = params[best]

    def objective(u):
        return float(space.distance(N.point(N.wrap(u)), x)) ** 2

    if N.param_dim == 1:
        ax = N.axes[0]
        step = 2.0 * ax.length / len(params)
        lo, hi = start[0] - step, start[0] + step
        if not ax.periodic:
            lo, hi = max(lo, ax.lo), min(hi, ax.hi)
        res = optimize.minimize_scalar(lambda t: objective(np.array([t])), bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12, "maxiter": 500})
    else:
        res = optimize.minimize(objective, start, method="Nelder-Mead",
                                options={"xatol": 1e-12, "fatol": 1e-30, "maxiter": 4000})
    return float(np.sqrt(min(res.fun, d[best] ** 2)))


def equidistant_oracle(N1: ParametricSubmanifold, N2: ParametricSubmanifold, u, t_max: float = 0.25,
                       samples: int = 101) -> np.ndarray:
    """Point on the normal geodesic through N1(u) equidistant from N1 and N2.

    The root of ``rho1 - rho2`` nearest to N1(u) is bracketed with sampled
    distances, then found with Brent's method on polished distances. Uses no
    Newton or Grassmann machinery.
    """
    if N1.codim != 1 or N2.codim != 1:
        raise DimensionMismatch("the equidistant oracle needs hypersurfaces")
    space = N1.ambient
    p = N1.point(u)
    nu = normal_space(N1, u).frame[:, 0]
    dense = (_dense_samples(N1, 8), _dense_samples(N2, 8))

    def gap(t):
        x = space.exp(p, t * nu)
        return oracle_distance(N1, x, samples=dense[0]) - oracle_distance(N2, x, samples=dense[1])

    g0 = gap(0.0)
    if g0 == 0.0:
        return p
    ts = np.linspace(0.0, t_max, samples)[1:]
    step = ts[0]
    # candidate order: +t, -t, outward
    order = np.ravel(np.column_stack([ts, -ts]))
    xs = np.array([space.exp(p, t * nu) for t in order])
    coarse = _sampled_distances(N1, dense[0], xs) - _sampled_distances(N2, dense[1], xs)
    candidates = [i for i in range(len(order)) if np.sign(coarse[i]) != np.sign(g0)]
    for i in candidates[:1]:
        t = order[i]
        sign = np.sign(t)
        for widen in (0, 1, 2):
            lo, hi = sorted((sign * max(abs(t) - (1 + widen) * step, 0.0), sign * (abs(t) + widen * step)))
            inner = lo if sign > 0 else hi
            outer = hi if sign > 0 else lo
            g_in = g0 if inner == 0.0 else gap(inner)
            if np.sign(g_in) == np.sign(g0) and np.sign(gap(outer)) != np.sign(g0):
                root = optimize.brentq(gap, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)
                return space.exp(p, root * nu)
    for t in ts:
        for sign in (1.0, -1.0):
            if np.sign(gap(sign * t)) != np.sign(g0):
                lo, hi = sorted((sign * (t - step), sign * t))
                root = optimize.brentq(gap, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)
                return space.exp(p, root * nu)
    raise NoSignChange(f"no equidistant point within {t_max} of the reference point")
