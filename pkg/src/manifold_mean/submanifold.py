"""Parametric compact submanifolds and their tubular-neighborhood machinery.

A :class:`ParametricSubmanifold` couples an analytic shape with an ambient
space and a sampling mesh. The module-level functions compute nearest points,
the potential ``P = rho^2 / 2`` with its gradient and hessian, the vertical
(parallel-translated normal) and quasi-vertical (tangent to normal slices)
spaces, the second fundamental form and a gentleness report.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .ambient import AmbientSpace
from .errors import DimensionMismatch, NoConvergence, NotUnique, RankDeficient
from .grassmann import Subspace, complement, finsler_distance, make_subspace
from .shapes import Shape

COMPLEX_STEP = 1e-20
MAX_ITER = 50
PARAM_TOL = 1e-12
N_BASINS = 3
UNIQUE_MARGIN = 1e-6
HESSIAN_STEP = 1e-4
SECOND_DERIV_STEP = 1e-5
NEWTON_FD_STEP = 1e-6
EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class ParametricSubmanifold:
    ambient: AmbientSpace
    shape: Shape
    resolution: tuple
    label: str = ""
    mesh_params: np.ndarray = field(init=False, repr=False)
    mesh_points: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        res = tuple(int(r) for r in np.atleast_1d(self.resolution))
        if len(res) == 1 and self.shape.param_dim > 1:
            res = res * self.shape.param_dim
        if len(res) != self.shape.param_dim:
            raise DimensionMismatch(f"resolution {res} does not match parameter dimension {self.shape.param_dim}")
        if self.shape.coord_dim != self.ambient.coord_dim:
            raise DimensionMismatch(
                f"shape has {self.shape.coord_dim} coordinates, ambient needs {self.ambient.coord_dim}"
            )
        object.__setattr__(self, "resolution", res)
        grids = np.meshgrid(*[ax.nodes(n) for ax, n in zip(self.axes, res)], indexing="ij")
        params = np.stack([g.ravel() for g in grids], axis=-1)
        points = self.shape.embed(params)
        if self.ambient.is_sphere:
            radii = np.linalg.norm(points, axis=-1)
            if np.max(np.abs(radii - self.ambient.radius)) > 1e-9 * self.ambient.radius:
                raise DimensionMismatch("shape does not lie on the ambient sphere")
        params.setflags(write=False)
        points.setflags(write=False)
        object.__setattr__(self, "mesh_params", params)
        object.__setattr__(self, "mesh_points", points)

    @property
    def axes(self):
        return self.shape.axes

    @property
    def param_dim(self) -> int:
        return self.shape.param_dim

    @property
    def codim(self) -> int:
        return self.ambient.dim - self.param_dim

    @property
    def n_vertices(self) -> int:
        return self.mesh_params.shape[0]

    def wrap(self, u) -> np.ndarray:
        u = np.array(u, dtype=float)
        for i, ax in enumerate(self.axes):
            u[..., i] = ax.wrap(u[..., i])
        return u

    def param_separation(self, a, b) -> np.ndarray:
        seps = [ax.separation(a[..., i], b[..., i]) for i, ax in enumerate(self.axes)]
        return np.max(np.stack(seps, axis=-1), axis=-1)

    def point(self, u) -> np.ndarray:
        return self.shape.embed(np.asarray(u, dtype=float))

    def point_and_jacobian(self, u):
        """Embedding and its m x d Jacobian at a single parameter."""
        u = np.asarray(u, dtype=float)
        d = self.param_dim
        probes = u + 1j * COMPLEX_STEP * np.eye(d)
        vals = self.shape.embed(probes)
        return np.real(vals[0]), np.imag(vals).T / COMPLEX_STEP

    def jacobians(self, params) -> np.ndarray:
        """Batched Jacobians, shape (..., m, d)."""
        params = np.asarray(params, dtype=float)
        d = self.param_dim
        probes = params[..., None, :] + 1j * COMPLEX_STEP * np.eye(d)
        return np.swapaxes(np.imag(self.shape.embed(probes)), -1, -2) / COMPLEX_STEP

    def check_immersion(self, tol: float = 1e-8) -> float:
        """Smallest singular value of the Jacobian over the mesh; raises if degenerate."""
        s = np.linalg.svd(self.jacobians(self.mesh_params), compute_uv=False)
        worst = float(np.min(s[..., -1]))
        if worst <= tol:
            raise RankDeficient(f"embedding Jacobian loses rank on the mesh (sigma_min={worst:.3g})")
        gaps, _ = cKDTree(self.mesh_points).query(self.mesh_points, k=2)
        if np.min(gaps[:, 1]) <= 0:
            raise RankDeficient("distinct mesh vertices map to the same point")
        return worst

    def transformed(self, matrix, offset=None, label=None) -> "ParametricSubmanifold":
        from .shapes import Transformed

        return ParametricSubmanifold(
            self.ambient, Transformed(self.shape, np.asarray(matrix, dtype=float),
                                      None if offset is None else np.asarray(offset, dtype=float)),
            self.resolution, label if label is not None else self.label,
        )


@dataclass(frozen=True)
class FootpointResult:
    param: np.ndarray
    foot: np.ndarray
    rho: float
    unique: bool
    iterations: int = 0


@dataclass(frozen=True)
class TangentForm:
    """Symmetric bilinear form on T_xM written in an orthonormal frame."""

    matrix: np.ndarray
    frame: Subspace

    def block(self, left: Subspace, right: Subspace) -> np.ndarray:
        a = self.frame.frame.T @ left.frame
        b = self.frame.frame.T @ right.frame
        return a.T @ self.matrix @ b

    def value(self, v, w) -> float:
        a = self.frame.frame.T @ np.asarray(v, dtype=float)
        b = self.frame.frame.T @ np.asarray(w, dtype=float)
        return float(a @ self.matrix @ b)

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvalsh(self.matrix))))


@dataclass(frozen=True)
class GentlenessReport:
    second_form_norm: float
    curvature_bound: float
    injectivity_estimate: float
    scale_c: float
    gentle: bool
    note: str = "injectivity_estimate is a sampled heuristic, not a certificate"


# -- tangent and normal spaces ------------------------------------------------

def tangent_space(N: ParametricSubmanifold, u) -> Subspace:
    p, J = N.point_and_jacobian(u)
    J = N.ambient.project_tangent(p, J.T).T
    return make_subspace(J)


def normal_space(N: ParametricSubmanifold, u) -> Subspace:
    p, J = N.point_and_jacobian(u)
    T = make_subspace(N.ambient.project_tangent(p, J.T).T)
    if N.ambient.is_sphere:
        return complement(T, within=N.ambient.tangent_space(p))
    return complement(T)


# -- nearest point --------------------------------------------------------------

def _grid_local_minima(N: ParametricSubmanifold, values: np.ndarray) -> np.ndarray:
    """Flat indices of mesh vertices not exceeding any axis neighbor."""
    grid = values.reshape(N.resolution)
    is_min = np.ones(grid.shape, dtype=bool)
    for axis, ax in enumerate(N.axes):
        if grid.shape[axis] < 2:
            continue
        for shift in (1, -1):
            nb = np.roll(grid, shift, axis=axis)
            if not ax.periodic:
                edge = [slice(None)] * grid.ndim
                edge[axis] = 0 if shift == 1 else -1
                nb[tuple(edge)] = np.inf
            is_min &= grid <= nb
    return np.flatnonzero(is_min.ravel())


def _foot_newton_system(N: ParametricSubmanifold, x, u, h: float = NEWTON_FD_STEP):
    """Gradient, FD hessian and Gauss-Newton matrix of ``u -> d(x, embed(u))^2 / 2``."""
    space = N.ambient
    d = N.param_dim
    probes = np.concatenate([u[None, :], u + h * np.eye(d), u - h * np.eye(d)])
    pts = N.point(probes)
    J = N.jacobians(probes)
    logs = space.log(pts, x)
    grads = -np.einsum("kmd,km->kd", J, logs)
    H = (grads[1:d + 1] - grads[d + 1:]).T / (2.0 * h)
    return grads[0], 0.5 * (H + H.T), J[0].T @ J[0]


def refine_foot(N: ParametricSubmanifold, x, u0, max_iter: int = MAX_ITER):
    """Damped Newton on ``u -> d(x, embed(u))^2 / 2`` from ``u0``.

    The hessian comes from central differences of the exact gradient. Where
    it is not positive definite the Gauss-Newton step is used instead; step
    halving enforces descent. Returns ``(u, foot, rho, iterations)``; raises
    NoConvergence.
    """
    space = N.ambient
    x = np.asarray(x, dtype=float)
    u = N.wrap(u0)
    p = N.point(u)
    f = 0.5 * space.distance(p, x) ** 2
    for it in range(1, max_iter + 1):
        g, H, G = _foot_newton_system(N, x, u)
        try:
            np.linalg.cholesky(H)
            step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            try:
                step = -np.linalg.solve(G, g)
            except np.linalg.LinAlgError as exc:
                raise NoConvergence(f"singular Gauss-Newton system at u={u}") from exc
        # f carries absolute rounding of about rho * eps * |x| from the distance
        slack = 1e-13 * f + 8.0 * EPS * (1.0 + np.linalg.norm(x)) * np.sqrt(2.0 * f) + 1e-300
        t = 1.0
        while True:
            u_new = N.wrap(u + t * step)
            p_new = N.point(u_new)
            f_new = 0.5 * space.distance(p_new, x) ** 2
            if f_new <= f + slack or t < 1e-10:
                break
            t *= 0.5
        moved = float(np.max(N.param_separation(u_new, u)))
        u, p, f = u_new, p_new, f_new
        if moved <= PARAM_TOL or t < 1e-10:
            return u, p, float(np.sqrt(2.0 * f)), it
    raise NoConvergence(f"nearest-point refinement did not converge in {max_iter} iterations")


def nearest_point(N: ParametricSubmanifold, x, strict: bool = True) -> FootpointResult:
    """Multi-start nearest-point projection onto N.

    The best ``N_BASINS`` discrete local minima of the distance over the mesh
    are refined by damped Newton. If another distinct local minimum lies within the uniqueness
    margin of the best one, NotUnique is raised (or ``unique=False`` is
    returned when ``strict`` is false).
    """
    x = np.asarray(x, dtype=float)
    dists = N.ambient.distance(N.mesh_points, x)
    candidates = _grid_local_minima(N, dists)
    candidates = candidates[np.argsort(dists[candidates], kind="stable")][:N_BASINS]
    found = []
    failure = None
    for idx in candidates:
        try:
            found.append(refine_foot(N, x, N.mesh_params[idx]))
        except NoConvergence as exc:
            failure = exc
    if not found:
        raise failure or NoConvergence("no basin converged")
    found.sort(key=lambda item: item[2])
    u, foot, rho, its = found[0]
    unique = True
    for other in found[1:]:
        if N.param_separation(other[0], u) <= 1e-6:
            continue
        if other[2] <= rho + UNIQUE_MARGIN * (1.0 + rho):
            unique = False
            break
    if strict and not unique:
        raise NotUnique(f"two nearest-point candidates at distance {rho:.12g}: point is outside the tube")
    return FootpointResult(param=u, foot=foot, rho=rho, unique=unique, iterations=its)


# -- potential and bundles -----------------------------------------------------

def potential(N: ParametricSubmanifold, x) -> float:
    return 0.5 * nearest_point(N, x).rho ** 2


def grad_potential(N: ParametricSubmanifold, x, foot: FootpointResult | None = None) -> np.ndarray:
    """Gradient of rho^2/2: minus the initial velocity of the geodesic to the foot."""
    if foot is None:
        foot = nearest_point(N, x)
    return -N.ambient.log(np.asarray(x, dtype=float), foot.foot)


def gauss_extended(N: ParametricSubmanifold, x, foot: FootpointResult | None = None) -> Subspace:
    """Normal space at the foot, parallel translated out to x."""
    if foot is None:
        foot = nearest_point(N, x)
    nu = normal_space(N, foot.param)
    moved = N.ambient.transport_frame(foot.foot, np.asarray(x, dtype=float), nu.frame)
    return make_subspace(moved)


def slice_derivative(space: AmbientSpace, p, normal_frame: np.ndarray, w0, h: float | None = None) -> np.ndarray:
    """Columns ``d/ds exp_p(w0 + s v_i)`` for the normal frame vectors v_i.

    Central differences; exact identity columns in a flat ambient.
    """
    normal_frame = np.asarray(normal_frame, dtype=float)
    if not space.is_sphere:
        return normal_frame.copy()
    w0 = np.asarray(w0, dtype=float)
    if h is None:
        h = 1e-5 * (1.0 + np.linalg.norm(w0))
    plus = space.exp(p, w0 + h * normal_frame.T)
    minus = space.exp(p, w0 - h * normal_frame.T)
    return ((plus - minus) / (2.0 * h)).T


def quasi_vertical(N: ParametricSubmanifold, x, foot: FootpointResult | None = None) -> Subspace:
    """Tangent space at x of the normal slice through x."""
    if foot is None:
        foot = nearest_point(N, x)
    nu = normal_space(N, foot.param)
    w0 = N.ambient.log(foot.foot, np.asarray(x, dtype=float))
    return make_subspace(slice_derivative(N.ambient, foot.foot, nu.frame, w0))


def hessian_fd(N: ParametricSubmanifold, x, h: float = HESSIAN_STEP) -> TangentForm:
    """Covariant hessian of the potential by differences of the gradient.

    Gradients at ``exp_x(+-h e_j)`` are transported back to x; one level of
    Richardson extrapolation removes the O(h^2) term.
    """
    space = N.ambient
    x = np.asarray(x, dtype=float)
    base = nearest_point(N, x)
    frame = space.tangent_space(x)
    E = frame.frame

    def grad_at(y):
        u, foot, rho, _ = refine_foot(N, y, base.param)
        return space.transport(y, x, -space.log(y, foot))

    def column(e, step):
        yp = space.exp(x, step * e)
        ym = space.exp(x, -step * e)
        return (grad_at(yp) - grad_at(ym)) / (2.0 * step)

    cols = []
    for j in range(E.shape[1]):
        e = E[:, j]
        coarse = column(e, h)
        fine = column(e, 0.5 * h)
        cols.append((4.0 * fine - coarse) / 3.0)
    M = E.T @ np.stack(cols, axis=1)
    return TangentForm(matrix=0.5 * (M + M.T), frame=frame)


# -- second fundamental form and gentleness ------------------------------------

def _second_derivatives(N: ParametricSubmanifold, u, h: float = SECOND_DERIV_STEP) -> np.ndarray:
    """Array (d, d, m) of second partials of the embedding."""
    u = np.asarray(u, dtype=float)
    d = N.param_dim
    probes = np.concatenate([u + h * np.eye(d), u - h * np.eye(d)])
    J = N.jacobians(probes)  # (2d, m, d)
    dJ = (J[:d] - J[d:]) / (2.0 * h)  # [k] = d/du_k of J (m, d)
    second = np.transpose(dJ, (0, 2, 1))  # (k, l, m)
    return 0.5 * (second + np.transpose(second, (1, 0, 2)))


def second_fundamental_form(N: ParametricSubmanifold, u):
    """Second fundamental form at ``embed(u)`` in orthonormal frames.

    Returns ``(B, T, nu)`` where ``B[a, i, j] = B_{nu_a}(t_i, t_j)`` with the
    sign convention ``B_v(w1, w2) = -<v, D_{w1} W2>``.
    """
    p, J = N.point_and_jacobian(u)
    J = N.ambient.project_tangent(p, J.T).T
    U, s, Vt = np.linalg.svd(J, full_matrices=False)
    if s[-1] <= 1e-8 * s[0]:
        raise RankDeficient(f"embedding is not immersive at u={u}")
    A = Vt.T / s  # coefficients: J @ A = U
    nu = normal_space(N, u)
    second = _second_derivatives(N, u)
    ii = np.einsum("ki,lj,klm->ijm", A, A, second)
    B = -np.einsum("ma,ijm->aij", nu.frame, ii)
    return B, Subspace(U), nu


def _form_norm(B: np.ndarray) -> float:
    codim, d, _ = B.shape
    if d == 1:
        return float(np.linalg.norm(B[:, 0, 0]))
    if codim == 1:
        return float(np.max(np.abs(np.linalg.eigvalsh(B[0]))))
    rng = np.random.default_rng(0)
    dirs = np.concatenate([np.eye(codim), rng.standard_normal((256, codim))])
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return float(max(np.max(np.abs(np.linalg.eigvalsh(np.tensordot(v, B, axes=1)))) for v in dirs))


def second_form_norm(N: ParametricSubmanifold) -> float:
    """Largest |B_v(w, w)| over mesh vertices and unit normal/tangent pairs."""
    N.check_immersion()
    return max(_form_norm(second_fundamental_form(N, u)[0]) for u in N.mesh_params)


def _self_approach(N: ParametricSubmanifold) -> float:
    """Shortest distance to a non-adjacent local minimum of the distance from each vertex."""
    pts = N.mesh_points
    best = np.inf
    for i in range(N.n_vertices):
        dists = N.ambient.distance(pts, pts[i])
        near = N.param_separation(N.mesh_params, N.mesh_params[i]) <= max(
            ax.length / n for ax, n in zip(N.axes, N.resolution)) * 1.5
        for j in _grid_local_minima(N, dists):
            if not near[j]:
                best = min(best, float(dists[j]))
    return best


def focal_bound(space: AmbientSpace, b: float) -> float:
    """Distance to the first focal point of a geodesic leaving a hypersurface with curvature b."""
    if space.is_sphere:
        R = space.radius
        return R * float(np.arctan2(1.0, R * b))
    return np.inf if b == 0 else 1.0 / b


def gentleness_report(N: ParametricSubmanifold) -> GentlenessReport:
    """Sampled check of the bounded-geometry conditions at scale c.

    The normal injectivity radius is estimated heuristically as the smaller
    of a focal bound from the second fundamental form and half the shortest
    self-approach chord found on the mesh.
    """
    b = second_form_norm(N)
    space = N.ambient
    inj = min(focal_bound(space, b), 0.5 * _self_approach(N), space.injectivity_radius)
    c = max(1.0 / inj if inj > 0 else np.inf, np.sqrt(space.curvature_bound), 1.0 / space.injectivity_radius)
    return GentlenessReport(
        second_form_norm=b,
        curvature_bound=space.curvature_bound,
        injectivity_estimate=float(inj),
        scale_c=float(c),
        gentle=bool(c <= 1.0 + 1e-9),
    )


def c1_pointwise(N: ParametricSubmanifold, N2: ParametricSubmanifold, u2, foot: FootpointResult | None = None):
    """Distance and tangent-space angle between N2 at ``u2`` and N at the foot."""
    x2 = N2.point(u2)
    if foot is None:
        foot = nearest_point(N, x2)
    T = tangent_space(N, foot.param)
    moved = make_subspace(N.ambient.transport_frame(foot.foot, x2, T.frame))
    return foot.rho, finsler_distance(moved, tangent_space(N2, u2))
