"""Numerical checks of the tube estimates and of the Grassmannian identities.

Each check produces rows ``{"name", "measured", "bound", "pass"}``. Failures
are recorded in the rows and never raised, so a run over a badly shaped
scene still reports which inequality broke.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ManifoldMeanError
from .grassmann import (
    Subspace,
    average_derivative_check,
    average_subspaces,
    complement,
    finsler_distance,
    graph_subspace,
    make_subspace,
    pairwise_spread,
    projection,
    random_orthogonal,
    random_subspace,
)
from .submanifold import (
    ParametricSubmanifold,
    gauss_extended,
    hessian_fd,
    nearest_point,
    normal_space,
    quasi_vertical,
    second_form_norm,
)

TUBE_RADII = (0.05, 0.1, 0.2, 0.25)
FD_SLACK = 1e-4
LENGTH_SLACK = 1e-3


@dataclass
class Check:
    name: str
    measured: float
    bound: float
    upper: bool = True
    note: str = ""

    @property
    def passed(self) -> bool:
        if not np.isfinite(self.measured):
            return False
        return self.measured <= self.bound if self.upper else self.measured >= self.bound

    def row(self) -> dict:
        row = {"name": self.name, "measured": float(self.measured), "bound": float(self.bound),
               "relation": "<=" if self.upper else ">=", "pass": bool(self.passed)}
        if self.note:
            row["note"] = self.note
        return row


@dataclass
class Suite:
    checks: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.errors and all(c.passed for c in self.checks)

    def rows(self) -> list[dict]:
        return [c.row() for c in self.checks]

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed] + [e["name"] for e in self.errors]

    def to_dict(self) -> dict:
        return {"pass": self.passed, "checks": self.rows(), "errors": self.errors}


# -- tube estimates -------------------------------------------------------------------

def _sample_vertices(N: ParametricSubmanifold, count: int) -> np.ndarray:
    return np.unique(np.linspace(0, N.n_vertices - 1, count).round().astype(int))


def _normal_directions(nu: Subspace) -> list[np.ndarray]:
    dirs = [nu.frame[:, j] for j in range(nu.dim)] + [-nu.frame[:, j] for j in range(nu.dim)]
    if nu.dim > 1:
        diag = nu.frame.sum(axis=1)
        dirs.append(diag / np.linalg.norm(diag))
    return dirs


def _retraction_ratio(N: ParametricSubmanifold, u, direction, r, span=0.2, steps=24) -> float:
    """Length ratio of the foot path to a path at constant normal offset r.

    The offset direction is carried along by projecting it onto each new
    normal space, which keeps the path smooth in any codimension.
    """
    space = N.ambient
    ts = np.linspace(-0.5, 0.5, steps + 1) * span * N.axes[0].length / 2.0
    pts, feet = [], []
    d = np.asarray(direction, dtype=float)
    for sweep in (ts[ts >= 0], ts[ts < 0][::-1]):
        d_run = d
        for t in sweep:
            v = np.array(u, dtype=float)
            v[0] += t
            v = N.wrap(v)
            nu = normal_space(N, v).frame
            d_run = nu @ (nu.T @ d_run)
            d_run = d_run / np.linalg.norm(d_run)
            x = space.exp(N.point(v), r * d_run)
            pts.append((t, x))
            feet.append((t, nearest_point(N, x).foot))
    pts = np.array([x for _, x in sorted(pts, key=lambda item: item[0])])
    feet = np.array([f for _, f in sorted(feet, key=lambda item: item[0])])
    path = np.sum(space.distance(pts[1:], pts[:-1]))
    image = np.sum(space.distance(feet[1:], feet[:-1]))
    return float(image / path)


def tube_estimates(N: ParametricSubmanifold, radii=TUBE_RADII, n_vertices: int = 8) -> Suite:
    """Sample tube points at the given radii and test each tube inequality."""
    suite = Suite()
    space = N.ambient
    worst = {k: -np.inf for k in ("angle", "proj", "vmax", "horiz", "cross", "hnorm", "length")}
    worst["vmin"] = np.inf
    worst_r = {}

    def bump(key, value, r, larger=True):
        if (value > worst[key]) if larger else (value < worst[key]):
            worst[key] = value
            worst_r[key] = r

    for r in radii:
        length_bound = 1.0 / (np.cos(r) - 1.5 * np.sin(r))
        for i in _sample_vertices(N, n_vertices):
            u = N.mesh_params[i]
            p = N.mesh_points[i]
            nu = normal_space(N, u)
            for k, d in enumerate(_normal_directions(nu)):
                try:
                    x = space.exp(p, r * d)
                    foot = nearest_point(N, x)
                    vert = gauss_extended(N, x, foot)
                    quasi = quasi_vertical(N, x, foot)
                    bump("angle", finsler_distance(quasi, vert) - r * r / 4.0, r)
                    bump("proj", np.linalg.norm(projection(quasi) - projection(vert), 2) - r * r / 5.0, r)
                    H = hessian_fd(N, x)
                    horiz = complement(vert, within=space.tangent_space(x))
                    vv = H.block(vert, vert)
                    ev = np.linalg.eigvalsh(0.5 * (vv + vv.T))
                    bump("vmin", float(ev.min()), r, larger=False)
                    bump("vmax", float(ev.max()), r)
                    bump("horiz", np.linalg.norm(H.block(horiz, horiz), 2) / r, r)
                    bump("cross", np.linalg.norm(H.block(vert, horiz), 2) / np.sqrt(r), r)
                    bump("hnorm", H.norm, r)
                    if k < nu.dim:
                        ratio = _retraction_ratio(N, u, d, r)
                        bump("length", ratio - length_bound, r)
                except ManifoldMeanError as exc:
                    suite.errors.append({"name": f"tube_point_r{r}", "vertex": int(i),
                                         "error": type(exc).__name__, "message": str(exc)})

    def note(key):
        return f"worst at r={worst_r[key]}" if key in worst_r else ""

    suite.checks += [
        Check("retraction_length_excess", worst["length"], LENGTH_SLACK, note=note("length")),
        Check("quasi_vs_vertical_angle_excess_over_r2_4", worst["angle"], FD_SLACK, note=note("angle")),
        Check("quasi_vs_vertical_projection_excess_over_r2_5", worst["proj"], FD_SLACK, note=note("proj")),
        Check("hessian_vertical_min_eigenvalue", worst["vmin"], 0.64, upper=False, note=note("vmin")),
        Check("hessian_vertical_max_eigenvalue", worst["vmax"], 1.32, note=note("vmax")),
        Check("hessian_horizontal_over_r", worst["horiz"], 3.0, note=note("horiz")),
        Check("hessian_cross_over_sqrt_r", worst["cross"], 3.0, note=note("cross")),
        Check("hessian_norm", worst["hnorm"], 1.32, note=note("hnorm")),
    ]
    try:
        b = second_form_norm(N)
    except ManifoldMeanError as exc:
        suite.errors.append({"name": "second_form_norm", "error": type(exc).__name__, "message": str(exc)})
        b = np.inf
    suite.checks.append(Check("second_form_norm", b, 1.5))
    return suite


def hessian_on_submanifold(N: ParametricSubmanifold, n_vertices: int = 8) -> float:
    """Largest deviation of the hessian at points of N from identity-on-normal, zero-on-tangent."""
    worst = 0.0
    for i in _sample_vertices(N, n_vertices):
        x = N.mesh_points[i]
        H = hessian_fd(N, x)
        nu = normal_space(N, N.mesh_params[i])
        target = H.frame.frame.T @ projection(nu) @ H.frame.frame
        worst = max(worst, float(np.max(np.abs(H.matrix - target))))
    return worst


# -- grassmann self-test ----------------------------------------------------------------

def _random_dims(rng, n_max, k_max):
    n = int(rng.integers(2, n_max + 1))
    k = int(rng.integers(1, min(k_max, n - 1) + 1))
    return n, k


def _identity_checks(rng, trials, n_max, k_max):
    norm_err = graph_err = dual_err = 0.0
    for _ in range(trials):
        n, k = _random_dims(rng, n_max, k_max)
        F = random_subspace(rng, n, k)
        G = random_subspace(rng, n, k)
        d = finsler_distance(F, G)
        norm_err = max(norm_err, abs(np.linalg.norm(projection(F) - projection(G), 2) - np.sin(d)))
        dual_err = max(dual_err, abs(d - finsler_distance(complement(F), complement(G))))
        u = rng.standard_normal((n - k, k)) * rng.uniform(0.01, 3.0)
        graph_err = max(graph_err, abs(finsler_distance(F, graph_subspace(F, u)) - np.arctan(np.linalg.norm(u, 2))))
    return norm_err, graph_err, dual_err


def random_family(rng, n, k, m, spread):
    """m members near a random k-plane, each a graph of a map with norm below tan(spread / 2)."""
    F = random_subspace(rng, n, k)
    perp = complement(F)
    members = []
    for _ in range(m):
        u = rng.standard_normal((n - k, k))
        u *= np.tan(spread / 2.0) * rng.uniform(0.0, 1.0) / np.linalg.norm(u, 2)
        members.append(graph_subspace(F, u, perp))
    weights = rng.uniform(0.2, 1.0, m)
    weights /= weights.sum()
    return [(float(w), G) for w, G in zip(weights, members)]


def averaging_checks(rng, families, n_max, k_max, eps_max=0.3):
    """Worst excess of d(F_g, average) over arcsin(2 eps), and worst equivariance residual."""
    bound_excess = -np.inf
    equivariance = 0.0
    for _ in range(families):
        n, k = _random_dims(rng, n_max, k_max)
        m = int(rng.integers(1, 7))
        fam = random_family(rng, n, k, m, eps_max * rng.uniform(0.05, 1.0))
        eps = pairwise_spread([G for _, G in fam])
        report = average_subspaces(fam)
        if eps > 0:
            bound_excess = max(bound_excess, report.max_member_distance - np.arcsin(min(1.0, 2 * eps)))
        else:
            bound_excess = max(bound_excess, report.max_member_distance - 1e-12)
        Q = random_orthogonal(rng, n)
        moved = average_subspaces([(w, G.transform(Q)) for w, G in fam]).result
        equivariance = max(equivariance, finsler_distance(moved, report.result.transform(Q)))
    return bound_excess, equivariance


def derivative_checks(rng, families, n_max, k_max, h=1e-5):
    """Worst ``lhs - rhs`` of the eight-times derivative bound over random smooth families."""
    worst = -np.inf
    for _ in range(families):
        n, k = _random_dims(rng, n_max, k_max)
        m = int(rng.integers(1, 7))
        F = random_subspace(rng, n, k)
        perp = complement(F)
        maps, rates = [], []
        for _ in range(m):
            u = rng.standard_normal((n - k, k))
            maps.append(u * np.tan(0.1) * rng.uniform(0, 1) / np.linalg.norm(u, 2))
            rates.append(rng.standard_normal((n - k, k)))
        weights = rng.uniform(0.2, 1.0, m)
        weights /= weights.sum()

        def family(mu, maps=maps, rates=rates, weights=weights, F=F, perp=perp):
            return [(float(w), graph_subspace(F, u + mu * v, perp)) for w, u, v in zip(weights, maps, rates)]

        lhs, rhs = average_derivative_check(family, 0.0, h)
        worst = max(worst, lhs - rhs)
    return worst


def grassmann_selftest(trials: int = 1000, n_max: int = 12, k_max: int = 4, seed: int = 42,
                       families: int = 200, derivative_families: int = 50) -> Suite:
    """Seeded run of the Grassmannian identities and averaging bounds."""
    suite = Suite()
    if trials <= 0:
        return suite
    rng = np.random.default_rng(seed)
    norm_err, graph_err, dual_err = _identity_checks(rng, trials, n_max, k_max)
    suite.checks += [
        Check("projection_norm_vs_sin_distance", norm_err, 1e-9),
        Check("graph_distance_vs_arctan", graph_err, 1e-9),
        Check("complement_duality", dual_err, 1e-9),
    ]
    if families > 0:
        excess, equi = averaging_checks(rng, families, n_max, k_max)
        suite.checks += [
            Check("average_distance_excess_over_arcsin_2eps", excess, 0.0),
            Check("average_equivariance", equi, 1e-9),
        ]
    if derivative_families > 0:
        suite.checks.append(Check("average_derivative_excess_over_8x", derivative_checks(
            rng, derivative_families, n_max, k_max), 1e-4))
    t = 0.3
    e1, e2 = np.eye(2)
    known = finsler_distance(make_subspace(e1), make_subspace(np.cos(t) * e1 + np.sin(t) * e2))
    suite.checks.append(Check("known_rotation_t0.3_error", abs(known - t), 1e-12,
                              note=f"distance={known!r}"))
    return suite
