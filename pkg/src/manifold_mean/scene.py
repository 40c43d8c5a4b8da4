"""JSON scene files: parsing, validation and construction of families."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .ambient import AmbientSpace
from .averaging import SolverConfig, WeightedFamily, orbit_family
from .errors import ParseError, ValidationError
from .shapes import CATALOG
from .submanifold import ParametricSubmanifold

ISOMETRY_TOL = 1e-10
GROUP_TOL = 1e-9
MAX_GROUP_ORDER = 720
MIN_MESH = 8
WEIGHT_TOL = 1e-12

SOLVER_KEYS = {"tol", "max_iter", "jacobian_step", "r_max", "epsilon_max", "gap_threshold", "threads",
               "reference_check"}
OUTPUT_FORMATS = ("csv", "obj")


@dataclass
class ShapeSpec:
    name: str
    type: str
    params: dict
    mesh: tuple


@dataclass
class SceneConfig:
    ambient: AmbientSpace
    shapes: dict
    members: list = field(default_factory=list)
    orbit_base: str | None = None
    isometries: list = field(default_factory=list)
    reference: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    out_dir: str = "out"
    formats: tuple = ("csv",)
    depth: int = 3
    seed: int = 0
    source: dict = field(default_factory=dict)

    @property
    def is_orbit(self) -> bool:
        return self.orbit_base is not None

    def submanifold(self, name: str) -> ParametricSubmanifold:
        spec = self.shapes[name]
        shape = CATALOG[spec.type](**spec.params)
        N = ParametricSubmanifold(self.ambient, shape, spec.mesh, label=name)
        N.check_immersion()
        return N

    def family(self) -> WeightedFamily:
        if self.is_orbit:
            return orbit_family(self.submanifold(self.orbit_base), self.isometries, self.reference)
        members = tuple((w, self.submanifold(name)) for name, w in self.members)
        return WeightedFamily(members, self.reference)

    def member_names(self) -> list[str]:
        if self.is_orbit:
            return [f"{self.orbit_base}[{i}]" for i in range(len(self.isometries))]
        return [name for name, _ in self.members]


# -- helpers -------------------------------------------------------------------------

def _require(obj, key, where, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise ValidationError(f"missing required key {where}.{key}".lstrip("."), key=f"{where}.{key}".lstrip("."))
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise ValidationError(f"{where}.{key} has the wrong type", key=f"{where}.{key}".lstrip("."))
    return value


def _number(value, key) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
        raise ValidationError(f"{key} must be a finite number, got {value!r}", key=key)
    return float(value)


def _int(value, key, minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{key} must be an integer, got {value!r}", key=key)
    if minimum is not None and value < minimum:
        raise ValidationError(f"{key} must be at least {minimum}, got {value}", key=key)
    return value


def _tuplify(value):
    if isinstance(value, list):
        return tuple(_tuplify(v) for v in value)
    return value


# -- sections ------------------------------------------------------------------------

def _parse_ambient(raw) -> AmbientSpace:
    if not isinstance(raw, dict):
        raise ValidationError("ambient must be an object", key="ambient")
    kind = _require(raw, "kind", "ambient", str)
    dim = _int(_require(raw, "dim", "ambient"), "ambient.dim", minimum=2)
    if kind == "euclidean":
        return AmbientSpace.euclidean(dim)
    if kind == "sphere":
        radius = _number(raw.get("radius", 1.0), "ambient.radius")
        if radius <= 0:
            raise ValidationError("ambient.radius must be positive", key="ambient.radius")
        return AmbientSpace.sphere(dim, radius)
    raise ValidationError(f"ambient.kind must be 'euclidean' or 'sphere', got {kind!r}", key="ambient.kind")


def _shape_params(cls, params: dict, ambient: AmbientSpace, key: str) -> dict:
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    out = {}
    for k, v in params.items():
        if k not in names or k in ("coord_dim", "sphere_dim"):
            raise ValidationError(f"{key}.{k} is not a parameter of {cls.name}; known: {sorted(names)}",
                                  key=f"{key}.{k}")
        out[k] = _tuplify(v)
    if "coord_dim" in names:
        out["coord_dim"] = ambient.coord_dim
    if "sphere_dim" in names:
        out["sphere_dim"] = ambient.dim
        out.setdefault("radius", ambient.radius)
    return out


def _parse_shapes(raw, ambient: AmbientSpace) -> dict:
    if not isinstance(raw, dict) or not raw:
        raise ValidationError("shapes must be a non-empty object", key="shapes")
    specs = {}
    for name, body in raw.items():
        key = f"shapes.{name}"
        type_name = _require(body, "type", key, str)
        if type_name not in CATALOG:
            raise ValidationError(
                f"{key}.type: unknown shape {type_name!r}; catalog: {', '.join(sorted(CATALOG))}",
                key=f"{key}.type")
        cls = CATALOG[type_name]
        params = body.get("params", {})
        if not isinstance(params, dict):
            raise ValidationError(f"{key}.params must be an object", key=f"{key}.params")
        params = _shape_params(cls, params, ambient, f"{key}.params")
        mesh = body.get("mesh", 64)
        mesh = tuple(mesh) if isinstance(mesh, list) else (mesh,)
        for m in mesh:
            _int(m, f"{key}.mesh", minimum=MIN_MESH)
        try:
            shape = cls(**params)
            ParametricSubmanifold(ambient, shape, mesh, label=name)
        except ValidationError:
            raise
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{key}: {exc}", key=key) from exc
        specs[name] = ShapeSpec(name, type_name, params, mesh)
    return specs


def _rotation(n, spec, key):
    if not isinstance(spec, dict):
        raise ValidationError(f"{key} must be an object", key=key)
    if "order" in spec:
        angle = 2.0 * np.pi / _int(spec["order"], f"{key}.order", minimum=1)
    else:
        angle = _number(_require(spec, "angle", key), f"{key}.angle")
    plane = spec.get("plane", [0, 1])
    if (not isinstance(plane, list) or len(plane) != 2 or plane[0] == plane[1]
            or not all(isinstance(i, int) and 0 <= i < n for i in plane)):
        raise ValidationError(f"{key}.plane must name two distinct coordinate axes", key=f"{key}.plane")
    i, j = plane
    A = np.eye(n)
    c, s = np.cos(angle), np.sin(angle)
    A[i, i], A[i, j], A[j, i], A[j, j] = c, -s, s, c
    return A, np.zeros(n)


def _reflection(n, spec, key):
    normal = np.asarray(spec.get("normal") if isinstance(spec, dict) else spec, dtype=float)
    if normal.shape != (n,) or np.linalg.norm(normal) == 0:
        raise ValidationError(f"{key} needs a nonzero normal with {n} entries", key=key)
    normal = normal / np.linalg.norm(normal)
    return np.eye(n) - 2.0 * np.outer(normal, normal), np.zeros(n)


def _generator(entry, n, ambient, key):
    if not isinstance(entry, dict) or len(entry) != 1:
        raise ValidationError(f"{key} must have exactly one of rotation, reflection, translation, matrix", key=key)
    (kind, spec), = entry.items()
    if kind == "rotation":
        A, b = _rotation(n, spec, f"{key}.rotation")
    elif kind == "reflection":
        A, b = _reflection(n, spec, f"{key}.reflection")
    elif kind == "translation":
        b = np.asarray(spec, dtype=float)
        if b.shape != (n,):
            raise ValidationError(f"{key}.translation needs {n} entries", key=f"{key}.translation")
        A = np.eye(n)
    elif kind == "matrix":
        A = np.asarray(spec.get("matrix") if isinstance(spec, dict) else spec, dtype=float)
        b = np.asarray(spec.get("offset", np.zeros(n)) if isinstance(spec, dict) else np.zeros(n), dtype=float)
        if A.shape != (n, n) or b.shape != (n,):
            raise ValidationError(f"{key}.matrix must be {n} x {n}", key=f"{key}.matrix")
    else:
        raise ValidationError(f"{key}: unknown generator {kind!r}", key=key)
    if np.max(np.abs(A.T @ A - np.eye(n))) > ISOMETRY_TOL:
        raise ValidationError(f"{key} is not orthogonal", key=key)
    if ambient.is_sphere and np.any(b != 0):
        raise ValidationError(f"{key} moves the center of the sphere", key=key)
    return A, b


def close_group(generators) -> list[tuple[np.ndarray, np.ndarray]]:
    """Finite group generated by affine isometries, identity first; breadth-first order."""
    n = generators[0][0].shape[0]
    elements = [(np.eye(n), np.zeros(n))]
    frontier = list(elements)

    def known(A, b):
        return any(np.max(np.abs(A - C)) < GROUP_TOL and np.max(np.abs(b - d)) < GROUP_TOL for C, d in elements)

    while frontier:
        fresh = []
        for A, b in frontier:
            for G, c in generators:
                M, t = G @ A, G @ b + c
                if not known(M, t):
                    elements.append((M, t))
                    fresh.append((M, t))
                    if len(elements) > MAX_GROUP_ORDER:
                        raise ValidationError(
                            f"generators do not close to a finite group within {MAX_GROUP_ORDER} elements",
                            key="family.generators")
        frontier = fresh
    return elements


def _parse_family(raw, shapes: dict, ambient: AmbientSpace, cfg: SceneConfig):
    if not isinstance(raw, dict):
        raise ValidationError("family must be an object", key="family")
    if raw.get("orbit", False):
        base = _require(raw, "base", "family", str)
        if base not in shapes:
            raise ValidationError(f"family.base names unknown shape {base!r}", key="family.base")
        gens = _require(raw, "generators", "family", list)
        if not gens:
            raise ValidationError("family.generators must not be empty", key="family.generators")
        n = ambient.coord_dim
        parsed = [_generator(g, n, ambient, f"family.generators[{i}]") for i, g in enumerate(gens)]
        cfg.orbit_base = base
        cfg.isometries = [(A, None if ambient.is_sphere else b) for A, b in close_group(parsed)]
        count = len(cfg.isometries)
    else:
        members = _require(raw, "members", "family", list)
        if not members:
            raise ValidationError("family.members must not be empty", key="family.members")
        parsed = []
        for i, m in enumerate(members):
            name = _require(m, "shape", f"family.members[{i}]", str)
            if name not in shapes:
                raise ValidationError(f"family.members[{i}].shape names unknown shape {name!r}",
                                      key=f"family.members[{i}].shape")
            w = _number(_require(m, "weight", f"family.members[{i}]"), "weights")
            if w <= 0:
                raise ValidationError(f"weights must be positive; member {i} has {w}", key="weights")
            parsed.append((name, w))
        total = sum(w for _, w in parsed)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValidationError(f"weights sum to {total!r}, not 1", key="weights")
        cfg.members = parsed
        dims = {CATALOG[shapes[name].type](**shapes[name].params).param_dim for name, _ in parsed}
        if len(dims) != 1:
            raise ValidationError("family members have different dimensions", key="family.members")
        count = len(parsed)
    ref = _int(raw.get("reference", 0), "family.reference", minimum=0)
    if ref >= count:
        raise ValidationError(f"family.reference {ref} out of range for {count} members", key="family.reference")
    cfg.reference = ref


def _parse_solver(raw) -> SolverConfig:
    if raw is None:
        return SolverConfig()
    if not isinstance(raw, dict):
        raise ValidationError("solver must be an object", key="solver")
    unknown = set(raw) - SOLVER_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise ValidationError(f"unknown solver key {key!r}; known: {sorted(SOLVER_KEYS)}", key=f"solver.{key}")
    kw: dict[str, Any] = {}
    for k in ("tol", "jacobian_step", "epsilon_max", "gap_threshold"):
        if k in raw:
            kw[k] = _number(raw[k], f"solver.{k}")
            if kw[k] <= 0:
                raise ValidationError(f"solver.{k} must be positive", key=f"solver.{k}")
    if raw.get("r_max") is not None:
        kw["r_max"] = _number(raw["r_max"], "solver.r_max")
    if "max_iter" in raw:
        kw["max_iter"] = _int(raw["max_iter"], "solver.max_iter", minimum=1)
    if "threads" in raw:
        kw["workers"] = _int(raw["threads"], "solver.threads", minimum=1)
    if "reference_check" in raw:
        kw["reference_check"] = bool(raw["reference_check"])
    return SolverConfig(**kw)


def _parse_outputs(raw, cfg: SceneConfig):
    if raw is None:
        return
    if not isinstance(raw, dict):
        raise ValidationError("outputs must be an object", key="outputs")
    if "dir" in raw:
        cfg.out_dir = _require(raw, "dir", "outputs", str)
    if "formats" in raw:
        formats = _require(raw, "formats", "outputs", list)
        for f in formats:
            if f not in OUTPUT_FORMATS:
                raise ValidationError(f"outputs.formats: unknown format {f!r}", key="outputs.formats")
        cfg.formats = tuple(formats)


def build_scene(data: dict) -> SceneConfig:
    """Validate decoded scene JSON and build a config."""
    if not isinstance(data, dict):
        raise ValidationError("a scene must be a JSON object", key="")
    known = {"ambient", "shapes", "family", "solver", "outputs", "seed", "morph"}
    unknown = set(data) - known
    if unknown:
        key = sorted(unknown)[0]
        raise ValidationError(f"unknown top-level key {key!r}", key=key)
    ambient = _parse_ambient(_require(data, "ambient", ""))
    shapes = _parse_shapes(_require(data, "shapes", ""), ambient)
    cfg = SceneConfig(ambient=ambient, shapes=shapes, source=data)
    _parse_family(_require(data, "family", ""), shapes, ambient, cfg)
    cfg.solver = _parse_solver(data.get("solver"))
    _parse_outputs(data.get("outputs"), cfg)
    cfg.seed = _int(data.get("seed", 0), "seed", minimum=0)
    morph = data.get("morph", {})
    if not isinstance(morph, dict):
        raise ValidationError("morph must be an object", key="morph")
    cfg.depth = _int(morph.get("depth", 3), "morph.depth", minimum=1)
    return cfg


def parse_scene(path) -> SceneConfig:
    """Read and validate a UTF-8 JSON scene file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path} is not valid UTF-8: {exc}") from exc
    except OSError as exc:
        raise ParseError(f"cannot read scene {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}", line=exc.lineno) from exc
    return build_scene(data)
