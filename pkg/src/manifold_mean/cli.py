"""``manifold-mean`` command line interface.

Exit codes: 0 all contracts pass, 2 a contract failed, 3 bad input, 4 the
solver failed. Errors are also written to stderr as one JSON object.
"""
from __future__ import annotations

import json
import math
import sys
import time
from collections import Counter
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import __version__
from .averaging import (
    AveragedSection,
    average_family,
    c1_distance,
    invariance_check,
    midpoint,
    morph,
)
from .diagnostics import Check, grassmann_selftest, tube_estimates
from .errors import (
    EpsilonTooLarge,
    IoError,
    ManifoldMeanError,
    SceneError,
    SliceFailure,
    UnsupportedFormat,
)
from .meshio import write_mesh
from .scene import SceneConfig, parse_scene
from .submanifold import gentleness_report

EXIT_OK = 0
EXIT_CONTRACT = 2
EXIT_INPUT = 3
EXIT_SOLVER = 4

INVARIANCE_BOUND = 1e-7
REFERENCE_BOUND = 1e-6


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, EpsilonTooLarge):
        return EXIT_CONTRACT
    if isinstance(exc, (SceneError, UnsupportedFormat, IoError, OSError)):
        return EXIT_INPUT
    return EXIT_SOLVER


def error_payload(exc: BaseException) -> dict:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": exit_code_for(exc)}
    for attr in ("key", "line", "epsilon", "limit", "gap", "label", "dyadic_time"):
        value = getattr(exc, attr, None)
        if value is not None:
            payload[attr] = value
    if isinstance(exc, SliceFailure):
        payload["failures"] = {str(i): {"error": type(e).__name__, "message": str(e)}
                               for i, e in sorted(exc.failures.items())}
    return payload


# -- report pieces ----------------------------------------------------------------------

def contract(name, measured, bound, upper=True, note=""):
    return Check(name, measured, bound, upper, note).row()


def slice_summary(section: AveragedSection) -> dict:
    hist = Counter(int(i) for i in section.iterations)
    return {
        "max_residual": float(section.residuals.max()),
        "min_jacobian_eigenvalue": float(section.min_eigenvalues.min()),
        "iteration_histogram": {str(k): hist[k] for k in sorted(hist)},
        "max_offset": float(section.offset_norms.max()),
        "vertices": int(len(section.points)),
    }


def section_contracts(section: AveragedSection, names, tol) -> list[dict]:
    s = section.summary
    eps = s["epsilon"]
    rows = [contract("c0_max_offset", s["max_offset"], s["c0_bound"], note="max |w*| <= 100 eps + 1e-8")]
    for name, value in zip(names, s["c1_to_members"]):
        ratio = value / s["c1_bound"] if s["c1_bound"] > 0 else 0.0
        rows.append(contract(f"c1_distance[{name}]", value, s["c1_bound"],
                             note=f"<= 136 sqrt(eps); ratio {ratio:.3e}"))
    bound = tol * (1.0 + s["max_offset"])
    rows.append(contract("slice_residual", s["max_residual"], bound, note="Newton certificate"))
    rows.append(contract("slice_jacobian_positive", s["min_jacobian_eigenvalue"], 0.0, upper=False,
                         note="min eigenvalue of the symmetrized slice derivative"))
    if "reference_shift" in s:
        rows.append(contract("reference_independence", s["reference_shift"], REFERENCE_BOUND))
    if eps == 0.0:
        rows[0]["note"] += "; identical members"
    return rows


def write_section(cfg: SceneConfig, section: AveragedSection, out_dir: Path, stem: str) -> list[str]:
    written = []
    for fmt in cfg.formats:
        if fmt == "obj" and (section.base.ambient.is_sphere or section.base.ambient.dim != 3
                             or section.base.param_dim != 2):
            if len(cfg.formats) == 1:
                raise UnsupportedFormat("OBJ output is only available for surfaces in Euclidean R^3")
            continue
        path = out_dir / f"{stem}.{fmt}"
        write_mesh(section.base, section.points, path, fmt, section.offset_norms)
        written.append(path.name)
    return written


# -- commands ---------------------------------------------------------------------------

def cmd_average(cfg: SceneConfig, out_dir: Path) -> dict:
    family = cfg.family()
    section = average_family(family, cfg.solver)
    names = cfg.member_names()
    contracts = section_contracts(section, names, cfg.solver.tol)
    report = {"epsilon": section.summary["epsilon"], "slices": slice_summary(section)}
    if cfg.is_orbit:
        inv = invariance_check(family, section)
        report["invariance"] = inv
        contracts.append(contract("invariance", inv, INVARIANCE_BOUND,
                                  note=f"group of order {len(cfg.isometries)}"))
    report["contracts"] = contracts
    report["files"] = write_section(cfg, section, out_dir, "average")
    return report


def _pair(cfg: SceneConfig):
    if cfg.is_orbit or len(cfg.members) != 2:
        raise SceneError("this command needs an explicit family of exactly two members")
    family = cfg.family()
    return family.submanifolds


def cmd_midpoint(cfg: SceneConfig, out_dir: Path) -> dict:
    a, b = _pair(cfg)
    section = midpoint(a, b, cfg.solver)
    return {
        "epsilon": section.summary["epsilon"],
        "slices": slice_summary(section),
        "contracts": section_contracts(section, cfg.member_names(), cfg.solver.tol),
        "files": write_section(cfg, section, out_dir, "midpoint"),
    }


def cmd_morph(cfg: SceneConfig, out_dir: Path, depth: int) -> dict:
    a, b = _pair(cfg)
    frames = morph(a, b, depth, cfg.solver)
    count = 2 ** depth
    rows, contracts, files = [], [], []
    for k, frame in enumerate(frames):
        stem = f"morph_{k:0{len(str(count))}d}_of_{count}"
        row = {"index": k, "t": frame.t}
        if frame.section is not None:
            row["epsilon"] = frame.section.summary["epsilon"]
            row["slices"] = slice_summary(frame.section)
            for c in section_contracts(frame.section, ["left", "right"], cfg.solver.tol):
                c["name"] = f"t={frame.t}:{c['name']}"
                contracts.append(c)
        N = frame.submanifold
        path = out_dir / f"{stem}.csv"
        write_mesh(N, N.mesh_points, path, "csv")
        files.append(path.name)
        rows.append(row)
    return {"depth": depth, "frames": rows, "contracts": contracts, "files": files}


def cmd_distance(cfg: SceneConfig, out_dir: Path) -> dict:
    family = cfg.family()
    names = cfg.member_names()
    subs = family.submanifolds
    matrix = [[0.0 if i == j else c1_distance(A, B) for j, B in enumerate(subs)] for i, A in enumerate(subs)]
    eps = max((max(row) for row in matrix), default=0.0)
    return {"members": names, "c1_distance": matrix, "epsilon": eps,
            "epsilon_limit": cfg.solver.epsilon_max, "contracts": []}


def cmd_diagnose(cfg: SceneConfig, out_dir: Path) -> dict:
    names = cfg.member_names()
    if len(names) != 1:
        raise SceneError("diagnose needs a single-member scene")
    N = cfg.family().submanifolds[0]
    gentle = gentleness_report(N)
    suite = tube_estimates(N)
    contracts = suite.rows()
    contracts.append(contract("gentleness_scale", gentle.scale_c, 1.0, note=gentle.note))
    return {
        "gentleness": {k: getattr(gentle, k) for k in
                       ("second_form_norm", "curvature_bound", "injectivity_estimate", "scale_c", "gentle", "note")},
        "contracts": contracts,
        "sample_errors": suite.errors,
        "failed": suite.failed() + ([] if gentle.gentle else ["gentleness_scale"]),
    }


def cmd_selftest(trials, n_max, k_max, seed) -> dict:
    suite = grassmann_selftest(trials=trials, n_max=n_max, k_max=k_max, seed=seed)
    return {"trials": trials, "n_max": n_max, "k_max": k_max, "seed": seed, "contracts": suite.rows()}


# -- driver --------------------------------------------------------------------------

def _load(scene, tol, max_iter, seed, threads, out_dir) -> SceneConfig:
    cfg = parse_scene(scene)
    solver = cfg.solver
    if tol is not None:
        solver = replace(solver, tol=tol)
    if max_iter is not None:
        solver = replace(solver, max_iter=max_iter)
    if threads is not None:
        solver = replace(solver, workers=threads)
    cfg.solver = solver
    if seed is not None:
        cfg.seed = seed
    if out_dir is not None:
        cfg.out_dir = str(out_dir)
    return cfg


def _finish(command: str, report: dict, out_dir: Path | None, started: float, echo=None) -> int:
    report["command"] = command
    report["version"] = __version__
    if echo is not None:
        report["scene"] = echo
    report["all_pass"] = all(row["pass"] for row in report.get("contracts", []))
    report["timing"] = {"wall_seconds": time.perf_counter() - started}
    code = EXIT_OK if report["all_pass"] else EXIT_CONTRACT
    if out_dir is not None:
        path = out_dir / f"{command}_report.json"
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            path.write_text(dump_json(report), encoding="utf-8", newline="\n")
        except OSError as exc:
            raise IoError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc
    for row in report.get("contracts", []):
        mark = "PASS" if row["pass"] else "FAIL"
        click.echo(f"{mark} {row['name']}: {row['measured']:.6g} {row['relation']} {row['bound']:.6g}")
    click.echo(f"{command}: {'all contracts pass' if code == EXIT_OK else 'contract failure'}")
    return code


def _run(command, scene, tol, max_iter, seed, threads, out_dir, depth=None):
    started = time.perf_counter()
    try:
        cfg = _load(scene, tol, max_iter, seed, threads, out_dir)
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if command == "average":
            report = cmd_average(cfg, out)
        elif command == "midpoint":
            report = cmd_midpoint(cfg, out)
        elif command == "morph":
            report = cmd_morph(cfg, out, depth if depth is not None else cfg.depth)
        elif command == "distance":
            report = cmd_distance(cfg, out)
        else:
            report = cmd_diagnose(cfg, out)
        report["seed"] = cfg.seed
        code = _finish(command, report, out, started, echo=cfg.source)
    except (ManifoldMeanError, OSError) as exc:
        payload = error_payload(exc)
        click.echo(f"{command} failed: {type(exc).__name__}: {exc}")
        click.echo(dump_json(payload), err=True, nl=False)
        code = payload["exit_code"]
    sys.exit(code)


scene_option = click.option("--scene", required=True, type=click.Path(dir_okay=False), help="Scene JSON file.")


def solver_options(f):
    f = click.option("--tol", type=float, default=None, help="Slice residual tolerance.")(f)
    f = click.option("--max-iter", type=int, default=None, help="Newton iteration limit per slice.")(f)
    f = click.option("--seed", type=int, default=None, help="Seed recorded in the report.")(f)
    f = click.option("--threads", type=click.IntRange(min=1), default=None, help="Worker processes for slices.")(f)
    f = click.option("--out-dir", type=click.Path(file_okay=False), default=None, help="Output directory.")(f)
    return f


@click.group()
@click.version_option(__version__)
def main():
    """Average nearby submanifolds and check the tube estimates."""


@main.command()
@scene_option
@solver_options
def average(scene, tol, max_iter, seed, threads, out_dir):
    """Center-of-mass submanifold of the scene's family."""
    _run("average", scene, tol, max_iter, seed, threads, out_dir)


@main.command(name="midpoint")
@scene_option
@solver_options
def midpoint_cmd(scene, tol, max_iter, seed, threads, out_dir):
    """Equal-weight average of a two-member family."""
    _run("midpoint", scene, tol, max_iter, seed, threads, out_dir)


@main.command(name="morph")
@scene_option
@solver_options
@click.option("--depth", type=click.IntRange(min=1), default=None, help="Number of midpoint refinements.")
def morph_cmd(scene, tol, max_iter, seed, threads, out_dir, depth):
    """Repeated midpoints between the two members."""
    _run("morph", scene, tol, max_iter, seed, threads, out_dir, depth)


@main.command()
@scene_option
@solver_options
def distance(scene, tol, max_iter, seed, threads, out_dir):
    """Pairwise C1 distances between family members."""
    _run("distance", scene, tol, max_iter, seed, threads, out_dir)


@main.command()
@scene_option
@solver_options
def diagnose(scene, tol, max_iter, seed, threads, out_dir):
    """Tube-estimate suite on a single submanifold."""
    _run("diagnose", scene, tol, max_iter, seed, threads, out_dir)


@main.command()
@click.option("--trials", type=click.IntRange(min=0), default=1000, show_default=True)
@click.option("--n-max", type=click.IntRange(min=2), default=12, show_default=True)
@click.option("--k-max", type=click.IntRange(min=1), default=4, show_default=True)
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), default=None)
def selftest(trials, n_max, k_max, seed, out_dir):
    """Seeded Grassmannian identity suite."""
    started = time.perf_counter()
    try:
        report = cmd_selftest(trials, n_max, k_max, seed)
        code = _finish("selftest", report, Path(out_dir) if out_dir else None, started)
    except (ManifoldMeanError, OSError) as exc:
        payload = error_payload(exc)
        click.echo(dump_json(payload), err=True, nl=False)
        code = payload["exit_code"]
    sys.exit(code)


if __name__ == "__main__":
    main()
