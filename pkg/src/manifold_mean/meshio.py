"""Mesh files: CSV for any sampled submanifold, OBJ for surfaces in R^3."""
from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .errors import IoError, UnsupportedFormat


def _fmt(x: float) -> str:
    return "%.17g" % x


def csv_text(params: np.ndarray, points: np.ndarray, offset_norms: np.ndarray | None = None) -> str:
    params = np.atleast_2d(np.asarray(params, dtype=float))
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if params.shape[0] != points.shape[0]:
        raise ValueError("params and points must have one row per vertex")
    if not np.all(np.isfinite(points)):
        raise ValueError("mesh points must be finite")
    if offset_norms is None:
        offset_norms = np.zeros(points.shape[0])
    header = (["vertex_index"] + [f"u{i + 1}" for i in range(params.shape[1])]
              + [f"x{i + 1}" for i in range(points.shape[1])] + ["offset_norm"])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for i, (u, x, o) in enumerate(zip(params, points, offset_norms)):
        writer.writerow([str(i)] + [_fmt(v) for v in u] + [_fmt(v) for v in x] + [_fmt(o)])
    return buf.getvalue()


def obj_text(points: np.ndarray, resolution: tuple, periodic: tuple) -> str:
    """Vertices plus quad faces from the parameter grid (1-based OBJ indices)."""
    n0, n1 = resolution
    lines = ["v " + " ".join(_fmt(v) for v in x) for x in points]
    rows = n0 if periodic[0] else n0 - 1
    cols = n1 if periodic[1] else n1 - 1
    for i in range(rows):
        for j in range(cols):
            a = i * n1 + j
            b = ((i + 1) % n0) * n1 + j
            c = ((i + 1) % n0) * n1 + (j + 1) % n1
            d = i * n1 + (j + 1) % n1
            lines.append(f"f {a + 1} {b + 1} {c + 1} {d + 1}")
    return "\n".join(lines) + "\n"


def write_mesh(N, points, path, fmt: str = "csv", offset_norms=None) -> Path:
    """Write the mesh of N with vertex positions ``points``.

    ``N`` supplies the parameter grid and ambient space; ``points`` are the
    vertex positions (for instance an averaged section over N's mesh).
    """
    path = Path(path)
    points = np.asarray(points, dtype=float)
    if fmt == "csv":
        text = csv_text(N.mesh_params, points, offset_norms)
    elif fmt == "obj":
        if N.ambient.is_sphere or N.ambient.dim != 3 or N.param_dim != 2:
            raise UnsupportedFormat("OBJ output is only available for surfaces in Euclidean R^3")
        text = obj_text(points, N.resolution, tuple(ax.periodic for ax in N.axes))
    else:
        raise UnsupportedFormat(f"unknown mesh format {fmt!r}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc
    return path


def read_mesh(path):
    """Parse a CSV mesh written by :func:`write_mesh`.

    Returns ``(params, points, offset_norms)``.
    """
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(exc.errno, f"cannot read {path}: {exc.strerror}") from exc
    header, body = rows[0], rows[1:]
    n_u = sum(1 for h in header if h.startswith("u"))
    n_x = sum(1 for h in header if h.startswith("x"))
    data = np.array([[float(v) for v in row[1:]] for row in body]).reshape(len(body), n_u + n_x + 1)
    return data[:, :n_u], data[:, n_u:n_u + n_x], data[:, -1]
