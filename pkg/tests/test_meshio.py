import numpy as np
import pytest

from manifold_mean.errors import IoError, UnsupportedFormat
from manifold_mean.meshio import csv_text, obj_text, read_mesh, write_mesh
from manifold_mean.shapes import Circle
from manifold_mean.submanifold import ParametricSubmanifold


def test_csv_toy_mesh():
    params = np.array([[0.0], [1.0], [2.0]])
    points = np.array([[1.0, 0.0], [0.5, 0.25], [0.0, 1.0]])
    text = csv_text(params, points, np.array([0.0, 0.1, 0.0]))
    lines = text.splitlines()
    assert len(lines) == 4
    assert lines[0] == "vertex_index,u1,x1,x2,offset_norm"
    assert lines[2] == "1,1,0.5,0.25,0.10000000000000001"


def test_csv_has_lf_endings(tmp_path, unit_circle):
    path = write_mesh(unit_circle, unit_circle.mesh_points, tmp_path / "m.csv")
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.endswith(b"\n")


def test_round_trip_is_exact(tmp_path, unit_circle, rng):
    points = unit_circle.mesh_points + 1e-3 * rng.standard_normal(unit_circle.mesh_points.shape)
    offsets = rng.random(unit_circle.n_vertices)
    path = write_mesh(unit_circle, points, tmp_path / "m.csv", offset_norms=offsets)
    params, back, off = read_mesh(path)
    np.testing.assert_array_equal(params, unit_circle.mesh_params)
    np.testing.assert_array_equal(back, points)
    np.testing.assert_array_equal(off, offsets)


def test_csv_rejects_non_finite():
    with pytest.raises(ValueError):
        csv_text(np.zeros((1, 1)), np.array([[np.nan, 0.0]]))


def test_obj_refused_on_sphere(tmp_path, small_circle):
    with pytest.raises(UnsupportedFormat):
        write_mesh(small_circle, small_circle.mesh_points, tmp_path / "m.obj", "obj")


def test_obj_refused_for_curves(tmp_path, space3):
    N = ParametricSubmanifold(space3, Circle(1.0, coord_dim=3), 16)
    with pytest.raises(UnsupportedFormat):
        write_mesh(N, N.mesh_points, tmp_path / "m.obj", "obj")


def test_unknown_format(tmp_path, unit_circle):
    with pytest.raises(UnsupportedFormat):
        write_mesh(unit_circle, unit_circle.mesh_points, tmp_path / "m.ply", "ply")


def test_torus_obj_faces(tmp_path, torus):
    path = write_mesh(torus, torus.mesh_points, tmp_path / "t.obj", "obj")
    lines = path.read_text().splitlines()
    n0, n1 = torus.resolution
    assert sum(line.startswith("v ") for line in lines) == n0 * n1
    faces = [line for line in lines if line.startswith("f ")]
    assert len(faces) == n0 * n1
    indices = np.array([[int(i) for i in f.split()[1:]] for f in faces])
    assert indices.min() == 1 and indices.max() == n0 * n1


def test_open_grid_faces():
    text = obj_text(np.zeros((12, 3)), (3, 4), (False, False))
    assert sum(line.startswith("f ") for line in text.splitlines()) == 2 * 3


def test_write_failure_is_io_error(tmp_path, unit_circle):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(IoError):
        write_mesh(unit_circle, unit_circle.mesh_points, blocker / "m.csv")


def test_read_missing_file(tmp_path):
    with pytest.raises(IoError):
        read_mesh(tmp_path / "missing.csv")
