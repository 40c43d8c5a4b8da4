import copy
import json

import numpy as np
import pytest

from manifold_mean.errors import ParseError, ValidationError
from manifold_mean.scene import build_scene, close_group, parse_scene

MINIMAL = {
    "ambient": {"kind": "euclidean", "dim": 2},
    "shapes": {
        "a": {"type": "circle", "params": {"radius": 1.0}, "mesh": 32},
        "b": {"type": "circle", "params": {"radius": 1.1}, "mesh": 32},
    },
    "family": {"members": [{"shape": "a", "weight": 0.5}, {"shape": "b", "weight": 0.5}]},
}

ORBIT = {
    "ambient": {"kind": "euclidean", "dim": 2},
    "shapes": {"w": {"type": "fourier_circle", "params": {"radius": 1.0, "modes": [[2, 0.01, 0.3]]}, "mesh": 32}},
    "family": {"orbit": True, "base": "w", "generators": [{"rotation": {"order": 5}}]},
}


def scene(base=MINIMAL, **changes):
    data = copy.deepcopy(base)
    for path, value in changes.items():
        *head, last = path.split("__")
        node = data
        for k in head:
            node = node[int(k)] if isinstance(node, list) else node[k]
        if isinstance(node, list):
            node[int(last)] = value
        else:
            node[last] = value
    return data


def validation_key(data):
    with pytest.raises(ValidationError) as info:
        build_scene(data)
    return info.value.key, str(info.value)


def test_minimal_scene():
    cfg = build_scene(scene())
    fam = cfg.family()
    assert cfg.member_names() == ["a", "b"]
    np.testing.assert_allclose(fam.weights, [0.5, 0.5])
    assert cfg.formats == ("csv",)
    assert cfg.depth == 3 and cfg.seed == 0


def test_bad_weights():
    key, _ = validation_key(scene(family__members__1__weight=0.4))
    assert key == "weights"


def test_negative_weight():
    data = scene(family={"members": [{"shape": "a", "weight": 1.5}, {"shape": "b", "weight": -0.5}]})
    assert validation_key(data)[0] == "weights"


def test_unknown_shape_lists_catalog():
    key, message = validation_key(scene(shapes__a__type="helix9"))
    assert key == "shapes.a.type"
    for name in ("circle", "torus", "latitude_curve"):
        assert name in message


def test_unknown_shape_parameter():
    key, _ = validation_key(scene(shapes__a__params={"radius": 1.0, "colour": 2}))
    assert key == "shapes.a.params.colour"


def test_coordinate_dimension_is_not_a_parameter():
    key, _ = validation_key(scene(shapes__a__params={"radius": 1.0, "coord_dim": 3}))
    assert key == "shapes.a.params.coord_dim"


def test_mesh_too_coarse():
    key, _ = validation_key(scene(shapes__a__mesh=4))
    assert key == "shapes.a.mesh"


def test_missing_family():
    data = scene()
    del data["family"]
    assert validation_key(data)[0] == "family"


def test_unknown_member_shape():
    assert validation_key(scene(family__members__0__shape="zz"))[0] == "family.members[0].shape"


def test_unknown_ambient():
    assert validation_key(scene(ambient={"kind": "hyperbolic", "dim": 2}))[0] == "ambient.kind"


def test_unknown_top_level_key():
    assert validation_key(scene(colour="red"))[0] == "colour"


def test_unknown_solver_key():
    assert validation_key(scene(solver={"tolerance": 1e-9}))[0] == "solver.tolerance"


def test_solver_threads():
    cfg = build_scene(scene(solver={"tol": 1e-9, "threads": 2, "max_iter": 20}))
    assert (cfg.solver.tol, cfg.solver.workers, cfg.solver.max_iter) == (1e-9, 2, 20)


def test_unknown_output_format():
    assert validation_key(scene(outputs={"formats": ["ply"]}))[0] == "outputs.formats"


def test_parse_error_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "ambient": {"kind": "euclidean", "dim": 2},\n  "shapes": {,}\n}\n')
    with pytest.raises(ParseError) as info:
        parse_scene(path)
    assert info.value.line == 3


def test_parse_missing_file(tmp_path):
    with pytest.raises(ParseError):
        parse_scene(tmp_path / "none.json")


def test_parse_round_trip(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(scene()))
    assert parse_scene(path).member_names() == ["a", "b"]


def test_orbit_closes_c5():
    cfg = build_scene(scene(ORBIT))
    assert len(cfg.isometries) == 5
    assert cfg.member_names() == [f"w[{i}]" for i in range(5)]
    np.testing.assert_allclose(cfg.family().weights, 0.2)


def test_dihedral_group():
    data = scene(ORBIT, family__generators=[{"rotation": {"order": 5}}, {"reflection": {"normal": [0, 1]}}])
    assert len(build_scene(data).isometries) == 10


def test_non_orthogonal_matrix():
    data = scene(ORBIT, family__generators=[{"matrix": {"matrix": [[1.0, 0.1], [0.0, 1.0]]}}])
    assert validation_key(data)[0] == "family.generators[0]"


def test_translation_generates_infinite_group():
    data = scene(ORBIT, family__generators=[{"translation": [0.1, 0.0]}])
    assert validation_key(data)[0] == "family.generators"


def test_irrational_rotation_is_infinite():
    data = scene(ORBIT, family__generators=[{"rotation": {"angle": 1.0}}])
    assert validation_key(data)[0] == "family.generators"


def test_sphere_translation_rejected():
    data = scene(ORBIT, ambient={"kind": "sphere", "dim": 2},
                 shapes={"w": {"type": "latitude_curve", "params": {"height": 0.3}, "mesh": 32}},
                 family__generators=[{"translation": [0.1, 0.0, 0.0]}])
    assert validation_key(data)[0] == "family.generators[0]"


def test_close_group_identity_first():
    A = np.array([[0.0, -1.0], [1.0, 0.0]])
    group = close_group([(A, np.zeros(2))])
    assert len(group) == 4
    np.testing.assert_array_equal(group[0][0], np.eye(2))


def test_sphere_ambient_sets_dimensions():
    data = {
        "ambient": {"kind": "sphere", "dim": 2, "radius": 2.0},
        "shapes": {"lat": {"type": "latitude_curve", "params": {"height": 0.3}, "mesh": 16}},
        "family": {"members": [{"shape": "lat", "weight": 1.0}]},
    }
    N = build_scene(data).submanifold("lat")
    np.testing.assert_allclose(np.linalg.norm(N.mesh_points, axis=1), 2.0, atol=1e-12)
