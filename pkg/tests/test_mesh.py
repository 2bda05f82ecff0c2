import io

import numpy as np
import pytest

from hdgvl.errors import ParameterError
from hdgvl.mesh import build_structured_mesh, dump_mesh, element_face_sign, face_geometry
from hdgvl.options import ElementKind


@pytest.mark.parametrize("kind", ["tri", "quad"])
@pytest.mark.parametrize("level", [1, 2, 3, 4])
def test_mesh_invariants(kind, level):
    mesh = build_structured_mesh(level, kind)
    n = 2 ** level
    assert abs(mesh.elem_areas.sum() - 1.0) < 1e-12
    assert np.all(mesh.elem_areas > 0)
    ne = n * n if kind == "quad" else 2 * n * n
    assert mesh.num_elements == ne
    assert len(mesh.boundary_faces) == 4 * n
    expected_faces = 2 * n * (n + 1) + (n * n if kind == "tri" else 0)
    assert mesh.num_faces == expected_faces
    assert np.abs(np.linalg.norm(mesh.face_normals, axis=1) - 1).max() < 1e-14
    assert np.abs((mesh.face_normals * mesh.face_tangents).sum(1)).max() < 1e-15
    assert mesh.h_reported == 2.0 ** -level

    counts = np.bincount(mesh.elem_faces.ravel(), minlength=mesh.num_faces)
    assert np.all(counts[mesh.face_is_boundary] == 1)
    assert np.all(counts[~mesh.face_is_boundary] == 2)


@pytest.mark.parametrize("kind", ["tri", "quad"])
def test_normal_orientation(kind):
    mesh = build_structured_mesh(2, kind)
    for f in mesh.boundary_faces:
        mid = mesh.face_midpoints[f]
        # outward: stepping along n leaves the unit square
        p = mid + 1e-3 * mesh.face_normals[f]
        assert not (0 < p[0] < 1 and 0 < p[1] < 1)
    for f in mesh.interior_faces:
        a, b = mesh.face_elements[f]
        assert a < b
        # n points from a into b
        d = mesh.elem_centroids[b] - mesh.elem_centroids[a]
        assert d @ mesh.face_normals[f] > 0


@pytest.mark.parametrize("kind", ["tri", "quad"])
def test_face_signs_cancel(kind):
    mesh = build_structured_mesh(3, kind)
    total = np.zeros(mesh.num_faces)
    np.add.at(total, mesh.elem_faces.ravel(), mesh.elem_face_signs.ravel())
    assert np.all(total[mesh.interior_faces] == 0)
    assert np.all(total[mesh.boundary_faces] == 1)


def test_counts_level1():
    sq = build_structured_mesh(1, "quad")
    assert (sq.num_elements, sq.num_faces, len(sq.interior_faces), len(sq.boundary_faces)) == (4, 12, 4, 8)
    tr = build_structured_mesh(1, ElementKind.TRIANGLE)
    assert (tr.num_elements, tr.num_faces, len(tr.interior_faces), len(tr.boundary_faces)) == (8, 16, 8, 8)


def test_level2_square_geometry():
    mesh = build_structured_mesh(2, "square")
    assert mesh.h_reported == 0.25
    assert np.allclose(mesh.elem_areas, 0.0625)


def test_face_geometry_examples():
    mesh = build_structured_mesh(1, "quad")
    by_mid = {tuple(np.round(m, 12)): f for f, m in enumerate(mesh.face_midpoints)}
    n, t, length, mid = face_geometry(mesh, by_mid[(0.25, 0.0)])
    assert np.allclose(n, [0, -1]) and np.allclose(t, [-1, 0])
    assert length == 0.5 and np.allclose(mid, [0.25, 0])
    n, t, _, _ = face_geometry(mesh, by_mid[(0.5, 0.25)])
    assert np.allclose(n, [1, 0]) and np.allclose(t, [0, -1])


def test_element_face_sign_examples():
    mesh = build_structured_mesh(1, "tri")
    for f in mesh.boundary_faces:
        e = mesh.face_elements[f, 0]
        i = list(mesh.elem_faces[e]).index(f)
        assert element_face_sign(mesh, e, i) == 1
    f = mesh.interior_faces[0]
    a, b = mesh.face_elements[f]
    ia = list(mesh.elem_faces[a]).index(f)
    ib = list(mesh.elem_faces[b]).index(f)
    assert element_face_sign(mesh, a, ia) == 1
    assert element_face_sign(mesh, b, ib) == -1


def test_triangle_diagonal_and_ccw():
    mesh = build_structured_mesh(1, "tri")
    coords = mesh.element_coords(0)
    assert np.allclose(coords, [[0, 0], [0.5, 0], [0.5, 0.5]])
    assert np.allclose(mesh.element_coords(1), [[0, 0], [0.5, 0.5], [0, 0.5]])


def test_errors_and_immutability():
    with pytest.raises(ParameterError):
        build_structured_mesh(13, "tri")
    with pytest.raises(ParameterError):
        build_structured_mesh(-1, "quad")
    with pytest.raises(ParameterError):
        build_structured_mesh(1.5, "quad")
    mesh = build_structured_mesh(1, "quad")
    with pytest.raises(IndexError):
        face_geometry(mesh, mesh.num_faces)
    with pytest.raises(IndexError):
        element_face_sign(mesh, 0, 4)
    with pytest.raises(ValueError):
        mesh.vertices[0, 0] = 3.0


def test_deterministic_and_dump():
    a = build_structured_mesh(3, "tri")
    b = build_structured_mesh(3, "tri")
    assert a.vertices.tobytes() == b.vertices.tobytes()
    buf = io.StringIO()
    dump_mesh(a, buf)
    lines = buf.getvalue().splitlines()
    assert sum(ln.startswith("E ") for ln in lines) == a.num_elements
    assert sum(ln.startswith("F ") for ln in lines) == a.num_faces
    rec = a.face(0)
    assert rec.is_boundary == bool(a.face_is_boundary[0])
    assert a.element(3).faces == tuple(a.elem_faces[3])


def test_down_diagonal():
    mesh = build_structured_mesh(2, "tri", diagonal="down")
    assert abs(mesh.elem_areas.sum() - 1.0) < 1e-12 and np.all(mesh.elem_areas > 0)
    assert mesh.num_faces == build_structured_mesh(2, "tri").num_faces
    assert np.allclose(build_structured_mesh(1, "tri", "down").element_coords(0),
                       [[0, 0], [0.5, 0], [0, 0.5]])
    with pytest.raises(ParameterError):
        build_structured_mesh(1, "tri", diagonal="left")
