"""Structured triangle and square meshes of the unit square.

Orientation conventions
-----------------------
Every face carries one global unit normal ``n``: outward on the boundary,
and pointing from the lower-id element into the higher-id element on
interior faces.  The global tangent is ``t = n^perp`` with
``(a, b)^perp = (b, -a)``.  An element sees ``n_K = s n`` and
``n_K^perp = s t`` where ``s`` is :func:`element_face_sign`.

Faces are parameterized from their lower-id vertex to their higher-id
vertex; both neighbours use that parameterization, so face polynomial
coefficients need no reflection.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .options import ElementKind

MAX_LEVEL = 12


@dataclass(frozen=True)
class Element:
    id: int
    vertices: np.ndarray  # (nv, 2), counter-clockwise
    area: float
    diameter: float
    centroid: np.ndarray
    faces: tuple  # face ids, local face i joins vertex i and vertex i+1


@dataclass(frozen=True)
class Face:
    id: int
    endpoints: np.ndarray  # (2, 2), parameterization start -> end
    normal: np.ndarray
    tangent: np.ndarray
    length: float
    midpoint: np.ndarray
    elements: tuple  # (elemA, elemB) with elemB == -1 on the boundary
    is_boundary: bool


class Mesh:
    """Immutable array-backed mesh.

    Attributes are numpy arrays indexed by element or face id; use
    :meth:`element` and :meth:`face` for record views.
    """

    def __init__(self, level, element_kind, vertices, elem_vertices):
        self.level = int(level)
        self.element_kind = element_kind
        self.h_reported = 2.0 ** (-self.level)
        self.vertices = np.asarray(vertices, dtype=float)
        self.elem_vertices = np.asarray(elem_vertices, dtype=np.int64)
        self._build_topology()
        for name in ("vertices", "elem_vertices", "elem_faces", "elem_face_signs",
                     "face_vertices", "face_elements", "face_normals", "face_tangents",
                     "face_lengths", "face_midpoints", "face_is_boundary",
                     "elem_areas", "elem_diameters", "elem_centroids"):
            getattr(self, name).flags.writeable = False

    def _build_topology(self):
        ev = self.elem_vertices
        ne, nv = ev.shape
        coords = self.vertices[ev]  # (ne, nv, 2)
        x, y = coords[..., 0], coords[..., 1]
        xn, yn = np.roll(x, -1, axis=1), np.roll(y, -1, axis=1)
        self.elem_areas = 0.5 * np.sum(x * yn - xn * y, axis=1)
        diff = coords[:, :, None, :] - coords[:, None, :, :]
        self.elem_diameters = np.sqrt((diff ** 2).sum(-1)).max(axis=(1, 2))
        self.elem_centroids = _polygon_centroids(coords, self.elem_areas)

        face_of = {}
        face_vertices = []
        face_elements = []
        elem_faces = np.empty((ne, nv), dtype=np.int64)
        for e in range(ne):
            for i in range(nv):
                a, b = int(ev[e, i]), int(ev[e, (i + 1) % nv])
                key = (a, b) if a < b else (b, a)
                fid = face_of.get(key)
                if fid is None:
                    fid = len(face_vertices)
                    face_of[key] = fid
                    face_vertices.append(key)
                    face_elements.append([e, -1])
                else:
                    face_elements[fid][1] = e
                elem_faces[e, i] = fid

        self.elem_faces = elem_faces
        self.face_vertices = np.array(face_vertices, dtype=np.int64)
        self.face_elements = np.array(face_elements, dtype=np.int64)
        self.face_is_boundary = self.face_elements[:, 1] < 0

        p0 = self.vertices[self.face_vertices[:, 0]]
        p1 = self.vertices[self.face_vertices[:, 1]]
        edge = p1 - p0
        self.face_lengths = np.sqrt((edge ** 2).sum(-1))
        self.face_midpoints = 0.5 * (p0 + p1)

        # the first element met while looping in id order is the lower-id
        # neighbour (or the only one); its outward normal is the global one
        nf = len(face_vertices)
        normals = np.empty((nf, 2))
        for e in range(ne):
            for i in range(nv):
                fid = elem_faces[e, i]
                if self.face_elements[fid, 0] == e:
                    a = coords[e, i]
                    b = coords[e, (i + 1) % nv]
                    d = b - a
                    normals[fid] = np.array([d[1], -d[0]]) / np.hypot(d[0], d[1])
        self.face_normals = normals
        self.face_tangents = np.column_stack([normals[:, 1], -normals[:, 0]])
        self.elem_face_signs = np.where(
            self.face_elements[elem_faces, 0] == np.arange(ne)[:, None], 1, -1
        ).astype(np.int64)

    @property
    def num_elements(self):
        return len(self.elem_vertices)

    @property
    def num_faces(self):
        return len(self.face_vertices)

    @property
    def faces_per_element(self):
        return self.elem_vertices.shape[1]

    @property
    def boundary_faces(self):
        return np.flatnonzero(self.face_is_boundary)

    @property
    def interior_faces(self):
        return np.flatnonzero(~self.face_is_boundary)

    def element_coords(self, e):
        return self.vertices[self.elem_vertices[e]]

    def face_endpoints(self, f):
        return self.vertices[self.face_vertices[f]]

    def element(self, e):
        e = _check_index(e, self.num_elements, "element")
        return Element(
            id=e,
            vertices=self.element_coords(e),
            area=float(self.elem_areas[e]),
            diameter=float(self.elem_diameters[e]),
            centroid=self.elem_centroids[e].copy(),
            faces=tuple(int(f) for f in self.elem_faces[e]),
        )

    def face(self, f):
        f = _check_index(f, self.num_faces, "face")
        return Face(
            id=f,
            endpoints=self.face_endpoints(f),
            normal=self.face_normals[f].copy(),
            tangent=self.face_tangents[f].copy(),
            length=float(self.face_lengths[f]),
            midpoint=self.face_midpoints[f].copy(),
            elements=tuple(int(x) for x in self.face_elements[f]),
            is_boundary=bool(self.face_is_boundary[f]),
        )

    def __repr__(self):
        return (f"Mesh(level={self.level}, kind={self.element_kind.value}, "
                f"elements={self.num_elements}, faces={self.num_faces})")


def _check_index(i, n, what):
    i = int(i)
    if not 0 <= i < n:
        raise IndexError(f"{what} id {i} out of range [0, {n})")
    return i


def _polygon_centroids(coords, areas):
    x, y = coords[..., 0], coords[..., 1]
    xn, yn = np.roll(x, -1, axis=1), np.roll(y, -1, axis=1)
    cross = x * yn - xn * y
    cx = np.sum((x + xn) * cross, axis=1) / (6.0 * areas)
    cy = np.sum((y + yn) * cross, axis=1) / (6.0 * areas)
    return np.column_stack([cx, cy])


def build_structured_mesh(level, element_kind, diagonal="up"):
    """Uniform ``2^level x 2^level`` partition of the unit square.

    Triangles split every square along its lower-left to upper-right
    diagonal; ``diagonal="down"`` uses the upper-left to lower-right one
    instead.  ``level = 0`` (a single square) is accepted for fixtures.
    """
    if diagonal not in ("up", "down"):
        raise ParameterError(f"diagonal must be 'up' or 'down', got {diagonal!r}")
    if isinstance(level, bool) or int(level) != level or not 0 <= level <= MAX_LEVEL:
        raise ParameterError(f"level must be an integer in [0, {MAX_LEVEL}], got {level!r}")
    level = int(level)
    kind = ElementKind.parse(element_kind)
    n = 2 ** level
    grid = np.arange(n + 1) / n
    X, Y = np.meshgrid(grid, grid)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    ll = (j * (n + 1) + i).ravel()
    lr, ur, ul = ll + 1, ll + n + 2, ll + n + 1
    if kind is ElementKind.SQUARE:
        elems = np.column_stack([ll, lr, ur, ul])
    else:
        if diagonal == "up":
            lower = np.column_stack([ll, lr, ur])
            upper = np.column_stack([ll, ur, ul])
        else:
            lower = np.column_stack([ll, lr, ul])
            upper = np.column_stack([lr, ur, ul])
        elems = np.empty((2 * n * n, 3), dtype=np.int64)
        elems[0::2] = lower
        elems[1::2] = upper
    return Mesh(level, kind, vertices, elems)


def face_geometry(mesh, face_id):
    """Return ``(n, t, length, midpoint)`` of a face."""
    f = _check_index(face_id, mesh.num_faces, "face")
    return (mesh.face_normals[f].copy(), mesh.face_tangents[f].copy(),
            float(mesh.face_lengths[f]), mesh.face_midpoints[f].copy())


def element_face_sign(mesh, element_id, local_face_index):
    """+1 if the element's outward normal on that face equals the global normal."""
    e = _check_index(element_id, mesh.num_elements, "element")
    i = _check_index(local_face_index, mesh.faces_per_element, "local face")
    return int(mesh.elem_face_signs[e, i])


def dump_mesh(mesh, stream):
    """Write the plain-text debugging dump (``E`` and ``F`` records)."""
    for e in range(mesh.num_elements):
        xy = " ".join(f"{v:.17g}" for v in mesh.element_coords(e).ravel())
        stream.write(f"E {e} {xy}\n")
    for f in range(mesh.num_faces):
        a, b = mesh.face_elements[f]
        nx, ny = mesh.face_normals[f]
        stream.write(f"F {f} {a} {b} {nx:.17g} {ny:.17g}\n")
