"""Quadrature rules and orthonormal modal bases on physical elements and faces.

Element bases span the total-degree space P_k on triangles and on squares
alike.  They are built by modified Gram-Schmidt on monomials centered at the
element centroid and scaled by the diameter, so each basis function is stored
as a coefficient row over those monomials and can be evaluated (with exact
derivatives) anywhere.

The vector basis of P_k^2 has ``2 * dim`` members ordered as
``(b_0, 0), ..., (b_{d-1}, 0), (0, b_0), ..., (0, b_{d-1})``.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre
from scipy.special import roots_jacobi

from .errors import DegenerateElementError, ParameterError
from .options import ElementKind

MAX_QUADRATURE_DEGREE = 30
GS_PIVOT_TOL = 1e-12


def scalar_basis_dim(k):
    if k < 0:
        raise ParameterError(f"degree must be >= 0, got {k}")
    return (k + 1) * (k + 2) // 2


def monomial_exponents(k):
    """Exponents (i, j) of x^i y^j with i + j <= k, graded by total degree."""
    return [(p - j, j) for p in range(k + 1) for j in range(p + 1)]


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (n, 2) on elements, (n, 2) physical on faces
    weights: np.ndarray
    degree: int
    params: np.ndarray = None  # face rules: parameter s in [0, 1] per point

    def integrate(self, values):
        return np.tensordot(self.weights, values, axes=(0, 0))


def _check_degree(degree):
    if isinstance(degree, bool) or int(degree) != degree or not 0 <= degree <= MAX_QUADRATURE_DEGREE:
        raise ParameterError(
            f"quadrature exactness must be an integer in [0, {MAX_QUADRATURE_DEGREE}], got {degree!r}")
    return int(degree)


@lru_cache(maxsize=None)
def _gauss_legendre01(npts):
    x, w = legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def _reference_rule(kind, degree):
    npts = degree // 2 + 1
    a, wa = _gauss_legendre01(npts)
    if kind is ElementKind.SQUARE:
        X, Y = np.meshgrid(a, a, indexing="ij")
        W = np.outer(wa, wa)
        return np.column_stack([X.ravel(), Y.ravel()]), W.ravel()
    # collapsed tensor rule: (x, y) = (a (1 - b), b), dx dy = (1 - b) da db
    xb, wb = roots_jacobi(npts, 1.0, 0.0)
    b = 0.5 * (xb + 1.0)
    wb = wb / 4.0
    A, B = np.meshgrid(a, b, indexing="ij")
    W = np.outer(wa, wb)
    pts = np.column_stack([(A * (1.0 - B)).ravel(), B.ravel()])
    return pts, W.ravel()


def element_quadrature(element_kind, exactness_degree, vertices=None):
    """Rule exact for total degree ``exactness_degree``.

    Without ``vertices`` the rule lives on the reference element: the unit
    square [0,1]^2 or the triangle (0,0), (1,0), (0,1).  With vertices it is
    mapped affinely (triangles, parallelograms given counter-clockwise).
    """
    kind = ElementKind.parse(element_kind)
    degree = _check_degree(exactness_degree)
    ref_pts, ref_w = _reference_rule(kind, degree)
    if vertices is None:
        return QuadratureRule(ref_pts.copy(), ref_w.copy(), degree)
    v = np.asarray(vertices, dtype=float)
    if kind is ElementKind.TRIANGLE:
        J = np.column_stack([v[1] - v[0], v[2] - v[0]])
    else:
        J = np.column_stack([v[1] - v[0], v[3] - v[0]])
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    pts = v[0] + ref_pts @ J.T
    return QuadratureRule(pts, ref_w * abs(det), degree)


def face_quadrature(exactness_degree, endpoints=None):
    """Gauss-Legendre rule on a straight face.

    Without endpoints, the rule is on [0, 1] (points stored as (s, 0)).
    With ``endpoints = (a, b)`` the points are ``a + s (b - a)`` and the
    weights are scaled by the face length.
    """
    degree = _check_degree(exactness_degree)
    s, w = _gauss_legendre01(degree // 2 + 1)
    if endpoints is None:
        return QuadratureRule(np.column_stack([s, np.zeros_like(s)]), w.copy(), degree, s.copy())
    a, b = np.asarray(endpoints, dtype=float)
    length = float(np.hypot(*(b - a)))
    return QuadratureRule(a + np.outer(s, b - a), w * length, degree, s.copy())


@dataclass
class ElementBasis:
    """Orthonormal basis of P_k on one element.

    ``coeffs[i]`` holds the monomial coefficients of basis function ``i``
    in the scaled variables ``((x - xc) / scale, (y - yc) / scale)``.
    Tables (``values``, ``dx``, ``dy``) refer to the quadrature rule the
    basis was built with.
    """

    degree: int
    center: np.ndarray
    scale: float
    coeffs: np.ndarray
    quad: QuadratureRule = None
    values: np.ndarray = field(default=None, repr=False)
    dx: np.ndarray = field(default=None, repr=False)
    dy: np.ndarray = field(default=None, repr=False)
    face_tables: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self):
        return self.coeffs.shape[0]

    def _monomials(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        xi = (pts[:, 0] - self.center[0]) / self.scale
        eta = (pts[:, 1] - self.center[1]) / self.scale
        k = self.degree
        px = np.stack([xi ** i for i in range(k + 1)], axis=1)
        py = np.stack([eta ** i for i in range(k + 1)], axis=1)
        exps = monomial_exponents(k)
        m = np.empty((len(pts), len(exps)))
        mx = np.zeros_like(m)
        my = np.zeros_like(m)
        for c, (i, j) in enumerate(exps):
            m[:, c] = px[:, i] * py[:, j]
            if i:
                mx[:, c] = i * px[:, i - 1] * py[:, j] / self.scale
            if j:
                my[:, c] = j * px[:, i] * py[:, j - 1] / self.scale
        return m, mx, my

    def eval(self, points):
        m, _, _ = self._monomials(points)
        return m @ self.coeffs.T

    def eval_grad(self, points):
        """Values and partial derivatives, each of shape (npts, dim)."""
        m, mx, my = self._monomials(points)
        C = self.coeffs.T
        return m @ C, mx @ C, my @ C

    def eval_curl(self, points):
        """curl b = (db/dy, -db/dx), shape (npts, dim, 2)."""
        _, bx, by = self.eval_grad(points)
        return np.stack([by, -bx], axis=-1)

    def eval_vector(self, points):
        """Vector basis values, shape (npts, 2 dim, 2)."""
        b = self.eval(points)
        z = np.zeros(b.shape[:1] + (2 * self.dim, 2))
        z[:, : self.dim, 0] = b
        z[:, self.dim:, 1] = b
        return z

    def eval_vector_rot(self, points):
        """rot z = dz2/dx - dz1/dy for every vector basis member, (npts, 2 dim)."""
        _, bx, by = self.eval_grad(points)
        return np.concatenate([-by, bx], axis=1)

    def eval_vector_div(self, points):
        _, bx, by = self.eval_grad(points)
        return np.concatenate([bx, by], axis=1)

    def translated(self, center, quad=None):
        """Same polynomials on a translated copy of the element."""
        out = ElementBasis(self.degree, np.asarray(center, dtype=float), self.scale, self.coeffs)
        if quad is not None:
            out.tabulate(quad)
        return out

    def tabulate(self, quad):
        self.quad = quad
        self.values, self.dx, self.dy = self.eval_grad(quad.points)
        return self

    def tabulate_face(self, local_face, face_quad):
        self.face_tables[local_face] = self.eval(face_quad.points)
        return self.face_tables[local_face]


def build_element_basis(vertices, k, quad, center=None, scale=None):
    """Orthonormalize centered, diameter-scaled monomials on one element.

    ``quad`` must be a physical rule on the element exact to degree >= 2k.
    """
    if k < 0:
        raise ParameterError(f"degree must be >= 0, got {k}")
    if quad.degree < 2 * k:
        raise ParameterError(f"quadrature degree {quad.degree} < 2k = {2 * k}")
    v = np.asarray(vertices, dtype=float)
    if center is None:
        center = quad.integrate(quad.points) / quad.weights.sum()
    if scale is None:
        diff = v[:, None, :] - v[None, :, :]
        scale = float(np.sqrt((diff ** 2).sum(-1)).max())
    raw = ElementBasis(k, np.asarray(center, dtype=float), scale, np.eye(scalar_basis_dim(k)))
    m = raw.eval(quad.points)
    gram = m.T @ (quad.weights[:, None] * m)

    d = gram.shape[0]
    coeffs = np.eye(d)
    ref = np.sqrt(np.max(np.diag(gram)))
    for i in range(d):
        # two passes of modified Gram-Schmidt keep k = 3 orthonormal to ~1e-15
        for _ in range(2):
            for j in range(i):
                coeffs[i] -= (coeffs[j] @ gram @ coeffs[i]) * coeffs[j]
        nrm2 = coeffs[i] @ gram @ coeffs[i]
        if not nrm2 > (GS_PIVOT_TOL * ref) ** 2:
            raise DegenerateElementError(
                f"Gram-Schmidt pivot {nrm2:.3e} below tolerance at basis function {i}")
        coeffs[i] /= np.sqrt(nrm2)
    basis = ElementBasis(k, raw.center, scale, coeffs)
    return basis.tabulate(quad)


@dataclass
class FaceBasis:
    """Orthonormal Legendre basis of P_k(F) in the face parameter s in [0, 1]."""

    degree: int
    length: float
    values: np.ndarray = None  # at the tabulated parameters, (npts, k+1)

    @property
    def dim(self):
        return self.degree + 1

    def eval(self, s):
        s = np.asarray(s, dtype=float)
        t = 2.0 * s - 1.0
        out = np.empty(s.shape + (self.dim,))
        for m in range(self.dim):
            c = np.zeros(m + 1)
            c[m] = 1.0
            out[..., m] = legendre.legval(t, c) * np.sqrt((2 * m + 1) / self.length)
        return out


def build_face_basis(k, length, params=None):
    fb = FaceBasis(k, float(length))
    if params is not None:
        fb.values = fb.eval(params)
    return fb
