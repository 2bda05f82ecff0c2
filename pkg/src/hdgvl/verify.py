"""Manufactured solutions, error norms, projections and convergence rates."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .hybridsystem import error_degree
from .localsolver import outward_normals
from .options import BoundaryKind
from .polybasis import build_element_basis, build_face_basis, element_quadrature, face_quadrature

pi = np.pi
QUANTITIES = ("sigma", "u", "phi", "sigma_check", "phi_hat")


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact fields of one test problem.

    ``u`` and ``f`` return arrays of shape ``(2,) + x.shape``; ``sigma`` and
    ``phi`` return arrays shaped like ``x``.
    """

    name: str
    boundary_kind: BoundaryKind
    u: object
    sigma: object
    phi: object
    f: object
    degree: int = None  # polynomial degree of u for polynomial fixtures


def _exp1():
    def u(x, y):
        return np.array([np.cos(pi * x) * np.sin(pi * y), 2 * np.sin(pi * x) * np.cos(pi * y)])

    def sigma(x, y):
        return pi * np.cos(pi * x) * np.cos(pi * y)

    def phi(x, y):
        return 3 * pi * np.sin(pi * x) * np.sin(pi * y)

    def f(x, y):
        # curl sigma + grad phi
        return np.array([
            -pi ** 2 * np.cos(pi * x) * np.sin(pi * y) + 3 * pi ** 2 * np.cos(pi * x) * np.sin(pi * y),
            pi ** 2 * np.sin(pi * x) * np.cos(pi * y) + 3 * pi ** 2 * np.sin(pi * x) * np.cos(pi * y),
        ])

    return ManufacturedSolution("Exp1Electric", BoundaryKind.ELECTRIC, u, sigma, phi, f)


def _exp2():
    def u(x, y):
        return np.array([np.sin(2 * pi * x) * np.cos(pi * y), 2 * np.cos(2 * pi * x) * np.sin(pi * y)])

    def sigma(x, y):
        return -3 * pi * np.sin(2 * pi * x) * np.sin(pi * y)

    def phi(x, y):
        return -4 * pi * np.cos(2 * pi * x) * np.cos(pi * y)

    def f(x, y):
        s2x, c2x = np.sin(2 * pi * x), np.cos(2 * pi * x)
        sy, cy = np.sin(pi * y), np.cos(pi * y)
        return np.array([
            -3 * pi ** 2 * s2x * cy + 8 * pi ** 2 * s2x * cy,
            6 * pi ** 2 * c2x * sy + 4 * pi ** 2 * c2x * sy,
        ])

    return ManufacturedSolution("Exp2Magnetic", BoundaryKind.MAGNETIC, u, sigma, phi, f)


def _exp3():
    def u(x, y):
        s = np.sin(pi * x) * np.sin(pi * y)
        return np.array([s, s])

    def sigma(x, y):
        return pi * np.cos(pi * x) * np.sin(pi * y) - pi * np.sin(pi * x) * np.cos(pi * y)

    def phi(x, y):
        return -pi * np.cos(pi * x) * np.sin(pi * y) - pi * np.sin(pi * x) * np.cos(pi * y)

    def f(x, y):
        s = 2 * pi ** 2 * np.sin(pi * x) * np.sin(pi * y)
        return np.array([s, s])

    return ManufacturedSolution("Exp3Dirichlet", BoundaryKind.DIRICHLET, u, sigma, phi, f)


def _poly_electric():
    one = np.ones_like
    return ManufacturedSolution(
        "PolyElectric", BoundaryKind.ELECTRIC,
        u=lambda x, y: np.array([y * (1 - y), x * (1 - x)]),
        sigma=lambda x, y: 2 * y - 2 * x,
        phi=lambda x, y: 0.0 * x,
        f=lambda x, y: np.array([2 * one(x), 2 * one(x)]),
        degree=2)


def _poly_magnetic():
    one = np.ones_like
    return ManufacturedSolution(
        "PolyMagnetic", BoundaryKind.MAGNETIC,
        u=lambda x, y: np.array([x * (1 - x), -y * (1 - y)]),
        sigma=lambda x, y: 0.0 * x,
        phi=lambda x, y: 2 * x - 2 * y,
        f=lambda x, y: np.array([2 * one(x), -2 * one(x)]),
        degree=2)


_CASES = {
    "exp1": _exp1, "1": _exp1, "exp1electric": _exp1,
    "exp2": _exp2, "2": _exp2, "exp2magnetic": _exp2,
    "exp3": _exp3, "3": _exp3, "exp3dirichlet": _exp3,
    "polyelectric": _poly_electric, "polymagnetic": _poly_magnetic,
}


def manufactured_case(case_id):
    """Exact solution of experiment 1, 2 or 3 (or a polynomial fixture)."""
    key = str(case_id).strip().lower().replace("_", "")
    try:
        return _CASES[key]()
    except KeyError:
        raise ParameterError(f"unknown manufactured case {case_id!r}") from None


# -- finite-difference oracles ------------------------------------------------

def _ext(x, y):
    # extended precision keeps cancellation noise well below the oracle tolerances
    return np.asarray(x, dtype=np.longdouble), np.asarray(y, dtype=np.longdouble)


def fd_first_derivatives(u, x, y, h=1e-4):
    """Fourth-order central differences of a vector field: (du/dx, du/dy)."""
    x, y = _ext(x, y)
    h = np.longdouble(h)

    def d(shift):
        return (-u(*shift(2)) + 8 * u(*shift(1)) - 8 * u(*shift(-1)) + u(*shift(-2))) / (12 * h)
    ux = d(lambda s: (x + s * h, y))
    uy = d(lambda s: (x, y + s * h))
    return ux.astype(float), uy.astype(float)


def fd_rot_div(u, x, y, h=1e-4):
    ux, uy = fd_first_derivatives(u, x, y, h)
    return ux[1] - uy[0], ux[0] + uy[1]


def fd_vector_laplacian(u, x, y, h=1e-5):
    """``curl rot u - grad div u`` by second-order central differences."""
    x, y = _ext(x, y)
    h = np.longdouble(h)
    c = u(x, y)
    uxx = (u(x + h, y) - 2 * c + u(x - h, y)) / h ** 2
    uyy = (u(x, y + h) - 2 * c + u(x, y - h)) / h ** 2
    uxy = (u(x + h, y + h) - u(x + h, y - h) - u(x - h, y + h) + u(x - h, y - h)) / (4 * h ** 2)
    # rot u = u2_x - u1_y ; curl s = (s_y, -s_x) ; div u = u1_x + u2_y
    curl_rot = np.array([uxy[1] - uyy[0], -uxx[1] + uxy[0]])
    grad_div = np.array([uxx[0] + uxy[1], uxy[0] + uyy[1]])
    return (curl_rot - grad_div).astype(float)


def boundary_residual(sol, npts=200):
    """Largest violation of the boundary table at sampled points of each edge."""
    t = (np.arange(npts) + 0.5) / npts
    zero, one = np.zeros_like(t), np.ones_like(t)
    sides = [  # points, outward normal
        ((t, zero), (0.0, -1.0)), ((one, t), (1.0, 0.0)),
        ((t, one), (0.0, 1.0)), ((zero, t), (-1.0, 0.0)),
    ]
    worst = 0.0
    for (x, y), (nx, ny) in sides:
        u = sol.u(x, y)
        un = u[0] * nx + u[1] * ny
        ut = u[0] * ny - u[1] * nx
        if sol.boundary_kind is BoundaryKind.ELECTRIC:
            vals = [ut, sol.phi(x, y)]
        elif sol.boundary_kind is BoundaryKind.MAGNETIC:
            vals = [un, sol.sigma(x, y)]
        else:
            vals = [ut, un]
        worst = max(worst, max(float(np.abs(v).max()) for v in vals))
    return worst


# -- error norms --------------------------------------------------------------

@dataclass
class ErrorReport:
    e_sigma: float
    e_u: float
    e_phi: float
    e_sigma_check: float
    e_phi_hat: float

    def as_dict(self):
        return {q: getattr(self, "e_" + q) for q in QUANTITIES}


def _element_values(fields, e, points):
    B = fields.local_ops[e].basis.eval(points)
    d = B.shape[1]
    u = fields.u[e]
    return B @ fields.sigma[e], B @ fields.phi[e], np.array([B @ u[:d], B @ u[d:]])


def volume_errors(fields, exact, mesh, degree=None):
    """``(e_sigma, e_phi, e_u)`` in the broken L2 norm over the mesh."""
    k = fields.dofmap.k
    degree = error_degree(k) if degree is None else degree
    es = ep = eu = 0.0
    for e in range(mesh.num_elements):
        q = element_quadrature(mesh.element_kind, degree, mesh.element_coords(e))
        x, y = q.points[:, 0], q.points[:, 1]
        s, p, u = _element_values(fields, e, q.points)
        es += q.weights @ (exact.sigma(x, y) - s) ** 2
        ep += q.weights @ (exact.phi(x, y) - p) ** 2
        eu += q.weights @ ((exact.u(x, y) - u) ** 2).sum(0)
    return math.sqrt(es), math.sqrt(ep), math.sqrt(eu)


def skeleton_errors(fields, exact, mesh, degree=None, count_interior_twice=True):
    """``(e_sigma_check, e_phi_hat)`` over all element boundaries.

    Interior faces contribute once from each neighbour unless
    ``count_interior_twice`` is False.
    """
    k = fields.dofmap.k
    degree = error_degree(k) if degree is None else degree
    es = ep = 0.0
    for e in range(mesh.num_elements):
        for i, f in enumerate(mesh.elem_faces[e]):
            if not count_interior_twice and mesh.face_elements[f, 0] != e:
                continue
            q = face_quadrature(degree, mesh.face_endpoints(f))
            psi = build_face_basis(k, mesh.face_lengths[f], q.params).values
            x, y = q.points[:, 0], q.points[:, 1]
            es += q.weights @ (exact.sigma(x, y) - psi @ fields.sigma_check[e, i]) ** 2
            ep += q.weights @ (exact.phi(x, y) - psi @ fields.phi_hat[e, i]) ** 2
    return math.sqrt(es), math.sqrt(ep)


def compute_errors(fields, exact, mesh, degree=None):
    es, ep, eu = volume_errors(fields, exact, mesh, degree)
    esc, eph = skeleton_errors(fields, exact, mesh, degree)
    return ErrorReport(es, eu, ep, esc, eph)


# -- projections ----------------------------------------------------------------

def element_bases(mesh, k):
    out = []
    for e in range(mesh.num_elements):
        v = mesh.element_coords(e)
        q = element_quadrature(mesh.element_kind, 2 * k + 2, v)
        out.append(build_element_basis(v, k, q, center=mesh.elem_centroids[e]))
    return out


def l2_project(function, mesh, k, target="volume", bases=None, degree=None):
    """Orthonormal-basis moments of ``function``.

    ``target='volume'`` gives per-element moments, shape ``(ne, dim)`` for a
    scalar function or ``(ne, 2 dim)`` for a vector one.  ``'skeleton'``
    gives per-face moments against the face basis, shape ``(nfaces, k+1)``.
    """
    degree = error_degree(k) if degree is None else degree
    target = str(target).lower()
    if target == "volume":
        bases = bases or element_bases(mesh, k)
        out = []
        for e in range(mesh.num_elements):
            q = element_quadrature(mesh.element_kind, degree, mesh.element_coords(e))
            B = bases[e].eval(q.points)
            vals = np.asarray(function(q.points[:, 0], q.points[:, 1]), dtype=float)
            Bw = B.T * q.weights
            if vals.ndim == 2:
                out.append(np.concatenate([Bw @ vals[0], Bw @ vals[1]]))
            else:
                out.append(Bw @ np.broadcast_to(vals, q.weights.shape))
        return np.array(out)
    if target == "skeleton":
        out = np.empty((mesh.num_faces, k + 1))
        for f in range(mesh.num_faces):
            q = face_quadrature(degree, mesh.face_endpoints(f))
            psi = build_face_basis(k, mesh.face_lengths[f], q.params).values
            vals = np.broadcast_to(function(q.points[:, 0], q.points[:, 1]), q.weights.shape)
            out[f] = (psi.T * q.weights) @ vals
        return out
    raise ParameterError(f"unknown projection target {target!r}")


def volume_projection_error(function, mesh, k, degree=None, bases=None):
    """``||g - Pi_W g||`` over the mesh for a scalar function."""
    degree = error_degree(k) if degree is None else degree
    bases = bases or element_bases(mesh, k)
    coeffs = l2_project(function, mesh, k, "volume", bases, degree)
    err = 0.0
    for e in range(mesh.num_elements):
        q = element_quadrature(mesh.element_kind, degree, mesh.element_coords(e))
        diff = function(q.points[:, 0], q.points[:, 1]) - bases[e].eval(q.points) @ coeffs[e]
        err += q.weights @ diff ** 2
    return math.sqrt(err)


def skeleton_projection_errors(function, mesh, k, degree=None, bases=None):
    """Skeleton norms of ``g - P_M g`` and of ``g - Pi_W g`` (interior faces twice)."""
    degree = error_degree(k) if degree is None else degree
    bases = bases or element_bases(mesh, k)
    vol = l2_project(function, mesh, k, "volume", bases, degree)
    face = l2_project(function, mesh, k, "skeleton", degree=degree)
    em = ew = 0.0
    for e in range(mesh.num_elements):
        for f in mesh.elem_faces[e]:
            q = face_quadrature(degree, mesh.face_endpoints(f))
            psi = build_face_basis(k, mesh.face_lengths[f], q.params).values
            g = function(q.points[:, 0], q.points[:, 1])
            em += q.weights @ (g - psi @ face[f]) ** 2
            ew += q.weights @ (g - bases[e].eval(q.points) @ vol[e]) ** 2
    return math.sqrt(em), math.sqrt(ew)


# -- rates ------------------------------------------------------------------------

def eoc(errors, hs):
    """Rates ``log(e1/e2) / log(h1/h2)`` per consecutive pair; None where undefined."""
    errors, hs = list(errors), list(hs)
    if len(errors) != len(hs):
        raise ParameterError("errors and mesh sizes differ in length")
    out = []
    for (e1, e2), (h1, h2) in zip(zip(errors, errors[1:]), zip(hs, hs[1:])):
        if not (e1 > 0 and e2 > 0 and np.isfinite(e1) and np.isfinite(e2)) or h1 == h2:
            out.append(None)
        else:
            out.append(math.log(e1 / e2) / math.log(h1 / h2))
    return out


@dataclass
class LevelResult:
    level: int
    h: float
    errors: ErrorReport
    rates: dict  # quantity -> rate or None; all None on the first level
    ndof: int = 0


@dataclass
class ConvergenceRecord:
    k: int
    rows: list = field(default_factory=list)

    def add(self, level, h, errors, ndof=0):
        if self.rows and not h < self.rows[-1].h:
            raise ParameterError("mesh sizes must strictly decrease")
        if self.rows:
            prev = self.rows[-1]
            rates = {q: eoc([getattr(prev.errors, "e_" + q), getattr(errors, "e_" + q)],
                            [prev.h, h])[0] for q in QUANTITIES}
        else:
            rates = {q: None for q in QUANTITIES}
        self.rows.append(LevelResult(level, h, errors, rates, ndof))
        return self.rows[-1]

    def rate(self, quantity, index=-1):
        return self.rows[index].rates[quantity]

    def error(self, quantity, index=-1):
        return getattr(self.rows[index].errors, "e_" + quantity)


# -- independent residual of the discrete equations ----------------------------

def hdg_residual(result, degree=None):
    """Residuals of the full discrete HDG system at a computed solution.

    Everything is evaluated from the reconstructed fields and the global
    trace vector with fresh quadrature, without the local matrices.  Returns
    a dict of maxima: ``local`` (the three element equations), ``jump`` (weak
    flux equations for every free skeleton dof), ``single_valued`` (largest
    interior mismatch of any numerical trace) and ``boundary`` (violation of
    the boundary table on the boundary faces).
    """
    mesh, fields = result.mesh, result.fields
    dm = fields.dofmap
    ops0 = fields.local_ops[0].kernel
    k, alpha, tau = dm.k, ops0.params.alpha, ops0.params.tau
    hyb = dm.hybridization
    m = k + 1
    degree = 2 * k + 2 if degree is None else degree
    lam = np.append(fields.trace_coeffs, 0.0)[dm.dof_index]  # (nf, 2, m), 0 where constrained
    fm = result.f_moments

    local = 0.0
    jump = np.zeros(dm.ndof)
    face_vals = {}  # (face, elem) -> dict of trace values (global orientation)
    for e in range(mesh.num_elements):
        verts = mesh.element_coords(e)
        basis = fields.local_ops[e].basis
        q = element_quadrature(mesh.element_kind, degree, verts)
        B, Bx, By = basis.eval_grad(q.points)
        d = B.shape[1]
        w = q.weights
        s, p, u = _element_values(fields, e, q.points)
        # (sigma, chi) - (u, curl chi)   curl chi = (chi_y, -chi_x)
        ra = B.T @ (w * s) - (By.T @ (w * u[0]) - Bx.T @ (w * u[1]))
        rb = B.T @ (w * p) - (Bx.T @ (w * u[0]) + By.T @ (w * u[1]))
        # (sigma, rot z) - (phi, div z) - (f, z); rot (b,0) = -b_y, rot (0,b) = b_x
        rc = np.concatenate([-By.T @ (w * s) - Bx.T @ (w * p), Bx.T @ (w * s) - By.T @ (w * p)])
        rc -= fm[e]
        normals = outward_normals(verts)
        for i, f in enumerate(mesh.elem_faces[e]):
            sign = mesh.elem_face_signs[e, i]
            nx, ny = normals[i]
            fq = face_quadrature(degree, mesh.face_endpoints(f))
            psi = build_face_basis(k, mesh.face_lengths[f], fq.params).values
            Bf = basis.eval(fq.points)
            wf = fq.weights
            sf, pf, uf = _element_values(fields, e, fq.points)
            ut_vol = uf[0] * ny - uf[1] * nx
            un_vol = uf[0] * nx + uf[1] * ny
            data_t = psi @ lam[f, 0]
            data_n = psi @ lam[f, 1]
            if hyb.tangential_unknown == "u":
                ucheck = sign * data_t
                scheck = sf + (ut_vol - ucheck) / alpha
            else:
                scheck = data_t
                ucheck = ut_vol + alpha * (sf - scheck)
            if hyb.normal_unknown == "u":
                uhat = sign * data_n
                phat = pf + (un_vol - uhat) / tau
            else:
                phat = data_n
                uhat = un_vol + tau * (pf - phat)
            ra += Bf.T @ (wf * ucheck)
            rb += Bf.T @ (wf * uhat)
            rc += np.concatenate([Bf.T @ (wf * (scheck * ny + phat * nx)),
                                  Bf.T @ (wf * (-scheck * nx + phat * ny))])
            # weak flux equations: tested against the free dofs on this face
            flux_t = scheck * sign if hyb.tangential_unknown == "u" else ucheck
            flux_n = phat * sign if hyb.normal_unknown == "u" else uhat
            for slot, flux in ((0, flux_t), (1, flux_n)):
                idx = dm.dof_index[f, slot]
                if idx[0] >= 0:
                    jump[idx] += psi.T @ (wf * flux)
            face_vals[(f, e)] = {
                "sigma_check": scheck, "phi_hat": phat,
                "u_check_t": sign * ucheck, "u_hat_n": sign * uhat, "sign": sign,
            }
        local = max(local, float(np.abs(np.concatenate([ra, rb, rc])).max()))

    single = 0.0
    for f in mesh.interior_faces:
        a, b = mesh.face_elements[f]
        va, vb = face_vals[(f, a)], face_vals[(f, b)]
        for key in ("sigma_check", "phi_hat", "u_check_t", "u_hat_n"):
            single = max(single, float(np.abs(va[key] - vb[key]).max()))

    boundary = 0.0
    bc = dm.boundary_kind
    for f in mesh.boundary_faces:
        v = face_vals[(f, mesh.face_elements[f, 0])]
        if bc is BoundaryKind.ELECTRIC:
            vals = (v["u_check_t"], v["phi_hat"])
        elif bc is BoundaryKind.MAGNETIC:
            vals = (v["u_hat_n"], v["sigma_check"])
        else:
            vals = (v["u_check_t"], v["u_hat_n"])
        boundary = max(boundary, max(float(np.abs(x).max()) for x in vals))

    return {"local": local, "jump": float(np.abs(jump).max(initial=0.0)),
            "single_valued": single, "boundary": boundary}


__all__ = [
    "ManufacturedSolution", "ErrorReport", "ConvergenceRecord", "LevelResult", "QUANTITIES",
    "manufactured_case", "fd_vector_laplacian", "fd_rot_div", "boundary_residual",
    "volume_errors", "skeleton_errors", "compute_errors", "element_bases", "l2_project",
    "volume_projection_error", "skeleton_projection_errors", "eoc", "hdg_residual",
]
