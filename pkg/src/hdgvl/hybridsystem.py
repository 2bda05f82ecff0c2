"""Skeleton unknowns, global assembly, solution and field reconstruction.

Global trace fields live on every face in the face's own orientation:

* tangential slot: ``lambda_t = u_check . t`` (types I, III) or
  ``varsigma = sigma_check`` (type II);
* normal slot: ``lambda_n = u_hat . n`` (types II, III) or
  ``lambda = phi_hat`` (type I).

An element sees ``s * lambda`` for the vector-valued slots and the bare value
for the scalar ones, with ``s`` the element/face orientation sign.  Those
signs live only in the gather operator built here.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AssemblyError, ConvergenceError, NotSPDError, ParameterError
from .linalg import SymmetricSparse, cg_solve, cholesky_factor, cholesky_solve, spmv
from .localsolver import LocalFields, StabilizationParams, assemble_local_system, flux_pairing_system
from .options import BoundaryKind, HybridizationType
from .polybasis import build_element_basis, element_quadrature, face_quadrature

_ESSENTIAL = {
    # (slot unknown) -> boundary kinds whose table zeroes that unknown
    ("t", "u"): {BoundaryKind.ELECTRIC, BoundaryKind.DIRICHLET},
    ("t", "sigma"): {BoundaryKind.MAGNETIC},
    ("n", "u"): {BoundaryKind.MAGNETIC, BoundaryKind.DIRICHLET},
    ("n", "phi"): {BoundaryKind.ELECTRIC},
}


@dataclass
class DofMap:
    """Numbering of the free skeleton moments.

    ``dof_index[f, slot, q]`` is the global index of moment ``q`` of slot
    ``slot`` (0 tangential, 1 normal) on face ``f``, or -1 if that moment is
    constrained to zero.
    """

    k: int
    hybridization: HybridizationType
    boundary_kind: BoundaryKind
    dof_index: np.ndarray
    constrained: np.ndarray  # (nfaces, 2) bool
    vector_slot: tuple  # (tangential, normal): True if the slot carries a sign
    elem_dofs: np.ndarray  # (ne, ntr), -1 for constrained
    elem_signs: np.ndarray  # (ne, ntr)

    @property
    def ndof(self):
        return int(self.dof_index.max(initial=-1) + 1)

    @property
    def face_dim(self):
        return self.k + 1

    def constrained_faces(self, slot):
        return np.flatnonzero(self.constrained[:, slot])

    def gather(self, x):
        """Element trace data (element orientation) from a global vector."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.ndof,):
            raise AssemblyError(f"trace vector has shape {x.shape}, expected ({self.ndof},)")
        ext = np.append(x, 0.0)
        return self.elem_signs * ext[self.elem_dofs]


def build_trace_dofmap(mesh, k, hybridization, boundary_kind):
    hyb = HybridizationType.parse(hybridization)
    bc = BoundaryKind.parse(boundary_kind)
    if k < 0:
        raise ParameterError(f"degree must be >= 0, got {k}")
    m = k + 1
    nf = mesh.num_faces
    unknown = {"t": hyb.tangential_unknown, "n": hyb.normal_unknown}
    constrained = np.zeros((nf, 2), dtype=bool)
    for slot, key in enumerate("tn"):
        if bc in _ESSENTIAL[(key, unknown[key])]:
            constrained[mesh.face_is_boundary, slot] = True

    dof_index = -np.ones((nf, 2, m), dtype=np.int64)
    free = ~constrained
    # number face by face so a face's moments are contiguous
    count = 0
    for f in range(nf):
        for slot in range(2):
            if free[f, slot]:
                dof_index[f, slot] = np.arange(count, count + m)
                count += m

    vector_slot = (unknown["t"] == "u", unknown["n"] == "u")
    ne, nfe = mesh.elem_faces.shape
    elem_dofs = np.empty((ne, 2, nfe, m), dtype=np.int64)
    elem_signs = np.empty((ne, 2, nfe, m))
    for slot in range(2):
        elem_dofs[:, slot] = dof_index[mesh.elem_faces, slot]
        s = mesh.elem_face_signs if vector_slot[slot] else np.ones_like(mesh.elem_face_signs)
        elem_signs[:, slot] = s[:, :, None]
    elem_signs[elem_dofs < 0] = 0.0
    return DofMap(k, hyb, bc, dof_index, constrained, vector_slot,
                  elem_dofs.reshape(ne, -1), elem_signs.reshape(ne, -1))


def assembly_degree(k):
    return 2 * k + 2


def error_degree(k):
    return 2 * k + 6


def build_local_operators(mesh, k, params=None, hybridization=HybridizationType.TYPE_III,
                          reuse=True):
    """Local operators for every element.

    With ``reuse`` the factorized kernel is shared among elements that are
    translates of each other with the same face parameterizations.
    """
    params = params or StabilizationParams()
    hyb = HybridizationType.parse(hybridization)
    deg = assembly_degree(k)
    cache = {}
    out = []
    for e in range(mesh.num_elements):
        verts = mesh.element_coords(e)
        faces = mesh.elem_faces[e]
        starts = mesh.face_vertices[faces, 0] == mesh.elem_vertices[e]
        key = (tuple(np.round((verts - verts[0]) / mesh.elem_diameters[e], 10).ravel()),
               float(np.round(mesh.elem_diameters[e], 14)), tuple(starts))
        quad = element_quadrature(mesh.element_kind, deg, verts)
        center = mesh.elem_centroids[e]
        hit = cache.get(key) if reuse else None
        if hit is None:
            basis = build_element_basis(verts, k, quad, center=center)
            rules = [face_quadrature(deg, mesh.face_endpoints(f)) for f in faces]
            ops = assemble_local_system(verts, basis, params, hyb, rules, element_id=e)
            cache[key] = ops
        else:
            basis = hit.basis.translated(center, quad)
            ops = type(hit)(e, hit.kernel, basis)
        out.append(ops)
    return out


def source_moments(mesh, local_ops, f, degree=None):
    """``(f, z_i)_K`` for every element and vector basis function, shape (ne, 2 dim)."""
    if f is None:
        d = local_ops[0].kernel.dim
        return np.zeros((mesh.num_elements, 2 * d))
    k = local_ops[0].kernel.k
    degree = error_degree(k) if degree is None else degree
    out = []
    for e, ops in enumerate(local_ops):
        quad = element_quadrature(mesh.element_kind, degree, mesh.element_coords(e))
        B = ops.basis.eval(quad.points)
        fv = np.asarray(f(quad.points[:, 0], quad.points[:, 1]), dtype=float)
        fv = np.broadcast_to(fv, (2, len(quad.weights)))
        Bw = B.T * quad.weights
        out.append(np.concatenate([Bw @ fv[0], Bw @ fv[1]]))
    return np.array(out)


@dataclass
class GlobalSystem:
    """Condensed skeleton system ``A x = b``.

    ``full`` is the assembled CSR matrix and ``matrix`` its symmetric
    lower-triangle storage.  ``definite`` tells whether the system is meant
    to be SPD (type III, or any energy-form assembly) or is a symmetric
    saddle-point system (types I and II assembled from the jump equations).
    """

    matrix: SymmetricSparse
    full: sp.csr_matrix
    rhs: np.ndarray
    dofmap: DofMap
    form: str = "energy"
    definite: bool = True

    @property
    def ndof(self):
        return len(self.rhs)

    def residual(self, x):
        """Relative residual ``||A x - b|| / ||b||`` (absolute if b = 0)."""
        r = np.linalg.norm(self.full @ x - self.rhs)
        bn = np.linalg.norm(self.rhs)
        return r / bn if bn > 0 else r


def multiplier_slot(hybridization):
    """Slot whose global unknown is a scalar flux (None for type III)."""
    hyb = HybridizationType.parse(hybridization)
    if hyb is HybridizationType.TYPE_I:
        return 1
    if hyb is HybridizationType.TYPE_II:
        return 0
    return None


def assemble_global(mesh, local_ops, dofmap, f_moments=None, form="auto"):
    """Sum of element contributions ``P_K^T A_K P_K`` and ``P_K^T b_K``.

    ``form='energy'`` sums the condensed energy forms.  ``form='flux'`` sums
    the flux pairings, i.e. the weak jump equations themselves; the rows of
    a scalar-flux unknown (phi_hat for type I, sigma_check for type II) are
    negated, which makes that matrix symmetric.  ``'auto'`` picks the energy
    form for type III and the flux form otherwise: for types I and II the
    energy form drops the coupling between the two trace fields and is
    singular.
    """
    if form not in ("auto", "energy", "flux"):
        raise ParameterError(f"unknown assembly form {form!r}")
    hyb = dofmap.hybridization
    if form == "auto":
        form = "energy" if hyb is HybridizationType.TYPE_III else "flux"
    ne, ntr = dofmap.elem_dofs.shape
    if len(local_ops) != ne:
        raise AssemblyError(f"{len(local_ops)} local operators for {ne} elements")
    n = dofmap.ndof
    mats = []
    loads = []
    for e, ops in enumerate(local_ops):
        kern = ops.kernel
        if kern.num_trace != ntr or kern.hybridization is not hyb:
            raise AssemblyError(f"local operator of element {e} does not match the dof map")
        if form == "energy":
            A, bmap = kern.A, kern.b_map
        else:
            A, bmap = flux_pairing_system(ops)
        mats.append(A)
        if f_moments is not None:
            loads.append(bmap @ f_moments[e])
    mats = np.array(mats)

    dofs, signs = dofmap.elem_dofs, dofmap.elem_signs
    row_signs = signs
    slot = multiplier_slot(hyb)
    if form == "flux" and slot is not None:
        half = ntr // 2
        row_signs = signs.copy()
        row_signs[:, slot * half:(slot + 1) * half] *= -1
    rows = np.broadcast_to(dofs[:, :, None], mats.shape)
    cols = np.broadcast_to(dofs[:, None, :], mats.shape)
    vals = row_signs[:, :, None] * signs[:, None, :] * mats
    keep = (rows >= 0) & (cols >= 0)
    full = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    full.sum_duplicates()

    b = np.zeros(n)
    if f_moments is not None:
        loads = np.array(loads) * row_signs
        mask = dofs >= 0
        np.add.at(b, dofs[mask], loads[mask])

    sym = SymmetricSparse.from_matrix(0.5 * (full + full.T))
    definite = form == "energy" or slot is None
    return GlobalSystem(sym, full, b, dofmap, form, definite)


def solve_global(system, solver="cholesky", tol=1e-12, maxit=None):
    """Solve the skeleton system; returns the trace coefficient vector.

    SPD systems use banded Cholesky (``'cholesky'``) or Jacobi-preconditioned
    CG (``'cg'``).  Saddle-point systems of types I and II use a sparse LU
    factorization or MINRES in those two roles.
    """
    if solver not in ("cholesky", "cg"):
        raise ParameterError(f"unknown solver {solver!r}")
    b = system.rhs
    if system.ndof == 0:
        return np.zeros(0)
    bn = np.linalg.norm(b)
    if not system.definite:
        if solver == "cholesky":
            lu = spla.splu(system.full.tocsc())
            x = lu.solve(b)
            for _ in range(3):
                r = b - system.full @ x
                if np.linalg.norm(r) <= tol * bn:
                    break
                x += lu.solve(r)
            return x
        if bn == 0:
            return np.zeros_like(b)
        x, info = spla.minres(system.full, b, rtol=tol, maxiter=maxit or 20 * system.ndof)
        res = system.residual(x)
        if info != 0 and res > tol:
            raise ConvergenceError(f"MINRES stopped with relative residual {res:.3e}",
                                   residual=res, iterations=info)
        return x
    if solver == "cholesky":
        fact = cholesky_factor(system.matrix)
        x = cholesky_solve(fact, b)
        # a few refinement sweeps tighten the residual on larger meshes
        for _ in range(3):
            r = b - spmv(system.matrix, x)
            if np.linalg.norm(r) <= tol * bn:
                break
            x += cholesky_solve(fact, r)
        return x
    x, _ = cg_solve(system.matrix, b, tol=tol, maxit=maxit)
    return x


def energy_value(x, system):
    """``J_h(x) = x^T A x / 2 - b^T x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (system.ndof,):
        raise ParameterError(f"trace vector has shape {x.shape}, expected ({system.ndof},)")
    return float(0.5 * x @ (system.full @ x) - system.rhs @ x)


@dataclass
class SolutionFields:
    """Discrete solution on every element plus the skeleton traces.

    Per-element arrays: ``sigma``, ``phi`` (ne, dim), ``u`` (ne, 2 dim) and
    trace moments ``sigma_check``, ``phi_hat``, ``u_check`` (of
    u_check . n_K^perp), ``u_hat`` (of u_hat . n_K), each (ne, nfaces, k+1)
    in element orientation.
    """

    mesh: object
    local_ops: list
    dofmap: DofMap
    trace_coeffs: np.ndarray
    sigma: np.ndarray
    phi: np.ndarray
    u: np.ndarray
    sigma_check: np.ndarray
    phi_hat: np.ndarray
    u_check: np.ndarray
    u_hat: np.ndarray
    extra: dict = field(default_factory=dict)

    def element_fields(self, e):
        return LocalFields(self.sigma[e], self.phi[e], self.u[e], self.sigma_check[e],
                           self.phi_hat[e], self.u_check[e], self.u_hat[e])

    def face_traces(self, name, side=0):
        """Trace moments per face in the global face orientation, seen from one side.

        Vector traces are returned as ``u_check . t`` and ``u_hat . n``.
        Boundary faces have no side 1; their rows are NaN in that case.
        """
        arr = getattr(self, name)
        mesh = self.mesh
        out = np.full((mesh.num_faces, self.dofmap.face_dim), np.nan)
        vec = name in ("u_check", "u_hat")
        for e in range(mesh.num_elements):
            for i, f in enumerate(mesh.elem_faces[e]):
                if mesh.face_elements[f, side] != e:
                    continue
                s = mesh.elem_face_signs[e, i] if vec else 1
                out[f] = s * arr[e, i]
        return out

    def interior_jump(self, name):
        """Largest mismatch of a trace between the two sides of interior faces."""
        a, b = self.face_traces(name, 0), self.face_traces(name, 1)
        inner = self.mesh.interior_faces
        if len(inner) == 0:
            return 0.0
        return float(np.abs(a[inner] - b[inner]).max())


def reconstruct_fields(trace_coeffs, dofmap, local_ops, f_moments=None, mesh=None):
    """Superpose the trace-driven and source-driven local responses."""
    eta = dofmap.gather(trace_coeffs)
    ne = len(local_ops)
    kern0 = local_ops[0].kernel
    d, nfe, m = kern0.dim, kern0.nfaces, kern0.face_dim
    if f_moments is None:
        f_moments = np.zeros((ne, 2 * d))
    vol = np.empty((ne, 4 * d))
    tr = {name: np.empty((ne, nfe, m)) for name in ("sigma_check", "phi_hat", "u_check", "u_hat")}
    for e, ops in enumerate(local_ops):
        kern = ops.kernel
        x = kern.trace_to_volume @ eta[e] + kern.source_to_volume @ f_moments[e]
        vol[e] = x
        for name in tr:
            ox, od = kern.trace_ops[name]
            tr[name][e] = (ox @ x + od @ eta[e]).reshape(nfe, m)
    return SolutionFields(mesh=mesh, local_ops=local_ops, dofmap=dofmap,
                          trace_coeffs=np.asarray(trace_coeffs, dtype=float),
                          sigma=vol[:, :d], phi=vol[:, d:2 * d], u=vol[:, 2 * d:], **tr)


def dump_matrix(system, stream):
    """Coordinate text dump, one ``i j value`` line per stored entry (zero-based)."""
    coo = system.full.tocoo()
    order = np.lexsort((coo.col, coo.row))
    for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
        stream.write(f"{i} {j} {v:.17g}\n")


@dataclass
class HDGResult:
    mesh: object
    fields: SolutionFields
    system: GlobalSystem
    local_ops: list
    f_moments: np.ndarray


def solve_problem(mesh, k, f, boundary_kind, hybridization=HybridizationType.TYPE_III,
                  params=None, solver="cholesky", tol=1e-12, form="auto", local_ops=None):
    """Whole pipeline on one mesh: local operators, assembly, solve, reconstruction."""
    hyb = HybridizationType.parse(hybridization)
    if local_ops is None:
        local_ops = build_local_operators(mesh, k, params, hyb)
    dofmap = build_trace_dofmap(mesh, k, hyb, boundary_kind)
    fm = source_moments(mesh, local_ops, f)
    system = assemble_global(mesh, local_ops, dofmap, fm, form=form)
    x = solve_global(system, solver=solver, tol=tol)
    fields = reconstruct_fields(x, dofmap, local_ops, fm, mesh=mesh)
    return HDGResult(mesh, fields, system, local_ops, fm)


__all__ = [
    "DofMap", "GlobalSystem", "multiplier_slot", "SolutionFields", "HDGResult", "NotSPDError",
    "build_trace_dofmap", "build_local_operators", "source_moments", "assemble_global",
    "solve_global", "energy_value", "reconstruct_fields", "dump_matrix", "solve_problem",
]
