"""Element-local HDG problems and static condensation.

On an element K with outward normal n the local unknowns are
``(sigma, phi, u) in P_k x P_k x P_k^2`` and satisfy, for all test functions,

    (sigma, chi) - (u, curl chi) + <u_check.n^perp, chi> = 0
    (phi, psi)   - (u, grad psi) + <u_hat.n, psi>         = 0
    (sigma, rot z) + <sigma_check, z.n^perp> - (phi, div z) + <phi_hat, z.n> = (f, z)

with the numerical traces tied together by

    sigma_check = sigma + (u - u_check).n^perp / alpha
    phi_hat     = phi   + (u - u_hat).n / tau.

Which member of each pair is prescribed data depends on the hybridization:
the tangential pair is driven by ``u_check.n^perp`` (types I, III) or by
``sigma_check`` (type II); the normal pair by ``u_hat.n`` (types II, III) or
by ``phi_hat`` (type I).  Trace data are moments against the orthonormal
face basis, in the element's own orientation, laid out as
``[tangential pair, face 0..nf-1 | normal pair, face 0..nf-1]``.

Local unknown order is ``(sigma, phi, u1, u2)``, ``dim P_k`` each.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import AssemblyError, ParameterError
from .options import HybridizationType
from .polybasis import build_face_basis, face_quadrature


@dataclass(frozen=True)
class StabilizationParams:
    alpha: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "tau"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be a positive finite number, got {v!r}")


@dataclass
class LocalFields:
    """Volume coefficients and per-face trace moments on one element.

    ``u_check`` holds moments of ``u_check . n_K^perp`` and ``u_hat`` those of
    ``u_hat . n_K``, both in the element's outward orientation.
    """

    sigma: np.ndarray
    phi: np.ndarray
    u: np.ndarray
    sigma_check: np.ndarray
    phi_hat: np.ndarray
    u_check: np.ndarray
    u_hat: np.ndarray

    def __add__(self, other):
        return LocalFields(*(getattr(self, n) + getattr(other, n) for n in _FIELD_NAMES))

    def __mul__(self, c):
        return LocalFields(*(c * getattr(self, n) for n in _FIELD_NAMES))

    __rmul__ = __mul__

    def coefficient_norm(self):
        return float(np.sqrt(sum(np.sum(getattr(self, n) ** 2) for n in _FIELD_NAMES)))


_FIELD_NAMES = ("sigma", "phi", "u", "sigma_check", "phi_hat", "u_check", "u_hat")
_TRACES = ("u_check", "u_hat", "sigma_check", "phi_hat")


@dataclass
class LocalKernel:
    """Geometry-dependent local matrices; shared by congruent elements."""

    k: int
    dim: int
    nfaces: int
    params: StabilizationParams
    hybridization: HybridizationType
    matrix: np.ndarray
    lu: tuple
    rhs_trace: np.ndarray
    rhs_source: np.ndarray
    trace_to_volume: np.ndarray
    source_to_volume: np.ndarray
    trace_ops: dict  # name -> (op on volume coeffs, op on trace data)
    normal_ops: dict  # 'u_t', 'u_n' -> op on volume coeffs
    A: np.ndarray = field(default=None, repr=False)
    b_map: np.ndarray = field(default=None, repr=False)

    @property
    def face_dim(self):
        return self.k + 1

    @property
    def num_trace(self):
        return 2 * self.nfaces * self.face_dim

    def slices(self):
        d = self.dim
        return slice(0, d), slice(d, 2 * d), slice(2 * d, 4 * d)


@dataclass
class LocalOperators:
    element_id: int
    kernel: LocalKernel
    basis: object  # ElementBasis centered on this element

    def __getattr__(self, name):
        # delegate matrix access to the shared kernel
        if name in ("kernel",):
            raise AttributeError(name)
        return getattr(self.kernel, name)


def outward_normals(vertices):
    v = np.asarray(vertices, dtype=float)
    d = np.roll(v, -1, axis=0) - v
    n = np.column_stack([d[:, 1], -d[:, 0]])
    return n / np.linalg.norm(n, axis=1)[:, None]


def local_face_rules(vertices, degree, reversed_faces=None):
    """Face rules for every local face of a standalone element.

    Local face i runs from vertex i to vertex i+1 unless ``reversed_faces[i]``.
    """
    v = np.asarray(vertices, dtype=float)
    nv = len(v)
    rules = []
    for i in range(nv):
        a, b = v[i], v[(i + 1) % nv]
        if reversed_faces is not None and reversed_faces[i]:
            a, b = b, a
        rules.append(face_quadrature(degree, (a, b)))
    return rules


def assemble_local_system(vertices, basis, params, hybridization=HybridizationType.TYPE_III,
                          face_rules=None, element_id=0):
    """Build and factorize the local HDG system of one element.

    ``basis`` must be tabulated on an element rule exact to degree 2k+2.
    ``face_rules`` (one per local face, parameterized as the global face)
    default to rules running from vertex i to vertex i+1.
    """
    hyb = HybridizationType.parse(hybridization)
    k = basis.degree
    if face_rules is None:
        face_rules = local_face_rules(vertices, 2 * k + 2)
    normals = outward_normals(vertices)
    nf = len(normals)
    d = basis.dim
    m = k + 1
    N = 4 * d
    ntr = 2 * nf * m
    alpha, tau = params.alpha, params.tau
    S, P, A1, A2 = (slice(i * d, (i + 1) * d) for i in range(4))

    B, Bx, By, w = basis.values, basis.dx, basis.dy, basis.quad.weights

    def ip(p, q):
        return p.T @ (w[:, None] * q)

    M, Gx, Gy = ip(B, B), ip(Bx, B), ip(By, B)
    L = np.zeros((N, N))
    L[S, S] = M
    L[S, A1] = -Gy
    L[S, A2] = Gx
    L[P, P] = M
    L[P, A1] = -Gx
    L[P, A2] = -Gy
    L[A1, S] = -Gy
    L[A2, S] = Gx
    L[A1, P] = -Gx
    L[A2, P] = -Gy

    R = np.zeros((N, ntr))
    ops = {name: (np.zeros((nf * m, N)), np.zeros((nf * m, ntr))) for name in _TRACES}
    normal_ops = {"u_t": np.zeros((nf * m, N)), "u_n": np.zeros((nf * m, N))}
    tmode, nmode = hyb.tangential_unknown, hyb.normal_unknown

    for f in range(nf):
        rule = face_rules[f]
        nx, ny = normals[f]
        length = rule.weights.sum()
        psi = build_face_basis(k, length, rule.params).values
        Bf = basis.eval(rule.points)
        wf = rule.weights
        nq = len(wf)

        Sg = np.zeros((nq, N))
        Sg[:, S] = Bf
        Ph = np.zeros((nq, N))
        Ph[:, P] = Bf
        Ut = np.zeros((nq, N))
        Ut[:, A1] = ny * Bf
        Ut[:, A2] = -nx * Bf
        Un = np.zeros((nq, N))
        Un[:, A1] = nx * Bf
        Un[:, A2] = ny * Bf
        Dt = np.zeros((nq, ntr))
        Dt[:, f * m:(f + 1) * m] = psi
        Dn = np.zeros((nq, ntr))
        Dn[:, (nf + f) * m:(nf + f + 1) * m] = psi
        zero_x, zero_d = np.zeros((nq, N)), np.zeros((nq, ntr))

        if tmode == "u":
            u_check = (zero_x, Dt)
            sigma_check = (Sg + Ut / alpha, -Dt / alpha)
        else:
            sigma_check = (zero_x, Dt)
            u_check = (Ut + alpha * Sg, -alpha * Dt)
        if nmode == "u":
            u_hat = (zero_x, Dn)
            phi_hat = (Ph + Un / tau, -Dn / tau)
        else:
            phi_hat = (zero_x, Dn)
            u_hat = (Un + tau * Ph, -tau * Dn)
        traces = {"u_check": u_check, "u_hat": u_hat,
                  "sigma_check": sigma_check, "phi_hat": phi_hat}
        tests = {"u_check": Sg, "u_hat": Ph, "sigma_check": Ut, "phi_hat": Un}

        for name, (tx, td) in traces.items():
            tw = tests[name].T * wf
            L += tw @ tx
            R -= tw @ td
            pw = psi.T * wf
            rows = slice(f * m, (f + 1) * m)
            ops[name][0][rows] = pw @ tx
            ops[name][1][rows] = pw @ td
        normal_ops["u_t"][f * m:(f + 1) * m] = (psi.T * wf) @ Ut
        normal_ops["u_n"][f * m:(f + 1) * m] = (psi.T * wf) @ Un

    lu = sla.lu_factor(L, check_finite=True)
    diag = np.abs(np.diag(lu[0]))
    if not diag.min() > 1e-13 * diag.max():
        raise AssemblyError(f"singular local matrix on element {element_id}")

    Rsrc = np.zeros((N, 2 * d))
    Rsrc[2 * d:, :] = np.eye(2 * d)
    X_tr = sla.lu_solve(lu, R)
    X_src = sla.lu_solve(lu, Rsrc)

    kernel = LocalKernel(k=k, dim=d, nfaces=nf, params=params, hybridization=hyb,
                         matrix=L, lu=lu, rhs_trace=R, rhs_source=Rsrc,
                         trace_to_volume=X_tr, source_to_volume=X_src,
                         trace_ops=ops, normal_ops=normal_ops)
    kernel.A, kernel.b_map = _energy_form(kernel)
    return LocalOperators(element_id, kernel, basis)


def _energy_form(kernel):
    """Condensed element matrix from the local energy (sum of squares)."""
    X = kernel.trace_to_volume
    d = kernel.dim
    p = kernel.params
    ux, ud = kernel.trace_ops["u_check"]
    hx, hd = kernel.trace_ops["u_hat"]
    mis_t = (kernel.normal_ops["u_t"] - ux) @ X - ud
    mis_n = (kernel.normal_ops["u_n"] - hx) @ X - hd
    sig, phi = X[:d], X[d:2 * d]
    A = sig.T @ sig + phi.T @ phi + (mis_t.T @ mis_t) / p.alpha + (mis_n.T @ mis_n) / p.tau
    A = 0.5 * (A + A.T)
    b_map = X[2 * d:].T.copy()
    return A, b_map


def _flux_names(kernel):
    hyb = kernel.hybridization
    tflux = "sigma_check" if hyb.tangential_unknown == "u" else "u_check"
    nflux = "phi_hat" if hyb.normal_unknown == "u" else "u_hat"
    return tflux, nflux


def flux_pairing_system(ops):
    """Condensed element matrix and load map assembled from flux pairings.

    Test oracle: ``A = -<flux(eta), mu>`` and ``b = <flux(f), mu>`` where
    the flux is the member of each trace pair that is not prescribed.
    """
    kernel = ops.kernel
    nf, m = kernel.nfaces, kernel.face_dim
    tflux, nflux = _flux_names(kernel)
    X = kernel.trace_to_volume
    tx, td = kernel.trace_ops[tflux]
    nx, nd = kernel.trace_ops[nflux]
    F = np.vstack([tx @ X + td, nx @ X + nd])
    Fsrc = np.vstack([tx, nx]) @ kernel.source_to_volume
    assert F.shape == (2 * nf * m, 2 * nf * m)
    return -F, Fsrc


def _trace_vector(ops, eta_t, eta_n):
    nf, m = ops.kernel.nfaces, ops.kernel.face_dim
    eta_t = np.asarray(eta_t, dtype=float)
    eta_n = np.asarray(eta_n, dtype=float)
    if eta_t.size != nf * m or eta_n.size != nf * m:
        raise ParameterError(
            f"trace data must have {nf} x {m} moments, got {eta_t.shape} and {eta_n.shape}")
    return np.concatenate([eta_t.ravel(), eta_n.ravel()])


def _fields(kernel, x, eta):
    d, nf, m = kernel.dim, kernel.nfaces, kernel.face_dim
    traces = {}
    for name in _TRACES:
        ox, od = kernel.trace_ops[name]
        val = ox @ x
        if eta is not None:
            val = val + od @ eta
        traces[name] = val.reshape(nf, m)
    return LocalFields(sigma=x[:d].copy(), phi=x[d:2 * d].copy(), u=x[2 * d:].copy(), **traces)


def solve_local_trace(ops, eta_t, eta_n):
    """First local problem: response to trace data with zero source."""
    eta = _trace_vector(ops, eta_t, eta_n)
    x = ops.kernel.trace_to_volume @ eta
    return _fields(ops.kernel, x, eta)


def solve_local_source(ops, f_moments):
    """Second local problem: response to the source with zero trace data."""
    fm = np.asarray(f_moments, dtype=float).ravel()
    if fm.size != 2 * ops.kernel.dim:
        raise ParameterError(f"source moments must have length {2 * ops.kernel.dim}, got {fm.size}")
    x = ops.kernel.source_to_volume @ fm
    return _fields(ops.kernel, x, None)


def solve_local(ops, eta_t, eta_n, f_moments):
    """Full local problem by direct solve of the local system (no superposition)."""
    eta = _trace_vector(ops, eta_t, eta_n)
    fm = np.asarray(f_moments, dtype=float).ravel()
    rhs = ops.kernel.rhs_trace @ eta + ops.kernel.rhs_source @ fm
    x = sla.lu_solve(ops.kernel.lu, rhs)
    return _fields(ops.kernel, x, eta)


def condensed_element_system(ops, f_moments=None):
    """``(A_K, b_K)`` on the element's trace unknowns (element orientation)."""
    kernel = ops.kernel
    if f_moments is None:
        b = np.zeros(kernel.num_trace)
    else:
        b = kernel.b_map @ np.asarray(f_moments, dtype=float).ravel()
    return kernel.A, b


def local_energy(ops, eta, f_moments=None):
    """Element contribution ``1/2 a_K(eta, eta) - l_K(eta)``."""
    A, b = condensed_element_system(ops, f_moments)
    eta = np.asarray(eta, dtype=float)
    return 0.5 * eta @ A @ eta - b @ eta
