import io

import numpy as np
import pytest

from hdgvl.errors import AssemblyError, ParameterError
from hdgvl.hybridsystem import (assemble_global, build_local_operators, build_trace_dofmap,
                                dump_matrix, energy_value, multiplier_slot, reconstruct_fields,
                                solve_global, solve_problem, source_moments)
from hdgvl.localsolver import solve_local_source
from hdgvl.mesh import build_structured_mesh
from hdgvl.options import BoundaryKind, HybridizationType
from hdgvl.verify import hdg_residual, manufactured_case

HYBS = list(HybridizationType)
BCS = list(BoundaryKind)


def _setup(level, kind, k, hyb, bc, f=None):
    mesh = build_structured_mesh(level, kind)
    ops = build_local_operators(mesh, k, hybridization=hyb)
    dm = build_trace_dofmap(mesh, k, hyb, bc)
    fm = None if f is None else source_moments(mesh, ops, f)
    return mesh, ops, dm, fm


def test_dof_counts():
    mesh = build_structured_mesh(2, "quad")  # 40 faces, 16 on the boundary
    T3 = HybridizationType.TYPE_III
    assert build_trace_dofmap(mesh, 0, T3, "dirichlet").ndof == 48
    assert build_trace_dofmap(mesh, 0, T3, "electric").ndof == 64
    assert build_trace_dofmap(mesh, 0, T3, "magnetic").ndof == 64
    # the normal unknown of type I is phi_hat, which is free under Dirichlet conditions
    assert build_trace_dofmap(mesh, 0, HybridizationType.TYPE_I, "dirichlet").ndof == 64
    assert build_trace_dofmap(mesh, 2, T3, "dirichlet").ndof == 144


def test_dofmap_signs_and_gather():
    mesh = build_structured_mesh(1, "tri")
    dm = build_trace_dofmap(mesh, 1, HybridizationType.TYPE_I, "electric")
    assert dm.vector_slot == (True, False)
    x = np.arange(1.0, dm.ndof + 1)
    eta = dm.gather(x)
    assert eta.shape == (mesh.num_elements, 2 * 3 * 2)
    assert np.all(eta[dm.elem_dofs < 0] == 0)
    # scalar slot is never sign-flipped
    half = eta.shape[1] // 2
    assert np.all(dm.elem_signs[:, half:][dm.elem_dofs[:, half:] >= 0] == 1)
    with pytest.raises(AssemblyError):
        dm.gather(np.zeros(dm.ndof + 1))
    with pytest.raises(ParameterError):
        build_trace_dofmap(mesh, -1, 3, "electric")


@pytest.mark.parametrize("hyb", HYBS)
@pytest.mark.parametrize("bc", BCS)
def test_zero_source_gives_zero(hyb, bc):
    mesh = build_structured_mesh(2, "tri")
    zero = lambda x, y: np.zeros((2,) + np.shape(x))
    res = solve_problem(mesh, 1, zero, bc, hyb)
    assert np.all(res.fields.trace_coeffs == 0)
    assert np.all(res.fields.u == 0)


@pytest.mark.parametrize("kind", ["tri", "quad"])
@pytest.mark.parametrize("bc", BCS)
def test_type3_system_is_spd(kind, bc):
    mesh, ops, dm, _ = _setup(2, kind, 1, 3, bc)
    S = assemble_global(mesh, ops, dm)
    A = S.full.toarray()
    assert S.definite and S.form == "energy"
    assert np.abs(A - A.T).max() < 1e-12 * np.abs(A).max()
    assert np.linalg.eigvalsh(A).min() > 0


@pytest.mark.parametrize("hyb", [1, 2])
@pytest.mark.parametrize("bc", BCS)
def test_types_1_2_are_symmetric_saddle_systems(hyb, bc):
    mesh, ops, dm, _ = _setup(2, "quad", 1, hyb, bc)
    S = assemble_global(mesh, ops, dm)
    A = S.full.toarray()
    assert not S.definite and S.form == "flux"
    assert np.abs(A - A.T).max() < 1e-12 * np.abs(A).max()
    ev = np.linalg.eigvalsh(A)
    tol = 1e-10 * np.abs(ev).max()
    assert np.abs(ev).min() > tol  # nonsingular
    slot = multiplier_slot(hyb)
    n_mult = int((dm.dof_index[:, slot, 0] >= 0).sum()) * dm.face_dim
    assert (ev < 0).sum() == n_mult
    assert (ev > 0).sum() == dm.ndof - n_mult


def test_energy_form_singular_for_type1():
    mesh, ops, dm, _ = _setup(2, "tri", 1, 1, "electric")
    A = assemble_global(mesh, ops, dm, form="energy").full.toarray()
    ev = np.linalg.eigvalsh(A)
    assert np.sum(np.abs(ev) < 1e-10 * np.abs(ev).max()) > 0


def test_single_element_dirichlet():
    exact = manufactured_case(3)
    mesh = build_structured_mesh(0, "quad")
    res = solve_problem(mesh, 1, exact.f, "dirichlet")
    assert res.system.ndof == 0
    ref = solve_local_source(res.local_ops[0], res.f_moments[0])
    assert np.abs(res.fields.u[0] - ref.u).max() < 1e-14
    assert np.abs(res.fields.sigma[0] - ref.sigma).max() < 1e-14


@pytest.mark.parametrize("hyb", HYBS)
def test_iterative_matches_direct(hyb):
    exact = manufactured_case(1)
    mesh, ops, dm, fm = _setup(3, "tri", 1, hyb, exact.boundary_kind, exact.f)
    S = assemble_global(mesh, ops, dm, fm)
    xd = solve_global(S, "cholesky")
    xi = solve_global(S, "cg", tol=1e-13)
    assert S.residual(xd) < 1e-11
    assert np.abs(xd - xi).max() < 1e-9 * np.abs(xd).max()


@pytest.mark.parametrize("hyb", HYBS)
@pytest.mark.parametrize("case", [1, 2, 3])
@pytest.mark.parametrize("kind", ["tri", "quad"])
def test_discrete_equations_satisfied(hyb, case, kind):
    exact = manufactured_case(case)
    res = solve_problem(build_structured_mesh(2, kind), 1, exact.f, exact.boundary_kind, hyb)
    r = hdg_residual(res)
    assert max(r.values()) < 1e-10
    for name in ("sigma_check", "phi_hat", "u_check", "u_hat"):
        assert res.fields.interior_jump(name) < 1e-10


def test_energy_minimized(rng):
    exact = manufactured_case(3)
    mesh, ops, dm, fm = _setup(2, "tri", 1, 3, "dirichlet", exact.f)
    S = assemble_global(mesh, ops, dm, fm)
    x = solve_global(S)
    J0 = energy_value(x, S)
    for _ in range(20):
        assert energy_value(x + 1e-3 * rng.standard_normal(S.ndof), S) > J0
    with pytest.raises(ParameterError):
        energy_value(x[:-1], S)


def test_linear_in_source():
    exact = manufactured_case(2)
    mesh = build_structured_mesh(2, "quad")
    a = solve_problem(mesh, 1, exact.f, exact.boundary_kind)
    b = solve_problem(mesh, 1, lambda x, y: 2 * exact.f(x, y), exact.boundary_kind)
    assert np.abs(b.fields.u - 2 * a.fields.u).max() < 1e-11 * np.abs(a.fields.u).max()


@pytest.mark.parametrize("bc", BCS)
def test_hybridizations_agree(bc):
    case = {BoundaryKind.ELECTRIC: 1, BoundaryKind.MAGNETIC: 2, BoundaryKind.DIRICHLET: 3}[bc]
    exact = manufactured_case(case)
    mesh = build_structured_mesh(2, "tri")
    res = [solve_problem(mesh, 1, exact.f, bc, h).fields for h in HYBS]
    for other in res[1:]:
        for name in ("sigma", "phi", "u"):
            ref = getattr(res[0], name)
            assert np.abs(getattr(other, name) - ref).max() < 1e-10 * np.abs(ref).max()


def test_reconstruct_rejects_wrong_size():
    mesh, ops, dm, _ = _setup(1, "quad", 0, 3, "electric")
    with pytest.raises(AssemblyError):
        reconstruct_fields(np.zeros(dm.ndof + 2), dm, ops)


def test_kernel_reuse_matches_fresh_build():
    mesh = build_structured_mesh(2, "tri")
    a = build_local_operators(mesh, 1, reuse=True)
    b = build_local_operators(mesh, 1, reuse=False)
    for x, y in zip(a, b):
        assert np.abs(x.A - y.A).max() < 1e-12 * np.abs(y.A).max()


def test_matrix_dump_format():
    mesh, ops, dm, _ = _setup(1, "quad", 0, 3, "dirichlet")
    S = assemble_global(mesh, ops, dm)
    buf = io.StringIO()
    dump_matrix(S, buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == S.full.nnz
    entries = [(int(i), int(j), float(v)) for i, j, v in (ln.split() for ln in lines)]
    assert entries == sorted(entries, key=lambda t: (t[0], t[1]))
    A = np.zeros((S.ndof, S.ndof))
    for i, j, v in entries:
        A[i, j] = v
    assert np.array_equal(A, S.full.toarray())
