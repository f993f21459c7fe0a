import numpy as np
import pytest

from aeromec.conic import (
    CONE_EXP,
    CONE_NONNEG,
    CONE_PSD,
    CONE_SOC,
    EmbedSvec,
    ProgramBuilder,
    VariableRegistry,
    evaluate_block_slacks,
    herm_basis,
    herm_from_params,
    herm_to_params,
    program_from_dict,
    real_embed,
    ruiz_equilibrate,
    svec,
    unsvec,
)
from aeromec.solver import SolverOptions, solve


def test_hermitian_param_roundtrip():
    rng = np.random.default_rng(0)
    for n in (1, 2, 4):
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        H = 0.5 * (A + A.conj().T)
        p = herm_to_params(H)
        np.testing.assert_allclose(herm_from_params(p, n), H, atol=1e-14)
        # basis expansion reproduces the matrix
        B = herm_basis(n)
        np.testing.assert_allclose(np.einsum("b,bij->ij", p, B), H, atol=1e-14)


def test_real_embedding_eigenvalues_double():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    H = 0.5 * (A + A.conj().T)
    ew_c = np.linalg.eigvalsh(H)
    ew_r = np.linalg.eigvalsh(real_embed(H))
    np.testing.assert_allclose(np.sort(np.repeat(ew_c, 2)), np.sort(ew_r), atol=1e-12)


def test_svec_roundtrip_and_embed_cache():
    rng = np.random.default_rng(2)
    M = rng.standard_normal((5, 5))
    M = 0.5 * (M + M.T)
    np.testing.assert_allclose(unsvec(svec(M), 5), M, atol=1e-14)

    A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    H = 0.5 * (A + A.conj().T)
    es = EmbedSvec(3)
    np.testing.assert_allclose(es.apply(H), svec(real_embed(H)), atol=1e-14)
    np.testing.assert_allclose(es.apply_stack(np.array([H, 2 * H]))[1], 2 * es.apply(H), atol=1e-13)


def _toy_exp_program():
    reg = VariableRegistry()
    reg.add("x")
    reg.add("u")
    pb = ProgramBuilder(reg)
    pb.add_objective("u", 0, 1.0)
    pb.add_nonneg("x-floor", [(-2.0, [("x", 0, 1.0)])])
    pb.add_exp("epi", (0.0, [("x", 0, 1.0)]), (1.0, []), (0.0, [("u", 0, 1.0)]))
    return pb.build()


@pytest.mark.parametrize("backend", ["clarabel", "scs"])
def test_exp_toy_program(backend):
    prog = _toy_exp_program()
    res = solve(prog, SolverOptions(backend=backend, tol=1e-9))
    assert res.ok
    assert res.x[prog.registry.index("u")] == pytest.approx(np.exp(2.0), rel=1e-6)


@pytest.mark.parametrize("backend", ["clarabel", "scs"])
def test_psd_hermitian_min_eigenvalue(backend):
    # maximize t s.t. H - t I >= 0 recovers the smallest eigenvalue of H,
    # exercising embedding + svec ordering on both back-ends
    rng = np.random.default_rng(3)
    A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    H = 0.5 * (A + A.conj().T)
    reg = VariableRegistry()
    reg.add("t")
    pb = ProgramBuilder(reg)
    pb.add_objective("t", 0, -1.0)
    pb.add_psd_hermitian("shift", 3, H, [(reg.index("t"), -np.eye(3, dtype=complex))])
    res = solve(pb.build(), SolverOptions(backend=backend, tol=1e-9))
    assert res.ok
    assert res.x[0] == pytest.approx(np.linalg.eigvalsh(H)[0], abs=1e-6)


def test_soc_program_and_slacks():
    reg = VariableRegistry()
    reg.add("y", 2)
    pb = ProgramBuilder(reg)
    pb.add_objective("y", 0, 1.0)
    pb.add_objective("y", 1, 1.0)
    # || y - (3, 4) || <= 1
    pb.add_soc("ball", [(1.0, []), (-3.0, [("y", 0, 1.0)]), (-4.0, [("y", 1, 1.0)])])
    prog = pb.build()
    res = solve(prog)
    assert res.ok
    assert res.obj == pytest.approx(7 - np.sqrt(2), rel=1e-7)
    slacks = evaluate_block_slacks(prog, res.x)
    assert slacks["ball"] >= -1e-8


def test_psd_matrix_variable_projection():
    # nearest-PSD style: W >= 0, diag fixed, maximize an off-diagonal Re part
    reg = VariableRegistry()
    reg.add_hermitian("W", 2)
    pb = ProgramBuilder(reg)
    basis = herm_basis(2)
    pb.add_psd_hermitian(
        "psd-var", 2, np.zeros((2, 2), dtype=complex),
        [(reg.index("W", p), basis[p]) for p in range(4)],
    )
    pb.add_zero("diag-pins", [(-1.0, [("W", 0, 1.0)]), (-1.0, [("W", 1, 1.0)])])
    pb.add_objective("W", 2, -1.0)  # maximize Re W_01
    res = solve(pb.build())
    assert res.ok
    W = herm_from_params(res.x[reg.slice("W")], 2)
    assert W[0, 1].real == pytest.approx(1.0, abs=1e-6)  # |W01| <= sqrt(W00 W11)
    assert np.linalg.eigvalsh(W)[0] >= -1e-7


def test_ruiz_preserves_solution():
    prog = _toy_exp_program()
    r1 = solve(prog, SolverOptions(equilibrate=True))
    r2 = solve(prog, SolverOptions(equilibrate=False))
    assert r1.ok and r2.ok
    assert r1.obj == pytest.approx(r2.obj, rel=1e-6)
    A, b, c, e, d, s = ruiz_equilibrate(prog)
    assert abs(A).max() <= 10.0


def test_dump_roundtrip_and_hash_stability():
    prog = _toy_exp_program()
    d = prog.dump()
    prog2 = program_from_dict(d)
    assert prog.structural_hash() == prog2.structural_hash()
    r1, r2 = solve(prog), solve(prog2)
    assert r1.obj == pytest.approx(r2.obj, rel=1e-9)


def test_infeasible_detection():
    reg = VariableRegistry()
    reg.add("x")
    pb = ProgramBuilder(reg)
    pb.add_nonneg("lo", [(-2.0, [("x", 0, 1.0)])])  # x >= 2
    pb.add_nonneg("hi", [(1.0, [("x", 0, -1.0)])])  # x <= 1
    res = solve(pb.build())
    assert res.status == "infeasible"
