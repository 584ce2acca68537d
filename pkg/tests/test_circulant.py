import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from covdiff.circulant import (ExactPreconditioner, InconsistentSolveError,
                               NestedChebyshevPreconditioner, PreconditionerSpec,
                               SaddlePointPreconditioner, apply_exact_preconditioner_inverse,
                               apply_nc_preconditioner_inverse, apply_sp_preconditioner_inverse,
                               block_dft_forward, block_dft_inverse, block_shifts, solve_outer)
from covdiff.operators import MatvecCounter, build_diffusion_operator, build_rhs
from covdiff.oracle import build_dense_instance
from covdiff.spectral import allocate_inner_iterations, extreme_eigenvalues


def test_dft_of_constant_is_first_block():
    x = np.ones((4, 3))
    y = block_dft_forward(x, 1.0)
    assert np.allclose(y[0], 2.0) and np.allclose(y[1:], 0.0)


def test_dft_matches_dense_transform():
    inst = build_dense_instance(2, 6, 0.1)
    x = np.random.default_rng(0).standard_normal((6, 4))
    ref = (inst.U.conj().T @ inst.Gamma @ x)
    assert np.allclose(block_dft_forward(x, 0.1), ref)


@settings(max_examples=30, deadline=None)
@given(ell=st.integers(2, 12), alpha=st.floats(1e-4, 1.0), seed=st.integers(0, 10 ** 6))
def test_dft_round_trip(ell, alpha, seed):
    x = np.random.default_rng(seed).standard_normal((ell, 5))
    assert np.allclose(block_dft_inverse(block_dft_forward(x, alpha), alpha, real=True), x)


def test_inverse_rejects_complex_residue():
    y = block_dft_forward(np.ones((4, 2)), 0.5)
    y[1] += 1.0
    with pytest.raises(InconsistentSolveError):
        block_dft_inverse(y, 0.5, real=True)


def test_block_shifts_diagonalise_circulant():
    inst = build_dense_instance(2, 6, 0.3)
    G = inst.Gamma
    D = inst.U.conj().T @ G @ inst.C @ np.linalg.inv(G) @ inst.U
    assert np.allclose(D, np.diag(block_shifts(6, 0.3)), atol=1e-12)
    assert np.allclose(np.diag(inst.Lam), block_shifts(6, 0.3))


@pytest.mark.parametrize("nx,ell,alpha", [(3, 4, 1.0), (3, 6, 0.01), (4, 6, 0.1)])
def test_exact_matches_dense(nx, ell, alpha):
    inst = build_dense_instance(nx, ell, alpha)
    op = build_diffusion_operator(nx, ell)
    r = np.random.default_rng(1).standard_normal((ell, op.N))
    z = apply_exact_preconditioner_inverse(op, alpha, r)
    assert z.dtype == float
    assert np.allclose(z.ravel(), np.linalg.solve(inst.P, r.ravel()), atol=1e-12)


def test_nc_with_large_budget_matches_dense():
    nx, ell, alpha = 4, 6, 0.1
    inst = build_dense_instance(nx, ell, alpha)
    op = build_diffusion_operator(nx, ell)
    alloc = allocate_inner_iterations(ell, nx, extreme_eigenvalues(op), alpha, 200.0, "nc2")
    r = np.random.default_rng(2).standard_normal((ell, op.N))
    c = MatvecCounter()
    z = apply_nc_preconditioner_inverse(op, alpha, alloc, r, c)
    assert np.allclose(z.ravel(), np.linalg.solve(inst.P, r.ravel()), atol=1e-10)
    assert c.matvecs == alloc.total


def test_nc_budget_is_a_ceiling():
    op = build_diffusion_operator(20, 10)
    pre = NestedChebyshevPreconditioner(op, 0.01, 0.2, "nc2")
    c = MatvecCounter()
    pre.apply(np.random.default_rng(0).standard_normal((10, op.N)), c)
    assert c.matvecs == pre.allocation.total <= pre.allocation.budget
    assert list(pre.last_inner_iterations) == list(pre.allocation.counts)


def test_sp_tight_tolerance_matches_dense():
    nx, ell, alpha = 4, 6, 0.1
    inst = build_dense_instance(nx, ell, alpha)
    op = build_diffusion_operator(nx, ell)
    r = np.random.default_rng(3).standard_normal((ell, op.N))
    z = apply_sp_preconditioner_inverse(op, alpha, 50.0, r, inner_tol=1e-13)
    assert np.allclose(z.ravel(), np.linalg.solve(inst.P, r.ravel()), atol=1e-9)


def test_sp_caches_one_hierarchy_per_distinct_shift():
    op = build_diffusion_operator(15, 10)
    c = MatvecCounter()
    pre = SaddlePointPreconditioner(op, 0.01, 0.2, counter=c)
    assert c.mg_setups == 6 == len(pre.hierarchies)
    pre.apply(np.random.default_rng(0).standard_normal((10, op.N)), c)
    assert c.mg_setups == 6 and c.vcycles > 0
    # conjugate blocks solve conjugate systems, so their iteration counts agree
    it = pre.last_inner_iterations
    for j in range(1, 10):
        assert it[j] == it[10 - j]


def test_spec_validation():
    with pytest.raises(ValueError):
        PreconditionerSpec(kind="bogus")
    with pytest.raises(ValueError):
        PreconditionerSpec(kind="nc2", alpha=0.1)
    with pytest.raises(ValueError):
        PreconditionerSpec(kind="exact", alpha=0.0)
    op = build_diffusion_operator(4, 4)
    with pytest.raises(ValueError):
        PreconditionerSpec(kind="exact", alpha=1e9).validate_for(op)


def test_outer_solve_exact_converges_and_accounts():
    op = build_diffusion_operator(30, 10)
    b = build_rhs(op.N, 10, 0)
    rep = solve_outer(op, PreconditionerSpec("exact", alpha=0.01), b)
    assert rep.converged and rep.final_residual < 1e-6
    # x0 = 0 gives r0 = b for free; each iteration costs one A-matvec per block
    assert rep.matvecs == 10 * rep.outer_iterations
    assert rep.amg_per_iteration_count == 0


def test_nc2_beats_nc1_at_alpha_one():
    op = build_diffusion_operator(30, 10)
    b = build_rhs(op.N, 10, 0)
    n1 = solve_outer(op, PreconditionerSpec("nc1", 1.0, 0.2), b)
    n2 = solve_outer(op, PreconditionerSpec("nc2", 1.0, 0.2), b)
    assert n1.converged and n2.converged
    assert n2.outer_iterations < n1.outer_iterations


def test_sp_accounting():
    op = build_diffusion_operator(20, 10)
    b = build_rhs(op.N, 10, 0)
    rep = solve_outer(op, PreconditionerSpec("sp", 0.01, 0.2), b)
    assert rep.converged
    assert rep.mg_setups == 6
    assert rep.amg_per_iteration_count == 10 * rep.outer_iterations
    assert rep.equivalent_matvecs(80) == rep.matvecs + 80 * rep.amg_per_iteration_count
    assert len(rep.inner_iterations) == rep.outer_iterations


def test_unpreconditioned_small():
    op = build_diffusion_operator(10, 6)
    rep = solve_outer(op, PreconditionerSpec(), build_rhs(op.N, 6, 1), max_outer=2000)
    assert rep.converged and rep.mg_setups == 0


def test_max_outer_reports_nonconverged():
    op = build_diffusion_operator(10, 6)
    rep = solve_outer(op, PreconditionerSpec(), build_rhs(op.N, 6, 1), max_outer=3)
    assert not rep.converged and rep.outer_iterations == 3


def test_workers_do_not_change_result():
    op = build_diffusion_operator(12, 6)
    r = np.random.default_rng(4).standard_normal((6, op.N))
    z1 = ExactPreconditioner(op, 0.1, workers=1).apply(r)
    z2 = ExactPreconditioner(op, 0.1, workers=3).apply(r)
    assert np.array_equal(z1, z2)
