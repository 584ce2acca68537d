import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from covdiff.multigrid import (apply_saddle_diag_precond, build_mg_hierarchy, interpolation_1d,
                               mg_vcycle)
from covdiff.operators import MatvecCounter, SaddleOperator, apply_saddle, build_diffusion_operator
from covdiff.solvers import minres_solve, pcg_solve


def _shifted(op, s):
    return (op.matrix + s * sp.identity(op.N)).tocsr()


def test_interpolation_nested_is_standard_linear():
    P = interpolation_1d(7, 3).toarray()
    ref = np.zeros((7, 3))
    for k in range(3):
        ref[2 * k + 1, k] = 1.0
        ref[2 * k, k] += 0.5
        ref[2 * k + 2, k] += 0.5
    assert np.allclose(P, ref)


def test_interpolation_reproduces_linear_functions():
    P = interpolation_1d(12, 6)
    xc = np.arange(1, 7) / 7
    xf = np.arange(1, 13) / 13
    # boundary values are zero, so only points between coarse nodes are exact
    inside = (xf >= xc[0]) & (xf <= xc[-1])
    assert np.allclose((P @ xc)[inside], xf[inside])


def test_levels_and_counters():
    op = build_diffusion_operator(7, 10)
    c = MatvecCounter()
    h = build_mg_hierarchy(op, 0.0, c)
    assert [lv.nx for lv in h.levels] == [7, 3]
    assert c.mg_setups == 1
    mg_vcycle(h, np.ones(op.N), c)
    assert c.vcycles == 1 and c.matvecs == 0


def test_fine_level_matches_operator():
    op = build_diffusion_operator(9, 10)
    h = build_mg_hierarchy(op, 0.37)
    u = np.random.default_rng(0).standard_normal((9, 9))
    assert np.allclose(h.levels[0].apply(u).ravel(), _shifted(op, 0.37) @ u.ravel())


def test_rejects_non_spd_shift():
    op = build_diffusion_operator(8, 10)
    with pytest.raises(ValueError):
        build_mg_hierarchy(op, -2.0)


@settings(max_examples=15, deadline=None)
@given(nx=st.integers(4, 40), s=st.floats(-0.9, 2.0), seed=st.integers(0, 1000))
def test_linear_symmetric_positive(nx, s, seed):
    op = build_diffusion_operator(nx, 10)
    h = build_mg_hierarchy(op, s)
    rng = np.random.default_rng(seed)
    r1, r2 = rng.standard_normal((2, op.N))
    z1, z2 = mg_vcycle(h, r1), mg_vcycle(h, r2)
    lin = mg_vcycle(h, 2.0 * r1 - 3.0 * r2)
    assert np.allclose(lin, 2.0 * z1 - 3.0 * z2, rtol=0, atol=1e-12 * np.abs(lin).max())
    assert abs(z1 @ r2 - r1 @ z2) <= 1e-12 * max(1.0, abs(z1 @ r2))
    assert z1 @ r1 > 0


def test_nx4_better_than_zero_guess():
    op = build_diffusion_operator(4, 10)
    s = 0.5
    h = build_mg_hierarchy(op, s)
    M = _shifted(op, s).toarray()
    r = np.random.default_rng(3).standard_normal(op.N)
    zs = np.linalg.solve(M, r)
    z = mg_vcycle(h, r)
    en = lambda e: np.sqrt(e @ M @ e)
    assert en(z - zs) < en(zs)


def test_contraction_nx255():
    op = build_diffusion_operator(255, 10)
    h = build_mg_hierarchy(op, 0.0)
    M = _shifted(op, 0.0)
    rng = np.random.default_rng(0)
    for _ in range(3):
        r = rng.standard_normal(op.N)
        assert np.linalg.norm(r - M @ mg_vcycle(h, r)) / np.linalg.norm(r) <= 0.2


@pytest.mark.parametrize("nx", [100, 500])
def test_pcg_iterations_mesh_independent(nx):
    counts = {}
    for n in (100, nx):
        op = build_diffusion_operator(n, 10)
        s = 0.01 ** 0.1
        h = build_mg_hierarchy(op, s)
        M = _shifted(op, s)
        b = np.random.default_rng(0).standard_normal(op.N)
        _, tr = pcg_solve(lambda v: M @ v, lambda v: mg_vcycle(h, v), b, tol=1e-6, maxiter=100)
        assert tr.converged
        counts[n] = tr.iterations
    assert counts[100] <= 10
    assert counts[nx] - counts[100] <= 2


def test_saddle_precond_minres_robust():
    op = build_diffusion_operator(4, 10)
    lam = complex(np.exp(2j * np.pi / 10))
    S = SaddleOperator(op, lam)
    s = lam.imag - lam.real
    h = build_mg_hierarchy(op, s)
    N = op.N
    PD = _shifted(op, s).toarray()
    b = np.random.default_rng(1).standard_normal(2 * N)
    _, exact = minres_solve(lambda v: apply_saddle(S, v), lambda v: np.concatenate(
        [np.linalg.solve(PD, v[:N]), np.linalg.solve(PD, v[N:])]), b, tol=1e-8)
    c = MatvecCounter()
    x, mg = minres_solve(lambda v: apply_saddle(S, v), lambda v: apply_saddle_diag_precond(h, v, c),
                         b, tol=1e-8)
    assert mg.converged and mg.iterations <= 2 * exact.iterations
    assert c.vcycles == 2 * (mg.iterations + 1)
    assert np.linalg.norm(S.dense() @ x - b) < 1e-6 * np.linalg.norm(b)


def test_jacobi_smoother_spd():
    op = build_diffusion_operator(15, 10)
    h = build_mg_hierarchy(op, 0.2, smoother="jacobi")
    rng = np.random.default_rng(5)
    r1, r2 = rng.standard_normal((2, op.N))
    z1, z2 = mg_vcycle(h, r1), mg_vcycle(h, r2)
    assert abs(z1 @ r2 - r1 @ z2) < 1e-12 * abs(z1 @ r2)
    assert z1 @ r1 > 0
