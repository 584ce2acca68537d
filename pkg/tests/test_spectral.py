import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from covdiff.operators import build_diffusion_operator
from covdiff.spectral import (SpectralBounds, allocate_inner_iterations, analytic_eigenvalue,
                              analytic_eigenvalues, analytic_eigenvector, convergence_factor_bound,
                              extreme_eigenvalues, gamma_condition_number, outer_spectral_bounds,
                              predicted_iterations, scaled_roots_of_unity)


@pytest.mark.parametrize("nx", [2, 3, 5, 8])
def test_analytic_eigenvalues_match_dense(nx):
    op = build_diffusion_operator(nx, 6)
    dense = np.linalg.eigvalsh(op.dense())
    assert np.allclose(np.sort(analytic_eigenvalues(op).ravel()), dense, atol=1e-10)


def test_eigenvector_pairs():
    op = build_diffusion_operator(5, 6)
    A = op.dense()
    for i, j in [(1, 1), (2, 4), (5, 3)]:
        v = analytic_eigenvector(op, i, j)
        assert np.linalg.norm(v) == pytest.approx(1.0)
        assert np.allclose(A @ v, analytic_eigenvalue(op, i, j) * v)


def test_eigenvalue_index_errors():
    op = build_diffusion_operator(4, 6)
    with pytest.raises(IndexError):
        analytic_eigenvalue(op, 0, 1)
    with pytest.raises(IndexError):
        analytic_eigenvalue(op, 1, 5)


def test_extreme_values_nx100():
    op = build_diffusion_operator(100, 10)
    b = extreme_eigenvalues(op)
    s = 0.0025 * 101 ** 2
    assert b.mu_min == pytest.approx(1 + 8 * s * math.sin(math.pi / 202) ** 2)
    assert b.mu_max == pytest.approx(1 + 8 * s * math.sin(100 * math.pi / 202) ** 2)


def test_roots_of_unity_structure():
    r = scaled_roots_of_unity(10, 0.01)
    rad = 0.01 ** 0.1
    assert np.allclose(np.abs(r.values), rad)
    assert r[0] == rad and r[5] == -rad
    for j in range(1, 10):
        assert r[r.partner(j)] == np.conj(r[j])
    assert np.allclose(r.values ** 10, 0.01)


def test_outer_bounds_and_errors():
    b = SpectralBounds(1.1, 50.0)
    lo, hi = outer_spectral_bounds(b, 4, 0.5)
    assert lo == 1.0 and hi == pytest.approx(1.1 ** 4 / (1.1 ** 4 - 0.5))
    with pytest.raises(ValueError):
        outer_spectral_bounds(b, 4, 1.1 ** 4)


def test_sigma_independent_of_imaginary_part():
    b = SpectralBounds(1.05, 200.0)
    assert convergence_factor_bound(b, 0.3 + 0.7j) == convergence_factor_bound(b, 0.3 - 2j)
    assert convergence_factor_bound(b, 1.0) > convergence_factor_bound(b, -1.0)
    with pytest.raises(ValueError):
        convergence_factor_bound(b, 1.05)


def test_predicted_iterations_closed_form():
    # direct evaluation of the closed form for vmin=1, vmax=100, eps=1e-6
    num = math.log(1e6 + math.sqrt(1e12 - 1))
    den = math.log((1 + 0.1) / (1 - 0.1))
    assert predicted_iterations(1.0, 100.0, 1e-6) == math.ceil(num / den)
    assert predicted_iterations(2.0, 2.0, 1e-3) == 1


@pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-8])
def test_predicted_iterations_sufficient_for_chebyshev(eps):
    # p* iterations of CI on a diagonal SPD spectrum reach eps in the max-norm sense
    vmin, vmax = 1.0, 400.0
    p = predicted_iterations(vmin, vmax, eps)
    y = (vmax + vmin) / (vmax - vmin)
    assert 1.0 / math.cosh(p * math.acosh(y)) <= eps
    assert 1.0 / math.cosh((p - 1) * math.acosh(y)) > eps


# allocation sums implied by the reference outer/matvec pairs: matvecs/outer - ell
@pytest.mark.parametrize("alpha,nx,ell,eta,total", [
    (0.01, 100, 10, 0.2, 195),   # 8 (1640)
    (1.0, 100, 10, 0.2, 193),    # 16 (3248)
    (0.01, 50, 10, 0.1, 46),     # 27 (1512)
    (0.01, 100, 10, 0.1, 95),    # 21 (2205)
    (0.01, 100, 10, 0.3, 294),   # 6 (1824)
    (1.0, 100, 10, 0.3, 295),    # 11 (3355)
    (0.01, 200, 10, 0.2, 395),   # 8 (3240)
    (1.0, 100, 50, 0.2, 975),    # 12 (12300)
    (0.01, 100, 50, 0.3, 1478),  # 4 (6112)
    (0.01, 100, 6, 0.2, 117),    # 10 (1230)
])
def test_nc2_allocation_matches_reference_totals(alpha, nx, ell, eta, total):
    op = build_diffusion_operator(nx, ell)
    a = allocate_inner_iterations(ell, nx, extreme_eigenvalues(op), alpha, eta, "nc2")
    assert a.total == total


def test_nc1_uniform():
    op = build_diffusion_operator(100, 10)
    a = allocate_inner_iterations(10, 100, extreme_eigenvalues(op), 1.0, 0.2, "nc1")
    assert a.counts == (20,) * 10 and a.total == 200 == a.budget


def test_nc2_alpha1_real_roots():
    op = build_diffusion_operator(100, 10)
    a = allocate_inner_iterations(10, 100, extreme_eigenvalues(op), 1.0, 0.2, "nc2")
    assert a[0] == 60 and a[5] == 9


@settings(max_examples=40, deadline=None)
@given(ell=st.sampled_from([4, 6, 10, 20]), nx=st.integers(10, 200),
       alpha=st.floats(1e-4, 1.0), eta=st.floats(0.05, 1.0))
def test_allocation_properties(ell, nx, alpha, eta):
    op = build_diffusion_operator(nx, ell)
    a = allocate_inner_iterations(ell, nx, extreme_eigenvalues(op), alpha, eta, "nc2")
    assert len(a) == ell and min(a.counts) >= 1
    # conjugate roots share the real part, hence the count
    for j in range(1, ell):
        assert a[j] == a[ell - j]
    # floor of a partition of ell*nx*eta
    assert a.total <= max(a.budget, ell) + ell
    if a.budget >= 2 * ell:
        assert a.total <= a.budget
    # slowest block (largest real part) gets the most
    assert a[0] == max(a.counts)


def test_gamma_condition_number():
    assert gamma_condition_number(10, 1.0) == 1.0
    assert gamma_condition_number(10, 0.01) == pytest.approx(0.01 ** -0.9)
