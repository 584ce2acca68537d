import numpy as np
import pytest

from covdiff.oracle import (build_dense_instance, dense_diffusion_matrix, match_multisets,
                            verify_all, verify_factorization, verify_preconditioned_spectrum,
                            verify_saddle_spectrum, verify_sherman_morrison)


def test_dense_matrix_hand_checked_nx2():
    # h = 1/3, nu/h^2 = 9 nu; each unknown has two interior neighbours
    nu = 0.01
    A = dense_diffusion_matrix(2, nu)
    s = 9 * nu
    ref = np.array([[1 + 4 * s, -s, -s, 0], [-s, 1 + 4 * s, 0, -s],
                    [-s, 0, 1 + 4 * s, -s], [0, -s, -s, 1 + 4 * s]])
    assert np.allclose(A, ref)


def test_instance_size_limit():
    with pytest.raises(ValueError):
        build_dense_instance(10, 10, 1.0)


def test_match_multisets():
    ok, dev = match_multisets(np.array([1.0, 2.0 + 1e-12]), np.array([2.0, 1.0]), 1e-10)
    assert ok and dev < 1e-10
    ok, _ = match_multisets(np.array([1.0, 1.0]), np.array([1.0, 2.0]), 1e-10)
    assert not ok


@pytest.mark.parametrize("alpha", [1.0, 0.1, 0.01])
def test_individual_checks(alpha):
    inst = build_dense_instance(3, 6, alpha)
    for rep in (verify_preconditioned_spectrum(inst), verify_factorization(inst),
                verify_sherman_morrison(inst)):
        assert rep.passed, rep


def test_saddle_spectrum_detects_wrong_shift():
    A = dense_diffusion_matrix(3, 0.01)
    assert verify_saddle_spectrum(A, complex(0.3, 0.9)).passed
    assert verify_saddle_spectrum(A, complex(-0.8, 0.2)).passed


def test_perturbed_preconditioner_fails():
    inst = build_dense_instance(2, 4, 0.1)
    inst.P[0, -1] += 0.05
    assert not verify_factorization(inst).passed


def test_verify_all_passes():
    reports = verify_all()
    assert reports and all(r.passed for r in reports)
    d = reports[0].to_dict()
    assert {"name", "passed", "max_deviation", "tol", "details"} <= set(d)
