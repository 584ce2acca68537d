"""Dense brute-force checks of the spectral results on small instances.

Everything here is assembled from scratch with explicit loops and dense
linear algebra so that it can serve as an independent reference for the
matrix-free code.  Each ``verify_*`` function returns a :class:`Report`
with a pass flag, the worst deviation found and the tolerance used.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla

__all__ = [
    "Report",
    "DenseInstance",
    "build_dense_instance",
    "dense_diffusion_matrix",
    "match_multisets",
    "verify_preconditioned_spectrum",
    "verify_factorization",
    "verify_sherman_morrison",
    "verify_saddle_spectrum",
    "verify_chebyshev_polynomial_contract",
    "verify_all",
]


@dataclass
class Report:
    name: str
    passed: bool
    max_deviation: float
    tol: float
    details: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["max_deviation"] = float(self.max_deviation)
        return d


def dense_diffusion_matrix(nx, nu):
    """``I - (nu/h^2) L`` written entry by entry from the 5-point stencil."""
    h = 1.0 / (nx + 1)
    s = nu / h ** 2
    N = nx * nx
    A = np.zeros((N, N))
    for iy in range(nx):
        for ix in range(nx):
            k = iy * nx + ix
            A[k, k] = 1.0 + 4.0 * s
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                jx, jy = ix + dx, iy + dy
                if 0 <= jx < nx and 0 <= jy < nx:
                    A[k, jy * nx + jx] = -s
    return A


@dataclass
class DenseInstance:
    nx: int
    ell: int
    alpha: float
    nu: float
    A: np.ndarray
    AA: np.ndarray  # all-at-once block lower bidiagonal matrix
    P: np.ndarray  # block alpha-circulant preconditioner
    C: np.ndarray
    Gamma: np.ndarray
    U: np.ndarray
    Lam: np.ndarray

    @property
    def N(self):
        return self.nx * self.nx


def build_dense_instance(nx, ell, alpha, D=0.2, nu=None):
    """Assemble all dense matrices for one small instance.

    ``U`` has the Fourier modes ``exp(2 pi i (k-1)(j-1)/ell)/sqrt(ell)`` as
    columns.  With ``C`` carrying ones on the subdiagonal and ``alpha`` in the
    top-right corner, ``Gamma C Gamma^{-1} = U Lam U^*`` holds with ``Lam``
    the conjugated scaled roots of unity.
    """
    if nx * nx * ell > 600:
        raise ValueError("dense instances are limited to N*ell <= 600")
    if nu is None:
        nu = D * D / (2 * ell - 4)
    A = dense_diffusion_matrix(nx, nu)
    N = nx * nx
    C = np.zeros((ell, ell))
    for k in range(1, ell):
        C[k, k - 1] = 1.0
    C[0, ell - 1] = alpha
    shift = C.copy()
    shift[0, ell - 1] = 0.0
    eye_N = np.eye(N)
    AA = np.kron(np.eye(ell), A) - np.kron(shift, eye_N)
    P = np.kron(np.eye(ell), A) - np.kron(C, eye_N)
    Gamma = np.diag([alpha ** (k / ell) for k in range(ell)])
    U = np.array([[np.exp(2j * math.pi * k * j / ell) for j in range(ell)]
                  for k in range(ell)]) / math.sqrt(ell)
    roots = [alpha ** (1.0 / ell) * np.exp(2j * math.pi * j / ell) for j in range(ell)]
    Lam = np.diag(np.conj(roots))
    return DenseInstance(nx, ell, float(alpha), float(nu), A, AA, P, C, Gamma, U, Lam)


def match_multisets(computed, predicted, tol):
    """Greedy nearest pairing after sorting by real part.

    Returns ``(ok, max_deviation)``; sizes must agree.
    """
    a = sorted(np.asarray(computed, dtype=complex), key=lambda z: (z.real, z.imag))
    b = list(np.asarray(predicted, dtype=complex))
    if len(a) != len(b):
        return False, math.inf
    worst = 0.0
    remaining = np.array(b)
    used = np.zeros(len(b), dtype=bool)
    for z in a:
        d = np.abs(remaining - z)
        d[used] = np.inf
        k = int(np.argmin(d))
        used[k] = True
        worst = max(worst, float(d[k]))
    return worst <= tol, worst


def verify_preconditioned_spectrum(inst, tol=1e-8):
    """Eigenvalues of ``P^{-1} AA``: 1 with multiplicity ``(ell-1)N`` and ``mu^ell/(mu^ell - alpha)``."""
    M = np.linalg.solve(inst.P, inst.AA)
    ev = np.linalg.eigvals(M)
    mu = np.linalg.eigvalsh(inst.A)
    mul = mu ** inst.ell
    predicted = np.concatenate([np.ones((inst.ell - 1) * inst.N), mul / (mul - inst.alpha)])
    ok, dev = match_multisets(ev, predicted, tol)
    details = {"nx": inst.nx, "ell": inst.ell, "alpha": inst.alpha}
    m = mu.min() ** inst.ell
    if inst.alpha < m:
        hi = m / (m - inst.alpha)
        lo_c, hi_c = float(np.min(ev.real)), float(np.max(ev.real))
        ext = max(abs(lo_c - 1.0), abs(hi_c - hi))
        details.update(predicted_extremes=(1.0, hi), computed_extremes=(lo_c, hi_c))
        ok = ok and ext <= tol
        dev = max(dev, ext)
    # eigenvector matrix should be numerically full rank (diagonalisable)
    _, V = np.linalg.eig(M)
    details["eigvec_cond"] = float(np.linalg.cond(V))
    return Report("preconditioned_spectrum", bool(ok), dev, tol, details)


def verify_factorization(inst, tol=1e-10):
    """Rebuild ``P`` from ``(Gamma^{-1}U (x) I)(I (x) A - Lam (x) I)(U^* Gamma (x) I)``."""
    N = inst.N
    eye_N = np.eye(N)
    left = np.kron(np.linalg.inv(inst.Gamma) @ inst.U, eye_N)
    mid = np.kron(np.eye(inst.ell), inst.A) - np.kron(inst.Lam, eye_N)
    right = np.kron(inst.U.conj().T @ inst.Gamma, eye_N)
    P = left @ mid @ right
    dev = float(np.max(np.abs(P - inst.P)))
    return Report("factorization", dev <= tol, dev, tol,
                  {"nx": inst.nx, "ell": inst.ell, "alpha": inst.alpha})


def verify_sherman_morrison(inst, tol=1e-9):
    """``P^{-1} = AA^{-1} + AA^{-1} E_1 Z^{-1} E_ell^T AA^{-1}`` with ``Z = (I - alpha A^{-ell})/alpha``."""
    N, ell = inst.N, inst.ell
    AAi = np.linalg.inv(inst.AA)
    E1 = np.zeros((ell * N, N))
    E1[:N] = np.eye(N)
    El = np.zeros((ell * N, N))
    El[-N:] = np.eye(N)
    Aml = np.linalg.matrix_power(np.linalg.inv(inst.A), ell)
    corner = El.T @ AAi @ E1
    dev_corner = float(np.max(np.abs(corner - Aml)))
    Z = (np.eye(N) - inst.alpha * Aml) / inst.alpha
    Pi = AAi + AAi @ E1 @ np.linalg.solve(Z, El.T @ AAi)
    ref = np.linalg.inv(inst.P)
    dev_inv = float(np.max(np.abs(Pi - ref)) / max(1.0, np.max(np.abs(ref))))
    dev_identity = float(np.max(np.abs(inst.P - (inst.AA - inst.alpha * E1 @ El.T))))
    dev = max(dev_corner, dev_inv, dev_identity)
    return Report("sherman_morrison", dev <= tol, dev, tol,
                  {"corner": dev_corner, "inverse": dev_inv, "identity": dev_identity})


def verify_saddle_spectrum(A, shift, tol=1e-10):
    """Eigenvalues of ``P_D^{-1} S`` lie in ``[-1, -1/sqrt 2] U [1/sqrt 2, 1]``."""
    shift = complex(shift)
    if shift.imag <= 0:
        raise ValueError("shift must have positive imaginary part")
    A = np.asarray(A, dtype=float)
    N = A.shape[0]
    eye = np.eye(N)
    Phi = shift.imag * eye
    Psi = A - shift.real * eye
    S = np.block([[Phi, Psi], [Psi, -Phi]])
    PD = np.block([[Phi + Psi, np.zeros((N, N))], [np.zeros((N, N)), Phi + Psi]])
    # P_D is SPD, so P_D^{-1} S is similar to a symmetric matrix with real eigenvalues
    ev = sla.eigh(S, PD, eigvals_only=True)
    mod = np.abs(ev)
    lo = 1.0 / math.sqrt(2.0)
    dev = float(max(0.0, np.max(lo - mod), np.max(mod - 1.0)))
    return Report("saddle_spectrum", dev <= tol, dev, tol,
                  {"min_abs": float(mod.min()), "max_abs": float(mod.max()),
                   "n_negative": int(np.sum(ev < 0))})


def _cheb_poly_dense(M, lo, hi, p):
    n = M.shape[0]
    eye = np.eye(n, dtype=complex)
    c, d = (lo + hi) / 2, (hi - lo) / 2
    if p == 0:
        return eye
    if d == 0:
        return eye - M / c
    # explicit T_p via cos/cosh-free power basis: expand the recurrence coefficients
    Y = (c * eye - M) / d
    y = c / d
    T_prev, T = eye, Y
    t_prev, t = 1.0 + 0j, complex(y)
    for _ in range(p - 1):
        T_prev, T = T, 2 * Y @ T - T_prev
        t_prev, t = t, 2 * y * t - t_prev
    return T / t


def verify_chebyshev_polynomial_contract(M, lo, hi, p, tol=1e-8, seed=0):
    """``p`` steps of :func:`chebyshev_solve` reproduce the Chebyshev error polynomial."""
    from .solvers import ChebyshevConfig, chebyshev_solve

    M = np.asarray(M)
    n = M.shape[0]
    rng = np.random.default_rng(seed)
    xs = rng.standard_normal(n) + (1j * rng.standard_normal(n) if np.iscomplexobj(M) else 0)
    b = M @ xs
    x, _ = chebyshev_solve(lambda v: M @ v, b, ChebyshevConfig(lo=lo, hi=hi, maxiter=p))
    e_p = xs - x
    ref = _cheb_poly_dense(M, lo, hi, p) @ xs
    dev = float(np.linalg.norm(e_p - ref) / np.linalg.norm(xs))
    return Report("chebyshev_polynomial", dev <= tol, dev, tol, {"p": p, "lo": str(lo), "hi": str(hi)})


def verify_all(nxs=(2, 3, 4), ells=(4, 6), alphas=(1.0, 0.1, 0.01)):
    """Run every check on the product grid; returns a list of :class:`Report`."""
    reports = []
    for nx in nxs:
        for ell in ells:
            for alpha in alphas:
                inst = build_dense_instance(nx, ell, alpha)
                for fn in (verify_preconditioned_spectrum, verify_factorization,
                           verify_sherman_morrison):
                    r = fn(inst)
                    r.details.setdefault("nx", nx)
                    r.details.setdefault("ell", ell)
                    r.details.setdefault("alpha", alpha)
                    reports.append(r)
                lam = alpha ** (1.0 / ell) * np.exp(2j * math.pi / ell)
                reports.append(verify_saddle_spectrum(inst.A, lam))
                mu = np.linalg.eigvalsh(inst.A)
                Bm = inst.A - lam * np.eye(inst.N)
                reports.append(verify_chebyshev_polynomial_contract(
                    Bm, mu.min() - lam, mu.max() - lam, 7))
    return reports
