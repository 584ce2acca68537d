"""Instrumented iterative solvers.

All solvers take ``apply``/``precond`` callables mapping a vector to a
vector.  Matvec accounting is done by those callables (see
:mod:`covdiff.operators`); a counter passed here is only snapshotted so the
trace can report how much work the solve did.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SolverError",
    "ChebyshevConfig",
    "SolveTrace",
    "chebyshev_solve",
    "pcg_solve",
    "minres_solve",
    "optimal_linear_polynomial",
    "chebyshev_linear_max_modulus",
    "chebyshev_residual_polynomial",
]

DIVERGENCE_LIMIT = 1e8


class SolverError(RuntimeError):
    """Raised on divergence or on a breakdown that signals invalid input."""


@dataclass(frozen=True)
class ChebyshevConfig:
    """Foci of the spectral segment and the stopping rule.

    With ``tol=None`` exactly ``maxiter`` iterations are run (fixed-budget
    mode); otherwise iteration stops once the relative residual drops below
    ``tol`` or ``maxiter`` is reached.
    """

    lo: complex
    hi: complex
    maxiter: int
    tol: float | None = None

    def __post_init__(self):
        if self.maxiter < 0:
            raise ValueError("maxiter must be non-negative")
        if self.tol is not None and not self.tol > 0:
            raise ValueError("tol must be positive")
        c, d = self.center, self.half_width
        if d == 0:
            if c == 0:
                raise ValueError("single-point spectrum at the origin")
            return
        y = c / d
        if abs(complex(y).imag) < 1e-14 * max(1.0, abs(y)) and abs(complex(y).real) <= 1.0:
            raise ValueError("spectral segment contains the origin")

    @property
    def center(self):
        return (self.lo + self.hi) / 2

    @property
    def half_width(self):
        return (self.hi - self.lo) / 2


@dataclass
class SolveTrace:
    """Relative residuals ``r_0, r_1, ...`` and bookkeeping of one solve."""

    residuals: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    matvecs: int = 0
    vcycles: int = 0

    @property
    def final_residual(self):
        return self.residuals[-1] if self.residuals else float("nan")


def _snap(counter):
    return (counter.matvecs, counter.vcycles) if counter is not None else (0, 0)


def _finish(trace, counter, start):
    if counter is not None:
        trace.matvecs = counter.matvecs - start[0]
        trace.vcycles = counter.vcycles - start[1]
    return trace


def chebyshev_solve(apply, rhs, cfg, counter=None, x0=None, callback=None, precond=None):
    """Chebyshev semi-iteration for a normal operator with spectrum on a segment.

    The error after ``p`` steps is ``T_p((c - M)/d) / T_p(c/d)`` applied to
    the initial error, where ``c`` and ``d`` are the (possibly complex)
    centre and half-width of ``cfg``.  Each iteration costs one application
    of ``apply``, which is also used to form the true residual.

    With ``precond`` the iteration runs on the left-preconditioned operator
    ``precond o apply`` (whose spectrum ``cfg`` then describes) while the
    stopping test still uses the unpreconditioned residual.

    Parameters
    ----------
    apply : callable
        ``v -> M v``.
    rhs : ndarray
    cfg : ChebyshevConfig
    counter : MatvecCounter, optional
        Only used to fill ``trace.matvecs``.
    x0 : ndarray, optional
        Initial guess, zero by default.
    callback : callable, optional
        Called as ``callback(p, x, r)`` after every iteration.
    precond : callable, optional
        ``r -> P^{-1} r``.

    Returns
    -------
    x : ndarray
    trace : SolveTrace
    """
    start = _snap(counter)
    rhs = np.asarray(rhs)
    dtype = np.result_type(rhs, cfg.center, cfg.half_width, np.float64)
    bnorm = np.linalg.norm(rhs)
    trace = SolveTrace()
    if x0 is None:
        x = np.zeros(rhs.shape, dtype=dtype)
        r = rhs.astype(dtype, copy=True)
    else:
        x = np.array(x0, dtype=dtype)
        r = rhs - apply(x)
    if bnorm == 0:
        trace.residuals.append(0.0)
        trace.converged = True
        return x, _finish(trace, counter, start)
    trace.residuals.append(np.linalg.norm(r) / bnorm)

    c, d = cfg.center, cfg.half_width
    if cfg.tol is not None and trace.residuals[0] < cfg.tol:
        trace.converged = True
        return x, _finish(trace, counter, start)

    sigma1 = c / d if d != 0 else None
    rho_prev = None
    step = None
    for p in range(1, cfg.maxiter + 1):
        z = r if precond is None else precond(r)
        if p == 1 or d == 0:
            step = z / c
            rho_prev = 1.0 / sigma1 if sigma1 is not None else None
        else:
            rho = 1.0 / (2.0 * sigma1 - rho_prev)
            step = (rho * rho_prev) * step + (2.0 * rho / d) * z
            rho_prev = rho
        x = x + step
        r = rhs - apply(x)
        res = np.linalg.norm(r) / bnorm
        trace.residuals.append(res)
        trace.iterations = p
        if callback is not None:
            callback(p, x, r)
        if not np.isfinite(res) or res > DIVERGENCE_LIMIT:
            raise SolverError(f"Chebyshev iteration diverged at step {p} (residual {res:.3e})")
        if cfg.tol is not None and res < cfg.tol:
            trace.converged = True
            break
    return x, _finish(trace, counter, start)


def chebyshev_residual_polynomial(M, lo, hi, p):
    """Dense ``T_p((c I - M)/d) / T_p(c/d)`` via the three-term recurrence.

    Independent of :func:`chebyshev_solve`; used to verify it.
    """
    M = np.asarray(M)
    n = M.shape[0]
    c, d = (lo + hi) / 2, (hi - lo) / 2
    eye = np.eye(n)
    if d == 0:
        return eye - M / c if p >= 1 else eye
    Y = (c * eye - M) / d
    y = c / d
    Tm, T = eye.astype(complex), Y.astype(complex)
    tm, t = 1.0 + 0j, complex(y)
    if p == 0:
        return eye.astype(complex)
    for _ in range(1, p):
        Tm, T = T, 2 * Y @ T - Tm
        tm, t = t, 2 * y * t - tm
    return T / t


def pcg_solve(apply, precond, rhs, tol=1e-6, maxiter=1000, counter=None, x0=None):
    """Preconditioned conjugate gradients.

    Stops on the unpreconditioned relative residual ``||b - Ax|| / ||b||``.
    Raises :class:`SolverError` on non-positive curvature.
    """
    start = _snap(counter)
    b = np.asarray(rhs, dtype=float)
    trace = SolveTrace()
    bnorm = np.linalg.norm(b)
    if x0 is None:
        x = np.zeros_like(b)
        r = b.copy()
    else:
        x = np.array(x0, dtype=float)
        r = b - apply(x)
    if bnorm == 0:
        trace.residuals.append(0.0)
        trace.converged = True
        return x, _finish(trace, counter, start)
    trace.residuals.append(np.linalg.norm(r) / bnorm)
    if trace.residuals[0] < tol:
        trace.converged = True
        return x, _finish(trace, counter, start)
    z = precond(r)
    rz = r @ z
    if rz <= 0:
        raise SolverError("preconditioner is not positive definite")
    p = z.copy()
    for k in range(1, maxiter + 1):
        q = apply(p)
        pq = p @ q
        if pq <= 0:
            raise SolverError("operator is not positive definite (non-positive curvature)")
        a = rz / pq
        x += a * p
        r -= a * q
        res = np.linalg.norm(r) / bnorm
        trace.residuals.append(res)
        trace.iterations = k
        if res < tol:
            trace.converged = True
            break
        z = precond(r)
        rz_new = r @ z
        if rz_new <= 0:
            raise SolverError("preconditioner is not positive definite")
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, _finish(trace, counter, start)


def minres_solve(apply, precond, rhs, tol=1e-6, maxiter=1000, counter=None):
    """Preconditioned MINRES for symmetric (possibly indefinite) systems.

    Follows the Lanczos/Givens formulation of Elman, Silvester and Wathen.
    The residual measured against ``tol`` is the preconditioned one,
    ``||b - Ax||_{P^{-1}} / ||b||_{P^{-1}}``, which MINRES minimises and
    which is therefore non-increasing.  Zero initial guess.
    """
    start = _snap(counter)
    b = np.asarray(rhs, dtype=float)
    n = b.shape[0]
    x = np.zeros(n)
    trace = SolveTrace()
    if not np.any(b):
        trace.residuals.append(0.0)
        trace.converged = True
        return x, _finish(trace, counter, start)

    v_old = np.zeros(n)
    v = b.copy()
    z = precond(v)
    gamma = np.sqrt(z @ v)
    if not np.isfinite(gamma) or gamma <= 0:
        raise SolverError("preconditioner is not positive definite")
    gamma_old = 1.0
    eta = gamma
    eta0 = gamma
    s_old = s = 0.0
    c_old = c = 1.0
    w_old = np.zeros(n)
    w = np.zeros(n)
    trace.residuals.append(1.0)
    for k in range(1, maxiter + 1):
        z = z / gamma
        Az = apply(z)
        delta = Az @ z
        v_new = Az - (delta / gamma) * v - (gamma / gamma_old) * v_old
        z_new = precond(v_new)
        gamma_new2 = z_new @ v_new
        if gamma_new2 < -1e-14 * abs(delta) * gamma:
            raise SolverError("preconditioner is not positive definite")
        gamma_new = np.sqrt(max(gamma_new2, 0.0))
        a0 = c * delta - c_old * s * gamma
        a1 = np.hypot(a0, gamma_new)
        a2 = s * delta + c_old * c * gamma
        a3 = s_old * gamma
        c_new, s_new = a0 / a1, gamma_new / a1
        w_new = (z - a3 * w_old - a2 * w) / a1
        x += c_new * eta * w_new
        eta = -s_new * eta
        res = abs(eta) / eta0
        trace.residuals.append(res)
        trace.iterations = k
        if res < tol or gamma_new == 0.0:
            trace.converged = True
            break
        v_old, v = v, v_new
        z = z_new
        gamma_old, gamma = gamma, gamma_new
        c_old, c = c, c_new
        s_old, s = s, s_new
        w_old, w = w, w_new
    return x, _finish(trace, counter, start)


def optimal_linear_polynomial(xi_min, xi_max):
    """Optimal degree-1 residual polynomial on the segment ``[xi_min, xi_max]``.

    Returns ``(coefficient, max_modulus)`` where the polynomial is
    ``1 - coefficient * z`` and ``max_modulus`` is its maximum modulus on the
    segment, ``|xi_max - xi_min| / (|xi_max| + |xi_min|)``.
    """
    a, b = complex(xi_min), complex(xi_max)
    if a.real == b.real:
        raise ValueError("segment endpoints must have distinct real parts")
    if a == 0 or b == 0:
        raise ValueError("segment endpoint at the origin")
    denom = abs(a) + abs(b)
    coef = (abs(b) / b + abs(a) / a) / denom
    return coef, abs(b - a) / denom


def chebyshev_linear_max_modulus(xi_min, xi_max):
    """Maximum modulus of the degree-1 Chebyshev residual polynomial on the segment."""
    a, b = complex(xi_min), complex(xi_max)
    return abs(b - a) / abs(b + a)
