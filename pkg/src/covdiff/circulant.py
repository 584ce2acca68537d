"""Block alpha-circulant preconditioners and the outer Chebyshev solve.

The preconditioner ``P_alpha = I (x) A - C_alpha (x) I`` is applied in three
steps: scale block k by ``alpha^((k-1)/ell)`` and DFT across blocks, solve the
ell independent shifted systems ``(A - lambda I) x = b``, and undo the
transform.  The variants differ only in how the shifted systems are solved:

* ``exact``: sparse complex LU, cached per shift;
* ``nc1``/``nc2``: a fixed number of Chebyshev iterations per block;
* ``sp``: PCG on the two real blocks, MINRES on the real saddle point form of
  the complex ones, each with a multigrid-based inner preconditioner.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .multigrid import apply_saddle_diag_precond, build_mg_hierarchy, mg_vcycle
from .operators import (MatvecCounter, SaddleOperator, ShiftedOperator, apply_A,
                        apply_block_system, apply_saddle, apply_shifted)
from .solvers import ChebyshevConfig, chebyshev_solve, minres_solve, pcg_solve
from .spectral import (SpectralBounds, allocate_inner_iterations, extreme_eigenvalues,
                       outer_spectral_bounds, scaled_roots_of_unity)

__all__ = [
    "KINDS",
    "INNER_PRECONDITIONERS",
    "InconsistentSolveError",
    "PreconditionerSpec",
    "FourierBlockProblem",
    "SolveReport",
    "block_dft_forward",
    "block_dft_inverse",
    "block_shifts",
    "ExactPreconditioner",
    "NestedChebyshevPreconditioner",
    "SaddlePointPreconditioner",
    "build_preconditioner",
    "apply_exact_preconditioner_inverse",
    "apply_nc_preconditioner_inverse",
    "apply_sp_preconditioner_inverse",
    "solve_outer",
]

KINDS = ("none", "exact", "nc1", "nc2", "sp")
INNER_PRECONDITIONERS = ("mg", "jacobi", "identity")
IMAG_RESIDUE_TOL = 1e-10


class InconsistentSolveError(RuntimeError):
    """The inverse transform of real data came back with a non-negligible imaginary part."""


@dataclass(frozen=True)
class PreconditionerSpec:
    """Which preconditioner to use and its settings.

    ``eta`` sets the inner budget (``floor(ell*nx*eta)`` Chebyshev iterations
    for ``nc1``/``nc2``, ``floor(nx*eta)`` per block for ``sp``).
    """

    kind: str = "none"
    alpha: float | None = None
    eta: float | None = None
    inner_precond: str = "mg"
    inner_tol: float = 1e-6
    workers: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown preconditioner kind {self.kind!r}; choose from {KINDS}")
        if self.kind != "none":
            if self.alpha is None or not self.alpha > 0:
                raise ValueError(f"{self.kind} preconditioner needs alpha > 0")
        if self.kind in ("nc1", "nc2", "sp"):
            if self.eta is None or not self.eta > 0:
                raise ValueError(f"{self.kind} preconditioner needs eta > 0")
        if self.inner_precond not in INNER_PRECONDITIONERS:
            raise ValueError(f"unknown inner preconditioner {self.inner_precond!r}")
        if not self.inner_tol > 0:
            raise ValueError("inner_tol must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def validate_for(self, op, bounds=None):
        """Check ``alpha < mu_N^ell`` for this operator."""
        if self.kind == "none":
            return
        bounds = bounds or extreme_eigenvalues(op)
        outer_spectral_bounds(bounds, op.ell, self.alpha)


@dataclass
class FourierBlockProblem:
    """One decoupled system ``(A - shift I) x = rhs`` in Fourier space."""

    index: int
    shift: complex
    rhs: np.ndarray
    solution: np.ndarray | None = None
    iterations: int = 0


@dataclass
class SolveReport:
    """Outcome of :func:`solve_outer`."""

    kind: str
    nx: int
    ell: int
    alpha: float | None
    eta: float | None
    outer_iterations: int
    converged: bool
    matvecs: int
    mg_setups: int
    vcycles: int
    final_residual: float
    residuals: list = field(default_factory=list)
    inner_iterations: list = field(default_factory=list)  # per outer iteration, per block

    @property
    def amg_per_iteration_count(self):
        """Setups under the convention of one per block per outer iteration."""
        return self.ell * self.outer_iterations if self.kind == "sp" else 0

    def equivalent_matvecs(self, amg_matvec_equiv=80):
        """A-matvecs plus the setup-per-iteration count converted to matvecs."""
        return self.matvecs + amg_matvec_equiv * self.amg_per_iteration_count


# ---------------------------------------------------------------- transforms

def _gamma(ell, alpha):
    return alpha ** (np.arange(ell) / ell)


def block_dft_forward(x, alpha):
    """Apply ``U^* Gamma_alpha`` across the block dimension of an ``(ell, N)`` array."""
    x = np.asarray(x)
    ell = x.shape[0]
    return np.fft.fft(_gamma(ell, alpha)[:, None] * x, axis=0, norm="ortho")


def block_dft_inverse(y, alpha, real=False):
    """Apply ``Gamma_alpha^{-1} U``; with ``real=True`` check and drop the imaginary part."""
    y = np.asarray(y)
    ell = y.shape[0]
    x = np.fft.ifft(y, axis=0, norm="ortho") / _gamma(ell, alpha)[:, None]
    if not real:
        return x
    scale = np.linalg.norm(x.real)
    resid = np.linalg.norm(x.imag)
    if resid > IMAG_RESIDUE_TOL * max(scale, np.finfo(float).tiny):
        raise InconsistentSolveError(
            f"imaginary residue {resid:.3e} relative to {scale:.3e} after inverse transform")
    return x.real.copy()


def block_shifts(ell, alpha):
    """Shift of the system solved on output block j of :func:`block_dft_forward`.

    With ``U`` holding the Fourier modes ``exp(+2 pi i (k-1)(j-1)/ell)``,
    ``U^* Gamma C_alpha Gamma^{-1} U`` is diagonal with the *conjugated*
    scaled roots, so output block j pairs with ``conj(lambda_j)``.
    """
    return np.conj(scaled_roots_of_unity(ell, alpha).values)


def _map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------- preconditioners

class _BlockPreconditioner:
    kind = ""

    def __init__(self, op, alpha, workers=1, bounds=None):
        self.op = op
        self.alpha = float(alpha)
        self.workers = workers
        self.bounds = bounds or extreme_eigenvalues(op)
        outer_spectral_bounds(self.bounds, op.ell, self.alpha)
        self.shifts = block_shifts(op.ell, self.alpha)
        self.last_inner_iterations = [0] * op.ell

    def solve_block(self, prob, counter):
        raise NotImplementedError

    def apply(self, r, counter=None):
        """Return ``P^{-1} r`` for an ``(ell, N)`` block array."""
        r = np.asarray(r)
        real = not np.iscomplexobj(r)
        y = block_dft_forward(r, self.alpha)
        probs = [FourierBlockProblem(j, self.shifts[j], y[j]) for j in range(self.op.ell)]

        def run(p):
            local = MatvecCounter()
            self.solve_block(p, local)
            return local

        locals_ = _map(run, probs, self.workers)
        if counter is not None:
            for c in locals_:
                counter.merge(c)
        z = np.stack([p.solution for p in probs])
        self.last_inner_iterations = [p.iterations for p in probs]
        return block_dft_inverse(z, self.alpha, real=real)

    __call__ = apply


class ExactPreconditioner(_BlockPreconditioner):
    """Direct solves with sparse complex LU factors, one per conjugate pair of shifts."""

    kind = "exact"

    def __init__(self, op, alpha, workers=1, bounds=None):
        super().__init__(op, alpha, workers, bounds)
        self._factors = {}
        N = op.N
        for j, lam in enumerate(self.shifts):
            key = self._key(lam)
            if key in self._factors:
                continue
            mat = (op.matrix - key * sp.identity(N)).tocsc()
            if key.imag == 0:
                mat = mat.real.astype(float)
            try:
                self._factors[key] = spla.splu(mat)
            except RuntimeError as exc:
                raise ValueError(f"block {j + 1} with shift {lam} is singular") from exc

    @staticmethod
    def _key(lam):
        lam = complex(lam)
        return lam if lam.imag >= 0 else lam.conjugate()

    def solve_block(self, prob, counter):
        lam = complex(prob.shift)
        lu = self._factors[self._key(lam)]
        b = prob.rhs
        if lam.imag >= 0:
            if lam.imag == 0:
                x = lu.solve(np.ascontiguousarray(b.real)) + 1j * lu.solve(np.ascontiguousarray(b.imag))
            else:
                x = lu.solve(b.astype(complex))
        else:
            x = np.conj(lu.solve(np.conj(b).astype(complex)))
        prob.solution = x
        prob.iterations = 0


class NestedChebyshevPreconditioner(_BlockPreconditioner):
    """Fixed-budget Chebyshev on each shifted block (NC1 uniform, NC2 Algorithm-1 weighted)."""

    def __init__(self, op, alpha, eta, kind="nc2", workers=1, bounds=None, allocation=None):
        super().__init__(op, alpha, workers, bounds)
        self.kind = kind
        self.eta = float(eta)
        if allocation is None:
            allocation = allocate_inner_iterations(op.ell, op.nx, self.bounds, self.alpha,
                                                   self.eta, kind=kind)
        self.allocation = allocation
        # allocation is indexed by root; the shift of output block j is conj(root j),
        # whose partner root has the same real part and hence the same count
        self.blocks = [ShiftedOperator.from_base(op, lam, self.bounds) for lam in self.shifts]

    def solve_block(self, prob, counter):
        opB = self.blocks[prob.index]
        lo, hi = opB.segment
        cfg = ChebyshevConfig(lo=lo, hi=hi, maxiter=self.allocation[prob.index])
        x, trace = chebyshev_solve(lambda v: apply_shifted(opB, v, counter), prob.rhs, cfg, counter)
        prob.solution = x
        prob.iterations = trace.iterations


def _make_inner_precond(kind, op, shift, counter):
    """SPD approximation of ``(A + shift I)^{-1}`` and the V-cycle hierarchy (if any)."""
    if kind == "mg":
        hier = build_mg_hierarchy(op, shift, counter)
        return hier, lambda r, c: mg_vcycle(hier, r, c)
    if kind == "jacobi":
        d = 1.0 + shift + 4.0 * op.scale
        return None, lambda r, c: r / d
    return None, lambda r, c: r


class SaddlePointPreconditioner(_BlockPreconditioner):
    """PCG on the real blocks, preconditioned MINRES on the saddle form of the complex ones.

    Each block runs at most ``floor(nx*eta)`` iterations with relative
    tolerance ``inner_tol``.  Inner preconditioners (multigrid hierarchies)
    are built once per distinct shift at construction.
    """

    kind = "sp"

    def __init__(self, op, alpha, eta, inner_precond="mg", inner_tol=1e-6, workers=1,
                 bounds=None, counter=None):
        super().__init__(op, alpha, workers, bounds)
        self.eta = float(eta)
        self.inner_precond = inner_precond
        self.inner_tol = float(inner_tol)
        self.max_inner = max(1, int(math.floor(op.nx * self.eta + 1e-9)))
        self.setup_counter = MatvecCounter()
        self._inner = {}
        for lam in self.shifts:
            s = self._mg_shift(lam)
            if s not in self._inner:
                self._inner[s] = _make_inner_precond(inner_precond, op, s, self.setup_counter)
        if counter is not None:
            counter.merge(self.setup_counter)

    @staticmethod
    def _mg_shift(lam):
        lam = complex(lam)
        # real block: A - lam I;  complex block: Phi + Psi = A + (|Im| - Re) I
        return float(abs(lam.imag) - lam.real) if lam.imag != 0 else float(-lam.real)

    @property
    def hierarchies(self):
        return {s: h for s, (h, _) in self._inner.items() if h is not None}

    def solve_block(self, prob, counter):
        lam = complex(prob.shift)
        _, prec = self._inner[self._mg_shift(lam)]
        b = prob.rhs
        N = self.op.N
        if lam.imag == 0:
            opB = ShiftedOperator.from_base(self.op, lam.real, self.bounds)
            apply = lambda v: apply_shifted(opB, v, counter).real
            precond = lambda v: prec(v, counter)
            xr, tr = pcg_solve(apply, precond, np.ascontiguousarray(b.real), tol=self.inner_tol,
                               maxiter=self.max_inner)
            its = tr.iterations
            x = xr.astype(complex)
            if np.any(b.imag):
                xi, ti = pcg_solve(apply, precond, np.ascontiguousarray(b.imag),
                                   tol=self.inner_tol, maxiter=self.max_inner)
                x = x + 1j * xi
                its += ti.iterations
            prob.solution = x
            prob.iterations = its
            return
        flip = lam.imag < 0
        if flip:
            lam, b = lam.conjugate(), np.conj(b)
        opS = SaddleOperator(self.op, lam)
        rhs = np.concatenate([-b.imag, b.real])
        if self.inner_precond == "mg":
            hier = self._inner[self._mg_shift(lam)][0]
            precond = lambda v: apply_saddle_diag_precond(hier, v, counter)
        else:
            precond = lambda v: np.concatenate([prec(v[:N], counter), prec(v[N:], counter)])
        y, tr = minres_solve(lambda v: apply_saddle(opS, v, counter), precond, rhs,
                             tol=self.inner_tol, maxiter=self.max_inner)
        x = y[:N] - 1j * y[N:]
        prob.solution = np.conj(x) if flip else x
        prob.iterations = tr.iterations


def build_preconditioner(op, spec, counter=None, bounds=None):
    """Instantiate the preconditioner described by ``spec`` (``None`` for kind ``none``)."""
    bounds = bounds or extreme_eigenvalues(op)
    spec.validate_for(op, bounds)
    if spec.kind == "none":
        return None
    if spec.kind == "exact":
        return ExactPreconditioner(op, spec.alpha, spec.workers, bounds)
    if spec.kind in ("nc1", "nc2"):
        return NestedChebyshevPreconditioner(op, spec.alpha, spec.eta, spec.kind,
                                             spec.workers, bounds)
    return SaddlePointPreconditioner(op, spec.alpha, spec.eta, spec.inner_precond,
                                     spec.inner_tol, spec.workers, bounds, counter)


# ------------------------------------------------------------ functional API

def apply_exact_preconditioner_inverse(op, alpha, r):
    """``P_alpha^{-1} r`` with direct block solves (factors are not cached across calls)."""
    return ExactPreconditioner(op, alpha).apply(r)


def apply_nc_preconditioner_inverse(op, alpha, allocation, r, counter=None):
    """``P_NC^{-1} r`` with ``allocation[j]`` Chebyshev iterations on block j."""
    pre = NestedChebyshevPreconditioner(op, alpha, eta=1.0, kind=allocation.kind,
                                        allocation=allocation)
    return pre.apply(r, counter)


def apply_sp_preconditioner_inverse(op, alpha, eta, r, counter=None, inner_precond="mg",
                                    inner_tol=1e-6, preconditioner=None):
    """``P_SP^{-1} r``.  Pass a prebuilt ``preconditioner`` to reuse its hierarchies."""
    pre = preconditioner or SaddlePointPreconditioner(op, alpha, eta, inner_precond,
                                                      inner_tol, counter=counter)
    return pre.apply(r, counter)


# --------------------------------------------------------------- outer solve

def solve_outer(op, spec, b, tol=1e-6, max_outer=5000, counter=None, bounds=None,
                keep_residuals=True):
    """Left-preconditioned Chebyshev semi-iteration on the all-at-once system.

    Foci are ``(1, mu_N^ell/(mu_N^ell - alpha))`` for every preconditioned
    kind and ``(mu_N, mu_1)`` for ``kind="none"``.  Iteration stops when the
    unpreconditioned relative residual ``||b - Ax|| / ||b||`` drops below
    ``tol``; exceeding ``max_outer`` returns a report with ``converged=False``.
    """
    counter = counter if counter is not None else MatvecCounter()
    bounds = bounds or extreme_eigenvalues(op)
    start = counter.snapshot()
    b = np.asarray(b, dtype=float)
    if b.ndim == 1:
        b = b.reshape(op.ell, op.N)
    shape = b.shape
    pre = build_preconditioner(op, spec, counter, bounds)
    if pre is None:
        lo, hi = bounds.mu_min, bounds.mu_max
        precond = None
    else:
        lo, hi = outer_spectral_bounds(bounds, op.ell, spec.alpha)
        precond = lambda r: pre.apply(r.reshape(shape), counter).ravel()
    inner = []
    cb = None
    if pre is not None:
        cb = lambda p, x, r: inner.append(list(pre.last_inner_iterations))
    cfg = ChebyshevConfig(lo=lo, hi=hi, maxiter=max_outer, tol=tol)
    _, trace = chebyshev_solve(lambda x: apply_block_system(op, x.reshape(shape), counter).ravel(),
                               b.ravel(), cfg, counter, callback=cb, precond=precond)
    end = counter.snapshot()
    return SolveReport(
        kind=spec.kind, nx=op.nx, ell=op.ell, alpha=spec.alpha, eta=spec.eta,
        outer_iterations=trace.iterations, converged=trace.converged,
        matvecs=end[0] - start[0], mg_setups=end[1] - start[1], vcycles=end[2] - start[2],
        final_residual=float(trace.final_residual),
        residuals=[float(v) for v in trace.residuals] if keep_residuals else [],
        inner_iterations=inner,
    )
