"""Matrix-free operators for the all-at-once diffusion system.

The spatial operator is ``A = I - (nu/h^2) L`` on the unit square with a
Dirichlet 5-point Laplacian ``L``.  Everything else (the block bidiagonal
all-at-once operator, complex-shifted blocks and the real saddle point
reformulation) only ever touches ``A`` through :func:`apply_A`, so a single
:class:`MatvecCounter` sees every product with ``A``.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "MatvecCounter",
    "DiffusionOperator",
    "ShiftedOperator",
    "SaddleOperator",
    "laplacian_2d",
    "build_diffusion_operator",
    "apply_A",
    "apply_block_system",
    "build_rhs",
    "apply_shifted",
    "apply_saddle",
]


class MatvecCounter:
    """Thread-safe tally of products with ``A`` and multigrid work.

    One application of ``A`` to one length-N vector counts 1 regardless of
    whether the vector is real or complex.
    """

    def __init__(self, matvecs=0, mg_setups=0, vcycles=0):
        self.matvecs = matvecs
        self.mg_setups = mg_setups
        self.vcycles = vcycles
        self._lock = threading.Lock()

    def add(self, matvecs=0, mg_setups=0, vcycles=0):
        if matvecs < 0 or mg_setups < 0 or vcycles < 0:
            raise ValueError("counter increments must be non-negative")
        with self._lock:
            self.matvecs += matvecs
            self.mg_setups += mg_setups
            self.vcycles += vcycles

    def merge(self, other: "MatvecCounter"):
        self.add(other.matvecs, other.mg_setups, other.vcycles)
        return self

    def snapshot(self):
        return self.matvecs, self.mg_setups, self.vcycles

    def __eq__(self, other):
        if not isinstance(other, MatvecCounter):
            return NotImplemented
        return self.snapshot() == other.snapshot()

    def __repr__(self):
        return (f"MatvecCounter(matvecs={self.matvecs}, "
                f"mg_setups={self.mg_setups}, vcycles={self.vcycles})")


def _count(counter, n=1):
    if counter is not None:
        counter.add(matvecs=n)


def laplacian_2d(nx):
    """Unscaled Dirichlet 5-point Laplacian on an ``nx`` x ``nx`` grid.

    Returned as CSR with diagonal -4 and off-diagonals +1 (lexicographic
    ordering, x index fastest).
    """
    e = np.ones(nx)
    t = sp.diags([e[:-1], -2.0 * e, e[:-1]], [-1, 0, 1], shape=(nx, nx))
    eye = sp.identity(nx, format="csr")
    return (sp.kron(eye, t) + sp.kron(t, eye)).tocsr()


@dataclass(frozen=True)
class DiffusionOperator:
    """``A = I_N - (nu/h^2) L`` with ``nu = D^2/(2 ell - 4)``, ``h = 1/(nx+1)``."""

    nx: int
    ell: int
    daley_length: float
    nu: float
    h: float
    matrix: sp.csr_matrix = field(repr=False, compare=False)

    @property
    def N(self):
        return self.nx * self.nx

    @property
    def scale(self):
        """Coefficient ``nu/h^2`` multiplying ``-L``."""
        return self.nu / self.h ** 2

    def dense(self):
        return self.matrix.toarray()


def build_diffusion_operator(nx, ell, D=0.2, nu=None):
    """Assemble the diffusion operator.

    Parameters
    ----------
    nx : int
        Interior grid points per direction (``nx >= 2``).
    ell : int
        Number of diffusion steps; even and greater than 2.
    D : float
        Daley lengthscale, sets ``nu = D^2/(2 ell - 4)``.
    nu : float, optional
        Override the diffusion coefficient (``nu=0`` gives ``A = I``).
    """
    if int(nx) != nx or nx < 2:
        raise ValueError(f"nx must be an integer >= 2, got {nx}")
    if int(ell) != ell or ell <= 2 or ell % 2:
        raise ValueError(f"ell must be an even integer > 2, got {ell}")
    nx, ell = int(nx), int(ell)
    if nu is None:
        if D <= 0:
            raise ValueError(f"Daley lengthscale must be positive, got {D}")
        nu = D * D / (2 * ell - 4)
    if nu < 0:
        raise ValueError("nu must be non-negative")
    h = 1.0 / (nx + 1)
    N = nx * nx
    A = sp.identity(N, format="csr") - (nu / h ** 2) * laplacian_2d(nx)
    A = A.tocsr()
    A.eliminate_zeros()
    A.sort_indices()
    return DiffusionOperator(nx=nx, ell=ell, daley_length=float(D), nu=float(nu),
                             h=h, matrix=A)


def apply_A(op, v, counter=None):
    """Return ``A v`` for a real or complex length-N vector."""
    v = np.asarray(v)
    if v.shape != (op.N,):
        raise ValueError(f"expected vector of length {op.N}, got shape {v.shape}")
    _count(counter)
    if np.iscomplexobj(v):
        # two real products beat both the complex upcast and the (N, 2) multivector path
        return op.matrix @ v.real + 1j * (op.matrix @ v.imag)
    return op.matrix @ v


def _as_blocks(op, x):
    x = np.asarray(x)
    if x.ndim == 1:
        if x.size != op.ell * op.N:
            raise ValueError(f"expected {op.ell} blocks of length {op.N}")
        x = x.reshape(op.ell, op.N)
    if x.shape != (op.ell, op.N):
        raise ValueError(f"expected block array of shape {(op.ell, op.N)}, got {x.shape}")
    return x


def apply_block_system(op, x, counter=None):
    """Apply the all-at-once operator to an ``(ell, N)`` block array.

    Block 1 is ``A x_1``; block j is ``A x_j - x_{j-1}``.  Costs ``ell``
    matvecs.
    """
    x = _as_blocks(op, x)
    out = np.empty_like(x, dtype=np.result_type(x, np.float64))
    for j in range(op.ell):
        out[j] = apply_A(op, x[j], counter)
    out[1:] -= x[:-1]
    return out


def build_rhs(N, ell, seed=0):
    """Right-hand side with ``b_1 ~ N(0, I)`` and zero remaining blocks.

    Draws use :func:`numpy.random.default_rng` (PCG64) seeded with ``seed``.
    """
    rng = np.random.default_rng(seed)
    b = np.zeros((ell, N))
    b[0] = rng.standard_normal(N)
    return b


@dataclass(frozen=True)
class ShiftedOperator:
    """``B = A - shift * I`` for a complex shift."""

    base: DiffusionOperator
    shift: complex
    mu_min: float
    mu_max: float

    @property
    def N(self):
        return self.base.N

    @property
    def segment(self):
        """Endpoints ``(mu_N - shift, mu_1 - shift)`` of the eigenvalue segment."""
        return self.mu_min - self.shift, self.mu_max - self.shift

    def dense(self):
        return self.base.dense() - self.shift * np.eye(self.N)

    @classmethod
    def from_base(cls, base, shift, bounds=None):
        if bounds is None:
            from .spectral import extreme_eigenvalues
            bounds = extreme_eigenvalues(base)
        return cls(base=base, shift=complex(shift), mu_min=bounds.mu_min,
                   mu_max=bounds.mu_max)


def apply_shifted(opB, v, counter=None):
    """Return ``A v - shift * v``; one matvec."""
    v = np.asarray(v)
    return apply_A(opB.base, v, counter) - opB.shift * v


@dataclass(frozen=True)
class SaddleOperator:
    """Real 2N x 2N operator ``[[Phi, Psi], [Psi, -Phi]]``.

    ``Phi = Im(shift) I`` and ``Psi = A - Re(shift) I``.  Only shifts with a
    positive imaginary part are accepted; callers conjugate otherwise.
    """

    base: DiffusionOperator
    shift: complex

    def __post_init__(self):
        if not self.shift.imag > 0:
            raise ValueError("saddle reformulation needs Im(shift) > 0; "
                             "solve the conjugate system instead")
        from .spectral import extreme_eigenvalues
        if not extreme_eigenvalues(self.base).mu_min > self.shift.real:
            raise ValueError("A - Re(shift) I is not positive definite")

    @property
    def phi(self):
        return self.shift.imag

    @property
    def psi_shift(self):
        return self.shift.real

    @property
    def N(self):
        return self.base.N

    def dense(self):
        A = self.base.dense()
        eye = np.eye(self.N)
        Phi = self.phi * eye
        Psi = A - self.psi_shift * eye
        return np.block([[Phi, Psi], [Psi, -Phi]])


def apply_saddle(opS, v, counter=None):
    """Apply the saddle operator to ``v = (u, w)``; two matvecs."""
    v = np.asarray(v)
    N = opS.N
    if v.shape != (2 * N,):
        raise ValueError(f"expected vector of length {2 * N}, got {v.shape}")
    u, w = v[:N], v[N:]
    psi_u = apply_A(opS.base, u, counter) - opS.psi_shift * u
    psi_w = apply_A(opS.base, w, counter) - opS.psi_shift * w
    return np.concatenate([opS.phi * u + psi_w, psi_u - opS.phi * w])
