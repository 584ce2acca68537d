"""Closed-form spectral quantities and the inner-iteration budget allocator."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SpectralBounds",
    "RootsOfUnity",
    "IterationAllocation",
    "analytic_eigenvalue",
    "analytic_eigenvalues",
    "analytic_eigenvector",
    "extreme_eigenvalues",
    "scaled_roots_of_unity",
    "outer_spectral_bounds",
    "convergence_factor_bound",
    "predicted_iterations",
    "allocate_inner_iterations",
    "gamma_condition_number",
]

# guards floor() against products such as 10*100*0.3 = 299.99999999999994
_FLOOR_EPS = 1e-9


def _floor(x):
    return int(math.floor(x + _FLOOR_EPS))


@dataclass(frozen=True)
class SpectralBounds:
    mu_min: float
    mu_max: float
    source: str = "analytic"

    def __post_init__(self):
        if not 0 < self.mu_min <= self.mu_max:
            raise ValueError(f"need 0 < mu_min <= mu_max, got {self.mu_min}, {self.mu_max}")


@dataclass(frozen=True)
class RootsOfUnity:
    ell: int
    alpha: float
    values: np.ndarray

    def __getitem__(self, j):
        return self.values[j]

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    @property
    def real_indices(self):
        """Zero-based indices of the two real roots ``+-alpha^(1/ell)``."""
        return 0, self.ell // 2

    def partner(self, j):
        """Zero-based index of the conjugate root of ``values[j]``."""
        return (self.ell - j) % self.ell


@dataclass(frozen=True)
class IterationAllocation:
    counts: tuple
    budget: int
    kind: str = "nc2"

    def __post_init__(self):
        if any(c < 0 for c in self.counts):
            raise ValueError("iteration counts must be non-negative")

    def __getitem__(self, j):
        return self.counts[j]

    def __len__(self):
        return len(self.counts)

    @property
    def total(self):
        return sum(self.counts)


def _sin2(k, nx):
    return math.sin(k * math.pi / (2 * (nx + 1))) ** 2


def analytic_eigenvalue(op, i, j):
    """Eigenvalue ``mu_{i,j}`` of the diffusion operator, 1-based indices."""
    if not (1 <= i <= op.nx and 1 <= j <= op.nx):
        raise IndexError(f"indices must lie in [1, {op.nx}], got ({i}, {j})")
    return 1.0 + 4.0 * op.scale * (_sin2(i, op.nx) + _sin2(j, op.nx))


def analytic_eigenvalues(op):
    """All ``nx^2`` eigenvalues as an ``(nx, nx)`` array indexed ``[i-1, j-1]``."""
    k = np.arange(1, op.nx + 1)
    s = np.sin(k * np.pi / (2 * (op.nx + 1))) ** 2
    return 1.0 + 4.0 * op.scale * (s[:, None] + s[None, :])


def analytic_eigenvector(op, i, j):
    """Normalised eigenvector ``V_i kron V_j`` matching :func:`analytic_eigenvalue`."""
    k = np.arange(1, op.nx + 1)
    c = math.sqrt(2.0 / (op.nx + 1))
    vi = c * np.sin(k * i * np.pi / (op.nx + 1))
    vj = c * np.sin(k * j * np.pi / (op.nx + 1))
    return np.kron(vi, vj)


def extreme_eigenvalues(op):
    """Smallest and largest eigenvalues ``mu_{1,1}`` and ``mu_{nx,nx}``."""
    return SpectralBounds(analytic_eigenvalue(op, 1, 1),
                          analytic_eigenvalue(op, op.nx, op.nx))


def scaled_roots_of_unity(ell, alpha):
    """``lambda_j = alpha^(1/ell) exp(2 pi i (j-1)/ell)``, anticlockwise from the positive real root."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if int(ell) != ell or ell < 2:
        raise ValueError(f"ell must be an integer >= 2, got {ell}")
    ell = int(ell)
    radius = alpha ** (1.0 / ell)
    angles = 2.0 * np.pi * np.arange(ell) / ell
    vals = radius * np.exp(1j * angles)
    # pin the values that must be exactly real so conjugate pairing is exact
    vals[0] = radius
    if ell % 2 == 0:
        vals[ell // 2] = -radius
    for j in range(1, (ell + 1) // 2):
        vals[ell - j] = np.conj(vals[j])
    return RootsOfUnity(ell=ell, alpha=float(alpha), values=vals)


def outer_spectral_bounds(bounds, ell, alpha):
    """Extreme eigenvalues ``(1, mu_N^ell / (mu_N^ell - alpha))`` of the preconditioned system."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    m = bounds.mu_min ** ell
    if alpha >= m:
        raise ValueError(f"alpha={alpha} must be below mu_min^ell={m}")
    return 1.0, m / (m - alpha)


def convergence_factor_bound(bounds, shift):
    """Upper bound ``sigma`` on the asymptotic convergence factor for ``A - shift I``.

    Depends only on ``Re(shift)``: ``kappa = (mu_1 - Re)/(mu_N - Re)`` and
    ``sigma = (sqrt(kappa) - 1)/(sqrt(kappa) + 1)``.
    """
    re = complex(shift).real
    if re >= bounds.mu_min:
        raise ValueError(f"Re(shift)={re} must be below mu_min={bounds.mu_min}")
    kappa = (bounds.mu_max - re) / (bounds.mu_min - re)
    sk = math.sqrt(kappa)
    return (sk - 1.0) / (sk + 1.0)


def predicted_iterations(v_min, v_max, eps):
    """A-priori Chebyshev iteration count ``ceil(p*)`` for an SPD spectrum.

    Returns 1 when ``v_min == v_max``, where the closed form is singular but
    a single step is exact.
    """
    if not 0 < v_min <= v_max:
        raise ValueError("need 0 < v_min <= v_max")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if v_min == v_max:
        return 1
    q = math.sqrt(v_min / v_max)
    num = math.log(1.0 / eps + math.sqrt(1.0 / eps ** 2 - 1.0))
    den = math.log((1.0 + q) / (1.0 - q))
    return int(math.ceil(num / den))


def allocate_inner_iterations(ell, nx, bounds, alpha, eta, kind="nc2", min_iters=1):
    """Split the inner Chebyshev budget ``floor(ell * nx * eta)`` across the blocks.

    ``kind="nc1"`` gives every block ``floor(nx * eta)``.  ``kind="nc2"``
    weights block j by ``ln(sigma_1)/ln(sigma_j)`` so that blocks with a
    slower convergence bound get more iterations.  Every block gets at least
    ``min_iters``.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    budget = _floor(ell * nx * eta)
    if kind == "nc1":
        counts = [max(min_iters, _floor(nx * eta))] * ell
        return IterationAllocation(tuple(counts), budget, kind)
    if kind != "nc2":
        raise ValueError(f"unknown allocation kind {kind!r}")
    roots = scaled_roots_of_unity(ell, alpha)
    sigma = np.array([convergence_factor_bound(bounds, lam) for lam in roots])
    if np.all(sigma == sigma[0]) or sigma[0] == 0.0:
        r = np.ones(ell)
    else:
        with np.errstate(divide="ignore"):
            r = np.log(sigma[0]) / np.log(sigma)
    r = r / r.sum()
    counts = [max(min_iters, _floor(rj * ell * nx * eta)) for rj in r]
    return IterationAllocation(tuple(counts), budget, kind)


def gamma_condition_number(ell, alpha):
    """2-norm condition number of ``U^* Gamma_alpha`` (U unitary, so that of ``Gamma_alpha``)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    e = (ell - 1) / ell
    return max(alpha ** e, alpha ** -e)
