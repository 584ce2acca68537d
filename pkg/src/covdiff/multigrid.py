"""Geometric multigrid for shifted diffusion operators ``A + s I``.

Each level rediscretises ``(1 + s) I - (nu/h^2) L`` on a uniform grid.
Grids with odd ``nx`` coarsen to ``(nx - 1)/2`` (nested), even ones to
``nx/2`` (non-nested); transfers are tensor-product linear interpolation
between the two uniform grids with restriction ``(h/H)^2 P^T``.  Smoothing
is red-black Gauss-Seidel, red-then-black before the coarse correction and
black-then-red after, so one V-cycle is a symmetric positive definite
operator usable inside CG and MINRES.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .operators import laplacian_2d

__all__ = [
    "MGLevel",
    "MGHierarchy",
    "build_mg_hierarchy",
    "mg_vcycle",
    "apply_saddle_diag_precond",
    "interpolation_1d",
]

COARSEST_NX = 3


def interpolation_1d(nx_fine, nx_coarse):
    """Linear interpolation from a uniform coarse grid to a uniform fine grid.

    Both grids are interior nodes of the unit interval with zero Dirichlet
    values at the ends.
    """
    hf = 1.0 / (nx_fine + 1)
    hc = 1.0 / (nx_coarse + 1)
    rows, cols, vals = [], [], []
    for i in range(nx_fine):
        t = (i + 1) * hf / hc  # position in coarse index units, nodes at 1..nx_coarse
        k = int(np.floor(t + 1e-12))
        w = t - k
        if abs(w) < 1e-12:
            w = 0.0
        # left node k (1-based; 0 is the boundary), right node k+1
        if 1 <= k <= nx_coarse and (1.0 - w) != 0.0:
            rows.append(i)
            cols.append(k - 1)
            vals.append(1.0 - w)
        if 1 <= k + 1 <= nx_coarse and w != 0.0:
            rows.append(i)
            cols.append(k)
            vals.append(w)
    return sp.csr_matrix((vals, (rows, cols)), shape=(nx_fine, nx_coarse))


@dataclass(frozen=True)
class MGLevel:
    nx: int
    scale: float  # nu / h^2 on this level
    shift: float
    interp: sp.csr_matrix | None = field(default=None, repr=False)  # from next coarser level

    @property
    def diag(self):
        return 1.0 + self.shift + 4.0 * self.scale

    @property
    def h(self):
        return 1.0 / (self.nx + 1)

    def apply(self, u):
        """Stencil application on an ``(nx, nx)`` array."""
        out = self.diag * u
        s = self.scale
        out[1:, :] -= s * u[:-1, :]
        out[:-1, :] -= s * u[1:, :]
        out[:, 1:] -= s * u[:, :-1]
        out[:, :-1] -= s * u[:, 1:]
        return out

    def neighbour_sum(self, u):
        out = np.zeros_like(u)
        out[1:, :] += u[:-1, :]
        out[:-1, :] += u[1:, :]
        out[:, 1:] += u[:, :-1]
        out[:, :-1] += u[:, 1:]
        return out

    def min_eigenvalue(self):
        return 1.0 + self.shift + 8.0 * self.scale * np.sin(np.pi / (2 * (self.nx + 1))) ** 2


@dataclass(frozen=True)
class MGHierarchy:
    levels: tuple
    coarse_factor: tuple = field(repr=False)
    shift: float = 0.0
    smoother: str = "rbgs"
    sweeps: int = 1
    jacobi_weight: float = 0.8
    _masks: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def nx(self):
        return self.levels[0].nx

    @property
    def N(self):
        return self.nx * self.nx

    def red_mask(self, nx):
        m = self._masks.get(nx)
        if m is None:
            i, j = np.indices((nx, nx))
            m = (i + j) % 2 == 0
            self._masks[nx] = m
        return m

    def dense_operator(self, level=0):
        lv = self.levels[level]
        n = lv.nx
        return ((1.0 + lv.shift) * np.eye(n * n) - lv.scale * laplacian_2d(n).toarray())


def _coarsen(nx):
    return (nx - 1) // 2 if nx % 2 else nx // 2


def build_mg_hierarchy(op, shift, counter=None, smoother="rbgs", sweeps=1, jacobi_weight=0.8):
    """Build a V-cycle hierarchy for ``A + shift I``.

    Raises ``ValueError`` if any level operator would not be SPD.
    """
    if smoother not in ("rbgs", "jacobi"):
        raise ValueError(f"unknown smoother {smoother!r}")
    shift = float(shift)
    nx = op.nx
    sizes = [nx]
    while sizes[-1] > COARSEST_NX:
        sizes.append(_coarsen(sizes[-1]))
    levels = []
    for k, n in enumerate(sizes):
        h = 1.0 / (n + 1)
        interp = None
        if k + 1 < len(sizes):
            interp = interpolation_1d(n, sizes[k + 1])
        lv = MGLevel(nx=n, scale=op.nu / h ** 2, shift=shift, interp=interp)
        if not lv.min_eigenvalue() > 0:
            raise ValueError(f"A + {shift} I is not positive definite on the {n}x{n} level")
        levels.append(lv)
    coarse = MGHierarchy.dense_operator(MGHierarchy(levels=tuple(levels), coarse_factor=()),
                                        len(levels) - 1)
    factor = sla.cho_factor(coarse)
    if counter is not None:
        counter.add(mg_setups=1)
    return MGHierarchy(levels=tuple(levels), coarse_factor=factor, shift=shift,
                       smoother=smoother, sweeps=sweeps, jacobi_weight=jacobi_weight)


def _smooth(hier, lv, x, f, order):
    if hier.smoother == "jacobi":
        w = hier.jacobi_weight / lv.diag
        for _ in range(hier.sweeps):
            x = x + w * (f - lv.apply(x))
        return x
    red = hier.red_mask(lv.nx)
    colours = (red, ~red) if order == "forward" else (~red, red)
    for _ in range(hier.sweeps):
        for mask in colours:
            upd = (f + lv.scale * lv.neighbour_sum(x)) / lv.diag
            x[mask] = upd[mask]
    return x


def _vcycle(hier, k, f):
    lv = hier.levels[k]
    if k == len(hier.levels) - 1:
        return sla.cho_solve(hier.coarse_factor, f.ravel()).reshape(f.shape)
    x = np.zeros_like(f)
    x = _smooth(hier, lv, x, f, "forward")
    res = f - lv.apply(x)
    P = lv.interp
    H = hier.levels[k + 1].h
    ratio = (lv.h / H) ** 2
    fc = ratio * (P.T @ (P.T @ res).T).T
    ec = _vcycle(hier, k + 1, fc)
    x += (P @ (P @ ec).T).T
    return _smooth(hier, lv, x, f, "backward")


def mg_vcycle(hier, r, counter=None):
    """One V-cycle with zero initial guess: ``z ~ (A + s I)^{-1} r``."""
    r = np.asarray(r, dtype=float)
    if r.shape != (hier.N,):
        raise ValueError(f"expected vector of length {hier.N}, got {r.shape}")
    if counter is not None:
        counter.add(vcycles=1)
    nx = hier.nx
    return _vcycle(hier, 0, r.reshape(nx, nx)).ravel()


def apply_saddle_diag_precond(hier, v, counter=None):
    """Approximate ``diag(Phi + Psi, Phi + Psi)^{-1} v`` with one V-cycle per block."""
    v = np.asarray(v, dtype=float)
    N = hier.N
    if v.shape != (2 * N,):
        raise ValueError(f"expected vector of length {2 * N}, got {v.shape}")
    return np.concatenate([mg_vcycle(hier, v[:N], counter), mg_vcycle(hier, v[N:], counter)])
