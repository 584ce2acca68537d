"""Benchmark harness: configurations, report rows and the table sweeps."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .circulant import PreconditionerSpec, SaddlePointPreconditioner, solve_outer
from .operators import (MatvecCounter, SaddleOperator, ShiftedOperator, apply_saddle,
                        apply_shifted, build_diffusion_operator, build_rhs)
from .solvers import ChebyshevConfig, chebyshev_solve, minres_solve, pcg_solve
from .spectral import (convergence_factor_bound, extreme_eigenvalues, gamma_condition_number,
                       scaled_roots_of_unity)

__all__ = [
    "ExperimentConfig",
    "ReportRow",
    "REFERENCE_TABLES",
    "TABLE_IDS",
    "run_solve",
    "run_table",
    "run_sweep_alpha",
    "run_trace",
    "run_inner_table",
    "rows_to_csv",
    "rows_to_json",
]

TOLERANCES = tuple(10.0 ** -k for k in range(10, 0, -1))
ROOT_LABELS = ("1", "l2", "l3", "-conj(l3)", "-conj(l2)", "-1", "-l2", "-l3", "conj(l3)", "conj(l2)")


@dataclass(frozen=True)
class ExperimentConfig:
    nx: int = 100
    ell: int = 10
    D: float = 0.2
    alpha: float | None = None
    eta: float | None = None
    precond: str = "none"
    tol: float = 1e-6
    max_outer: int = 5000
    seed: int = 0
    inner_precond: str = "mg"
    amg_matvec_equiv: float = 80.0
    threads: int = 1

    def spec(self):
        return PreconditionerSpec(kind=self.precond, alpha=self.alpha, eta=self.eta,
                                  inner_precond=self.inner_precond, workers=self.threads)

    def validate(self):
        """Raise ``ValueError`` on any invalid setting, including ``alpha >= mu_N^ell``."""
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")
        if self.amg_matvec_equiv < 0:
            raise ValueError("amg_matvec_equiv must be non-negative")
        op = build_diffusion_operator(self.nx, self.ell, self.D)
        self.spec().validate_for(op)
        return op


@dataclass
class ReportRow:
    nx: int
    ell: int
    alpha: float | None
    eta: float | None
    precond: str
    tol: float
    seed: int
    inner_precond: str
    outer_iterations: int
    converged: bool
    matvecs: int
    mg_setups: int
    vcycles: int
    amg_per_iteration_count: int
    equivalent_matvecs: float
    final_residual: float
    residuals: list = field(default_factory=list)

    def as_dict(self, with_trace=False):
        d = asdict(self)
        if not with_trace:
            d.pop("residuals")
        return d


def run_solve(cfg, keep_residuals=False):
    """One end-to-end solve; returns a :class:`ReportRow`."""
    op = cfg.validate()
    b = build_rhs(op.N, op.ell, cfg.seed)
    rep = solve_outer(op, cfg.spec(), b, tol=cfg.tol, max_outer=cfg.max_outer,
                      counter=MatvecCounter(), keep_residuals=True)
    return ReportRow(
        nx=cfg.nx, ell=cfg.ell, alpha=cfg.alpha, eta=cfg.eta, precond=cfg.precond, tol=cfg.tol,
        seed=cfg.seed, inner_precond=cfg.inner_precond,
        outer_iterations=rep.outer_iterations, converged=rep.converged, matvecs=rep.matvecs,
        mg_setups=rep.mg_setups, vcycles=rep.vcycles, amg_per_iteration_count=rep.amg_per_iteration_count,
        equivalent_matvecs=rep.equivalent_matvecs(cfg.amg_matvec_equiv),
        final_residual=rep.final_residual,
        residuals=rep.residuals if keep_residuals else [],
    )


# ------------------------------------------------------------------ reference data
# (outer iterations, matvecs) keyed by (alpha, kind, row, eta); SP rows also
# carry the number of AMG initialisations.

def _nc_grid(rows, a1, a001):
    out = {}
    for alpha, block in ((1.0, a1), (0.01, a001)):
        for row, cells in zip(rows, block):
            for k, eta in enumerate((0.1, 0.2, 0.3)):
                out[(alpha, "nc1", row, eta)] = cells[k]
                out[(alpha, "nc2", row, eta)] = cells[k + 3]
    return out


_T3 = _nc_grid(
    (50, 100, 200, 300, 400, 500),
    [[(164, 9840), (62, 6820), (35, 5600), (70, 3710), (20, 2040), (12, 1848)],
     [(140, 15400), (56, 11760), (33, 10230), (47, 4794), (16, 3248), (11, 3355)],
     [(113, 23730), (51, 20910), (28, 17080), (37, 7511), (15, 6075), (10, 6040)],
     [(103, 31930), (46, 28060), (27, 24570), (34, 10370), (14, 8456), (10, 9050)],
     [(92, 37720), (44, 35640), (26, 31460), (31, 12555), (13, 10452), (10, 12050)],
     [(87, 44370), (40, 40400), (25, 37750), (30, 15150), (12, 12060), (10, 15040)]],
    [[(38, 2280), (13, 1430), (7, 1120), (27, 1512), (10, 1050), (7, 1085)],
     [(33, 3630), (12, 2520), (7, 2170), (21, 2205), (8, 1640), (6, 1824)],
     [(31, 6510), (11, 4510), (6, 3660), (19, 3895), (8, 3240), (6, 3636)],
     [(30, 9300), (10, 6100), (6, 5460), (18, 5472), (7, 4242), (5, 4520)],
     [(29, 11890), (10, 8100), (6, 7260), (18, 7290), (7, 5628), (5, 6030)],
     [(28, 14280), (10, 10100), (6, 9060), (17, 8602), (7, 7035), (4, 6020)]],
)

_T4 = _nc_grid(
    (6, 10, 16, 20, 30, 40, 50),
    [[(118, 7788), (50, 6300), (28, 5208), (58, 3596), (18, 2214), (11, 2002)],
     [(135, 14850), (57, 11970), (33, 10230), (48, 4896), (17, 3451), (11, 3355)],
     [(152, 26752), (61, 20496), (35, 17360), (35, 5915), (14, 4592), (11, 5379)],
     [(163, 35860), (64, 26880), (35, 21700), (31, 6603), (14, 5768), (11, 6721)],
     [(168, 55440), (65, 40950), (37, 34410), (26, 8320), (13, 8034), (11, 10120)],
     [(176, 77440), (66, 55440), (37, 45880), (27, 11313), (12, 9852), (11, 13387)],
     [(185, 101750), (71, 74550), (39, 60450), (24, 12576), (12, 12300), (11, 16786)]],
    [[(41, 2706), (13, 1638), (8, 1488), (32, 1984), (10, 1230), (6, 1104)],
     [(34, 3740), (12, 2520), (7, 2170), (21, 2205), (8, 1640), (6, 1824)],
     [(31, 5456), (11, 3696), (7, 3472), (17, 2856), (8, 2640), (5, 2445)],
     [(30, 6600), (11, 4620), (7, 4340), (15, 3135), (8, 3272), (4, 2440)],
     [(29, 9570), (10, 6300), (6, 5580), (18, 5706), (6, 3690), (4, 3664)],
     [(28, 12320), (10, 8400), (6, 7440), (20, 8420), (6, 4938), (4, 4884)],
     [(28, 15400), (10, 10500), (7, 10850), (20, 10500), (6, 6144), (4, 6112)]],
)

_T2 = [  # rows: tolerance 1e-10 ... 1e-1; columns: roots j = 1..10
    [760, 274, 184, 147, 128, 118, 128, 147, 184, 274],
    [683, 248, 167, 133, 115, 107, 115, 133, 167, 248],
    [611, 222, 150, 119, 103, 95, 103, 119, 150, 222],
    [535, 196, 132, 105, 90, 84, 90, 105, 132, 196],
    [463, 170, 114, 90, 78, 72, 78, 90, 114, 170],
    [388, 143, 97, 76, 65, 61, 65, 76, 97, 143],
    [314, 116, 79, 62, 53, 49, 53, 62, 79, 116],
    [240, 89, 60, 47, 40, 38, 40, 47, 60, 89],
    [166, 62, 42, 33, 28, 26, 28, 33, 42, 62],
    [93, 34, 23, 18, 15, 15, 15, 18, 23, 34],
]

_T5 = [
    [7, 28, 28, 28, 24, 6, 24, 28, 28, 28],
    [6, 26, 26, 24, 22, 5, 22, 24, 26, 26],
    [6, 24, 22, 22, 18, 5, 18, 22, 22, 24],
    [5, 20, 20, 20, 16, 4, 16, 20, 20, 20],
    [5, 18, 18, 18, 14, 4, 14, 18, 18, 18],
    [4, 16, 16, 14, 12, 3, 12, 14, 16, 16],
    [3, 12, 12, 12, 10, 3, 10, 12, 12, 12],
    [3, 10, 10, 10, 8, 2, 8, 10, 10, 10],
    [2, 8, 6, 6, 6, 2, 6, 6, 6, 8],
    [2, 5, 4, 4, 4, 1, 4, 4, 4, 5],
]

# (outer, AMG initialisations, matvecs)
_T6 = {
    (1.0, 50): (9, 90, 1602), (0.01, 50): (3, 30, 534),
    (1.0, 100): (9, 90, 2394), (0.01, 100): (2, 20, 508),
    (1.0, 200): (8, 80, 2128), (0.01, 200): (2, 20, 516),
    (1.0, 300): (8, 80, 2147), (0.01, 300): (2, 20, 500),
    (1.0, 400): (8, 80, 2172), (0.01, 400): (2, 20, 516),
    (1.0, 500): (7, 70, 1862), (0.01, 500): (2, 20, 508),
}
_T7 = {
    (1.0, 6): (8, 48, 1136), (0.01, 6): (2, 12, 252),
    (1.0, 10): (9, 90, 2398), (0.01, 10): (2, 20, 508),
    (1.0, 16): (9, 144, 4032), (0.01, 16): (2, 32, 896),
    (1.0, 20): (10, 200, 5800), (0.01, 20): (2, 40, 1144),
    (1.0, 30): (10, 300, 8876), (0.01, 30): (2, 60, 1756),
    (1.0, 40): (10, 400, 11924), (0.01, 40): (2, 80, 2376),
    (1.0, 50): (11, 550, 16607), (0.01, 50): (3, 150, 4467),
}
# nx -> ((nc2 outer, nc2 matvecs), (sp outer, sp AMG, sp matvecs))
_T8 = {
    500: ((7, 7035), (2, 20, 532)),
    750: ((7, 10535), (2, 20, 516)),
    1000: ((7, 14056), (2, 20, 516)),
    1250: ((7, 17535), (2, 20, 532)),
    1500: ((6, 18030), (2, 20, 516)),
}

REFERENCE_TABLES = {2: _T2, 3: _T3, 4: _T4, 5: _T5, 6: _T6, 7: _T7, 8: _T8}
TABLE_IDS = tuple(sorted(REFERENCE_TABLES))

# desk-scale defaults; ``full=True`` runs the full sweep
_DEFAULT_ROWS = {3: (100,), 4: (10,), 6: (100,), 7: (10,), 8: (500,)}
_FULL_ROWS = {3: (50, 100, 200, 300, 400, 500), 4: (6, 10, 16, 20, 30, 40, 50),
              6: (50, 100, 200, 300, 400, 500), 7: (6, 10, 16, 20, 30, 40, 50),
              8: (500, 750, 1000, 1250, 1500)}


# ------------------------------------------------------------ inner tables

def _first_below(residuals, tol):
    for p, r in enumerate(residuals):
        if r < tol:
            return p
    return None


def run_inner_table(nx=100, ell=10, alpha=1.0, method="ci", seed=0, inner_precond="mg",
                    tolerances=TOLERANCES, maxiter=5000):
    """Iterations for each root's block solve to reach each tolerance.

    ``method="ci"`` runs Chebyshev on ``A - lambda_j I`` (inner CI table layout);
    ``method="sp"`` runs multigrid-preconditioned PCG on the real roots and
    MINRES on the saddle point form of the complex ones (saddle-point inner table layout).
    The right-hand side is a real standard normal vector.  Returns
    ``counts[t][j]`` for tolerance index ``t`` and root ``j``.
    """
    op = build_diffusion_operator(nx, ell)
    bounds = extreme_eigenvalues(op)
    roots = scaled_roots_of_unity(ell, alpha)
    b = np.random.default_rng(seed).standard_normal(op.N)
    tmin = min(tolerances)
    cols = []
    sp_pre = None
    if method == "sp":
        sp_pre = SaddlePointPreconditioner(op, alpha, eta=1.0, inner_precond=inner_precond)
    for lam in roots.values:
        lam = complex(lam)
        if method == "ci":
            opB = ShiftedOperator.from_base(op, lam, bounds)
            lo, hi = opB.segment
            _, tr = chebyshev_solve(lambda v: apply_shifted(opB, v), b,
                                    ChebyshevConfig(lo=lo, hi=hi, maxiter=maxiter, tol=tmin))
        elif method == "sp":
            key = sp_pre._mg_shift(lam)
            hier, prec = sp_pre._inner[key]
            if lam.imag == 0:
                opB = ShiftedOperator.from_base(op, lam.real, bounds)
                _, tr = pcg_solve(lambda v: apply_shifted(opB, v).real, lambda v: prec(v, None),
                                  b, tol=tmin, maxiter=maxiter)
            else:
                opS = SaddleOperator(op, complex(lam.real, abs(lam.imag)))
                rhs = np.concatenate([np.zeros(op.N), b])
                N = op.N
                _, tr = minres_solve(lambda v: apply_saddle(opS, v),
                                     lambda v: np.concatenate([prec(v[:N], None), prec(v[N:], None)]),
                                     rhs, tol=tmin, maxiter=maxiter)
        else:
            raise ValueError(f"unknown method {method!r}")
        cols.append([_first_below(tr.residuals, t) for t in tolerances])
    return [[cols[j][t] for j in range(ell)] for t in range(len(tolerances))]


# ------------------------------------------------------------------ tables

def _nc_rows(table_id, alphas, etas, rows, kinds, base):
    out = []
    for alpha in alphas:
        for row in rows:
            for kind in kinds:
                for eta in etas:
                    if table_id == 3:
                        cfg = replace(base, nx=row, ell=10, alpha=alpha, eta=eta, precond=kind)
                    else:
                        cfg = replace(base, nx=100, ell=row, alpha=alpha, eta=eta, precond=kind)
                    rr = run_solve(cfg)
                    p = REFERENCE_TABLES[table_id].get((alpha, kind, row, eta))
                    out.append({
                        "table": table_id, "alpha": alpha, "nx": cfg.nx, "ell": cfg.ell,
                        "eta": eta, "precond": kind, "outer": rr.outer_iterations,
                        "matvecs": rr.matvecs, "converged": rr.converged,
                        "ref_outer": p[0] if p else "", "ref_matvecs": p[1] if p else "",
                    })
    return out


def _sp_rows(table_id, alphas, rows, base):
    out = []
    for alpha in alphas:
        for row in rows:
            if table_id == 6:
                cfg = replace(base, nx=row, ell=10, alpha=alpha, eta=0.2, precond="sp")
            else:
                cfg = replace(base, nx=100, ell=row, alpha=alpha, eta=0.2, precond="sp")
            rr = run_solve(cfg)
            p = REFERENCE_TABLES[table_id].get((alpha, row))
            out.append({
                "table": table_id, "alpha": alpha, "nx": cfg.nx, "ell": cfg.ell, "eta": 0.2,
                "precond": "sp", "outer": rr.outer_iterations, "matvecs": rr.matvecs,
                "mg_setups": rr.mg_setups, "amg_per_iteration_count": rr.amg_per_iteration_count,
                "equivalent_matvecs": rr.equivalent_matvecs, "converged": rr.converged,
                "ref_outer": p[0] if p else "", "ref_amg": p[1] if p else "",
                "ref_matvecs": p[2] if p else "",
            })
    return out


def run_table(table_id, base=None, full=False, alphas=None, etas=None, rows=None):
    """Reproduce one of the reference tables; returns a list of flat dict rows.

    Without ``full`` only the anchor rows (``nx=100`` or ``ell=10``) run.
    """
    if table_id not in REFERENCE_TABLES:
        raise ValueError(f"unknown table id {table_id}; choose from {TABLE_IDS}")
    base = base or ExperimentConfig()
    if table_id in (2, 5):
        method = "ci" if table_id == 2 else "sp"
        counts = run_inner_table(nx=base.nx, ell=base.ell, alpha=1.0, method=method,
                                 seed=base.seed, inner_precond=base.inner_precond)
        ref = REFERENCE_TABLES[table_id] if (base.nx, base.ell) == (100, 10) else None
        labels = ROOT_LABELS if base.ell == 10 else tuple(f"root{j + 1}" for j in range(base.ell))
        out = []
        for t, tol in enumerate(TOLERANCES):
            for j, lab in enumerate(labels):
                out.append({"table": table_id, "tol": f"{tol:.0e}", "root": lab,
                            "iterations": counts[t][j] if counts[t][j] is not None else "",
                            "reference": ref[t][j] if ref else ""})
        return out
    alphas = alphas or (1.0, 0.01)
    rows = rows or (_FULL_ROWS if full else _DEFAULT_ROWS)[table_id]
    if table_id in (3, 4):
        return _nc_rows(table_id, alphas, etas or (0.1, 0.2, 0.3), rows, ("nc1", "nc2"), base)
    if table_id in (6, 7):
        return _sp_rows(table_id, alphas, rows, base)
    out = []
    for nx in rows:
        p = _T8.get(nx)
        for kind in ("nc2", "sp"):
            rr = run_solve(replace(base, nx=nx, ell=10, alpha=0.01, eta=0.2, precond=kind))
            out.append({
                "table": 8, "nx": nx, "precond": kind, "outer": rr.outer_iterations,
                "matvecs": rr.matvecs, "mg_setups": rr.mg_setups,
                "amg_per_iteration_count": rr.amg_per_iteration_count, "converged": rr.converged,
                "ref_outer": (p[0][0] if kind == "nc2" else p[1][0]) if p else "",
                "ref_amg": (p[1][1] if kind == "sp" else "") if p else "",
                "ref_matvecs": (p[0][1] if kind == "nc2" else p[1][2]) if p else "",
            })
    return out


def run_sweep_alpha(base, alphas, kinds=None):
    """Outer iterations against alpha, with the condition number of ``U^* Gamma_alpha``."""
    kinds = kinds or (base.precond,)
    out = []
    for alpha in alphas:
        for kind in kinds:
            rr = run_solve(replace(base, alpha=alpha, precond=kind))
            out.append({"alpha": alpha, "precond": kind, "eta": base.eta,
                        "outer": rr.outer_iterations, "matvecs": rr.matvecs,
                        "converged": rr.converged,
                        "gamma_cond": gamma_condition_number(base.ell, alpha)})
    return out


def run_trace(cfg, inner_root=None):
    """Per-iteration residual trace.

    With ``inner_root`` (1-based) the trace is that of CI on the single block
    ``A - lambda_j I`` together with the bound ``r_0 sigma_j^p``.
    """
    if inner_root is None:
        rr = run_solve(cfg, keep_residuals=True)
        n = len(rr.residuals)
        per = rr.matvecs / max(1, n - 1)
        eq_per = rr.equivalent_matvecs / max(1, n - 1)
        return [{"iteration": p, "residual": r, "matvecs": round(p * per),
                 "equivalent_matvecs": round(p * eq_per)} for p, r in enumerate(rr.residuals)]
    op = build_diffusion_operator(cfg.nx, cfg.ell, cfg.D)
    bounds = extreme_eigenvalues(op)
    lam = complex(scaled_roots_of_unity(cfg.ell, cfg.alpha)[inner_root - 1])
    opB = ShiftedOperator.from_base(op, lam, bounds)
    b = np.random.default_rng(cfg.seed).standard_normal(op.N)
    lo, hi = opB.segment
    _, tr = chebyshev_solve(lambda v: apply_shifted(opB, v), b,
                            ChebyshevConfig(lo=lo, hi=hi, maxiter=cfg.max_outer, tol=cfg.tol))
    sigma = convergence_factor_bound(bounds, lam)
    return [{"iteration": p, "residual": r, "matvecs": p, "bound": sigma ** p}
            for p, r in enumerate(tr.residuals)]


def _fmt(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return v


def rows_to_csv(rows):
    """Deterministic CSV text: header from the union of keys in first-seen order."""
    keys = []
    for r in rows:
        for k in r:
            if k not in keys:
                keys.append(k)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r.get(k, "")) for k in keys})
    return buf.getvalue()


def rows_to_json(rows):
    return json.dumps(rows, indent=2, sort_keys=False, default=str) + "\n"
