"""Dense two-phase primal simplex with Bland's rule.

Reproducible by construction: deterministic pivot order (lowest eligible
variable index enters, ratio ties leave by lowest basis variable index),
no randomization, dense float64 arithmetic.  Sized for the small programs
the constraint builder produces (tens of variables, up to a few thousand
rows); no sparsity machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .lp import EQ, GEQ, LEQ, LinearProgram, LpSolution

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-10


@dataclass(eq=False)
class _Standardized:
    A: np.ndarray          # rows x total columns, all-equality system
    b: np.ndarray          # nonnegative rhs
    c1: np.ndarray         # phase-1 costs (1 on artificials)
    c2: np.ndarray         # phase-2 costs (shifted originals)
    basis: np.ndarray
    n_orig: int            # original variable count
    n_enter: int           # columns eligible to enter (excludes artificials)
    shift: np.ndarray      # x = z + shift


def _standardize(lp: LinearProgram) -> _Standardized:
    n = lp.n_vars
    shift = lp.lower.copy()
    span = lp.upper - lp.lower
    ub_rows = [k for k in range(n) if np.isfinite(span[k])]

    rows = [lp.rows, np.zeros((len(ub_rows), n))]
    A = np.vstack(rows)
    b = np.concatenate([lp.rhs - lp.rows @ shift, span[ub_rows]])
    rels = list(lp.relations) + [LEQ] * len(ub_rows)
    for r, k in enumerate(ub_rows):
        A[lp.n_rows + r, k] = 1.0

    K = A.shape[0]
    neg = b < 0
    A[neg] *= -1.0
    b[neg] = -b[neg]
    flip = {LEQ: GEQ, GEQ: LEQ, EQ: EQ}
    rels = [flip[rel] if neg[r] else rel for r, rel in enumerate(rels)]

    slack_cols = []
    basis = np.full(K, -1, dtype=np.int64)
    col = n
    slack_blocks = []
    for r, rel in enumerate(rels):
        if rel == EQ:
            continue
        v = np.zeros(K)
        v[r] = 1.0 if rel == LEQ else -1.0
        slack_blocks.append(v)
        if rel == LEQ:
            basis[r] = col
        slack_cols.append(col)
        col += 1
    if slack_blocks:
        A = np.hstack([A, np.stack(slack_blocks, axis=1)])
    n_enter = col

    art_blocks = []
    for r in range(K):
        if basis[r] < 0:
            v = np.zeros(K)
            v[r] = 1.0
            art_blocks.append(v)
            basis[r] = col
            col += 1
    if art_blocks:
        A = np.hstack([A, np.stack(art_blocks, axis=1)])

    c1 = np.zeros(col)
    c1[n_enter:] = 1.0
    c2 = np.zeros(col)
    c2[:n] = lp.objective
    return _Standardized(A=A, b=b, c1=c1, c2=c2, basis=basis,
                         n_orig=n, n_enter=n_enter, shift=shift)


def _make_tableau(A, b, costs, basis):
    K, C = A.shape
    T = np.zeros((K + 1, C + 1))
    T[:K, :C] = A
    T[:K, C] = b
    cb = costs[basis]
    T[K, :C] = costs - cb @ A
    T[K, C] = -float(cb @ b)
    return T


def solve(lp: LinearProgram) -> LpSolution:
    """Two-phase simplex; statuses: optimal, infeasible, unbounded.

    Raises RuntimeError on hitting the anti-runaway iteration cap (Bland's
    rule precludes cycling, so the cap only guards against defects).
    """
    std = _standardize(lp)
    K, C = std.A.shape
    max_iter = 10 * (C + K) ** 2

    T = _make_tableau(std.A, std.b, std.c1, std.basis)
    code, it1 = _kernels.simplex_loop(T, std.basis, std.n_enter, max_iter)
    if code == 2:
        raise RuntimeError("iteration limit")
    if np.isnan(T).any():
        return LpSolution(status="infeasible", values=None, objective=np.nan,
                          iterations=it1, primal_infeasibility=np.nan,
                          dual_infeasibility=np.nan,
                          message="numerically singular basis")
    phase1_obj = -T[K, C]
    if phase1_obj > FEAS_TOL:
        return LpSolution(status="infeasible", values=None, objective=np.nan,
                          iterations=it1,
                          primal_infeasibility=float(phase1_obj),
                          dual_infeasibility=np.nan,
                          message=f"phase-1 objective {phase1_obj:.3e}")

    cb = std.c2[std.basis]
    T[K, :C] = std.c2 - cb @ T[:K, :C]
    T[K, C] = -float(cb @ T[:K, C])
    code, it2 = _kernels.simplex_loop(T, std.basis, std.n_enter, max_iter)
    if code == 2:
        raise RuntimeError("iteration limit")
    if code == 1:
        return LpSolution(status="unbounded", values=None, objective=-np.inf,
                          iterations=it1 + it2, primal_infeasibility=0.0,
                          dual_infeasibility=0.0, message="")

    z = np.zeros(C)
    z[std.basis] = T[:K, C]
    x = z[: std.n_orig] + std.shift
    primal = _primal_infeasibility(lp, x)
    dual = max(0.0, -float(T[K, : std.n_enter].min())) if std.n_enter else 0.0
    return LpSolution(
        status="optimal",
        values=x,
        objective=float(lp.objective @ x),
        iterations=it1 + it2,
        primal_infeasibility=primal,
        dual_infeasibility=dual,
        basis=std.basis.copy(),
    )


def _primal_infeasibility(lp: LinearProgram, x: np.ndarray) -> float:
    ax = lp.rows @ x
    worst = 0.0
    for r, rel in enumerate(lp.relations):
        d = ax[r] - lp.rhs[r]
        if rel == EQ:
            worst = max(worst, abs(d))
        elif rel == LEQ:
            worst = max(worst, d)
        else:
            worst = max(worst, -d)
    worst = max(worst, float(np.max(lp.lower - x, initial=0.0)))
    worst = max(worst, float(np.max(x - lp.upper, initial=0.0)))
    return float(worst)


def check_solution(lp: LinearProgram, sol: LpSolution) -> dict:
    """Independent residual report: recompute every constraint violation and,
    when a basis is available, the reduced costs from scratch."""
    if sol.values is None:
        return {"ok": False, "reason": f"no values (status {sol.status})"}
    x = sol.values
    ax = lp.rows @ x
    violated = []
    worst = 0.0
    for r, rel in enumerate(lp.relations):
        d = float(ax[r] - lp.rhs[r])
        v = abs(d) if rel == EQ else (d if rel == LEQ else -d)
        if v > FEAS_TOL:
            violated.append(r)
        worst = max(worst, v)
    for k in range(lp.n_vars):
        if lp.lower[k] - x[k] > FEAS_TOL or x[k] - lp.upper[k] > FEAS_TOL:
            violated.append(("bound", k))
            worst = max(worst, float(max(lp.lower[k] - x[k], x[k] - lp.upper[k])))

    report = {
        "max_primal_violation": worst,
        "violated_rows": violated,
        "objective": float(lp.objective @ x),
        "objective_drift": abs(float(lp.objective @ x) - sol.objective),
    }
    if sol.basis is not None:
        std = _standardize(lp)
        B = std.A[:, sol.basis]
        try:
            y = np.linalg.solve(B.T, std.c2[sol.basis])
            reduced = std.c2 - std.A.T @ y
            report["max_dual_violation"] = max(
                0.0, -float(reduced[: std.n_enter].min()))
            zbas = np.linalg.solve(B, std.b)
            slack_ok = True
            for pos, col in enumerate(sol.basis):
                if col < std.n_enter and abs(reduced[col]) > 1e-7 and zbas[pos] > FEAS_TOL:
                    slack_ok = False
            report["complementary_slackness"] = slack_ok
        except np.linalg.LinAlgError:
            report["max_dual_violation"] = np.nan
            report["complementary_slackness"] = False
    report["ok"] = worst <= FEAS_TOL and not violated and \
        report.get("max_dual_violation", 0.0) <= FEAS_TOL
    return report
