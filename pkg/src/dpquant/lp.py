"""Dense standard-form linear program containers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

VarName = tuple  # (family, row n, index i), all 1-based

LEQ = "<="
EQ = "="
GEQ = ">="


@dataclass(frozen=True, eq=False)
class ProbBounds:
    """Entrywise lower/upper bounds on the selection probabilities.

    Dense lower-triangular (m-1, m-1) tables; entry [n-1, i-1] bounds the
    probability of choice i in an n-choice row, 0 < lower <= upper <= 1.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=np.float64)
        up = np.array(self.upper, dtype=np.float64)
        lo.setflags(write=False)
        up.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        if lo.shape != up.shape or lo.ndim != 2 or lo.shape[0] != lo.shape[1]:
            raise ValueError("bound tables must be square and same-shape")
        n = lo.shape[0]
        tri = np.tril_indices(n)
        if np.any(lo[tri] <= 0) or np.any(up[tri] > 1) or np.any(lo[tri] > up[tri]):
            raise ValueError("need 0 < lower <= upper <= 1 on the triangle")

    @property
    def n_rows(self) -> int:
        return self.lower.shape[0]

    @classmethod
    def from_scalars(cls, m: int, lo: float, hi: float) -> "ProbBounds":
        """Constant bounds on every entry; the single-choice row is pinned to
        admit its forced probability 1."""
        n = m - 1
        lower = np.tril(np.full((n, n), lo))
        upper = np.tril(np.full((n, n), hi))
        upper[0, 0] = 1.0
        lower[0, 0] = min(lo, 1.0)
        return cls(lower=lower, upper=upper)

    @classmethod
    def anchors(cls, m: int, s: int, t: int, u_diag: float, o_limit: float,
                o_edge: float, filler_lo: float = 1e-12) -> "ProbBounds":
        """Bounds that matter only at the entries the reduced constraint
        family reads: upper at (s-1, s-1), lower at (t-1, 1) and (t, 1),
        plus their mirror-image entries (identical for symmetric layouts).
        Everything else is left vacuous (lower ~ 0, upper = 1)."""
        n = m - 1
        lower = np.tril(np.full((n, n), filler_lo))
        upper = np.tril(np.ones((n, n)))
        upper[s - 2, s - 2] = u_diag
        lower[t - 2, 0] = o_limit
        lower[t - 1, 0] = o_edge
        upper[m - t - 1, m - t - 1] = u_diag
        lower[m - s - 1, 0] = o_limit
        lower[m - s, 0] = o_edge
        return cls(lower=lower, upper=upper)


@dataclass(eq=False)
class LinearProgram:
    """min objective . x  subject to  rows x (rel) rhs,  lower <= x <= upper."""

    var_names: list
    objective: np.ndarray
    rows: np.ndarray
    relations: list
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=np.float64)
        self.rows = np.asarray(self.rows, dtype=np.float64).reshape(len(self.relations), -1)
        self.rhs = np.asarray(self.rhs, dtype=np.float64)
        self.lower = np.asarray(self.lower, dtype=np.float64)
        self.upper = np.asarray(self.upper, dtype=np.float64)
        n = len(self.var_names)
        if self.objective.shape != (n,):
            raise ValueError("objective length must match variable count")
        if self.rows.shape[1] != n or self.rhs.shape[0] != self.rows.shape[0]:
            raise ValueError("constraint matrix shape mismatch")
        if not np.all(np.isfinite(self.rhs)) or not np.all(np.isfinite(self.rows)):
            raise ValueError("constraints must be finite")
        for rel in self.relations:
            if rel not in (LEQ, EQ, GEQ):
                raise ValueError(f"bad relation {rel!r}")

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    def to_text(self) -> str:
        """Deterministic plain-text listing (debugging, golden tests)."""
        out = ["vars:"]
        for k, name in enumerate(self.var_names):
            fam, n, i = name
            out.append(f"  x{k} = q^{fam}_{n}({i})  in [{self.lower[k]!r}, {self.upper[k]!r}]")
        out.append("minimize:")
        terms = [f"{self.objective[k]!r}*x{k}" for k in range(self.n_vars)
                 if self.objective[k] != 0.0]
        out.append("  " + (" + ".join(terms) if terms else "0"))
        out.append("subject to:")
        for r in range(self.n_rows):
            terms = [f"{self.rows[r, k]!r}*x{k}" for k in range(self.n_vars)
                     if self.rows[r, k] != 0.0]
            lhs = " + ".join(terms) if terms else "0"
            out.append(f"  {lhs} {self.relations[r]} {self.rhs[r]!r}")
        return "\n".join(out) + "\n"

    def to_lp_format(self) -> str:
        """CPLEX-LP style text for cross-checking with external solvers."""
        def term(c, k):
            sign = "+" if c >= 0 else "-"
            return f"{sign} {abs(c)!r} x{k}"

        lines = ["Minimize", " obj: " + " ".join(
            term(self.objective[k], k) for k in range(self.n_vars))]
        lines.append("Subject To")
        relmap = {LEQ: "<=", GEQ: ">=", EQ: "="}
        for r in range(self.n_rows):
            body = " ".join(term(self.rows[r, k], k) for k in range(self.n_vars)
                            if self.rows[r, k] != 0.0)
            lines.append(f" c{r}: {body} {relmap[self.relations[r]]} {self.rhs[r]!r}")
        lines.append("Bounds")
        for k in range(self.n_vars):
            lines.append(f" {self.lower[k]!r} <= x{k} <= {self.upper[k]!r}")
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass(eq=False)
class LpSolution:
    status: str  # optimal | infeasible | unbounded
    values: Optional[np.ndarray]
    objective: float
    iterations: int
    primal_infeasibility: float
    dual_infeasibility: float
    basis: Optional[np.ndarray] = None
    message: str = ""

    def to_json_dict(self) -> dict:
        return {
            "status": self.status,
            "values": None if self.values is None else [float(v) for v in self.values],
            "objective": float(self.objective),
            "iterations": int(self.iterations),
            "primal_infeasibility": float(self.primal_infeasibility),
            "dual_infeasibility": float(self.dual_infeasibility),
            "message": self.message,
        }
