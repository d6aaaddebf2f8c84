"""Assemble the selection-distribution linear program.

Decision variables are the selection probabilities themselves: one family
``q(n, i)`` for symmetric layouts, or separate left/right families for
general (possibly asymmetric-bin, non-uniform-input) mode.

Two pieces make the privacy constraint linear:

* the extrema of the piecewise-affine output probability p(., i) live in a
  finite candidate set (diagonal probabilities, edge values, one-sided
  limits at bins), provided the tables are suitably monotone;
* each candidate, a product of one probability and a linear combination of
  the other family's row, is linearized by freezing the product's lone
  factor at a hyperparameter bound: upper bounds use ``upper[n, i]``, lower
  bounds use ``lower[n, i]``.

Every upper candidate <= e^eps * every lower candidate then implies the
exact privacy ratio constraint; the optimizer grid-searches over the bound
tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BinLayout, DomainError, InputDistribution, interval_index0
from .lp import EQ, GEQ, LEQ, LinearProgram, ProbBounds

FULL = "full"
REDUCED = "reduced"
SYMMETRIC = "symmetric"
GENERAL = "general"


class InfeasibleBounds(ValueError):
    """Bound tables that cannot admit any probability row."""


@dataclass(eq=False)
class VarMap:
    """Index of LP variables q^family_n(i), 1-based (family, n, i) keys.

    In symmetric mode the right family aliases the left one.
    """

    m: int
    mode: str

    def __post_init__(self):
        fams = ("l",) if self.mode == SYMMETRIC else ("l", "r")
        self.names = [
            (fam, n, i)
            for fam in fams
            for n in range(1, self.m)
            for i in range(1, n + 1)
        ]
        self._index = {name: k for k, name in enumerate(self.names)}

    def idx(self, fam: str, n: int, i: int) -> int:
        if self.mode == SYMMETRIC:
            fam = "l"
        return self._index[(fam, n, i)]

    @property
    def n_vars(self) -> int:
        return len(self.names)


class LinForm:
    """Sparse linear form over LP variables plus a constant."""

    __slots__ = ("coeffs", "const")

    def __init__(self, const: float = 0.0):
        self.coeffs: dict[int, float] = {}
        self.const = const

    def add(self, idx: int, coeff: float) -> "LinForm":
        if coeff != 0.0:
            self.coeffs[idx] = self.coeffs.get(idx, 0.0) + coeff
        return self

    def scaled(self, factor: float) -> "LinForm":
        out = LinForm(self.const * factor)
        for k, v in self.coeffs.items():
            out.coeffs[k] = v * factor
        return out

    def minus(self, other: "LinForm") -> "LinForm":
        out = LinForm(self.const - other.const)
        out.coeffs = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out.coeffs[k] = out.coeffs.get(k, 0.0) - v
        return out

    def dense(self, n_vars: int) -> np.ndarray:
        v = np.zeros(n_vars)
        for k, c in self.coeffs.items():
            v[k] = c
        return v

    def value(self, x: np.ndarray) -> float:
        return self.const + sum(c * x[k] for k, c in self.coeffs.items())


def var_form(vm: VarMap, fam: str, n: int, i: int) -> LinForm:
    return LinForm().add(vm.idx(fam, n, i), 1.0)


# ---------------------------------------------------------------------------
# objective forms
# ---------------------------------------------------------------------------


def gap_form(layout: BinLayout, n: int, vm: VarMap, fam: str = "l") -> LinForm:
    """Expected distance from the n-th bin to the bin selected out of the
    first n: sum_i q_n(i) (B_n - B_i).  The zero form for n = 1."""
    B = layout.bins
    f = LinForm()
    for i in range(1, n + 1):
        f.add(vm.idx(fam, n, i), float(B[n - 1] - B[i - 1]))
    return f


def right_gap_form(layout: BinLayout, j: int, vm: VarMap, fam: str = "r") -> LinForm:
    """Expected distance from bin j+1 to the selected right bin for inputs in
    [B_j, B_j+1): sum_{r>j} q_{m-j}(m-r+1) (B_r - B_j+1)."""
    B = layout.bins
    m = layout.m
    f = LinForm()
    for r in range(j + 1, m + 1):
        f.add(vm.idx(fam, m - j, m - r + 1), float(B[r - 1] - B[j]))
    return f


def objective_uniform(layout: BinLayout, vm: VarMap) -> tuple[LinForm, float]:
    """Surrogate error objective for uniform inputs: interval-width-weighted
    sum of the left and right expected-gap forms.  Returns the linear form
    and the dropped constant (the width-weighted interval lengths); the
    reconstructed error bound is (objective + constant) / (4c)."""
    if not layout.symmetric:
        raise DomainError("uniform objective assumes a symmetric layout")
    B = layout.bins
    total = LinForm()
    const = 0.0
    for (a, b, j0) in layout.clipped_segments():
        w = b - a
        j = j0 + 1
        total = total.minus(gap_form(layout, j, vm, "l").scaled(-w))
        total = total.minus(gap_form(layout, layout.m - j, vm, "l").scaled(-w))
        const += w * float(B[j0 + 1] - B[j0])
    return total, const


def objective_general(layout: BinLayout, dist: InputDistribution,
                      vm: VarMap) -> tuple[LinForm, float]:
    """Surrogate error objective for an arbitrary input law, built from the
    per-interval masses; uses the true right-family gap form so asymmetric
    bins are handled.  Reconstructed error bound: (objective + constant)/2."""
    dist.check_aligned(layout)
    masses = dist.segment_masses(layout)
    B = layout.bins
    total = LinForm()
    const = 0.0
    for mass, (a, b, j0) in zip(masses, layout.clipped_segments()):
        if mass == 0.0:
            continue
        j = j0 + 1
        total = total.minus(gap_form(layout, j, vm, "l").scaled(-mass))
        total = total.minus(right_gap_form(layout, j, vm, "r").scaled(-mass))
        const += mass * float(B[j0 + 1] - B[j0])
    return total, const


# ---------------------------------------------------------------------------
# linearized probability bounds (upper form z, lower form w)
# ---------------------------------------------------------------------------


def upper_prob_form(layout: BinLayout, bounds: ProbBounds, x: float, i: int,
                    vm: VarMap) -> LinForm:
    """Linear upper bound on p(x, i): the probability factor of the exact
    product expression is replaced by its upper bound, leaving a linear form
    in the other family's row."""
    B = layout.bins
    m = layout.m
    j = interval_index0(layout, x) + 1
    f = LinForm()
    if i <= j:
        u = float(bounds.upper[j - 1, i - 1])
        for r in range(j + 1, m + 1):
            f.add(vm.idx("r", m - j, m - r + 1),
                  u * float((B[r - 1] - x) / (B[r - 1] - B[i - 1])))
    else:
        u = float(bounds.upper[m - j - 1, m - i])
        for l in range(1, j + 1):
            f.add(vm.idx("l", j, l),
                  u * float((x - B[l - 1]) / (B[i - 1] - B[l - 1])))
    return f


def lower_prob_form(layout: BinLayout, bounds: ProbBounds, anchor: tuple, i: int,
                    vm: VarMap) -> LinForm:
    """Linear lower bound on p(., i) at an anchor.

    Anchors are ("edge", x) for a value at x = -c or c, or ("limit", k) for
    the one-sided limit at bin k approached from the side away from bin i.
    The probability factor is frozen at its lower bound.
    """
    B = layout.bins
    m = layout.m
    f = LinForm()
    kind, where = anchor
    if kind == "edge":
        x = float(where)
        j = interval_index0(layout, x) + 1
        if i <= j:
            o = float(bounds.lower[j - 1, i - 1])
            for r in range(j + 1, m + 1):
                f.add(vm.idx("r", m - j, m - r + 1),
                      o * float((B[r - 1] - x) / (B[r - 1] - B[i - 1])))
        else:
            o = float(bounds.lower[m - j - 1, m - i])
            for l in range(1, j + 1):
                f.add(vm.idx("l", j, l),
                      o * float((x - B[l - 1]) / (B[i - 1] - B[l - 1])))
        return f
    if kind != "limit":
        raise DomainError(f"unknown anchor kind {kind!r}")
    k = int(where)
    bk = B[k - 1]
    if B[i - 1] < bk:
        # limit from the left: interval k-1, the zero-distance term drops
        o = float(bounds.lower[k - 2, i - 1])
        for r in range(k + 1, m + 1):
            f.add(vm.idx("r", m - k + 1, m - r + 1),
                  o * float((B[r - 1] - bk) / (B[r - 1] - B[i - 1])))
        return f
    if B[i - 1] > bk:
        # limit from the right: interval k, the zero-distance term drops
        o = float(bounds.lower[m - k - 1, m - i])
        for l in range(1, k):
            f.add(vm.idx("l", k, l),
                  o * float((bk - B[l - 1]) / (B[i - 1] - B[l - 1])))
        return f
    raise DomainError("limit anchor must differ from the probed bin")


# ---------------------------------------------------------------------------
# constraint families
# ---------------------------------------------------------------------------


def _bin_classes(layout: BinLayout) -> tuple[list, list, list]:
    B = layout.bins
    c = layout.c
    in_range = [i + 1 for i in range(layout.m) if -c <= B[i] <= c]
    low = [i + 1 for i in range(layout.m) if B[i] < -c]
    high = [i + 1 for i in range(layout.m) if B[i] > c]
    return in_range, low, high


def _pair_rows(uppers, lowers, e_eps, rows):
    for uf in uppers:
        for lf in lowers:
            rows.append((uf.minus(lf.scaled(e_eps)), LEQ, 0.0))


def constraints_full(layout: BinLayout, eps: float, bounds: ProbBounds,
                     vm: VarMap) -> list:
    """Dense constraint family: every upper extremum candidate against every
    lower candidate, per bin, plus diagonal dominance rows.  O(m^3) rows.

    Box bounds lower <= q <= upper are applied as variable bounds by
    build_lp, not emitted here.
    """
    if eps <= 0:
        raise DomainError("privacy budget must be positive")
    e_eps = math.exp(eps)
    c = layout.c
    in_range, low, high = _bin_classes(layout)
    general = vm.mode == GENERAL
    rows: list = []

    for i in in_range:
        # per-bin suprema: the diagonal probabilities when those rows exist,
        # otherwise (delta = 0 edge bins) the value at the touching edge
        if i <= layout.m - 1:
            uppers = [var_form(vm, "l", i, i)]
        else:
            uppers = [upper_prob_form(layout, bounds, c, i, vm)]
        mi = layout.m + 1 - i
        if mi <= layout.m - 1:
            uppers.append(var_form(vm, "r", mi, mi))
        else:
            uppers.append(upper_prob_form(layout, bounds, -c, i, vm))
        lowers = [lower_prob_form(layout, bounds, ("limit", k), i, vm)
                  for k in in_range if k > i]
        lowers.append(lower_prob_form(layout, bounds, ("edge", c), i, vm))
        if general:
            lowers.extend(lower_prob_form(layout, bounds, ("limit", k), i, vm)
                          for k in in_range if k < i)
            lowers.append(lower_prob_form(layout, bounds, ("edge", -c), i, vm))
        _pair_rows(uppers, lowers, e_eps, rows)

    for i in low:
        uppers = [upper_prob_form(layout, bounds, -c, i, vm)]
        uppers.extend(upper_prob_form(layout, bounds, float(layout.bins[k - 1]), i, vm)
                      for k in in_range)
        lowers = [lower_prob_form(layout, bounds, ("limit", k), i, vm)
                  for k in in_range]
        lowers.append(lower_prob_form(layout, bounds, ("edge", c), i, vm))
        _pair_rows(uppers, lowers, e_eps, rows)

    if general:
        for i in high:
            uppers = [upper_prob_form(layout, bounds, c, i, vm)]
            uppers.extend(upper_prob_form(layout, bounds, float(layout.bins[k - 1]), i, vm)
                          for k in in_range)
            lowers = [lower_prob_form(layout, bounds, ("limit", k), i, vm)
                      for k in in_range]
            lowers.append(lower_prob_form(layout, bounds, ("edge", -c), i, vm))
            _pair_rows(uppers, lowers, e_eps, rows)

    # diagonal dominance q_i(i) >= q_j(i): makes the diagonal entries the
    # per-bin suprema, which is what the candidate sets above rely on
    fams = ("l",) if not general else ("l", "r")
    for fam in fams:
        for j in range(2, layout.m):
            for i in range(1, j):
                rows.append((var_form(vm, fam, i, i).minus(var_form(vm, fam, j, i)),
                             GEQ, 0.0))
    return rows


def constraints_reduced(layout: BinLayout, eps: float, bounds: ProbBounds,
                        vm: VarMap) -> list:
    """Compact constraint family: monotone rows make four anchors dominate
    all extremum candidates, so the bound tables only matter at three
    entries (the grid search shrinks to three scalars)."""
    if eps <= 0:
        raise DomainError("privacy budget must be positive")
    e_eps = math.exp(eps)
    B = layout.bins
    m = layout.m
    c = layout.c
    in_range, low, high = _bin_classes(layout)
    general = vm.mode == GENERAL
    fams = ("l",) if not general else ("l", "r")
    rows: list = []

    if not in_range:
        # no bins inside [-c, c]: p(., i) is affine on the whole range, the
        # only candidates are the two edges
        for i in low:
            _pair_rows([upper_prob_form(layout, bounds, -c, i, vm)],
                       [lower_prob_form(layout, bounds, ("edge", c), i, vm)],
                       e_eps, rows)
        for i in (high if general else []):
            _pair_rows([upper_prob_form(layout, bounds, c, i, vm)],
                       [lower_prob_form(layout, bounds, ("edge", -c), i, vm)],
                       e_eps, rows)
        return rows

    s = in_range[0]
    t = in_range[-1]
    if s < 2 or t > m - 1:
        raise DomainError("reduced constraints need an extension bin on each side")

    for fam in fams:
        # row monotonicity: probabilities shrink as more bins become available
        for j in range(1, m - 1):
            for i in range(1, j + 1):
                rows.append((var_form(vm, fam, j, i).minus(var_form(vm, fam, j + 1, i)),
                             GEQ, 0.0))
        # in-row monotonicity: nearer bins get at least as much mass
        for j in range(2, m):
            for i in range(1, j):
                rows.append((var_form(vm, fam, j, i + 1).minus(var_form(vm, fam, j, i)),
                             GEQ, 0.0))
        # diagonal monotonicity over in-range bins
        for i in in_range:
            if i + 1 <= m - 1:
                rows.append((var_form(vm, fam, i, i).minus(var_form(vm, fam, i + 1, i + 1)),
                             GEQ, 0.0))

    uppers = [upper_prob_form(layout, bounds, -c, s - 1, vm), var_form(vm, "l", s, s)]
    lowers = [lower_prob_form(layout, bounds, ("limit", t), 1, vm),
              lower_prob_form(layout, bounds, ("edge", c), 1, vm)]
    if general:
        mt = m - t  # row of the right-family diagonal candidate at bin t
        uppers.append(upper_prob_form(layout, bounds, c, t + 1, vm))
        if mt + 1 <= m - 1:
            uppers.append(var_form(vm, "r", mt + 1, mt + 1))
        lowers.append(lower_prob_form(layout, bounds, ("limit", s), m, vm))
        lowers.append(lower_prob_form(layout, bounds, ("edge", -c), m, vm))
    _pair_rows(uppers, lowers, e_eps, rows)

    # distance-ratio monotonicity: keeps the bin-value and limit candidate
    # chains decreasing toward the anchors, so the four anchors dominate;
    # coefficients 1/(B_r - B_k+1) and -1/(B_r - B_k) on fixed bins
    for k in range(s, t + 1):
        for r in range(k + 2, m + 1):
            ca = 1.0 / float(B[r - 1] - B[k])
            cb = 1.0 / float(B[r - 1] - B[k - 1])
            row_hi = m - k + 1
            row_mid = m - k
            row_lo = m - k - 1
            e = m - r + 1
            if row_hi <= m - 1:
                f = LinForm()
                f.add(vm.idx("r", row_hi, e), ca)
                f.add(vm.idx("r", row_mid, e), -cb)
                rows.append((f, GEQ, 0.0))
            if row_lo >= 1:
                f = LinForm()
                f.add(vm.idx("r", row_mid, e), ca)
                f.add(vm.idx("r", row_lo, e), -cb)
                rows.append((f, GEQ, 0.0))
    if general:
        # left-family counterpart (the mirror image of the rows above)
        for k in range(s, t + 1):
            for l in range(1, k - 1):
                ca = 1.0 / float(B[k - 2] - B[l - 1])
                cb = 1.0 / float(B[k - 1] - B[l - 1])
                f = LinForm()
                f.add(vm.idx("l", k, l), ca)
                f.add(vm.idx("l", k - 1, l), -cb)
                rows.append((f, GEQ, 0.0))
                f = LinForm()
                f.add(vm.idx("l", k - 1, l), ca)
                f.add(vm.idx("l", k - 2, l), -cb)
                rows.append((f, GEQ, 0.0))
    return rows


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def _reduced_tie_entries(layout: BinLayout, mode: str) -> list:
    """(family, n, i, which) bound entries the reduced anchors froze; these
    must actually bind the matching variables for the linearization to be
    valid."""
    in_range, _, _ = _bin_classes(layout)
    if not in_range:
        return []
    s, t = in_range[0], in_range[-1]
    m = layout.m
    ties = [("l", s - 1, s - 1, "hi"), ("l", t - 1, 1, "lo"), ("l", t, 1, "lo")]
    if mode == GENERAL:
        ties += [("r", m - t, m - t, "hi"), ("r", m - s, 1, "lo"),
                 ("r", m - s + 1, 1, "lo")]
    return ties


def build_lp(layout: BinLayout, eps: float, bounds: ProbBounds,
             dist: InputDistribution, family: str = FULL,
             mode: str = SYMMETRIC, include_box_all: bool = False) -> LinearProgram:
    """Complete standard-form LP: surrogate error objective, linearized
    privacy constraints, per-row probability-simplex equalities, and the
    variable box bounds tying probabilities to the linearization's frozen
    factors."""
    if mode not in (SYMMETRIC, GENERAL):
        raise DomainError(f"unknown mode {mode!r}")
    if family not in (FULL, REDUCED):
        raise DomainError(f"unknown constraint family {family!r}")
    if mode == SYMMETRIC and not layout.symmetric:
        raise DomainError("symmetric mode requires a symmetric layout")
    if bounds.n_rows != layout.m - 1:
        raise DomainError("bound tables sized for a different bin count")
    vm = VarMap(layout.m, mode)

    if dist.kind == "uniform" and mode == SYMMETRIC:
        obj_form, const = objective_uniform(layout, vm)
        mae_scale = 1.0 / (4.0 * layout.c)
    else:
        obj_form, const = objective_general(layout, dist, vm)
        mae_scale = 0.5

    if family == FULL:
        cons = constraints_full(layout, eps, bounds, vm)
    else:
        cons = constraints_reduced(layout, eps, bounds, vm)

    lower = np.zeros(vm.n_vars)
    upper = np.ones(vm.n_vars)
    if family == FULL or include_box_all:
        for k, (fam, n, i) in enumerate(vm.names):
            lower[k] = bounds.lower[n - 1, i - 1]
            upper[k] = bounds.upper[n - 1, i - 1]
    if family == REDUCED:
        for fam, n, i, which in _reduced_tie_entries(layout, mode):
            k = vm.idx(fam, n, i)
            if which == "lo":
                lower[k] = max(lower[k], bounds.lower[n - 1, i - 1])
            else:
                upper[k] = min(upper[k], bounds.upper[n - 1, i - 1])

    # reject bound tables that cannot hold any probability row
    fams = ("l",) if mode == SYMMETRIC else ("l", "r")
    for fam in fams:
        for n in range(1, layout.m):
            idxs = [vm.idx(fam, n, i) for i in range(1, n + 1)]
            lo_sum = float(lower[idxs].sum())
            hi_sum = float(upper[idxs].sum())
            if lo_sum > 1.0 + 1e-12 or hi_sum < 1.0 - 1e-12:
                raise InfeasibleBounds(
                    f"row {fam}:{n} bounds admit no probability vector "
                    f"(sum lower={lo_sum:.6g}, sum upper={hi_sum:.6g})"
                )

    n_rows = len(cons) + (layout.m - 1) * len(fams)
    rows = np.zeros((n_rows, vm.n_vars))
    relations = []
    rhs = np.zeros(n_rows)
    r = 0
    for fam in fams:
        for n in range(1, layout.m):
            for i in range(1, n + 1):
                rows[r, vm.idx(fam, n, i)] = 1.0
            relations.append(EQ)
            rhs[r] = 1.0
            r += 1
    for form, rel, b in cons:
        rows[r] = form.dense(vm.n_vars)
        relations.append(rel)
        rhs[r] = b - form.const
        r += 1

    return LinearProgram(
        var_names=list(vm.names),
        objective=obj_form.dense(vm.n_vars),
        rows=rows,
        relations=relations,
        rhs=rhs,
        lower=lower,
        upper=upper,
        metadata={
            "eps": float(eps),
            "family": family,
            "mode": mode,
            "dropped_constant": float(const),
            "mae_scale": float(mae_scale),
            "m": layout.m,
        },
    )


def mechanism_from_solution(layout: BinLayout, lp: LinearProgram,
                            values: np.ndarray, metadata: dict | None = None):
    """Convert an LP-feasible point back into a Mechanism."""
    from .core import Mechanism, SelectionDistribution

    m = layout.m
    mode = lp.metadata.get("mode", SYMMETRIC)
    left = np.zeros((m - 1, m - 1))
    right = np.zeros((m - 1, m - 1)) if mode == GENERAL else None
    for k, (fam, n, i) in enumerate(lp.var_names):
        v = min(max(float(values[k]), 0.0), 1.0)
        if fam == "l":
            left[n - 1, i - 1] = v
        else:
            right[n - 1, i - 1] = v
    # renormalize away solver roundoff so rows are exact probability vectors
    left /= left.sum(axis=1, keepdims=True)
    if right is not None:
        right /= right.sum(axis=1, keepdims=True)
    sel = SelectionDistribution(m=m, left=left, right=right,
                                symmetric_mode=right is None)
    return Mechanism(layout=layout, selection=sel, metadata=metadata or {})
