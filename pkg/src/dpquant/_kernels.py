"""Hot inner loops: batched bin selection/dithering and simplex pivoting.

Each kernel has a numba-compiled variant and a vectorized pure-numpy
variant.  The two are written to perform the same floating-point
operations in the same order, so for identical inputs (including the
pre-drawn uniforms) they return bit-identical outputs.  The module-level
names ``select_dither`` and ``simplex_loop`` point at the variant chosen
by :mod:`dpquant._backend`.
"""

from __future__ import annotations

import numpy as np

from ._backend import BACKEND, has_numba


# ---------------------------------------------------------------------------
# batched selection + dither
#
# Tables are dense lower-triangular (m-1, m-1) row-CDF matrices: row n0 is
# the cumulative distribution over n0+1 choices.  For a draw with interval
# index j0 (x in [B_j0, B_j0+1)):
#   * left bin index  l0 drawn from row j0 of the left CDF,
#   * right slot      k0 drawn from row m-2-j0 of the right CDF, which maps
#     to bin index r0 = m-1-k0 (slot 0 is always the outermost bin B_m-1),
#   * output B_r0 when u_dither < (x - B_l0)/(B_r0 - B_l0), else B_l0.
# ---------------------------------------------------------------------------


def _select_dither_np(bins, lcdf, rcdf, xs, j_idx, u_left, u_right, u_dither, out):
    m = bins.shape[0]
    cl = lcdf[j_idx]  # (n, m-1)
    l0 = (u_left[:, None] >= cl).sum(axis=1)
    np.minimum(l0, j_idx, out=l0)
    rrows = (m - 2) - j_idx
    cr = rcdf[rrows]
    k0 = (u_right[:, None] >= cr).sum(axis=1)
    np.minimum(k0, rrows, out=k0)
    r0 = (m - 1) - k0
    bl = bins[l0]
    br = bins[r0]
    np.copyto(out, np.where(u_dither < (xs - bl) / (br - bl), br, bl))


def _select_dither_py(bins, lcdf, rcdf, xs, j_idx, u_left, u_right, u_dither, out):
    m = bins.shape[0]
    n = xs.shape[0]
    for t in range(n):
        j0 = j_idx[t]
        u = u_left[t]
        l0 = j0
        for i in range(j0 + 1):
            if u < lcdf[j0, i]:
                l0 = i
                break
        rrow = m - 2 - j0
        u = u_right[t]
        k0 = rrow
        for i in range(rrow + 1):
            if u < rcdf[rrow, i]:
                k0 = i
                break
        r0 = m - 1 - k0
        bl = bins[l0]
        br = bins[r0]
        x = xs[t]
        if u_dither[t] < (x - bl) / (br - bl):
            out[t] = br
        else:
            out[t] = bl


# ---------------------------------------------------------------------------
# simplex pivoting (Bland's rule)
#
# T is a dense tableau of shape (n_rows+1, n_cols+1): rows 0..n_rows-1 hold
# B^-1 A | B^-1 b, the last row holds reduced costs | -objective.  Columns
# 0..n_enter-1 are eligible to enter the basis (artificials are excluded).
# Return codes: 0 optimal, 1 unbounded, 2 iteration limit.
# ---------------------------------------------------------------------------

_TOL_PIVOT = 1e-10
_TOL_OPT = 1e-9


def _simplex_loop_np(T, basis, n_enter, max_iter):
    n_rows = T.shape[0] - 1
    n_cols = T.shape[1] - 1
    it = 0
    cost = T[n_rows]
    while it < max_iter:
        neg = np.nonzero(cost[:n_enter] < -_TOL_OPT)[0]
        if neg.size == 0:
            return 0, it
        e = int(neg[0])
        col = T[:n_rows, e]
        ok = col > _TOL_PIVOT
        if not ok.any():
            return 1, it
        ratios = np.full(n_rows, np.inf)
        ratios[ok] = T[:n_rows, n_cols][ok] / col[ok]
        rmin = ratios.min()
        ties = np.nonzero(ratios == rmin)[0]
        piv = int(ties[np.argmin(basis[ties])])
        pv = T[piv, e]
        T[piv] /= pv
        f = T[:, e].copy()
        f[piv] = 0.0
        T -= f[:, None] * T[piv][None, :]
        T[:, e] = 0.0
        T[piv, e] = 1.0
        basis[piv] = e
        it += 1
    return 2, it


def _simplex_loop_py(T, basis, n_enter, max_iter):
    n_rows = T.shape[0] - 1
    n_cols = T.shape[1] - 1
    it = 0
    while it < max_iter:
        e = -1
        for j in range(n_enter):
            if T[n_rows, j] < -_TOL_OPT:
                e = j
                break
        if e < 0:
            return 0, it
        rmin = np.inf
        any_pos = False
        for i in range(n_rows):
            a = T[i, e]
            if a > _TOL_PIVOT:
                any_pos = True
                ratio = T[i, n_cols] / a
                if ratio < rmin:
                    rmin = ratio
        if not any_pos:
            return 1, it
        piv = -1
        for i in range(n_rows):
            a = T[i, e]
            if a > _TOL_PIVOT:
                ratio = T[i, n_cols] / a
                if ratio == rmin and (piv < 0 or basis[i] < basis[piv]):
                    piv = i
        pv = T[piv, e]
        for j in range(n_cols + 1):
            T[piv, j] /= pv
        for i in range(n_rows + 1):
            if i == piv:
                continue
            f = T[i, e]
            if f != 0.0:
                for j in range(n_cols + 1):
                    T[i, j] -= f * T[piv, j]
            T[i, e] = 0.0
        T[piv, e] = 1.0
        basis[piv] = e
        it += 1
    return 2, it


if has_numba():
    from numba import njit

    _select_dither_nb = njit(cache=True, nogil=True)(_select_dither_py)
    _simplex_loop_nb = njit(cache=True, nogil=True)(_simplex_loop_py)
else:  # pragma: no cover - exercised only when numba is absent
    _select_dither_nb = None
    _simplex_loop_nb = None

if BACKEND == "numba":
    select_dither = _select_dither_nb
    simplex_loop = _simplex_loop_nb
else:
    select_dither = _select_dither_np
    simplex_loop = _simplex_loop_np
