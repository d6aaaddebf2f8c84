"""Randomized quantization: sampling, exact output laws, exact error.

The output probability p(x, i) of bin i is piecewise affine in x (affine on
each inter-bin interval, discontinuous at the bins), so most quantities here
reduce to one affine coefficient table per interval:

    p(x, i) = A[j0, i, 0] + A[j0, i, 1] * x     for x in [B_j0, B_j0+1).

The table also yields the one-sided limits at bins (evaluate the adjacent
interval's affine form at the bin) and the exact mean absolute error (the
integrand is a quadratic per interval).
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .core import (
    BinLayout,
    DomainError,
    InputDistribution,
    Mechanism,
    interval_index0,
)

_CHUNK = 1 << 20
_GL_NODES = 64
_gl_x, _gl_w = np.polynomial.legendre.leggauss(_GL_NODES)

FROM_LEFT = "from_left"
FROM_RIGHT = "from_right"


def interval_index(layout: BinLayout, x: float) -> int:
    """1-based index j of the interval [B_j, B_j+1) containing x.

    Intervals are closed on the left; the top endpoint x = c with delta = 0
    folds into the last interval so every input in [-c, c] has a home.
    """
    return interval_index0(layout, x) + 1


def dither(b_left: float, b_right: float, x: float, rng: np.random.Generator) -> float:
    """Randomize between two bracketing bins, unbiased for x.

    Returns b_left with probability (b_right - x)/(b_right - b_left), so the
    conditional expectation equals x exactly.
    """
    if b_left > x or b_right <= x:
        raise DomainError(f"dither requires b_left <= x < b_right, got {b_left}, {x}, {b_right}")
    if rng.random() < (x - b_left) / (b_right - b_left):
        return b_right
    return b_left


def sample(mech: Mechanism, x: float, rng: np.random.Generator) -> float:
    """One randomized quantization of x: select a left and a right bin from
    the selection distribution, then dither between them."""
    return float(sample_many(mech, np.asarray([x], dtype=np.float64), rng)[0])


def sample_many(mech: Mechanism, xs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorized quantization of many inputs (one independent draw each).

    Uniform variates are pre-drawn per fixed-size chunk, so results depend
    only on (mechanism, xs, generator state) and not on the kernel backend.
    """
    layout = mech.layout
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    if xs.ndim != 1:
        raise DomainError("sample_many expects a 1-d array")
    if xs.size and (xs.min() < -layout.c or xs.max() > layout.c):
        raise DomainError(f"inputs must lie in [-{layout.c}, {layout.c}]")
    j_idx = np.clip(
        np.searchsorted(layout.bins, xs, side="right") - 1, 0, layout.m - 2
    ).astype(np.int64)
    out = np.empty_like(xs)
    lcdf = np.ascontiguousarray(mech._left_cdf)
    rcdf = np.ascontiguousarray(mech._right_cdf)
    bins = np.ascontiguousarray(layout.bins)
    for start in range(0, xs.size, _CHUNK):
        sl = slice(start, min(start + _CHUNK, xs.size))
        u = rng.random((3, sl.stop - sl.start))
        _kernels.select_dither(
            bins, lcdf, rcdf, xs[sl], j_idx[sl], u[0], u[1], u[2], out[sl]
        )
    return out


def interval_affine(mech: Mechanism) -> np.ndarray:
    """Affine coefficients of the output distribution: shape (m-1, m, 2) with
    p(x, i) = A[j0, i, 0] + A[j0, i, 1]*x on the interval [B_j0, B_j0+1)."""
    cached = mech.__dict__.get("_affine_table")
    if cached is not None:
        return cached
    layout = mech.layout
    m = layout.m
    B = layout.bins
    L = mech.selection.left
    R = mech.selection.right_effective
    A = np.zeros((m - 1, m, 2))
    for j0 in range(m - 1):
        lrow = L[j0, : j0 + 1]
        nr = m - 2 - j0
        rrow = R[nr, : nr + 1]
        rbins = np.arange(m - 1, j0, -1)  # slot k0 -> bin index m-1-k0
        for i0 in range(j0 + 1):
            d = B[rbins] - B[i0]
            s_inv = float(np.sum(rrow / d))
            s_binv = float(np.sum(rrow * B[rbins] / d))
            A[j0, i0, 0] = lrow[i0] * s_binv
            A[j0, i0, 1] = -lrow[i0] * s_inv
        lbins = np.arange(0, j0 + 1)
        for i0 in range(j0 + 1, m):
            w = rrow[m - 1 - i0]
            d = B[i0] - B[lbins]
            s_inv = float(np.sum(lrow / d))
            s_binv = float(np.sum(lrow * B[lbins] / d))
            A[j0, i0, 0] = -w * s_binv
            A[j0, i0, 1] = w * s_inv
    A.setflags(write=False)
    mech.__dict__["_affine_table"] = A
    return A


def output_distribution(mech: Mechanism, x: float) -> np.ndarray:
    """Exact probability vector over the m bins for input x."""
    j0 = interval_index0(mech.layout, x)
    a = interval_affine(mech)[j0]
    return a[:, 0] + a[:, 1] * x


def output_distribution_limit(mech: Mechanism, k: int, side: str) -> np.ndarray:
    """One-sided limit of p(., i) at bin k (1-based).

    p is discontinuous at bins, so the limit from the left (interval k-1's
    affine form evaluated at B_k) generally differs from the value at B_k,
    which equals the limit from the right.
    """
    layout = mech.layout
    k0 = k - 1
    if k0 < 0 or k0 >= layout.m:
        raise DomainError(f"bin index {k} out of range")
    bk = layout.bins[k0]
    if bk < -layout.c or bk > layout.c:
        raise DomainError(f"bin {k} lies outside [-c, c]")
    if side == FROM_LEFT:
        if k0 == 0:
            raise DomainError("no interval to the left of the first bin")
        j0 = k0 - 1
    elif side == FROM_RIGHT:
        if k0 == layout.m - 1:
            raise DomainError("no interval to the right of the last bin")
        j0 = k0
    else:
        raise DomainError(f"side must be {FROM_LEFT!r} or {FROM_RIGHT!r}")
    a = interval_affine(mech)[j0]
    return a[:, 0] + a[:, 1] * bk


def _segment_quadratics(mech: Mechanism) -> list:
    """Per clipped segment (a, b, j0): coefficients (c2, c1, c0) of the
    conditional absolute error E|M(x) - x| as a quadratic in x."""
    layout = mech.layout
    A = interval_affine(mech)
    B = layout.bins
    out = []
    for (a, b, j0) in layout.clipped_segments():
        sign = np.where(np.arange(layout.m) <= j0, 1.0, -1.0)
        alpha = A[j0, :, 0]
        beta = A[j0, :, 1]
        c2 = float(np.sum(sign * beta))
        c1 = float(np.sum(sign * (alpha - beta * B)))
        c0 = float(np.sum(sign * (-alpha * B)))
        out.append((a, b, j0, c2, c1, c0))
    return out


def conditional_mae(mech: Mechanism, x: float) -> float:
    """E|M(x) - x| at a fixed input."""
    p = output_distribution(mech, x)
    return float(np.sum(p * np.abs(mech.layout.bins - x)))


def exact_mae(mech: Mechanism, dist: InputDistribution) -> float:
    """Mean absolute error E|M(X) - X| under the given input law.

    Per segment the integrand is an exact quadratic: uniform inputs are
    integrated in closed form, densities with fixed-order Gauss-Legendre
    quadrature, and interval-mass inputs with a uniform conditional law
    inside each interval (a documented approximation of the true error).
    """
    layout = mech.layout
    dist.check_aligned(layout)
    quads = _segment_quadratics(mech)
    if dist.kind == "truncated_gaussian":
        total = 0.0
        for (a, b, _, c2, c1, c0) in quads:
            mid, half = 0.5 * (a + b), 0.5 * (b - a)
            x = mid + half * _gl_x
            poly = (c2 * x + c1) * x + c0
            total += half * float(np.sum(_gl_w * poly * dist.density(x, layout.c)))
        return total
    masses = dist.segment_masses(layout)
    total = 0.0
    for mass, (a, b, _, c2, c1, c0) in zip(masses, quads):
        avg = (c2 * (b**3 - a**3) / 3.0 + c1 * (b**2 - a**2) / 2.0 + c0 * (b - a)) / (b - a)
        total += mass * avg
    return float(total)


def mae_upper_bound(mech: Mechanism, dist: InputDistribution) -> float:
    """Linear upper bound on the mean absolute error: half of (expected gap
    to the right selection, plus interval width, plus expected gap to the
    left selection), averaged over the input law.  Dominates exact_mae for
    every mechanism."""
    layout = mech.layout
    dist.check_aligned(layout)
    B = layout.bins
    m = layout.m
    L = mech.selection.left
    R = mech.selection.right_effective
    masses = dist.segment_masses(layout)
    total = 0.0
    for mass, (_, _, j0) in zip(masses, layout.clipped_segments()):
        lrow = L[j0, : j0 + 1]
        nr = m - 2 - j0
        rrow = R[nr, : nr + 1]
        rbins = np.arange(m - 1, j0, -1)
        gap_left = float(np.sum(lrow * (B[j0] - B[: j0 + 1])))
        gap_right = float(np.sum(rrow * (B[rbins] - B[j0 + 1])))
        total += mass * 0.5 * (gap_right + (B[j0 + 1] - B[j0]) + gap_left)
    return float(total)
