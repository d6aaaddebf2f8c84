"""Domain types: bin layouts, selection distributions, mechanisms, inputs.

All types are immutable after construction (arrays are copied and marked
read-only) and safe to share across threads.  Randomized operations live in
:mod:`dpquant.quantize` and take an explicit ``numpy.random.Generator``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

MAX_BINS = 64

_EDGE_TOL = 1e-12
_ROW_SUM_TOL = 1e-10
_SYM_TOL = 1e-9


class DomainError(ValueError):
    """Input outside the contract of an operation (x out of range, misaligned
    distribution, invalid bin index)."""


class MechanismFormatError(ValueError):
    """Malformed serialized mechanism document."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BinLayout:
    """Quantization grid: clip radius ``c``, range extension ``delta`` and
    strictly increasing bin values ``B_1 <= ... <= B_m`` with
    ``B_1 = -c-delta`` and ``B_m = c+delta``.
    """

    c: float
    delta: float
    bins: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bins", _frozen(self.bins))
        b = self.bins
        m = b.shape[0]
        if not (self.c > 0):
            raise ValueError("clip radius c must be positive")
        if self.delta < 0:
            raise ValueError("range extension delta must be nonnegative")
        if m < 2:
            raise ValueError("need at least 2 bins")
        if m > MAX_BINS:
            raise ValueError(f"bin count capped at {MAX_BINS}")
        if not np.all(np.diff(b) > 0):
            raise ValueError("bins must be strictly increasing")
        lo, hi = -self.c - self.delta, self.c + self.delta
        scale = max(1.0, abs(lo), abs(hi))
        if abs(b[0] - lo) > _EDGE_TOL * scale or abs(b[-1] - hi) > _EDGE_TOL * scale:
            raise ValueError(
                f"outer bins must equal -c-delta and c+delta, got {b[0]}, {b[-1]}"
            )

    @property
    def m(self) -> int:
        return self.bins.shape[0]

    @cached_property
    def symmetric(self) -> bool:
        b = self.bins
        scale = max(1.0, float(b[-1]))
        return bool(np.all(np.abs(b + b[::-1]) <= _SYM_TOL * scale))

    @cached_property
    def inner_lo(self) -> Optional[int]:
        """0-based index of the bin in [-c, c] closest to -c, or None."""
        idx = np.nonzero((self.bins >= -self.c) & (self.bins <= self.c))[0]
        return int(idx[0]) if idx.size else None

    @cached_property
    def inner_hi(self) -> Optional[int]:
        """0-based index of the bin in [-c, c] closest to c, or None."""
        idx = np.nonzero((self.bins >= -self.c) & (self.bins <= self.c))[0]
        return int(idx[-1]) if idx.size else None

    def clipped_segments(self) -> list[tuple[float, float, int]]:
        """Partition of [-c, c] into pieces (a, b, j0) lying inside a single
        inter-bin interval [B_j0, B_j0+1); degenerate pieces are dropped."""
        cuts = [-self.c]
        cuts.extend(float(v) for v in self.bins if -self.c < v < self.c)
        cuts.append(self.c)
        out = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b - a <= 0:
                continue
            j0 = interval_index0(self, 0.5 * (a + b))
            out.append((a, b, j0))
        return out

    @classmethod
    def symmetric_layout(cls, c: float, delta: float, inner: "list[float] | np.ndarray") -> "BinLayout":
        """Build symmetric bins from the positive inner positions.

        ``inner`` lists the strictly positive bin values below ``c+delta``;
        their negatives are mirrored in automatically.
        """
        inner = np.sort(np.asarray(inner, dtype=np.float64))
        bins = np.concatenate([[-c - delta], -inner[::-1], inner, [c + delta]])
        return cls(c=c, delta=delta, bins=bins)


def interval_index0(layout: BinLayout, x: float) -> int:
    """0-based index j0 with x in [B_j0, B_j0+1); top endpoint folds into the
    last interval so the convention is total on the closed input range."""
    if x < -layout.c or x > layout.c:
        raise DomainError(f"input {x} outside [-{layout.c}, {layout.c}]")
    j0 = int(np.searchsorted(layout.bins, x, side="right")) - 1
    return min(max(j0, 0), layout.m - 2)


@dataclass(frozen=True, eq=False)
class SelectionDistribution:
    """Triangular probability tables for picking the left/right bins.

    ``left[n-1][i-1]`` is the probability of choosing the i-th of n available
    bins counted outward-in: for an input in [B_j, B_j+1), the left bin index
    is drawn from row j, and the right bin is drawn from row m-j with slot k
    mapping to bin m+1-k (slot 1 is always the outermost bin).  When
    ``symmetric_mode`` is set the right table equals the left one.
    """

    m: int
    left: np.ndarray
    right: Optional[np.ndarray] = None
    symmetric_mode: bool = True

    def __post_init__(self):
        object.__setattr__(self, "left", _frozen(self.left))
        if self.right is not None:
            object.__setattr__(self, "right", _frozen(self.right))
        n = self.m - 1
        for name, table in (("left", self.left), ("right", self.right)):
            if table is None:
                continue
            if table.shape != (n, n):
                raise ValueError(f"{name} table must be ({n}, {n}), got {table.shape}")
            if np.any(table < -1e-12) or np.any(table > 1 + 1e-12):
                raise ValueError(f"{name} table entries must lie in [0, 1]")
            if np.any(np.triu(table, k=1) != 0):
                raise ValueError(f"{name} table must be lower-triangular")
            sums = table.sum(axis=1)
            if np.any(np.abs(sums - 1.0) > _ROW_SUM_TOL):
                raise ValueError(f"{name} table rows must sum to 1, got {sums}")
        if abs(self.left[0, 0] - 1.0) > _ROW_SUM_TOL:
            raise ValueError("single-choice row must be deterministic (q_1(1) = 1)")
        if self.symmetric_mode and self.right is not None:
            raise ValueError("symmetric_mode implies no separate right table")
        if not self.symmetric_mode and self.right is None:
            raise ValueError("two-family mode requires a right table")

    @property
    def right_effective(self) -> np.ndarray:
        return self.left if self.right is None else self.right

    def row_left(self, n: int) -> np.ndarray:
        """Row q_n(.) of the left family (n is 1-based, entries 1..n)."""
        return self.left[n - 1, :n]

    def row_right(self, n: int) -> np.ndarray:
        return self.right_effective[n - 1, :n]

    @classmethod
    def from_rows(cls, rows: list[np.ndarray], right_rows: "Optional[list[np.ndarray]]" = None) -> "SelectionDistribution":
        m = len(rows) + 1
        left = np.zeros((m - 1, m - 1))
        for n, row in enumerate(rows, start=1):
            left[n - 1, :n] = row
        right = None
        if right_rows is not None:
            right = np.zeros((m - 1, m - 1))
            for n, row in enumerate(right_rows, start=1):
                right[n - 1, :n] = row
        return cls(m=m, left=left, right=right, symmetric_mode=right is None)


@dataclass(frozen=True, eq=False)
class Mechanism:
    """A bin layout paired with a selection distribution: a fully specified
    randomized quantizer."""

    layout: BinLayout
    selection: SelectionDistribution
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.selection.m != self.layout.m:
            raise ValueError(
                f"selection is for m={self.selection.m}, layout has m={self.layout.m}"
            )

    @property
    def m(self) -> int:
        return self.layout.m

    @cached_property
    def _left_cdf(self) -> np.ndarray:
        return _frozen(np.cumsum(self.selection.left, axis=1))

    @cached_property
    def _right_cdf(self) -> np.ndarray:
        return _frozen(np.cumsum(self.selection.right_effective, axis=1))

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        n = self.m - 1
        doc = {
            "c": float(self.layout.c),
            "delta": float(self.layout.delta),
            "bins": [float(v) for v in self.layout.bins],
            "left_table": [
                [float(v) for v in self.selection.left[r, : r + 1]] for r in range(n)
            ],
            "symmetric_mode": bool(self.selection.symmetric_mode),
            "metadata": self.metadata,
        }
        if self.selection.right is not None:
            doc["right_table"] = [
                [float(v) for v in self.selection.right[r, : r + 1]] for r in range(n)
            ]
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "Mechanism":
        try:
            layout = BinLayout(c=doc["c"], delta=doc["delta"], bins=np.asarray(doc["bins"]))
            rows = [np.asarray(r, dtype=np.float64) for r in doc["left_table"]]
            right_rows = None
            if doc.get("right_table") is not None:
                right_rows = [np.asarray(r, dtype=np.float64) for r in doc["right_table"]]
            sel = SelectionDistribution.from_rows(rows, right_rows)
            if bool(doc.get("symmetric_mode", True)) != sel.symmetric_mode:
                raise MechanismFormatError("symmetric_mode flag contradicts tables")
            return cls(layout=layout, selection=sel, metadata=dict(doc.get("metadata", {})))
        except KeyError as exc:
            raise MechanismFormatError(f"missing field {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "Mechanism":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MechanismFormatError(f"invalid JSON at offset {exc.pos}: {exc.msg}") from exc
        return cls.from_dict(doc)


@dataclass(frozen=True, eq=False)
class InputDistribution:
    """Law of the input X over [-c, c].

    ``uniform`` and ``truncated_gaussian`` carry their parameters;
    ``interval_masses`` carries per-interval probabilities aligned to a
    specific layout (mass of [B_i, B_i+1) clipped to [-c, c]).
    """

    kind: str
    mu: float = 0.0
    sigma: float = 1.0
    masses: Optional[np.ndarray] = None
    aligned_bins: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("uniform", "truncated_gaussian", "interval_masses"):
            raise ValueError(f"unknown input distribution kind {self.kind!r}")
        if self.kind == "truncated_gaussian" and not (self.sigma > 0):
            raise ValueError("sigma must be positive")
        if self.kind == "interval_masses":
            if self.masses is None or self.aligned_bins is None:
                raise ValueError("interval_masses needs masses and the aligned bins")
            object.__setattr__(self, "masses", _frozen(self.masses))
            object.__setattr__(self, "aligned_bins", _frozen(self.aligned_bins))
            if self.masses.shape[0] != self.aligned_bins.shape[0] - 1:
                raise ValueError("need one mass per bin interval")
            if np.any(self.masses < -1e-12):
                raise ValueError("interval masses must be nonnegative")
            if abs(float(self.masses.sum()) - 1.0) > 1e-9:
                raise ValueError("interval masses must sum to 1")

    @classmethod
    def uniform(cls) -> "InputDistribution":
        return cls(kind="uniform")

    @classmethod
    def truncated_gaussian(cls, mu: float, sigma: float) -> "InputDistribution":
        return cls(kind="truncated_gaussian", mu=mu, sigma=sigma)

    @classmethod
    def from_masses(cls, layout: BinLayout, masses: np.ndarray) -> "InputDistribution":
        return cls(kind="interval_masses", masses=np.asarray(masses, dtype=np.float64),
                   aligned_bins=layout.bins)

    @classmethod
    def from_samples(cls, layout: BinLayout, samples: np.ndarray) -> "InputDistribution":
        """Estimate interval masses by counting samples per clipped interval."""
        samples = np.asarray(samples, dtype=np.float64)
        if np.any(samples < -layout.c) or np.any(samples > layout.c):
            raise DomainError("samples must lie in [-c, c]")
        j0 = np.clip(np.searchsorted(layout.bins, samples, side="right") - 1,
                     0, layout.m - 2)
        counts = np.bincount(j0, minlength=layout.m - 1).astype(np.float64)
        return cls.from_masses(layout, counts / counts.sum())

    def check_aligned(self, layout: BinLayout) -> None:
        if self.kind == "interval_masses":
            if (self.aligned_bins.shape != layout.bins.shape
                    or not np.array_equal(self.aligned_bins, layout.bins)):
                raise DomainError("interval masses are aligned to a different layout")

    def segment_masses(self, layout: BinLayout) -> np.ndarray:
        """Probability of each piece of layout.clipped_segments()."""
        self.check_aligned(layout)
        segs = layout.clipped_segments()
        out = np.zeros(len(segs))
        if self.kind == "uniform":
            for k, (a, b, _) in enumerate(segs):
                out[k] = (b - a) / (2.0 * layout.c)
        elif self.kind == "truncated_gaussian":
            from scipy.special import ndtr

            lo = ndtr((-layout.c - self.mu) / self.sigma)
            hi = ndtr((layout.c - self.mu) / self.sigma)
            z = hi - lo
            for k, (a, b, _) in enumerate(segs):
                out[k] = (ndtr((b - self.mu) / self.sigma)
                          - ndtr((a - self.mu) / self.sigma)) / z
        else:
            for k, (_, _, j0) in enumerate(segs):
                out[k] = self.masses[j0]
        return out

    def density(self, x: np.ndarray, c: float) -> np.ndarray:
        """Density on [-c, c] for the analytic kinds (quadrature weights)."""
        if self.kind == "uniform":
            return np.full_like(np.asarray(x, dtype=np.float64), 1.0 / (2.0 * c))
        if self.kind == "truncated_gaussian":
            from scipy.special import ndtr

            z = (np.asarray(x, dtype=np.float64) - self.mu) / self.sigma
            norm = ndtr((c - self.mu) / self.sigma) - ndtr((-c - self.mu) / self.sigma)
            return np.exp(-0.5 * z * z) / (self.sigma * np.sqrt(2 * np.pi) * norm)
        raise DomainError(f"no pointwise density for kind {self.kind!r}")
