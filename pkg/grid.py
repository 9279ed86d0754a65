# v1.0.0 - Work Package 1: Discretization Grid & Triple Histograms
"""
Per-variable uniform binning and complete-case estimation of every third-order
histogram tensor. Bins and variables are 0-based here.
"""
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from console import log, warn
from errors import (
    DegenerateSupportError,
    DimensionMismatchError,
    EmptyStatisticsError,
    IndexOutOfRangeError,
    InvalidArgumentError,
    InvalidValueError,
    UnusableVariableError,
)
from models import CLIP_DEFAULT
from workers import TripleHistogramWorker, run_workers

Triple = Tuple[int, int, int]


@dataclass(frozen=True)
class Dataset:
    """
    M records x N variables; NaN marks a missing cell. `labels` holds the 0-based
    ground-truth component of each record when known.
    """
    values: np.ndarray
    names: Tuple[str, ...] = ()
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1:
            raise InvalidArgumentError(f"Dataset needs at least one record, got shape {values.shape}")
        if np.any(np.isinf(values)):
            raise InvalidValueError("Dataset contains infinite values")
        object.__setattr__(self, "values", values)
        names = tuple(self.names) if self.names else tuple(f"x{n + 1}" for n in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise DimensionMismatchError(f"{len(names)} names for {values.shape[1]} columns")
        object.__setattr__(self, "names", names)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=int).ravel()
            if labels.shape[0] != values.shape[0]:
                raise DimensionMismatchError(f"{labels.shape[0]} labels for {values.shape[0]} records")
            object.__setattr__(self, "labels", labels)

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]

    @property
    def observed(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def observed_fraction(self) -> float:
        return float(self.observed.mean())

    def complete_rows(self) -> np.ndarray:
        return self.values[np.all(self.observed, axis=1)]


@dataclass(frozen=True)
class DiscretizationGrid:
    """edges[n] = d_n^0 < ... < d_n^I, uniform within each variable."""
    edges: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        if edges.ndim != 2 or edges.shape[1] < 3:
            raise InvalidArgumentError(f"Edges must be N x (I+1) with I >= 2, got shape {edges.shape}")
        steps = np.diff(edges, axis=1)
        if np.any(steps <= 0):
            raise InvalidArgumentError("Bin edges must be strictly increasing")
        spread = np.abs(steps - steps.mean(axis=1, keepdims=True))
        # linspace rounding grows with the magnitude of the edges, not the width
        if np.any(spread > 1e-9 * np.abs(edges).max(axis=1, keepdims=True) + 1e-12):
            raise InvalidArgumentError("Bin edges must be uniformly spaced")
        object.__setattr__(self, "edges", edges)

    @property
    def N(self) -> int:
        return self.edges.shape[0]

    @property
    def I(self) -> int:
        return self.edges.shape[1] - 1

    @property
    def spacing(self) -> np.ndarray:
        return (self.edges[:, -1] - self.edges[:, 0]) / self.I


@dataclass(frozen=True)
class TripleHistogramSet:
    """Probability tensors keyed by sorted triples (j < k < l), with their record counts."""
    N: int
    I: int
    tensors: Dict[Triple, np.ndarray] = field(default_factory=dict)
    counts: Dict[Triple, int] = field(default_factory=dict)

    @property
    def triples(self) -> List[Triple]:
        return sorted(self.tensors)

    def containing(self, n: int) -> List[Triple]:
        return [t for t in self.triples if n in t]

    def __len__(self) -> int:
        return len(self.tensors)


def build_grid(data: Dataset, I: int, clip: Tuple[float, float] = CLIP_DEFAULT) -> DiscretizationGrid:
    """Support [q_lo, q_hi] per variable, split into I equal intervals."""
    if I < 2:
        raise InvalidArgumentError(f"Need at least 2 intervals, got {I}")
    lo_q, hi_q = clip
    if not (0.0 <= lo_q < hi_q <= 1.0):
        raise InvalidArgumentError(f"Clip quantiles must satisfy 0 <= lo < hi <= 1, got {clip}")

    edges = np.empty((data.N, I + 1))
    for n in range(data.N):
        column = data.values[:, n]
        column = column[~np.isnan(column)]
        if column.size == 0:
            raise UnusableVariableError(f"Variable '{data.names[n]}' has no observed values")
        if np.unique(column).size < 2:
            raise DegenerateSupportError(f"Variable '{data.names[n]}' is constant")
        lo, hi = np.quantile(column, [lo_q, hi_q])
        if hi <= lo:
            raise DegenerateSupportError(
                f"Variable '{data.names[n]}' has an empty clipped support [{lo}, {hi}]"
            )
        edges[n] = np.linspace(lo, hi, I + 1)

    log("Grid", f"Built {I}-bin grid for {data.N} variables.")
    return DiscretizationGrid(edges)


def digitize(grid: DiscretizationGrid, n: int, x) -> np.ndarray:
    """
    Bin of x in (d^i, d^{i+1}], 0-based. d^0 falls in bin 0; values outside the
    support clamp to the edge bins. Accepts scalars or arrays.
    """
    if not 0 <= n < grid.N:
        raise IndexOutOfRangeError(f"Variable index {n} outside [0, {grid.N})")
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise InvalidValueError("Cannot digitize NaN")
    idx = np.searchsorted(grid.edges[n], x, side="left") - 1
    idx = np.clip(idx, 0, grid.I - 1)
    return idx if idx.ndim else int(idx)


def digitize_dataset(data: Dataset, grid: DiscretizationGrid) -> np.ndarray:
    """M x N bin indices, -1 where the cell is missing."""
    if data.N != grid.N:
        raise DimensionMismatchError(f"Dataset has {data.N} variables, grid has {grid.N}")
    bins = np.full(data.values.shape, -1, dtype=np.int64)
    for n in range(data.N):
        seen = ~np.isnan(data.values[:, n])
        bins[seen, n] = digitize(grid, n, data.values[seen, n])
    return bins


def estimate_triple_histograms(
    data: Dataset, grid: DiscretizationGrid, triples: Optional[Sequence[Triple]] = None
) -> TripleHistogramSet:
    """
    Complete-case histogram of every triple j < k < l, each normalized by its own
    count of jointly observed records. Triples without such records are dropped.
    """
    bins = digitize_dataset(data, grid)
    wanted = list(triples) if triples is not None else list(combinations(range(data.N), 3))
    if not wanted:
        raise EmptyStatisticsError(f"{data.N} variables give no third-order statistics")

    results = run_workers([TripleHistogramWorker(tuple(t), bins, grid.I) for t in wanted])

    tensors, counts = {}, {}
    for result in results:
        if not result.ok:
            raise result.error
        tensor, count = result.value
        if count == 0:
            warn("Grid", f"Triple {result.key} has no jointly observed record; dropped.")
            continue
        tensors[result.key] = tensor
        counts[result.key] = count

    if not tensors:
        raise EmptyStatisticsError("No triple has a jointly observed record")
    log("Grid", f"Estimated {len(tensors)} triple histograms from {data.M} records.")
    return TripleHistogramSet(N=data.N, I=grid.I, tensors=tensors, counts=counts)


def estimate_pair_histogram(data: Dataset, grid: DiscretizationGrid, j: int, k: int) -> np.ndarray:
    """I x I complete-case histogram of the pair (j, k)."""
    bins = digitize_dataset(data, grid)
    cols = bins[:, [j, k]]
    seen = np.all(cols >= 0, axis=1)
    if not seen.any():
        raise EmptyStatisticsError(f"Pair ({j}, {k}) has no jointly observed record")
    hist = np.zeros((grid.I, grid.I))
    np.add.at(hist, (cols[seen, 0], cols[seen, 1]), 1.0)
    return hist / seen.sum()
