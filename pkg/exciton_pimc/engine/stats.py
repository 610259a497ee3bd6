# exciton_pimc/engine/stats.py
"""Batch means, Ljung-Box and nuclear-density histograms."""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.special import gammainc, gammaln, ndtri

from exciton_pimc.constants import (
    CONFIDENCE_Z,
    HISTOGRAM_BINS,
    HISTOGRAM_PADDING,
    LJUNG_BOX_LAGS,
    MIN_BATCH_SIZE,
    TARGET_BATCH_COUNT,
)
from exciton_pimc.errors import DegenerateSeriesError, EmptyHistogramError, InsufficientBatchesError


def default_batch_size(n_samples: int) -> int:
    return max(int(n_samples) // TARGET_BATCH_COUNT, MIN_BATCH_SIZE)


class MatrixAccumulator:
    """Streaming non-overlapping batch means of a matrix-valued series."""

    def __init__(self, shape: Sequence[int], batch_size: int):
        if batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        self.shape = tuple(shape)
        self.batch_size = int(batch_size)
        self.total_count = 0
        self.total_sum = np.zeros(self.shape)
        self._partial_sum = np.zeros(self.shape)
        self._partial_count = 0
        self._batches: list = []

    @property
    def n_batches(self) -> int:
        return len(self._batches)

    @property
    def batch_means(self) -> NDArray[np.float64]:
        if not self._batches:
            return np.empty((0,) + self.shape)
        return np.array(self._batches)

    def push(self, value) -> "MatrixAccumulator":
        value = np.asarray(value, dtype=float)
        if value.shape != self.shape:
            raise ValueError(f"expected shape {self.shape}, got {value.shape}")
        self.total_count += 1
        self.total_sum += value
        self._partial_sum += value
        self._partial_count += 1
        if self._partial_count == self.batch_size:
            self._batches.append(self._partial_sum / self.batch_size)
            self._partial_sum = np.zeros(self.shape)
            self._partial_count = 0
        return self

    def mean(self) -> Optional[NDArray[np.float64]]:
        if self.total_count == 0:
            return None
        return self.total_sum / self.total_count

    def merge(self, other: "MatrixAccumulator") -> "MatrixAccumulator":
        """Completed batches of both, partial sums pooled but left open."""
        if other.shape != self.shape or other.batch_size != self.batch_size:
            raise ValueError("accumulators differ in shape or batch size")
        merged = MatrixAccumulator(self.shape, self.batch_size)
        merged.total_count = self.total_count + other.total_count
        merged.total_sum = self.total_sum + other.total_sum
        merged._partial_sum = self._partial_sum + other._partial_sum
        merged._partial_count = self._partial_count + other._partial_count
        merged._batches = list(self._batches) + list(other._batches)
        return merged

    def coarsened(self) -> "MatrixAccumulator":
        """Same samples with batch size doubled: adjacent batch means averaged in pairs.

        An unpaired last batch rejoins the open partial batch.
        """
        coarse = MatrixAccumulator(self.shape, 2 * self.batch_size)
        coarse.total_count = self.total_count
        coarse.total_sum = self.total_sum.copy()
        coarse._partial_sum = self._partial_sum.copy()
        coarse._partial_count = self._partial_count
        batches = self.batch_means
        n_pairs = len(batches) // 2
        coarse._batches = list(0.5 * (batches[0 : 2 * n_pairs : 2] + batches[1 : 2 * n_pairs : 2]))
        if len(batches) % 2:
            coarse._partial_sum = coarse._partial_sum + self.batch_size * batches[-1]
            coarse._partial_count += self.batch_size
        return coarse


def push_matrix(acc: MatrixAccumulator, rho) -> MatrixAccumulator:
    return acc.push(rho)


@dataclass(frozen=True)
class BatchEstimate:
    mean: NDArray[np.float64]
    stderr: NDArray[np.float64]
    n_batches: int

    @property
    def ci_low(self):
        return self.mean - CONFIDENCE_Z * self.stderr

    @property
    def ci_high(self):
        return self.mean + CONFIDENCE_Z * self.stderr


def batch_means_stderr(acc: MatrixAccumulator) -> BatchEstimate:
    batches = acc.batch_means
    if len(batches) < 2:
        raise InsufficientBatchesError(f"need at least 2 completed batches, have {len(batches)}")
    return BatchEstimate(
        mean=batches.mean(axis=0),
        stderr=batches.std(axis=0, ddof=1) / np.sqrt(len(batches)),
        n_batches=len(batches),
    )


def chi2_quantile(p: float, dof: int) -> float:
    """Chi-square quantile: Wilson-Hilferty start, five Newton steps on the CDF."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    if dof < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {dof}")
    k = float(dof)
    a = 2.0 / (9.0 * k)
    base = 1.0 - a + ndtri(p) * np.sqrt(a)
    x = k * base**3 if base > 0 else 1e-8 * k
    half_k = 0.5 * k
    log_norm = half_k * np.log(2.0) + gammaln(half_k)
    for _ in range(5):
        pdf = np.exp((half_k - 1.0) * np.log(x) - 0.5 * x - log_norm)
        if pdf <= 0.0 or not np.isfinite(pdf):
            break
        step = (gammainc(half_k, 0.5 * x) - p) / pdf
        x = x - step if x - step > 0 else 0.5 * x
    return float(x)


@dataclass(frozen=True)
class LjungBoxResult:
    q: float
    threshold: float
    reject: bool


def ljung_box_q(series, h: int = LJUNG_BOX_LAGS, significance: float = 0.05) -> LjungBoxResult:
    x = np.asarray(series, dtype=float).reshape(-1)
    n = x.size
    if h < 1 or n <= h:
        raise ValueError(f"series of length {n} too short for {h} lags")
    centred = x - x.mean()
    denom = float(np.dot(centred, centred))
    if denom <= 0.0:
        raise DegenerateSeriesError("series has zero variance")
    lags = np.arange(1, h + 1)
    r = np.array([np.dot(centred[k:], centred[:-k]) / denom for k in lags])
    q = float(n * (n + 2) * np.sum(r**2 / (n - lags)))
    threshold = chi2_quantile(1.0 - significance, h)
    return LjungBoxResult(q=q, threshold=threshold, reject=q > threshold)


def ljung_box_elements(batch_means: NDArray[np.float64], h: int = LJUNG_BOX_LAGS):
    """Per-element Ljung-Box over a (B, n, n) batch-means series.

    Returns (q, reject) arrays; degenerate elements get NaN and False.
    """
    batch_means = np.asarray(batch_means, dtype=float)
    shape = batch_means.shape[1:]
    q = np.full(shape, np.nan)
    reject = np.zeros(shape, dtype=bool)
    for index in np.ndindex(*shape):
        try:
            result = ljung_box_q(batch_means[(slice(None),) + index], h)
        except DegenerateSeriesError:
            continue
        q[index] = result.q
        reject[index] = result.reject
    return q, reject


@dataclass(frozen=True)
class Rebatching:
    matrix: MatrixAccumulator
    q: Optional[NDArray[np.float64]]
    reject: Optional[NDArray[np.bool_]]
    doublings: int


def rebatch_until_uncorrelated(acc: MatrixAccumulator, h: int = LJUNG_BOX_LAGS) -> Rebatching:
    """Double the batch size until no element fails Ljung-Box.

    Stops early when another doubling would leave h or fewer batches; the
    last tested batching is returned with its (possibly rejecting) result.
    ``q`` is None when even the starting batching is too short to test.
    """
    doublings = 0
    if acc.n_batches <= h:
        return Rebatching(acc, None, None, doublings)
    while True:
        q, reject = ljung_box_elements(acc.batch_means, h)
        if not np.any(reject) or acc.n_batches // 2 <= h:
            return Rebatching(acc, q, reject, doublings)
        acc = acc.coarsened()
        doublings += 1


class HistogramGrid:
    """Fixed-bounds histogram over phonon coordinates, any dimension."""

    def __init__(self, lo, hi, bins):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        self.bins = np.broadcast_to(np.atleast_1d(np.asarray(bins, dtype=int)), self.lo.shape).copy()
        if np.any(self.hi <= self.lo) or np.any(self.bins < 1):
            raise ValueError("histogram needs hi > lo and at least one bin per dimension")
        self.counts = np.zeros(tuple(self.bins), dtype=np.int64)
        self.total = 0
        self.outside = 0

    @classmethod
    def from_samples(cls, samples, bins=HISTOGRAM_BINS, padding=HISTOGRAM_PADDING) -> "HistogramGrid":
        """Bounds from the sample range widened by ``padding`` of that range on each side."""
        samples = np.atleast_2d(np.asarray(samples, dtype=float))
        lo, hi = samples.min(axis=0), samples.max(axis=0)
        span = hi - lo
        span = np.where(span > 0, span, 1.0)
        return cls(lo - padding * span, hi + padding * span, bins)

    @property
    def widths(self):
        return (self.hi - self.lo) / self.bins

    @property
    def bin_volume(self) -> float:
        return float(np.prod(self.widths))

    def centers(self):
        return [lo + (np.arange(b) + 0.5) * w for lo, b, w in zip(self.lo, self.bins, self.widths)]

    def push_many(self, points) -> "HistogramGrid":
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.lo.size:
            raise ValueError(f"expected {self.lo.size}-dimensional points")
        inside = np.all((points >= self.lo) & (points <= self.hi), axis=1)
        self.total += len(points)
        self.outside += int(np.count_nonzero(~inside))
        idx = np.floor((points[inside] - self.lo) / self.widths).astype(int)
        idx = np.minimum(idx, self.bins - 1)
        np.add.at(self.counts, tuple(idx.T), 1)
        return self

    def normalize(self) -> NDArray[np.float64]:
        inside = self.total - self.outside
        if inside <= 0:
            raise EmptyHistogramError("histogram holds no in-bound samples")
        return self.counts / (inside * self.bin_volume)

    def merge(self, other: "HistogramGrid") -> "HistogramGrid":
        if not (np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)
                and np.array_equal(self.bins, other.bins)):
            raise ValueError("histograms differ in bounds or bins")
        merged = HistogramGrid(self.lo, self.hi, self.bins)
        merged.counts = self.counts + other.counts
        merged.total = self.total + other.total
        merged.outside = self.outside + other.outside
        return merged


def push_histogram(grid: HistogramGrid, r) -> HistogramGrid:
    return grid.push_many(np.atleast_2d(r))


def normalize(grid: HistogramGrid) -> NDArray[np.float64]:
    return grid.normalize()
