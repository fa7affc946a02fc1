"""Information functionals over empirical joint histograms and exact pmfs.

Every functional takes either a :class:`JointHistogram` (plug-in estimate
from aligned pixel tuples) or a joint pmf as an ndarray whose k-th axis is
the k-th coordinate.  All values are in bits; 0·log 0 = 0.
"""

from dataclasses import dataclass

import numpy as np

from .partitions import (
    IncomparableCandidates,
    Partition,
    bell_number,
    enumerate_partitions,
    finest,
)
from .transforms import apply

TOL_BITS = 1e-9

_NONNEG_KINDS = {"entropy", "mi", "multiinformation", "cluster_info"}


class NoFinestMinimizer(Exception):
    """The near-minimal partitions are pairwise incomparable under refinement."""

    def __init__(self, minimizers):
        super().__init__(
            "no partition in the minimizer set refines all the others"
        )
        self.minimizers = tuple(minimizers)


@dataclass(frozen=True)
class InfoValue:
    value: float
    kind: str

    def __post_init__(self):
        if self.kind in _NONNEG_KINDS and self.value < -1e-12:
            raise ValueError(f"{self.kind} came out negative: {self.value}")

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class JointHistogram:
    """Counts of aligned pixel tuples; ``counts[v1,...,vm]`` over the alphabets."""

    counts: np.ndarray
    n: int

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.sum() != self.n:
            raise ValueError("counts must sum to the sample count")
        counts = counts.copy()
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def dims(self) -> list:
        return list(self.counts.shape)

    @property
    def m(self) -> int:
        return self.counts.ndim


def _pixels(x) -> np.ndarray:
    return np.asarray(getattr(x, "pixels", x))


def joint_histogram(images, transforms=None, alphabet_size=None) -> JointHistogram:
    """Histogram of tuples (x1[t1(i)], ..., xm[tm(i)]) over pixel index i."""
    seqs = [_pixels(x) for x in images]
    n = len(seqs[0])
    if any(len(s) != n for s in seqs):
        raise ValueError("images must have equal length")
    if transforms is not None:
        if len(transforms) != len(seqs):
            raise ValueError("one transform per image required")
        seqs = [apply(t, s) for t, s in zip(transforms, seqs)]
    if alphabet_size is None:
        rs = [getattr(x, "r", None) for x in images]
        if any(r is None for r in rs):
            rs = [int(s.max()) + 1 for s in seqs]
        dims = [int(r) for r in rs]
    else:
        dims = [int(alphabet_size)] * len(seqs)
    for s, r in zip(seqs, dims):
        if s.min() < 0 or s.max() >= r:
            raise ValueError("pixel value outside alphabet")
    flat = np.ravel_multi_index(tuple(np.asarray(s) for s in seqs), dims)
    counts = np.bincount(flat, minlength=int(np.prod(dims))).reshape(dims)
    return JointHistogram(counts=counts, n=n)


def _as_table(obj):
    """(weights, total) with entropy = log2(total) - sum(w log2 w)/total."""
    if isinstance(obj, JointHistogram):
        return obj.counts, float(obj.n)
    p = np.asarray(obj, dtype=float)
    if p.size == 0:
        raise ValueError("empty distribution")
    if abs(p.sum() - 1.0) > 1e-9 or (p < -1e-15).any():
        raise ValueError("exact input must be a probability mass function")
    return p, 1.0


def _marginal(table: np.ndarray, subset) -> np.ndarray:
    subset = sorted(set(int(i) for i in subset))
    if not subset:
        raise ValueError("subset must be nonempty")
    if subset[0] < 0 or subset[-1] >= table.ndim:
        raise IndexError("coordinate out of range")
    drop = tuple(ax for ax in range(table.ndim) if ax not in subset)
    return table.sum(axis=drop) if drop else table


def _entropy_of(table: np.ndarray, total: float) -> float:
    w = np.asarray(table, dtype=float).ravel()
    w = w[w > 0]
    return float(np.log2(total) - np.dot(w, np.log2(w)) / total)


def entropy(obj, subset=None) -> InfoValue:
    """Shannon entropy in bits of the (marginalized) distribution."""
    table, total = _as_table(obj)
    if subset is not None:
        table = _marginal(table, subset)
    return InfoValue(max(_entropy_of(table, total), 0.0), "entropy")


def mutual_information(obj, i: int, j: int) -> InfoValue:
    table, total = _as_table(obj)
    hi = _entropy_of(_marginal(table, [i]), total)
    hj = _entropy_of(_marginal(table, [j]), total)
    hij = _entropy_of(_marginal(table, [i, j]), total)
    return InfoValue(hi + hj - hij, "mi")


def multiinformation(obj, subset=None) -> InfoValue:
    """Sum of coordinate entropies minus the joint entropy."""
    table, total = _as_table(obj)
    if subset is not None:
        table = _marginal(table, subset)
    if table.ndim < 2:
        raise ValueError("multiinformation needs at least 2 coordinates")
    marg = sum(_entropy_of(_marginal(table, [i]), total) for i in range(table.ndim))
    return InfoValue(marg - _entropy_of(table, total), "multiinformation")


def partition_information(obj, partition: Partition) -> InfoValue:
    """[sum of block entropies - joint entropy] / (number of blocks - 1)."""
    table, total = _as_table(obj)
    if partition.m != table.ndim:
        raise ValueError("partition does not match coordinate count")
    if len(partition) <= 1:
        raise ValueError("partition information needs at least 2 blocks")
    blocks = sum(_entropy_of(_marginal(table, b), total) for b in partition)
    joint = _entropy_of(table, total)
    return InfoValue((blocks - joint) / (len(partition) - 1), "partition_info")


def cluster_information(obj, partition: Partition) -> InfoValue:
    """Sum of within-block multiinformations; singleton blocks contribute 0."""
    table, total = _as_table(obj)
    if partition.m != table.ndim:
        raise ValueError("partition does not match coordinate count")
    val = 0.0
    for b in partition:
        if len(b) < 2:
            continue
        sub = _marginal(table, b)
        marg = sum(_entropy_of(_marginal(table, [i]), total) for i in b)
        val += marg - _entropy_of(sub, total)
    return InfoValue(val, "cluster_info")


@dataclass(frozen=True)
class FundamentalResult:
    mpi: InfoValue
    partition: Partition
    minimizers: tuple


def fundamental_partition(obj, tol: float = TOL_BITS) -> FundamentalResult:
    """Minimize partition information over all multi-block partitions.

    Returns the minimum value, the finest partition among minimizers (within
    ``tol`` bits of the minimum), and the whole minimizer set.  Raises
    :class:`NoFinestMinimizer` when the minimizer set has no finest element.
    """
    table, total = _as_table(obj)
    m = table.ndim
    if m < 2:
        raise ValueError("need at least 2 coordinates")
    if m > 12:
        raise ValueError(
            f"partition enumeration capped at m=12 ({bell_number(12)} partitions); got m={m}"
        )
    joint = _entropy_of(table, total)
    coord = [_entropy_of(_marginal(table, [i]), total) for i in range(m)]
    block_h = {tuple([i]): h for i, h in zip(range(m), coord)}

    def block_entropy(b: tuple) -> float:
        if b not in block_h:
            block_h[b] = _entropy_of(_marginal(table, b), total)
        return block_h[b]

    values = []
    for p in enumerate_partitions(m, min_blocks=2):
        ip = (sum(block_entropy(b) for b in p) - joint) / (len(p) - 1)
        values.append((ip, p))
    mpi = min(v for v, _ in values)
    minimizers = tuple(p for v, p in values if v <= mpi + tol)
    try:
        best = finest(minimizers)
    except IncomparableCandidates:
        raise NoFinestMinimizer(minimizers) from None
    return FundamentalResult(
        mpi=InfoValue(mpi, "partition_info"), partition=best, minimizers=minimizers
    )
