"""Partitions of {0, ..., m-1}: canonical form, enumeration, refinement order.

Canonical form sorts each block internally and orders blocks by smallest
element.  Enumeration walks restricted-growth strings in lexicographic
order, which fixes the tie-breaking order used by the clustering searches.
"""

from dataclasses import dataclass
from functools import lru_cache


class IncomparableCandidates(Exception):
    """Raised when a finest/densest element is requested of a set that has none."""


@dataclass(frozen=True)
class Partition:
    blocks: tuple

    def __post_init__(self):
        blocks = tuple(tuple(sorted(b)) for b in self.blocks)
        blocks = tuple(sorted(blocks, key=lambda b: b[0]))
        if not blocks or any(len(b) == 0 for b in blocks):
            raise ValueError("blocks must be nonempty")
        flat = sorted(i for b in blocks for i in b)
        if flat != list(range(len(flat))):
            raise ValueError("blocks must partition 0..m-1")
        object.__setattr__(self, "blocks", blocks)

    @property
    def m(self) -> int:
        return sum(len(b) for b in self.blocks)

    def __len__(self):
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def block_of(self, i: int) -> tuple:
        for b in self.blocks:
            if i in b:
                return b
        raise KeyError(i)

    def labels(self) -> tuple:
        """Per-element block index (blocks in canonical order)."""
        lab = [0] * self.m
        for k, b in enumerate(self.blocks):
            for i in b:
                lab[i] = k
        return tuple(lab)

    def __repr__(self):
        inner = "|".join(",".join(str(i) for i in b) for b in self.blocks)
        return f"Partition({inner})"


def singletons(m: int) -> Partition:
    return Partition(tuple((i,) for i in range(m)))


def one_block(m: int) -> Partition:
    return Partition((tuple(range(m)),))


def from_labels(labels) -> Partition:
    groups = {}
    for i, lab in enumerate(labels):
        groups.setdefault(lab, []).append(i)
    return Partition(tuple(tuple(g) for g in groups.values()))


@lru_cache(maxsize=None)
def bell_number(m: int) -> int:
    if m == 0:
        return 1
    # Bell triangle
    row = [1]
    for _ in range(m - 1):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[-1]


def enumerate_partitions(m: int, min_blocks: int = 1, max_blocks: int | None = None):
    """Yield all partitions of [m] as restricted-growth strings in lex order."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if max_blocks is None:
        max_blocks = m
    a = [0] * m
    while True:
        k = max(a) + 1
        if min_blocks <= k <= max_blocks:
            yield from_labels(a)
        # advance the restricted-growth string
        i = m - 1
        while i > 0 and a[i] >= max(a[:i]) + 1:
            a[i] = 0
            i -= 1
        if i == 0:
            return
        a[i] += 1


def is_finer(p: Partition, q: Partition) -> bool:
    """True iff every block of p lies inside some block of q (p refines q)."""
    qlab = q.labels()
    for b in p.blocks:
        ref = qlab[b[0]]
        if any(qlab[i] != ref for i in b[1:]):
            return False
    return True


def is_coarser(p: Partition, q: Partition) -> bool:
    return is_finer(q, p)


def finest(parts) -> Partition:
    """The element of ``parts`` finer than every other; raises if none exists."""
    parts = list(parts)
    if not parts:
        raise ValueError("empty candidate set")
    for p in parts:
        if all(is_finer(p, q) for q in parts):
            return p
    raise IncomparableCandidates("no candidate refines every other")


def densest(parts) -> Partition:
    """The element of ``parts`` coarser than every other; raises if none exists."""
    parts = list(parts)
    if not parts:
        raise ValueError("empty candidate set")
    for p in parts:
        if all(is_finer(q, p) for q in parts):
            return p
    raise IncomparableCandidates("no candidate is refined by every other")
