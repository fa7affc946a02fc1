"""Pixel-index permutations, their group structure, and their action on images.

Conventions used throughout the package:

* indices are 0-based,
* ``apply(p, x)[i] == x[p(i)]``,
* ``compose(p, q)(i) == p(q(i))``, so ``apply(p, apply(q, x)) == apply(compose(q, p), x)``.
"""

from dataclasses import dataclass, field
import numpy as np


@dataclass(frozen=True)
class Transform:
    """A permutation of {0, ..., n-1}, stored as ``mapping[i] = p(i)``."""

    mapping: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mapping, dtype=np.intp)
        if m.ndim != 1 or not np.array_equal(np.sort(m), np.arange(m.size)):
            raise ValueError("mapping is not a permutation of 0..n-1")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "mapping", m)

    @property
    def n(self) -> int:
        return int(self.mapping.size)

    def __eq__(self, other):
        return isinstance(other, Transform) and np.array_equal(self.mapping, other.mapping)

    def __hash__(self):
        return hash(self.mapping.tobytes())

    def __repr__(self):
        return f"Transform({self.mapping.tolist()})"


@dataclass(frozen=True)
class CycleStructure:
    """Cycle decomposition of a permutation.

    ``cycles`` lists only the cycles of length >= 2; fixed points make up
    ``identity_block``.  ``simple`` means a single cycle covering everything.
    """

    cycles: tuple
    identity_block: tuple
    cycle_count: int
    simple: bool


def identity(n: int) -> Transform:
    return Transform(np.arange(n))


def compose(p: Transform, q: Transform) -> Transform:
    """Return p . q, i.e. the map i -> p(q(i))."""
    if p.n != q.n:
        raise ValueError(f"length mismatch: {p.n} != {q.n}")
    return Transform(p.mapping[q.mapping])


def inverse(p: Transform) -> Transform:
    inv = np.empty(p.n, dtype=np.intp)
    inv[p.mapping] = np.arange(p.n)
    return Transform(inv)


def apply(p: Transform, x: np.ndarray) -> np.ndarray:
    """Transform an image: output pixel i is ``x[p(i)]``."""
    x = np.asarray(x)
    if x.shape[0] != p.n:
        raise ValueError(f"length mismatch: image {x.shape[0]}, transform {p.n}")
    return x[p.mapping]


def cycle_structure(p: Transform) -> CycleStructure:
    seen = np.zeros(p.n, dtype=bool)
    cycles = []
    fixed = []
    for start in range(p.n):
        if seen[start]:
            continue
        cyc = [start]
        seen[start] = True
        j = int(p.mapping[start])
        while j != start:
            cyc.append(j)
            seen[j] = True
            j = int(p.mapping[j])
        if len(cyc) == 1:
            fixed.append(start)
        else:
            cycles.append(tuple(cyc))
    kappa = len(cycles)
    return CycleStructure(
        cycles=tuple(cycles),
        identity_block=tuple(fixed),
        cycle_count=kappa,
        simple=(kappa == 1 and not fixed),
    )


def is_non_overlapping(p: Transform, q: Transform) -> bool:
    """True iff p(i) != q(i) for every index i."""
    if p.n != q.n:
        raise ValueError(f"length mismatch: {p.n} != {q.n}")
    return bool(np.all(p.mapping != q.mapping))


@dataclass(frozen=True)
class TransformGroup:
    """A finite commutative group of transforms with a canonical element order.

    The element order is the construction order and is the tie-breaking order
    used by every argmax in the package.  ``matrix[t]`` is the mapping of
    element ``t``, so ``x[matrix]`` yields every transformed copy at once.
    """

    elements: tuple
    identity_index: int
    kind: str = "custom"
    dims: tuple = ()
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        lut = {t.mapping.tobytes(): i for i, t in enumerate(self.elements)}
        object.__setattr__(self, "_index", lut)
        mat = np.stack([t.mapping for t in self.elements])
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)

    def __len__(self):
        return len(self.elements)

    @property
    def n(self) -> int:
        return self.elements[0].n

    def index_of(self, p: Transform) -> int:
        try:
            return self._index[p.mapping.tobytes()]
        except KeyError:
            raise KeyError("transform is not a group element") from None

    def compose_indices(self, i: int, j: int) -> int:
        return self.index_of(compose(self.elements[i], self.elements[j]))

    def inverse_index(self, i: int) -> int:
        return self.index_of(inverse(self.elements[i]))


@dataclass(frozen=True)
class GroupReport:
    closure: bool
    commutativity: bool
    unique_identity: bool
    inverses: bool

    @property
    def ok(self) -> bool:
        return self.closure and self.commutativity and self.unique_identity and self.inverses


def build_group(kind: str, dims, order: int | None = None) -> TransformGroup:
    """Construct a standard commutative transform group.

    ``ring``: the ``n`` cyclic shifts of a length-``n`` ring (element ``k``
    maps ``i -> (i + k) mod n``), identity at index 0.  Passing ``order=g``
    with ``g | n`` restricts to the cyclic subgroup of ``g`` shifts by
    multiples of ``n/g`` — any commutative subgroup slots into the rest of
    the package unchanged, and a small subgroup keeps joint searches over
    transform tuples within the enumeration guards.

    ``torus``: all ``h*w`` translations of an ``h x w`` grid stored row-major.
    """
    if kind == "ring":
        n = int(dims)
        if n < 1:
            raise ValueError("ring size must be >= 1")
        if order is None:
            order = n
        if order < 1 or n % order != 0:
            raise ValueError(f"subgroup order {order} does not divide n={n}")
        step = n // order
        base = np.arange(n)
        elems = tuple(Transform((base + k * step) % n) for k in range(order))
        return TransformGroup(elements=elems, identity_index=0, kind="ring", dims=(n,))
    if kind == "torus":
        h, w = (int(d) for d in dims)
        if h < 1 or w < 1:
            raise ValueError("torus dims must be positive")
        if order is not None:
            raise ValueError("order restriction is only supported for ring groups")
        rows, cols = np.divmod(np.arange(h * w), w)
        elems = []
        for a in range(h):
            for b in range(w):
                elems.append(Transform(((rows + a) % h) * w + (cols + b) % w))
        return TransformGroup(
            elements=tuple(elems), identity_index=0, kind="torus", dims=(h, w)
        )
    raise ValueError(f"unknown group kind {kind!r}")


def verify_group(g: TransformGroup) -> GroupReport:
    """Check closure, commutativity, unique identity, and inverse membership."""
    keys = {t.mapping.tobytes() for t in g.elements}
    n = g.n
    ident = np.arange(n).tobytes()
    identities = sum(1 for t in g.elements if t.mapping.tobytes() == ident)
    unique_identity = identities == 1 and g.elements[g.identity_index].mapping.tobytes() == ident

    closure = True
    commutativity = True
    for p in g.elements:
        for q in g.elements:
            pq = p.mapping[q.mapping]
            if pq.tobytes() not in keys:
                closure = False
            if not np.array_equal(pq, q.mapping[p.mapping]):
                commutativity = False
        if not (closure and commutativity):
            break

    inverses = all(inverse(p).mapping.tobytes() in keys for p in g.elements)
    return GroupReport(closure, commutativity, unique_identity, inverses)
