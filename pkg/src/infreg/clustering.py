"""Joint clustering and registration of permuted noisy images.

Every algorithm here searches transform tuples with image 0 pinned to the
identity (any common transform applied to a whole tuple leaves all the
objectives unchanged, so pinning loses nothing).  Joint argmaxes break ties
by smallest transform tuple in lexicographic order, then smallest partition
in the restricted-growth-string enumeration order.
"""

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _scan
from .model import Channel, SceneModel
from .partitions import (
    Partition,
    bell_number,
    enumerate_partitions,
    from_labels,
    is_finer,
    one_block,
)
from .registration import (
    MAX_TUPLES,
    RegistrationResult,
    register_mm,
)
from .transforms import TransformGroup, apply


@dataclass(frozen=True)
class ThresholdSchedule:
    """Slack gamma_n = c1 * n**(-alpha), shrinking as images grow."""

    c1: float = 1.0
    alpha: float = 0.2

    def __post_init__(self):
        if self.c1 <= 0:
            raise ValueError("c1 must be positive")
        if not 0.0 < self.alpha < 0.25:
            raise ValueError("alpha must lie strictly inside (0, 1/4)")

    def gamma(self, n: int) -> float:
        return self.c1 * float(n) ** (-self.alpha)


@dataclass(frozen=True)
class ClusteringResult:
    partition: Partition | None
    transforms: RegistrationResult | None
    method: str
    status: str = "ok"
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class Dendrogram:
    """Top-down split sequence: level k (1-based) holds exactly k clusters."""

    levels: tuple
    transforms: RegistrationResult
    gains: tuple

    def __post_init__(self):
        m = self.levels[0].m
        if len(self.levels) != m:
            raise ValueError("need one level per cluster count 1..m")
        for k, p in enumerate(self.levels, start=1):
            if len(p) != k:
                raise ValueError(f"level {k} must have {k} clusters")
        for prev, nxt in zip(self.levels, self.levels[1:]):
            if not is_finer(nxt, prev):
                raise ValueError("each level must refine the previous one")

    def partition_at(self, k: int) -> Partition:
        return self.levels[k - 1]


def dendrogram_to_json(d: Dendrogram) -> str:
    return json.dumps(
        [[list(b) for b in p] for p in d.levels], separators=(",", ":")
    )


def _setup(images, group: TransformGroup):
    seqs, r = _scan.image_data(images)
    m = len(seqs)
    if m < 2:
        raise ValueError("need at least two images")
    if m > 12:
        raise ValueError(
            f"partition enumeration capped at m=12 ({bell_number(12)} partitions)"
        )
    total = len(group) ** (m - 1)
    if total > MAX_TUPLES:
        raise ValueError(
            f"search over {len(group)}**{m - 1} transform tuples exceeds the "
            f"{MAX_TUPLES} budget"
        )
    return seqs, r, m, total


def _marginal_entropies(seqs, r: int) -> np.ndarray:
    rows = np.stack([np.bincount(s, minlength=r) for s in seqs])
    return _scan.entropy_rows(rows, seqs[0].size)


def _block_design(partitions, singles, min_size: int = 2):
    """Incidence of blocks (size >= min_size) in each partition, plus the
    per-partition sum of the member-entropy totals of those blocks."""
    subsets = []
    index = {}
    for p in partitions:
        for b in p:
            if len(b) >= min_size and b not in index:
                index[b] = len(subsets)
                subsets.append(b)
    inc = np.zeros((len(partitions), len(subsets)))
    const = np.zeros(len(partitions))
    for i, p in enumerate(partitions):
        for b in p:
            if len(b) >= min_size:
                inc[i, index[b]] = 1.0
                const[i] += sum(singles[j] for j in b)
    return subsets, inc, const


def _refinement_matrix(partitions) -> np.ndarray:
    k = len(partitions)
    mat = np.zeros((k, k), dtype=bool)
    for i, p in enumerate(partitions):
        for j, q in enumerate(partitions):
            mat[i, j] = is_finer(p, q)
    return mat


def _tuple_estimates(flat_index: int, group: TransformGroup, m: int) -> tuple:
    comps = np.unravel_index(flat_index, (len(group),) * (m - 1))
    return (group.identity_index, *(int(c) for c in comps))


def _cluster_by_slack(images, group: TransformGroup, slack: float, method: str, extra: dict):
    """Shared core of the slack-based algorithms.

    Per transform tuple: find the top cluster-information value over all
    partitions, then the finest partition scoring within ``slack`` of it.
    Across tuples: return the densest of the per-tuple partitions.
    """
    seqs, r, m, total = _setup(images, group)
    n = seqs[0].size
    parts = list(enumerate_partitions(m))
    refinement = _refinement_matrix(parts)
    singles = _marginal_entropies(seqs, r)
    subsets, inc, const = _block_design(parts, singles)

    achieved: dict = {}  # partition index -> [first tuple index, tuple count]
    top_objective = -math.inf
    tuples_without_finest = 0
    for start, counts in _scan.iter_tuple_counts(seqs, group, r):
        h_sub = np.stack(
            [
                _scan.entropy_rows(_scan.marginal_counts(counts, r, m, s), n)
                for s in subsets
            ],
            axis=1,
        )
        scores = const[None, :] - h_sub @ inc.T
        top = scores.max(axis=1)
        top_objective = max(top_objective, float(top.max()))
        qualifies = scores >= top[:, None] - slack
        for b in range(counts.shape[0]):
            q = np.flatnonzero(qualifies[b])
            finest_mask = refinement[np.ix_(q, q)].all(axis=1)
            hits = np.flatnonzero(finest_mask)
            if hits.size == 0:
                tuples_without_finest += 1
                continue
            key = int(q[hits[0]])
            if key in achieved:
                achieved[key][1] += 1
            else:
                achieved[key] = [start + b, 1]

    diagnostics = {
        "slack": slack,
        "tuples": total,
        "max_objective": top_objective,
        "tuples_without_finest": tuples_without_finest,
        "candidates": {parts[k]: tuple(v) for k, v in achieved.items()},
        **extra,
    }
    if not achieved:
        return ClusteringResult(None, None, method, "no_finest_candidate", diagnostics)
    keys = list(achieved)
    densest = [d for d in keys if all(refinement[q, d] for q in keys)]
    if not densest:
        return ClusteringResult(
            None, None, method, "incomparable_candidates", diagnostics
        )
    winner = densest[0]
    flat, count = achieved[winner]
    reg = RegistrationResult(
        estimates=_tuple_estimates(flat, group, m),
        reference_index=0,
        objective=None,
        joint_entropy=None,
        tie_flag=count > 1,
        method=method,
    )
    return ClusteringResult(parts[winner], reg, method, "ok", diagnostics)


def cluster_epsilon_like(images, group: TransformGroup, epsilon: float) -> ClusteringResult:
    """Keep every partition within epsilon/2 of the best cluster information,
    take the finest, and pick the densest such partition across tuples."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return _cluster_by_slack(
        images, group, epsilon / 2.0, "epsilon_like", {"epsilon": epsilon}
    )


def cluster_thresholded(
    images, group: TransformGroup, schedule: ThresholdSchedule | None = None
) -> ClusteringResult:
    """Slack algorithm with the sample-size-driven threshold gamma_n."""
    schedule = schedule or ThresholdSchedule()
    n = int(np.asarray(getattr(images[0], "pixels", images[0])).size)
    return _cluster_by_slack(
        images,
        group,
        schedule.gamma(n),
        "thresholded",
        {"c1": schedule.c1, "alpha": schedule.alpha},
    )


def cluster_k_info(images, group: TransformGroup, k: int) -> ClusteringResult:
    """Maximize cluster information jointly over transform tuples and
    partitions with exactly k clusters."""
    seqs, r, m, total = _setup(images, group)
    if not 1 <= k <= m:
        raise ValueError("cluster count must lie in 1..m")
    n = seqs[0].size
    parts = list(enumerate_partitions(m, min_blocks=k, max_blocks=k))
    singles = _marginal_entropies(seqs, r)
    subsets, inc, const = _block_design(parts, singles)

    best = -math.inf
    best_flat = 0
    best_part = 0
    ties = 0
    for start, counts in _scan.iter_tuple_counts(seqs, group, r):
        if subsets:
            h_sub = np.stack(
                [
                    _scan.entropy_rows(_scan.marginal_counts(counts, r, m, s), n)
                    for s in subsets
                ],
                axis=1,
            )
            scores = const[None, :] - h_sub @ inc.T
        else:  # all-singletons partition only
            scores = np.zeros((counts.shape[0], len(parts)))
        chunk_max = float(scores.max())
        if chunk_max > best:
            best = chunk_max
            flat = int(np.argmax(scores))
            best_flat = start + flat // len(parts)
            best_part = flat % len(parts)
            ties = int((scores == chunk_max).sum())
        elif chunk_max == best:
            ties += int((scores == chunk_max).sum())

    reg = RegistrationResult(
        estimates=_tuple_estimates(best_flat, group, m),
        reference_index=0,
        objective=None,
        joint_entropy=None,
        tie_flag=ties > 1,
        method="k_info",
    )
    diagnostics = {"objective": best, "ties": ties, "k": k, "tuples": total}
    return ClusteringResult(parts[best_part], reg, "k_info", "ok", diagnostics)


def _two_way_splits(block: tuple):
    """All 2-block partitions of ``block``, canonical enumeration order."""
    members = tuple(sorted(block))
    for local in enumerate_partitions(len(members), min_blocks=2, max_blocks=2):
        yield tuple(tuple(members[i] for i in b) for b in local)


def cluster_hierarchical(images, group: TransformGroup) -> Dendrogram:
    """Register everything jointly, then split greedily by information gain.

    Level k is obtained from level k-1 by splitting the cluster whose best
    two-way split keeps the most within-cluster dependence.
    """
    seqs, r, m, _ = _setup(images, group)
    n = seqs[0].size
    reg = register_mm(images, group, method="hierarchical")
    aligned = [
        apply(group.elements[e], s) for e, s in zip(reg.estimates, seqs)
    ]
    if r**m > 1 << 24:
        raise ValueError("joint histogram too large for the split table")
    code = np.zeros(n, dtype=np.int64)
    for s in aligned:
        code = code * r + s
    cells = np.bincount(code, minlength=r**m)[None, :]

    entropy_memo: dict = {}

    def block_entropy(subset: tuple) -> float:
        key = tuple(sorted(subset))
        if key not in entropy_memo:
            marg = _scan.marginal_counts(cells, r, m, key)
            entropy_memo[key] = float(_scan.entropy_rows(marg, n)[0])
        return entropy_memo[key]

    def block_multiinformation(subset: tuple) -> float:
        if len(subset) < 2:
            return 0.0
        return sum(block_entropy((j,)) for j in subset) - block_entropy(subset)

    levels = [one_block(m)]
    gains = []
    current = [tuple(range(m))]
    while len(current) < m:
        best = None  # (gain, cluster position, split pair)
        for ci, cluster in enumerate(current):
            if len(cluster) < 2:
                continue
            for split in _two_way_splits(cluster):
                gain = block_multiinformation(split[0]) + block_multiinformation(
                    split[1]
                )
                if best is None or gain > best[0]:
                    best = (gain, ci, split)
        gain, ci, split = best
        current = current[:ci] + list(split) + current[ci + 1 :]
        current = sorted(current, key=lambda b: b[0])
        gains.append(gain)
        levels.append(Partition(tuple(current)))
    return Dendrogram(levels=tuple(levels), transforms=reg, gains=tuple(gains))


def _enumerated_partition_prior(scene_model: SceneModel, m: int) -> dict:
    """P(true partition = P) by summing over all scene-label assignments."""
    prior: dict = {}
    for labels in itertools.product(range(scene_model.scene_count), repeat=m):
        weight = math.prod(scene_model.scene_pmf[a] for a in labels)
        p = from_labels(labels)
        prior[p] = prior.get(p, 0.0) + weight
    return prior


def closed_form_partition_prior(m: int, k: int, scene_count: int) -> float:
    """Reported alongside the enumerated prior for comparison: m!/k! * l**-m
    (uniform scene choice); disagrees with enumeration for some partitions."""
    return math.factorial(m) / math.factorial(k) / scene_count**m


def cluster_map_oracle(
    images,
    group: TransformGroup,
    scene_model: SceneModel,
    channel: Channel,
    mode: str = "map",
) -> ClusteringResult:
    """Exact-model clustering: maximize the marginal likelihood of the
    aligned pixels (per cluster, scenes integrated out), optionally weighted
    by the enumerated partition prior."""
    if mode not in ("ml", "map"):
        raise ValueError("mode must be 'ml' or 'map'")
    if not isinstance(channel, Channel):
        raise TypeError("the oracle is defined for per-image product channels")
    seqs, r, m, total = _setup(images, group)
    if m > 5:
        raise ValueError("oracle capped at m=5")
    if scene_model.scene_count > 3:
        raise ValueError("oracle capped at 3 scenes")
    if channel.r < r:
        raise ValueError("channel alphabet smaller than the images'")
    r = channel.r
    n = seqs[0].size

    parts = list(enumerate_partitions(m))
    subsets, inc, _ = _block_design(parts, np.zeros(m), min_size=1)

    log_liks = []
    forbidden_cols = []
    for s in subsets:
        mix = np.zeros((r,) * len(s))
        for a in range(r):
            piece = np.array(scene_model.prior[a])
            for _ in s:
                piece = np.multiply.outer(piece, channel.matrix[a])
            mix = mix + piece
        with np.errstate(divide="ignore"):
            ll = np.log2(mix.ravel())
        forbidden_cols.append(np.isneginf(ll))
        log_liks.append(np.where(forbidden_cols[-1], 0.0, ll))

    prior = _enumerated_partition_prior(scene_model, m)
    with np.errstate(divide="ignore"):
        log_prior = np.array(
            [np.log2(prior.get(p, 0.0)) for p in parts]
        )

    best = -math.inf
    best_flat = 0
    best_part = 0
    ties = 0
    for start, counts in _scan.iter_tuple_counts(seqs, group, r):
        per_subset = np.empty((counts.shape[0], len(subsets)))
        bad = np.zeros((counts.shape[0], len(subsets)), dtype=bool)
        for si, s in enumerate(subsets):
            marg = _scan.marginal_counts(counts, r, m, s)
            per_subset[:, si] = marg.astype(float) @ log_liks[si]
            if forbidden_cols[si].any():
                bad[:, si] = (marg[:, forbidden_cols[si]] > 0).any(axis=1)
        scores = per_subset @ inc.T
        scores[(bad @ inc.T) > 0] = -np.inf
        if mode == "map":
            scores = scores + log_prior[None, :]
        chunk_max = float(scores.max())
        if chunk_max > best:
            best = chunk_max
            flat = int(np.argmax(scores))
            best_flat = start + flat // len(parts)
            best_part = flat % len(parts)
            ties = int((scores == chunk_max).sum())
        elif chunk_max == best:
            ties += int((scores == chunk_max).sum())

    degenerate = not math.isfinite(best)
    reg = RegistrationResult(
        estimates=_tuple_estimates(best_flat, group, m),
        reference_index=0,
        objective=None,
        joint_entropy=None,
        tie_flag=ties > 1,
        method=f"{mode}_oracle",
        degenerate=degenerate,
    )
    diagnostics = {
        "objective": best,
        "mode": mode,
        "prior_enumerated": prior,
        "prior_closed_form": {
            p: closed_form_partition_prior(m, len(p), scene_model.scene_count)
            for p in parts
        },
        "tuples": total,
    }
    return ClusteringResult(parts[best_part], reg, f"{mode}_oracle", "ok", diagnostics)
