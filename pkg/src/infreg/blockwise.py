"""Registration and clustering at scale: small blocks, shared reference.

Joint searches cost |group|^(images-1), so beyond a handful of images the
flat estimators are hopeless.  Blocks of a chosen size k keep each search
bounded; a reference image carried through every block (for registration)
or a recursive merge of per-block representatives (for clustering) stitches
the local answers into a global one.
"""

import math
from dataclasses import dataclass

from .clustering import (
    ClusteringResult,
    ThresholdSchedule,
    cluster_epsilon_like,
    cluster_k_info,
    cluster_thresholded,
)
from .partitions import Partition
from .registration import RegistrationResult, register_mm
from .transforms import TransformGroup


@dataclass(frozen=True)
class BlockPlan:
    k: int
    blocks: tuple        # image-index tuples; reference appears in each
    reference: int
    c: float | None = None

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("block size must be at least 2")
        if any(self.reference not in b for b in self.blocks):
            raise ValueError("every block must contain the reference")
        rest = [j for b in self.blocks for j in b if j != self.reference]
        if len(rest) != len(set(rest)) or set(rest) != set(range(self.reference)):
            raise ValueError("blocks must cover the non-reference images exactly once")


def block_size_objective(n: int, r: int, group_size: int, c: float, size: int) -> float:
    """Search cost minus estimated per-block reliability, in bits."""
    return (
        size * math.log2(group_size)
        - n * c * r ** (-size) * size**4 * math.log2(r) ** 4
        - math.log2(size - 1)
    )


def choose_block_size(n: int, r: int, group_size: int, c: float = 1.0) -> int:
    """Smallest minimizer of the block-size objective over 2 <= size <= log_r n."""
    if c <= 0:
        raise ValueError("c must be positive")
    top = 2
    while r ** (top + 1) <= n:
        top += 1
    if r * r > n:
        raise ValueError("no admissible block size: need r**2 <= n")
    best_size = None
    best_value = math.inf
    for size in range(2, top + 1):
        value = block_size_objective(n, r, group_size, c, size)
        if value < best_value:
            best_value = value
            best_size = size
    return best_size


def _registration_blocks(m: int, k: int) -> list:
    reference = m - 1
    others = list(range(m - 1))
    return [
        others[i : i + k - 1] + [reference] for i in range(0, len(others), k - 1)
    ]


def register_blockwise(images, group: TransformGroup, k: int) -> RegistrationResult:
    """Register every image to image m-1 by joint runs on reference-sharing
    blocks of at most k images."""
    m = len(images)
    if m < 2:
        raise ValueError("need at least two images")
    if k < 2:
        raise ValueError("block size must be at least 2")
    reference = m - 1
    blocks = _registration_blocks(m, k)
    estimates = [None] * m
    estimates[reference] = group.identity_index
    block_best = {}
    any_tie = False
    for block in blocks:
        members = block[:-1]
        sub = [images[reference]] + [images[j] for j in members]
        reg = register_mm(sub, group, method="mm")
        for pos, j in enumerate(members):
            estimates[j] = reg.estimates[pos + 1]
        block_best[tuple(block)] = float(max(reg.objective))
        any_tie = any_tie or reg.tie_flag
    plan = BlockPlan(k=k, blocks=tuple(tuple(b) for b in blocks), reference=reference)
    return RegistrationResult(
        estimates=tuple(estimates),
        reference_index=reference,
        objective=block_best,
        joint_entropy=None,
        tie_flag=any_tie,
        method="blockwise_mm",
        plan=plan,
    )


def _run_method(images, group, method):
    name, param = method
    if name == "epsilon_like":
        return cluster_epsilon_like(images, group, param)
    if name == "k_info":
        return cluster_k_info(images, group, min(int(param), len(images)))
    if name == "thresholded":
        if param is not None and not isinstance(param, ThresholdSchedule):
            raise TypeError("thresholded expects a ThresholdSchedule")
        return cluster_thresholded(images, group, param)
    raise ValueError(f"unknown blockwise method {name!r}")


def cluster_register_blockwise(images, group: TransformGroup, k: int, method) -> ClusteringResult:
    """Cluster and register many images via rounds of block-local runs.

    Each round partitions the current cluster representatives into blocks of
    at most k, runs the chosen joint algorithm inside each block, and merges
    the clusters the block run joins (lowest-index representative survives;
    member transforms are rebased through the representative chain).  Rounds
    continue until everything fits one block or nothing more merges.  Each
    cluster's transforms end up in the frame of its own representative.
    """
    m = len(images)
    if k < 2:
        raise ValueError("block size must be at least 2")
    clusters = {j: [(j, group.identity_index)] for j in range(m)}
    rounds = []
    singleton_carryups = 0
    block_errors = 0
    while True:
        reps = sorted(clusters)
        if len(reps) == 1:
            break
        final = len(reps) <= k
        blocks = [reps[i : i + k] for i in range(0, len(reps), k)]
        rounds.append(tuple(tuple(b) for b in blocks))
        merged_any = False
        new_clusters = {}
        for block in blocks:
            if len(block) == 1:
                new_clusters[block[0]] = clusters[block[0]]
                singleton_carryups += 1
                continue
            result = _run_method([images[j] for j in block], group, method)
            if not result.ok:
                block_errors += 1
                for rep in block:
                    new_clusters[rep] = clusters[rep]
                continue
            est = result.transforms.estimates
            for local_block in result.partition:
                if len(local_block) == 1 and len(block) > 1:
                    singleton_carryups += 1
                if len(local_block) > 1:
                    merged_any = True
                anchor = local_block[0]
                e_anchor = est[anchor]
                merged = []
                for li in local_block:
                    rep = block[li]
                    hop = group.compose_indices(
                        est[li], group.inverse_index(e_anchor)
                    )
                    merged.extend(
                        (u, group.compose_indices(f, hop))
                        for u, f in clusters[rep]
                    )
                new_clusters[block[anchor]] = sorted(merged)
        clusters = new_clusters
        if final or not merged_any:
            break

    blocks_out = []
    estimates = [None] * m
    for rep in sorted(clusters):
        members = tuple(sorted(u for u, _ in clusters[rep]))
        blocks_out.append(members)
        for u, f in clusters[rep]:
            estimates[u] = f
    partition = Partition(tuple(blocks_out))
    reg = RegistrationResult(
        estimates=tuple(estimates),
        reference_index=0,
        objective=None,
        joint_entropy=None,
        tie_flag=False,
        method="blockwise_" + method[0],
        plan=None,
    )
    diagnostics = {
        "rounds": tuple(rounds),
        "singleton_carryups": singleton_carryups,
        "block_errors": block_errors,
        "k": k,
        "method": method[0],
    }
    return ClusteringResult(
        partition, reg, "blockwise_" + method[0], "ok", diagnostics
    )
