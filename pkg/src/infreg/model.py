"""Generative model: i.i.d. scenes, memoryless corruption, random transforms.

A scene is a length-n sequence over a finite alphabet.  Each observed image
picks one of the scenes, passes through a memoryless channel (jointly with
the other images of its cluster), and is then permuted by a group element.
The module also computes exact single-pixel joint laws for oracle checks.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .partitions import Partition, from_labels
from .transforms import Transform, TransformGroup, apply


@dataclass(frozen=True)
class Alphabet:
    size: int

    def __post_init__(self):
        if self.size < 2:
            raise ValueError("alphabet needs at least 2 symbols")


@dataclass(frozen=True)
class Image:
    pixels: np.ndarray
    r: int

    def __post_init__(self):
        pix = np.asarray(self.pixels, dtype=np.int64)
        if pix.ndim != 1 or pix.size < 1:
            raise ValueError("pixels must be a nonempty 1-d array")
        if pix.min() < 0 or pix.max() >= self.r:
            raise ValueError("pixel value outside alphabet")
        pix = pix.copy()
        pix.flags.writeable = False
        object.__setattr__(self, "pixels", pix)

    @property
    def n(self) -> int:
        return int(self.pixels.size)


def _check_pmf(p, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if (p < 0).any() or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError(f"{name} must be a pmf (nonnegative, sum 1)")
    return p


@dataclass(frozen=True)
class SceneModel:
    prior: np.ndarray          # pmf over pixel values
    scene_count: int           # number of independent scenes
    scene_pmf: np.ndarray      # how images pick their scene

    def __post_init__(self):
        prior = _check_pmf(self.prior, "prior")
        scene_pmf = _check_pmf(self.scene_pmf, "scene_pmf")
        if self.scene_count < 1 or len(scene_pmf) != self.scene_count:
            raise ValueError("scene_pmf length must equal scene_count >= 1")
        for arr in (prior, scene_pmf):
            arr.flags.writeable = False
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "scene_pmf", scene_pmf)

    @property
    def r(self) -> int:
        return len(self.prior)


def uniform_scene_model(r: int, scene_count: int) -> SceneModel:
    return SceneModel(
        prior=np.full(r, 1.0 / r),
        scene_count=scene_count,
        scene_pmf=np.full(scene_count, 1.0 / scene_count),
    )


@dataclass(frozen=True)
class Channel:
    """Row-stochastic matrix; matrix[x, y] = P(output y | input x)."""

    matrix: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.matrix, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("channel matrix must be square")
        if (w < 0).any() or np.abs(w.sum(axis=1) - 1.0).max() > 1e-12:
            raise ValueError("channel rows must be pmfs")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "matrix", w)

    @property
    def r(self) -> int:
        return self.matrix.shape[0]


def make_channel(kind: str, alpha: float | None = None, r: int = 2, matrix=None) -> Channel:
    """Build a channel: "bsc" (r=2), "uniform_flip", or "explicit"."""
    if kind == "bsc":
        if r != 2:
            raise ValueError("bsc is a binary channel")
        if alpha is None or not 0.0 <= alpha <= 1.0:
            raise ValueError("bsc needs a crossover in [0, 1]")
        return Channel(np.array([[1 - alpha, alpha], [alpha, 1 - alpha]]))
    if kind == "uniform_flip":
        if alpha is None or not 0.0 <= alpha <= 1.0:
            raise ValueError("uniform_flip needs a flip mass in [0, 1]")
        if r < 2:
            raise ValueError("alphabet needs at least 2 symbols")
        w = np.full((r, r), alpha / (r - 1))
        np.fill_diagonal(w, 1 - alpha)
        return Channel(w)
    if kind == "explicit":
        if matrix is None:
            raise ValueError("explicit channel needs a matrix")
        return Channel(np.asarray(matrix, dtype=float))
    raise ValueError(f"unknown channel kind: {kind!r}")


def cascade(w1: Channel, w2: Channel) -> Channel:
    """End-to-end channel of feeding w1's output into w2."""
    if w1.r != w2.r:
        raise ValueError("alphabet mismatch")
    return Channel(w1.matrix @ w2.matrix)


@dataclass(frozen=True)
class JointChannel:
    """P(y_1..y_K | x): tensor of shape (r, r, ..., r) with K+1 axes."""

    tensor: np.ndarray
    kind: str = "explicit"

    def __post_init__(self):
        t = np.asarray(self.tensor, dtype=float)
        r = t.shape[0]
        if t.ndim < 2 or any(s != r for s in t.shape):
            raise ValueError("joint channel tensor must be (r,)*(K+1)")
        if (t < 0).any() or np.abs(t.reshape(r, -1).sum(axis=1) - 1.0).max() > 1e-12:
            raise ValueError("each conditional slice must sum to 1")
        t = t.copy()
        t.flags.writeable = False
        object.__setattr__(self, "tensor", t)

    @property
    def r(self) -> int:
        return self.tensor.shape[0]

    @property
    def arity(self) -> int:
        return self.tensor.ndim - 1


def make_joint_channel(kind: str, channels) -> JointChannel:
    """"product": outputs independent given x.  "degraded": a chain where
    output k is output k-1 passed through the k-th channel (the first channel
    reads x directly); the two-channel case is P(y,z|x) = W1(y|x) W2(z|y)."""
    channels = list(channels)
    if not channels:
        raise ValueError("need at least one channel")
    r = channels[0].r
    if any(w.r != r for w in channels):
        raise ValueError("alphabet mismatch")
    k = len(channels)
    if r ** (k + 1) > 2**24:
        raise ValueError("joint channel tensor too large")
    if kind == "product":
        t = np.ones((r,) * (k + 1))
        for pos, w in enumerate(channels):
            shape = [1] * (k + 1)
            shape[0] = r
            shape[pos + 1] = r
            t = t * w.matrix.reshape(shape)
        return JointChannel(t, kind="product")
    if kind == "degraded":
        t = np.ones((r,) * (k + 1))
        for pos, w in enumerate(channels):
            shape = [1] * (k + 1)
            shape[pos] = r       # conditioning symbol: x for pos 0, else y_{pos-1}
            shape[pos + 1] = r
            t = t * w.matrix.reshape(shape)
        return JointChannel(t, kind="degraded")
    raise ValueError(f"unknown joint channel kind: {kind!r}")


def marginal_joint_channel(jc: JointChannel, k: int) -> JointChannel:
    """Marginal of the first k outputs."""
    if not 1 <= k <= jc.arity:
        raise ValueError("invalid output count")
    if k == jc.arity:
        return jc
    axes = tuple(range(k + 1, jc.arity + 1))
    return JointChannel(jc.tensor.sum(axis=axes), kind=jc.kind)


@dataclass(frozen=True)
class ChannelAnalysis:
    delta: float
    theta_min: float
    theta_max: float
    infinite: bool
    violation: bool


def _pairwise_law(w, marginal):
    """(input law, conditional rows) for the two-image channel of ``w``."""
    q = _check_pmf(marginal, "marginal")
    if isinstance(w, Channel):
        if len(q) != w.r:
            raise ValueError("marginal length mismatch")
        return q, w.matrix
    if isinstance(w, (tuple, list)) and len(w) == 2:
        w = make_joint_channel("product", w)
    if isinstance(w, JointChannel):
        if w.arity != 2:
            raise ValueError("pairwise analysis needs an arity-2 channel")
        if len(q) != w.r:
            raise ValueError("marginal length mismatch")
        pxy = np.tensordot(q, w.tensor, axes=1)
        px = pxy.sum(axis=1)
        rows = np.where(px[:, None] > 0, pxy / np.where(px[:, None] > 0, px[:, None], 1.0), 0.0)
        return px, rows
    raise TypeError("expected Channel, JointChannel, or a pair of Channels")


def channel_analysis(w, marginal, bounds: tuple) -> ChannelAnalysis:
    """Average divergence between the conditional laws seen from two
    independent inputs, checked against configured [theta_min, theta_max]."""
    theta_min, theta_max = float(bounds[0]), float(bounds[1])
    px, rows = _pairwise_law(w, marginal)
    r = len(px)
    delta = 0.0
    infinite = False
    for a in range(r):
        for b in range(r):
            wgt = px[a] * px[b]
            if wgt == 0.0 or a == b:
                continue
            pa, pb = rows[a], rows[b]
            if ((pa > 0) & (pb == 0)).any():
                infinite = True
                delta = math.inf
                break
            mask = pa > 0
            delta += wgt * float(np.dot(pa[mask], np.log2(pa[mask] / pb[mask])))
        if infinite:
            break
    violation = infinite or not (theta_min <= delta <= theta_max)
    return ChannelAnalysis(
        delta=delta,
        theta_min=theta_min,
        theta_max=theta_max,
        infinite=infinite,
        violation=violation,
    )


@dataclass(frozen=True, eq=False)
class Ensemble:
    images: tuple                 # m observed Images
    assignment: tuple             # scene index per image
    transforms: tuple             # true transform applied to each image
    partition: Partition          # true clustering by shared scene
    scenes: np.ndarray            # scene_count x n pixel array
    scene_collision: bool         # two scenes drawn identical
    group_kind: str
    group_dims: tuple
    seed: int | None = None

    def __post_init__(self):
        scenes = np.asarray(self.scenes, dtype=np.int64).copy()
        scenes.flags.writeable = False
        object.__setattr__(self, "scenes", scenes)

    @property
    def m(self) -> int:
        return len(self.images)

    @property
    def n(self) -> int:
        return self.images[0].n

    @property
    def r(self) -> int:
        return self.images[0].r


def _sample_rows(rng, row_pmfs: np.ndarray) -> np.ndarray:
    """One categorical draw per row of ``row_pmfs``."""
    cdf = np.cumsum(row_pmfs, axis=1)
    cdf[:, -1] = np.maximum(cdf[:, -1], 1.0)
    u = rng.random(row_pmfs.shape[0])
    return np.minimum((cdf <= u[:, None]).sum(axis=1), row_pmfs.shape[1] - 1)


def generate_ensemble(
    scene_model: SceneModel,
    channel,
    group: TransformGroup,
    m: int,
    n: int,
    seed: int,
) -> Ensemble:
    """Draw scenes, assign and corrupt images, and permute them.

    ``channel`` is either a Channel (each image corrupted independently
    given its scene) or a JointChannel whose arity covers the largest
    cluster (a cluster of k images uses the first-k output marginal).
    The lowest-index image of each cluster keeps the identity transform so
    exact recovery of the others' inverses is well-posed; the rest are
    uniform over the group.
    """
    if m < 1 or n < 1:
        raise ValueError("need m >= 1 images and n >= 1 pixels")
    if group.n != n:
        raise ValueError("group acts on sequences of a different length")
    r = scene_model.r
    ss = np.random.SeedSequence(seed)
    scene_rng, assign_rng, channel_rng, transform_rng = (
        np.random.default_rng(c) for c in ss.spawn(4)
    )

    scenes = np.empty((scene_model.scene_count, n), dtype=np.int64)
    for s in range(scene_model.scene_count):
        scenes[s] = _sample_rows(scene_rng, np.tile(scene_model.prior, (n, 1)))
    collision = any(
        np.array_equal(scenes[a], scenes[b])
        for a in range(scene_model.scene_count)
        for b in range(a + 1, scene_model.scene_count)
    )

    assignment = _sample_rows(assign_rng, np.tile(scene_model.scene_pmf, (m, 1)))
    partition = from_labels(assignment.tolist())

    corrupted = [None] * m
    for block in partition:
        x = scenes[assignment[block[0]]]
        k = len(block)
        if isinstance(channel, Channel):
            for j in block:
                corrupted[j] = _sample_rows(channel_rng, channel.matrix[x])
        elif isinstance(channel, JointChannel):
            if channel.arity < k:
                raise ValueError("joint channel arity smaller than a cluster")
            jc = marginal_joint_channel(channel, k)
            flat = jc.tensor.reshape(r, -1)
            codes = _sample_rows(channel_rng, flat[x])
            outs = np.unravel_index(codes, (r,) * k)
            for pos, j in enumerate(block):
                corrupted[j] = outs[pos]
        else:
            raise TypeError("channel must be Channel or JointChannel")

    anchors = {block[0] for block in partition}
    transforms = []
    for j in range(m):
        if j in anchors:
            transforms.append(group.elements[group.identity_index])
        else:
            transforms.append(group.elements[int(transform_rng.integers(len(group)))])

    images = tuple(
        Image(pixels=apply(t, y), r=r) for t, y in zip(transforms, corrupted)
    )
    return Ensemble(
        images=images,
        assignment=tuple(int(a) for a in assignment),
        transforms=tuple(transforms),
        partition=partition,
        scenes=scenes,
        scene_collision=collision,
        group_kind=group.kind,
        group_dims=tuple(int(d) for d in group.dims),
        seed=seed,
    )


def ensemble_to_json(e: Ensemble) -> str:
    doc = {
        "format": 1,
        "alphabet": e.r,
        "n": e.n,
        "m": e.m,
        "group": {"kind": e.group_kind, "dims": list(e.group_dims)},
        "images": [img.pixels.tolist() for img in e.images],
        "truth": {
            "assignment": list(e.assignment),
            "transforms": [t.mapping.tolist() for t in e.transforms],
            "partition": [list(b) for b in e.partition],
            "scenes": e.scenes.tolist(),
            "scene_collision": e.scene_collision,
        },
        "seed": e.seed,
    }
    return json.dumps(doc, separators=(",", ":"), sort_keys=True)


def ensemble_from_json(text: str) -> Ensemble:
    doc = json.loads(text)
    r = doc["alphabet"]
    return Ensemble(
        images=tuple(Image(pixels=np.array(p), r=r) for p in doc["images"]),
        assignment=tuple(doc["truth"]["assignment"]),
        transforms=tuple(
            Transform(np.array(mp)) for mp in doc["truth"]["transforms"]
        ),
        partition=Partition(tuple(tuple(b) for b in doc["truth"]["partition"])),
        scenes=np.array(doc["truth"]["scenes"], dtype=np.int64),
        scene_collision=doc["truth"]["scene_collision"],
        group_kind=doc["group"]["kind"],
        group_dims=tuple(doc["group"]["dims"]),
        seed=doc["seed"],
    )


def _block_law(scene_model: SceneModel, channel, block, misaligned) -> np.ndarray:
    """Exact pixel law over one cluster, axes in ``block`` member order."""
    r = scene_model.r
    members = list(block)
    mis = [j for j in members if j in misaligned]
    aligned = [j for j in members if j not in misaligned]
    if isinstance(channel, Channel):
        coupled = np.zeros((r,) * len(aligned)) if aligned else None
        for a in range(r):
            piece = np.array(scene_model.prior[a])
            for _ in aligned:
                piece = np.multiply.outer(piece, channel.matrix[a])
            if aligned:
                coupled = coupled + piece
        marginal = scene_model.prior @ channel.matrix
        mis_laws = {j: marginal for j in mis}
    elif isinstance(channel, JointChannel):
        if channel.arity < len(members):
            raise ValueError("joint channel arity smaller than the cluster")
        jc = marginal_joint_channel(channel, len(members))
        mis_slots = [members.index(j) + 1 for j in mis]
        keep = jc.tensor.sum(axis=tuple(mis_slots)) if mis_slots else jc.tensor
        coupled = np.tensordot(scene_model.prior, keep, axes=1) if aligned else None
        mis_laws = {}
        for j in mis:
            slot = members.index(j) + 1
            other = tuple(ax for ax in range(1, jc.tensor.ndim) if ax != slot)
            mis_laws[j] = np.tensordot(scene_model.prior, jc.tensor.sum(axis=other), axes=1)
    else:
        raise TypeError("channel must be Channel or JointChannel")

    law = coupled if coupled is not None else np.array(1.0)
    order = list(aligned)
    for j in mis:
        law = np.multiply.outer(law, mis_laws[j])
        order.append(j)
    perm = [order.index(j) for j in members]
    return np.transpose(law, perm) if len(members) > 1 else law


def conditional_given_reference(scene_model: SceneModel, channel, m: int) -> JointChannel:
    """Exact law of images 1..m-1's aligned pixels given image 0's pixel,
    when all m images depict one shared scene.  Pixel values image 0 can
    never show get a uniform row so the result is still a valid channel."""
    from .partitions import one_block

    joint = analytic_pixel_joint(scene_model, one_block(m), channel)
    r = scene_model.r
    flat = joint.reshape(r, -1)
    px = flat.sum(axis=1)
    rows = np.where(
        px[:, None] > 0, flat / np.where(px[:, None] > 0, px[:, None], 1.0),
        1.0 / flat.shape[1],
    )
    return JointChannel(rows.reshape(joint.shape), kind="conditional")


def analytic_pixel_joint(
    scene_model: SceneModel,
    partition: Partition,
    channel,
    misaligned=(),
) -> np.ndarray:
    """Exact joint pmf of one aligned pixel tuple across all m images.

    Images listed in ``misaligned`` are decoupled from their cluster and
    contribute their marginal law independently (the pixel a misregistered
    image shows at a given index is an unrelated pixel of the same law).
    """
    r = scene_model.r
    m = partition.m
    if m * math.log2(r) > 24:
        raise ValueError("joint pmf too large (m log2(r) must be <= 24)")
    misaligned = set(misaligned)
    law = np.array(1.0)
    order: list = []
    for block in partition:
        law = np.multiply.outer(law, _block_law(scene_model, channel, block, misaligned))
        order.extend(block)
    perm = [order.index(j) for j in range(m)]
    return np.transpose(law, perm)
