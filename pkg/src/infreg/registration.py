"""Registration estimators for permuted images sharing a reference.

All estimators pin image 0 (the reference) to the identity and search the
remaining images' transforms exhaustively.  An estimate ``t`` for image j
means ``apply(group.elements[t], image_j)`` is the aligned version, so on a
correct run ``t`` is the inverse of the transform the image was observed
under.  Ties break toward the smallest candidate in lexicographic tuple
order, which puts the identity first for the built-in groups.
"""

from dataclasses import dataclass

import numpy as np

from . import _scan
from .model import Channel, Image, JointChannel
from .transforms import TransformGroup, apply

MAX_TUPLES = 10**6


@dataclass(frozen=True)
class RegistrationResult:
    estimates: tuple          # group-element index per image
    reference_index: int
    objective: object         # trace of the maximized objective (bits)
    joint_entropy: object     # trace of plug-in joint entropy (bits)
    tie_flag: bool
    method: str
    degenerate: bool = False  # flat / zero-likelihood objective
    plan: object = None       # block plan, when produced blockwise


def _check_tuple_budget(m: int, group: TransformGroup) -> int:
    total = len(group) ** (m - 1)
    if total > MAX_TUPLES:
        raise ValueError(
            f"search over {len(group)}**{m - 1} transform tuples exceeds the "
            f"{MAX_TUPLES} budget"
        )
    return total


def _marginal_entropy_sum(seqs, r: int) -> float:
    n = seqs[0].size
    rows = np.stack([np.bincount(s, minlength=r) for s in seqs])
    return float(_scan.entropy_rows(rows, n).sum())


def register_mm(images, group: TransformGroup, method: str = "mm") -> RegistrationResult:
    """Maximize the plug-in multiinformation over transform tuples."""
    seqs, r = _scan.image_data(images)
    m = len(seqs)
    if m < 2:
        raise ValueError("need at least two images")
    total = _check_tuple_budget(m, group)
    n = seqs[0].size
    h_joint = np.empty(total)
    for start, counts in _scan.iter_tuple_counts(seqs, group, r):
        h_joint[start : start + counts.shape[0]] = _scan.entropy_rows(counts, n)
    best = int(np.argmin(h_joint))
    ties = int((h_joint == h_joint[best]).sum()) > 1
    comps = np.unravel_index(best, (len(group),) * (m - 1))
    estimates = (group.identity_index, *(int(c) for c in comps))
    objective = _marginal_entropy_sum(seqs, r) - h_joint
    return RegistrationResult(
        estimates=estimates,
        reference_index=0,
        objective=objective,
        joint_entropy=h_joint,
        tie_flag=ties,
        method=method,
    )


def register_mmi_pair(x, y, group: TransformGroup) -> RegistrationResult:
    """Maximize the plug-in mutual information between x and transformed y."""
    return register_mm([x, y], group, method="mmi_pair")


def register_ml_oracle(images, group: TransformGroup, channel) -> RegistrationResult:
    """Model-aware alignment: maximize the exact conditional likelihood of the
    non-reference pixels given the reference image.

    ``channel`` is a Channel for a pair, or a JointChannel of arity m-1
    giving the law of the other images' pixels conditioned on the reference.
    """
    seqs, r = _scan.image_data(images)
    m = len(seqs)
    if m < 2:
        raise ValueError("need at least two images")
    total = _check_tuple_budget(m, group)
    n = seqs[0].size
    if isinstance(channel, Channel):
        if m != 2:
            raise ValueError("a plain Channel only covers the two-image case")
        tensor = channel.matrix
    elif isinstance(channel, JointChannel):
        if channel.arity != m - 1:
            raise ValueError("joint channel arity must be m-1")
        tensor = channel.tensor
    else:
        raise TypeError("channel must be Channel or JointChannel")
    if tensor.shape[0] < r:
        raise ValueError("channel alphabet smaller than the images'")
    r = tensor.shape[0]
    with np.errstate(divide="ignore"):
        log_lik = np.log2(tensor.ravel())
    forbidden = np.isneginf(log_lik)
    safe = np.where(forbidden, 0.0, log_lik)
    scores = np.empty(total)
    for start, counts in _scan.iter_tuple_counts(seqs, group, r):
        sc = counts.astype(float) @ safe
        if forbidden.any():
            sc[(counts[:, forbidden] > 0).any(axis=1)] = -np.inf
        scores[start : start + counts.shape[0]] = sc
    degenerate = not np.isfinite(scores).any()
    best = int(np.argmax(scores))
    ties = int((scores == scores[best]).sum()) > 1
    comps = np.unravel_index(best, (len(group),) * (m - 1))
    estimates = (group.identity_index, *(int(c) for c in comps))
    return RegistrationResult(
        estimates=estimates,
        reference_index=0,
        objective=scores,
        joint_entropy=None,
        tie_flag=ties,
        method="ml_oracle",
        degenerate=degenerate,
    )


def register_sequential_degraded(x, y, z, group: TransformGroup) -> RegistrationResult:
    """Register y to x, then z to the aligned y; all in x's frame.

    The natural chained baseline when z is a further-degraded copy of y:
    each hop is a pairwise mutual-information alignment.
    """
    seqs, r = _scan.image_data([x, y, z])
    first = register_mm(
        [Image(seqs[0], r), Image(seqs[1], r)], group, method="mmi_pair"
    )
    t1 = first.estimates[1]
    y_aligned = Image(apply(group.elements[t1], seqs[1]), r)
    second = register_mm([y_aligned, Image(seqs[2], r)], group, method="mmi_pair")
    return RegistrationResult(
        estimates=(group.identity_index, t1, second.estimates[1]),
        reference_index=0,
        objective={"xy": first.objective, "yz": second.objective},
        joint_entropy={"xy": first.joint_entropy, "yz": second.joint_entropy},
        tie_flag=first.tie_flag or second.tie_flag,
        method="sequential_degraded",
    )
