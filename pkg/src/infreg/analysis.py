"""Monte-Carlo evaluation, reference bounds, and exact counting checks.

Trial scoring uses two notions of registration success.  Strict success
requires every estimate to equal the inverse of the transform its image was
observed under.  The relaxed notion allows one unknown common transform per
true cluster, since the joint pixel law cannot distinguish a cluster from a
commonly-shifted copy of it.
"""

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

Z95 = 1.959963984540054


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple:
    """Wilson score 95% interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("need at least one trial")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    # the interval provably contains p; round only outward from it
    return (min(p, max(0.0, center - half)), max(p, min(1.0, center + half)))


# ---------------------------------------------------------------------------
# trial scoring


def registration_outcomes(estimates, ensemble, group) -> tuple:
    """(strict, up_to_cluster_shift) success of transform estimates."""
    if estimates is None:
        return False, False
    residuals = [
        group.compose_indices(group.index_of(true_t), int(est))
        for true_t, est in zip(ensemble.transforms, estimates)
    ]
    strict = all(d == group.identity_index for d in residuals)
    up_to_shift = all(
        len({residuals[j] for j in block}) == 1 for block in ensemble.partition
    )
    return strict, up_to_shift


def clustering_outcomes(result, ensemble, group) -> tuple:
    """(partition_correct, joint_strict, joint_up_to_cluster_shift)."""
    if result is None or not getattr(result, "ok", False):
        return False, False, False
    partition_ok = result.partition == ensemble.partition
    strict, upto = registration_outcomes(
        result.transforms.estimates if result.transforms else None, ensemble, group
    )
    return partition_ok, partition_ok and strict, partition_ok and upto


@dataclass(frozen=True)
class TrialRecord:
    index: int
    seed: int
    x: object
    config_digest: str
    partition_correct: bool | None
    transforms_correct_strict: bool
    transforms_correct_up_to_cluster_shift: bool
    scene_collision: bool
    wall_time: float  # seconds; deliberately left out of the serialized form

    def __post_init__(self):
        if self.transforms_correct_strict and not self.transforms_correct_up_to_cluster_shift:
            raise ValueError("strict success must imply up-to-shift success")


def trial_record_json(rec: TrialRecord) -> str:
    doc = {
        "index": rec.index,
        "seed": rec.seed,
        "x": rec.x,
        "config_digest": rec.config_digest,
        "partition_correct": rec.partition_correct,
        "transforms_correct_strict": rec.transforms_correct_strict,
        "transforms_correct_up_to_cluster_shift": rec.transforms_correct_up_to_cluster_shift,
        "scene_collision": rec.scene_collision,
    }
    return json.dumps(doc, separators=(",", ":"), sort_keys=True)


def trial_records_jsonl(records) -> str:
    return "".join(trial_record_json(r) + "\n" for r in records)


# ---------------------------------------------------------------------------
# error curves


@dataclass(frozen=True)
class CurvePoint:
    x: float
    rate: float
    lo: float
    hi: float
    trials: int

    def __post_init__(self):
        if not (0.0 <= self.rate <= 1.0 and self.lo <= self.rate <= self.hi):
            raise ValueError("rate must sit inside its interval in [0,1]")


@dataclass(frozen=True)
class ErrorCurve:
    points: tuple
    metric: str = "strict"

    def to_csv(self) -> str:
        lines = ["x,rate,lo,hi,trials"]
        for p in self.points:
            lines.append(f"{p.x!r},{p.rate!r},{p.lo!r},{p.hi!r},{p.trials}")
        return "\n".join(lines) + "\n"


def error_curve(records, metric: str, sweep) -> ErrorCurve:
    """Aggregate trial failures per sweep value with Wilson intervals."""
    attr = {
        "strict": "transforms_correct_strict",
        "up_to_cluster_shift": "transforms_correct_up_to_cluster_shift",
        "partition": "partition_correct",
    }[metric]
    points = []
    for x in sweep:
        rows = [r for r in records if r.x == x]
        failures = sum(1 for r in rows if not getattr(r, attr))
        lo, hi = wilson_interval(failures, len(rows))
        points.append(
            CurvePoint(x=x, rate=failures / len(rows), lo=lo, hi=hi, trials=len(rows))
        )
    return ErrorCurve(points=tuple(points), metric=metric)


@dataclass(frozen=True)
class TrialPlan:
    """What to sweep and how to build each trial's instance.

    ``factory(x, seed)`` returns an (Ensemble, TransformGroup) pair;
    ``algorithm(ensemble, group)`` returns (partition-or-None, estimates).
    """

    sweep: tuple
    factory: object
    digest: str = ""
    label: str = "n"


def run_trials(plan: TrialPlan, algorithm, trials: int, master_seed: int, threads: int = 1):
    """Monte-Carlo error rates over the sweep; deterministic given the seed.

    Per-trial seeds derive from (master seed, sweep index, trial index), so
    results do not depend on thread scheduling or trial order.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    all_records = []
    for s_idx, x in enumerate(plan.sweep):

        def one(t, _x=x, _s=s_idx):
            child = np.random.SeedSequence(master_seed, spawn_key=(_s, t))
            w = child.generate_state(2)
            seed = (int(w[0]) << 32) | int(w[1])
            t0 = time.perf_counter()
            ensemble, group = plan.factory(_x, seed)
            partition, estimates = algorithm(ensemble, group)
            if partition is None:
                strict, upto = registration_outcomes(estimates, ensemble, group)
                part_ok = None
            else:
                part_ok = partition == ensemble.partition
                strict, upto = registration_outcomes(estimates, ensemble, group)
                strict, upto = part_ok and strict, part_ok and upto
            return TrialRecord(
                index=t,
                seed=seed,
                x=_x,
                config_digest=plan.digest,
                partition_correct=part_ok,
                transforms_correct_strict=strict,
                transforms_correct_up_to_cluster_shift=upto,
                scene_collision=ensemble.scene_collision,
                wall_time=time.perf_counter() - t0,
            )

        if threads and threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                all_records.extend(pool.map(one, range(trials)))
        else:
            all_records.extend(one(t) for t in range(trials))

    curves = {
        "strict": error_curve(all_records, "strict", plan.sweep),
        "up_to_cluster_shift": error_curve(
            all_records, "up_to_cluster_shift", plan.sweep
        ),
    }
    if all(r.partition_correct is not None for r in all_records):
        curves["partition"] = error_curve(all_records, "partition", plan.sweep)
    return curves, all_records


# ---------------------------------------------------------------------------
# reference curves


class SlopeUndefined(ValueError):
    pass


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    residuals: tuple
    points: tuple   # (x, rate) pairs used


def exponent_slope(curve: ErrorCurve) -> SlopeFit:
    """Least-squares slope of -log2(error rate) against the sweep variable."""
    pts = [(float(p.x), p.rate) for p in curve.points if p.rate > 0.0]
    if len(pts) < 3:
        raise SlopeUndefined(
            f"slope needs >= 3 points with nonzero error rates, have {len(pts)}"
        )
    x = np.array([p[0] for p in pts])
    y = -np.log2([p[1] for p in pts])
    design = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    fitted = design @ np.array([slope, intercept])
    return SlopeFit(
        slope=float(slope),
        intercept=float(intercept),
        residuals=tuple(float(v) for v in (y - fitted)),
        points=tuple(pts),
    )


def kailath_bound(delta_max: float, m: int) -> float:
    """Lower bound on joint misregistration probability for paired images:
    1 - (1 - 2**-delta_max)**floor(m/2), with delta_max in bits."""
    if delta_max < 0:
        raise ValueError("delta_max must be nonnegative")
    if m < 2:
        raise ValueError("need at least two images")
    return 1.0 - (1.0 - 2.0 ** (-delta_max)) ** (m // 2)


# ---------------------------------------------------------------------------
# exact counting


def _det_fraction(mat) -> Fraction:
    """Determinant by fraction-exact Gaussian elimination."""
    a = [row[:] for row in mat]
    size = len(a)
    det = Fraction(1)
    for col in range(size):
        pivot = next((r for r in range(col, size) if a[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            det = -det
        det *= a[col][col]
        inv = Fraction(1) / a[col][col]
        for r in range(col + 1, size):
            factor = a[r][col] * inv
            if factor:
                a[r] = [x - factor * y for x, y in zip(a[r], a[col])]
    return det


def whittle_count(F, u: int, v: int) -> int:
    """Number of walks from u to v with exactly the transition counts F.

    F[i][j] counts i->j steps.  Computed as the transition multinomial times
    the (v,u) cofactor of I - (row-normalized F), all in exact rationals.
    Returns 0 for infeasible F.
    """
    F = np.asarray(F, dtype=np.int64)
    if F.ndim != 2 or F.shape[0] != F.shape[1] or (F < 0).any():
        raise ValueError("F must be a square nonnegative integer matrix")
    k = F.shape[0]
    if not (0 <= u < k and 0 <= v < k):
        raise ValueError("u, v must index states")
    rows = F.sum(axis=1)
    cols = F.sum(axis=0)
    for i in range(k):
        if rows[i] - cols[i] != (i == u) - (i == v):
            return 0

    multinomial = 1
    for i in range(k):
        term = math.factorial(int(rows[i]))
        for j in range(k):
            term //= math.factorial(int(F[i, j]))
        multinomial *= term

    g = [
        [
            (Fraction(1 if i == j else 0))
            - (Fraction(int(F[i, j]), int(rows[i])) if rows[i] > 0 else Fraction(0))
            for j in range(k)
        ]
        for i in range(k)
    ]
    minor = [
        [g[i][j] for j in range(k) if j != u] for i in range(k) if i != v
    ]
    cofactor = _det_fraction(minor) if minor else Fraction(1)
    if (u + v) % 2 == 1:
        cofactor = -cofactor
    count = multinomial * cofactor
    if count.denominator != 1 or count < 0:
        raise ArithmeticError(
            f"walk count came out non-integral or negative: {count}"
        )
    return int(count)


@dataclass(frozen=True)
class TypeClassCount:
    count: int
    entropy: float
    log2_lower: float
    log2_upper: float
    bounds_hold: bool


def type_class_count(q, n: int) -> TypeClassCount:
    """Exact number of length-n sequences with empirical distribution q,
    checked against the standard entropy sandwich."""
    q = np.asarray(q, dtype=float)
    if (q < 0).any() or abs(q.sum() - 1.0) > 1e-9:
        raise ValueError("q must be a pmf")
    ks = q * n
    rounded = np.rint(ks)
    if np.abs(ks - rounded).max() > 1e-9:
        raise ValueError("type not realizable at this length: n*q must be integral")
    counts = rounded.astype(int)
    total = math.factorial(n)
    for c in counts:
        total //= math.factorial(int(c))
    positive = q[q > 0]
    entropy = float(-(positive * np.log2(positive)).sum())
    log2_count = (
        math.lgamma(n + 1) - sum(math.lgamma(int(c) + 1) for c in counts)
    ) / math.log(2)
    log2_upper = n * entropy
    log2_lower = log2_upper - len(q) * math.log2(n + 1)
    holds = log2_lower - 1e-9 <= log2_count <= log2_upper + 1e-9
    return TypeClassCount(
        count=total,
        entropy=entropy,
        log2_lower=log2_lower,
        log2_upper=log2_upper,
        bounds_hold=holds,
    )
