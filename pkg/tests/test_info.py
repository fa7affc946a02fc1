import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infreg.info import (
    TOL_BITS,
    InfoValue,
    JointHistogram,
    NoFinestMinimizer,
    cluster_information,
    entropy,
    fundamental_partition,
    joint_histogram,
    multiinformation,
    mutual_information,
    partition_information,
)
from infreg.model import Image
from infreg.partitions import enumerate_partitions, from_labels, one_block, singletons
from infreg.transforms import Transform, build_group, identity


def bits(s):
    return Image(np.array([int(c) for c in s]), 2)


# log2(4) - (3/4)*log2(3) = 0.8112781244591328, worked by hand
H_0001 = 0.8112781244591328


def test_entropy_of_biased_bits():
    h = joint_histogram([bits("0001")])
    assert float(entropy(h)) == pytest.approx(H_0001, abs=1e-15)


def test_entropy_edge_cases():
    assert float(entropy(joint_histogram([bits("0000")]))) == 0.0
    assert float(entropy(joint_histogram([bits("0011")]))) == 1.0
    assert float(entropy(np.array([0.25, 0.25, 0.25, 0.25]))) == 2.0


def test_mutual_information_hand_value():
    # X=0001, Y=0011: H(X)=0.8113, H(Y)=1, H(X,Y)=1.5
    h = joint_histogram([bits("0001"), bits("0011")])
    assert float(mutual_information(h, 0, 1)) == pytest.approx(
        H_0001 + 1.0 - 1.5, abs=1e-12
    )
    assert float(mutual_information(h, 0, 1)) == pytest.approx(
        0.3112781244591328, abs=1e-15
    )


def test_mutual_information_independent_pmf_is_zero():
    p = np.full((2, 2), 0.25)
    assert float(mutual_information(p, 0, 1)) == pytest.approx(0.0, abs=1e-12)


def test_entropy_subset_marginal():
    p = np.zeros((2, 2))
    p[0, 0] = p[1, 1] = 0.5
    assert float(entropy(p, (0,))) == 1.0
    assert float(entropy(p, (1,))) == 1.0
    assert float(entropy(p)) == 1.0
    assert float(multiinformation(p)) == 1.0


def test_histogram_validates():
    with pytest.raises(ValueError):
        JointHistogram(counts=np.array([1, 2]), n=4)
    with pytest.raises(ValueError):
        joint_histogram([bits("01"), bits("011")])
    with pytest.raises(ValueError):
        entropy(np.array([0.5, 0.6]))


def test_info_value_guards_negatives():
    with pytest.raises(ValueError):
        InfoValue(value=-0.5, kind="entropy")
    # partition information may legitimately be tiny-negative only via fp slop
    InfoValue(value=-0.5, kind="partition_info")


def test_joint_histogram_transforms_argument():
    g = build_group("ring", 6)
    x = bits("010011")
    y = bits("110100")
    t = g.elements[2]
    direct = joint_histogram([Image(x.pixels, 2), Image(y.pixels[t.mapping], 2)])
    via_arg = joint_histogram([x, y], transforms=[identity(6), t])
    assert np.array_equal(direct.counts, via_arg.counts)


def test_common_permutation_leaves_everything_unchanged():
    rng = np.random.default_rng(3)
    x = Image(rng.integers(0, 3, 40), 3)
    y = Image(rng.integers(0, 3, 40), 3)
    perm = Transform(rng.permutation(40))
    h0 = joint_histogram([x, y])
    h1 = joint_histogram([x, y], transforms=[perm, perm])
    assert np.array_equal(h0.counts, h1.counts)
    assert float(entropy(h0)) == float(entropy(h1))


def test_multiinformation_matches_definition():
    rng = np.random.default_rng(5)
    p = rng.random((2, 3, 2))
    p /= p.sum()
    expect = sum(float(entropy(p, (i,))) for i in range(3)) - float(entropy(p))
    assert float(multiinformation(p)) == pytest.approx(expect, abs=1e-12)


def test_partition_information_identity():
    rng = np.random.default_rng(6)
    p = rng.random((2, 2, 2, 2))
    p /= p.sum()
    total = float(multiinformation(p))
    for part in enumerate_partitions(4):
        ic = float(cluster_information(p, part))
        if len(part) > 1:
            ip = float(partition_information(p, part))
            assert total == pytest.approx(ic + (len(part) - 1) * ip, abs=1e-9)


def test_cluster_information_singletons_zero():
    rng = np.random.default_rng(7)
    p = rng.random((2, 2, 2))
    p /= p.sum()
    assert float(cluster_information(p, singletons(3))) == 0.0
    assert float(cluster_information(p, one_block(3))) == pytest.approx(
        float(multiinformation(p)), abs=1e-12
    )


def test_partition_information_rejects_one_block():
    p = np.full((2, 2), 0.25)
    with pytest.raises(ValueError):
        partition_information(p, one_block(2))


def _coupled_pair_pmf():
    """(X0, X1) perfectly correlated fair bit, X2 independent fair bit."""
    p = np.zeros((2, 2, 2))
    p[0, 0, 0] = p[0, 0, 1] = p[1, 1, 0] = p[1, 1, 1] = 0.25
    return p


def test_fundamental_partition_separates_coupled_pair():
    res = fundamental_partition(_coupled_pair_pmf())
    assert res.partition == from_labels([0, 0, 1])
    assert float(res.mpi) == pytest.approx(0.0, abs=1e-12)


def test_fundamental_partition_independent_is_singletons():
    p = np.full((2, 2, 2), 1 / 8)
    res = fundamental_partition(p)
    assert res.partition == singletons(3)
    assert float(res.mpi) == pytest.approx(0.0, abs=1e-12)
    # every candidate is a minimizer when everything is independent
    assert len(res.minimizers) == 4  # the |P|>1 partitions of 3 elements


def test_fundamental_partition_positive_mpi():
    # perfectly correlated pair: the only 2-element partition has I_P = 1 bit
    p = np.zeros((2, 2))
    p[0, 0] = p[1, 1] = 0.5
    res = fundamental_partition(p)
    assert res.partition == singletons(2)
    assert float(res.mpi) == pytest.approx(1.0, abs=1e-12)


def test_no_finest_minimizer_with_wide_tolerance():
    # two independent coupled pairs; tol 0.55 pulls in {01|2|3} and {0|1|23},
    # which are incomparable, while {0|1|2|3} (cost 2/3) stays out
    p = np.zeros((2, 2, 2, 2))
    for a in (0, 1):
        for b in (0, 1):
            p[a, a, b, b] = 0.25
    with pytest.raises(NoFinestMinimizer) as info:
        fundamental_partition(p, tol=0.55)
    mins = set(info.value.minimizers)
    assert from_labels([0, 0, 1, 1]) in mins
    assert from_labels([0, 0, 1, 2]) in mins
    assert from_labels([0, 1, 2, 2]) in mins
    assert singletons(4) not in mins


def test_fundamental_partition_guards():
    with pytest.raises(ValueError):
        fundamental_partition(np.array([0.5, 0.5]))  # one coordinate
    with pytest.raises(ValueError):
        fundamental_partition(np.full((2,) * 13, 1.0 / 2**13))


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_entropy_is_subadditive(data):
    m = data.draw(st.integers(min_value=2, max_value=4))
    r = data.draw(st.integers(min_value=2, max_value=3))
    raw = data.draw(
        st.lists(
            st.floats(min_value=0.01, max_value=1.0),
            min_size=r**m,
            max_size=r**m,
        )
    )
    p = np.array(raw).reshape((r,) * m)
    p /= p.sum()
    total = float(entropy(p))
    parts = sum(float(entropy(p, (i,))) for i in range(m))
    assert total <= parts + 1e-9
    assert float(multiinformation(p)) >= -1e-9


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_best_cluster_information_is_the_multiinformation(data):
    m = data.draw(st.integers(min_value=2, max_value=4))
    raw = data.draw(
        st.lists(
            st.floats(min_value=0.01, max_value=1.0),
            min_size=2**m,
            max_size=2**m,
        )
    )
    p = np.array(raw).reshape((2,) * m)
    p /= p.sum()
    best = max(float(cluster_information(p, q)) for q in enumerate_partitions(m))
    assert best == pytest.approx(float(multiinformation(p)), abs=1e-9)
