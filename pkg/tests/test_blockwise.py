import math

import numpy as np
import pytest

from infreg.blockwise import (
    BlockPlan,
    block_size_objective,
    choose_block_size,
    cluster_register_blockwise,
    register_blockwise,
)
from infreg.model import Image, generate_ensemble, make_channel, uniform_scene_model
from infreg.registration import register_mm
from infreg.transforms import apply, build_group


def test_choose_block_size_reference_point():
    assert choose_block_size(1024, 2, 1024, 1.0) == 6


def test_choose_block_size_is_smallest_minimizer():
    n, r, gsize, c = 1024, 2, 1024, 1.0
    top = int(math.log(n, r))
    values = {s: block_size_objective(n, r, gsize, c, s) for s in range(2, top + 1)}
    best = min(values.values())
    want = min(s for s, v in values.items() if v == best)
    assert choose_block_size(n, r, gsize, c) == want


def test_tiny_reliability_weight_collapses_to_pairs():
    # when the reliability term is negligible the search cost wins and the
    # smallest admissible block is chosen
    assert choose_block_size(240, 2, 8, 0.001) == 2


def test_choose_block_size_guards():
    with pytest.raises(ValueError):
        choose_block_size(1024, 2, 8, 0.0)
    with pytest.raises(ValueError):
        choose_block_size(3, 2, 8, 1.0)


def test_block_plan_validation():
    BlockPlan(k=2, blocks=((0, 2), (1, 2)), reference=2)
    with pytest.raises(ValueError):
        BlockPlan(k=1, blocks=((0, 1),), reference=1)
    with pytest.raises(ValueError):
        BlockPlan(k=2, blocks=((0, 2), (1,)), reference=2)  # reference missing
    with pytest.raises(ValueError):
        BlockPlan(k=2, blocks=((0, 2), (0, 2), (1, 2)), reference=2)


def test_blockwise_pairs_match_plain_pair_runs():
    sm = uniform_scene_model(2, 1)
    ch = make_channel("bsc", alpha=0.05)
    g = build_group("ring", 240, order=8)
    e = generate_ensemble(sm, ch, g, 6, 240, 3)
    bw = register_blockwise(list(e.images), g, 2)
    assert bw.reference_index == 5
    assert bw.plan.blocks == ((0, 5), (1, 5), (2, 5), (3, 5), (4, 5))
    for j in range(5):
        pair = register_mm([e.images[5], e.images[j]], g)
        assert bw.estimates[j] == pair.estimates[1]
    assert bw.estimates[5] == g.identity_index


def test_blockwise_registration_aligns_noiseless_images():
    sm = uniform_scene_model(2, 1)
    noiseless = make_channel("bsc", alpha=0.0)
    g = build_group("ring", 240, order=8)
    e = generate_ensemble(sm, noiseless, g, 6, 240, 1)
    bw = register_blockwise(list(e.images), g, 3)
    for j in range(6):
        aligned = apply(g.elements[bw.estimates[j]], e.images[j].pixels)
        assert np.array_equal(aligned, e.images[5].pixels)


def test_blockwise_registration_guards():
    g = build_group("ring", 8)
    imgs = [Image(np.zeros(8, dtype=int), 2)] * 3
    with pytest.raises(ValueError):
        register_blockwise(imgs[:1], g, 2)
    with pytest.raises(ValueError):
        register_blockwise(imgs, g, 1)


def test_blockwise_clustering_recovers_noiseless_truth():
    sm = uniform_scene_model(2, 2)
    noiseless = make_channel("bsc", alpha=0.0)
    g = build_group("ring", 240, order=8)
    e = generate_ensemble(sm, noiseless, g, 8, 240, 4)
    res = cluster_register_blockwise(list(e.images), g, 4, ("epsilon_like", 0.5))
    assert res.ok
    assert res.partition == e.partition
    # first round splits the eight images into two blocks of four
    assert res.diagnostics["rounds"][0] == ((0, 1, 2, 3), (4, 5, 6, 7))
    est = res.transforms.estimates
    for block in res.partition:
        rep = block[0]
        assert est[rep] == g.identity_index
        for j in block:
            aligned = apply(g.elements[est[j]], e.images[j].pixels)
            assert np.array_equal(aligned, e.images[rep].pixels)


def test_blockwise_clustering_with_noise_and_carryups():
    sm = uniform_scene_model(2, 2)
    ch = make_channel("bsc", alpha=0.05)
    g = build_group("ring", 240, order=8)
    e = generate_ensemble(sm, ch, g, 8, 240, 11)
    res = cluster_register_blockwise(list(e.images), g, 4, ("epsilon_like", 0.5))
    assert res.ok
    assert res.partition == e.partition
    assert res.diagnostics["block_errors"] == 0
    assert res.diagnostics["singleton_carryups"] >= 0
    assert res.method == "blockwise_epsilon_like"


def test_blockwise_clustering_terminates_without_merges():
    # all-independent scenes: nothing merges, one round, singletons out
    sm = uniform_scene_model(2, 4)
    noiseless = make_channel("bsc", alpha=0.0)
    g = build_group("ring", 128, order=8)
    for seed in range(20):
        e = generate_ensemble(sm, noiseless, g, 4, 128, seed)
        if len(e.partition) == 4 and not e.scene_collision:
            break
    else:
        pytest.skip("no all-distinct draw found")
    res = cluster_register_blockwise(list(e.images), g, 4, ("epsilon_like", 0.5))
    assert res.ok
    assert res.partition == e.partition
    assert len(res.diagnostics["rounds"]) == 1


def test_blockwise_method_dispatch_validation():
    g = build_group("ring", 8)
    imgs = [Image(np.zeros(8, dtype=int), 2)] * 4
    with pytest.raises(ValueError):
        cluster_register_blockwise(imgs, g, 1, ("epsilon_like", 0.5))
    with pytest.raises(ValueError):
        cluster_register_blockwise(imgs, g, 2, ("mystery", None))
    with pytest.raises(TypeError):
        cluster_register_blockwise(imgs, g, 2, ("thresholded", 0.5))
