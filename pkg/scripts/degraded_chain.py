"""Two-stage observation chain: pairwise registration against joint methods.

The third image only sees the scene through the second, so registering it
straight to the first discards information.  This script measures the
last-image misregistration rate of three estimators on shared ensembles:
pairwise information maximization, joint multiinformation maximization,
and the stage-by-stage sequential method.
"""

import argparse
import json
import sys
from pathlib import Path

from infreg.analysis import wilson_interval
from infreg.model import (
    SceneModel,
    generate_ensemble,
    make_channel,
    make_joint_channel,
)
from infreg.registration import (
    register_mm,
    register_mmi_pair,
    register_sequential_degraded,
)
from infreg.transforms import build_group

import numpy as np

ROOT = Path(__file__).resolve().parent.parent


def build_model(doc):
    r = doc["model"]["r"]
    prior = np.full(r, 1.0 / r)
    scene_model = SceneModel(prior=prior, scene_count=1, scene_pmf=np.array([1.0]))
    stages = []
    for stage in doc["model"]["channel"]["channels"]:
        if stage["kind"] == "explicit":
            stages.append(make_channel("explicit", matrix=np.array(stage["matrix"])))
        else:
            stages.append(make_channel(stage["kind"], alpha=stage["alpha"], r=r))
    return scene_model, make_joint_channel("degraded", stages)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--config", default=str(ROOT / "configs" / "degraded_chain.json")
    )
    parser.add_argument("--trials", type=int, default=None, help="override config")
    args = parser.parse_args()

    doc = json.loads(Path(args.config).read_text())
    scene_model, chain = build_model(doc)
    n = doc["sweep"]["values"][0]
    trials = args.trials if args.trials is not None else doc["trials"]
    group = build_group("ring", n)

    fails = {"pairwise": 0, "joint": 0, "sequential": 0}
    for trial in range(trials):
        word = np.random.SeedSequence(doc["seed"], spawn_key=(trial,)).generate_state(2)
        seed = (int(word[0]) << 32) | int(word[1])
        e = generate_ensemble(scene_model, chain, group, 3, n, seed)
        want = group.inverse_index(group.index_of(e.transforms[2]))
        if register_mmi_pair(e.images[0], e.images[2], group).estimates[1] != want:
            fails["pairwise"] += 1
        if register_mm(list(e.images), group).estimates[2] != want:
            fails["joint"] += 1
        if register_sequential_degraded(*e.images, group).estimates[2] != want:
            fails["sequential"] += 1

    print(f"last-image misregistration over {trials} trials, n={n}, full ring:")
    for name, bad in fails.items():
        lo, hi = wilson_interval(bad, trials)
        print(f"  {name:10s} {bad:5d}/{trials}  rate {bad / trials:.4f}  "
              f"95% [{lo:.4f}, {hi:.4f}]")
    return 0


if __name__ == "__main__":
    sys.exit(main())
