"""Blockwise clustering at growing image counts, constant block size.

Runs the blockwise sweep from the shipped config and prints the error
curves, then tabulates the block size the cost rule would pick for each
swept image count across a range of cost weights.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

from infreg.blockwise import choose_block_size
from infreg.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--config", default=str(ROOT / "configs" / "blockwise_scaling.json")
    )
    parser.add_argument("--out", default=str(ROOT / "results" / "blockwise"))
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args()

    doc = json.loads(Path(args.config).read_text())
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    argv = ["run", "--config", args.config, "--out", str(out_dir / "sweep")]
    if args.threads:
        argv += ["--threads", str(args.threads)]
    code = cli_main(argv)
    if code != 0:
        sys.exit(code)

    for metric in ("partition", "up_to_cluster_shift"):
        with open(out_dir / "sweep" / f"curve_{metric}.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        line = "  ".join(
            f"m={float(r['x']):g}: {float(r['rate']):.3f} "
            f"[{float(r['lo']):.3f},{float(r['hi']):.3f}]"
            for r in rows
        )
        print(f"{metric} error: {line}")

    n = doc["n"]
    r = doc["model"]["r"]
    size = doc["group"]["order"]
    print(f"\nblock size rule at n={n}, r={r}, {size} transforms:")
    for c in (0.1, 1.0, 10.0):
        print(f"  cost weight c={c:<4}: k={choose_block_size(n, r, size, c)}")
    print(f"config pins k={doc['algorithm']['params']['k']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
