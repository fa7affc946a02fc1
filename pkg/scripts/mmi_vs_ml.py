"""Pair registration: plug-in information rule vs the exact-likelihood oracle.

Runs the pair-registration sweep twice -- once with the mutual-information
rule, once with the likelihood oracle that knows the channel -- and prints
the two strict-error curves side by side, plus decay-slope fits when enough
sweep points have nonzero error.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

from infreg.analysis import CurvePoint, ErrorCurve, SlopeUndefined, exponent_slope
from infreg.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent


def run_variant(config_doc, algorithm, out_dir, threads):
    doc = dict(config_doc)
    doc["algorithm"] = {"name": algorithm}
    cfg_path = out_dir / f"config_{algorithm}.json"
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg_path.write_text(json.dumps(doc, indent=2))
    argv = ["run", "--config", str(cfg_path), "--out", str(out_dir / algorithm)]
    if threads:
        argv += ["--threads", str(threads)]
    code = cli_main(argv)
    if code != 0:
        sys.exit(code)
    return read_curve(out_dir / algorithm / "curve_strict.csv")


def read_curve(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    points = tuple(
        CurvePoint(
            x=float(r["x"]),
            rate=float(r["rate"]),
            lo=float(r["lo"]),
            hi=float(r["hi"]),
            trials=int(r["trials"]),
        )
        for r in rows
    )
    return ErrorCurve(points=points, metric="strict")


def describe_slope(curve):
    try:
        fit = exponent_slope(curve)
        return f"slope {fit.slope:.4f} bits/pixel (intercept {fit.intercept:.2f})"
    except SlopeUndefined as err:
        return f"slope undefined: {err}"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--config", default=str(ROOT / "configs" / "pair_registration.json")
    )
    parser.add_argument("--out", default=str(ROOT / "results" / "mmi_vs_ml"))
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args()

    doc = json.loads(Path(args.config).read_text())
    out_dir = Path(args.out)
    curves = {
        name: run_variant(doc, name, out_dir, args.threads)
        for name in ("mmi_pair", "ml_oracle")
    }

    print()
    print(f"{'n':>6}  {'mmi_pair':>22}  {'ml_oracle':>22}")
    for a, b in zip(curves["mmi_pair"].points, curves["ml_oracle"].points):
        cell = "{:.4f} [{:.4f},{:.4f}]"
        print(
            f"{a.x:6g}  {cell.format(a.rate, a.lo, a.hi):>22}"
            f"  {cell.format(b.rate, b.lo, b.hi):>22}"
        )
    for name, curve in curves.items():
        print(f"{name}: {describe_slope(curve)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
