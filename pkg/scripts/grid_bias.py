#!/usr/bin/env python3
"""Grid eigenmode bias experiment: the fifth pinned-base eigenmode of a
4x4x4 tetrahedralized grid, compared against its 90-degree rotation, for
every center strategy. Writes out/grid_<strategy>_{modes.csv,summary.json}."""

import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from dualvol.cli import main as cli_main


def main():
    out_dir = pathlib.Path(__file__).resolve().parents[1] / "out"
    out_dir.mkdir(exist_ok=True)
    for strategy in ("barycentric", "circumcentric", "alexa", "circumsnap",
                     "optimized"):
        prefix = out_dir / f"grid_{strategy}"
        rc = cli_main(["grid", "--n", "4", "--h", "1.0", "--centers", strategy,
                       "--pin-base", "--eigen", "5", "--out", str(prefix)])
        if rc != 0:
            print(f"{strategy}: exit code {rc}")
            continue
        summary = json.loads((out_dir / f"grid_{strategy}_summary.json").read_text())
        print(f"{strategy:14s} bias_metric = {summary['bias_metric']:.3e}")


if __name__ == "__main__":
    main()
