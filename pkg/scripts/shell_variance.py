#!/usr/bin/env python3
"""Radially symmetric Dirichlet problem on concentric-sphere shells.

Fix 1 on the inner sphere and 0 on the outer sphere, minimize the energy,
and report the variance of the solution over the middle sphere for every
strategy at two refinement levels."""

import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from dualvol.cli import main as cli_main


def main():
    root = pathlib.Path(__file__).resolve().parents[1]
    out_dir = root / "out"
    out_dir.mkdir(exist_ok=True)
    for level in (1, 2):
        mesh_path = root / "assets" / "meshes" / f"shell_l{level}.mesh"
        if not mesh_path.exists():
            print(f"missing {mesh_path}; run scripts/make_fixtures.py first")
            return
        print(f"shell level {level}:")
        for strategy in ("circumcentric", "optimized", "barycentric", "alexa"):
            out = out_dir / f"dirichlet_l{level}_{strategy}.csv"
            rc = cli_main(["dirichlet", "--mesh", str(mesh_path),
                           "--inner-label", "1", "--outer-label", "2",
                           "--mid-label", "3", "--centers", strategy,
                           "--out", str(out)])
            if rc != 0:
                print(f"  {strategy:14s} exit code {rc}")
                continue
            summary = json.loads(
                (out_dir / f"dirichlet_l{level}_{strategy}_summary.json").read_text())
            print(f"  {strategy:14s} mid-shell variance = {summary['mid_variance']:.3e}")


if __name__ == "__main__":
    main()
