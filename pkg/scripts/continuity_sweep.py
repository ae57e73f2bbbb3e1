#!/usr/bin/env python3
"""Mass-matrix continuity as a grid morphs into its perturbed copy.

For each strategy and step count, records the largest step-to-step jump of
the probe value f'Mf. Continuous constructions shrink the jump as the path
is refined; snapping-based ones keep a fixed jump at the snap transition."""

import json
import pathlib
import sys
import tempfile

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from dualvol import make_grid, perturb, save_medit
from dualvol.cli import main as cli_main


def main():
    out_dir = pathlib.Path(__file__).resolve().parents[1] / "out"
    out_dir.mkdir(exist_ok=True)
    start = make_grid(2, 2, 2, 1.0, 0)
    end = perturb(start, 0.15, 1)
    with tempfile.TemporaryDirectory() as tmp:
        p_start = pathlib.Path(tmp) / "start.mesh"
        p_end = pathlib.Path(tmp) / "end.mesh"
        save_medit(start, str(p_start))
        save_medit(end, str(p_end))
        for strategy in ("barycentric", "circumcentric", "alexa", "optimized"):
            line = [f"{strategy:14s}"]
            for steps in (50, 100, 200):
                out = out_dir / f"continuity_{strategy}_{steps}.csv"
                rc = cli_main(["continuity", "--mesh", str(p_start), "--mesh-end",
                               str(p_end), "--steps", str(steps),
                               "--centers", strategy, "--out", str(out)])
                if rc != 0:
                    line.append(f"T={steps}: exit {rc}")
                    continue
                summary = json.loads(
                    (out_dir / f"continuity_{strategy}_{steps}_summary.json"
                     ).read_text())
                line.append(f"T={steps}: {summary['max_jump']:.3e}")
            print("  ".join(line))


if __name__ == "__main__":
    main()
