#!/usr/bin/env python3
"""Center statistics over the bundled sample meshes: how often circumcenters
leave their simplices, where circumcentric masses go negative, how asymmetric
the snapped Laplacians are, and whether the optimized centers verify."""

import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from dualvol.cli import main as cli_main


def main():
    root = pathlib.Path(__file__).resolve().parents[1]
    mesh_dir = root / "assets" / "meshes"
    if not mesh_dir.is_dir():
        print(f"missing {mesh_dir}; run scripts/make_fixtures.py first")
        return
    out_dir = root / "out"
    out_dir.mkdir(exist_ok=True)
    out = out_dir / "corpus_stats.csv"
    rc = cli_main(["stats", "--mesh-dir", str(mesh_dir), "--out", str(out)])
    if rc != 0:
        print(f"stats exit code {rc}")
        return
    summary = json.loads((out_dir / "corpus_stats_summary.json").read_text())
    for key, value in sorted(summary.items()):
        print(f"{key}: {value}")


if __name__ == "__main__":
    main()
