#!/usr/bin/env python3
"""Write the bundled sample meshes (stress fixtures + labeled shells) as
MEDIT files under assets/meshes/. Deterministic; safe to re-run."""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from dualvol import save_medit
from dualvol.fixtures import fixture_mesh, fixture_names, shell_mesh


def main():
    out_dir = pathlib.Path(__file__).resolve().parents[1] / "assets" / "meshes"
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in fixture_names():
        path = out_dir / f"{name}.mesh"
        save_medit(fixture_mesh(name), str(path))
        print(f"wrote {path}")
    for level in (1, 2):
        path = out_dir / f"shell_l{level}.mesh"
        save_medit(shell_mesh(level), str(path))
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
