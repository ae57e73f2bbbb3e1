import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci",
    derandomize=True,
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("ci")


REFERENCE_TET = np.array([
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
])


@pytest.fixture
def reference_tet_mesh():
    from dualvol import TetMesh
    return TetMesh(REFERENCE_TET.copy(), np.array([[0, 1, 2, 3]]))


def random_tet(rng) -> np.ndarray:
    """Random well-shaped, positively oriented tet."""
    from dualvol import signed_volume
    while True:
        pts = rng.normal(size=(4, 3))
        vol = signed_volume(*pts)
        if vol < 0:
            pts[[2, 3]] = pts[[3, 2]]
            vol = -vol
        edge = max(np.linalg.norm(pts[i] - pts[j]) for i in range(4) for j in range(i))
        if vol > 1e-3 * edge ** 3:
            return pts
