import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from mobiray.materials import default_materials
from mobiray.rt.tracer import SceneIndex


def quad_faces(a, b, c, d):
    """Two triangles tiling the (a, b, c, d) quad, normal from winding."""
    a, b, c, d = (np.asarray(p, dtype=float) for p in (a, b, c, d))
    return [np.stack([a, b, c]), np.stack([a, c, d])]


def make_index(faces, materials=None, tx=None, rx=None):
    """SceneIndex over a raw face list for tracer-level tests."""
    faces = np.stack([np.asarray(f, dtype=float) for f in faces]) if len(faces) else np.zeros((0, 3, 3))
    if materials is None:
        materials = ["metal"] * len(faces)
    tx_sites = {"tx": np.asarray(tx, dtype=float)} if tx is not None else {}
    rx_sites = {"rx": np.asarray(rx, dtype=float)} if rx is not None else {}
    return SceneIndex(faces, list(materials), default_materials(), tx_sites, rx_sites)


@pytest.fixture
def ground_plane():
    """Large square ground plane at z = 0 (two triangles, +z normals)."""
    return quad_faces([-60, -60, 0], [60, -60, 0], [60, 60, 0], [-60, 60, 0])
