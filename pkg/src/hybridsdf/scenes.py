"""Procedural test meshes and the bundled scene data directory."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import TriangleMesh

DATA_DIR = Path(__file__).parent / "data"


def icosphere(subdivisions: int = 3, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Subdivided icosahedron with vertices on the sphere; 20 * 4**k outward-facing triangles."""
    phi = (1.0 + 5.0 ** 0.5) / 2.0
    verts = [
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    v = [np.array(p, dtype=np.float64) / np.linalg.norm(p) for p in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = v[i] + v[j]
                v.append(m / np.linalg.norm(m))
                cache[key] = len(v) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    verts_arr = np.array(v) * radius + np.asarray(center, dtype=np.float64)
    return TriangleMesh(verts_arr, np.array(faces, dtype=np.int64))


def box(lo, hi) -> TriangleMesh:
    """Closed axis-aligned box with outward normals."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    corners = np.array([[(hi if (i >> k) & 1 else lo)[k] for k in range(3)] for i in range(8)])
    quads = [
        (0, 4, 6, 2), (1, 3, 7, 5),  # -x, +x
        (0, 1, 5, 4), (2, 6, 7, 3),  # -y, +y
        (0, 2, 3, 1), (4, 5, 7, 6),  # -z, +z
    ]
    tris = []
    for a, b, c, d in quads:
        tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(corners, np.array(tris, dtype=np.int64))


def quad(corner, edge_u, edge_v) -> TriangleMesh:
    """Single-sided quad; the normal is ``edge_u x edge_v``."""
    o = np.asarray(corner, dtype=np.float64)
    u = np.asarray(edge_u, dtype=np.float64)
    w = np.asarray(edge_v, dtype=np.float64)
    verts = np.array([o, o + u, o + u + w, o + w])
    return TriangleMesh(verts, np.array([(0, 1, 2), (0, 2, 3)], dtype=np.int64))


# Bundled scenes: each directory holds its OBJ files and a config.toml.
THIN_SLAB_THICKNESS = 0.005  # 0.1 coarse voxel at the bundled 64^3 grid (voxel size 0.05)


def bundled_scenes() -> dict[str, dict[str, TriangleMesh]]:
    ground = quad((-1.5, 0.0, 1.5), (3.0, 0.0, 0.0), (0.0, 0.0, -3.0))
    h = 0.5 * THIN_SLAB_THICKNESS
    return {
        "icosphere": {"icosphere": icosphere(3)},
        "sphere_plane": {"sphere": icosphere(3, 0.4, (0.0, 2.0, 0.0)), "plane": ground},
        "moving_box": {"box": box((-0.875, -0.25, -0.25), (-0.375, 0.25, 0.25))},
        "thin_quad": {"slab": box((-0.4, 0.7 - h, -0.4), (0.4, 0.7 + h, 0.4)), "plane": ground},
    }


def write_bundled_scenes(directory=DATA_DIR) -> None:
    from .geometry import save_obj

    for name, meshes in bundled_scenes().items():
        d = Path(directory) / name
        d.mkdir(parents=True, exist_ok=True)
        for stem, mesh in meshes.items():
            save_obj(mesh, d / f"{stem}.obj")


if __name__ == "__main__":
    write_bundled_scenes()
