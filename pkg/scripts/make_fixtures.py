"""Regenerate the committed mesh fixtures under src/dtnforms/fixtures/.

Disk, annulus and ball meshes are Delaunay triangulations (scipy/qhull) of a
boundary point set placed exactly on the round boundary plus a jittered
interior lattice.  The circle and sphere fixtures are closed surfaces used for
boundary-Laplacian checks.  Every run with the same seed is byte-identical.

    python scripts/make_fixtures.py
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull, Delaunay

from dtnforms.mesh import build_mesh, write_mesh

OUT = Path(__file__).resolve().parents[1] / "src" / "dtnforms" / "fixtures"
SEED = 20240611


def circle_points(radius: float, h: float) -> np.ndarray:
    m = max(8, int(round(2 * np.pi * radius / h)))
    t = 2 * np.pi * np.arange(m) / m
    return radius * np.column_stack([np.cos(t), np.sin(t)])


def hex_lattice(h: float, rmax: float, rmin: float, rng) -> np.ndarray:
    """Hexagonal lattice points with rmin + h/2 < |x| < rmax - h/2, lightly jittered."""
    k = int(np.ceil(rmax / h)) + 2
    i, j = np.meshgrid(np.arange(-k, k + 1), np.arange(-k, k + 1))
    x = h * (i + 0.5 * (j % 2))
    y = h * j * np.sqrt(3) / 2
    p = np.column_stack([x.ravel(), y.ravel()])
    p = p + rng.uniform(-0.08 * h, 0.08 * h, size=p.shape)
    r = np.linalg.norm(p, axis=1)
    keep = (r < rmax - 0.55 * h) & (r > rmin + 0.55 * h)
    return p[keep]


def fibonacci_sphere(radius: float, h: float) -> np.ndarray:
    # area of an equilateral triangle of side h is sqrt(3)/4 h^2, two per vertex
    m = max(12, int(round(4 * np.pi * radius ** 2 / (np.sqrt(3) / 2 * h ** 2))))
    k = np.arange(m) + 0.5
    z = 1 - 2 * k / m
    phi = np.pi * (1 + np.sqrt(5)) * k
    r = np.sqrt(1 - z ** 2)
    return radius * np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def disk(h: float, rng):
    pts = np.vstack([circle_points(1.0, h), hex_lattice(h, 1.0, -1.0, rng)])
    tri = Delaunay(pts).simplices
    return build_mesh(pts, tri, name=f"disk_h{h}")


def annulus(h: float, r_in: float, rng):
    pts = np.vstack([circle_points(1.0, h), circle_points(r_in, h), hex_lattice(h, 1.0, r_in, rng)])
    tri = Delaunay(pts).simplices
    centroid_r = np.linalg.norm(pts[tri].mean(axis=1), axis=1)
    tri = tri[centroid_r > r_in]
    return build_mesh(pts, tri, name=f"annulus_h{h}")


def ball3(h: float, rng):
    surf = fibonacci_sphere(1.0, h)
    k = int(np.ceil(1 / h)) + 1
    g = h * np.arange(-k, k + 1)
    x, y, z = np.meshgrid(g, g, g, indexing="ij")
    body = np.column_stack([x.ravel(), y.ravel(), z.ravel()])
    body = np.vstack([body, body + h / 2])  # body-centred cubic
    body = body + rng.uniform(-0.05 * h, 0.05 * h, size=body.shape)
    body = body[np.linalg.norm(body, axis=1) < 1 - 0.6 * h]
    pts = np.vstack([surf, body])
    tets = Delaunay(pts).simplices
    return build_mesh(pts, tets, name=f"ball3_h{h}")


def sphere2(h: float):
    pts = fibonacci_sphere(1.0, h)
    faces = ConvexHull(pts).simplices
    return build_mesh(pts, faces, name=f"sphere2_h{h}")


def circle(h: float):
    pts = circle_points(1.0, h)
    m = len(pts)
    edges = [(i, (i + 1) % m) for i in range(m)]
    return build_mesh(pts, edges, name=f"circle_h{h}")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(SEED)
    fixtures = {
        "triangle.mesh": (build_mesh([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [[0, 1, 2]], name="triangle"),
                          "unit right triangle"),
        "disk_h0.1.mesh": (disk(0.1, rng), "unit disk, h~0.1"),
        "disk_h0.05.mesh": (disk(0.05, rng), "unit disk, h~0.05"),
        "annulus_h0.1.mesh": (annulus(0.1, 0.5, rng), "annulus 0.5 < r < 1, h~0.1"),
        "ball3_h0.2.mesh": (ball3(0.2, rng), "unit ball in R^3, h~0.2"),
        "circle_h0.02.mesh": (circle(0.02), "unit circle, h~0.02"),
        "sphere2_h0.15.mesh": (sphere2(0.15), "unit sphere S^2, h~0.15"),
    }
    for fname, (mesh, desc) in fixtures.items():
        write_mesh(mesh, OUT / fname,
                   comment=f"{desc}\ngenerated by scripts/make_fixtures.py (seed {SEED})\n"
                           f"counts per degree: {mesh.counts}")
        print(f"{fname:22s} {mesh.counts}")


if __name__ == "__main__":
    main()
