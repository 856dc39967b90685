"""Synthetic disk-topology test surfaces.

All generators start from the same planar ring layout (``disk_points``) so
that vertex indexing is shared between a surface and its deformed copy.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import Delaunay

from .mesh_core import TriangleMesh


def disk_points(n_rings: int, radius: float = 1.0) -> np.ndarray:
    """Hub plus ``n_rings`` concentric rings; ring ``k`` holds ``6k`` points.

    The outer ring starts at angle 0, so the lowest-index boundary vertex
    sits on the positive x axis.
    """
    pts = [np.zeros((1, 2))]
    for k in range(1, n_rings + 1):
        m = 6 * k
        # stagger inner rings to keep triangles well shaped
        offset = 0.0 if k == n_rings else (0.5 * (k % 2)) * 2 * np.pi / m
        t = offset + 2 * np.pi * np.arange(m) / m
        r = radius * k / n_rings
        pts.append(np.column_stack([r * np.cos(t), r * np.sin(t)]))
    return np.vstack(pts)


def triangulate_ccw(points2d: np.ndarray) -> np.ndarray:
    """Delaunay faces of planar points, oriented counter-clockwise."""
    faces = Delaunay(points2d).simplices.astype(np.int64)
    p = points2d[faces]
    area = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 2, 0] - p[:, 0, 0]) * (
        p[:, 1, 1] - p[:, 0, 1]
    )
    faces[area < 0] = faces[area < 0][:, [0, 2, 1]]
    # deterministic order independent of qhull internals
    return faces[np.lexsort(np.sort(faces, axis=1).T[::-1])]


def flat_disk(n_rings: int = 12, radius: float = 1.0) -> TriangleMesh:
    xy = disk_points(n_rings, radius)
    return TriangleMesh.from_arrays(np.column_stack([xy, np.zeros(len(xy))]), triangulate_ccw(xy))


def hex_disk(n_rings: int = 12, radius: float = 1.0) -> TriangleMesh:
    """Flat disk whose connectivity is the triangular lattice inside a hexagon.

    Lattice ring ``k`` is placed on the circle of radius ``k / n_rings`` at
    uniform angles. The hexagon corners sit at 30 + 60 s degrees, so lattice
    lines run along the y axis and the mesh is mirror-symmetric about both
    axes (a Delaunay triangulation of cocircular ring points is not). Within
    each ring vertices are numbered by increasing angle from 0, so for even
    ``n_rings`` the first boundary vertex lies on the positive x axis.
    """
    lattice, circle = [np.zeros(2)], [np.zeros(2)]
    for k in range(1, n_rings + 1):
        lat, ang = [], []
        for s in range(6):
            a0, a1 = np.pi / 6 + s * np.pi / 3, np.pi / 6 + (s + 1) * np.pi / 3
            a = k * np.array([np.cos(a0), np.sin(a0)])
            b = k * np.array([np.cos(a1), np.sin(a1)])
            for t in range(k):
                lat.append(a + (b - a) * t / k)
                ang.append(np.mod(a0 + np.pi / 3 * t / k, 2 * np.pi))
        order = np.argsort(np.round(ang, 12), kind="stable")
        r = radius * k / n_rings
        lattice.extend(np.array(lat)[order])
        circle.extend(r * np.column_stack([np.cos(np.array(ang)[order]), np.sin(np.array(ang)[order])]))
    faces = triangulate_ccw(np.array(lattice))
    xy = np.array(circle)
    return TriangleMesh.from_arrays(np.column_stack([xy, np.zeros(len(xy))]), faces)


def hemisphere(n_rings: int = 13, radius: float = 1.0) -> TriangleMesh:
    """Upper unit hemisphere; the equator is the boundary."""
    xy = disk_points(n_rings)
    r = np.linalg.norm(xy, axis=1)
    theta = 0.5 * np.pi * r
    psi = np.arctan2(xy[:, 1], xy[:, 0])
    v = radius * np.column_stack(
        [np.sin(theta) * np.cos(psi), np.sin(theta) * np.sin(psi), np.cos(theta)]
    )
    return TriangleMesh.from_arrays(v, triangulate_ccw(xy))


def gaussian_bump(
    n_rings: int = 13,
    height: float = 1.5,
    center=(0.0, 0.5),
    width: float = 0.35,
) -> TriangleMesh:
    """Unit disk lifted by a Gaussian peak (a "mountain")."""
    xy = disk_points(n_rings)
    d2 = np.sum((xy - np.asarray(center)) ** 2, axis=1)
    z = height * np.exp(-0.5 * d2 / width**2)
    return TriangleMesh.from_arrays(np.column_stack([xy, z]), triangulate_ccw(xy))


def terrain_patch(n_rings: int = 13, seed: int = 0, amplitude: float = 0.15, n_modes: int = 6):
    """Unit disk lifted by a sum of random smooth Gaussian hills and pits."""
    rng = np.random.default_rng(seed)
    xy = disk_points(n_rings)
    z = np.zeros(len(xy))
    for _ in range(n_modes):
        c = rng.uniform(-0.8, 0.8, size=2)
        s = rng.uniform(0.15, 0.4)
        a = rng.uniform(-1.0, 1.0) * amplitude
        z += a * np.exp(-0.5 * np.sum((xy - c) ** 2, axis=1) / s**2)
    return TriangleMesh.from_arrays(np.column_stack([xy, z]), triangulate_ccw(xy))


def fan(n_rim: int, radius: float = 1.0) -> TriangleMesh:
    """Regular ``n_rim``-gon fanned around a hub vertex (index 0)."""
    t = 2 * np.pi * np.arange(n_rim) / n_rim
    v = np.vstack([[0.0, 0.0, 0.0], np.column_stack([radius * np.cos(t), radius * np.sin(t), np.zeros(n_rim)])])
    faces = [[0, 1 + i, 1 + (i + 1) % n_rim] for i in range(n_rim)]
    return TriangleMesh.from_arrays(v, faces)


def add_normal_bump(mesh: TriangleMesh, center_vertex: int, amplitude: float, width: float):
    """Displace vertices along their normals by a Gaussian of geodesic-ish radius.

    Boundary vertices are kept fixed. Returns ``(deformed_mesh, moved)`` where
    ``moved`` lists the vertices displaced by more than 1e-6 * amplitude.
    """
    v = mesh.vertices
    fn = mesh.face_normals(unit=False)
    vn = np.zeros_like(v)
    for c in range(3):
        np.add.at(vn, mesh.faces[:, c], fn)
    vn /= np.linalg.norm(vn, axis=1, keepdims=True)
    d2 = np.sum((v - v[center_vertex]) ** 2, axis=1)
    disp = amplitude * np.exp(-0.5 * d2 / width**2)
    disp[mesh.boundary] = 0.0
    disp[np.abs(disp) < 1e-6 * abs(amplitude)] = 0.0
    moved = np.flatnonzero(disp != 0.0)
    return TriangleMesh.from_arrays(v + disp[:, None] * vn, mesh.faces), moved
