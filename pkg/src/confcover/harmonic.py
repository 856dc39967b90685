"""Boundary-constrained harmonic map of a disk-type surface onto the unit disk."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .mesh_core import EdgeWeights, TriangleMesh

logger = logging.getLogger(__name__)


class HarmonicSolveError(RuntimeError):
    """The discrete Laplace system could not be solved to contract accuracy."""


def signed_areas(points2d: np.ndarray, faces: np.ndarray) -> np.ndarray:
    p = points2d[faces]
    return 0.5 * (
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )


@dataclass(frozen=True, eq=False)
class DiskEmbedding:
    """Per-vertex planar coordinates, indexed like the source mesh vertices."""

    coords: np.ndarray
    faces: np.ndarray
    boundary: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return self.coords[:, 0] + 1j * self.coords[:, 1]

    def flipped_faces(self) -> np.ndarray:
        return np.flatnonzero(signed_areas(self.coords, self.faces) <= 0.0)

    def check(self) -> list[str]:
        """Describe every invariant violation (empty list when valid)."""
        problems = []
        r = np.abs(self.z)
        off = np.abs(r[self.boundary] - 1.0)
        if off.max() > 1e-10:
            problems.append(f"boundary vertex off the unit circle by {off.max():.3g}")
        interior = np.ones(len(r), dtype=bool)
        interior[self.boundary] = False
        outside = np.flatnonzero(interior & (r >= 1.0))
        if len(outside):
            problems.append(f"{len(outside)} interior vertices outside the open disk")
        flipped = self.flipped_faces()
        if len(flipped):
            problems.append(f"{len(flipped)} flipped faces, first {flipped[:10].tolist()}")
        return problems


def boundary_circle_map(mesh: TriangleMesh) -> np.ndarray:
    """Angle of each boundary-loop vertex, proportional to cumulative edge length."""
    loop = mesh.boundary
    p = mesh.vertices[loop]
    lengths = np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)
    if np.any(lengths <= 0.0):
        i = int(np.flatnonzero(lengths <= 0.0)[0])
        raise ValueError(f"zero-length boundary edge ({loop[i]}, {loop[(i + 1) % len(loop)]})")
    cum = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    return 2 * np.pi * cum / lengths.sum()


def solve_harmonic(
    mesh: TriangleMesh, weights: EdgeWeights, boundary_angles: np.ndarray
) -> DiskEmbedding:
    """Solve the cotangent Laplace system with boundary vertices on the circle.

    The interior subsystem is symmetric; both coordinates share one sparse LU
    factorization.
    """
    loop = mesh.boundary
    boundary_angles = np.asarray(boundary_angles, dtype=float)
    if boundary_angles.shape != loop.shape:
        raise ValueError("boundary angles must cover exactly the boundary loop")
    n = mesh.n_vertices
    coords = np.zeros((n, 2))
    coords[loop, 0] = np.cos(boundary_angles)
    coords[loop, 1] = np.sin(boundary_angles)

    interior = mesh.interior_vertices()
    if len(interior):
        L = weights.laplacian().tocsc()
        A = L[interior][:, interior]
        rhs = -(L[interior][:, loop] @ coords[loop])
        try:
            lu = spla.splu(A.tocsc())
            x = lu.solve(rhs)
        except RuntimeError as exc:
            raise HarmonicSolveError(
                "singular Laplace system; refine the mesh to remove extreme obtuse angles"
            ) from exc
        if not np.all(np.isfinite(x)):
            raise HarmonicSolveError(
                "non-finite harmonic solution; refine the mesh to remove extreme obtuse angles"
            )
        coords[interior] = x
        scale = np.abs(weights.values).mean()
        res = np.abs(L[interior] @ coords).max()
        if res > 1e-8 * scale:
            raise HarmonicSolveError(
                f"harmonic residual {res:.3g} exceeds 1e-8 * mean|k|; the system is ill-conditioned"
            )
        if np.any(weights.values < 0):
            outside = np.flatnonzero(np.hypot(x[:, 0], x[:, 1]) >= 1.0)
            if len(outside):
                logger.warning(
                    "negative cotangent weights: %d interior vertices left the open disk",
                    len(outside),
                )
    emb = DiskEmbedding(coords, mesh.faces, loop)
    for msg in emb.check():
        logger.warning("harmonic embedding: %s", msg)
    return emb


def harmonic_energy(mesh: TriangleMesh, weights: EdgeWeights, embedding) -> float:
    """``sum k_uv |phi(u) - phi(v)|^2`` over undirected edges."""
    x = embedding.coords if isinstance(embedding, DiskEmbedding) else np.asarray(embedding)
    e = weights.edges
    d = x[e[:, 0]] - x[e[:, 1]]
    return float(np.sum(weights.values * np.sum(d * d, axis=1)))


def write_embedding_csv(coords: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        fh.write("vertex_id,u,v\n")
        for i, (u, v) in enumerate(coords):
            fh.write("%d,%.17g,%.17g\n" % (i, u, v))
