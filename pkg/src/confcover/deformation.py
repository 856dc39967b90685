"""Before/after differencing of disk maps and a density derived from it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coverage import DensityField
from .diskmap import ConformalDiskMap


class ConnectivityMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DeformationMetric:
    """Per-vertex displacement between two aligned disk embeddings."""

    values: np.ndarray
    rotation: float = 0.0  # angle (radians) applied to the "after" embedding

    def argmax(self) -> int:
        return int(np.argmax(self.values))

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("vertex_id,displacement\n")
            for i, d in enumerate(self.values):
                fh.write("%d,%.17g\n" % (i, d))


def best_rotation(before: np.ndarray, after: np.ndarray) -> float:
    """Angle ``t`` minimising ``sum |exp(i t) * after - before|^2``.

    For planar point sets the cross-covariance reduces to one complex sum,
    whose argument is the optimal angle.
    """
    # real and imaginary parts kept separate so identical inputs give exactly 0
    re = np.sum(before[:, 0] * after[:, 0]) + np.sum(before[:, 1] * after[:, 1])
    im = np.sum(before[:, 1] * after[:, 0]) - np.sum(before[:, 0] * after[:, 1])
    return float(np.arctan2(im, re)) if (re or im) else 0.0


def disk_difference(map_before: ConformalDiskMap, map_after: ConformalDiskMap) -> DeformationMetric:
    """Displacement per vertex after removing the rotational gauge."""
    fa, fb = map_before.mesh.faces, map_after.mesh.faces
    if map_before.mesh.n_vertices != map_after.mesh.n_vertices or not np.array_equal(fa, fb):
        raise ConnectivityMismatch(
            "meshes differ in connectivity "
            f"({map_before.mesh.n_vertices} vs {map_after.mesh.n_vertices} vertices, "
            f"{len(fa)} vs {len(fb)} faces)"
        )
    t = best_rotation(map_before.coords, map_after.coords)
    c, s = np.cos(t), np.sin(t)
    after = map_after.coords @ np.array([[c, s], [-s, c]])
    d = np.linalg.norm(after - map_before.coords, axis=1)
    return DeformationMetric(d, t)


def density_from_deformation(metric: DeformationMetric, floor: float = 0.1, scale: float = 1.0) -> DensityField:
    """``phi = floor + scale * m / max(m)``, with ``0/0`` read as 0."""
    if floor < 0:
        raise ValueError("floor must be >= 0")
    if scale <= 0:
        raise ValueError("scale must be > 0")
    m = np.asarray(metric.values, dtype=float)
    top = m.max()
    if top > 0:
        phi = floor + scale * m / top
    else:
        if floor == 0:
            raise ValueError("degenerate density: zero metric with zero floor")
        phi = np.full(len(m), float(floor))
    return DensityField(phi)
