"""Multi-agent coverage on the disk image of a surface.

Integrals over the surface are evaluated on the disk: each disk triangle is
split into ``4**order`` congruent sub-triangles and sampled at their
centroids (one-point rule). The density is interpolated through the surface
barycentric coordinates, so a sample at ``w`` carries ``phi(f^-1(w))``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .diskmap import ConformalDiskMap, OutsideDiskError
from .harmonic import signed_areas

COLLISION_TOL = 1e-12
JITTER = 1e-9


@dataclass(frozen=True, eq=False)
class DensityField:
    """Per-vertex event density, nonnegative and not identically zero."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise ValueError("density must be a finite per-vertex vector")
        if np.any(v < 0):
            raise ValueError("density must be nonnegative")
        if not np.any(v > 0):
            raise ValueError("density is identically zero")
        object.__setattr__(self, "values", v)

    @classmethod
    def uniform(cls, n_vertices: int, value: float = 1.0) -> "DensityField":
        return cls(np.full(n_vertices, float(value)))

    def at(self, faces_vidx: np.ndarray, bary: np.ndarray) -> np.ndarray:
        return np.einsum("nc,nc->n", bary, self.values[faces_vidx])

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("vertex_id,phi\n")
            for i, p in enumerate(self.values):
                fh.write("%d,%.17g\n" % (i, p))


@dataclass(frozen=True, eq=False)
class Samples:
    """Quadrature samples on the disk.

    ``face`` is the disk triangle each sample came from and
    ``centroid_index[f]`` is the sample sitting at the centroid of face ``f``
    (for pull-back labelling).
    """

    points: np.ndarray
    weights: np.ndarray
    face: np.ndarray
    centroid_index: np.ndarray

    def __len__(self):
        return len(self.weights)

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def subset(self, mask) -> "Samples":
        """Samples where ``mask`` holds; ``centroid_index`` entries become -1 when dropped."""
        mask = np.asarray(mask, dtype=bool)
        new = np.cumsum(mask) - 1
        ci = np.where(mask[self.centroid_index], new[self.centroid_index], -1)
        return Samples(self.points[mask], self.weights[mask], self.face[mask], ci)


def subdivision_barycentrics(order: int) -> np.ndarray:
    """Barycentric centroids of the ``4**order`` congruent sub-triangles.

    Because ``2**order`` is never divisible by 3, the face centroid
    (1/3, 1/3, 1/3) is always the centroid of one sub-triangle.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    m = 2**order
    out = []
    for i in range(m):
        for j in range(m - i):
            # upright sub-triangle with corner at lattice (i, j)
            out.append(((i + 1 / 3) / m, (j + 1 / 3) / m))
            if i + j < m - 1:
                out.append(((i + 2 / 3) / m, (j + 2 / 3) / m))
    st = np.array(out)
    return np.column_stack([1.0 - st.sum(axis=1), st[:, 0], st[:, 1]])


def build_quadrature(dmap: ConformalDiskMap, density: DensityField, order: int = 1) -> Samples:
    """Centroid-rule samples ``(disk point, sub-area * phi)`` over the disk mesh."""
    bary = subdivision_barycentrics(order)
    n_sub = len(bary)
    faces = dmap.mesh.faces
    tri = dmap.coords[faces]  # (F, 3, 2)
    pts = np.einsum("sc,fcd->fsd", bary, tri).reshape(-1, 2)
    area = signed_areas(dmap.coords, faces) / n_sub
    phi = np.einsum("sc,fc->fs", bary, density.values[faces]).ravel()
    w = np.repeat(area, n_sub) * phi
    face_of = np.repeat(np.arange(len(faces)), n_sub)
    # sub-triangle whose centroid is nearest the face centroid (exact hit when it exists)
    k = int(np.argmin(np.abs(bary - 1.0 / 3.0).sum(axis=1)))
    centroid_index = np.arange(len(faces)) * n_sub + k
    return Samples(pts, w, face_of, centroid_index)


@dataclass(frozen=True, eq=False)
class VoronoiPartition:
    labels: np.ndarray
    masses: np.ndarray
    centroids: np.ndarray
    sites: np.ndarray

    @property
    def n_sites(self) -> int:
        return len(self.sites)


def _check_distinct(sites: np.ndarray) -> None:
    d = np.linalg.norm(sites[:, None, :] - sites[None, :, :], axis=2)
    d[np.diag_indices(len(sites))] = np.inf
    if len(sites) > 1 and d.min() <= COLLISION_TOL:
        i, j = np.unravel_index(np.argmin(d), d.shape)
        raise ValueError(f"duplicate sites {min(i, j)} and {max(i, j)}")


def nearest_site(sites: np.ndarray, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index of the nearest site per point (lowest index on ties) and the squared distance."""
    d2 = ((points[:, None, :] - sites[None, :, :]) ** 2).sum(axis=2)
    lab = np.argmin(d2, axis=1)  # argmin returns the first minimum
    return lab, d2[np.arange(len(points)), lab]


def cell_centroid_mass(labels, samples: Samples, sites) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell weighted centroid and mass; an empty cell keeps its site position."""
    sites = np.asarray(sites, dtype=float)
    n = len(sites)
    mass = np.bincount(labels, weights=samples.weights, minlength=n)
    mx = np.bincount(labels, weights=samples.weights * samples.points[:, 0], minlength=n)
    my = np.bincount(labels, weights=samples.weights * samples.points[:, 1], minlength=n)
    cent = sites.copy()
    nz = mass > 0
    cent[nz, 0] = mx[nz] / mass[nz]
    cent[nz, 1] = my[nz] / mass[nz]
    return cent, mass


def voronoi_assign(sites, samples: Samples) -> VoronoiPartition:
    sites = np.asarray(sites, dtype=float).reshape(-1, 2)
    _check_distinct(sites)
    labels, _ = nearest_site(sites, samples.points)
    cent, mass = cell_centroid_mass(labels, samples, sites)
    return VoronoiPartition(labels, mass, cent, sites)


def coverage_cost(sites, samples: Samples) -> float:
    """``H = sum_s w_s min_i |q_s - p_i|^2``."""
    sites = np.asarray(sites, dtype=float).reshape(-1, 2)
    _check_distinct(sites)
    _, d2 = nearest_site(sites, samples.points)
    return float(np.dot(samples.weights, d2))


# -- agents -------------------------------------------------------------------


@dataclass(eq=False)
class AgentFleet:
    """Agents tracked both on the surface (face, barycentric) and on the disk."""

    faces: np.ndarray
    bary: np.ndarray
    disk: np.ndarray
    gains: np.ndarray

    def __post_init__(self):
        self.faces = np.asarray(self.faces, dtype=np.int64)
        self.bary = np.asarray(self.bary, dtype=float)
        self.disk = np.asarray(self.disk, dtype=float)
        g = np.broadcast_to(np.asarray(self.gains, dtype=float), (len(self.faces),)).copy()
        if len(self.faces) < 1:
            raise ValueError("a fleet needs at least one agent")
        if np.any(g <= 0):
            raise ValueError("gains must be positive")
        self.gains = g

    @property
    def n(self) -> int:
        return len(self.faces)

    @classmethod
    def from_disk(cls, dmap: ConformalDiskMap, points, gains=1.0) -> "AgentFleet":
        pts = separate_collisions(np.asarray(points, dtype=float).reshape(-1, 2))
        loc = [dmap.inverse(p) for p in pts]
        faces = np.array([f for f, _ in loc], dtype=np.int64)
        bary = np.array([b for _, b in loc])
        return cls(faces, bary, dmap.forward_many(faces, bary), gains)

    @classmethod
    def random(cls, dmap: ConformalDiskMap, n: int, seed: int, gains=1.0) -> "AgentFleet":
        """Area-weighted uniform placement on the surface from a PCG64 stream."""
        rng = np.random.Generator(np.random.PCG64(seed))
        area = dmap.mesh.face_areas()
        faces = rng.choice(len(area), size=n, p=area / area.sum())
        u = rng.uniform(size=(n, 2))
        # reflect points of the unit square into the lower triangle (uniform on the face)
        flip = u.sum(axis=1) > 1.0
        u[flip] = 1.0 - u[flip]
        bary = np.column_stack([1.0 - u.sum(axis=1), u[:, 0], u[:, 1]])
        disk = dmap.forward_many(faces, bary)
        fleet = cls(faces, bary, disk, gains)
        sep = separate_collisions(disk)
        if not np.array_equal(sep, disk):
            fleet = cls.from_disk(dmap, sep, gains)
        return fleet

    def surface_points(self, dmap: ConformalDiskMap) -> np.ndarray:
        return np.einsum("nc,ncd->nd", self.bary, dmap.mesh.vertices[dmap.mesh.faces[self.faces]])

    def copy(self) -> "AgentFleet":
        return AgentFleet(self.faces.copy(), self.bary.copy(), self.disk.copy(), self.gains.copy())


def separate_collisions(points: np.ndarray) -> np.ndarray:
    """Nudge later-indexed sites off earlier ones by ``JITTER`` (direction from the index)."""
    p = np.array(points, dtype=float)
    for j in range(1, len(p)):
        for _ in range(8):
            if np.min(np.linalg.norm(p[:j] - p[j], axis=1)) > COLLISION_TOL:
                break
            a = 2.399963229728653 * j  # golden angle keeps directions distinct
            r = -np.sign(p[j]) if np.linalg.norm(p[j]) > 1 - 1e-6 else np.zeros(2)
            p[j] = p[j] + JITTER * (np.array([np.cos(a), np.sin(a)]) + r)
    return p


def project_to_disk_image(dmap: ConformalDiskMap, z: np.ndarray) -> np.ndarray:
    """Nearest point of the disk mesh image (a polygon inscribed in the unit circle)."""
    if dmap.locator.contains(z):
        return z
    loop = dmap.mesh.boundary
    a = dmap.coords[loop]
    b = np.roll(a, -1, axis=0)
    ab = b - a
    t = np.clip(np.einsum("ij,ij->i", z - a, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
    q = a + t[:, None] * ab
    k = int(np.argmin(np.linalg.norm(q - z, axis=1)))
    return q[k]


def control_step_disk(fleet: AgentFleet, centroids, dt: float, dmap: ConformalDiskMap | None = None):
    """``p + dt k (C - p)``, clamped to the disk mesh image when ``dmap`` is given."""
    step = dt * fleet.gains
    if np.any(step > 1.0 + 1e-12):
        raise ValueError("dt * k must not exceed 1")
    c = np.asarray(centroids, dtype=float)
    new = fleet.disk + step[:, None] * (c - fleet.disk)
    if dmap is not None:
        new = np.array([project_to_disk_image(dmap, z) for z in new])
    return new


def _edge_exit(bary: np.ndarray, dbary: np.ndarray):
    """Smallest t in (0, 1] at which ``bary + t * dbary`` leaves the triangle."""
    t_best, edge = 1.0, -1
    for c in range(3):
        if dbary[c] < 0:
            t = -bary[c] / dbary[c]
            if t < t_best:
                t_best, edge = t, c
    return max(t_best, 0.0), edge


def _neighbor_across(dmap: ConformalDiskMap, face: int, corner: int):
    """Face sharing the edge opposite ``corner`` of ``face`` (None on the boundary)."""
    f = dmap.mesh.faces
    a, b = f[face, (corner + 1) % 3], f[face, (corner + 2) % 3]
    cand = np.flatnonzero((f == a).any(axis=1) & (f == b).any(axis=1))
    cand = cand[cand != face]
    return int(cand[0]) if len(cand) else None


def surface_walk(dmap: ConformalDiskMap, face: int, bary: np.ndarray, disp3d: np.ndarray, max_steps: int = 10000):
    """Straightest walk: move ``disp3d`` (tangent) across faces, unfolding at edges.

    Returns ``(face, bary, hit_boundary)``.
    """
    mesh = dmap.mesh
    V = mesh.vertices
    remaining = np.asarray(disp3d, dtype=float)
    b = np.asarray(bary, dtype=float).copy()
    for _ in range(max_steps):
        tri = V[mesh.faces[face]]
        n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
        n /= np.linalg.norm(n)
        length = np.linalg.norm(remaining)
        if length == 0.0:
            return face, b, False
        # keep the tangential part, preserving length (unfold onto this face)
        tang = remaining - np.dot(remaining, n) * n
        tl = np.linalg.norm(tang)
        if tl == 0.0:
            return face, b, False
        tang *= length / tl
        e1, e2 = tri[1] - tri[0], tri[2] - tri[0]
        G = np.array([[e1 @ e1, e1 @ e2], [e1 @ e2, e2 @ e2]])
        st = np.linalg.solve(G, [tang @ e1, tang @ e2])
        db = np.array([-st.sum(), st[0], st[1]])
        t, corner = _edge_exit(b, db)
        b = b + t * db
        if corner < 0:
            b = np.clip(b, 0.0, None)
            return face, b / b.sum(), False
        b[corner] = 0.0
        b = np.clip(b, 0.0, None)
        b /= b.sum()
        remaining = (1.0 - t) * tang
        nb = _neighbor_across(dmap, face, corner)
        if nb is None:
            return face, b, True
        # express the point in the neighbour's barycentrics
        p = b @ tri
        nf = mesh.faces[nb]
        ntri = V[nf]
        e1, e2 = ntri[1] - ntri[0], ntri[2] - ntri[0]
        G = np.array([[e1 @ e1, e1 @ e2], [e1 @ e2, e2 @ e2]])
        st = np.linalg.solve(G, [(p - ntri[0]) @ e1, (p - ntri[0]) @ e2])
        b = np.clip(np.array([1.0 - st.sum(), st[0], st[1]]), 0.0, None)
        b /= b.sum()
        face = nb
    return face, b, False


def control_step_surface(fleet: AgentFleet, dmap: ConformalDiskMap, centroids, dt: float):
    """Surface control law through the per-face inverse Jacobian.

    The disk displacement ``dt k (C - f(p))`` is pulled back to the surface
    tangent plane with ``J^-1`` of the agent's face and then walked across
    the mesh. Returns ``(faces, bary, disk, boundary_hit)``; disk positions
    are re-evaluated from the surface positions.
    """
    step = dt * fleet.gains
    if np.any(step > 1.0 + 1e-12):
        raise ValueError("dt * k must not exceed 1")
    c = np.asarray(centroids, dtype=float)
    faces = fleet.faces.copy()
    bary = fleet.bary.copy()
    hit = np.zeros(fleet.n, dtype=bool)
    e1, e2 = dmap.frames
    for i in range(fleet.n):
        dw = step[i] * (c[i] - fleet.disk[i])
        if not np.any(dw):
            continue
        f = int(faces[i])
        v = np.linalg.solve(dmap.jacobians[f], dw)
        disp = v[0] * e1[f] + v[1] * e2[f]
        faces[i], bary[i], hit[i] = surface_walk(dmap, f, bary[i], disp)
    disk = dmap.forward_many(faces, bary)
    return faces, bary, disk, hit


# -- Lloyd iteration -------------------------------------------------------------


@dataclass(frozen=True)
class LloydConfig:
    dt: float = 1.0
    max_iters: int = 200
    tol: float = 1e-6
    order: int = 1
    law: str = "disk"

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.law not in ("disk", "surface"):
            raise ValueError("law must be 'disk' or 'surface'")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    disk: np.ndarray
    surface: np.ndarray
    H: float
    max_centroid_dist: float
    boundary_hits: int = 0


@dataclass(eq=False)
class CoverageTrace:
    records: list = field(default_factory=list)
    partition: VoronoiPartition | None = None
    converged: bool = False
    samples: Samples | None = None

    @property
    def H(self) -> np.ndarray:
        return np.array([r.H for r in self.records])

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]

    def is_monotone(self, slack: float = 1e-9) -> bool:
        h = self.H
        return bool(np.all(np.diff(h) <= slack))

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("iter,H,max_centroid_dist\n")
            for r in self.records:
                fh.write("%d,%.17g,%.17g\n" % (r.iteration, r.H, r.max_centroid_dist))

    def write_positions(self, path) -> None:
        data = [
            {
                "iter": r.iteration,
                "disk": r.disk.tolist(),
                "surface": r.surface.tolist(),
            }
            for r in self.records
        ]
        with open(path, "w") as fh:
            json.dump(data, fh)
            fh.write("\n")


def lloyd_run(dmap: ConformalDiskMap, fleet: AgentFleet, density: DensityField, config: LloydConfig) -> CoverageTrace:
    """Alternate Voronoi partition and control steps until centroidal.

    Each record holds the positions at the start of the iteration together
    with their cost and the largest site-to-centroid distance.
    """
    samples = build_quadrature(dmap, density, config.order)
    fleet = fleet.copy()
    trace = CoverageTrace(samples=samples)
    hits = 0
    for it in range(config.max_iters + 1):
        part = voronoi_assign(fleet.disk, samples)
        H = coverage_cost(fleet.disk, samples)
        dist = float(np.max(np.linalg.norm(part.centroids - fleet.disk, axis=1)))
        trace.records.append(
            IterationRecord(it, fleet.disk.copy(), fleet.surface_points(dmap), H, dist, hits)
        )
        trace.partition = part
        if dist < config.tol:
            trace.converged = True
            break
        if it == config.max_iters:
            break
        if config.law == "disk":
            new = separate_collisions(control_step_disk(fleet, part.centroids, config.dt, dmap))
            fleet = AgentFleet.from_disk(dmap, new, fleet.gains)
            hits = 0
        else:
            faces, bary, disk, hit = control_step_surface(fleet, dmap, part.centroids, config.dt)
            fleet = AgentFleet(faces, bary, disk, fleet.gains)
            sep = separate_collisions(disk)
            if not np.array_equal(sep, disk):
                fleet = AgentFleet.from_disk(dmap, sep, fleet.gains)
            hits = int(hit.sum())
    return trace


# -- pull-back --------------------------------------------------------------------


def pullback_partition(dmap: ConformalDiskMap, partition: VoronoiPartition, samples: Samples | None = None) -> np.ndarray:
    """Site label per surface face: the owner of the face's centroid sample."""
    if samples is not None and len(samples) == len(partition.labels):
        idx = samples.centroid_index
        if np.all(idx >= 0):
            return partition.labels[idx].copy()
    cent = dmap.coords[dmap.mesh.faces].mean(axis=1)
    labels, _ = nearest_site(partition.sites, cent)
    return labels


def pullback_path(dmap: ConformalDiskMap, polyline) -> np.ndarray:
    """Lift disk points to 3D surface points through the inverse map."""
    pts = np.asarray(polyline, dtype=float).reshape(-1, 2)
    out = np.empty((len(pts), 3))
    for i, z in enumerate(pts):
        try:
            f, b = dmap.inverse(z)
        except OutsideDiskError as exc:
            raise OutsideDiskError(f"path point {i} outside disk image") from exc
        out[i] = dmap.lift(f, b)
    return out


def write_partition_csv(labels: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        fh.write("face_id,site\n")
        for i, s in enumerate(labels):
            fh.write("%d,%d\n" % (i, s))


def write_paths_json(paths, path) -> None:
    with open(path, "w") as fh:
        json.dump([np.asarray(p).tolist() for p in paths], fh)
        fh.write("\n")
