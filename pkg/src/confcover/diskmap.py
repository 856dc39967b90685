"""Conformal disk map of a surface: harmonic map, Cayley linearisation, LBS correction.

The corrected map is ``g = Y^-1 o f o Y o phi`` where ``phi`` is the harmonic
map (rotated so the Cayley pole sits in the widest boundary gap), ``Y`` the
Cayley transform and ``f`` the linear Beltrami solution in the upper
half-plane. Queries (forward, inverse, Jacobians) act on the final vertex
coordinates as a piecewise-linear map.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import beltrami
from .beltrami import BeltramiField, ConstraintKind, PointConstraint
from .harmonic import (
    boundary_circle_map,
    signed_areas,
    solve_harmonic,
    write_embedding_csv,
)
from .mesh_core import TriangleMesh, cotangent_weights

logger = logging.getLogger(__name__)

BARY_TOL = 1e-12


class DiskMapError(RuntimeError):
    """Numerical failure while building or querying a disk map."""

    def __init__(self, message: str, faces=None):
        super().__init__(message)
        self.faces = [] if faces is None else [int(f) for f in faces]


class OutsideDiskError(ValueError):
    pass


@dataclass(frozen=True)
class DiskMapOptions:
    correction: bool = True
    # k-ring neighbourhood of the pole face held at its Cayley image
    pin_rings: int = 4


@dataclass(eq=False)
class ConformalDiskMap:
    mesh: TriangleMesh
    coords: np.ndarray
    harmonic_coords: np.ndarray
    rotation: complex
    half_plane: np.ndarray | None
    pinned: np.ndarray
    correction_applied: bool
    beltrami_field: BeltramiField
    harmonic_field: BeltramiField
    jacobians: np.ndarray = field(repr=False)
    frames: tuple = field(repr=False)
    locator: "TriangleLocator" = field(repr=False)

    @property
    def z(self) -> np.ndarray:
        return self.coords[:, 0] + 1j * self.coords[:, 1]

    def composite(self) -> np.ndarray:
        """Re-evaluate ``Y^-1 o f o Y o phi`` vertexwise from the stored parts."""
        if self.half_plane is None:
            return self.rotation * (self.harmonic_coords[:, 0] + 1j * self.harmonic_coords[:, 1])
        w = self.half_plane[:, 0] + 1j * self.half_plane[:, 1]
        return beltrami.cayley_inv(w)

    def flipped_faces(self) -> np.ndarray:
        return np.flatnonzero(signed_areas(self.coords, self.mesh.faces) <= 0.0)

    def diagnostics(self) -> dict:
        return {
            "mean_abs_mu_before": self.harmonic_field.mean_abs(),
            "mean_abs_mu_after": self.beltrami_field.mean_abs(),
            "max_dilation": beltrami.max_dilation(self.beltrami_field),
            "flipped_faces": int(len(self.flipped_faces())),
            "correction_applied": bool(self.correction_applied),
        }

    def write(self, csv_path, json_path) -> None:
        write_embedding_csv(self.coords, csv_path)
        with open(json_path, "w") as fh:
            json.dump(self.diagnostics(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    # -- point queries -----------------------------------------------------

    def forward(self, face: int, bary) -> np.ndarray:
        """Disk image of the surface point given by ``face`` and barycentric weights."""
        if not 0 <= int(face) < self.mesh.n_faces:
            raise IndexError(f"invalid face index {face}")
        b = np.asarray(bary, dtype=float)
        if np.any(b < -BARY_TOL) or abs(b.sum() - 1.0) > BARY_TOL:
            raise ValueError("barycentric weights must be nonnegative and sum to 1")
        return b @ self.coords[self.mesh.faces[int(face)]]

    def forward_many(self, faces, bary) -> np.ndarray:
        faces = np.asarray(faces, dtype=np.int64)
        return np.einsum("nc,ncd->nd", np.asarray(bary, dtype=float), self.coords[self.mesh.faces[faces]])

    def inverse(self, z) -> tuple[int, np.ndarray]:
        """Face index and barycentric weights of the disk point ``z``."""
        z = np.asarray(z, dtype=float)
        if np.hypot(z[0], z[1]) > 1.0 + 1e-9:
            raise OutsideDiskError(f"point {z.tolist()} outside disk image")
        return self.locator.locate(z)

    def lift(self, face: int, bary) -> np.ndarray:
        """3D surface point for ``face`` and barycentric weights."""
        return np.asarray(bary, dtype=float) @ self.mesh.vertices[self.mesh.faces[int(face)]]

    def face_jacobian(self, face: int) -> np.ndarray:
        """Linear part of the surface-to-disk map on ``face``, in the face's tangent frame."""
        if not 0 <= int(face) < self.mesh.n_faces:
            raise IndexError(f"invalid face index {face}")
        return self.jacobians[int(face)].copy()

    def tangent_to_3d(self, face: int, vec2) -> np.ndarray:
        e1, e2 = self.frames
        return vec2[0] * e1[face] + vec2[1] * e2[face]


class TriangleLocator:
    """Uniform-grid point location over a planar triangulation.

    Points on shared edges resolve to the lowest face index containing them.
    """

    def __init__(self, coords: np.ndarray, faces: np.ndarray, cells: int | None = None):
        self.coords = coords
        self.faces = faces
        p = coords[faces]
        self.lo = coords.min(axis=0)
        self.hi = coords.max(axis=0)
        n = cells or max(1, int(np.ceil(np.sqrt(2 * len(faces)))))
        self.n = n
        self.size = (self.hi - self.lo) / n
        self.size[self.size == 0] = 1.0
        fmin = np.floor((p.min(axis=1) - self.lo) / self.size).astype(int).clip(0, n - 1)
        fmax = np.floor((p.max(axis=1) - self.lo) / self.size).astype(int).clip(0, n - 1)
        buckets: dict[tuple[int, int], list[int]] = {}
        for t in range(len(faces)):
            for i in range(fmin[t, 0], fmax[t, 0] + 1):
                for j in range(fmin[t, 1], fmax[t, 1] + 1):
                    buckets.setdefault((i, j), []).append(t)
        self.buckets = {k: np.array(v, dtype=np.int64) for k, v in buckets.items()}
        a = p[:, 0]
        self.m = np.stack([p[:, 1] - a, p[:, 2] - a], axis=2)  # (F, 2, 2) columns e1, e2
        self.minv = np.linalg.inv(self.m)

    def barycentric(self, faces: np.ndarray, z: np.ndarray) -> np.ndarray:
        a = self.coords[self.faces[faces, 0]]
        st = np.einsum("fij,fj->fi", self.minv[faces], z - a)
        return np.column_stack([1.0 - st[:, 0] - st[:, 1], st[:, 0], st[:, 1]])

    def _pick(self, cand: np.ndarray, z: np.ndarray, tol: float):
        if len(cand) == 0:
            return None
        b = self.barycentric(cand, z)
        ok = np.flatnonzero(b.min(axis=1) >= -tol)
        if len(ok) == 0:
            return None
        k = ok[np.argmin(cand[ok])]
        return int(cand[k]), b[k]

    def locate(self, z, tol: float = 1e-10):
        z = np.asarray(z, dtype=float)
        ij = np.floor((z - self.lo) / self.size).astype(int)
        hit = None
        if np.all(ij >= -1) and np.all(ij <= self.n):
            ij = ij.clip(0, self.n - 1)
            hit = self._pick(self.buckets.get((int(ij[0]), int(ij[1])), np.zeros(0, np.int64)), z, tol)
        if hit is None:
            hit = self._pick(np.arange(len(self.faces)), z, tol)
        if hit is None:
            raise OutsideDiskError(f"point {z.tolist()} outside disk image")
        face, b = hit
        b = np.clip(b, 0.0, None)
        return face, b / b.sum()

    def contains(self, z, tol: float = 1e-10) -> bool:
        try:
            self.locate(z, tol)
        except OutsideDiskError:
            return False
        return True


def pole_rotation(z: np.ndarray, boundary: np.ndarray) -> complex:
    """Unit phase that moves the middle of the widest boundary gap onto z = 1."""
    ang = np.mod(np.angle(z[boundary]), 2 * np.pi)
    order = np.argsort(ang, kind="stable")
    a = ang[order]
    gaps = np.diff(np.r_[a, a[0] + 2 * np.pi])
    k = int(np.argmax(gaps))
    mid = a[k] + 0.5 * gaps[k]
    return complex(np.exp(-1j * mid))


def pole_face(mesh: TriangleMesh, z: np.ndarray) -> np.ndarray:
    """Vertices of the face whose boundary edge straddles z = 1."""
    loop = mesh.boundary
    ang = np.mod(np.angle(z[loop]), 2 * np.pi)
    nb = len(loop)
    # boundary edges follow the loop; the straddling one wraps from high angle to low
    k = next(i for i in range(nb) if ang[(i + 1) % nb] < ang[i])
    a, b = loop[k], loop[(k + 1) % nb]
    f = mesh.faces
    has = ((f == a).any(axis=1)) & ((f == b).any(axis=1))
    return f[np.flatnonzero(has)[0]]


def _surface_beltrami(mesh: TriangleMesh, coords: np.ndarray) -> BeltramiField:
    return beltrami.surface_to_plane_beltrami(mesh.vertices, mesh.faces, coords)


def _jacobians(mesh: TriangleMesh, coords: np.ndarray):
    local = beltrami.flatten_faces(mesh.vertices, mesh.faces)
    ds = np.stack([local[:, 1] - local[:, 0], local[:, 2] - local[:, 0]], axis=2)
    d = coords[mesh.faces]
    dd = np.stack([d[:, 1] - d[:, 0], d[:, 2] - d[:, 0]], axis=2)
    return dd @ np.linalg.inv(ds), beltrami.face_frames(mesh.vertices, mesh.faces)


def correct_in_half_plane(mesh: TriangleMesh, z: np.ndarray, pin_rings: int = 4):
    """One LBS pass in the upper half-plane.

    ``z`` is the rotated harmonic map (pole-free). Returns the half-plane
    solution (V, 2) and the pinned vertex indices.
    """
    w = beltrami.cayley(z)
    src = np.column_stack([w.real, w.imag])
    # mu of (Y o phi)^-1: swap source and target of the surface -> plane map
    mu = beltrami.beltrami_to_surface(src, mesh.faces, mesh.vertices)
    flipped = np.flatnonzero(signed_areas(src, mesh.faces) <= 0.0)
    pins = set(mesh.vertex_rings(pole_face(mesh, z), pin_rings).tolist())
    pins |= set(mesh.faces[flipped].ravel().tolist())
    pins = np.array(sorted(pins), dtype=np.int64)
    constraints = [PointConstraint(int(v), complex(w[v])) for v in pins]
    pin_set = set(pins.tolist())
    constraints += [
        PointConstraint(int(v), 0j, ConstraintKind.FIXED_IMAGINARY_ZERO)
        for v in mesh.boundary
        if int(v) not in pin_set
    ]
    f = beltrami.lbs_solve(src, mesh.faces, mu, constraints)
    return f, pins


def build_disk_map(mesh: TriangleMesh, opts: DiskMapOptions | None = None) -> ConformalDiskMap:
    """Flatten ``mesh`` onto the unit disk.

    With correction off the harmonic map is returned unchanged. With
    correction on, the half-plane LBS result is kept only if it flips no face
    and does not raise the mean per-face ``|mu|``; otherwise the harmonic map
    is returned unrotated and ``correction_applied`` is False.
    """
    opts = opts or DiskMapOptions()
    weights = cotangent_weights(mesh)
    phi = solve_harmonic(mesh, weights, boundary_circle_map(mesh))
    mu_phi = _surface_beltrami(mesh, phi.coords)

    rotation = 1.0 + 0j
    half_plane = None
    pins = np.zeros(0, dtype=np.int64)
    coords = phi.coords.copy()
    field_final = mu_phi
    applied = False
    if opts.correction:
        rotation = pole_rotation(phi.z, mesh.boundary)
        z = rotation * phi.z
        coords = np.column_stack([z.real, z.imag])
        hp, pins = correct_in_half_plane(mesh, z, opts.pin_rings)
        g = beltrami.cayley_inv(hp[:, 0] + 1j * hp[:, 1])
        g_xy = np.column_stack([g.real, g.imag])
        mu_g = _surface_beltrami(mesh, g_xy)
        flipped = np.flatnonzero(signed_areas(g_xy, mesh.faces) <= 0.0)
        if len(flipped):
            logger.warning(
                "correction rejected: %d flipped faces %s", len(flipped), flipped[:10].tolist()
            )
        elif mu_g.mean_abs() > mu_phi.mean_abs():
            logger.info(
                "correction rejected: mean|mu| %.6g exceeds harmonic %.6g",
                mu_g.mean_abs(),
                mu_phi.mean_abs(),
            )
        else:
            coords, half_plane, field_final, applied = g_xy, hp, mu_g, True
        if not applied:
            coords, rotation, pins = phi.coords.copy(), 1.0 + 0j, np.zeros(0, dtype=np.int64)

    flipped = np.flatnonzero(signed_areas(coords, mesh.faces) <= 0.0)
    if len(flipped):
        raise DiskMapError(f"{len(flipped)} flipped faces in the disk embedding", flipped)
    jac, frames = _jacobians(mesh, coords)
    return ConformalDiskMap(
        mesh=mesh,
        coords=coords,
        harmonic_coords=phi.coords,
        rotation=rotation,
        half_plane=half_plane,
        pinned=pins,
        correction_applied=applied,
        beltrami_field=field_final,
        harmonic_field=mu_phi,
        jacobians=jac,
        frames=frames,
        locator=TriangleLocator(coords, mesh.faces),
    )
