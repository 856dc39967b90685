"""Beltrami coefficients, the Cayley transform pair and the linear Beltrami solver."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .harmonic import signed_areas


class BeltramiError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BeltramiField:
    """Per-face complex Beltrami coefficient."""

    mu: np.ndarray

    @property
    def abs(self) -> np.ndarray:
        return np.abs(self.mu)

    def mean_abs(self) -> float:
        return float(np.mean(np.abs(self.mu)))

    def sup_abs(self) -> float:
        return float(np.max(np.abs(self.mu)))

    def violations(self) -> np.ndarray:
        """Faces outside the orientation-preserving regime ``|mu| < 1``."""
        return np.flatnonzero(~(np.abs(self.mu) < 1.0))

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("face_id,re_mu,im_mu,abs_mu\n")
            for i, m in enumerate(self.mu):
                fh.write("%d,%.17g,%.17g,%.17g\n" % (i, m.real, m.imag, abs(m)))


def face_gradients(points2d: np.ndarray, faces: np.ndarray):
    """Per-face gradients of the three barycentric hat functions.

    Returns ``(gx, gy, area)`` with ``gx, gy`` of shape (F, 3) so that the
    gradient of a piecewise-linear ``w`` on face ``t`` is
    ``(gx[t] @ w[faces[t]], gy[t] @ w[faces[t]])``. ``area`` is signed.
    """
    p = points2d[faces]
    x, y = p[..., 0], p[..., 1]
    area = signed_areas(points2d, faces)
    if np.any(area == 0.0):
        raise BeltramiError(f"zero source-face area at face {int(np.flatnonzero(area == 0.0)[0])}")
    gx = np.column_stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]]) / (2 * area[:, None])
    gy = np.column_stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]]) / (2 * area[:, None])
    return gx, gy, area


def _complex(points) -> np.ndarray:
    points = np.asarray(points)
    if np.iscomplexobj(points):
        return points
    return points[:, 0] + 1j * points[:, 1]


def beltrami_from_map(source, target, faces) -> BeltramiField:
    """Beltrami coefficient of the piecewise-linear map ``source -> target``.

    ``mu = f_zbar / f_z`` per face, with the Wirtinger derivatives taken from
    the affine interpolant on each source triangle.
    """
    faces = np.asarray(faces)
    src = np.asarray(source, dtype=float)
    if np.iscomplexobj(source):
        src = np.column_stack([np.real(source), np.imag(source)])
    w = _complex(target)[faces]
    gx, gy, _ = face_gradients(src[:, :2], faces)
    fx = np.sum(gx * w, axis=1)
    fy = np.sum(gy * w, axis=1)
    dz = 0.5 * (fx - 1j * fy)
    dzbar = 0.5 * (fx + 1j * fy)
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = dzbar / dz
    return BeltramiField(mu)


def beltrami_to_surface(source2d, faces, surface3d) -> BeltramiField:
    """Beltrami coefficient of the piecewise-linear map from a planar mesh to a surface.

    Each target triangle is laid flat in its own orthonormal frame; ``mu`` does
    not depend on that choice because it is invariant under rotating the target.
    """
    local = flatten_faces(np.asarray(surface3d, dtype=float), np.asarray(faces))
    tri = np.arange(3 * len(faces)).reshape(-1, 3)
    src = np.asarray(source2d, dtype=float)[np.asarray(faces)].reshape(-1, 2)
    return beltrami_from_map(src, local.reshape(-1, 2), tri)


def surface_to_plane_beltrami(surface3d, faces, target2d) -> BeltramiField:
    """Beltrami coefficient of the piecewise-linear map from a surface to the plane."""
    local = flatten_faces(np.asarray(surface3d, dtype=float), np.asarray(faces))
    tri = np.arange(3 * len(faces)).reshape(-1, 3)
    tgt = np.asarray(target2d, dtype=float)[np.asarray(faces)].reshape(-1, 2)
    return beltrami_from_map(local.reshape(-1, 2), tgt, tri)


def face_frames(vertices3d: np.ndarray, faces: np.ndarray):
    """Orthonormal tangent frame ``(e1, e2)`` per face, with ``e2 = n x e1``.

    ``e1`` is the global x axis projected onto the face plane (the y axis
    when x is within ~8 degrees of the normal), so flat meshes in the xy
    plane get the global axes as their frames.
    """
    p = vertices3d[faces]
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    ref = np.zeros_like(n)
    use_y = np.abs(n[:, 0]) > 0.99
    ref[~use_y, 0] = 1.0
    ref[use_y, 1] = 1.0
    e1 = ref - np.sum(ref * n, axis=1, keepdims=True) * n
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(n, e1)
    return e1, e2


def flatten_faces(vertices3d: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Corner coordinates of each face in its tangent frame, shape (F, 3, 2)."""
    p = vertices3d[faces]
    e1, e2 = face_frames(vertices3d, faces)
    rel = p - p[:, :1]
    return np.stack([np.einsum("fcj,fj->fc", rel, e1), np.einsum("fcj,fj->fc", rel, e2)], axis=2)


def max_dilation(field) -> float:
    """``(1 + sup|mu|) / (1 - sup|mu|)``."""
    mu = field.mu if isinstance(field, BeltramiField) else np.asarray(field)
    s = float(np.max(np.abs(mu)))
    if not s < 1.0:
        raise BeltramiError("map not orientation-preserving: sup|mu| >= 1")
    return (1.0 + s) / (1.0 - s)


# ---------------------------------------------------------------------------
# Cayley transform: unit disk <-> upper half-plane


def cayley(z):
    """``i (1 + z) / (1 - z)``; maps the unit disk onto the upper half-plane."""
    z = np.asarray(z, dtype=complex)
    if np.any(z == 1.0):
        raise ZeroDivisionError("cayley: z = 1 is the pole")
    out = 1j * (1 + z) / (1 - z)
    return out[()] if out.ndim == 0 else out


def cayley_inv(w):
    """``(w - i) / (w + i)``; maps the upper half-plane onto the unit disk."""
    w = np.asarray(w, dtype=complex)
    if np.any(w == -1j):
        raise ZeroDivisionError("cayley_inv: w = -i is the pole")
    out = (w - 1j) / (w + 1j)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# linear Beltrami solver


class ConstraintKind(str, Enum):
    FIXED_BOTH = "fixed_both"
    FIXED_IMAGINARY_ZERO = "fixed_imaginary_zero"


@dataclass(frozen=True)
class PointConstraint:
    vertex: int
    target: complex = 0j
    kind: ConstraintKind = ConstraintKind.FIXED_BOTH


def lbs_matrix(points2d: np.ndarray, faces: np.ndarray, mu: np.ndarray, face_mask=None):
    """Stiffness matrix of ``div(A(mu) grad f) = 0`` on the planar source mesh.

    ``A = [[(rho-1)^2 + eta^2, -2 eta], [-2 eta, (1+rho)^2 + eta^2]] / (1 - |mu|^2)``.
    Faces with ``face_mask`` False are left out of the assembly.
    """
    n = len(points2d)
    gx, gy, area = face_gradients(points2d, faces)
    rho, eta = mu.real, mu.imag
    den = 1.0 - rho**2 - eta**2
    a11 = ((rho - 1) ** 2 + eta**2) / den
    a12 = -2 * eta / den
    a22 = ((rho + 1) ** 2 + eta**2) / den
    rows, cols, vals = [], [], []
    for i in range(3):
        for j in range(3):
            k = area * (
                a11 * gx[:, i] * gx[:, j]
                + a12 * (gx[:, i] * gy[:, j] + gy[:, i] * gx[:, j])
                + a22 * gy[:, i] * gy[:, j]
            )
            rows.append(faces[:, i])
            cols.append(faces[:, j])
            vals.append(k)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    if face_mask is not None:
        keep = np.tile(np.asarray(face_mask, dtype=bool), 9)
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
    return sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def _check_constraints(n: int, constraints, points2d=None):
    fixed: dict[int, complex] = {}
    imag_zero: set[int] = set()
    for c in constraints:
        kind = ConstraintKind(c.kind)
        v = int(c.vertex)
        if not 0 <= v < n:
            raise BeltramiError(f"constraint vertex {v} out of range")
        t = complex(c.target)
        if not np.isfinite(t):
            raise BeltramiError(f"non-finite constraint target at vertex {v}")
        if kind is ConstraintKind.FIXED_BOTH:
            if v in fixed and fixed[v] != t:
                raise BeltramiError(f"constraint conflict at vertex {v}")
            fixed[v] = t
        else:
            imag_zero.add(v)
    for v in imag_zero & set(fixed):
        if fixed[v].imag != 0.0:
            raise BeltramiError(f"constraint conflict at vertex {v}: fixed target off the real axis")
    if len(fixed) < 3:
        raise BeltramiError("at least 3 fixed_both constraints are required")
    pts = np.array(list(fixed.values()))
    spread2 = float(np.max(np.abs(pts - pts.mean())) ** 2)
    # largest triangle among the fixed targets must be non-degenerate
    best = 0.0
    idx = np.argsort(-np.abs(pts - pts.mean()))[: min(len(pts), 12)]
    for a in range(len(idx)):
        for b in range(a + 1, len(idx)):
            for c in range(b + 1, len(idx)):
                u = pts[idx[b]] - pts[idx[a]]
                w = pts[idx[c]] - pts[idx[a]]
                best = max(best, 0.5 * abs(u.real * w.imag - u.imag * w.real))
    if not best > 1e-9 * spread2:
        raise BeltramiError("fixed constraints are collinear")
    return fixed, imag_zero


def lbs_residual_operator(points2d: np.ndarray, faces: np.ndarray, mu: np.ndarray, face_mask=None):
    """Weighted real operator ``M`` with ``M @ [u; v]`` = per-face ``f_zbar - mu f_z``.

    Rows are scaled by ``sqrt(area / (1 - |mu|^2))``, so ``M.T @ M`` has
    diagonal blocks ``lbs_matrix / 4``; the off-diagonal blocks carry the
    signed image area, which only acts on boundary vertices.
    """
    n = len(points2d)
    gx, gy, area = face_gradients(points2d, faces)
    if face_mask is not None:
        keep = np.asarray(face_mask, dtype=bool)
        faces, gx, gy, area, mu = faces[keep], gx[keep], gy[keep], area[keep], mu[keep]
    nf = len(faces)
    scale = np.sqrt(np.abs(area) / (1.0 - np.abs(mu) ** 2))
    a = 0.5 * ((1 - mu)[:, None] * gx + 1j * (1 + mu)[:, None] * gy) * scale[:, None]
    r = np.repeat(np.arange(nf), 3)
    c = faces.ravel()
    ar, ai = a.real.ravel(), a.imag.ravel()
    # Re r = Re(a) u - Im(a) v ; Im r = Im(a) u + Re(a) v
    rows = np.concatenate([r, r, r + nf, r + nf])
    cols = np.concatenate([c, c + n, c, c + n])
    vals = np.concatenate([ar, -ai, ai, ar])
    return sparse.coo_matrix((vals, (rows, cols)), shape=(2 * nf, 2 * n)).tocsr()


def lbs_solve(positions2d, faces, mu, constraints) -> np.ndarray:
    """Reconstruct a planar map with prescribed Beltrami coefficient.

    Minimises ``sum_t area_t |f_zbar - mu_t f_z|^2 / (1 - |mu_t|^2)`` over
    piecewise-linear maps subject to the constraints. At unconstrained
    interior vertices the normal equations are ``div(A(mu) grad f) = 0``
    for the real and imaginary parts separately (see :func:`lbs_matrix`);
    at free boundary vertices the two parts are coupled by the image-area
    term, which makes affine maps with constant ``mu`` exact solutions.

    Faces whose vertices are all fixed do not enter the system and are
    exempt from the ``|mu| < 1`` requirement.

    Returns per-vertex positions, shape (V, 2).
    """
    pts = np.asarray(positions2d, dtype=float)
    faces = np.asarray(faces)
    mu = mu.mu if isinstance(mu, BeltramiField) else np.asarray(mu, dtype=complex)
    mu = np.broadcast_to(mu, (len(faces),)).astype(complex)
    if not np.all(np.isfinite(pts)):
        raise BeltramiError("non-finite source coordinates")
    n = len(pts)
    fixed, imag_zero = _check_constraints(n, constraints)

    fixed_mask = np.zeros(n, dtype=bool)
    fixed_mask[list(fixed)] = True
    active = ~fixed_mask[faces].all(axis=1)
    bad = np.flatnonzero(active & ~(np.abs(mu) < 1.0))
    if len(bad):
        raise BeltramiError(f"|mu| >= 1 on face {int(bad[0])}; map not orientation-preserving")

    M = lbs_residual_operator(pts, faces, mu, face_mask=active)
    x = np.zeros(2 * n)
    known = np.zeros(2 * n, dtype=bool)
    for v, t in fixed.items():
        x[v], x[n + v] = t.real, t.imag
        known[v] = known[n + v] = True
    for v in imag_zero:
        known[n + v] = True
    N = (M.T @ M).tocsc()
    free = np.flatnonzero(~known)
    kn = np.flatnonzero(known)
    x[free] = _solve_block(N, free, kn, x[kn])
    return np.column_stack([x[:n], x[n:]])


def _solve_block(K, free, known, known_vals):
    if len(free) == 0:
        return np.zeros(0)
    Kc = K.tocsc()
    A = Kc[free][:, free]
    rhs = -(Kc[free][:, known] @ known_vals)
    try:
        x = spla.splu(A.tocsc()).solve(rhs)
    except RuntimeError as exc:
        raise BeltramiError("rank-deficient Beltrami system") from exc
    if not np.all(np.isfinite(x)):
        raise BeltramiError("rank-deficient Beltrami system")
    resid = np.abs(A @ x - rhs).max()
    scale = max(np.abs(rhs).max(), np.abs(A).max() * np.abs(x).max(), 1e-300)
    if resid > 1e-8 * scale:
        raise BeltramiError(f"rank-deficient Beltrami system (residual {resid:.3g})")
    return x
