"""Triangle meshes with disk topology: loading, validation, cotangent weights."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

AREA_EPS = 1e-12
ANGLE_EPS = 1e-9


class MeshError(ValueError):
    """Raised when a mesh file cannot be parsed or violates disk topology."""


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Oriented triangle mesh with exactly one boundary loop.

    Build instances through :meth:`from_arrays` (or :func:`load_mesh`), which
    validates the topology and extracts the boundary loop.

    Attributes
    ----------
    vertices : ndarray, shape (V, 3)
    faces : ndarray of int, shape (F, 3)
        Counter-clockwise oriented vertex triples.
    boundary : ndarray of int
        Boundary loop starting at its lowest vertex index, oriented so the
        surface lies on the left.
    edges : ndarray of int, shape (E, 2)
        Undirected edges, lower index first, sorted lexicographically.
    """

    vertices: np.ndarray
    faces: np.ndarray
    boundary: np.ndarray
    edges: np.ndarray = field(repr=False)

    @classmethod
    def from_arrays(cls, vertices, faces) -> "TriangleMesh":
        v = np.array(vertices, dtype=float)
        f = np.array(faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] not in (2, 3):
            raise MeshError("vertices must have shape (V, 3)")
        if v.shape[1] == 2:
            v = np.column_stack([v, np.zeros(len(v))])
        if f.ndim != 2 or f.shape[1] != 3:
            raise MeshError("faces must be vertex-index triples")
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v).all(axis=1))[0])
            raise MeshError(f"non-finite coordinate at vertex {bad}")
        edges, boundary = _validate(v, f)
        v.flags.writeable = False
        f.flags.writeable = False
        edges.flags.writeable = False
        boundary.flags.writeable = False
        return cls(v, f, boundary, edges)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces

    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_normals(unit=False), axis=1)

    def face_normals(self, unit: bool = True) -> np.ndarray:
        p = self.vertices[self.faces]
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        if unit:
            n = n / np.linalg.norm(n, axis=1, keepdims=True)
        return n

    def interior_vertices(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary] = False
        return np.flatnonzero(mask)

    def bbox_diagonal(self) -> float:
        return float(np.linalg.norm(self.vertices.max(axis=0) - self.vertices.min(axis=0)))

    def edge_face_counts(self) -> np.ndarray:
        """Number of faces incident to each entry of :attr:`edges`."""
        ekeys = self.edges[:, 0] * self.n_vertices + self.edges[:, 1]
        idx = np.searchsorted(ekeys, _edge_keys(self.faces, self.n_vertices))
        return np.bincount(idx, minlength=self.n_edges)

    def vertex_rings(self, seeds, n_rings: int) -> np.ndarray:
        """Vertices within ``n_rings`` edge hops of ``seeds``."""
        from scipy import sparse

        e = self.edges
        adj = sparse.coo_matrix(
            (np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
            shape=(self.n_vertices, self.n_vertices),
        ).tocsr()
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[np.asarray(seeds, dtype=np.int64)] = True
        for _ in range(n_rings):
            mask |= adj @ mask.astype(float) > 0
        return np.flatnonzero(mask)


def _edge_keys(faces: np.ndarray, n: int) -> np.ndarray:
    he = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    lo = he.min(axis=1)
    hi = he.max(axis=1)
    return lo * n + hi


class _Topology:
    """Scratch state shared by the validation stages."""

    def __init__(self, vertices: np.ndarray, faces: np.ndarray):
        self.v = vertices
        self.f = faces
        self.edges = None
        self.loop = None
        self.n_loops = 0


def _stage_indices(t: _Topology) -> str:
    faces, n = t.f, len(t.v)
    if len(faces) == 0:
        raise MeshError("mesh has no faces")
    if faces.min() < 0 or faces.max() >= n:
        bad = int(np.flatnonzero((faces < 0).any(axis=1) | (faces >= n).any(axis=1))[0])
        raise MeshError(f"face {bad} references a vertex index out of range")
    repeated = (faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 2] == faces[:, 0])
    if repeated.any():
        raise MeshError(f"face {int(np.flatnonzero(repeated)[0])} repeats a vertex")
    used = np.zeros(n, dtype=bool)
    used[faces.ravel()] = True
    if not used.all():
        raise MeshError(f"vertex {int(np.flatnonzero(~used)[0])} is not referenced by any face")
    return "pass"


def _half_edges(faces):
    src = np.concatenate([faces[:, 0], faces[:, 1], faces[:, 2]])
    dst = np.concatenate([faces[:, 1], faces[:, 2], faces[:, 0]])
    return src, dst, np.tile(np.arange(len(faces)), 3)


def _stage_edge_manifold(t: _Topology) -> str:
    n = len(t.v)
    src, dst, _ = _half_edges(t.f)
    ukey = np.minimum(src, dst) * n + np.maximum(src, dst)
    uniq, counts = np.unique(ukey, return_counts=True)
    if counts.max() > 2:
        k = int(np.flatnonzero(counts > 2)[0])
        a, b = divmod(int(uniq[k]), n)
        raise MeshError(f"non-manifold edge ({a}, {b}) is shared by {int(counts[k])} faces")
    t.edges = np.column_stack(divmod(uniq, n)).astype(np.int64)
    return "pass"


def _stage_orientation(t: _Topology) -> str:
    n = len(t.v)
    src, dst, owner = _half_edges(t.f)
    dkey = src * n + dst
    order = np.argsort(dkey, kind="stable")
    d_sorted = dkey[order]
    dup = np.flatnonzero(d_sorted[1:] == d_sorted[:-1])
    if len(dup):
        a, b = divmod(int(d_sorted[dup[0]]), n)
        t1, t2 = sorted((int(owner[order[dup[0]]]), int(owner[order[dup[0] + 1]])))
        raise MeshError(
            f"inconsistent face orientation: edge ({a}, {b}) has the same direction "
            f"in faces {t1} and {t2}"
        )
    return "pass"


def _stage_boundary(t: _Topology) -> str:
    n = len(t.v)
    src, dst, _ = _half_edges(t.f)
    twin = set((dst * n + src).tolist())
    # boundary half-edges are those without a twin; they keep the surface on the left
    nxt = {}
    for a, b in zip(src.tolist(), dst.tolist()):
        if a * n + b in twin:
            continue
        if a in nxt:
            raise MeshError(f"non-manifold boundary vertex {a}")
        nxt[a] = b
    if not nxt:
        raise MeshError("no boundary loop: the surface is closed")
    seen = set()
    loops = []
    for start in sorted(nxt):
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        cur = nxt[start]
        while cur != start:
            if cur not in nxt or cur in seen:
                raise MeshError(f"non-manifold boundary vertex {cur}")
            loop.append(cur)
            seen.add(cur)
            cur = nxt[cur]
        loops.append(loop)
    t.n_loops = len(loops)
    if len(loops) > 1:
        raise MeshError(
            f"multiple boundary loops: {len(loops)} loops, second starts at vertex {loops[1][0]}"
        )
    t.loop = np.array(loops[0], dtype=np.int64)
    return "1"


def _stage_euler(t: _Topology) -> str:
    chi = len(t.v) - len(t.edges) + len(t.f)
    if chi != 1:
        raise MeshError(f"nonzero genus: Euler characteristic {chi} != 1")
    return str(chi)


def _stage_areas(t: _Topology) -> str:
    v, f = t.v, t.f
    diag2 = float(np.sum((v.max(axis=0) - v.min(axis=0)) ** 2))
    p = v[f]
    areas = 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
    bad = np.flatnonzero(areas <= AREA_EPS * diag2)
    if len(bad):
        raise MeshError(f"degenerate face {int(bad[0])} (area {areas[bad[0]]:.3g})")
    return "pass"


VALIDATION_STAGES = (
    ("indices", _stage_indices),
    ("edge_manifold", _stage_edge_manifold),
    ("orientation", _stage_orientation),
    ("boundary_loops", _stage_boundary),
    ("euler_characteristic", _stage_euler),
    ("nondegenerate_faces", _stage_areas),
)


def validation_report(vertices, faces) -> list[tuple[str, bool | None, str]]:
    """Run every validation stage in order.

    Returns ``(name, ok, detail)`` triples; stages after the first failure
    are reported with ``ok=None`` because they depend on earlier ones.
    """
    t = _Topology(np.asarray(vertices, dtype=float), np.asarray(faces, dtype=np.int64))
    out = []
    failed = False
    for name, stage in VALIDATION_STAGES:
        if failed:
            out.append((name, None, "skipped"))
            continue
        try:
            out.append((name, True, stage(t)))
        except MeshError as exc:
            out.append((name, False, str(exc)))
            failed = True
    return out


def _validate(vertices: np.ndarray, faces: np.ndarray):
    t = _Topology(vertices, faces)
    for _, stage in VALIDATION_STAGES:
        stage(t)
    return t.edges, t.loop


def boundary_loop(mesh: TriangleMesh) -> np.ndarray:
    """Ordered boundary vertices, starting at the lowest index, surface on the left."""
    return mesh.boundary.copy()


# ---------------------------------------------------------------------------
# file formats


def read_mesh_arrays(path, format: str | None = None):
    """Parse an OFF or OBJ file into raw ``(vertices, faces)`` arrays, unvalidated."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).upper()
    try:
        text = path.read_text()
    except OSError as exc:
        raise MeshError(f"cannot read {path}: {exc}") from exc
    if fmt == "OFF":
        return _parse_off(text)
    if fmt == "OBJ":
        return _parse_obj(text)
    raise MeshError(f"unsupported mesh format {fmt!r}")


def load_mesh(path, format: str | None = None) -> TriangleMesh:
    """Read an OFF or OBJ triangle mesh and validate it.

    ``format`` defaults to the file extension.
    """
    return TriangleMesh.from_arrays(*read_mesh_arrays(path, format))


def _parse_off(text: str):
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.append(line.split())
    if not tokens or not tokens[0][0].upper().endswith("OFF"):
        raise MeshError("missing OFF header")
    head = tokens[0][1:]
    rows = tokens[1:]
    if not head:
        if not rows:
            raise MeshError("missing OFF counts line")
        head, rows = rows[0], rows[1:]
    try:
        nv, nf = int(head[0]), int(head[1])
    except (ValueError, IndexError) as exc:
        raise MeshError("malformed OFF counts line") from exc
    if len(rows) < nv + nf:
        raise MeshError(f"OFF file truncated: expected {nv + nf} element lines, got {len(rows)}")
    try:
        verts = [[float(x) for x in rows[i][:3]] for i in range(nv)]
    except ValueError as exc:
        raise MeshError(f"malformed OFF vertex line: {exc}") from exc
    faces = []
    for i in range(nf):
        row = rows[nv + i]
        try:
            if int(row[0]) != 3 or len(row) < 4:
                raise MeshError(f"non-triangular face {i}")
            faces.append([int(x) for x in row[1:4]])
        except ValueError as exc:
            if isinstance(exc, MeshError):
                raise
            raise MeshError(f"malformed OFF face {i}") from exc
    if any(len(p) != 3 for p in verts):
        raise MeshError("OFF vertex line with fewer than 3 coordinates")
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def _parse_obj(text: str):
    verts, faces = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split("#", 1)[0].split()
        if not parts:
            continue
        if parts[0] == "v":
            try:
                verts.append([float(x) for x in parts[1:4]])
            except ValueError as exc:
                raise MeshError(f"malformed vertex on line {lineno}") from exc
            if len(verts[-1]) != 3:
                raise MeshError(f"vertex on line {lineno} needs 3 coordinates")
        elif parts[0] == "f":
            if len(parts) != 4:
                raise MeshError(f"non-triangular face {len(faces)} (line {lineno})")
            idx = []
            for p in parts[1:]:
                try:
                    k = int(p.split("/", 1)[0])
                except ValueError as exc:
                    raise MeshError(f"malformed face on line {lineno}") from exc
                idx.append(k - 1 if k > 0 else len(verts) + k)
            faces.append(idx)
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def save_mesh(mesh: TriangleMesh, path, format: str | None = None) -> None:
    """Write ``mesh`` as OFF or OBJ with full double precision."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).upper()
    lines = []
    if fmt == "OFF":
        lines.append("OFF")
        lines.append(f"{mesh.n_vertices} {mesh.n_faces} {mesh.n_edges}")
        lines.extend("%.17g %.17g %.17g" % tuple(p) for p in mesh.vertices)
        lines.extend("3 %d %d %d" % tuple(t) for t in mesh.faces)
    elif fmt == "OBJ":
        lines.extend("v %.17g %.17g %.17g" % tuple(p) for p in mesh.vertices)
        lines.extend("f %d %d %d" % tuple(t + 1) for t in mesh.faces)
    else:
        raise MeshError(f"unsupported mesh format {fmt!r}")
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# cotangent weights


class EdgeWeights:
    """Cotangent weight per undirected edge.

    Lookup is symmetric: ``w[u, v] == w[v, u]``.
    """

    def __init__(self, edges: np.ndarray, values: np.ndarray, n_vertices: int):
        self.edges = edges
        self.values = values
        self._n = n_vertices
        self._keys = edges[:, 0] * n_vertices + edges[:, 1]

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, uv) -> float:
        u, v = (int(x) for x in uv)
        if u > v:
            u, v = v, u
        k = u * self._n + v
        i = int(np.searchsorted(self._keys, k))
        if i >= len(self._keys) or self._keys[i] != k:
            raise KeyError(f"({u}, {v}) is not a mesh edge")
        return float(self.values[i])

    def as_dict(self) -> dict[tuple[int, int], float]:
        return {(int(a), int(b)): float(w) for (a, b), w in zip(self.edges, self.values)}

    def laplacian(self):
        """Sparse matrix ``L`` with ``(L x)_i = sum_j k_ij (x_j - x_i)``."""
        from scipy import sparse

        n = self._n
        i, j = self.edges[:, 0], self.edges[:, 1]
        w = self.values
        off = sparse.coo_matrix((np.r_[w, w], (np.r_[i, j], np.r_[j, i])), shape=(n, n)).tocsr()
        return off - sparse.diags(np.asarray(off.sum(axis=1)).ravel())


def corner_cotangents(points: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Cotangent of the angle at each face corner, shape (F, 3).

    Works for 2D or 3D points. Column ``c`` is the angle at ``faces[:, c]``,
    which is opposite the edge between the other two corners.
    """
    p = points[faces]
    if p.shape[2] == 2:
        p = np.concatenate([p, np.zeros(p.shape[:2] + (1,))], axis=2)
    cots = np.empty(faces.shape)
    for c in range(3):
        a = p[:, (c + 1) % 3] - p[:, c]
        b = p[:, (c + 2) % 3] - p[:, c]
        cots[:, c] = np.einsum("ij,ij->i", a, b) / np.linalg.norm(np.cross(a, b), axis=1)
    return cots


def cotangent_weights(mesh: TriangleMesh) -> EdgeWeights:
    """Edge weights ``cot(alpha) + cot(beta)`` from the opposite corner angles.

    Boundary edges get the single opposite cotangent. Obtuse corners yield
    negative weights, which are kept as is.
    """
    p = mesh.vertices[mesh.faces]
    angles = np.empty(mesh.faces.shape)
    for c in range(3):
        a = p[:, (c + 1) % 3] - p[:, c]
        b = p[:, (c + 2) % 3] - p[:, c]
        angles[:, c] = np.arctan2(
            np.linalg.norm(np.cross(a, b), axis=1), np.einsum("ij,ij->i", a, b)
        )
    bad = np.flatnonzero((angles < ANGLE_EPS).any(axis=1))
    if len(bad):
        raise MeshError(f"near-degenerate angle in face {int(bad[0])}")
    cots = corner_cotangents(mesh.vertices, mesh.faces)

    n = mesh.n_vertices
    # corner c is opposite edge (c+1, c+2)
    a = np.concatenate([mesh.faces[:, 1], mesh.faces[:, 2], mesh.faces[:, 0]])
    b = np.concatenate([mesh.faces[:, 2], mesh.faces[:, 0], mesh.faces[:, 1]])
    keys = np.minimum(a, b) * n + np.maximum(a, b)
    ekeys = mesh.edges[:, 0] * n + mesh.edges[:, 1]
    idx = np.searchsorted(ekeys, keys)
    values = np.zeros(len(ekeys))
    # unbuffered accumulation in fixed corner order keeps results deterministic
    np.add.at(values, idx, cots.T.ravel())
    return EdgeWeights(mesh.edges, values, n)
