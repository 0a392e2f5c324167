"""Triangulations of the meridian (r, z) domain and their axis topology.

Vertices are stored as an ``(N, 2)`` array of ``(r, z)`` coordinates and
triangles as an ``(M, 3)`` array of counter-clockwise vertex indices. Edges,
incidences and orientation signs are derived on construction and never
serialized.

Local edge ``k`` of a triangle is the edge opposite its local vertex ``k``,
i.e. it joins local vertices ``(k + 1) % 3`` and ``(k + 2) % 3``.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

__all__ = [
    "Mesh",
    "AxisTopology",
    "TriangleClass",
    "MeshFormatError",
    "generate_unit_square_mesh",
    "classify",
    "validate",
    "load_mesh",
    "save_mesh",
]

MIN_ANGLE_DEG = 20.0


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class MeshFormatError(ValueError):
    """Raised when a mesh file cannot be parsed."""


class TriangleClass(IntEnum):
    INTERIOR = 0
    TYPE1 = 1
    TYPE2 = 2


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation with derived edge topology.

    Use :meth:`from_arrays` to build one; the derived arrays are:

    edges
        ``(E, 2)`` vertex pairs with ``i < j``.
    tri_edges
        ``(M, 3)`` global edge index of each local edge.
    tri_edge_signs
        ``(M, 3)`` +1 where the global edge normal points out of the
        triangle, -1 otherwise.
    edge_tris
        ``(E, 2)`` adjacent triangles, ``-1`` padded.
    edge_count
        number of triangles sharing each edge.
    boundary
        ``True`` for edges with exactly one adjacent triangle.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    tri_edges: np.ndarray
    tri_edge_signs: np.ndarray
    edge_tris: np.ndarray
    edge_count: np.ndarray
    boundary: np.ndarray

    @classmethod
    def from_arrays(cls, vertices, triangles) -> "Mesh":
        vertices = np.asarray(vertices, dtype=float).reshape(-1, 2)
        triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise ValueError("triangle references a vertex index out of range")

        local = np.array([[1, 2], [2, 0], [0, 1]])
        pairs = triangles[:, local]  # (M, 3, 2) in traversal order
        lo = np.minimum(pairs[..., 0], pairs[..., 1])
        hi = np.maximum(pairs[..., 0], pairs[..., 1])
        keys = np.stack([lo.ravel(), hi.ravel()], axis=1)
        edges, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        tri_edges = inverse.reshape(-1, 3)
        tri_edge_signs = np.where(pairs[..., 0] < pairs[..., 1], 1, -1).astype(np.int8)

        n_edges = len(edges)
        edge_count = np.bincount(inverse, minlength=n_edges)
        edge_tris = -np.ones((n_edges, 2), dtype=np.int64)
        owner = np.repeat(np.arange(len(triangles)), 3)
        # stable order: first adjacent triangle has the smaller index
        order = np.argsort(inverse, kind="stable")
        slot = np.zeros(n_edges, dtype=np.int64)
        for flat in order:
            e = inverse[flat]
            if slot[e] < 2:
                edge_tris[e, slot[e]] = owner[flat]
            slot[e] += 1
        boundary = edge_count == 1

        return cls(
            vertices=_frozen(vertices),
            triangles=_frozen(triangles),
            edges=_frozen(edges.astype(np.int64)),
            tri_edges=_frozen(tri_edges),
            tri_edge_signs=_frozen(tri_edge_signs),
            edge_tris=_frozen(edge_tris),
            edge_count=_frozen(edge_count),
            boundary=_frozen(boundary),
        )

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas())

    def edge_vectors(self) -> np.ndarray:
        """Edge vectors from the smaller to the larger vertex index."""
        return self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]

    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.edge_vectors(), axis=1)

    def edge_normals(self) -> np.ndarray:
        """Unit normals ``n_E = (t_z, -t_r)`` of the ascending unit tangent."""
        t = self.edge_vectors() / self.edge_lengths()[:, None]
        return np.stack([t[:, 1], -t[:, 0]], axis=1)

    def diameters(self) -> np.ndarray:
        return self.edge_lengths()[self.tri_edges].max(axis=1)

    def h_max(self) -> float:
        return float(self.edge_lengths().max())

    def min_angles(self) -> np.ndarray:
        """Smallest interior angle of every triangle, in degrees."""
        return _min_angles(self.vertices[self.triangles])


def _min_angles(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1, 3, 2)
    angles = []
    for k in range(3):
        a = p[:, (k + 1) % 3] - p[:, k]
        b = p[:, (k + 2) % 3] - p[:, k]
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        dot = np.einsum("ij,ij->i", a, b)
        angles.append(np.degrees(np.arctan2(np.abs(cross), dot)))
    out = np.min(angles, axis=0)
    # inverted or collapsed triangles count as zero angle
    signed = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 1, 1] - p[:, 0, 1]
    ) * (p[:, 2, 0] - p[:, 0, 0])
    return np.where(signed > 0, out, 0.0)


@dataclass(frozen=True, eq=False)
class AxisTopology:
    """Axis-related classification of a mesh.

    ``er_axis_vertex[k]`` and ``er_off_vertex[k]`` are the on-axis vertex
    and the off-axis vertex of edge ``er_edges[k]``.
    """

    axis_vertices: np.ndarray
    axis_edges: np.ndarray
    gamma_edges: np.ndarray
    er_edges: np.ndarray
    triangle_class: np.ndarray
    er_axis_vertex: np.ndarray
    er_off_vertex: np.ndarray
    on_axis: np.ndarray
    edge_kind: np.ndarray  # 0 plain, 1 axis edge, 2 E_R edge
    gamma_vertices: np.ndarray
    edge_axis_vertex: np.ndarray  # on-axis vertex per edge for E_R edges, -1 elsewhere


def classify(mesh: Mesh) -> AxisTopology:
    """Classify vertices, edges and triangles with respect to ``r == 0``."""
    on_axis = mesh.vertices[:, 0] == 0.0
    per_tri = on_axis[mesh.triangles].sum(axis=1)
    if np.any(per_tri == 3):
        bad = int(np.flatnonzero(per_tri == 3)[0])
        raise ValueError(f"triangle {bad} has all three vertices on the rotation axis")

    ends = on_axis[mesh.edges]
    n_axis_ends = ends.sum(axis=1)
    axis_edges = np.flatnonzero(n_axis_ends == 2)
    er_edges = np.flatnonzero(n_axis_ends == 1)
    gamma_edges = np.flatnonzero(mesh.boundary & (n_axis_ends < 2))

    er_pairs = mesh.edges[er_edges]
    first_on = on_axis[er_pairs[:, 0]]
    er_axis_vertex = np.where(first_on, er_pairs[:, 0], er_pairs[:, 1])
    er_off_vertex = np.where(first_on, er_pairs[:, 1], er_pairs[:, 0])

    edge_kind = np.zeros(mesh.n_edges, dtype=np.int8)
    edge_kind[axis_edges] = 1
    edge_kind[er_edges] = 2

    edge_axis_vertex = -np.ones(mesh.n_edges, dtype=np.int64)
    edge_axis_vertex[er_edges] = er_axis_vertex

    return AxisTopology(
        axis_vertices=_frozen(np.flatnonzero(on_axis)),
        axis_edges=_frozen(axis_edges),
        gamma_edges=_frozen(gamma_edges),
        er_edges=_frozen(er_edges),
        triangle_class=_frozen(per_tri.astype(np.int8)),
        er_axis_vertex=_frozen(er_axis_vertex),
        er_off_vertex=_frozen(er_off_vertex),
        on_axis=_frozen(on_axis),
        edge_kind=_frozen(edge_kind),
        gamma_vertices=_frozen(np.unique(mesh.edges[gamma_edges].ravel())),
        edge_axis_vertex=_frozen(edge_axis_vertex),
    )


def validate(mesh: Mesh) -> list[str]:
    """Return human-readable descriptions of violated mesh invariants."""
    problems: list[str] = []
    r = mesh.vertices[:, 0]
    for v in np.flatnonzero(r < 0):
        problems.append(f"vertex {v} has negative radius r={r[v]!r}")
    for v in np.flatnonzero((r > 0) & (r < 1e-12)):
        problems.append(f"vertex {v} is within 1e-12 of the axis but not on it (r={r[v]!r})")
    if not np.all(np.isfinite(mesh.vertices)):
        problems.append("non-finite vertex coordinates")

    areas = mesh.signed_areas()
    for t in np.flatnonzero(areas <= 0):
        problems.append(f"triangle {t} has non-positive signed area {areas[t]!r}")

    for e in np.flatnonzero(mesh.edge_count > 2):
        i, j = mesh.edges[e]
        problems.append(f"edge ({i}, {j}) is shared by {mesh.edge_count[e]} triangles")

    interior = np.flatnonzero(mesh.edge_count == 2)
    if len(interior):
        t0, t1 = mesh.edge_tris[interior, 0], mesh.edge_tris[interior, 1]
        s0 = _local_sign(mesh, t0, interior)
        s1 = _local_sign(mesh, t1, interior)
        for e in interior[s0 == s1]:
            i, j = mesh.edges[e]
            problems.append(f"edge ({i}, {j}) has inconsistent orientation signs")

    used = np.zeros(mesh.n_vertices, dtype=bool)
    used[mesh.triangles.ravel()] = True
    for v in np.flatnonzero(~used):
        problems.append(f"vertex {v} is not used by any triangle")
    if mesh.n_triangles == 0:
        problems.append("no triangles")
    return problems


def _local_sign(mesh: Mesh, tris: np.ndarray, edges: np.ndarray) -> np.ndarray:
    hit = mesh.tri_edges[tris] == edges[:, None]
    return mesh.tri_edge_signs[tris][hit]


def generate_unit_square_mesh(n: int, jitter: float = 0.0, seed: int = 0) -> Mesh:
    """Uniform ``n x n`` grid of ``[0, 1]^2`` split along lower-left/upper-right diagonals.

    With ``jitter > 0`` every vertex is displaced by a uniform random offset of
    at most ``jitter / n`` per coordinate: interior vertices freely, boundary
    vertices only along their side (axis vertices only in ``z``), corners not
    at all. A draw is rejected (and redrawn, at most 20 times) if any incident
    triangle would fall below a minimum angle of 20 degrees.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    if not (0.0 <= jitter <= 0.25):
        raise ValueError(f"jitter must lie in [0, 0.25], got {jitter!r}")

    h = 1.0 / n
    idx = np.arange(n + 1)
    rr, zz = np.meshgrid(idx * h, idx * h, indexing="xy")
    vertices = np.stack([rr.ravel(), zz.ravel()], axis=1)
    # exact grid coordinates on the boundary
    vertices[:, 0] = np.tile(idx, n + 1) / n
    vertices[:, 1] = np.repeat(idx, n + 1) / n

    def vid(i, j):
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    triangles = np.array(tris, dtype=np.int64)

    if jitter > 0:
        _jitter_vertices(vertices, triangles, n, jitter * h, seed)
    return Mesh.from_arrays(vertices, triangles)


def _jitter_vertices(vertices, triangles, n, amplitude, seed):
    rng = np.random.default_rng(seed)
    incident: list[list[int]] = [[] for _ in range(len(vertices))]
    for t, tri in enumerate(triangles):
        for v in tri:
            incident[v].append(t)

    for v in range(len(vertices)):
        i, j = v % (n + 1), v // (n + 1)
        side_r = i in (0, n)  # on r = 0 or r = 1
        side_z = j in (0, n)  # on z = 0 or z = 1
        if side_r and side_z:
            continue
        mask = np.array([0.0 if side_r else 1.0, 0.0 if side_z else 1.0])
        base = vertices[v].copy()
        tv = triangles[incident[v]]
        for _ in range(20):
            cand = base + mask * rng.uniform(-amplitude, amplitude, size=2)
            vertices[v] = cand
            if _min_angles(vertices[tv]).min() >= MIN_ANGLE_DEG:
                break
        else:
            vertices[v] = base
    # snap: axis vertices stay exactly on r = 0
    vertices[np.arange(0, len(vertices), n + 1), 0] = 0.0


_HEADER = "axisym-mesh v1"


def save_mesh(mesh: Mesh) -> str:
    """Serialize to the plain-text ``axisym-mesh v1`` format."""
    lines = [_HEADER, f"vertices {mesh.n_vertices}"]
    lines += [f"{r!r} {z!r}" for r, z in mesh.vertices.tolist()]
    lines.append(f"triangles {mesh.n_triangles}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    return "\n".join(lines) + "\n"


def load_mesh(text: str) -> Mesh:
    """Parse the ``axisym-mesh v1`` format; errors carry 1-based line numbers."""
    lines = text.splitlines()
    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos >= len(lines):
            raise MeshFormatError(f"line {pos + 1}: unexpected end of file")
        pos += 1
        return pos, lines[pos - 1].strip()

    def section(name):
        ln, s = next_line()
        parts = s.split()
        if len(parts) != 2 or parts[0] != name:
            raise MeshFormatError(f"line {ln}: expected '{name} <count>', got {s!r}")
        try:
            count = int(parts[1])
        except ValueError:
            raise MeshFormatError(f"line {ln}: invalid count {parts[1]!r}") from None
        if count < 0:
            raise MeshFormatError(f"line {ln}: negative count")
        return count

    ln, s = next_line()
    if s != _HEADER:
        raise MeshFormatError(f"line {ln}: expected header {_HEADER!r}, got {s!r}")

    nv = section("vertices")
    verts = np.empty((nv, 2))
    for k in range(nv):
        ln, s = next_line()
        parts = s.split()
        try:
            if len(parts) != 2:
                raise ValueError
            verts[k] = [float(parts[0]), float(parts[1])]
        except ValueError:
            raise MeshFormatError(f"line {ln}: expected 'r z', got {s!r}") from None
        if not np.all(np.isfinite(verts[k])):
            raise MeshFormatError(f"line {ln}: non-finite coordinate")

    nt = section("triangles")
    if nt == 0:
        raise MeshFormatError(f"line {pos}: no triangles")
    tris = np.empty((nt, 3), dtype=np.int64)
    for k in range(nt):
        ln, s = next_line()
        parts = s.split()
        try:
            if len(parts) != 3:
                raise ValueError
            tris[k] = [int(p) for p in parts]
        except ValueError:
            raise MeshFormatError(f"line {ln}: expected 'i j k', got {s!r}") from None
        bad = [int(x) for x in tris[k] if x < 0 or x >= nv]
        if bad:
            raise MeshFormatError(
                f"line {ln}: triangle {k} references vertex index {bad[0]} "
                f"(only {nv} vertices)"
            )
    while pos < len(lines):
        if lines[pos].strip():
            raise MeshFormatError(f"line {pos + 1}: trailing content {lines[pos].strip()!r}")
        pos += 1
    return Mesh.from_arrays(verts, tris)
