"""Triangle mesh container, OBJ/OFF I/O, adjacency and topology queries.

Everything downstream (curvature, classification, decimation, extraction)
works on :class:`Mesh`, :class:`Adjacency` and :class:`VertexStar`.
All three are treated as immutable once built.
"""

from __future__ import annotations

import io
import os
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

__all__ = [
    "Mesh",
    "MeshParseError",
    "MeshValidationError",
    "Adjacency",
    "VertexStar",
    "TopologySets",
    "parse_mesh",
    "load_mesh",
    "to_obj",
    "to_off",
    "save_mesh",
    "build_adjacency",
    "order_fan",
    "make_star",
    "detect_boundary",
    "detect_topological_errors",
    "topology_sets",
    "euler_characteristic",
]

# Relative area below which a face counts as degenerate (times bbox diagonal^2).
DEGENERATE_AREA_FACTOR = 1e-12
# Crossed-edge distance tolerance (times bbox diagonal).
CROSSING_TOLERANCE = 1e-9


class MeshParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MeshValidationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    """Indexed triangle mesh.

    Parameters
    ----------
    vertices : array_like, shape (n, 3)
    faces : array_like, shape (m, 3)
        Zero-based vertex indices, counter-clockwise winding assumed.
    """

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.array(self.faces, dtype=np.int64).reshape(-1, 3)
        if len(f):
            if f.min() < 0 or f.max() >= len(v):
                bad = int(np.flatnonzero((f < 0).any(1) | (f >= len(v)).any(1))[0])
                raise MeshValidationError(
                    f"face {bad} {f[bad].tolist()} references a vertex outside 0..{len(v) - 1}"
                )
            rep = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
            if rep.any():
                bad = int(np.flatnonzero(rep)[0])
                raise MeshValidationError(f"face {bad} {f[bad].tolist()} repeats a vertex")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @cached_property
    def diagonal(self) -> float:
        """Length of the axis-aligned bounding-box diagonal."""
        if not len(self.vertices):
            return 0.0
        return float(np.linalg.norm(self.vertices.max(0) - self.vertices.min(0)))

    @cached_property
    def face_areas(self) -> np.ndarray:
        p = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)

    @cached_property
    def face_normals(self) -> np.ndarray:
        """Unit face normals from the winding; zero rows for degenerate faces."""
        p = self.vertices[self.faces]
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        norm = np.linalg.norm(n, axis=1)
        out = np.zeros_like(n)
        ok = norm > 0
        out[ok] = n[ok] / norm[ok, None]
        return out

    @property
    def degenerate_area(self) -> float:
        return DEGENERATE_AREA_FACTOR * self.diagonal**2

    def transformed(self, rotation=None, translation=None, scale: float = 1.0) -> "Mesh":
        v = self.vertices * scale
        if rotation is not None:
            v = v @ np.asarray(rotation, dtype=np.float64).T
        if translation is not None:
            v = v + np.asarray(translation, dtype=np.float64)
        return Mesh(v, self.faces)


# ---------------------------------------------------------------------------
# parsing / serialization
# ---------------------------------------------------------------------------


def _fan(poly: Sequence[int]) -> list[tuple[int, int, int]]:
    return [(poly[0], poly[k], poly[k + 1]) for k in range(1, len(poly) - 1)]


def _parse_float(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise MeshParseError(f"expected a number, got {tok!r}", lineno) from None


def _parse_obj(text: str) -> Mesh:
    verts: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []
    face_lines: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tag, *rest = line.split()
        if tag == "v":
            if len(rest) < 3:
                raise MeshParseError("vertex needs 3 coordinates", lineno)
            verts.append([_parse_float(t, lineno) for t in rest[:3]])
        elif tag == "f":
            if len(rest) < 3:
                raise MeshParseError("face needs at least 3 indices", lineno)
            poly = []
            for tok in rest:
                head = tok.split("/", 1)[0]
                try:
                    idx = int(head)
                except ValueError:
                    raise MeshParseError(f"bad face index {tok!r}", lineno) from None
                if idx < 0:
                    idx = len(verts) + idx + 1
                poly.append(idx - 1)
            for tri in _fan(poly):
                faces.append(tri)
                face_lines.append(lineno)
        # vn, vt, g, o, s, usemtl, mtllib, l ... are ignored
    return _finish(verts, faces, face_lines)


def _parse_off(text: str) -> Mesh:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append((lineno, line.split()))
    if not rows:
        raise MeshParseError("empty OFF file", 1)
    lineno, toks = rows[0]
    if not toks[0].endswith("OFF"):
        raise MeshParseError("missing OFF header", lineno)
    toks = toks[1:]
    pos = 1
    if not toks:
        if len(rows) < 2:
            raise MeshParseError("missing counts line", lineno)
        lineno, toks = rows[1]
        pos = 2
    try:
        nv, nf = int(toks[0]), int(toks[1])
    except (ValueError, IndexError):
        raise MeshParseError("bad counts line", lineno) from None
    if len(rows) < pos + nv + nf:
        raise MeshParseError("file ends before all vertices and faces are read", rows[-1][0])
    verts = []
    for lineno, toks in rows[pos : pos + nv]:
        if len(toks) < 3:
            raise MeshParseError("vertex needs 3 coordinates", lineno)
        verts.append([_parse_float(t, lineno) for t in toks[:3]])
    faces: list[tuple[int, int, int]] = []
    face_lines: list[int] = []
    for lineno, toks in rows[pos + nv : pos + nv + nf]:
        try:
            k = int(toks[0])
            poly = [int(t) for t in toks[1 : 1 + k]]
        except ValueError:
            raise MeshParseError("bad face line", lineno) from None
        if k < 3 or len(poly) < k:
            raise MeshParseError("face needs at least 3 indices", lineno)
        for tri in _fan(poly):
            faces.append(tri)
            face_lines.append(lineno)
    return _finish(verts, faces, face_lines)


def _finish(verts, faces, face_lines) -> Mesh:
    if not verts:
        raise MeshParseError("no vertices")
    if not faces:
        raise MeshParseError("no faces")
    n = len(verts)
    for tri, lineno in zip(faces, face_lines):
        for i in tri:
            if i < 0 or i >= n:
                raise MeshValidationError(
                    f"line {lineno}: face index {i + 1} out of range 1..{n}"
                )
        if len(set(tri)) < 3:
            raise MeshValidationError(f"line {lineno}: face repeats a vertex")
    return Mesh(np.asarray(verts, dtype=np.float64), np.asarray(faces, dtype=np.int64))


def parse_mesh(data: bytes | str, format: str = "obj") -> Mesh:
    """Parse OBJ or OFF text. Polygons are fan-triangulated."""
    text = data.decode("utf-8", errors="replace") if isinstance(data, (bytes, bytearray)) else data
    fmt = format.lower().lstrip(".")
    if fmt == "obj":
        return _parse_obj(text)
    if fmt == "off":
        return _parse_off(text)
    raise ValueError(f"unsupported mesh format {format!r}")


def load_mesh(path: str | os.PathLike) -> Mesh:
    ext = os.path.splitext(str(path))[1].lower().lstrip(".")
    with open(path, "rb") as fh:
        return parse_mesh(fh.read(), ext or "obj")


def to_obj(mesh: Mesh) -> str:
    buf = io.StringIO()
    for x, y, z in mesh.vertices.tolist():
        buf.write(f"v {x!r} {y!r} {z!r}\n")
    for a, b, c in (mesh.faces + 1).tolist():
        buf.write(f"f {a} {b} {c}\n")
    return buf.getvalue()


def to_off(mesh: Mesh) -> str:
    buf = io.StringIO()
    buf.write(f"OFF\n{mesh.n_vertices} {mesh.n_faces} 0\n")
    for x, y, z in mesh.vertices.tolist():
        buf.write(f"{x!r} {y!r} {z!r}\n")
    for a, b, c in mesh.faces.tolist():
        buf.write(f"3 {a} {b} {c}\n")
    return buf.getvalue()


def save_mesh(mesh: Mesh, path: str | os.PathLike) -> None:
    ext = os.path.splitext(str(path))[1].lower()
    text = to_off(mesh) if ext == ".off" else to_obj(mesh)
    with open(path, "w") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# stars
# ---------------------------------------------------------------------------


def order_fan(center: int, tris: Sequence[Sequence[int]]):
    """Order the link of ``center`` given its incident triangles.

    Returns ``(ring, closed, order)`` where ``order[k]`` is the position in
    ``tris`` of the triangle spanning ``ring[k], ring[k+1]``, or ``None``
    when the triangles do not form a single fan or cycle. The direction
    follows the majority winding of the input triangles.
    """
    if not tris:
        return None
    link: dict[int, list[tuple[int, int]]] = defaultdict(list)
    seen_pairs = set()
    for k, t in enumerate(tris):
        i = list(t).index(center)
        a, b = t[(i + 1) % 3], t[(i + 2) % 3]
        key = (a, b) if a < b else (b, a)
        if key in seen_pairs:
            return None
        seen_pairs.add(key)
        link[a].append((b, k))
        link[b].append((a, k))
    ends = [u for u, nb in link.items() if len(nb) == 1]
    if any(len(nb) > 2 for nb in link.values()) or len(ends) not in (0, 2):
        return None
    closed = not ends
    start = min(link) if closed else min(ends)
    ring = [start]
    order: list[int] = []
    prev_face = -1
    cur = start
    while len(order) < len(tris):
        step = [(u, k) for u, k in link[cur] if k != prev_face]
        if not step:
            break
        nxt, k = min(step)
        order.append(k)
        prev_face = k
        if nxt == start:
            break
        ring.append(nxt)
        cur = nxt
    if len(order) != len(tris):
        return None  # disconnected link: several fans share the vertex
    # orient by majority winding: face order[k] should read (center, ring[k], ring[k+1])
    agree = 0
    for pos, k in enumerate(order):
        t = list(tris[k])
        i = t.index(center)
        if t[(i + 1) % 3] == ring[pos]:
            agree += 1
    if 2 * agree < len(order):
        if closed:
            ring = [ring[0]] + ring[1:][::-1]
            order = order[::-1]
        else:
            ring = ring[::-1]
            order = order[::-1]
    return ring, closed, order


def cross_rows(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Row-wise cross product of two (n, 3) arrays; much cheaper than
    ``np.cross`` on the short arrays stars produce."""
    out = np.empty(np.broadcast_shapes(u.shape, v.shape))
    out[..., 0] = u[..., 1] * v[..., 2] - u[..., 2] * v[..., 1]
    out[..., 1] = u[..., 2] * v[..., 0] - u[..., 0] * v[..., 2]
    out[..., 2] = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    return out


@dataclass(frozen=True, eq=False)
class VertexStar:
    """A vertex with its ordered 1-ring.

    ``tris[k]`` reads ``(center, ring[k], ring[(k+1) % m])``; when the star
    is open (boundary) there is one triangle fewer than ring vertices.
    """

    center: int
    position: np.ndarray
    ring: tuple
    ring_positions: np.ndarray
    closed: bool
    face_ids: tuple
    degenerate_area: float = 0.0

    @property
    def valence(self) -> int:
        return len(self.ring)

    @property
    def n_faces(self) -> int:
        return len(self.face_ids)

    @cached_property
    def _corners(self):
        m = len(self.ring)
        nf = self.n_faces
        a = self.ring_positions[:nf]
        b = self.ring_positions[(np.arange(nf) + 1) % m]
        return a, b

    @property
    def tris(self) -> list[tuple[int, int, int]]:
        m = len(self.ring)
        return [(self.center, self.ring[k], self.ring[(k + 1) % m]) for k in range(self.n_faces)]

    @cached_property
    def face_cross(self) -> np.ndarray:
        a, b = self._corners
        return cross_rows(a - self.position, b - self.position)

    @cached_property
    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_cross, axis=1)

    @cached_property
    def valid(self) -> np.ndarray:
        """Mask of non-degenerate incident faces."""
        return self.face_areas > self.degenerate_area

    @cached_property
    def face_normals(self) -> np.ndarray:
        c = self.face_cross
        n = np.linalg.norm(c, axis=1)
        out = np.zeros_like(c)
        ok = n > 0
        out[ok] = c[ok] / n[ok, None]
        return out

    @staticmethod
    def _angle(u, v):
        c = cross_rows(u, v)
        return np.arctan2(np.sqrt((c * c).sum(-1)), (u * v).sum(-1))

    @cached_property
    def wedge_angles(self) -> np.ndarray:
        """Angle at the center in each incident face (radians)."""
        a, b = self._corners
        return self._angle(a - self.position, b - self.position)

    @cached_property
    def opposite_angles(self) -> tuple[np.ndarray, np.ndarray]:
        """Angles at ``ring[k]`` and at ``ring[k+1]`` in face ``k``.

        The angle at ``ring[k]`` is opposite the spoke to ``ring[k+1]`` and
        vice versa.
        """
        a, b = self._corners
        p = self.position
        at_a = self._angle(p - a, b - a)
        at_b = self._angle(p - b, a - b)
        return at_a, at_b

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.ring_positions - self.position, axis=1)


def make_star(
    center: int,
    vertices: np.ndarray,
    tris: Sequence[Sequence[int]],
    face_ids: Sequence[int] | None = None,
    degenerate_area: float = 0.0,
) -> VertexStar | None:
    """Build a star from the triangles incident to ``center``.

    Returns ``None`` if the triangles are not a single fan or cycle.
    """
    res = order_fan(center, tris)
    if res is None:
        return None
    ring, closed, order = res
    ids = tuple(order if face_ids is None else (face_ids[k] for k in order))
    return VertexStar(
        center=center,
        position=np.asarray(vertices[center], dtype=np.float64),
        ring=tuple(ring),
        ring_positions=np.asarray(vertices[list(ring)], dtype=np.float64),
        closed=closed,
        face_ids=ids,
        degenerate_area=degenerate_area,
    )


# ---------------------------------------------------------------------------
# adjacency
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Adjacency:
    mesh: Mesh
    vertex_faces: tuple
    neighbors: tuple
    edge_faces: dict
    _stars: dict = field(default_factory=dict, repr=False)

    def valence(self, v: int) -> int:
        return len(self.neighbors[v])

    def edges(self) -> list[tuple[int, int]]:
        return list(self.edge_faces)

    def star(self, v: int) -> VertexStar | None:
        """Ordered star of ``v``; ``None`` for isolated or non-manifold vertices."""
        try:
            return self._stars[v]
        except KeyError:
            pass
        fids = self.vertex_faces[v]
        tris = [tuple(t) for t in self.mesh.faces[fids].tolist()]
        st = make_star(v, self.mesh.vertices, tris, fids.tolist(), self.mesh.degenerate_area)
        self._stars[v] = st
        return st

    def stars(self) -> list[VertexStar | None]:
        return [self.star(v) for v in range(self.mesh.n_vertices)]

    def two_ring(self, v: int) -> list[int]:
        first = set(self.neighbors[v].tolist())
        out = set(first)
        for u in first:
            out.update(self.neighbors[u].tolist())
        out.discard(v)
        return sorted(out)


def build_adjacency(mesh: Mesh) -> Adjacency:
    n = mesh.n_vertices
    f = mesh.faces
    nf = len(f)
    fid = np.repeat(np.arange(nf), 3)
    flat = f.reshape(-1)
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=n)
    splits = np.cumsum(counts)[:-1]
    vertex_faces = tuple(np.split(fid[order], splits))

    e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    e_fid = np.concatenate([np.arange(nf)] * 3)
    e = np.sort(e, axis=1)
    key = e[:, 0] * n + e[:, 1]
    order = np.lexsort((e_fid, key))
    key, e, e_fid = key[order], e[order], e_fid[order]
    _, start = np.unique(key, return_index=True)
    stop = np.append(start[1:], len(key))
    edge_faces = {}
    for s, t in zip(start.tolist(), stop.tolist()):
        edge_faces[(int(e[s, 0]), int(e[s, 1]))] = tuple(e_fid[s:t].tolist())

    ue = e[start]
    both = np.concatenate([ue, ue[:, ::-1]])
    order = np.lexsort((both[:, 1], both[:, 0]))
    both = both[order]
    cnt = np.bincount(both[:, 0], minlength=n)
    neighbors = tuple(np.split(both[:, 1], np.cumsum(cnt)[:-1]))
    return Adjacency(mesh=mesh, vertex_faces=vertex_faces, neighbors=neighbors, edge_faces=edge_faces)


# ---------------------------------------------------------------------------
# topology
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TopologySets:
    errors: frozenset
    boundary: frozenset
    reasons: dict = field(default_factory=dict, compare=False)


def detect_boundary(adj: Adjacency) -> set[int]:
    out: set[int] = set()
    for (a, b), fs in adj.edge_faces.items():
        if len(fs) == 1:
            out.add(a)
            out.add(b)
    return out


def _segment_distances(p1, q1, p2, q2):
    """Vectorized closest distance between segments p1q1 and p2q2."""
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = np.einsum("ij,ij->i", d1, d1)
    e = np.einsum("ij,ij->i", d2, d2)
    f = np.einsum("ij,ij->i", d2, r)
    c = np.einsum("ij,ij->i", d1, r)
    b = np.einsum("ij,ij->i", d1, d2)
    denom = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 1e-300, np.clip((b * f - c * e) / denom, 0.0, 1.0), 0.0)
        t = (b * s + f) / e
        t_lo = t < 0
        t_hi = t > 1
        t = np.clip(t, 0.0, 1.0)
        s = np.where(t_lo, np.clip(-c / a, 0.0, 1.0), s)
        s = np.where(t_hi, np.clip((b - c) / a, 0.0, 1.0), s)
    c1 = p1 + d1 * s[:, None]
    c2 = p2 + d2 * t[:, None]
    return np.linalg.norm(c1 - c2, axis=1)


def _crossed_edge_vertices(mesh: Mesh, edges: np.ndarray) -> set[int]:
    if len(edges) < 2:
        return set()
    v = mesh.vertices
    tol = CROSSING_TOLERANCE * mesh.diagonal
    lo = np.minimum(v[edges[:, 0]], v[edges[:, 1]]) - tol
    hi = np.maximum(v[edges[:, 0]], v[edges[:, 1]]) + tol
    cell = float(np.median(np.linalg.norm(v[edges[:, 0]] - v[edges[:, 1]], axis=1)))
    if not cell > 0:
        cell = max(mesh.diagonal, 1.0)
    origin = v.min(0)
    ilo = np.floor((lo - origin) / cell).astype(np.int64)
    ihi = np.floor((hi - origin) / cell).astype(np.int64)
    # cap the cell span of very long edges; they fall back to a coarse bucket
    grid: dict[tuple, list[int]] = defaultdict(list)
    for k in range(len(edges)):
        a, b = ilo[k], ihi[k]
        span = b - a + 1
        if span.prod() > 64:
            grid[("long",)].append(k)
            continue
        for x in range(a[0], b[0] + 1):
            for y in range(a[1], b[1] + 1):
                for z in range(a[2], b[2] + 1):
                    grid[(x, y, z)].append(k)
    long_edges = grid.pop(("long",), [])
    pairs = set()
    for members in grid.values():
        if len(members) < 2:
            continue
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                pairs.add((members[i], members[j]))
    if long_edges:
        all_k = range(len(edges))
        for i in long_edges:
            for j in all_k:
                if i != j:
                    pairs.add((min(i, j), max(i, j)))
    if not pairs:
        return set()
    pr = np.array(sorted(pairs), dtype=np.int64)
    ea, eb = edges[pr[:, 0]], edges[pr[:, 1]]
    share = (ea[:, :1] == eb).any(1) | (ea[:, 1:] == eb).any(1)
    overlap = ((lo[pr[:, 0]] <= hi[pr[:, 1]]) & (lo[pr[:, 1]] <= hi[pr[:, 0]])).all(1)
    keep = ~share & overlap
    pr, ea, eb = pr[keep], ea[keep], eb[keep]
    if not len(pr):
        return set()
    d = _segment_distances(v[ea[:, 0]], v[ea[:, 1]], v[eb[:, 0]], v[eb[:, 1]])
    hit = d <= tol
    out: set[int] = set()
    for row in np.concatenate([ea[hit], eb[hit]]):
        out.update(int(x) for x in row)
    return out


def detect_topological_errors(mesh: Mesh, adj: Adjacency) -> set[int]:
    return set(_topological_error_reasons(mesh, adj))


def _topological_error_reasons(mesh: Mesh, adj: Adjacency) -> dict[int, str]:
    reasons: dict[int, str] = {}
    n = mesh.n_vertices
    boundary_edge_count = np.zeros(n, dtype=np.int64)
    for (a, b), fs in adj.edge_faces.items():
        if len(fs) == 1:
            boundary_edge_count[a] += 1
            boundary_edge_count[b] += 1
        elif len(fs) > 2:
            reasons.setdefault(a, "complex")
            reasons.setdefault(b, "complex")
    for v in range(n):
        if len(adj.vertex_faces[v]) == 0:
            reasons[v] = "isolated"
        elif boundary_edge_count[v] == 1:
            reasons.setdefault(v, "dangling-boundary")
        elif v not in reasons and adj.star(v) is None:
            reasons[v] = "complex"
    edges = np.array(list(adj.edge_faces), dtype=np.int64).reshape(-1, 2)
    for v in sorted(_crossed_edge_vertices(mesh, edges)):
        reasons.setdefault(v, "crossed-edge")
    return dict(sorted(reasons.items()))


def topology_sets(mesh: Mesh, adj: Adjacency) -> TopologySets:
    reasons = _topological_error_reasons(mesh, adj)
    return TopologySets(
        errors=frozenset(reasons), boundary=frozenset(detect_boundary(adj)), reasons=reasons
    )


def euler_characteristic(mesh: Mesh, adj: Adjacency) -> int:
    return mesh.n_vertices - len(adj.edge_faces) + mesh.n_faces

