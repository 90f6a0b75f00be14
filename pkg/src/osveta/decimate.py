"""Vertex decimation with hole retriangulation.

Each pass visits live vertices in index order, characterizes the local
geometry, and removes the vertex when it is close enough to its average
plane (simple vertices) or to the line through its two edge neighbors
(boundary and interior-edge vertices). The hole left behind is split
recursively along the diagonal with the largest minimum angle.

This is the stability oracle for extraction experiments: vertex ids are
never renumbered internally, so survivors map exactly to original ids.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .classify import DEFAULT_FEATURE_ANGLE, VertexClass, classify_vertex
from .curvature import dihedral_angles
from .mesh import Mesh, VertexStar, make_star

__all__ = [
    "DecimationParams",
    "DecimationReport",
    "HoleError",
    "distance_to_average_plane",
    "distance_to_boundary_edge",
    "triangulate_hole",
    "decimate",
    "decimate_to_fraction",
]

log = logging.getLogger(__name__)


class HoleError(ValueError):
    pass


@dataclass(frozen=True)
class DecimationParams:
    distance_threshold: float = 0.0
    edge_distance_threshold: float = 0.0
    feature_angle: float = DEFAULT_FEATURE_ANGLE
    target_fraction: float | None = None
    max_passes: int = 100

    def __post_init__(self):
        if self.distance_threshold < 0 or self.edge_distance_threshold < 0:
            raise ValueError("thresholds must be non-negative")
        if self.target_fraction is not None and not 0 < self.target_fraction <= 1:
            raise ValueError("target_fraction must lie in (0, 1]")


@dataclass
class DecimationReport:
    deleted: list[int]
    survivors: list[int]
    passes: int
    n_faces: int
    n_original: int
    target_fraction: float | None = None
    thresholds: list[float] = field(default_factory=list)

    @property
    def retained_fraction(self) -> float:
        return len(self.survivors) / self.n_original if self.n_original else 1.0

    @property
    def reached_target(self) -> bool:
        return self.target_fraction is None or self.retained_fraction <= self.target_fraction

    def to_dict(self) -> dict:
        return {
            "deleted": self.deleted,
            "survivors": self.survivors,
            "passes": self.passes,
            "n_faces": self.n_faces,
            "n_original": self.n_original,
            "retained_fraction": self.retained_fraction,
            "target_fraction": self.target_fraction,
            "reached_target": self.reached_target,
        }


# ---------------------------------------------------------------------------
# distance criteria
# ---------------------------------------------------------------------------


def distance_to_average_plane(star: VertexStar) -> float:
    """Distance from the center to the plane fitted through its ring.

    Ring vertices are weighted by the area of the star faces they touch.
    """
    m = len(star.ring)
    if m < 3:
        raise ValueError(f"vertex {star.center} has fewer than 3 neighbors")
    nf = star.n_faces
    w = np.zeros(m)
    areas = star.face_areas
    np.add.at(w, np.arange(nf), areas)
    np.add.at(w, (np.arange(nf) + 1) % m, areas)
    if w.sum() <= 0:
        w = np.ones(m)
    w = w / w.sum()
    p = star.ring_positions
    c = w @ p
    d = p - c
    cov = (d * w[:, None]).T @ d
    evals, evecs = np.linalg.eigh(cov)
    if evals[1] <= 1e-12 * max(evals[2], 1e-300):
        raise ValueError(f"colinear ring at vertex {star.center}")
    n = evecs[:, 0]
    return abs(float(np.dot(star.position - c, n)))


def distance_to_boundary_edge(point, a, b) -> float:
    """Distance from ``point`` to the infinite line through ``a`` and ``b``."""
    point, a, b = (np.asarray(x, dtype=np.float64) for x in (point, a, b))
    d = b - a
    n = float(np.linalg.norm(d))
    if n == 0:
        raise ValueError("line endpoints coincide")
    return float(np.linalg.norm(np.cross(point - a, d))) / n


# ---------------------------------------------------------------------------
# hole triangulation
# ---------------------------------------------------------------------------


def _newell(P):
    n = np.zeros(3)
    Q = np.roll(P, -1, axis=0)
    n[0] = np.sum((P[:, 1] - Q[:, 1]) * (P[:, 2] + Q[:, 2]))
    n[1] = np.sum((P[:, 2] - Q[:, 2]) * (P[:, 0] + Q[:, 0]))
    n[2] = np.sum((P[:, 0] - Q[:, 0]) * (P[:, 1] + Q[:, 1]))
    return n


def _project(P, normal):
    n = normal / np.linalg.norm(normal)
    seed = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = seed - n * np.dot(n, seed)
    u /= np.linalg.norm(u)
    w = np.cross(n, u)
    c = P - P.mean(0)
    return np.column_stack([c @ u, c @ w])


def _orient(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _segments_intersect(p1, p2, q1, q2, eps):
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    ):
        return True

    def on_seg(a, b, p, d):
        return abs(d) <= eps and min(a[0], b[0]) - eps <= p[0] <= max(a[0], b[0]) + eps and \
            min(a[1], b[1]) - eps <= p[1] <= max(a[1], b[1]) + eps

    return on_seg(q1, q2, p1, d1) or on_seg(q1, q2, p2, d2) or on_seg(p1, p2, q1, d3) or on_seg(p1, p2, q2, d4)


def _angle(u, v):
    return math.atan2(u[0] * v[1] - u[1] * v[0], u[0] * v[0] + u[1] * v[1])


def triangulate_hole(loop, positions, forbidden=None, split=None) -> list[tuple[int, int, int]]:
    """Triangulate a closed loop of vertex ids.

    ``positions`` maps each loop id to a 3D point (array indexed by id or
    mapping). Returns ``len(loop) - 2`` triangles with the loop's winding.
    ``forbidden(a, b)`` vetoes diagonals; ``split=(a, b)`` forces the first
    diagonal. Raises :class:`HoleError` when the projected loop is not a
    simple polygon or no valid triangulation exists.
    """
    ids = list(loop)
    m = len(ids)
    if m < 3 or len(set(ids)) != m:
        raise HoleError("loop must have at least 3 distinct vertices")
    P = np.array([positions[i] for i in ids], dtype=np.float64)
    if m == 3:
        return [tuple(ids)]
    normal = _newell(P)
    scale = float(np.abs(P - P.mean(0)).max()) or 1.0
    if np.linalg.norm(normal) <= 1e-12 * scale * scale:
        raise HoleError("loop has no area")
    Q = _project(P, normal)
    eps = 1e-12 * scale * scale
    for i in range(m):
        for j in range(i + 2, m):
            if i == 0 and j == m - 1:
                continue
            if _segments_intersect(Q[i], Q[(i + 1) % m], Q[j], Q[(j + 1) % m], eps):
                raise HoleError("projected loop self-intersects")

    def diag_ok(poly, a, b):
        # poly: list of local indices (CCW); a, b positions in poly
        n = len(poly)
        pa, pb = Q[poly[a]], Q[poly[b]]
        prev, nxt = Q[poly[a - 1]], Q[poly[(a + 1) % n]]
        # inside the cone at a
        if _orient(prev, pa, nxt) >= 0:  # convex corner
            if not (_orient(pa, pb, prev) > eps and _orient(pb, pa, nxt) > eps):
                return False
        else:
            if _orient(pa, pb, nxt) >= -eps and _orient(pb, pa, prev) >= -eps:
                return False
        for k in range(n):
            k2 = (k + 1) % n
            if k in (a, b) or k2 in (a, b):
                continue
            if _segments_intersect(pa, pb, Q[poly[k]], Q[poly[k2]], eps):
                return False
        return True

    def score(poly, a, b):
        n = len(poly)
        out = math.inf
        for x, y in ((a, b), (b, a)):
            px, py = Q[poly[x]], Q[poly[y]]
            d = py - px
            for nb in (Q[poly[x - 1]], Q[poly[(x + 1) % n]]):
                ang = abs(_angle(d, nb - px))
                out = min(out, ang)
        return out

    def rec(poly, forced=None):
        n = len(poly)
        if n == 3:
            if _orient(Q[poly[0]], Q[poly[1]], Q[poly[2]]) <= eps:
                return None
            return [tuple(poly)]
        cands = []
        for a in range(n):
            for b in range(a + 2, n):
                if a == 0 and b == n - 1:
                    continue
                ia, ib = ids[poly[a]], ids[poly[b]]
                if forced is not None and {ia, ib} != set(forced):
                    continue
                if forbidden is not None and forbidden(ia, ib):
                    continue
                if not diag_ok(poly, a, b) or not diag_ok(poly, b, a):
                    continue
                cands.append((-score(poly, a, b), a, b))
        cands.sort()
        for _, a, b in cands:
            left = rec(poly[a : b + 1])
            if left is None:
                continue
            right = rec(poly[b:] + poly[: a + 1])
            if right is None:
                continue
            return left + right
        return None

    tris = rec(list(range(m)), split)
    if tris is None:
        raise HoleError("no valid triangulation")
    return [tuple(ids[k] for k in t) for t in tris]


# ---------------------------------------------------------------------------
# working mesh
# ---------------------------------------------------------------------------


class _Decimator:
    def __init__(self, mesh: Mesh, feature_angle: float):
        self.mesh = mesh
        self.verts = mesh.vertices
        self.diag = mesh.diagonal or 1.0
        self.eps_area = mesh.degenerate_area
        self.feature_angle = feature_angle
        n = mesh.n_vertices
        self.faces: dict[int, tuple[int, int, int]] = {}
        self.face_keys: set[tuple[int, int, int]] = set()
        self.vfaces: list[set[int]] = [set() for _ in range(n)]
        self.edges: dict[tuple[int, int], int] = {}
        self.next_fid = 0
        for t in mesh.faces.tolist():
            self._add_face(tuple(t))
        self.alive = np.ones(n, dtype=bool)
        self.n_alive = n
        self.deleted: list[int] = []
        self.cache: dict[int, tuple | None] = {}
        self.passes = 0

    def _add_face(self, t):
        fid = self.next_fid
        self.next_fid += 1
        self.faces[fid] = t
        self.face_keys.add(tuple(sorted(t)))
        for v in t:
            self.vfaces[v].add(fid)
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            key = (a, b) if a < b else (b, a)
            self.edges[key] = self.edges.get(key, 0) + 1

    def _remove_face(self, fid):
        t = self.faces.pop(fid)
        self.face_keys.discard(tuple(sorted(t)))
        for v in t:
            self.vfaces[v].discard(fid)
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            key = (a, b) if a < b else (b, a)
            c = self.edges[key] - 1
            if c:
                self.edges[key] = c
            else:
                del self.edges[key]

    def star(self, v) -> VertexStar | None:
        fids = sorted(self.vfaces[v])
        if not fids:
            return None
        return make_star(v, self.verts, [self.faces[f] for f in fids], fids, self.eps_area)

    def evaluate(self, v):
        """``(kind, relative distance, line endpoints)`` or None if the
        vertex can never be removed in its current configuration."""
        if v in self.cache:
            return self.cache[v]
        st = self.star(v)
        res = None
        cls = classify_vertex(st, self.feature_angle)
        try:
            if cls is VertexClass.SIMPLE_SMOOTH:
                res = ("plane", distance_to_average_plane(st) / self.diag, None, st)
            elif cls is VertexClass.BOUNDARY and len(st.ring) >= 3:
                a, b = st.ring[0], st.ring[-1]
                d = distance_to_boundary_edge(st.position, self.verts[a], self.verts[b])
                res = ("edge", d / self.diag, None, st)
            elif cls is VertexClass.INTERIOR_EDGE:
                feat = self._feature_neighbors(st)
                a, b = feat
                d = distance_to_boundary_edge(st.position, self.verts[a], self.verts[b])
                res = ("edge", d / self.diag, (a, b), st)
        except ValueError:
            res = None
        self.cache[v] = res
        return res

    def _feature_neighbors(self, st: VertexStar):
        d = dihedral_angles(st)
        if len(d) != st.n_faces:
            raise ValueError(f"degenerate face around vertex {st.center}")
        # dihedral k belongs to the spoke towards ring[k] (closed stars)
        idx = np.flatnonzero(np.abs(d) > self.feature_angle)
        return st.ring[idx[0]], st.ring[idx[1]]

    def try_delete(self, v, ev) -> bool:
        kind, _, split, st = ev
        loop = list(st.ring)
        star_fids = set(st.face_ids)
        if not st.closed:
            a, b = loop[-1], loop[0]
            if ((a, b) if a < b else (b, a)) in self.edges:
                self.cache[v] = None
                return False
        ring_set = set(loop)

        def forbidden(a, b):
            return ((a, b) if a < b else (b, a)) in self.edges

        try:
            tris = triangulate_hole(loop, self.verts, forbidden, split)
        except HoleError:
            self.cache[v] = None
            return False
        old_keys = {tuple(sorted(self.faces[f])) for f in star_fids}
        for t in tris:
            key = tuple(sorted(t))
            if key in self.face_keys and key not in old_keys:
                self.cache[v] = None
                return False
        for f in sorted(star_fids):
            self._remove_face(f)
        for t in tris:
            self._add_face(t)
        self.alive[v] = False
        self.n_alive -= 1
        self.deleted.append(v)
        self.cache.pop(v, None)
        for u in ring_set:
            self.cache.pop(u, None)
        return True

    def run_passes(self, plane_thr, edge_thr, max_passes, stop_count):
        """Passes at fixed thresholds until nothing changes. Returns True if
        the stop count was reached."""
        n = self.mesh.n_vertices
        for _ in range(max_passes):
            if self.n_alive <= stop_count:
                return True
            self.passes += 1
            changed = 0
            for v in range(n):
                if not self.alive[v]:
                    continue
                ev = self.evaluate(v)
                if ev is None:
                    continue
                thr = plane_thr if ev[0] == "plane" else edge_thr
                if ev[1] < thr and self.try_delete(v, ev):
                    changed += 1
                    if self.n_alive <= stop_count:
                        return True
            if not changed:
                break
        return self.n_alive <= stop_count

    def result(self, target_fraction, thresholds):
        survivors = np.flatnonzero(self.alive)
        remap = -np.ones(self.mesh.n_vertices, dtype=np.int64)
        remap[survivors] = np.arange(len(survivors))
        faces = [self.faces[f] for f in sorted(self.faces)]
        f = remap[np.array(faces, dtype=np.int64).reshape(-1, 3)]
        out = Mesh(self.verts[survivors], f)
        rep = DecimationReport(
            deleted=list(map(int, self.deleted)),
            survivors=survivors.tolist(),
            passes=self.passes,
            n_faces=len(faces),
            n_original=self.mesh.n_vertices,
            target_fraction=target_fraction,
            thresholds=thresholds,
        )
        return out, rep


def _stop_count(n, target_fraction):
    if target_fraction is None:
        return -1
    return int(math.floor(target_fraction * n + 1e-9))


def decimate(mesh: Mesh, params: DecimationParams = DecimationParams()):
    """Decimate at fixed thresholds (fractions of the bbox diagonal).

    Returns ``(decimated mesh, report)``; the report's ``survivors[k]`` is
    the original id of vertex ``k`` in the decimated mesh.
    """
    d = _Decimator(mesh, params.feature_angle)
    d.run_passes(
        params.distance_threshold,
        params.edge_distance_threshold,
        params.max_passes,
        _stop_count(mesh.n_vertices, params.target_fraction),
    )
    return d.result(params.target_fraction, [params.distance_threshold])


def decimate_to_fraction(
    mesh: Mesh,
    target_fraction: float,
    feature_angle: float = DEFAULT_FEATURE_ANGLE,
    start: float = 1e-5,
    growth: float = 1.25,
    max_threshold: float = 1.0,
    max_passes: int = 100,
):
    """Decimate with a geometric ladder of thresholds until at most
    ``target_fraction`` of the vertices remain.

    Flattest vertices go first; runs for smaller targets continue the same
    sequence of deletions, so the deleted sets are nested.
    """
    if not 0 < target_fraction <= 1:
        raise ValueError("target_fraction must lie in (0, 1]")
    d = _Decimator(mesh, feature_angle)
    stop = _stop_count(mesh.n_vertices, target_fraction)
    thr = start
    ladder = []
    while thr <= max_threshold * (1 + 1e-12):
        ladder.append(thr)
        if d.run_passes(thr, thr, max_passes, stop):
            break
        thr *= growth
    out, rep = d.result(target_fraction, ladder)
    if not rep.reached_target:
        log.warning(
            "decimation stopped at %.3f retained (target %.3f)", rep.retained_fraction, target_fraction
        )
    return out, rep
