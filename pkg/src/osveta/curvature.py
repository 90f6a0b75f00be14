"""Discrete differential-geometry curvature on vertex stars.

Mean curvature normal via cotangent weights, Gaussian curvature via the
angle deficit, both normalized by a per-vertex area that is either the
mixed Voronoi region or one third of every incident triangle.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .mesh import Adjacency, Mesh, VertexStar, cross_rows

__all__ = [
    "AreaMode",
    "CurvatureAtVertex",
    "DegenerateStarError",
    "NoDihedralError",
    "PrincipalCurvatures",
    "vertex_area",
    "mean_curvature_normal",
    "signed_mean_curvature",
    "gaussian_curvature",
    "principal_curvatures",
    "theta_sum",
    "dihedral_angles",
    "dihedral_extrema",
    "curvature_gradient",
    "vertex_normal",
    "vertex_curvature",
    "mesh_curvature",
]

COT_CLAMP = 1e6


class AreaMode(str, enum.Enum):
    VORONOI = "voronoi"
    BARYCENTRIC = "barycentric"

    @classmethod
    def parse(cls, value) -> "AreaMode":
        if isinstance(value, cls):
            return value
        v = str(value).lower()
        if v in ("voronoi", "voronoimixed", "mixed"):
            return cls.VORONOI
        if v in ("barycentric", "barycenter"):
            return cls.BARYCENTRIC
        raise ValueError(f"unknown area mode {value!r}")


class DegenerateStarError(ValueError):
    pass


class NoDihedralError(ValueError):
    pass


def _cot(angle):
    c = np.cos(angle) / np.sin(angle)
    return np.clip(c, -COT_CLAMP, COT_CLAMP)


def vertex_area(star: VertexStar, mode: AreaMode | str = AreaMode.BARYCENTRIC) -> float:
    """Area attributed to the star's center vertex.

    Voronoi mode uses the mixed region: the Voronoi part of non-obtuse
    triangles, half the triangle when the center angle is obtuse, a quarter
    when another angle is.
    """
    mode = AreaMode.parse(mode)
    ok = star.valid
    areas = star.face_areas[ok]
    if not ok.any() or areas.sum() <= 0:
        raise DegenerateStarError(f"degenerate star at vertex {star.center}")
    if mode is AreaMode.BARYCENTRIC:
        return float(areas.sum() / 3.0)
    theta = star.wedge_angles[ok]
    at_a, at_b = (x[ok] for x in star.opposite_angles)
    m = len(star.ring)
    nf = star.n_faces
    la = star.edge_lengths[:nf][ok]
    lb = star.edge_lengths[(np.arange(nf) + 1) % m][ok]
    # edge center->a is opposite the angle at b and vice versa
    vor = (la**2 * _cot(at_b) + lb**2 * _cot(at_a)) / 8.0
    half = np.pi / 2
    obtuse_center = theta > half
    obtuse_other = (at_a > half) | (at_b > half)
    out = np.where(obtuse_center, areas / 2, np.where(obtuse_other, areas / 4, vor))
    return float(out.sum())


def mean_curvature_normal(star: VertexStar, area: float) -> np.ndarray:
    """Cotangent Laplacian of position, divided by ``2 * area``.

    Open (boundary) stars use whatever cotangent terms exist.
    """
    if not area > 0:
        raise DegenerateStarError(f"non-positive area at vertex {star.center}")
    ok = star.valid
    at_a, at_b = star.opposite_angles
    m = len(star.ring)
    nf = star.n_faces
    ia = np.arange(nf)
    ib = (ia + 1) % m
    w = np.zeros(m)
    np.add.at(w, ia[ok], _cot(at_b[ok]))
    np.add.at(w, ib[ok], _cot(at_a[ok]))
    d = star.ring_positions - star.position
    return (w[:, None] * d).sum(0) / (2.0 * area)


def vertex_normal(star: VertexStar) -> np.ndarray:
    """Wedge-angle-weighted average of incident face normals (unit)."""
    ok = star.valid
    n = (star.face_normals[ok] * star.wedge_angles[ok, None]).sum(0)
    norm = np.linalg.norm(n)
    if norm == 0:
        raise DegenerateStarError(f"normal undefined at vertex {star.center}")
    return n / norm


def signed_mean_curvature(K: np.ndarray, normal: np.ndarray) -> float:
    """Half the length of K, signed by its agreement with the vertex normal.

    When K is perpendicular to the normal up to rounding (typical at border
    vertices) the sign is taken as positive so it cannot flip under motion.
    """
    norm = float(np.linalg.norm(K))
    return -0.5 * norm if float(np.dot(K, normal)) < -1e-9 * norm else 0.5 * norm


def gaussian_curvature(star: VertexStar, area: float) -> float:
    """Angle deficit over area. No boundary correction is applied."""
    if not area > 0:
        raise DegenerateStarError(f"non-positive area at vertex {star.center}")
    return float((2 * np.pi - star.wedge_angles[star.valid].sum()) / area)


class PrincipalCurvatures(NamedTuple):
    k1: float
    k2: float
    delta: float
    clamped: bool


def principal_curvatures(kH: float, kG: float) -> PrincipalCurvatures:
    delta = kH * kH - kG
    clamped = delta < 0
    if clamped:
        delta = 0.0
    r = math.sqrt(delta)
    return PrincipalCurvatures(kH + r, kH - r, delta, clamped)


def theta_sum(star: VertexStar) -> float:
    """Sum of wedge angles at the center, in degrees."""
    return float(np.degrees(star.wedge_angles[star.valid].sum()))


def dihedral_angles(star: VertexStar) -> np.ndarray:
    """Signed dihedral angle (degrees) at every interior spoke of the star.

    The angle is the one between the two face normals, so coplanar faces give
    0. It is positive when the edge is convex with respect to the normals.
    Entry ``k`` of a closed star belongs to the spoke towards ``ring[k]``.
    """
    cached = star.__dict__.get("_dihedral")
    if cached is not None:
        return cached
    nf = star.n_faces
    m = len(star.ring)
    if star.closed:
        f2 = np.arange(nf)
        f1 = (f2 - 1) % nf
    else:
        f2 = np.arange(1, nf)
        f1 = f2 - 1
    keep = star.valid[f1] & star.valid[f2]
    f1, f2 = f1[keep], f2[keep]
    n = star.face_normals
    n1, n2 = n[f1], n[f2]
    c = cross_rows(n1, n2)
    ang = np.degrees(np.arctan2(np.sqrt((c * c).sum(1)), (n1 * n2).sum(1)))
    far = star.ring_positions[(f2 + 1) % m] - star.position
    # the far vertex of the second face dips below the first face: convex
    sign = np.where((far * n1).sum(1) > 0, -1.0, 1.0)
    out = sign * ang
    out.flags.writeable = False
    star.__dict__["_dihedral"] = out
    return out


def dihedral_extrema(star: VertexStar) -> tuple[float, float]:
    d = dihedral_angles(star)
    if not len(d):
        raise NoDihedralError(f"no interior edge at vertex {star.center}")
    return float(d.min()), float(d.max())


def curvature_gradient(values, mesh: Mesh, adj: Adjacency) -> np.ndarray:
    """Largest absolute difference quotient of a vertex field over the 1-ring.

    Vertices with a non-finite value or no finite neighbor get NaN.
    """
    values = np.asarray(values, dtype=np.float64)
    out = np.full(mesh.n_vertices, np.nan)
    v = mesh.vertices
    for i in range(mesh.n_vertices):
        nb = adj.neighbors[i]
        if not len(nb) or not np.isfinite(values[i]):
            continue
        fv = values[nb]
        ok = np.isfinite(fv)
        if not ok.any():
            continue
        d = np.linalg.norm(v[nb[ok]] - v[i], axis=1)
        pos = d > 0
        if not pos.any():
            continue
        out[i] = float(np.max(np.abs(values[i] - fv[ok][pos]) / d[pos]))
    return out


@dataclass
class CurvatureAtVertex:
    K: np.ndarray
    kH: float
    kG: float
    k1: float
    k2: float
    delta: float
    area: float
    flags: set = field(default_factory=set)


def vertex_curvature(star: VertexStar, mode: AreaMode | str = AreaMode.BARYCENTRIC) -> CurvatureAtVertex:
    A = vertex_area(star, mode)
    K = mean_curvature_normal(star, A)
    kG = gaussian_curvature(star, A)
    kH = signed_mean_curvature(K, vertex_normal(star))
    pc = principal_curvatures(kH, kG)
    flags = set()
    if not star.closed:
        flags.add("boundary-partial")
    if pc.clamped:
        flags.add("umbilic-clamped")
    if not star.valid.all():
        flags.add("degenerate-face")
    return CurvatureAtVertex(K, kH, kG, pc.k1, pc.k2, pc.delta, A, flags)


CURVATURE_COLUMNS = ("kG", "kH", "k1", "k2", "theta_deg", "psi_min", "psi_max", "area")


def _inconsistent_vertices(mesh: Mesh, adj: Adjacency) -> np.ndarray:
    """Endpoints of two-face edges whose faces traverse them the same way.

    Elsewhere every star is wound like the mesh faces it contains.
    """
    bad = np.zeros(mesh.n_vertices, dtype=bool)
    f = mesh.faces
    for (u, v), fids in adj.edge_faces.items():
        if len(fids) != 2:
            continue
        dirs = []
        for fid in fids:
            t = f[fid].tolist()
            i = t.index(u)
            dirs.append(t[(i + 1) % 3] == v)
        if dirs[0] == dirs[1]:
            bad[u] = bad[v] = True
    return bad


def _corner_angle(u, v):
    c = cross_rows(u, v)
    return np.arctan2(np.sqrt((c * c).sum(-1)), (u * v).sum(-1))


def _dihedral_extrema_all(mesh: Mesh, normals: np.ndarray, valid: np.ndarray):
    """Per-vertex ``(psi_min, psi_max)`` over consistently wound stars.

    At vertex ``u`` the spoke towards ``w`` lies between the face in which
    ``w`` follows ``u`` and the face in which it precedes ``u``; both
    normals are taken at the ``u`` corner, as a star computes them.
    NaN where the vertex has no interior spoke.
    """
    n = mesh.n_vertices
    f = mesh.faces
    u = f.reshape(-1)
    nxt = np.roll(f, -1, axis=1).reshape(-1)
    prv = np.roll(f, -2, axis=1).reshape(-1)
    k2 = u.astype(np.int64) * n + nxt
    k1 = u.astype(np.int64) * n + prv
    _, c2, c1 = np.intersect1d(k2, k1, assume_unique=False, return_indices=True)
    fid2, fid1 = c2 // 3, c1 // 3
    keep = valid.reshape(-1)[c2] & valid.reshape(-1)[c1]
    c1, c2, fid1, fid2 = c1[keep], c2[keep], fid1[keep], fid2[keep]
    nr = normals.reshape(-1, 3)
    n1, n2 = nr[c1], nr[c2]
    c = cross_rows(n1, n2)
    ang = np.degrees(np.arctan2(np.sqrt((c * c).sum(1)), (n1 * n2).sum(1)))
    far = mesh.vertices[prv[c2]] - mesh.vertices[u[c2]]
    d = np.where((far * n1).sum(1) > 0, -1.0, 1.0) * ang
    lo = np.full(n, np.inf)
    hi = np.full(n, -np.inf)
    np.minimum.at(lo, u[c2], d)
    np.maximum.at(hi, u[c2], d)
    none = ~np.isfinite(lo)
    lo[none] = hi[none] = np.nan
    return lo, hi


def mesh_curvature(mesh: Mesh, adj: Adjacency, mode: AreaMode | str = AreaMode.BARYCENTRIC):
    """Per-vertex curvature table as ``(columns, flags)``.

    ``columns`` maps each name in ``CURVATURE_COLUMNS`` to an array with NaN
    where the value is undefined; ``flags`` is a list of sets.

    Every corner is evaluated from its own vertex, as a star would, and
    accumulated per vertex; vertices next to inconsistently wound edges
    go through :func:`vertex_curvature` one star at a time.
    """
    mode = AreaMode.parse(mode)
    n = mesh.n_vertices
    cols = {c: np.full(n, np.nan) for c in CURVATURE_COLUMNS}
    flags: list[set] = [set() for _ in range(n)]
    f = mesh.faces
    if not len(f):
        for v in range(n):
            flags[v].add("no-star")
        return cols, flags

    P = mesh.vertices[f]  # (faces, corner, xyz)
    p, a, b = P, np.roll(P, -1, axis=1), np.roll(P, -2, axis=1)
    cr = cross_rows(a - p, b - p)
    crn = np.sqrt((cr * cr).sum(-1))
    area = 0.5 * np.linalg.norm(cr, axis=-1)
    valid = area > mesh.degenerate_area
    wedge = _corner_angle(a - p, b - p)
    at_a = _corner_angle(p - a, b - a)
    at_b = _corner_angle(p - b, a - b)
    normals = np.zeros_like(cr)
    nz = crn > 0
    normals[nz] = cr[nz] / np.linalg.norm(cr[nz], axis=-1)[:, None]

    idx = f.reshape(-1)
    w = valid.reshape(-1).astype(np.float64)

    def acc(x):
        x = np.asarray(x).reshape(len(idx), -1) * w[:, None]
        return np.stack([np.bincount(idx, x[:, k], minlength=n) for k in range(x.shape[1])], axis=1)

    n_valid = np.bincount(idx, w, minlength=n)
    n_faces = np.bincount(idx, minlength=n)
    area_sum = acc(area)[:, 0]
    if mode is AreaMode.BARYCENTRIC:
        A = area_sum / 3.0
    else:
        la = np.linalg.norm(a - p, axis=-1)
        lb = np.linalg.norm(b - p, axis=-1)
        vor = (la**2 * _cot(at_b) + lb**2 * _cot(at_a)) / 8.0
        half = np.pi / 2
        mixed = np.where(wedge > half, area / 2, np.where((at_a > half) | (at_b > half), area / 4, vor))
        A = acc(mixed)[:, 0]
    lap = acc(_cot(at_b)[..., None] * (a - p) + _cot(at_a)[..., None] * (b - p))
    theta = acc(wedge)[:, 0]
    nsum = acc(wedge[..., None] * normals)

    fallback = _inconsistent_vertices(mesh, adj)
    psi_lo, psi_hi = _dihedral_extrema_all(mesh, normals, valid)
    for v in range(n):
        st = adj.star(v)
        if st is None:
            flags[v].add("no-star")
            continue
        if fallback[v]:
            try:
                c = vertex_curvature(st, mode)
            except DegenerateStarError:
                flags[v].add("degenerate-star")
                continue
            kG, kH, k1, k2, Av, fl = c.kG, c.kH, c.k1, c.k2, c.area, c.flags
            th = theta_sum(st)
        else:
            nrm = float(np.linalg.norm(nsum[v]))
            if n_valid[v] == 0 or area_sum[v] <= 0 or not A[v] > 0 or nrm == 0:
                flags[v].add("degenerate-star")
                continue
            Av = float(A[v])
            K = lap[v] / (2.0 * Av)
            kG = float((2 * np.pi - theta[v]) / Av)
            kH = signed_mean_curvature(K, nsum[v] / nrm)
            pc = principal_curvatures(kH, kG)
            k1, k2 = pc.k1, pc.k2
            fl = set()
            if not st.closed:
                fl.add("boundary-partial")
            if pc.clamped:
                fl.add("umbilic-clamped")
            if n_valid[v] < n_faces[v]:
                fl.add("degenerate-face")
            th = float(np.degrees(theta[v]))
        cols["kG"][v] = kG
        cols["kH"][v] = kH
        cols["k1"][v] = k1
        cols["k2"][v] = k2
        cols["area"][v] = Av
        cols["theta_deg"][v] = th
        flags[v] |= fl
        if fallback[v]:
            try:
                cols["psi_min"][v], cols["psi_max"][v] = dihedral_extrema(st)
            except NoDihedralError:
                flags[v].add("no-dihedral")
        elif np.isnan(psi_lo[v]):
            flags[v].add("no-dihedral")
        else:
            cols["psi_min"][v], cols["psi_max"][v] = psi_lo[v], psi_hi[v]
    return cols, flags
