"""Vertex classification, surface-shape labels and the risky-vertex screen."""

from __future__ import annotations

import enum
import itertools

import numpy as np

from .curvature import dihedral_angles
from .mesh import Adjacency, Mesh, VertexStar, topology_sets

__all__ = [
    "VertexClass",
    "SurfaceShape",
    "DEFAULT_FEATURE_ANGLE",
    "feature_edge_count",
    "classify_vertex",
    "classify_vertices",
    "surface_shape",
    "default_zero_bands",
    "risky_primitives",
]

DEFAULT_FEATURE_ANGLE = 30.0
COLLINEAR_DEGREES = 1.0


class VertexClass(str, enum.Enum):
    SIMPLE_SMOOTH = "simple"
    INTERIOR_EDGE = "interior-edge"
    CORNER = "corner"
    COMPLEX = "complex"
    BOUNDARY = "boundary"


class SurfaceShape(str, enum.Enum):
    PLANAR = "planar"
    RIDGE_CONVEX = "ridge-convex"
    VALLEY_CONCAVE = "valley-concave"
    CONVEX = "convex"
    CONCAVE = "concave"
    SADDLE = "saddle"
    SADDLE_RIDGE = "saddle-ridge"
    SADDLE_VALLEY = "saddle-valley"


def feature_edge_count(star: VertexStar, feature_angle: float = DEFAULT_FEATURE_ANGLE) -> int:
    return int((np.abs(dihedral_angles(star)) > feature_angle).sum())


def classify_vertex(star: VertexStar | None, feature_angle: float = DEFAULT_FEATURE_ANGLE) -> VertexClass:
    """Classify a vertex from its star.

    ``None`` stands for a vertex whose incident faces are not one fan or
    cycle, which covers edges shared by more than two faces.
    """
    if star is None:
        return VertexClass.COMPLEX
    if not star.closed:
        return VertexClass.BOUNDARY
    k = feature_edge_count(star, feature_angle)
    if k <= 1:
        return VertexClass.SIMPLE_SMOOTH
    if k == 2:
        return VertexClass.INTERIOR_EDGE
    return VertexClass.CORNER


def classify_vertices(mesh: Mesh, adj: Adjacency, feature_angle: float = DEFAULT_FEATURE_ANGLE) -> list[VertexClass]:
    return [classify_vertex(adj.star(v), feature_angle) for v in range(mesh.n_vertices)]


_SHAPES = {
    (0, 0): SurfaceShape.PLANAR,
    (0, -1): SurfaceShape.RIDGE_CONVEX,
    (0, 1): SurfaceShape.VALLEY_CONCAVE,
    (1, -1): SurfaceShape.CONVEX,
    (1, 1): SurfaceShape.CONCAVE,
    (-1, 0): SurfaceShape.SADDLE,
    (-1, -1): SurfaceShape.SADDLE_RIDGE,
    (-1, 1): SurfaceShape.SADDLE_VALLEY,
}


def _sign(x: float, band: float) -> int:
    if abs(x) <= band:
        return 0
    return 1 if x > 0 else -1


def surface_shape(kG: float, kH: float, zero_band=0.0) -> SurfaceShape:
    """Label from the signs of Gaussian and mean curvature.

    ``zero_band`` is either one tolerance for both, or a ``(band_G, band_H)``
    pair. A positive Gaussian curvature with zero mean curvature cannot occur
    on a smooth surface; it is labelled by the sign of kH as if it were tiny.
    """
    if np.ndim(zero_band):
        band_g, band_h = zero_band
    else:
        band_g = band_h = zero_band
    sg = _sign(kG, band_g)
    sh = _sign(kH, band_h)
    if sg == 1 and sh == 0:
        sh = -1 if kH < 0 else 1
    return _SHAPES[(sg, sh)]


def default_zero_bands(kG, kH, rel: float = 1e-6) -> tuple[float, float]:
    """Zero tolerances scaled to the mesh's own curvature range."""
    g = np.asarray(kG, dtype=np.float64)
    h = np.asarray(kH, dtype=np.float64)
    mg = np.nanmax(np.abs(g)) if np.isfinite(g).any() else 0.0
    mh = np.nanmax(np.abs(h)) if np.isfinite(h).any() else 0.0
    return rel * float(mg), rel * float(mh)


def _has_collinear_edges(star: VertexStar, degrees: float) -> bool:
    d = star.ring_positions - star.position
    n = np.linalg.norm(d, axis=1)
    if (n == 0).any():
        return True
    u = d / n[:, None]
    lim = np.cos(np.radians(degrees))
    for i, j in itertools.combinations(range(len(u)), 2):
        if abs(float(np.dot(u[i], u[j]))) >= lim:
            return True
    return False


def risky_primitives(mesh: Mesh, adj: Adjacency, features, topo=None) -> dict[int, str]:
    """Risky vertices with the first reason that applies.

    ``features`` needs ``kG`` and ``kH`` columns (mapping or object with a
    ``column`` method) and may carry ``zero_bands``. Pass ``topo`` to reuse
    already computed topology sets.
    """
    if topo is None:
        topo = topology_sets(mesh, adj)
    out: dict[int, str] = {v: "topology" for v in topo.errors}
    val = np.array([len(adj.neighbors[v]) for v in range(mesh.n_vertices)], dtype=float)
    used = val > 0
    if used.any():
        lim = val[used].mean() + 3 * val[used].std()
        for v in np.flatnonzero(val > lim):
            out.setdefault(int(v), "valence")
    for v in topo.boundary:
        out.setdefault(v, "boundary")
    kG = np.asarray(features["kG"], dtype=float)
    kH = np.asarray(features["kH"], dtype=float)
    bands = getattr(features, "zero_bands", None) or default_zero_bands(kG, kH)
    for v in range(mesh.n_vertices):
        if v in out:
            continue
        if np.isfinite(kG[v]) and abs(kG[v]) <= bands[0] and abs(kH[v]) <= bands[1]:
            out[v] = "flat"
            continue
        st = adj.star(v)
        if st is not None and _has_collinear_edges(st, COLLINEAR_DEGREES):
            out[v] = "collinear"
    return dict(sorted(out.items()))
