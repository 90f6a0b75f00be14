"""Curvature from a least-squares quadric fitted in a local frame.

The frame has its z axis on the estimated normal and its x axis on the
projection of the global x axis. Neighbors are mapped into the frame and
fitted with ``z = a x^2 + b xy + c y^2`` (simple) or with the extra linear
terms ``d x + e y`` (extended).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .mesh import Adjacency, Mesh, VertexStar

__all__ = [
    "FitKind",
    "NormalMode",
    "LocalFrame",
    "QuadricFit",
    "QuadricCurvature",
    "UnfittableStarError",
    "estimate_normal",
    "local_frame",
    "design_matrix",
    "fit_points",
    "fit_quadric",
    "curvatures_from_quadric",
    "mesh_quadric_curvature",
]

_SINGULAR = 1e-8


class FitKind(str, enum.Enum):
    SIMPLE = "simple"
    EXTENDED = "extended"

    @property
    def n_params(self) -> int:
        return 3 if self is FitKind.SIMPLE else 5


class NormalMode(str, enum.Enum):
    ANGLE_WEIGHTED = "angle"
    LSQ_PLANE = "plane"


class UnfittableStarError(ValueError):
    pass


def estimate_normal(star: VertexStar, mode: NormalMode | str = NormalMode.ANGLE_WEIGHTED) -> np.ndarray:
    mode = NormalMode(mode)
    ok = star.valid
    avg = (star.face_normals[ok] * star.wedge_angles[ok, None]).sum(0)
    if mode is NormalMode.ANGLE_WEIGHTED:
        norm = np.linalg.norm(avg)
        if norm == 0:
            raise ValueError(f"normal undefined at vertex {star.center}")
        return avg / norm
    if len(star.ring) < 3:
        raise ValueError(f"plane fit needs 3 neighbors at vertex {star.center}")
    pts = np.vstack([star.position, star.ring_positions])
    centered = pts - pts.mean(0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[1] <= 1e-12 * max(s[0], 1e-300):
        raise ValueError(f"colinear ring at vertex {star.center}")
    n = vt[2]
    if float(np.dot(n, avg)) < 0:
        n = -n
    return n / np.linalg.norm(n)


@dataclass(frozen=True)
class LocalFrame:
    origin: np.ndarray
    rotation: np.ndarray  # rows r1, r2, r3

    def to_local(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.origin) @ self.rotation.T

    def to_world_direction(self, d) -> np.ndarray:
        return self.rotation.T @ np.asarray(d, dtype=np.float64)


def local_frame(n, origin=(0.0, 0.0, 0.0)) -> LocalFrame:
    n = np.asarray(n, dtype=np.float64)
    n = n / np.linalg.norm(n)
    seed = np.array([1.0, 0.0, 0.0])
    if 1.0 - abs(n[0]) < _SINGULAR:
        seed = np.array([0.0, 1.0, 0.0])
    r1 = seed - n * np.dot(n, seed)
    r1 /= np.linalg.norm(r1)
    r2 = np.cross(n, r1)
    return LocalFrame(np.asarray(origin, dtype=np.float64), np.vstack([r1, r2, n]))


@dataclass(frozen=True)
class QuadricFit:
    kind: FitKind
    coefficients: np.ndarray  # a, b, c (, d, e)
    residual_rms: float
    frame: LocalFrame | None = None
    n_points: int = 0

    @property
    def a(self):
        return float(self.coefficients[0])

    @property
    def b(self):
        return float(self.coefficients[1])

    @property
    def c(self):
        return float(self.coefficients[2])

    @property
    def d(self):
        return float(self.coefficients[3]) if self.kind is FitKind.EXTENDED else 0.0

    @property
    def e(self):
        return float(self.coefficients[4]) if self.kind is FitKind.EXTENDED else 0.0


def design_matrix(local: np.ndarray, kind: FitKind) -> np.ndarray:
    x, y = local[:, 0], local[:, 1]
    cols = [x * x, x * y, y * y]
    if FitKind(kind) is FitKind.EXTENDED:
        cols += [x, y]
    return np.column_stack(cols)


def fit_points(local: np.ndarray, kind: FitKind | str = FitKind.EXTENDED, frame=None) -> QuadricFit:
    """Least-squares quadric through points already in the local frame."""
    kind = FitKind(kind)
    local = np.asarray(local, dtype=np.float64)
    A = design_matrix(local, kind)
    z = local[:, 2]
    if len(z) < kind.n_params:
        raise UnfittableStarError(f"{len(z)} points for {kind.n_params} parameters")
    coef, _, rank, sv = np.linalg.lstsq(A, z, rcond=None)
    if rank < kind.n_params or sv[-1] <= 1e-10 * sv[0]:
        raise UnfittableStarError("rank-deficient quadric system")
    r = A @ coef - z
    return QuadricFit(kind, coef, float(np.sqrt(np.mean(r * r))), frame, len(z))


def fit_quadric(
    star: VertexStar,
    frame: LocalFrame,
    kind: FitKind | str = FitKind.EXTENDED,
    mesh: Mesh | None = None,
    adj: Adjacency | None = None,
) -> QuadricFit:
    """Fit the ring of ``star`` in ``frame``; fall back to the 2-ring when the
    1-ring cannot determine the coefficients (needs ``mesh`` and ``adj``)."""
    kind = FitKind(kind)
    try:
        return fit_points(frame.to_local(star.ring_positions), kind, frame)
    except UnfittableStarError:
        if mesh is None or adj is None:
            raise
    ids = adj.two_ring(star.center)
    try:
        return fit_points(frame.to_local(mesh.vertices[ids]), kind, frame)
    except UnfittableStarError:
        raise UnfittableStarError(f"unfittable star at vertex {star.center}") from None


class QuadricCurvature(NamedTuple):
    k1: float
    k2: float
    kGI: float
    kHI: float
    normal: np.ndarray | None


def curvatures_from_quadric(fit: QuadricFit) -> QuadricCurvature:
    a, b, c = fit.a, fit.b, fit.c
    root = math.sqrt((a - c) ** 2 + b * b)
    k1 = a + c + root
    k2 = a + c - root
    if fit.kind is FitKind.SIMPLE:
        return QuadricCurvature(k1, k2, 4 * a * c - b * b, a + c, None)
    d, e = fit.d, fit.e
    g = 1.0 + d * d + e * e
    kGI = (4 * a * c - b * b) / (g * g)
    kHI = (a + c + a * e * e + c * d * d - b * d * e) / math.sqrt(g**3)
    n_local = np.array([-d, -e, 1.0]) / math.sqrt(g)
    normal = fit.frame.to_world_direction(n_local) if fit.frame is not None else n_local
    return QuadricCurvature(k1, k2, kGI, kHI, normal)


def mesh_quadric_curvature(
    mesh: Mesh,
    adj: Adjacency,
    kind: FitKind | str = FitKind.EXTENDED,
    normal_mode: NormalMode | str = NormalMode.ANGLE_WEIGHTED,
    vertices=None,
):
    """``(kGI, kHI, k1, k2)`` arrays over the mesh (NaN where unfittable)."""
    n = mesh.n_vertices
    out = np.full((4, n), np.nan)
    for v in range(n) if vertices is None else vertices:
        st = adj.star(v)
        if st is None:
            continue
        try:
            frame = local_frame(estimate_normal(st, normal_mode), st.position)
            q = curvatures_from_quadric(fit_quadric(st, frame, kind, mesh, adj))
        except (UnfittableStarError, ValueError):
            continue
        out[:, v] = q.kGI, q.kHI, q.k1, q.k2
    return out[0], out[1], out[2], out[3]
