"""Ordered-statistics vertex extraction.

Builds a per-vertex feature table, removes risky and irrelevant vertices,
scores the rest by rate-weighted rank criteria, and returns the vertices
sorted by decreasing stability.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .classify import (
    DEFAULT_FEATURE_ANGLE,
    VertexClass,
    classify_vertex,
    default_zero_bands,
    risky_primitives,
    surface_shape,
)
from .curvature import AreaMode, curvature_gradient, mesh_curvature
from .decimate import distance_to_average_plane
from .mesh import Adjacency, Mesh, TopologySets, build_adjacency, topology_sets
from .quadric import FitKind, mesh_quadric_curvature

__all__ = [
    "NUMERIC_COLUMNS",
    "FeatureTable",
    "Preset",
    "CutRule",
    "ELIMINATION_RULES",
    "ASSESSMENT_CRITERIA",
    "CriteriaConfig",
    "ExtractionResult",
    "compute_feature_table",
    "eliminate_vertices",
    "rank_weights",
    "score_vertices",
    "order_survivors",
    "extract",
]

log = logging.getLogger(__name__)

NUMERIC_COLUMNS = (
    "kG", "kH", "k1", "k2", "theta_deg", "psi_min", "psi_max", "area",
    "kGI", "kHI", "c_el", "c_dug", "c_tup", "c_vis", "grad_kG", "grad_kH",
)

TIE_REL = 1e-9
THETA_FLAT_TOL = 1e-6


# ---------------------------------------------------------------------------
# feature table
# ---------------------------------------------------------------------------


@dataclass
class FeatureTable:
    columns: dict[str, np.ndarray]
    classes: list[VertexClass]
    shapes: list[str | None]
    flags: list[set]
    topology: TopologySets
    zero_bands: tuple[float, float]
    area_mode: AreaMode
    risky: dict[int, str] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    @property
    def n_vertices(self) -> int:
        return len(self.classes)

    def to_csv(self) -> str:
        head = ["id", *NUMERIC_COLUMNS, "class", "shape", "risky", "flags"]
        lines = [",".join(head)]
        for v in range(self.n_vertices):
            row = [str(v)]
            for c in NUMERIC_COLUMNS:
                x = self.columns[c][v]
                row.append(repr(float(x)) if np.isfinite(x) else ("inf" if np.isinf(x) else ""))
            row += [
                self.classes[v].value,
                self.shapes[v] or "",
                self.risky.get(v, ""),
                ";".join(sorted(self.flags[v])),
            ]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def _triangle_shape_features(mesh: Mesh):
    """Per face: longest edge over shortest altitude, and largest corner (deg)."""
    v = mesh.vertices
    f = mesh.faces
    p0, p1, p2 = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    l = np.stack(
        [np.linalg.norm(p2 - p1, axis=1), np.linalg.norm(p0 - p2, axis=1), np.linalg.norm(p1 - p0, axis=1)],
        axis=1,
    )
    area = mesh.face_areas
    longest = l.max(1)
    with np.errstate(divide="ignore", invalid="ignore"):
        shortest_alt = 2 * area / longest
        elong = np.where(area > mesh.degenerate_area, longest / shortest_alt, np.inf)
    # law of cosines, largest angle is opposite the longest edge
    ls = np.sort(l, axis=1)
    a, b, c = ls[:, 0], ls[:, 1], ls[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        cosc = np.clip((a * a + b * b - c * c) / (2 * a * b), -1.0, 1.0)
    big = np.degrees(np.arccos(cosc))
    big = np.where((a > 0) & (b > 0), big, 180.0)
    return elong, big


def _max_over_incident(values_per_face, adj: Adjacency, n):
    out = np.full(n, np.nan)
    for v in range(n):
        fids = adj.vertex_faces[v]
        if len(fids):
            out[v] = float(np.max(values_per_face[fids]))
    return out


def _chunks(n, k):
    bounds = np.linspace(0, n, k + 1).astype(int)
    return [range(bounds[i], bounds[i + 1]) for i in range(k)]


def compute_feature_table(
    mesh: Mesh,
    area: AreaMode | str = AreaMode.BARYCENTRIC,
    feature_angle: float = DEFAULT_FEATURE_ANGLE,
    adj: Adjacency | None = None,
    workers: int = 1,
) -> FeatureTable:
    """Every per-vertex feature the extraction uses.

    ``workers`` > 1 computes the quadric fits in threads; results do not
    depend on it.
    """
    area = AreaMode.parse(area)
    adj = adj or build_adjacency(mesh)
    n = mesh.n_vertices
    topo = topology_sets(mesh, adj)
    cols, flags = mesh_curvature(mesh, adj, area)

    if workers > 1 and n > 1:
        parts = _chunks(n, workers)
        with ThreadPoolExecutor(workers) as ex:
            res = list(ex.map(lambda r: mesh_quadric_curvature(mesh, adj, FitKind.EXTENDED, vertices=r), parts))
        kGI = np.full(n, np.nan)
        kHI = np.full(n, np.nan)
        for r, (g, h, _, _) in zip(parts, res):
            kGI[r.start : r.stop] = g[r.start : r.stop]
            kHI[r.start : r.stop] = h[r.start : r.stop]
    else:
        kGI, kHI, _, _ = mesh_quadric_curvature(mesh, adj, FitKind.EXTENDED)
    cols["kGI"] = kGI
    cols["kHI"] = kHI

    elong, big = _triangle_shape_features(mesh)
    cols["c_el"] = _max_over_incident(elong, adj, n)
    cols["c_tup"] = _max_over_incident(big, adj, n)
    c_dug = np.full(n, np.nan)
    c_vis = np.full(n, np.nan)
    classes: list[VertexClass] = []
    for v in range(n):
        nb = adj.neighbors[v]
        if len(nb):
            c_dug[v] = float(np.linalg.norm(mesh.vertices[nb] - mesh.vertices[v], axis=1).max())
        st = adj.star(v)
        classes.append(classify_vertex(st, feature_angle))
        if st is None:
            continue
        try:
            c_vis[v] = distance_to_average_plane(st)
        except ValueError:
            flags[v].add("no-plane")
    cols["c_dug"] = c_dug
    cols["c_vis"] = c_vis
    cols["grad_kG"] = curvature_gradient(cols["kG"], mesh, adj)
    cols["grad_kH"] = curvature_gradient(cols["kH"], mesh, adj)

    for v in topo.errors:
        flags[v].add("topology-error")
    bands = default_zero_bands(cols["kG"], cols["kH"])
    shapes = [
        surface_shape(g, h, bands).value if np.isfinite(g) and np.isfinite(h) else None
        for g, h in zip(cols["kG"].tolist(), cols["kH"].tolist())
    ]
    ordered = {c: cols[c] for c in NUMERIC_COLUMNS}
    table = FeatureTable(ordered, classes, shapes, flags, topo, bands, area)
    table.risky = risky_primitives(mesh, adj, table, topo)
    return table


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


class Preset(str, enum.Enum):
    SAFE = "safe"
    EXTENDED = "extended"
    AGGRESSIVE = "aggressive"

    @property
    def percentiles(self) -> tuple[float, float]:
        return {"safe": (0.5, 99.5), "extended": (2.0, 98.0), "aggressive": (5.0, 95.0)}[self.value]


@dataclass(frozen=True)
class CutRule:
    """One side of an elimination row.

    Values of ``column`` restricted to ``subset`` ("all", "pos" or "neg")
    are cut beyond the lower or upper percentile of that same subset.
    """

    reason: str
    column: str
    subset: str
    side: str


def _rows():
    r = CutRule
    return (
        r("kG_near_zero", "kG", "pos", "lower"),
        r("kG_near_zero", "kG", "neg", "upper"),
        r("kH_pos", "kH", "all", "upper"),
        r("kH_pos", "kH", "pos", "lower"),
        r("kH_neg", "kH", "all", "lower"),
        r("kH_neg", "kH", "neg", "upper"),
        r("kmax_high", "k1", "all", "upper"),
        r("kmax_neg", "k1", "all", "lower"),
        r("kmax_neg", "k1", "neg", "upper"),
        r("kmin_pos", "k2", "all", "upper"),
        r("kmin_pos", "k2", "pos", "lower"),
        r("kmin_neg", "k2", "all", "lower"),
        r("kmin_neg", "k2", "neg", "upper"),
        r("theta", "theta_deg", "all", "upper"),
        r("theta", "theta_deg", "all", "lower"),
        r("kGI", "kGI", "all", "upper"),
        r("kGI", "kGI", "all", "lower"),
        r("kHI_pos", "kHI", "all", "upper"),
        r("kHI_pos", "kHI", "pos", "lower"),
        r("kHI_neg", "kHI", "all", "lower"),
        r("kHI_neg", "kHI", "neg", "upper"),
        r("c_el", "c_el", "all", "upper"),
        r("c_dug", "c_dug", "all", "upper"),
        r("c_dug", "c_dug", "all", "lower"),
        r("c_tup", "c_tup", "all", "upper"),
        r("c_tup", "c_tup", "all", "lower"),
        r("c_vis", "c_vis", "all", "upper"),
        r("c_vis", "c_vis", "all", "lower"),
        r("grad_kG", "grad_kG", "all", "upper"),
        r("grad_kG", "grad_kG", "all", "lower"),
        r("grad_kH", "grad_kH", "all", "upper"),
        r("grad_kH", "grad_kH", "all", "lower"),
        r("psi_max", "psi_max", "all", "upper"),
        r("psi_max", "psi_max", "all", "lower"),
    )


ELIMINATION_RULES: tuple[CutRule, ...] = _rows()

# (name, column, sign test, magnitude, rate)
ASSESSMENT_CRITERIA = (
    ("psi_min_nonneg", "psi_min", "nonneg", 1.0),
    ("theta_small", "theta_deg", "below360", 1.0),
    ("kGI_pos", "kGI", "pos", 1.0),
    ("psi_max_nonneg", "psi_max", "nonneg", 0.9),
    ("theta_big", "theta_deg", "above360", 0.8),
    ("kG_neg", "kG", "neg", 0.8),
    ("kGI_neg", "kGI", "neg", 0.7),
    ("kG_pos", "kG", "pos", 0.4),
)

DEFAULT_RATES = tuple(c[3] for c in ASSESSMENT_CRITERIA)


@dataclass(frozen=True)
class CriteriaConfig:
    preset: Preset = Preset.SAFE
    rates: tuple[float, ...] = DEFAULT_RATES
    boundary_elimination: bool = False
    percentiles: tuple[float, float] | None = None
    rules: tuple[CutRule, ...] = ELIMINATION_RULES

    def __post_init__(self):
        object.__setattr__(self, "preset", Preset(self.preset))
        if len(self.rates) != len(ASSESSMENT_CRITERIA):
            raise ValueError(f"expected {len(ASSESSMENT_CRITERIA)} rates")
        if any(not 0 <= r <= 1 for r in self.rates):
            raise ValueError("rates must lie in [0, 1]")
        lo, hi = self.cuts
        if not 0 <= lo < hi <= 100:
            raise ValueError("percentile cuts must satisfy 0 <= lower < upper <= 100")

    @property
    def cuts(self) -> tuple[float, float]:
        return self.percentiles or self.preset.percentiles

    def with_preset(self, preset) -> "CriteriaConfig":
        return replace(self, preset=Preset(preset), percentiles=None)


# ---------------------------------------------------------------------------
# elimination
# ---------------------------------------------------------------------------


def _near_zero(x, band):
    return np.isfinite(x) & (np.abs(x) <= band)


def eliminate_vertices(table: FeatureTable, config: CriteriaConfig = CriteriaConfig()) -> dict[int, str]:
    """Eliminated vertex ids with the first matching reason code.

    Risky vertices come first ("topology", then "boundary" when enabled,
    then "flat"); the percentile rows follow in table order.
    """
    n = table.n_vertices
    topo = table.topology
    out: dict[int, str] = {}
    for v in sorted(topo.errors):
        out[v] = "topology"
    if config.boundary_elimination:
        for v in sorted(topo.boundary):
            out.setdefault(v, "boundary")
    bg, bh = table.zero_bands
    flat = _near_zero(table["kG"], bg) & _near_zero(table["kH"], bh)
    for v in np.flatnonzero(flat).tolist():
        out.setdefault(v, "flat")

    pool = np.ones(n, dtype=bool)
    pool[list(topo.errors)] = False
    lo_q, hi_q = config.cuts
    hits: dict[str, np.ndarray] = {}
    for rule in config.rules:
        x = table[rule.column]
        ok = pool & np.isfinite(x)
        if rule.subset == "pos":
            ok &= x > 0
        elif rule.subset == "neg":
            ok &= x < 0
        vals = x[ok]
        if len(vals) == 0:
            continue
        scale = float(np.abs(vals).max())
        margin = TIE_REL * scale
        with np.errstate(invalid="ignore"):
            if rule.side == "upper":
                hit = ok & (x > np.percentile(vals, hi_q) + margin)
            else:
                hit = ok & (x < np.percentile(vals, lo_q) - margin)
        prev = hits.get(rule.reason)
        hits[rule.reason] = hit if prev is None else prev | hit
    # equality rows
    theta = table["theta_deg"]
    eq = pool & np.isfinite(theta) & (np.abs(theta - 360.0) <= THETA_FLAT_TOL)
    hits["theta"] = hits.get("theta", np.zeros(n, bool)) | eq
    kHI = table["kHI"]
    fin = np.isfinite(kHI)
    if fin.any():
        band = 1e-6 * float(np.abs(kHI[fin]).max())
        hits["kHI_pos"] = hits.get("kHI_pos", np.zeros(n, bool)) | (pool & _near_zero(kHI, band))
    # infinite elongation (degenerate faces) is beyond any finite cut
    hits["c_el"] = hits.get("c_el", np.zeros(n, bool)) | (pool & np.isinf(table["c_el"]))

    order = list(dict.fromkeys([r.reason for r in config.rules] + list(hits)))
    for reason in order:
        if reason not in hits:
            continue
        for v in np.flatnonzero(hits[reason]).tolist():
            out.setdefault(v, reason)
    return dict(sorted(out.items()))


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------


def _cluster_ranks(mag: np.ndarray) -> np.ndarray:
    """Descending rank (0 = largest) with near-equal values sharing the
    best rank of their group. Groups chain consecutive sorted values whose
    gap is at most ``TIE_REL`` times the largest magnitude."""
    n = len(mag)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.argsort(-mag, kind="stable")
    s = mag[order]
    tol = TIE_REL * float(np.abs(s).max())
    new_group = np.ones(n, dtype=bool)
    new_group[1:] = (s[:-1] - s[1:]) > tol
    pos = np.arange(n)
    group_start = np.maximum.accumulate(np.where(new_group, pos, 0))
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = group_start
    return ranks


def rank_weights(mag) -> np.ndarray:
    """``(n - rank) / n``: the largest gets 1, the smallest 1/n."""
    mag = np.asarray(mag, dtype=np.float64)
    n = len(mag)
    if n == 0:
        return np.zeros(0)
    return (n - _cluster_ranks(mag)) / n


def _criterion(table: FeatureTable, column: str, test: str):
    """(qualifies mask, magnitude) for one assessment criterion."""
    x = table[column]
    fin = np.isfinite(x)
    bg, _ = table.zero_bands
    with np.errstate(invalid="ignore"):
        if test == "nonneg":
            q = fin & (x >= -THETA_FLAT_TOL)
            mag = np.abs(x)
        elif test == "below360":
            q = fin & (x < 360.0 - THETA_FLAT_TOL)
            mag = 360.0 - x
        elif test == "above360":
            q = fin & (x > 360.0 + THETA_FLAT_TOL)
            mag = x - 360.0
        else:
            band = bg if column == "kG" else _kGI_band(table)
            if test == "pos":
                q = fin & (x > band)
                mag = x
            else:
                q = fin & (x < -band)
                mag = -x
    return q, np.where(q, mag, 0.0)


def _kGI_band(table):
    x = table["kGI"]
    fin = np.isfinite(x)
    return 1e-6 * float(np.abs(x[fin]).max()) if fin.any() else 0.0


def score_vertices(
    table: FeatureTable, survivors, config: CriteriaConfig = CriteriaConfig()
) -> np.ndarray:
    """Stability score for every vertex (NaN outside ``survivors``)."""
    surv = np.zeros(table.n_vertices, dtype=bool)
    surv[np.asarray(sorted(survivors), dtype=np.int64)] = True
    score = np.zeros(table.n_vertices)
    for (_, column, test, _), rate in zip(ASSESSMENT_CRITERIA, config.rates):
        q, mag = _criterion(table, column, test)
        q &= surv
        ids = np.flatnonzero(q)
        if len(ids):
            score[ids] += rate * rank_weights(mag[ids])
    score[~surv] = np.nan
    return score


def order_survivors(table: FeatureTable, survivors, scores) -> np.ndarray:
    """Survivor ids by score descending, then clustered |kG| descending,
    then index ascending."""
    ids = np.asarray(sorted(survivors), dtype=np.int64)
    if not len(ids):
        return ids
    kg = np.abs(table["kG"][ids])
    kg = np.where(np.isfinite(kg), kg, -1.0)
    kg_rank = _cluster_ranks(kg)
    order = np.lexsort((ids, kg_rank, -scores[ids]))
    return ids[order]


@dataclass
class ExtractionResult:
    s: np.ndarray
    i: np.ndarray
    p: np.ndarray
    eliminated: dict[int, str]
    table: FeatureTable | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "s": [float(x) for x in self.s],
            "i": [int(x) for x in self.i],
            "p": [int(x) for x in self.p],
            "eliminated": [{"id": int(k), "reason": r} for k, r in sorted(self.eliminated.items())],
        }


def extract(
    mesh: Mesh,
    L: int,
    config: CriteriaConfig = CriteriaConfig(),
    area: AreaMode | str = AreaMode.BARYCENTRIC,
    feature_angle: float = DEFAULT_FEATURE_ANGLE,
    table: FeatureTable | None = None,
    workers: int = 1,
) -> ExtractionResult:
    """Run the whole pipeline and return the ordered stability vectors."""
    if L < 0:
        raise ValueError("L must be non-negative")
    if table is None:
        table = compute_feature_table(mesh, area, feature_angle, workers=workers)
    eliminated = eliminate_vertices(table, config)
    survivors = [v for v in range(table.n_vertices) if v not in eliminated]
    if not survivors:
        raise ValueError("nothing to extract")
    scores = score_vertices(table, survivors, config)
    i = order_survivors(table, survivors, scores)
    if L > len(i):
        log.warning("requested %d vertices but only %d survive elimination", L, len(i))
    s = scores[i]
    return ExtractionResult(s=s, i=i, p=i[: min(L, len(i))], eliminated=eliminated, table=table)
