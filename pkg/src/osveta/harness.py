"""Evaluation protocol: how well extracted vertices survive decimation.

Compares the extraction order against random selections across a ladder of
retained fractions, and measures single-criterion efficiency, overlap of
criterion selections, and the effect of the per-vertex area definition.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .classify import DEFAULT_FEATURE_ANGLE
from .curvature import AreaMode, mesh_curvature
from .decimate import DecimationReport, decimate_to_fraction
from .extract import CriteriaConfig, ExtractionResult, FeatureTable, extract
from .mesh import Mesh, build_adjacency, topology_sets

__all__ = [
    "SCHEMA_VERSION",
    "DEFAULT_SCHEDULE",
    "EFFICIENCY_SIZES",
    "EFFICIENCY_CRITERIA",
    "ExperimentPlan",
    "LevelResult",
    "SurvivalReport",
    "DecimationLevels",
    "decimation_levels",
    "match_survivors",
    "consecutive_deleted",
    "run_stability_experiment",
    "criteria_efficiency",
    "criterion_selection",
    "selection_overlap",
    "area_comparison",
    "ranked_curvature_csv",
    "dumps_report",
]

SCHEMA_VERSION = 1
DEFAULT_SCHEDULE = (0.7, 0.4, 0.23, 0.13, 0.08)
EFFICIENCY_SIZES = (1, 2, 3, 4, 5, 10, 50, 100, 500, 1000)

RANDOM_BASELINE_NOTE = (
    "random selections are drawn uniformly without replacement from the vertices "
    "that survive elimination, unless unrestricted_random is set"
)


@dataclass(frozen=True)
class ExperimentPlan:
    L: int = 1000
    schedule: tuple[float, ...] = DEFAULT_SCHEDULE
    seeds: tuple[int, ...] = tuple(range(10))
    config: CriteriaConfig = CriteriaConfig()
    area: AreaMode = AreaMode.BARYCENTRIC
    feature_angle: float = DEFAULT_FEATURE_ANGLE
    unrestricted_random: bool = False
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "schedule", tuple(float(f) for f in self.schedule))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "area", AreaMode.parse(self.area))
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.L < 0:
            raise ValueError("L must be non-negative")
        prev = 1.0
        for f in self.schedule:
            if not 0 < f <= prev or (f == prev and f != 1.0):
                raise ValueError("schedule must be strictly decreasing within (0, 1]")
            prev = f
        if not self.schedule:
            raise ValueError("schedule is empty")

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "schedule": list(self.schedule),
            "seeds": list(self.seeds),
            "preset": self.config.preset.value,
            "percentiles": list(self.config.cuts),
            "rates": list(self.config.rates),
            "boundary_elimination": self.config.boundary_elimination,
            "area": self.area.value,
            "feature_angle": self.feature_angle,
            "unrestricted_random": self.unrestricted_random,
        }


# ---------------------------------------------------------------------------
# decimation levels
# ---------------------------------------------------------------------------


@dataclass
class DecimationLevels:
    """One progressive decimation run sliced at each target fraction.

    The decimator stops as soon as the retained count reaches the target,
    so a fresh run to a larger fraction performs exactly a prefix of this
    run's deletions.
    """

    n_vertices: int
    deleted_order: list[int]
    report: DecimationReport

    def stop_count(self, fraction: float) -> int:
        keep = int(math.floor(fraction * self.n_vertices + 1e-9))
        return min(len(self.deleted_order), self.n_vertices - keep)

    def deleted_mask(self, fraction: float) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.deleted_order[: self.stop_count(fraction)]] = True
        return mask

    def achieved(self, fraction: float) -> float:
        return 1.0 - self.stop_count(fraction) / self.n_vertices if self.n_vertices else 1.0


def decimation_levels(mesh: Mesh, fractions, feature_angle: float = DEFAULT_FEATURE_ANGLE) -> DecimationLevels:
    lowest = min(fractions)
    _, rep = decimate_to_fraction(mesh, lowest, feature_angle)
    return DecimationLevels(mesh.n_vertices, list(rep.deleted), rep)


def match_survivors(n_original: int, survivors, selection) -> tuple[list[int], list[int]]:
    """Split ``selection`` into (survived, deleted) by original vertex id.

    ``survivors`` is the decimation report's original-id survivor list (or
    the report itself).
    """
    if isinstance(survivors, DecimationReport):
        survivors = survivors.survivors
    alive = np.zeros(n_original, dtype=bool)
    alive[np.asarray(list(survivors), dtype=np.int64)] = True
    kept, gone = [], []
    for v in selection:
        v = int(v)
        if not 0 <= v < n_original:
            raise IndexError(f"vertex {v} out of range for {n_original} vertices")
        (kept if alive[v] else gone).append(v)
    return kept, gone


def consecutive_deleted(order, deleted_mask) -> int:
    """Number of adjacent pairs in ``order`` whose members are both deleted."""
    d = np.asarray(deleted_mask)[np.asarray(order, dtype=np.int64)]
    return int(np.count_nonzero(d[:-1] & d[1:])) if len(d) > 1 else 0


# ---------------------------------------------------------------------------
# stability experiment
# ---------------------------------------------------------------------------


@dataclass
class LevelResult:
    target_fraction: float
    achieved_fraction: float
    retained: int
    partial: bool
    osveta_deleted: int
    random_deleted: list[int]
    osveta_consecutive_top100: int
    osveta_consecutive_topL: int
    random_consecutive_top100: list[int]
    random_consecutive_topL: list[int]
    survived: list[int]

    @property
    def random_mean(self) -> float:
        return float(np.mean(self.random_deleted))

    @property
    def random_std(self) -> float:
        return float(np.std(self.random_deleted))

    def to_dict(self) -> dict:
        return {
            "target_fraction": self.target_fraction,
            "achieved_fraction": self.achieved_fraction,
            "retained": self.retained,
            "partial": self.partial,
            "osveta_deleted": self.osveta_deleted,
            "random_deleted": self.random_deleted,
            "random_mean": self.random_mean,
            "random_std": self.random_std,
            "osveta_consecutive_top100": self.osveta_consecutive_top100,
            "osveta_consecutive_topL": self.osveta_consecutive_topL,
            "random_consecutive_top100_mean": float(np.mean(self.random_consecutive_top100)),
            "random_consecutive_topL_mean": float(np.mean(self.random_consecutive_topL)),
            "survived": self.survived,
        }


@dataclass
class SurvivalReport:
    plan: ExperimentPlan
    n_vertices: int
    n_eliminated: int
    L: int
    levels: list[LevelResult]
    extraction: ExtractionResult = field(repr=False)
    decimation: DecimationLevels = field(repr=False)
    mesh_name: str = ""

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "mesh": self.mesh_name,
            "n_vertices": self.n_vertices,
            "n_eliminated": self.n_eliminated,
            "L": self.L,
            "plan": self.plan.to_dict(),
            "random_baseline": RANDOM_BASELINE_NOTE,
            "levels": [lv.to_dict() for lv in self.levels],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([
            "target_fraction", "achieved_fraction", "retained", "partial", "osveta_deleted",
            "random_mean", "random_std", "osveta_consecutive_top100", "osveta_consecutive_topL",
        ])
        for lv in self.levels:
            w.writerow([
                lv.target_fraction, repr(lv.achieved_fraction), lv.retained, int(lv.partial),
                lv.osveta_deleted, repr(lv.random_mean), repr(lv.random_std),
                lv.osveta_consecutive_top100, lv.osveta_consecutive_topL,
            ])
        return buf.getvalue()


def _random_selections(pool: np.ndarray, L: int, seeds) -> list[np.ndarray]:
    k = min(L, len(pool))
    return [np.random.default_rng(s).choice(pool, size=k, replace=False) for s in seeds]


def run_stability_experiment(
    mesh: Mesh,
    plan: ExperimentPlan = ExperimentPlan(),
    extraction: ExtractionResult | None = None,
    levels: DecimationLevels | None = None,
    mesh_name: str = "",
) -> SurvivalReport:
    """Deleted-of-L counts for the extraction order and for random picks.

    The extraction is deterministic and computed once; seeds only drive the
    random baseline.
    """
    if extraction is None:
        extraction = extract(
            mesh, plan.L, plan.config, plan.area, plan.feature_angle, workers=plan.workers
        )
    if levels is None:
        levels = decimation_levels(mesh, plan.schedule, plan.feature_angle)
    n = mesh.n_vertices
    p = extraction.p
    L = len(p)
    pool = np.arange(n) if plan.unrestricted_random else np.sort(extraction.i)
    randoms = _random_selections(pool, L, plan.seeds)
    out = []
    for f in plan.schedule:
        mask = levels.deleted_mask(f)
        achieved = levels.achieved(f)
        retained = n - int(mask.sum())
        target_keep = int(math.floor(f * n + 1e-9))
        out.append(
            LevelResult(
                target_fraction=f,
                achieved_fraction=achieved,
                retained=retained,
                partial=retained > target_keep,
                osveta_deleted=int(mask[p].sum()),
                random_deleted=[int(mask[r].sum()) for r in randoms],
                osveta_consecutive_top100=consecutive_deleted(extraction.i[:100], mask),
                osveta_consecutive_topL=consecutive_deleted(p, mask),
                random_consecutive_top100=[consecutive_deleted(r[:100], mask) for r in randoms],
                random_consecutive_topL=[consecutive_deleted(r, mask) for r in randoms],
                survived=[int(v) for v in p if not mask[v]],
            )
        )
    return SurvivalReport(
        plan=plan,
        n_vertices=n,
        n_eliminated=len(extraction.eliminated),
        L=L,
        levels=out,
        extraction=extraction,
        decimation=levels,
        mesh_name=mesh_name,
    )


def ranked_curvature_csv(extraction: ExtractionResult, deleted_mask, top: int = 50) -> str:
    """``rank,vertex,kG,deleted`` for the first ``top`` extracted vertices."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "vertex", "kG", "deleted"])
    kG = extraction.table["kG"]
    for r, v in enumerate(extraction.i[:top].tolist(), start=1):
        w.writerow([r, v, repr(float(kG[v])), int(bool(deleted_mask[v]))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# single-criterion efficiency
# ---------------------------------------------------------------------------

# (label, column, test); selections run from the most extreme qualifying value
EFFICIENCY_CRITERIA = (
    ("kG>0", "kG", "pos"),
    ("kG<0", "kG", "neg"),
    ("kH>0", "kH", "pos"),
    ("kH<0", "kH", "neg"),
    ("kmax>0", "k1", "pos"),
    ("kmin<0", "k2", "neg"),
    ("theta>360", "theta_deg", "above360"),
    ("theta<360", "theta_deg", "below360"),
    ("kGI>0", "kGI", "pos"),
    ("kGI<0", "kGI", "neg"),
    ("kHI>0", "kHI", "pos"),
    ("kHI<0", "kHI", "neg"),
    ("C_el>0", "c_el", "pos"),
    ("C_el<=0", "c_el", "nonpos"),
    ("C_VIS>0", "c_vis", "pos"),
    ("C_TUP>0", "c_tup", "pos"),
    ("C_DUG>0", "c_dug", "pos"),
    ("grad_kH>mean", "grad_kH", "above_mean"),
    ("grad_kH<mean", "grad_kH", "below_mean"),
    ("grad_kG>mean", "grad_kG", "above_mean"),
    ("grad_kG<mean", "grad_kG", "below_mean"),
    ("psi_max>=0", "psi_max", "nonneg"),
    ("psi_min>=0", "psi_min", "nonneg"),
)


def _band(x):
    fin = np.isfinite(x)
    return 1e-6 * float(np.abs(x[fin]).max()) if fin.any() else 0.0


def criterion_selection(values, test: str, exclude=()) -> np.ndarray:
    """All qualifying vertex ids, most extreme first (ties by index).

    ``>``-type tests order by decreasing value, ``<``-type tests by
    increasing value.
    """
    x = np.asarray(values, dtype=np.float64)
    ok = np.isfinite(x)
    if len(exclude):
        ok[np.asarray(list(exclude), dtype=np.int64)] = False
    band = _band(x)
    with np.errstate(invalid="ignore"):
        if test == "pos":
            q, key = ok & (x > band), -x
        elif test == "neg":
            q, key = ok & (x < -band), x
        elif test == "nonpos":
            q, key = ok & (x <= 0), x
        elif test == "nonneg":
            q, key = ok & (x >= -1e-6), -x
        elif test == "above360":
            q, key = ok & (x > 360.0 + 1e-6), -x
        elif test == "below360":
            q, key = ok & (x < 360.0 - 1e-6), x
        elif test in ("above_mean", "below_mean"):
            mean = float(x[ok].mean()) if ok.any() else 0.0
            q, key = (ok & (x > mean), -x) if test == "above_mean" else (ok & (x < mean), x)
        else:
            raise ValueError(f"unknown test {test!r}")
    ids = np.flatnonzero(q)
    return ids[np.lexsort((ids, key[ids]))]


def criteria_efficiency(
    table: FeatureTable, deleted_mask, sizes=EFFICIENCY_SIZES, criteria=EFFICIENCY_CRITERIA
) -> dict[str, list[int] | None]:
    """Survivor count among the top-``n`` of each criterion, per size.

    Topological-error vertices are never selected. A criterion no vertex
    satisfies maps to ``None``.
    """
    deleted_mask = np.asarray(deleted_mask, dtype=bool)
    out: dict[str, list[int] | None] = {}
    for label, column, test in criteria:
        sel = criterion_selection(table[column], test, sorted(table.topology.errors))
        if not len(sel):
            out[label] = None
            continue
        alive = ~deleted_mask[sel]
        cum = np.concatenate([[0], np.cumsum(alive)])
        out[label] = [int(cum[min(n, len(sel))]) for n in sizes]
    return out


def selection_overlap(selections: dict) -> tuple[dict[int, int], dict[int, int]]:
    """How many criteria picked each vertex, and how many vertices were
    picked by exactly ``k`` criteria."""
    if len(selections) < 2:
        raise ValueError("need at least two selections")
    counts = Counter()
    for ids in selections.values():
        counts.update(set(int(v) for v in ids))
    per_vertex = dict(sorted(counts.items()))
    hist = dict(sorted(Counter(per_vertex.values()).items()))
    return per_vertex, hist


def area_comparison(
    mesh: Mesh,
    deleted_mask,
    sizes=EFFICIENCY_SIZES,
) -> dict[str, dict[str, list[int]]]:
    """Efficiency of the two Gaussian-curvature sign criteria computed with
    barycentric and with mixed Voronoi areas, against one decimation.

    Boundary and topological-error vertices are never selected. A criterion
    no vertex satisfies survives nowhere and counts zero.
    """
    adj = build_adjacency(mesh)
    topo = topology_sets(mesh, adj)
    # border stars give a partial angle deficit, not a curvature estimate
    skip = sorted(topo.errors | topo.boundary)
    deleted_mask = np.asarray(deleted_mask, dtype=bool)
    out = {}
    for mode in (AreaMode.BARYCENTRIC, AreaMode.VORONOI):
        cols, _ = mesh_curvature(mesh, adj, mode)
        rows = {}
        for label, test in (("kG>0", "pos"), ("kG<0", "neg")):
            sel = criterion_selection(cols["kG"], test, skip)
            cum = np.concatenate([[0], np.cumsum(~deleted_mask[sel])])
            rows[label] = [int(cum[min(n, len(sel))]) for n in sizes]
        out[mode.value] = rows
    return out


def dumps_report(obj) -> str:
    """Canonical JSON (sorted keys, fixed separators) for byte-stable output."""
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"
