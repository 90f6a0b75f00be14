"""Command line entry point: ``osveta <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .classify import DEFAULT_FEATURE_ANGLE
from .curvature import AreaMode, mesh_curvature
from .decimate import DecimationParams, decimate
from .extract import CriteriaConfig, Preset, compute_feature_table, extract
from .fixtures import FIXTURES, make_fixture
from .harness import (
    DEFAULT_SCHEDULE,
    EFFICIENCY_SIZES,
    SCHEMA_VERSION,
    ExperimentPlan,
    area_comparison,
    decimation_levels,
    dumps_report,
    ranked_curvature_csv,
    run_stability_experiment,
)
from .mesh import Mesh, MeshParseError, MeshValidationError, build_adjacency, load_mesh, save_mesh
from .quadric import FitKind, mesh_quadric_curvature

log = logging.getLogger("osveta")


def _fractions(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _add_input(p: argparse.ArgumentParser):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--input", "-i", type=Path, help="OBJ or OFF mesh file")
    g.add_argument("--fixture", choices=sorted(FIXTURES), help="use a generated test mesh")


def _load(args) -> tuple[Mesh, str]:
    if args.fixture:
        return make_fixture(args.fixture), args.fixture
    return load_mesh(args.input), str(args.input)


def _write(path: Path | None, text: str):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _fmt(x: float) -> str:
    return repr(float(x)) if np.isfinite(x) else ""


def cmd_curvature(args) -> int:
    mesh, _ = _load(args)
    adj = build_adjacency(mesh)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if args.method == "dgeom":
        cols, flags = mesh_curvature(mesh, adj, args.area)
        names = list(cols)
        w.writerow(["id", *names, "flags"])
        for v in range(mesh.n_vertices):
            w.writerow([v, *(_fmt(cols[c][v]) for c in names), ";".join(sorted(flags[v]))])
    else:
        kGI, kHI, k1, k2 = mesh_quadric_curvature(mesh, adj, FitKind(args.fit))
        w.writerow(["id", "kGI", "kHI", "k1", "k2"])
        for v in range(mesh.n_vertices):
            w.writerow([v, _fmt(kGI[v]), _fmt(kHI[v]), _fmt(k1[v]), _fmt(k2[v])])
    _write(args.out, buf.getvalue())
    return 0


def cmd_decimate(args) -> int:
    mesh, _ = _load(args)
    params = DecimationParams(
        distance_threshold=args.distance,
        edge_distance_threshold=args.edge_distance,
        feature_angle=args.feature_angle,
        target_fraction=args.target,
        max_passes=args.max_passes,
    )
    out, rep = decimate(mesh, params)
    if args.output:
        save_mesh(out, args.output)
    report = {"schema": SCHEMA_VERSION, **rep.to_dict()}
    if args.report:
        _write(args.report, dumps_report(report))
    log.info("kept %d of %d vertices in %d passes", len(rep.survivors), rep.n_original, rep.passes)
    return 0


def _config(args) -> CriteriaConfig:
    return CriteriaConfig(preset=Preset(args.preset), boundary_elimination=args.eliminate_boundary)


def cmd_extract(args) -> int:
    mesh, _ = _load(args)
    table = compute_feature_table(mesh, args.area, args.feature_angle, workers=args.workers)
    res = extract(mesh, args.top, _config(args), args.area, args.feature_angle, table=table)
    _write(args.out, dumps_report({"schema": SCHEMA_VERSION, **res.to_dict()}))
    if args.features:
        args.features.write_text(table.to_csv())
    return 0


def cmd_evaluate(args) -> int:
    mesh, name = _load(args)
    plan = ExperimentPlan(
        L=args.top,
        schedule=args.schedule,
        seeds=tuple(range(args.seeds)),
        config=_config(args),
        area=args.area,
        feature_angle=args.feature_angle,
        unrestricted_random=args.unrestricted_random,
        workers=args.workers,
    )
    rep = run_stability_experiment(mesh, plan, mesh_name=name)
    _write(args.out, dumps_report(rep.to_dict()))
    if args.csv:
        args.csv.write_text(rep.to_csv())
    if args.ranked_csv:
        mask = rep.decimation.deleted_mask(plan.schedule[-1])
        args.ranked_csv.write_text(ranked_curvature_csv(rep.extraction, mask))
    return 0


def cmd_compare_areas(args) -> int:
    mesh, name = _load(args)
    levels = decimation_levels(mesh, [args.level], args.feature_angle)
    mask = levels.deleted_mask(args.level)
    table = area_comparison(mesh, mask, EFFICIENCY_SIZES)
    report = {
        "schema": SCHEMA_VERSION,
        "mesh": name,
        "retained_target": args.level,
        "retained_fraction": levels.achieved(args.level),
        "sizes": list(EFFICIENCY_SIZES),
        "rows": table,
    }
    _write(args.out, dumps_report(report))
    return 0


def cmd_fixture(args) -> int:
    save_mesh(make_fixture(args.name), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="osveta", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, top_default=None):
        _add_input(p)
        p.add_argument("--area", type=AreaMode.parse, default=AreaMode.BARYCENTRIC,
                       help="per-vertex area: barycentric (default) or voronoi")
        p.add_argument("--feature-angle", type=float, default=DEFAULT_FEATURE_ANGLE)
        if top_default is not None:
            p.add_argument("--top", "-L", type=int, default=top_default)
            p.add_argument("--preset", choices=[x.value for x in Preset], default="safe")
            p.add_argument("--eliminate-boundary", action="store_true")
            p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("curvature", help="per-vertex curvature CSV")
    common(p)
    p.add_argument("--method", choices=["dgeom", "quadric"], default="dgeom")
    p.add_argument("--fit", choices=[k.value for k in FitKind], default=FitKind.EXTENDED.value)
    p.add_argument("--out", "-o", type=Path)
    p.set_defaults(func=cmd_curvature)

    p = sub.add_parser("decimate", help="vertex decimation")
    _add_input(p)
    p.add_argument("--distance", type=float, default=0.0, help="plane distance threshold (bbox fraction)")
    p.add_argument("--edge-distance", type=float, default=0.0, help="edge distance threshold (bbox fraction)")
    p.add_argument("--feature-angle", type=float, default=DEFAULT_FEATURE_ANGLE)
    p.add_argument("--target", type=float, default=None, help="stop at this retained fraction")
    p.add_argument("--max-passes", type=int, default=100)
    p.add_argument("--report", type=Path)
    p.add_argument("--output", "-o", type=Path)
    p.set_defaults(func=cmd_decimate)

    p = sub.add_parser("extract", help="ordered stable vertex extraction")
    common(p, top_default=1000)
    p.add_argument("--out", "-o", type=Path)
    p.add_argument("--features", type=Path, help="also write the feature table CSV")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("evaluate", help="survival against random selections")
    common(p, top_default=1000)
    p.add_argument("--schedule", type=_fractions, default=DEFAULT_SCHEDULE)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--unrestricted-random", action="store_true",
                   help="draw random selections from all vertices, not only survivors of elimination")
    p.add_argument("--out", "-o", type=Path)
    p.add_argument("--csv", type=Path)
    p.add_argument("--ranked-csv", type=Path, help="rank, kG, deleted for the top 50 at the last level")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare-areas", help="kG criteria under both area definitions")
    _add_input(p)
    p.add_argument("--level", type=float, default=DEFAULT_SCHEDULE[-1], help="retained fraction")
    p.add_argument("--feature-angle", type=float, default=DEFAULT_FEATURE_ANGLE)
    p.add_argument("--out", "-o", type=Path)
    p.set_defaults(func=cmd_compare_areas)

    p = sub.add_parser("fixture", help="write a generated test mesh")
    p.add_argument("name", choices=sorted(FIXTURES))
    p.add_argument("--output", "-o", type=Path, required=True)
    p.set_defaults(func=cmd_fixture)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (MeshParseError, MeshValidationError, ValueError, OSError) as e:
        print(f"osveta: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
