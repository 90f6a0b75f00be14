"""Stable vertex extraction for triangle meshes.

Curvature estimation (discrete operators and quadric fitting), vertex
classification, Schroeder-style decimation and an ordered-statistics
ranking of vertices by how likely they are to survive simplification.
"""

from .curvature import AreaMode, mesh_curvature
from .decimate import DecimationParams, DecimationReport, decimate, decimate_to_fraction
from .extract import CriteriaConfig, ExtractionResult, FeatureTable, Preset, compute_feature_table, extract
from .harness import ExperimentPlan, SurvivalReport, run_stability_experiment
from .mesh import Adjacency, Mesh, build_adjacency, load_mesh, save_mesh
from .quadric import FitKind, mesh_quadric_curvature

__version__ = "0.1.0"

__all__ = [
    "AreaMode",
    "Adjacency",
    "CriteriaConfig",
    "DecimationParams",
    "DecimationReport",
    "ExperimentPlan",
    "ExtractionResult",
    "FeatureTable",
    "FitKind",
    "Mesh",
    "Preset",
    "SurvivalReport",
    "build_adjacency",
    "compute_feature_table",
    "decimate",
    "decimate_to_fraction",
    "extract",
    "load_mesh",
    "mesh_curvature",
    "mesh_quadric_curvature",
    "run_stability_experiment",
    "save_mesh",
]
