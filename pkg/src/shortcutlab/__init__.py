"""Low-congestion shortcut toolkit: graph parameters, moving cuts, gadgets and a CONGEST simulator."""

from .errors import (
    BandwidthExceeded,
    ClipUndefined,
    ConstructionShortfall,
    GraphError,
    HypothesisViolated,
    Infeasible,
    NonTermination,
    ShortcutLabError,
    ValidationError,
)
from .graph import Graph, biconnected, clip_walk, diameter, ell_distance, heavy_light, project_walk

__version__ = "0.1.0"

__all__ = [
    "BandwidthExceeded",
    "ClipUndefined",
    "ConstructionShortfall",
    "Graph",
    "GraphError",
    "HypothesisViolated",
    "Infeasible",
    "NonTermination",
    "ShortcutLabError",
    "ValidationError",
    "biconnected",
    "clip_walk",
    "diameter",
    "ell_distance",
    "heavy_light",
    "project_walk",
]
