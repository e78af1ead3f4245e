"""Collective structure-knowledge augmentation for message-passing graph networks."""

from cosgraph.graph import Graph, GraphError, build_graph, degree, one_hot_labels
from cosgraph.features import augment, FeatureTimeoutError
from cosgraph.wl import wl_refine, wl_distinguishes, features_distinguish, builtin_pairs

__all__ = [
    "Graph",
    "GraphError",
    "build_graph",
    "degree",
    "one_hot_labels",
    "augment",
    "FeatureTimeoutError",
    "wl_refine",
    "wl_distinguishes",
    "features_distinguish",
    "builtin_pairs",
]

__version__ = "0.1.0"
