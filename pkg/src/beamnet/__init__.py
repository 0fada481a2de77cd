"""Polyharmonic operators on metric graphs with static and dynamic vertex conditions."""
from .conditions import PRESETS, VertexConditions, make_conditions, preset, validate
from .discretization import DiscreteOperator, Mesh, assemble, project
from .graph import Edge, MetricGraph, build_graph, interval, star

__all__ = ["PRESETS", "VertexConditions", "make_conditions", "preset", "validate",
           "DiscreteOperator", "Mesh", "assemble", "project",
           "Edge", "MetricGraph", "build_graph", "interval", "star"]

__version__ = "0.1.0"
