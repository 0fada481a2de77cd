"""Edgewise initial data.

Every field offers ``derivative(edge, order, x)`` (vectorised in ``x``) and
``endpoint_derivative(edge, side, order)``, which is all that projection and
the trace maps need.
"""
from __future__ import annotations

import math

import numpy as np
from numpy.polynomial import Polynomial

from .graph import MetricGraph, Side


class _Field:
    max_order = None

    def __init__(self, graph: MetricGraph):
        self.graph = graph

    def endpoint_derivative(self, edge: int, side: Side, order: int) -> float:
        x = 0.0 if side == Side.START else self.graph.edges[edge].length
        return float(np.asarray(self.derivative(edge, order, np.array([x])))[0])


class ConstantField(_Field):
    def __init__(self, graph: MetricGraph, value: float = 1.0):
        super().__init__(graph)
        self.value = float(value)

    def derivative(self, edge, order, x):
        x = np.asarray(x, dtype=float)
        return np.full_like(x, self.value if order == 0 else 0.0)


class SineField(_Field):
    """``amplitude * sin(k pi x / l_e)`` on every edge (or only on ``edges``)."""

    def __init__(self, graph: MetricGraph, k: int = 1, amplitude: float = 1.0, edges=None):
        super().__init__(graph)
        self.k = k
        self.amplitude = float(amplitude)
        self.edges = None if edges is None else set(edges)

    def derivative(self, edge, order, x):
        x = np.asarray(x, dtype=float)
        if self.edges is not None and edge not in self.edges:
            return np.zeros_like(x)
        w = self.k * math.pi / self.graph.edges[edge].length
        # d^m sin(wx) = w^m sin(wx + m pi / 2)
        return self.amplitude * w ** order * np.sin(w * x + order * math.pi / 2)


class BumpField(_Field):
    """``height * (1 - r^2)^power`` with ``r = (x - center) / width`` on one edge.

    The bump is ``C^(power-1)`` and vanishes outside ``|r| < 1``.
    """

    def __init__(self, graph: MetricGraph, center: float, width: float, edge: int = 0,
                 power: int = 4, height: float = 1.0):
        super().__init__(graph)
        if width <= 0:
            raise ValueError("bump width must be positive")
        if not 0 <= edge < graph.num_edges:
            raise ValueError(f"edge {edge} out of range")
        self.center, self.width, self.edge = float(center), float(width), edge
        self.power, self.height = int(power), float(height)
        self._poly = height * Polynomial([1.0, 0.0, -1.0]) ** self.power

    def derivative(self, edge, order, x):
        x = np.asarray(x, dtype=float)
        if edge != self.edge:
            return np.zeros_like(x)
        r = (x - self.center) / self.width
        vals = self._poly.deriv(order)(r) / self.width ** order if order else self._poly(r)
        return np.where(np.abs(r) < 1.0, vals, 0.0)


def field_from_descriptor(graph: MetricGraph, desc: dict):
    """Build a field from a JSON-style descriptor.

    ``{"shape": "sine", "k": 1}``, ``{"shape": "bump", "center": .5,
    "width": .1, "edge": 0}``, ``{"shape": "constant", "value": 1}`` or
    ``{"shape": "polynomial", "coefficients": [[...], ...]}`` (one list per
    edge, ascending powers).  ``{"shape": "eigenmode", "k": 0}`` and
    ``{"shape": "zero"}`` are resolved by the caller in coefficient space.
    """
    from .traces import EdgewisePolynomial

    desc = dict(desc)
    shape = desc.pop("shape", None)
    if shape == "sine":
        return SineField(graph, **desc)
    if shape == "bump":
        return BumpField(graph, **desc)
    if shape == "constant":
        return ConstantField(graph, **desc)
    if shape == "polynomial":
        return EdgewisePolynomial(graph, desc["coefficients"])
    raise ValueError(f"unknown initial-data shape {shape!r}")
