"""Finite metric graphs and the layout of the boundary space.

A graph with ``E`` edges and differential order ``2j`` has a boundary space
of dimension ``2jE``.  Slots are laid out derivative-block major, then side,
then edge::

    index(e, side, k) = k * 2E + side * E + e

so for ``j = 2`` the blocks are ``(u_e(0))_e, (u_e(l))_e, (-u_e'(0))_e,
(u_e'(l))_e``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, NamedTuple


class Side(IntEnum):
    START = 0
    END = 1


class BoundarySlot(NamedTuple):
    edge: int
    side: Side
    k: int


@dataclass(frozen=True)
class Edge:
    id: str
    tail: str
    head: str
    length: float
    p: float = 1.0


@dataclass(frozen=True)
class MetricGraph:
    vertices: tuple
    edges: tuple

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def total_length(self) -> float:
        return float(sum(e.length for e in self.edges))

    def edge_index(self, edge_id) -> int:
        for i, e in enumerate(self.edges):
            if e.id == edge_id:
                return i
        raise KeyError(f"unknown edge {edge_id!r}")

    def degree(self, vertex) -> int:
        return len(incident_slots(self, vertex, 0))

    def endpoint(self, edge: int, side: Side):
        e = self.edges[edge]
        return e.tail if side == Side.START else e.head


def _as_edge(desc, position: int) -> Edge:
    if isinstance(desc, Edge):
        return desc
    if isinstance(desc, dict):
        d = dict(desc)
        return Edge(id=str(d.get("id", f"e{position}")), tail=str(d["tail"]),
                    head=str(d["head"]), length=float(d["length"]),
                    p=float(d.get("p", 1.0)))
    tail, head, length, *rest = desc
    p = float(rest[0]) if rest else 1.0
    return Edge(id=f"e{position}", tail=str(tail), head=str(head), length=float(length), p=p)


def build_graph(edges: Iterable) -> MetricGraph:
    """Build a connected :class:`MetricGraph`.

    ``edges`` holds :class:`Edge` objects, dicts with keys
    ``id, tail, head, length[, p]`` or tuples ``(tail, head, length[, p])``.
    Edge order is kept; vertices are ordered by first appearance.
    """
    edge_list = [_as_edge(d, i) for i, d in enumerate(edges)]
    if not edge_list:
        raise ValueError("a graph needs at least one edge")
    ids = [e.id for e in edge_list]
    if len(set(ids)) != len(ids):
        raise ValueError("edge ids must be unique")
    for e in edge_list:
        if not (math.isfinite(e.length) and e.length > 0):
            raise ValueError(f"edge {e.id!r}: length must be positive and finite, got {e.length}")
        if not (math.isfinite(e.p) and e.p > 0):
            raise ValueError(f"edge {e.id!r}: p must be positive and finite, got {e.p}")

    vertices = []
    for e in edge_list:
        for v in (e.tail, e.head):
            if v not in vertices:
                vertices.append(v)

    adjacency = {v: set() for v in vertices}
    for e in edge_list:
        adjacency[e.tail].add(e.head)
        adjacency[e.head].add(e.tail)
    seen = {vertices[0]}
    stack = [vertices[0]]
    while stack:
        for w in adjacency[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    if len(seen) != len(vertices):
        raise ValueError("graph is not connected")
    return MetricGraph(vertices=tuple(vertices), edges=tuple(edge_list))


def interval(length: float = 1.0, p: float = 1.0) -> MetricGraph:
    return build_graph([Edge("e0", "v0", "v1", length, p)])


def star(arms: int = 3, length: float = 1.0) -> MetricGraph:
    """Star with center ``c``; edges point from the center to the leaves."""
    leaves = "abdefghijk"
    return build_graph([Edge(f"e{i}", "c", leaves[i], length) for i in range(arms)])


def boundary_dim(j: int, num_edges: int) -> int:
    return 2 * j * num_edges


def boundary_index(slot: BoundarySlot, j: int, num_edges: int) -> int:
    edge, side, k = slot
    if not 0 <= k < j:
        raise ValueError(f"derivative block {k} out of range for j={j}")
    if not 0 <= edge < num_edges:
        raise ValueError(f"edge {edge} out of range for E={num_edges}")
    return k * 2 * num_edges + int(side) * num_edges + edge


def all_slots(j: int, num_edges: int):
    """Every slot, in index order."""
    return [BoundarySlot(e, Side(s), k)
            for k in range(j) for s in (0, 1) for e in range(num_edges)]


def incident_slots(graph: MetricGraph, vertex, k: int) -> list:
    """Slots of block ``k`` at the endpoints touching ``vertex``.

    Edges are visited in order; a loop contributes its start and its end.
    """
    if vertex not in graph.vertices:
        raise KeyError(f"unknown vertex {vertex!r}")
    out = []
    for i, e in enumerate(graph.edges):
        if e.tail == vertex:
            out.append(BoundarySlot(i, Side.START, k))
        if e.head == vertex:
            out.append(BoundarySlot(i, Side.END, k))
    return out
