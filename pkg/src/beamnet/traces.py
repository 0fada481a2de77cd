"""Boundary trace vectors and the Green identity they satisfy.

For a function ``u`` smooth on every edge, the signed normal derivative of
order ``h`` at an edge is ``(u^(h)(0), u^(h)(l))`` for even ``h`` and
``(-u^(h)(0), u^(h)(l))`` for odd ``h``.  The lower trace stacks the orders
``0..j-1``; the upper trace stacks ``(-1)^(j+k)`` times order ``2j-k-1`` in
block ``k``.  With these,

    int (-1)^j u^(2j) v - int u^(j) v^(j) = upper(u) . lower(v).
"""
from __future__ import annotations

import numpy as np
from numpy.polynomial import Polynomial

from .graph import MetricGraph, Side, all_slots, boundary_index


class EdgewisePolynomial:
    """One polynomial per edge, in the local coordinate ``x in [0, l_e]``."""

    max_order = None  # polynomials have every derivative

    def __init__(self, graph: MetricGraph, coefficients):
        if len(coefficients) != graph.num_edges:
            raise ValueError("need one coefficient list per edge")
        self.graph = graph
        self.polys = [Polynomial(np.asarray(c, dtype=float)) for c in coefficients]

    @classmethod
    def monomial(cls, graph: MetricGraph, degree: int, scale: float = 1.0):
        c = np.zeros(degree + 1)
        c[degree] = scale
        return cls(graph, [c] * graph.num_edges)

    def __add__(self, other):
        return EdgewisePolynomial(self.graph, [(a + b).coef for a, b in zip(self.polys, other.polys)])

    def __rmul__(self, scalar):
        return EdgewisePolynomial(self.graph, [(scalar * a).coef for a in self.polys])

    def derivative(self, edge: int, order: int, x):
        return self.polys[edge].deriv(order)(x)

    def endpoint_derivative(self, edge: int, side: Side, order: int) -> float:
        x = 0.0 if side == Side.START else self.graph.edges[edge].length
        return float(self.derivative(edge, order, x))

    def integral_of_product(self, other, order_self: int, order_other: int) -> float:
        """Exact ``sum_e int_0^l u^(a) v^(b) dx`` via polynomial antiderivatives."""
        total = 0.0
        for e, (a, b) in enumerate(zip(self.polys, other.polys)):
            prod = a.deriv(order_self) * b.deriv(order_other)
            anti = prod.integ()
            total += anti(self.graph.edges[e].length) - anti(0.0)
        return float(total)


def _check_order(u, h: int):
    if getattr(u, "max_order", None) is not None and h > u.max_order:
        raise ValueError(f"derivative of order {h} exceeds representation smoothness {u.max_order}")


def normal_derivative(u, edge: int, h: int):
    """Signed pair ``(at 0, at l)``; the start value flips sign for odd ``h``."""
    _check_order(u, h)
    start = u.endpoint_derivative(edge, Side.START, h)
    end = u.endpoint_derivative(edge, Side.END, h)
    return (-start if h % 2 else start), end


def _trace(u, j: int, order_of_block, sign_of_block):
    E = u.graph.num_edges
    out = np.zeros(2 * j * E)
    for slot in all_slots(j, E):
        pair = normal_derivative(u, slot.edge, order_of_block(slot.k))
        out[boundary_index(slot, j, E)] = sign_of_block(slot.k) * pair[slot.side]
    return out


def gamma_lower(u, j: int) -> np.ndarray:
    """Lower trace: block ``k`` holds the normal derivative of order ``k``."""
    return _trace(u, j, lambda k: k, lambda k: 1.0)


def gamma_upper(u, j: int) -> np.ndarray:
    """Upper trace: block ``k`` holds ``(-1)^(j+k)`` times order ``2j-k-1``."""
    return _trace(u, j, lambda k: 2 * j - k - 1, lambda k: (-1.0) ** (j + k))


def greens_identity_terms(u: EdgewisePolynomial, v: EdgewisePolynomial, j: int):
    """The three terms ``(int (-1)^j u^(2j) v, int u^(j) v^(j), upper(u).lower(v))``."""
    bulk = (-1.0) ** j * u.integral_of_product(v, 2 * j, 0)
    energy = u.integral_of_product(v, j, j)
    boundary = float(gamma_upper(u, j) @ gamma_lower(v, j))
    return bulk, energy, boundary


def greens_identity_residual(u: EdgewisePolynomial, v: EdgewisePolynomial, j: int) -> float:
    bulk, energy, boundary = greens_identity_terms(u, v, j)
    return bulk - energy - boundary
