"""Conforming Hermite finite elements for the form on ``V``.

Each edge is meshed independently with ``C^(j-1)`` Hermite elements of
degree ``2j-1``.  Degrees of freedom are physical derivatives
``u, u', ..., u^(j-1)`` at the mesh nodes; interior nodes share them between
neighbouring elements, edge endpoints are never shared across edges.  Vertex
coupling comes only from the constraint ``lower trace in Y`` (imposed by a
nullspace basis ``Z``) and the ``S``, ``D`` and ``Pi`` terms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.legendre import leggauss

from .conditions import VertexConditions, complement, validate
from .graph import MetricGraph, Side, all_slots, boundary_dim, boundary_index
from .numerics import EigenBasis, gen_eig

RANK_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Mesh:
    breakpoints: tuple  # one increasing array per edge, from 0 to l_e

    @classmethod
    def uniform(cls, graph: MetricGraph, elements_per_edge):
        if isinstance(elements_per_edge, int):
            elements_per_edge = [elements_per_edge] * graph.num_edges
        if len(elements_per_edge) != graph.num_edges:
            raise ValueError("need one element count per edge")
        pts = []
        for e, n in zip(graph.edges, elements_per_edge):
            if int(n) < 1:
                raise ValueError("every edge needs at least one element")
            pts.append(np.linspace(0.0, e.length, int(n) + 1))
        return cls(tuple(pts))

    def elements(self, edge: int) -> int:
        return len(self.breakpoints[edge]) - 1

    def locate(self, edge: int, x):
        """Element index and reference coordinate of local positions ``x``."""
        b = self.breakpoints[edge]
        x = np.atleast_1d(np.asarray(x, dtype=float))
        k = np.clip(np.searchsorted(b, x, side="right") - 1, 0, len(b) - 2)
        h = b[k + 1] - b[k]
        return k, (x - b[k]) / h, h


@lru_cache(maxsize=None)
def hermite_shape_functions(j: int):
    """The ``2j`` Hermite polynomials of degree ``2j-1`` on ``[0, 1]``.

    Ordered node-major: ``N_{0,0..j-1}`` then ``N_{1,0..j-1}``, where
    ``N_{s,h}^(m)(s') = delta(s, s') delta(h, m)`` for ``m < j``.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    size = 2 * j
    # row (s', m): m-th derivative at node s' of each monomial x^d
    V = np.zeros((size, size))
    for s in (0, 1):
        for m in range(j):
            for d in range(m, size):
                V[s * j + m, d] = math.factorial(d) // math.factorial(d - m) * float(s) ** (d - m)
    coef = np.linalg.solve(V, np.eye(size))
    return tuple(Polynomial(coef[:, i]) for i in range(size))


def _quadrature(j: int):
    return leggauss(math.ceil((4 * j - 1) / 2) + 1)


@lru_cache(maxsize=None)
def _reference_matrices(j: int):
    shapes = hermite_shape_functions(j)
    nodes, weights = _quadrature(j)
    xi = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    vals = np.array([N(xi) for N in shapes])
    ders = np.array([N.deriv(j)(xi) for N in shapes])
    return (ders * w) @ ders.T, (vals * w) @ vals.T


def _dof_scaling(j: int, h: float) -> np.ndarray:
    return np.array([h ** m for _ in (0, 1) for m in range(j)])


def element_matrices(j: int, h: float, p: float = 1.0):
    """Stiffness ``int u^(j) v^(j)`` and ``1/p``-weighted mass on one element.

    Degrees of freedom are ``(u(0), .., u^(j-1)(0), u(h), .., u^(j-1)(h))``.
    """
    if h <= 0 or p <= 0:
        raise ValueError("element length and p must be positive")
    k_ref, m_ref = _reference_matrices(j)
    T = _dof_scaling(j, h)
    stiff = h ** (1 - 2 * j) * (T[:, None] * k_ref * T[None, :])
    mass = h / p * (T[:, None] * m_ref * T[None, :])
    return stiff, mass


def constraint_nullspace(C: np.ndarray, n: int | None = None) -> np.ndarray:
    """Orthonormal basis of ``ker C``; the rank cut is ``1e-12 * ||C||``."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = C.shape[1] if n is None else n
    if C.size == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(C, full_matrices=True)
    rank = int(np.sum(s > RANK_TOL * max(s.max(initial=0.0), 1e-300))) if s.size else 0
    return vt[rank:].T.copy()


class DofMap:
    """Global numbering: edge blocks in edge order, node-major inside."""

    def __init__(self, j: int, mesh: Mesh):
        self.j = j
        self.offsets = []
        total = 0
        for e in range(len(mesh.breakpoints)):
            self.offsets.append(total)
            total += j * (mesh.elements(e) + 1)
        self.size = total

    def node(self, edge: int, node: int, order: int) -> int:
        return self.offsets[edge] + node * self.j + order

    def element(self, edge: int, k: int) -> np.ndarray:
        start = self.offsets[edge] + k * self.j
        return np.arange(start, start + 2 * self.j)


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Galerkin image of the form on the product space.

    ``A_red`` and ``M_red`` act on reduced coordinates ``c``; ``Z @ c`` gives
    the edgewise Hermite coefficients and ``Gd @ c`` the dynamic component
    ``theta`` in the coordinates of ``conditions.basis_Yd``.
    """

    graph: MetricGraph
    conditions: VertexConditions
    mesh: Mesh
    dofs: DofMap
    K: np.ndarray
    M: np.ndarray
    G: np.ndarray
    Z: np.ndarray
    A_red: np.ndarray
    M_red: np.ndarray
    Gd: np.ndarray

    @property
    def j(self) -> int:
        return self.conditions.j

    @property
    def size(self) -> int:
        return self.Z.shape[1]

    def full(self, c: np.ndarray) -> np.ndarray:
        return self.Z @ c

    def theta(self, c: np.ndarray) -> np.ndarray:
        return self.Gd @ c

    def eigenbasis(self) -> EigenBasis:
        return _eigenbasis(self)

    def function(self, c: np.ndarray) -> "HermiteFunction":
        return HermiteFunction(self, self.full(c))


_EIG_CACHE: dict = {}


def _eigenbasis(op: DiscreteOperator) -> EigenBasis:
    key = id(op)
    hit = _EIG_CACHE.get(key)
    if hit is None or hit[0] is not op:
        hit = (op, gen_eig(op.A_red, op.M_red))
        _EIG_CACHE[key] = hit
    return hit[1]


def boundary_matrix(graph: MetricGraph, j: int, mesh: Mesh, dofs: DofMap) -> np.ndarray:
    """``G``: full coefficients to the lower trace in ``R^(2jE)``."""
    E = graph.num_edges
    G = np.zeros((boundary_dim(j, E), dofs.size))
    for slot in all_slots(j, E):
        node = 0 if slot.side == Side.START else mesh.elements(slot.edge)
        sign = -1.0 if (slot.k % 2 and slot.side == Side.START) else 1.0
        G[boundary_index(slot, j, E), dofs.node(slot.edge, node, slot.k)] = sign
    return G


def assemble(graph: MetricGraph, vc: VertexConditions, mesh: Mesh) -> DiscreteOperator:
    j = vc.j
    if vc.dim != boundary_dim(j, graph.num_edges):
        raise ValueError(f"conditions live in R^{vc.dim}, graph needs R^{boundary_dim(j, graph.num_edges)}")
    report = validate(vc)
    if not report.structural_ok:
        bad = [k for k in ("orthonormal_Yd", "orthonormal_Ys", "mutually_orthogonal", "Pi_spd")
               if not report.flags[k]]
        raise ValueError(f"invalid vertex conditions: {', '.join(bad)}")

    dofs = DofMap(j, mesh)
    K = np.zeros((dofs.size, dofs.size))
    M = np.zeros_like(K)
    for e, edge in enumerate(graph.edges):
        b = mesh.breakpoints[e]
        for k in range(mesh.elements(e)):
            ke, me = element_matrices(j, b[k + 1] - b[k], edge.p)
            idx = dofs.element(e, k)
            K[np.ix_(idx, idx)] += ke
            M[np.ix_(idx, idx)] += me

    G = boundary_matrix(graph, j, mesh, dofs)
    C = complement(vc.basis_Y).T @ G
    Z = constraint_nullspace(C, dofs.size)
    if Z.shape[1] == 0:
        raise ValueError("no degrees of freedom: the constraints fix every coefficient")

    S_full, D_full, Pi_full = vc.lifted()
    A_full = K - G.T @ S_full @ G - G.T @ D_full @ G
    A_red = Z.T @ A_full @ Z
    M_red = Z.T @ (M + G.T @ Pi_full @ G) @ Z
    Gd = vc.basis_Yd.T @ G @ Z
    return DiscreteOperator(graph=graph, conditions=vc, mesh=mesh, dofs=dofs, K=K, M=M, G=G,
                            Z=Z, A_red=A_red, M_red=M_red, Gd=Gd)


# ----------------------------------------------------- evaluation and projection


def _shape_rows(j: int, xi: np.ndarray, h: np.ndarray, order: int) -> np.ndarray:
    shapes = hermite_shape_functions(j)
    vals = np.array([N.deriv(order)(xi) if order else N(xi) for N in shapes]).T
    scale = np.array([[hh ** m for _ in (0, 1) for m in range(j)] for hh in h])
    return vals * scale * h[:, None] ** (-order)


def evaluation_matrix(op: DiscreteOperator, points, order: int = 0) -> np.ndarray:
    """Rows map full coefficients to ``u^(order)`` at ``points = [(edge, x), ...]``."""
    j = op.j
    out = np.zeros((len(points), op.dofs.size))
    for row, (edge, x) in enumerate(points):
        k, xi, h = op.mesh.locate(edge, x)
        out[row, op.dofs.element(edge, int(k[0]))] = _shape_rows(j, xi, h, order)[0]
    return out


def uniform_points(graph: MetricGraph, per_edge: int = 65):
    """Evenly spaced evaluation points, endpoints included, with trapezoid weights."""
    points, weights = [], []
    for e, edge in enumerate(graph.edges):
        xs = np.linspace(0.0, edge.length, per_edge)
        w = np.full(per_edge, edge.length / (per_edge - 1))
        w[[0, -1]] *= 0.5
        points += [(e, float(x)) for x in xs]
        weights.append(w)
    return points, np.concatenate(weights)


class HermiteFunction:
    """An edgewise function given by full Hermite coefficients."""

    def __init__(self, op: DiscreteOperator, coefficients: np.ndarray):
        self.op = op
        self.graph = op.graph
        self.coefficients = np.asarray(coefficients, dtype=float)
        self.max_order = 2 * op.j - 1

    def derivative(self, edge: int, order: int, x):
        if order > self.max_order:
            raise ValueError(f"derivative of order {order} exceeds representation smoothness {self.max_order}")
        k, xi, h = self.op.mesh.locate(edge, x)
        out = np.empty(len(xi))
        rows = _shape_rows(self.op.j, xi, h, order)
        for i, kk in enumerate(k):
            out[i] = rows[i] @ self.coefficients[self.op.dofs.element(edge, int(kk))]
        return out if np.ndim(x) else float(out[0])

    def endpoint_derivative(self, edge: int, side: Side, order: int) -> float:
        x = 0.0 if side == Side.START else self.graph.edges[edge].length
        return float(np.atleast_1d(self.derivative(edge, order, x))[0])


def project(op: DiscreteOperator, f, points_per_element: int = 12):
    """M-orthogonal projection of an edgewise function onto the discrete space.

    ``f`` needs ``derivative(edge, order, x)`` (vectorised in ``x``) and
    ``endpoint_derivative(edge, side, order)``.  The dynamic part of ``f`` is
    taken to be ``P_Yd`` of its lower trace.  Returns ``(c, residual)`` where
    ``residual`` is the norm of ``f - projection`` in the product space.
    """
    from .traces import gamma_lower

    j = op.j
    nodes, weights = leggauss(points_per_element)
    xi = 0.5 * (nodes + 1.0)
    # per element: (dof indices, quadrature weights, shape rows, f values)
    blocks = []
    load = np.zeros(op.dofs.size)
    for e, edge in enumerate(op.graph.edges):
        b = op.mesh.breakpoints[e]
        for k in range(op.mesh.elements(e)):
            h = b[k + 1] - b[k]
            w = 0.5 * weights * h / edge.p
            fx = np.asarray(f.derivative(e, 0, b[k] + h * xi), dtype=float)
            rows = _shape_rows(j, xi, np.full(len(xi), h), 0)
            idx = op.dofs.element(e, k)
            load[idx] += rows.T @ (w * fx)
            blocks.append((idx, w, rows, fx))
    theta = None
    if op.conditions.d_d:
        theta = op.conditions.basis_Yd.T @ gamma_lower(f, j)
        load += op.G.T @ (op.conditions.basis_Yd @ (op.conditions.Pi @ theta))
    c = np.linalg.solve(op.M_red, op.Z.T @ load)

    full = op.full(c)
    norm2 = sum(float(np.sum(w * (fx - rows @ full[idx]) ** 2)) for idx, w, rows, fx in blocks)
    if theta is not None:
        d = theta - op.theta(c)
        norm2 += float(d @ op.conditions.Pi @ d)
    return c, math.sqrt(norm2)
