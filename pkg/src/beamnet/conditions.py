"""Vertex conditions ``(Y_d, Y_s, S, D, Pi)`` and named presets.

A condition set lives in the boundary space ``R^(2jE)`` (see
:mod:`beamnet.graph` for the slot layout).  The dynamic subspace ``Y_d`` and
the stationary subspace ``Y_s`` are stored as matrices with orthonormal
columns; ``S``, ``D`` and ``Pi`` are given in the coordinates of those
columns.  The form domain asks the lower trace to lie in ``Y = Y_d + Y_s``;
``S`` and ``D`` enter the form with a minus sign, and ``Pi`` weights the
dynamic part of the inner product.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import MetricGraph, all_slots, boundary_dim, boundary_index, incident_slots
from .numerics import sym_eig

TOL = 1e-10


@dataclass(frozen=True, eq=False)
class VertexConditions:
    j: int
    basis_Yd: np.ndarray
    basis_Ys: np.ndarray
    S: np.ndarray
    D: np.ndarray
    Pi: np.ndarray
    name: str = "explicit"

    @property
    def dim(self) -> int:
        return self.basis_Yd.shape[0]

    @property
    def d_d(self) -> int:
        return self.basis_Yd.shape[1]

    @property
    def d_s(self) -> int:
        return self.basis_Ys.shape[1]

    @property
    def basis_Y(self) -> np.ndarray:
        return np.hstack([self.basis_Yd, self.basis_Ys])

    def lifted(self):
        """``(S', D', Pi')`` as ``2jE x 2jE`` maps through the stored bases."""
        Bd, Bs = self.basis_Yd, self.basis_Ys
        return Bs @ self.S @ Bs.T, Bd @ self.D @ Bd.T, Bd @ self.Pi @ Bd.T


def make_conditions(j, basis_Yd, basis_Ys, S=None, D=None, Pi=None, name="explicit", dim=None):
    """Assemble a :class:`VertexConditions`, filling ``S = D = 0`` and ``Pi = I``."""
    if j < 1:
        raise ValueError("order j must be >= 1")
    Bd = _as_basis(basis_Yd, dim)
    Bs = _as_basis(basis_Ys, dim if dim is not None else Bd.shape[0])
    if Bd.shape[0] != Bs.shape[0]:
        raise ValueError(f"Y_d and Y_s live in different spaces ({Bd.shape[0]} vs {Bs.shape[0]})")
    dd, ds = Bd.shape[1], Bs.shape[1]
    return VertexConditions(j=j, basis_Yd=Bd, basis_Ys=Bs,
                            S=_square(S, ds), D=_square(D, dd),
                            Pi=_square(Pi, dd, identity=True), name=name)


def _square(m, size, identity=False):
    if m is None:
        return np.eye(size) if identity else np.zeros((size, size))
    m = np.asarray(m, dtype=float)
    if size == 0 and m.size == 0:
        return np.zeros((0, 0))
    return np.atleast_2d(m)


def _as_basis(b, dim):
    b = np.asarray(b, dtype=float)
    if b.size == 0:
        if dim is None and b.ndim == 2:
            dim = b.shape[0]
        if dim is None:
            raise ValueError("dimension of an empty subspace must be given")
        return np.zeros((dim, 0))
    if b.ndim != 2:
        raise ValueError("a basis must be a 2-d array with one column per vector")
    return b


@dataclass
class ValidationReport:
    flags: dict = field(default_factory=dict)
    violations: dict = field(default_factory=dict)

    @property
    def structural_ok(self) -> bool:
        keys = ("orthonormal_Yd", "orthonormal_Ys", "mutually_orthogonal", "Pi_spd")
        return all(self.flags[k] for k in keys)

    def as_dict(self):
        return {k: {"ok": self.flags[k], "violation": self.violations[k]} for k in self.flags}


def _max_abs(a) -> float:
    return float(np.max(np.abs(a), initial=0.0))


def validate(vc: VertexConditions, tol: float = TOL) -> ValidationReport:
    """Check the structural assumptions; never modifies ``vc``."""
    n = vc.dim
    dd, ds = vc.d_d, vc.d_s
    if vc.basis_Ys.shape[0] != n:
        raise ValueError("Y_d and Y_s bases have different row counts")
    if n != boundary_dim(vc.j, n // (2 * vc.j)) or n % (2 * vc.j):
        raise ValueError(f"boundary dimension {n} is not a multiple of 2j={2 * vc.j}")
    if dd + ds > n:
        raise ValueError(f"dim Y_d + dim Y_s = {dd + ds} exceeds {n}")
    for label, mat, size in (("S", vc.S, ds), ("D", vc.D, dd), ("Pi", vc.Pi, dd)):
        if mat.shape != (size, size):
            raise ValueError(f"{label} has shape {mat.shape}, expected {(size, size)}")

    v = {}
    v["orthonormal_Yd"] = _max_abs(vc.basis_Yd.T @ vc.basis_Yd - np.eye(dd))
    v["orthonormal_Ys"] = _max_abs(vc.basis_Ys.T @ vc.basis_Ys - np.eye(ds))
    v["mutually_orthogonal"] = _max_abs(vc.basis_Yd.T @ vc.basis_Ys)
    v["S_symmetric"] = _max_abs(vc.S - vc.S.T)
    v["D_symmetric"] = _max_abs(vc.D - vc.D.T)

    pi_asym = _max_abs(vc.Pi - vc.Pi.T)
    pi_min = sym_eig(0.5 * (vc.Pi + vc.Pi.T))[0].min(initial=np.inf) if dd else np.inf
    # a nonpositive eigenvalue must fail the flag, so it is pushed past tol
    v["Pi_spd"] = max(pi_asym, 0.0 if pi_min > tol else 2 * tol - pi_min)
    for label, mat in (("S", vc.S), ("D", vc.D)):
        top = sym_eig(0.5 * (mat + mat.T))[0].max(initial=0.0) if mat.size else 0.0
        v[f"{label}_negative_semidefinite"] = max(0.0, float(top))
    flags = {k: bool(val <= tol) for k, val in v.items()}
    return ValidationReport(flags=flags, violations=v)


def orthonormalize(vectors, dim=None, drop=1e-12) -> np.ndarray:
    """Orthonormal basis (as columns) of the span of ``vectors``.

    Modified Gram-Schmidt with one re-orthogonalisation pass; a vector whose
    remainder is below ``drop`` times the largest input norm is discarded.
    """
    vecs = [np.asarray(v, dtype=float).ravel() for v in vectors]
    if not vecs:
        if dim is None:
            raise ValueError("dimension of an empty span must be given")
        return np.zeros((dim, 0))
    n = vecs[0].size
    if any(v.size != n for v in vecs):
        raise ValueError("spanning vectors have different lengths")
    cutoff = drop * max(np.linalg.norm(v) for v in vecs)
    basis = []
    for v in vecs:
        w = v.copy()
        for _ in range(2):
            for q in basis:
                w -= (q @ w) * q
        norm = np.linalg.norm(w)
        if norm > cutoff and norm > 0:
            basis.append(w / norm)
    if not basis:
        return np.zeros((n, 0))
    return np.column_stack(basis)


def projector(basis: np.ndarray) -> np.ndarray:
    """Orthogonal projector ``B B^T`` onto the column span of ``basis``."""
    basis = np.asarray(basis, dtype=float)
    return basis @ basis.T


def complement(basis: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of ``span(basis)``."""
    n = basis.shape[0]
    if basis.shape[1] == 0:
        return np.eye(n)
    if basis.shape[1] >= n:
        return np.zeros((n, 0))
    # full QR of the basis: the trailing columns of Q span the complement
    q, _ = np.linalg.qr(basis, mode="complete")
    return q[:, basis.shape[1]:]


# ---------------------------------------------------------------- presets


def _unit(n, index):
    e = np.zeros(n)
    e[index] = 1.0
    return e


def vertex_vector(graph: MetricGraph, j: int, vertex, k: int) -> np.ndarray:
    """Normalised indicator of the slots of ``vertex`` in block ``k``."""
    n = boundary_dim(j, graph.num_edges)
    w = np.zeros(n)
    for slot in incident_slots(graph, vertex, k):
        w[boundary_index(slot, j, graph.num_edges)] = 1.0
    return w / np.linalg.norm(w)


def vertex_complement(graph: MetricGraph, j: int, vertex, k: int) -> list:
    """Orthonormal vectors supported on the slots of ``vertex`` in block ``k``
    and orthogonal to the vertex indicator (zero-sum vectors)."""
    n = boundary_dim(j, graph.num_edges)
    idx = [boundary_index(s, j, graph.num_edges) for s in incident_slots(graph, vertex, k)]
    if len(idx) < 2:
        return []
    raw = []
    for i in idx[1:]:
        v = np.zeros(n)
        v[idx[0]] = 1.0
        v[i] = -1.0
        raw.append(v)
    b = orthonormalize(raw, dim=n)
    return [b[:, c] for c in range(b.shape[1])]


def vertex_slots(graph: MetricGraph, j: int, vertex, k: int) -> list:
    n = boundary_dim(j, graph.num_edges)
    return [_unit(n, boundary_index(s, j, graph.num_edges)) for s in incident_slots(graph, vertex, k)]


def _cols(vectors, n):
    return np.column_stack(vectors) if vectors else np.zeros((n, 0))


def _require_j(name, j, allowed):
    if j not in allowed:
        raise ValueError(f"preset {name!r} is defined for j in {sorted(allowed)}, got j={j}")


def _pick_vertex(graph, vertex, wanted_degree=None):
    if vertex is not None:
        if vertex not in graph.vertices:
            raise KeyError(f"unknown vertex {vertex!r}")
        return vertex
    if wanted_degree is None:
        return graph.vertices[0]
    for v in graph.vertices:
        if graph.degree(v) == wanted_degree:
            return v
    raise ValueError(f"no vertex of degree {wanted_degree}")


PRESETS = ("hinged", "clamped", "dirichlet", "free", "continuity_kirchhoff", "friedrichs",
           "dynamic_star", "point_mass", "point_mass_degenerate", "laplacian_dynamic")


def preset(name: str, graph: MetricGraph, j: int, v1=None) -> VertexConditions:
    """Named condition families.

    ``hinged``
        ``j = 2``; values vanish, slopes free, so ``u = u'' = 0`` at ends.
    ``clamped`` / ``dirichlet``
        ``Y = {0}``: every lower trace vanishes (any ``j``).
    ``free``
        ``Y`` is everything and ``S = 0``: the upper trace vanishes.
    ``continuity_kirchhoff``
        Every block vertex-wise constant (the realisation A_N).
    ``friedrichs``
        Block 0 vertex-wise constant, blocks ``1..j-1`` zero (A_F).
    ``dynamic_star``
        ``j = 2``.  Continuity of ``u`` everywhere with a dynamic value at
        ``v1``; slope Kirchhoff at the other vertices, free slopes at ``v1``
        and ``S = -w w^T`` with ``w`` the normalised slope indicator of
        ``v1``.  The natural conditions then read ``u''`` continuous,
        ``u''(v1) = -(1/deg v1) * sum of outward slopes`` and third-derivative
        Kirchhoff away from ``v1``; this is the square of
        ``laplacian_dynamic``.
    ``point_mass`` / ``point_mass_degenerate``
        ``j = 2``; two beams joined at a vertex ``v1`` (default: the first
        vertex of degree 2), other ends clamped.  ``Y`` is continuity of
        ``u`` plus zero-sum slopes at ``v1``.  ``point_mass`` makes the
        common value dynamic; the degenerate variant makes both directions
        dynamic.
    ``laplacian_dynamic``
        ``j = 1``; continuity everywhere, dynamic value at ``v1``, Kirchhoff
        elsewhere.
    """
    n = boundary_dim(j, graph.num_edges)
    verts = graph.vertices
    d_vecs, s_vecs, S = [], [], None

    if name == "hinged":
        _require_j(name, j, {2})
        s_vecs = [_unit(n, boundary_index(s, j, graph.num_edges))
                  for s in all_slots(j, graph.num_edges) if s.k == 1]
    elif name in ("clamped", "dirichlet"):
        pass
    elif name == "free":
        s_vecs = [_unit(n, i) for i in range(n)]
    elif name == "continuity_kirchhoff":
        s_vecs = [vertex_vector(graph, j, v, k) for k in range(j) for v in verts]
    elif name == "friedrichs":
        s_vecs = [vertex_vector(graph, j, v, 0) for v in verts]
    elif name == "dynamic_star":
        _require_j(name, j, {2})
        v1 = _pick_vertex(graph, v1)
        d_vecs = [vertex_vector(graph, j, v1, 0)]
        s_vecs = [vertex_vector(graph, j, v, 0) for v in verts if v != v1]
        s_vecs += vertex_slots(graph, j, v1, 1)
        for v in verts:
            if v != v1:
                s_vecs += vertex_complement(graph, j, v, 1)
        Bs = _cols(s_vecs, n)
        w = Bs.T @ vertex_vector(graph, j, v1, 1)
        S = -np.outer(w, w)
    elif name in ("point_mass", "point_mass_degenerate"):
        _require_j(name, j, {2})
        v1 = _pick_vertex(graph, v1, wanted_degree=2)
        value = [vertex_vector(graph, j, v1, 0)]
        slopes = vertex_complement(graph, j, v1, 1)
        if name == "point_mass":
            d_vecs, s_vecs = value, slopes
        else:
            d_vecs = value + slopes
    elif name == "laplacian_dynamic":
        _require_j(name, j, {1})
        v1 = _pick_vertex(graph, v1)
        d_vecs = [vertex_vector(graph, j, v1, 0)]
        s_vecs = [vertex_vector(graph, j, v, 0) for v in verts if v != v1]
    else:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")

    return make_conditions(j, _cols(d_vecs, n), _cols(s_vecs, n), S=S, name=name, dim=n)

