"""Heat-semigroup probes: kernel, trace, 2->inf norms, positivity, Wentzell rows.

All quantities are spectral sums over the discrete eigenpairs of
``(A_red, M_red)``; eigenfunctions are evaluated through their Hermite
representation on a uniform grid of every edge.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conditions import preset
from .discretization import DiscreteOperator, Mesh, assemble, evaluation_matrix, uniform_points
from .evolution import coefficients, heat_evolve, spectrum
from .graph import MetricGraph
from .numerics import power_fit, sym_eig

TRUNCATION = 1e-16
RESOLUTION_FACTOR = 10.0
GRID_POINTS = 129
BOUND_TOL = 1e-10
RESIDUAL_FLOOR = 1e-8


def _require_positive(t):
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")


def _grid(op: DiscreteOperator, per_edge: int):
    points, weights = uniform_points(op.graph, per_edge)
    return points, weights, evaluation_matrix(op, points) @ op.Z


def _factors(op: DiscreteOperator, t: float, power: float = 1.0):
    lam, _ = spectrum(op)
    expo = -power * lam * t
    keep = expo >= expo.max() + math.log(TRUNCATION)
    return np.exp(expo[keep]), keep


@dataclass(frozen=True)
class KernelGrid:
    t: float
    points: list          # (edge, x) pairs
    weights: np.ndarray   # trapezoid weights of the grid
    values: np.ndarray    # k_t(x_i, x_k)
    mixed: np.ndarray     # k_t(x_i, theta_r): function row against dynamic coordinate
    theta: np.ndarray     # k_t(theta_r, theta_s)

    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.values - self.values.T), initial=0.0))


def heat_kernel(op: DiscreteOperator, t: float, per_edge: int = GRID_POINTS) -> KernelGrid:
    """``k_t(x, y) = sum_k exp(-lam_k t) phi_k(x) phi_k(y)`` on a uniform grid."""
    _require_positive(t)
    points, weights, ev = _grid(op, per_edge)
    w, keep = _factors(op, t)
    Phi = op.eigenbasis().vectors[:, keep]
    on_grid = ev @ Phi
    on_theta = op.Gd @ Phi
    return KernelGrid(t=t, points=points, weights=weights,
                      values=(on_grid * w) @ on_grid.T,
                      mixed=(on_grid * w) @ on_theta.T,
                      theta=(on_theta * w) @ on_theta.T)


def semigroup_trace(op: DiscreteOperator, t: float) -> float:
    """``sum_k exp(-lam_k t)`` over the whole discrete spectrum."""
    _require_positive(t)
    return float(np.sum(np.exp(-spectrum(op)[0] * t)))


def norm_2_to_inf(op: DiscreteOperator, t: float, per_edge: int = GRID_POINTS) -> float:
    """Norm of ``exp(-tA)`` from the product space into ``L^inf + Y_d``.

    The function part is ``max_x (sum_k exp(-2 lam_k t) phi_k(x)^2)^(1/2)``;
    the dynamic part is the spectral norm of ``theta o exp(-tA)``.  The
    larger of the two is returned.
    """
    _require_positive(t)
    _, _, ev = _grid(op, per_edge)
    w, keep = _factors(op, t, power=2.0)
    Phi = op.eigenbasis().vectors[:, keep]
    on_grid = ev @ Phi
    fn = math.sqrt(float(np.max((on_grid ** 2) @ w)))
    if op.conditions.d_d == 0:
        return fn
    on_theta = op.Gd @ Phi
    gram = (on_theta * w) @ on_theta.T
    dyn = math.sqrt(max(float(sym_eig(gram)[0][-1]), 0.0))
    return max(fn, dyn)


def resolved_floor(op: DiscreteOperator) -> float:
    """Smallest time the mesh resolves: ``10 / lam_max`` (0 without positive modes)."""
    top = float(spectrum(op)[0][-1])
    return RESOLUTION_FACTOR / top if top > 0 else 0.0


@dataclass(frozen=True)
class ExponentFit:
    alpha: float
    prefactor: float
    bound: float          # the continuum exponent -1/(4j)
    times: np.ndarray
    norms: np.ndarray


def ultracontractivity_exponent(op: DiscreteOperator, times, per_edge: int = GRID_POINTS) -> ExponentFit:
    """Power-law fit ``||exp(-tA)||_{2->inf} ~ C t^alpha`` over ``times``."""
    times = np.asarray(times, dtype=float)
    if times.size < 2 or np.any(times <= 0):
        raise ValueError("need at least two positive times")
    if times.min() < resolved_floor(op):
        raise ValueError(f"mesh cannot resolve requested times (floor {resolved_floor(op):.3e})")
    norms = np.array([norm_2_to_inf(op, t, per_edge) for t in times])
    alpha, pref = power_fit(times, norms)
    return ExponentFit(alpha=alpha, prefactor=pref, bound=-1.0 / (4 * op.j), times=times, norms=norms)


@dataclass(frozen=True)
class PositivitySample:
    t: float
    min_u: float
    max_u: float
    submarkov: bool


def positivity_probe(op: DiscreteOperator, f, times, per_edge: int = GRID_POINTS, tol: float = BOUND_TOL):
    """Grid extrema of the heat flow and the componentwise ``[0, 1]`` test.

    The dynamic part is tested on the boundary-slot values ``B_d theta``.
    """
    _, _, ev = _grid(op, per_edge)
    Bd = op.conditions.basis_Yd
    out = []
    for s in heat_evolve(op, f, times):
        u = ev @ s.c
        slots = Bd @ s.theta
        vals = np.concatenate([u, slots])
        ok = bool(vals.min() >= -tol and vals.max() <= 1.0 + tol)
        out.append(PositivitySample(t=s.t, min_u=float(u.min()), max_u=float(u.max()), submarkov=ok))
    return out


def submarkov_onset(samples):
    """First sampled time from which the flag holds at every later sample, else ``None``."""
    onset = None
    for s in samples:
        if s.submarkov:
            onset = s.t if onset is None else onset
        else:
            onset = None
    return onset


def dynamic_row_residual(op: DiscreteOperator, c: np.ndarray, lam: float) -> float:
    """Relative defect of ``lam Pi theta + P_Yd(upper trace) + D theta = 0``.

    The upper trace is recovered from the Galerkin flux
    ``G (lam M phi - K phi)``, which the discrete eigen-equation confines to
    the edge-end degrees of freedom.  The defect is divided by
    ``|lam Pi theta| + eps`` with ``eps = 1e-8 * max|lam| * |c|_M``, the
    roundoff level of the flux, so modes with ``theta = 0`` are not 0/0.
    """
    vc = op.conditions
    if vc.d_d == 0:
        raise ValueError("no dynamic component")
    phi = op.full(c)
    theta = op.theta(c)
    flux = op.G @ (lam * (op.M @ phi) - op.K @ phi)
    inertia = lam * (vc.Pi @ theta)
    trace = vc.basis_Yd.T @ flux
    damping = vc.D @ theta
    lam_max = float(np.max(np.abs(op.eigenbasis().values)))
    floor = RESIDUAL_FLOOR * max(lam_max, 1.0) * math.sqrt(max(float(c @ op.M_red @ c), 0.0))
    return float(np.linalg.norm(inertia + trace + damping) / (np.linalg.norm(inertia) + floor))


def wentzell_residual(op: DiscreteOperator, k: int) -> float:
    basis = op.eigenbasis()
    if op.conditions.d_d == 0:
        raise ValueError("no dynamic component")
    if not 0 <= k < len(basis):
        raise IndexError(f"mode {k} out of range")
    return dynamic_row_residual(op, basis.vectors[:, k], float(basis.values[k]))


@dataclass(frozen=True)
class SquareRow:
    k: int
    lam_B: float
    lam_B_squared: float
    lam_A: float
    gap: float        # relative gap, absolute for kernel modes
    kernel: bool


def square_comparison(graph: MetricGraph, elements_per_edge, num_modes: int = 4, v1=None):
    """Compare the beam operator with the square of the dynamic Laplacian."""
    mesh = Mesh.uniform(graph, elements_per_edge)
    B = assemble(graph, preset("laplacian_dynamic", graph, 1, v1=v1), mesh)
    A = assemble(graph, preset("dynamic_star", graph, 2, v1=v1), mesh)
    # raw eigenvalues are reported; the snapped spectrum only classifies kernel modes
    zero_b = spectrum(B)[1]
    lb = B.eigenbasis().values
    la = A.eigenbasis().values
    rows = []
    for k in range(min(num_modes, len(lb), len(la))):
        sq = lb[k] ** 2
        kernel = bool(zero_b[k])
        gap = abs(la[k] - sq) if kernel else abs(la[k] - sq) / max(sq, 1.0)
        rows.append(SquareRow(k=k, lam_B=float(lb[k]), lam_B_squared=float(sq), lam_A=float(la[k]),
                              gap=float(gap), kernel=bool(kernel)))
    return rows


