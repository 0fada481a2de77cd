"""Exact-in-time spectral propagation of the wave, damped wave and heat flows.

Reduced coefficients are expanded in the M-orthonormal eigenbasis,
``c = Phi a`` with ``a = Phi^T M_red c``; each modal amplitude is then moved
by its closed-form scalar solution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .discretization import DiscreteOperator, project

# relative size below which an eigenvalue counts as zero
KERNEL_TOL = 1e-12
# smallest eigenvalue tolerated by the positive-semidefinite check
PSD_TOL = 1e-8
# relative discriminant size treated as a double root
DOUBLE_ROOT_TOL = 1e-12


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    c: np.ndarray
    velocity: np.ndarray
    theta: np.ndarray
    K: float
    P: float
    E: float


def kernel_threshold(op: DiscreteOperator) -> float:
    """Eigenvalues at most this size in modulus count as kernel.

    The scale is the larger of the spectral radius and the stiffness-to-mass
    diagonal ratio of the unreduced matrices, so a spectrum consisting only of
    rounding noise is still recognised as kernel.
    """
    lam = op.eigenbasis().values
    scale = float(np.max(np.abs(lam), initial=0.0))
    mass = np.abs(np.diag(op.M)).max(initial=0.0)
    if mass > 0:
        scale = max(scale, float(np.abs(np.diag(op.K)).max(initial=0.0) / mass))
    return KERNEL_TOL * scale


def spectrum(op: DiscreteOperator) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues with kernel entries snapped to zero, and the kernel mask."""
    lam = op.eigenbasis().values.copy()
    zero = np.abs(lam) <= kernel_threshold(op)
    lam[zero] = 0.0
    return lam, zero


def coefficients(op: DiscreteOperator, data):
    """Reduced coefficients of initial data and the projection residual.

    ``data`` is ``None`` (zero), a reduced coefficient vector, or an edgewise
    field that is projected M-orthogonally.
    """
    if data is None:
        return np.zeros(op.size), 0.0
    if isinstance(data, np.ndarray) or isinstance(data, (list, tuple)):
        c = np.asarray(data, dtype=float)
        if c.shape != (op.size,):
            raise ValueError(f"coefficient vector has shape {c.shape}, expected ({op.size},)")
        return c, 0.0
    return project(op, data)


def eigenmode(op: DiscreteOperator, k: int) -> np.ndarray:
    basis = op.eigenbasis()
    if not 0 <= k < len(basis):
        raise IndexError(f"mode {k} out of range (0..{len(basis) - 1})")
    return basis.vectors[:, k].copy()


def energy(op: DiscreteOperator, c: np.ndarray, velocity: np.ndarray):
    """``(K, P, E)`` with ``K = |c'|_M^2 / 2`` and ``P = c^T A_red c / 2``."""
    K = 0.5 * float(velocity @ op.M_red @ velocity)
    P = 0.5 * float(c @ op.A_red @ c)
    return K, P, K + P


def _modal(op: DiscreteOperator, c: np.ndarray) -> np.ndarray:
    return op.eigenbasis().vectors.T @ (op.M_red @ c)


def _check_times(times, allow_negative=True) -> np.ndarray:
    times = np.asarray(times, dtype=float).ravel()
    if times.size == 0:
        raise ValueError("time list is empty")
    if not np.all(np.isfinite(times)):
        raise ValueError("times must be finite")
    if not allow_negative and np.any(times < 0):
        raise ValueError("heat flow is only defined for t >= 0")
    return times


def _samples(op, times, amplitudes, rates):
    Phi = op.eigenbasis().vectors
    out = []
    for t, a, b in zip(times, amplitudes, rates):
        c = Phi @ a
        v = Phi @ b
        K, P, E = energy(op, c, v)
        out.append(TrajectorySample(t=float(t), c=c, velocity=v, theta=op.theta(c), K=K, P=P, E=E))
    return out


def _wave_modal(lam: np.ndarray, zero: np.ndarray, a0, b0, t: float):
    a = np.empty_like(a0)
    b = np.empty_like(a0)
    pos = (lam > 0) & ~zero
    neg = (lam < 0) & ~zero
    w = np.sqrt(lam[pos])
    a[pos] = np.cos(w * t) * a0[pos] + np.sin(w * t) / w * b0[pos]
    b[pos] = -w * np.sin(w * t) * a0[pos] + np.cos(w * t) * b0[pos]
    m = np.sqrt(-lam[neg])
    a[neg] = np.cosh(m * t) * a0[neg] + np.sinh(m * t) / m * b0[neg]
    b[neg] = m * np.sinh(m * t) * a0[neg] + np.cosh(m * t) * b0[neg]
    a[zero] = a0[zero] + t * b0[zero]
    b[zero] = b0[zero]
    return a, b


def wave_evolve(op: DiscreteOperator, f, g, times):
    """Samples of ``u'' = -A u`` with ``u(0) = f`` and ``u'(0) = g``."""
    times = _check_times(times)
    lam, zero = spectrum(op)
    a0 = _modal(op, coefficients(op, f)[0])
    b0 = _modal(op, coefficients(op, g)[0])
    pairs = [_wave_modal(lam, zero, a0, b0, t) for t in times]
    return _samples(op, times, [p[0] for p in pairs], [p[1] for p in pairs])


def heat_evolve(op: DiscreteOperator, f, times):
    """Samples of ``u' = -A u`` with ``u(0) = f``; negative modes grow."""
    times = _check_times(times, allow_negative=False)
    lam, _ = spectrum(op)
    a0 = _modal(op, coefficients(op, f)[0])
    amps = [np.exp(-lam * t) * a0 for t in times]
    return _samples(op, times, amps, [-lam * a for a in amps])


def _damped_mode(lam: float, kappa: float, f: float, g: float, t: float):
    b = lam * kappa
    disc = b * b - 4.0 * lam
    scale = max(b * b, 4.0 * abs(lam))
    if abs(disc) <= DOUBLE_ROOT_TOL * scale:
        r = -0.5 * b
        e = math.exp(r * t)
        u = (f + (g - r * f) * t) * e
        return u, r * u + (g - r * f) * e
    if disc > 0:
        q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
        r1, r2 = q, lam / q
        A = (g - r2 * f) / (r1 - r2)
        B = (r1 * f - g) / (r1 - r2)
        e1, e2 = math.exp(r1 * t), math.exp(r2 * t)
        return A * e1 + B * e2, r1 * A * e1 + r2 * B * e2
    alpha = -0.5 * b
    beta = 0.5 * math.sqrt(-disc)
    e = math.exp(alpha * t)
    cs, sn = math.cos(beta * t), math.sin(beta * t)
    coef = (g - alpha * f) / beta
    u = e * (f * cs + coef * sn)
    return u, alpha * u + e * (-f * beta * sn + coef * beta * cs)


def damped_evolve(op: DiscreteOperator, f, g, kappa: float, times):
    """Samples of ``u'' = -A (u + kappa u')`` for real ``kappa >= 0``."""
    if not (math.isfinite(kappa) and kappa >= 0):
        raise ValueError("kappa must be real and nonnegative")
    times = _check_times(times)
    lam, zero = spectrum(op)
    a0 = _modal(op, coefficients(op, f)[0])
    b0 = _modal(op, coefficients(op, g)[0])
    amps, rates = [], []
    for t in times:
        a = np.empty_like(a0)
        b = np.empty_like(a0)
        for k in range(len(lam)):
            if zero[k]:
                a[k], b[k] = a0[k] + t * b0[k], b0[k]
            else:
                a[k], b[k] = _damped_mode(float(lam[k]), kappa, a0[k], b0[k], float(t))
        amps.append(a)
        rates.append(b)
    return _samples(op, times, amps, rates)


def smallest_eigenvalue(op: DiscreteOperator) -> float:
    return float(op.eigenbasis().values[0])


def require_psd(op: DiscreteOperator):
    lam = op.eigenbasis().values
    floor = max(PSD_TOL, kernel_threshold(op))
    if lam[0] < -floor:
        raise ValueError(f"form is not positive semidefinite (smallest eigenvalue {lam[0]:.6e})")


@dataclass(frozen=True)
class EquipartitionReport:
    E: float
    min_gap: float       # min over samples of |K(t) - E/2|
    K_min: float
    K_max: float
    t_K_min: float
    t_K_max: float

    @property
    def degenerate(self) -> bool:
        return self.E == 0.0


def equipartition_probe(op: DiscreteOperator, f, g, horizon: float, samples: int = 400):
    """Sample ``K(t)`` along the wave flow on ``[0, horizon]``."""
    require_psd(op)
    if horizon <= 0 or samples < 2:
        raise ValueError("need a positive horizon and at least two samples")
    traj = wave_evolve(op, f, g, np.linspace(0.0, horizon, samples))
    K = np.array([s.K for s in traj])
    E = traj[0].E
    i_min, i_max = int(np.argmin(K)), int(np.argmax(K))
    return EquipartitionReport(E=E, min_gap=float(np.min(np.abs(K - 0.5 * E))),
                               K_min=float(K[i_min]), K_max=float(K[i_max]),
                               t_K_min=traj[i_min].t, t_K_max=traj[i_max].t)
