"""Acceleration functionals on momentum-coordinate paths.

The central object is the covariant acceleration in its cotangent form,

    A = dp/dt + U(p^2, q) - pi1(p, q) - pi2(q, p^2),

which vanishes exactly on solutions of the constrained system; its
eta-weighted square integrates to the base functional.  The relaxed
functional augments the square with a defect measure routed through the
same nonlocal operator plus the one-homogeneous cost of moving the defect.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coords import (HILBERT2_INV, eta_values, phi_values,
                     project_cotangent_values)
from .fisher_rao import AtomicMeasurePath, GridMeasurePair, fr_atomic, fr_grid
from .geodesic_pq import PQTrajectory
from .numerics import (PathField, cumulative_values, time_derivative_values,
                       trapezoid_values)


@dataclass
class AccelerationReport:
    J0: float
    penalty: float
    J: float
    per_time_integrand: np.ndarray


def nonlocal_U(f: np.ndarray, q: np.ndarray, h: float) -> np.ndarray:
    """Half the eta-weighted tail integral of f."""
    ep = eta_values(q, h) * f
    cum = cumulative_values(ep, h)
    return 0.5 * (cum[-1] - cum)


def pi1(p: np.ndarray, q: np.ndarray, h: float) -> np.ndarray:
    """Rank-2 term fed by the b-quadrature alone."""
    eta = eta_values(q, h)
    pe = cumulative_values(p * eta, h)
    b = 1.5 * trapezoid_values(eta * pe * pe, h)
    phi = phi_values(eta, h)
    co = HILBERT2_INV @ (0.0, b)
    return co[0] + co[1] * phi


def pi2(q: np.ndarray, f: np.ndarray, h: float) -> np.ndarray:
    """Complement of the canonical projection applied to U(f, q)."""
    eta = eta_values(q, h)
    phi = phi_values(eta, h)
    U = nonlocal_U(f, q, h)
    return U - project_cotangent_values(U, eta, phi, h)


def covariant_accel_flat(traj: PQTrajectory) -> PathField:
    """Cotangent acceleration field along a sampled path.

    dp/dt comes from differencing the stored momentum path, so the field is
    well defined on arbitrary (not necessarily critical) paths.
    """
    h = traj.grid.h
    pdot = time_derivative_values(traj.p_path, traj.times.dt)
    out = np.empty_like(traj.p_path)
    for k in range(out.shape[0]):
        q = traj.q_path[k]
        p = traj.p_path[k]
        out[k] = (pdot[k] + nonlocal_U(p * p, q, h) - pi1(p, q, h)
                  - pi2(q, p * p, h))
    return PathField(traj.times, traj.grid, out)


def _weighted_square_rows(traj: PQTrajectory, field: np.ndarray) -> np.ndarray:
    h = traj.grid.h
    rows = np.empty(field.shape[0])
    for k in range(field.shape[0]):
        eta = eta_values(traj.q_path[k], h)
        rows[k] = trapezoid_values(eta * field[k] ** 2, h)
    return rows


def acceleration_J0(traj: PQTrajectory) -> float:
    """Time-space integral of the eta-weighted squared acceleration."""
    rows = _weighted_square_rows(traj, covariant_accel_flat(traj).values)
    return float(trapezoid_values(rows, traj.times.dt))


def relaxed_J(traj: PQTrajectory, p1_target: np.ndarray, q1_target: np.ndarray,
              sigma1: float = 1.0, sigma2: float = 1.0) -> AccelerationReport:
    """Base functional plus quadratic endpoint penalties."""
    if sigma1 <= 0.0 or sigma2 <= 0.0:
        raise ValueError("penalty scales must be positive")
    h = traj.grid.h
    rows = _weighted_square_rows(traj, covariant_accel_flat(traj).values)
    J0 = float(trapezoid_values(rows, traj.times.dt))
    dp = traj.p_path[-1] - np.asarray(p1_target, dtype=float)
    dq = traj.q_path[-1] - np.asarray(q1_target, dtype=float)
    penalty = (trapezoid_values(dp * dp, h) / sigma1 ** 2
               + trapezoid_values(dq * dq, h) / sigma2 ** 2)
    return AccelerationReport(J0, float(penalty), J0 + float(penalty), rows)


def atomic_U_values(delta: AtomicMeasurePath, q: np.ndarray, h: float,
                    nodes: np.ndarray, k: int) -> np.ndarray:
    """U applied to a moving atom: half tail weight left of the atom.

    The indicator takes value 1 left of the atom, 1/2 on the node carrying
    it, 0 to the right: the symmetric convention under grid refinement.
    """
    eta = eta_values(q, h)
    eta_at = float(np.interp(delta.x0, nodes, eta))
    mass = delta.f[k] ** 2
    ind = np.where(nodes < delta.x0, 1.0, 0.0)
    on = np.abs(nodes - delta.x0) <= 1e-12
    ind[on] = 0.5
    return 0.5 * mass * eta_at * ind


def eta_probe_series(traj: PQTrajectory, x0: float) -> np.ndarray:
    """eta(t, x0) along a trajectory, interpolated to the atom location."""
    h = traj.grid.h
    out = np.empty(traj.times.m + 1)
    for k in range(out.size):
        eta = eta_values(traj.q_path[k], h)
        out[k] = np.interp(x0, traj.grid.nodes, eta)
    return out


def relaxed_F(traj: PQTrajectory, delta, penalty: float = 0.0) -> float:
    """Relaxed functional: defect cost + defect-shifted acceleration square.

    `delta` is an AtomicMeasurePath or a GridMeasurePair whose second
    density is d(first)/dt; it must vanish at time zero.  With a zero
    defect this reduces to the base functional plus the penalty.
    """
    h = traj.grid.h
    nodes = traj.grid.nodes
    accel = covariant_accel_flat(traj).values
    if delta is None:
        rows = _weighted_square_rows(traj, accel)
        return float(trapezoid_values(rows, traj.times.dt)) + penalty

    if isinstance(delta, AtomicMeasurePath):
        if delta.f[0] != 0.0:
            raise ValueError("defect must vanish at time zero")
        fr = fr_atomic(delta, eta_probe_series(traj, delta.x0))
        shift = np.empty_like(accel)
        for k in range(accel.shape[0]):
            q = traj.q_path[k]
            eta = eta_values(q, h)
            phi = phi_values(eta, h)
            U = atomic_U_values(delta, q, h, nodes, k)
            shift[k] = project_cotangent_values(U, eta, phi, h)
    elif isinstance(delta, GridMeasurePair):
        if np.any(np.abs(delta.rho_mu.values[0]) > 1e-12):
            raise ValueError("defect must vanish at time zero")
        eta_w = np.empty_like(delta.rho_mu.values)
        for k in range(eta_w.shape[0]):
            eta_w[k] = eta_values(traj.q_path[k], h)
        weight = PathField(traj.times, traj.grid, eta_w)
        fr = fr_grid(delta.rho_mu, delta.rho_nu, weight)
        shift = np.empty_like(accel)
        for k in range(accel.shape[0]):
            q = traj.q_path[k]
            eta = eta_values(q, h)
            phi = phi_values(eta, h)
            U = nonlocal_U(delta.rho_mu.values[k], q, h)
            shift[k] = project_cotangent_values(U, eta, phi, h)
    else:
        raise TypeError("delta must be atomic, grid pair, or None")

    rows = _weighted_square_rows(traj, accel + shift)
    return float(fr + trapezoid_values(rows, traj.times.dt) + penalty)


def check_cs_inequality(traj: PQTrajectory, tol: float = 1e-9):
    """Energy-versus-acceleration bound for zero initial velocity.

    Returns (lhs, rhs, ok) with lhs the integrated squared speed and
    rhs = 4 T^2 times the acceleration functional.
    """
    h = traj.grid.h
    p0 = traj.p_path[0]
    if trapezoid_values(p0 * p0, h) > 1e-16:
        raise ValueError("bound requires zero initial velocity")
    T = traj.times.t_final
    speed_rows = np.empty(traj.times.m + 1)
    for k in range(speed_rows.size):
        eta = eta_values(traj.q_path[k], h)
        speed_rows[k] = trapezoid_values(eta * traj.p_path[k] ** 2, h)
    lhs = float(trapezoid_values(speed_rows, traj.times.dt))
    rhs = 4.0 * T ** 2 * acceleration_J0(traj)
    return lhs, rhs, bool(lhs <= rhs + tol)
