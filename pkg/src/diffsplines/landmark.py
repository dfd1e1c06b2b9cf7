"""Finite-dimensional Hamiltonian system for atomic momenta and its flow.

The positions/momenta pair evolves under the kernel Hamiltonian; the full
diffeomorphism is recovered afterwards by transporting grid nodes with the
induced velocity field, and the flow Jacobian at a probe point by the
linearized equation.  All three integrations share one RK4 sweep so probe
quantities see the same stage values as the landmarks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import BlowUpError, DegenerateConfigurationError, MonotonicityError
from .kernel import (KernelModel, kernel_eval, kernel_matrix, kernel_raw,
                     velocity_field)
from .numerics import PathField, SpatialGrid, TimeGrid

EPS_SEP = 1e-9


@dataclass
class LandmarkState:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.q = np.atleast_1d(np.asarray(self.q, dtype=float))
        self.p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if self.q.shape != self.p.shape:
            raise ValueError("positions and momenta must pair up")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise ValueError("state has non-finite entries")
        if np.any(self.q <= 0.0) or np.any(self.q >= 1.0):
            raise ValueError("positions must lie in (0, 1)")
        if self.q.size > 1 and np.any(np.diff(self.q) < EPS_SEP):
            raise DegenerateConfigurationError("positions must be increasing and separated")


@dataclass
class LandmarkTrajectory:
    times: TimeGrid
    q: np.ndarray          # (m+1, n) positions
    p: np.ndarray          # (m+1, n) momenta
    hamiltonian0: float
    hamiltonian_drift: float
    model: KernelModel

    def state(self, k: int) -> LandmarkState:
        return LandmarkState(self.q[k], self.p[k])


@dataclass
class FlowReconstruction:
    phi: PathField
    phix_mid: np.ndarray   # Jacobian series at the probe point
    probe_x: float


def landmark_rhs(model: KernelModel, state: LandmarkState):
    """Canonical equations: q' = K p, p' = -p * (dK p)."""
    K = kernel_matrix(model, state.q)
    D = kernel_eval(model, state.q[:, None], state.q[None, :], 1)
    return K @ state.p, -state.p * (D @ state.p)


def landmark_hamiltonian(model: KernelModel, state: LandmarkState) -> float:
    K = kernel_matrix(model, state.q)
    return float(0.5 * state.p @ K @ state.p)


def _numpy_landmark_loop(q0, p0, phi0, probes0, dt, nsteps, variant, eps_sep):
    def rhs(q, p, phi, pr):
        K = kernel_raw(q[:, None], q[None, :], 0, variant)
        D = kernel_raw(q[:, None], q[None, :], 1, variant)
        dq = K @ p
        dp = -p * (D @ p)
        dphi = kernel_raw(phi[:, None], q[None, :], 0, variant) @ p if phi.size else phi
        if pr.size:
            v = kernel_raw(pr[:, 0][:, None], q[None, :], 0, variant) @ p
            dv = kernel_raw(pr[:, 0][:, None], q[None, :], 1, variant) @ p
            dpr = np.column_stack([v, dv * pr[:, 1]])
        else:
            dpr = pr
        return dq, dp, dphi, dpr

    nl, nf, npr = q0.size, phi0.size, probes0.shape[0]
    qs = np.empty((nsteps + 1, nl))
    ps = np.empty((nsteps + 1, nl))
    phis = np.empty((nsteps + 1, nf))
    prs = np.empty((nsteps + 1, npr, 2))
    qs[0], ps[0], phis[0], prs[0] = q0, p0, phi0, probes0
    q, p, phi, pr = q0.copy(), p0.copy(), phi0.copy(), probes0.copy()
    for step in range(nsteps):
        k1 = rhs(q, p, phi, pr)
        k2 = rhs(q + 0.5 * dt * k1[0], p + 0.5 * dt * k1[1],
                 phi + 0.5 * dt * k1[2], pr + 0.5 * dt * k1[3])
        k3 = rhs(q + 0.5 * dt * k2[0], p + 0.5 * dt * k2[1],
                 phi + 0.5 * dt * k2[2], pr + 0.5 * dt * k2[3])
        k4 = rhs(q + dt * k3[0], p + dt * k3[1],
                 phi + dt * k3[2], pr + dt * k3[3])
        c = dt / 6.0
        q = q + c * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        p = p + c * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        phi = phi + c * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        pr = pr + c * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            return qs, ps, phis, prs, 2, step + 1
        if np.any(q <= 0.0) or np.any(q >= 1.0) or (
                nl > 1 and np.min(np.diff(np.sort(q))) < eps_sep):
            return qs, ps, phis, prs, 1, step + 1
        qs[step + 1], ps[step + 1], phis[step + 1], prs[step + 1] = q, p, phi, pr
    return qs, ps, phis, prs, 0, nsteps


def _run_loop(model, state0, times, phi0, probes0, eps_sep):
    loop = _accel.landmark_loop if _accel.USE_NUMBA else _numpy_landmark_loop
    qs, ps, phis, prs, status, fail = loop(
        state0.q, state0.p, phi0, probes0, times.dt, times.m, model.code, eps_sep)
    if status == 1:
        raise DegenerateConfigurationError(
            f"landmarks collided or left (0, 1) at t={fail * times.dt:.6g}",
            time=fail * times.dt)
    if status == 2:
        raise BlowUpError(f"landmark integration blew up at t={fail * times.dt:.6g}",
                          time=fail * times.dt)
    return qs, ps, phis, prs


def integrate_landmarks(model: KernelModel, state0: LandmarkState,
                        times: TimeGrid, eps_sep: float = EPS_SEP,
                        drift_tol: float = 1e-6) -> LandmarkTrajectory:
    """RK4 trajectory of the landmark system with conservation bookkeeping."""
    qs, ps, _, _ = _run_loop(model, state0, times,
                             np.empty(0), np.empty((0, 2)), eps_sep)
    h0 = landmark_hamiltonian(model, state0)
    hend = landmark_hamiltonian(model, LandmarkState(qs[-1], ps[-1]))
    drift = abs(hend - h0) / max(abs(h0), 1e-300)
    if drift > drift_tol:
        raise BlowUpError(f"Hamiltonian drift {drift:.3g} exceeds {drift_tol:.3g}",
                          time=times.t_final)
    return LandmarkTrajectory(times, qs, ps, h0, drift, model)


def hamiltonian_series(traj: LandmarkTrajectory) -> np.ndarray:
    K00 = kernel_eval(traj.model, traj.q[..., :, None], traj.q[..., None, :], 0)
    return 0.5 * np.einsum("ki,kij,kj->k", traj.p, K00, traj.p)


def reconstruct_flow(model: KernelModel, traj: LandmarkTrajectory,
                     grid: SpatialGrid, probe_x: float = 0.5) -> FlowReconstruction:
    """Transport every grid node with the landmark velocity field.

    Nodes are advected independently (the field is globally defined), so the
    whole reconstruction is one vectorized sweep; monotonicity in x is
    checked on every recorded row.
    """
    state0 = traj.state(0)
    probes0 = np.array([[probe_x, 1.0]])
    _, _, phis, prs = _run_loop(model, state0, traj.times, grid.nodes.copy(),
                                probes0, EPS_SEP)
    if np.any(np.diff(phis, axis=1) <= 0.0):
        bad = int(np.argwhere(np.any(np.diff(phis, axis=1) <= 0.0, axis=1))[0])
        raise MonotonicityError(
            f"flow lost monotonicity at t={bad * traj.times.dt:.6g}; refine the grid")
    phi = PathField(traj.times, grid, phis)
    return FlowReconstruction(phi, prs[:, 0, 1], probe_x)


def jacobian_along(model: KernelModel, traj: LandmarkTrajectory,
                   x_star: float = 0.5):
    """Probe series (phi(t, x*), phi_x(t, x*)) from the linearized flow."""
    state0 = traj.state(0)
    probes0 = np.array([[x_star, 1.0]])
    _, _, _, prs = _run_loop(model, state0, traj.times,
                             np.empty(0), probes0, EPS_SEP)
    return prs[:, 0, 0], prs[:, 0, 1]


def jacobian_derivative_series(model: KernelModel, traj: LandmarkTrajectory,
                               phi_series: np.ndarray,
                               phix_series: np.ndarray) -> np.ndarray:
    """Exact d/dt of the probe Jacobian, evaluated from the linearized equation."""
    out = np.empty_like(phix_series)
    for k in range(out.size):
        dv = velocity_field(model, traj.state(k), phi_series[k], dx_order=1)
        out[k] = dv * phix_series[k]
    return out
