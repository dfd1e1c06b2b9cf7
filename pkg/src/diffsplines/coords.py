"""Change of variables q = d/dx log(d phi/dx) and the constraint geometry.

A diffeomorphism phi of [0, 1] fixing both endpoints with unit boundary
slopes corresponds to a grid function q subject to two scalar constraints:
q integrates to zero and eta(q) = exp(int_0^x q) integrates to one.  The
weighted inner product <X, Y> = int X Y / eta makes the constraint normals
{eta, phi*eta}, and both projections are rank-2 corrections driven by the
fixed 2x2 Hilbert matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MonotonicityError
from .numerics import (PathField, ScalarField, cumulative_values,
                       trapezoid_values)

HILBERT2 = np.array([[1.0, 0.5], [0.5, 1.0 / 3.0]])
HILBERT2_INV = np.array([[4.0, -6.0], [-6.0, 12.0]])

_ETA_EXP_LIMIT = 700.0  # exp overflow guard


# ---------------------------------------------------------------------------
# array-level core (shared with the momentum system and the functionals)

def eta_values(q: np.ndarray, h: float) -> np.ndarray:
    cum = cumulative_values(q, h)
    peak = np.abs(cum).max()
    if peak > _ETA_EXP_LIMIT:
        raise OverflowError(f"eta overflow: max |int q| = {peak:.3g}")
    return np.exp(cum)


def phi_values(eta: np.ndarray, h: float) -> np.ndarray:
    return cumulative_values(eta, h)


def constraint_residuals(q: np.ndarray, h: float) -> tuple[float, float]:
    eta = eta_values(q, h)
    return float(trapezoid_values(q, h)), float(trapezoid_values(eta, h) - 1.0)


def _gram(eta: np.ndarray, phi: np.ndarray, h: float):
    # discrete Gram of (1, phi) under the eta weight; equals the Hilbert
    # matrix up to quadrature error on constrained states, and using it
    # instead of the exact constants makes the projections exactly
    # idempotent and mutually adjoint on the grid
    g11 = trapezoid_values(eta, h)
    g12 = trapezoid_values(eta * phi, h)
    g22 = trapezoid_values(eta * phi * phi, h)
    return g11, g12, g22


def _gram_solve(g11, g12, g22, m1, m2):
    det = g11 * g22 - g12 * g12
    return (g22 * m1 - g12 * m2) / det, (g11 * m2 - g12 * m1) / det


def project_cotangent_values(p: np.ndarray, eta: np.ndarray,
                             phi: np.ndarray, h: float) -> np.ndarray:
    m1 = trapezoid_values(p * eta, h)
    m2 = trapezoid_values(p * phi * eta, h)
    c1, c2 = _gram_solve(*_gram(eta, phi, h), m1, m2)
    return p - c1 - c2 * phi


def project_tangent_values(f: np.ndarray, eta: np.ndarray,
                           phi: np.ndarray, h: float) -> np.ndarray:
    # <f, eta>_{1/eta} = int f dx and <f, phi eta>_{1/eta} = int f phi dx
    m1 = trapezoid_values(f, h)
    m2 = trapezoid_values(f * phi, h)
    c1, c2 = _gram_solve(*_gram(eta, phi, h), m1, m2)
    return f - eta * (c1 + c2 * phi)


def repair_values(q: np.ndarray, h: float, tol: float = 1e-12,
                  max_steps: int = 3) -> np.ndarray:
    """Newton steps on the two residuals along the normal directions."""
    q = np.asarray(q, dtype=float).copy()
    for _ in range(max_steps):
        eta = eta_values(q, h)
        phi = phi_values(eta, h)
        r1 = trapezoid_values(q, h)
        r2 = trapezoid_values(eta, h) - 1.0
        if abs(r1) <= tol and abs(r2) <= tol:
            break
        j11 = trapezoid_values(eta, h)
        j12 = trapezoid_values(phi * eta, h)
        j22 = 0.5 * trapezoid_values(eta * phi * phi, h)
        det = j11 * j22 - j12 * j12
        a = (-r1 * j22 + r2 * j12) / det
        b = (-j11 * r2 + j12 * r1) / det
        q += a * eta + b * eta * phi
    return q


# ---------------------------------------------------------------------------
# field-level API

@dataclass
class QState:
    """Constrained coordinate with its accepted residual tolerance."""

    q: ScalarField
    tol: float = 1e-5

    def residuals(self) -> tuple[float, float]:
        return constraint_residuals(self.q.values, self.q.grid.h)

    def validate(self) -> "QState":
        r1, r2 = self.residuals()
        if abs(r1) > self.tol or abs(r2) > self.tol:
            raise ValueError(f"constraint residuals ({r1:.3g}, {r2:.3g}) "
                             f"exceed tol={self.tol:.3g}")
        return self


@dataclass
class CotangentState:
    """A QState paired with (the canonical representative of) a momentum."""

    q: QState
    p: ScalarField

    def canonicalize(self) -> "CotangentState":
        h = self.p.grid.h
        eta = eta_values(self.q.q.values, h)
        phi = phi_values(eta, h)
        p = project_cotangent_values(self.p.values, eta, phi, h)
        return CotangentState(self.q, ScalarField(self.p.grid, p))


def eta_of_q(q: ScalarField) -> ScalarField:
    """eta = exp of the running integral of q; positive, eta(0) = 1."""
    return ScalarField(q.grid, eta_values(q.values, q.grid.h))


def phi_of_q(q: ScalarField) -> ScalarField:
    """phi = running integral of eta; increasing, phi(0) = 0."""
    return ScalarField(q.grid, phi_values(eta_values(q.values, q.grid.h), q.grid.h))


def q_of_phi(phi: ScalarField) -> ScalarField:
    """Inverse map: spatial log-derivative of the slope of phi.

    Works on the staggered cell-midpoint slopes (positive whenever phi is
    strictly increasing), then differences their logs back to the nodes;
    this keeps the round trip second-order up to and including the
    endpoints.
    """
    v = phi.values
    if np.any(np.diff(v) <= 0.0):
        raise MonotonicityError("phi must be strictly increasing")
    h = phi.grid.h
    g = np.log(np.diff(v) / h)
    q = np.empty_like(v)
    q[1:-1] = (g[1:] - g[:-1]) / h
    q[0] = (-2.0 * g[0] + 3.0 * g[1] - g[2]) / h
    q[-1] = (2.0 * g[-1] - 3.0 * g[-2] + g[-3]) / h
    return ScalarField(phi.grid, q)


def check_constraints(q: ScalarField) -> tuple[float, float]:
    return constraint_residuals(q.values, q.grid.h)


def repair_constraints(q: ScalarField, tol: float = 1e-12,
                       max_steps: int = 3) -> ScalarField:
    return ScalarField(q.grid, repair_values(q.values, q.grid.h, tol, max_steps))


def metric_inner(q: ScalarField, X: ScalarField, Y: ScalarField) -> float:
    """Weighted product int X Y / eta(q) dx."""
    h = q.grid.h
    eta = eta_values(q.values, h)
    return float(trapezoid_values(X.values * Y.values / eta, h))


def project_tangent(q: ScalarField, f: ScalarField) -> ScalarField:
    """Orthogonal (weighted) projection onto the constraint tangent space."""
    h = q.grid.h
    eta = eta_values(q.values, h)
    phi = phi_values(eta, h)
    return ScalarField(f.grid, project_tangent_values(f.values, eta, phi, h))


def project_cotangent(q: ScalarField, p: ScalarField) -> ScalarField:
    """L2-adjoint of the tangent projection, acting on momenta."""
    h = q.grid.h
    eta = eta_values(q.values, h)
    phi = phi_values(eta, h)
    return ScalarField(p.grid, project_cotangent_values(p.values, eta, phi, h))


def eta_time_derivative(q_path: PathField, qdot_path: PathField) -> PathField:
    """d eta/dt from the identity eta_t = eta * int_0^x q_t dy."""
    if q_path.values.shape != qdot_path.values.shape:
        raise ValueError("paths must share grids")
    h = q_path.grid.h
    out = np.empty_like(q_path.values)
    for k in range(q_path.values.shape[0]):
        eta = eta_values(q_path.values[k], h)
        out[k] = eta * cumulative_values(qdot_path.values[k], h)
    return PathField(q_path.times, q_path.grid, out)
