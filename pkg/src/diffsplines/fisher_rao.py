"""One-homogeneous convex functional on measure pairs and its toolbox.

The integrand r(x, y) = y^2 / (4x) (with r(0, 0) = 0 and +inf otherwise)
is integrated against a positive weight over the time-space square.  Grid
densities take Lebesgue as the dominating measure; a single moving atom is
handled exactly through its profile, where the functional collapses to the
weighted square of the profile's time derivative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleTargetError
from .numerics import (PathField, TimeGrid, time_derivative_values,
                       trapezoid_values)

EPS_FLOOR = 1e-14


@dataclass
class AtomicMeasurePath:
    """Moving-in-time atom f(t)^2 * delta at a fixed location."""

    x0: float
    f: np.ndarray
    times: TimeGrid

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float)
        if self.f.shape != (self.times.m + 1,):
            raise ValueError("profile length must match the time grid")
        if np.any(self.f < 0.0):
            raise ValueError("profile must be nonnegative")
        if not 0.0 <= self.x0 <= 1.0:
            raise ValueError("atom location must lie in [0, 1]")

    def density(self) -> np.ndarray:
        return self.f ** 2


@dataclass
class GridMeasurePair:
    """Nonnegative densities for (mu, nu) on the time-space grid."""

    rho_mu: PathField
    rho_nu: PathField

    def __post_init__(self):
        if self.rho_mu.values.shape != self.rho_nu.values.shape:
            raise ValueError("densities must share grids")
        if np.any(self.rho_mu.values < 0.0) or np.any(self.rho_nu.values < 0.0):
            raise ValueError("densities must be nonnegative")


def r_integrand(x, y):
    """y^2/(4x) for x > 0, 0 at the origin, +inf otherwise; broadcasts."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.where(x > EPS_FLOOR, y * y / (4.0 * np.maximum(x, EPS_FLOOR)), 0.0)
    out = np.where((x <= EPS_FLOOR) & (np.abs(y) > 0.0), np.inf, out)
    out = np.where(x < -EPS_FLOOR, np.inf, out)
    if out.ndim == 0:
        return float(out)
    return out


def _grid_quadrature(values: np.ndarray, dt: float, h: float) -> float:
    rows = h * (values.sum(axis=1) - 0.5 * (values[:, 0] + values[:, -1]))
    return float(dt * (rows.sum() - 0.5 * (rows[0] + rows[-1])))


def fr_grid(mu_density: PathField, nu_density: PathField,
            weight: PathField | float = 1.0) -> float:
    """Weighted integral of r(rho_mu, rho_nu) over the square; +inf if any
    cell puts mass where the first density vanishes."""
    w = weight.values if isinstance(weight, PathField) else float(weight)
    if isinstance(weight, PathField) and np.any(weight.values <= 0.0):
        raise ValueError("weight must be strictly positive")
    if np.isscalar(w) and w <= 0.0:
        raise ValueError("weight must be strictly positive")
    r = r_integrand(mu_density.values, nu_density.values)
    if np.any(np.isinf(r)):
        return float("inf")
    dt = mu_density.times.dt
    h = mu_density.grid.h
    return _grid_quadrature(r * w, dt, h)


def fr_atomic(delta: AtomicMeasurePath, eta_at_atom: np.ndarray) -> float:
    """Exact atomic form: integral of (df/dt)^2 against the weight at the atom.

    Equivalent to the grid form on the pair (f^2, d(f^2)/dt) because
    (d f^2/dt)^2 / (4 f^2) = (df/dt)^2.
    """
    eta = np.asarray(eta_at_atom, dtype=float)
    if eta.shape != delta.f.shape:
        raise ValueError("weight series must match the profile")
    fdot = time_derivative_values(delta.f[:, None], delta.times.dt)[:, 0]
    return float(trapezoid_values(fdot ** 2 * eta, delta.times.dt))


def default_test_family(times: TimeGrid, grid, kmax: int = 4, lmax: int = 4):
    """Strictly positive low-frequency family: {1} and shifted cosine products.

    Yields (f, df/dt) sample pairs on the grid.
    """
    t = times.times[:, None]
    x = grid.nodes[None, :]
    ones = np.ones((times.m + 1, grid.n))
    family = [(ones, np.zeros_like(ones))]
    for k in range(kmax + 1):
        for l in range(lmax + 1):
            if k == 0 and l == 0:
                continue
            f = 1.5 + np.cos(k * np.pi * t) * np.cos(l * np.pi * x)
            dft = -k * np.pi * np.sin(k * np.pi * t) * np.cos(l * np.pi * x)
            family.append((f, dft + np.zeros_like(f)))
    return family


def check_inequality_condition(pair: GridMeasurePair, test_fns=None) -> float:
    """Worst margin of 4<nu,f><mu,f> - <mu, df/dt>^2 over the test family.

    Nonnegative iff the quadratic compatibility condition holds on the
    family.
    """
    mu = pair.rho_mu
    nu = pair.rho_nu
    dt, h = mu.times.dt, mu.grid.h
    if test_fns is None:
        test_fns = default_test_family(mu.times, mu.grid)
    if not test_fns:
        raise ValueError("empty test family")
    worst = np.inf
    for f, dft in test_fns:
        pf_mu = _grid_quadrature(mu.values * f, dt, h)
        pf_nu = _grid_quadrature(nu.values * f, dt, h)
        pdf_mu = _grid_quadrature(mu.values * dft, dt, h)
        worst = min(worst, 4.0 * pf_nu * pf_mu - pdf_mu ** 2)
    return float(worst)


def check_subgradient(u: PathField, v: PathField, pair: GridMeasurePair,
                      weight: PathField | float = 1.0,
                      tol: float = 1e-10) -> tuple[bool, float]:
    """Dual-pair test: feasibility u/f + (v/f)^2 <= 0 and the duality gap.

    A feasible pair with zero gap certifies membership in the subdifferential
    at (mu, nu).
    """
    w = weight.values if isinstance(weight, PathField) else float(weight)
    ratio_u = u.values / w
    ratio_v = v.values / w
    feasible = bool(np.all(ratio_u + ratio_v ** 2 <= tol))
    dt, h = pair.rho_mu.times.dt, pair.rho_mu.grid.h
    value = fr_grid(pair.rho_mu, pair.rho_nu, weight if isinstance(weight, PathField) else float(w))
    paired = (_grid_quadrature(u.values * pair.rho_mu.values, dt, h)
              + _grid_quadrature(v.values * pair.rho_nu.values, dt, h))
    return feasible, float(value - paired)


def synthesize_oscillations(mu_density: PathField, nu_density: PathField,
                            n: int, tol: float = 1e-9) -> PathField:
    """Oscillating fields whose squares track a target density pair.

    Writes the candidate as (a + b cos(2 pi n x)) sin(2 pi n x) and solves
    for the envelopes in polar form: radius sqrt(mu), phase integrating
    sqrt((nu - (d sqrt(mu)/dt)^2)/mu) (zero where mu vanishes).  Requires
    (d sqrt(mu)/dt)^2 <= nu pointwise and mu(0) = 0.
    """
    mu = mu_density.values
    nu = nu_density.values
    if np.any(np.abs(mu[0]) > tol):
        raise InfeasibleTargetError("target must vanish at time zero")
    r = np.sqrt(np.maximum(mu, 0.0))
    dt = mu_density.times.dt
    rdot = time_derivative_values(r, dt)
    gap = nu - rdot ** 2
    if np.any(gap < -max(tol, 1e-6 * np.abs(nu).max())):
        raise InfeasibleTargetError(
            f"pointwise bound violated by {float(-gap.min()):.3g}")
    gap = np.maximum(gap, 0.0)
    rate = np.where(mu > EPS_FLOOR, np.sqrt(gap / np.maximum(mu, EPS_FLOOR)), 0.0)
    # theta(t) = int_0^t rate, accumulated per column
    theta = np.zeros_like(rate)
    theta[1:] = np.cumsum(0.5 * dt * (rate[1:] + rate[:-1]), axis=0)
    a = np.sqrt(2.0) * r * np.cos(theta)
    b = 2.0 * r * np.sin(theta)
    x = mu_density.grid.nodes[None, :]
    pn = (a + b * np.cos(2.0 * np.pi * n * x)) * np.sin(2.0 * np.pi * n * x)
    return PathField(mu_density.times, mu_density.grid, pn)
