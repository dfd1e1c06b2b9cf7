"""Grids, quadrature, differentiation, and fixed-step ODE integration.

Everything downstream (kernel evaluation, flow reconstruction, the
constrained momentum system, the optimality tests) is built on the uniform
grids and the trapezoid-consistent integral operators defined here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUpError, NonFiniteFieldError


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform nodes on [0, 1]."""

    n: int
    nodes: np.ndarray = field(repr=False)
    h: float

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"need at least 3 nodes, got {self.n}")
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.shape != (self.n,):
            raise ValueError("nodes shape does not match n")
        if nodes[0] != 0.0 or nodes[-1] != 1.0 or np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must increase strictly from 0 to 1")
        if abs(self.h * (self.n - 1) - 1.0) > 1e-12:
            raise ValueError("spacing inconsistent with node count")

    @classmethod
    def uniform(cls, n: int) -> "SpatialGrid":
        nodes = np.linspace(0.0, 1.0, n)
        return cls(n=n, nodes=nodes, h=1.0 / (n - 1))


@dataclass(frozen=True)
class TimeGrid:
    """m fixed steps covering [0, t_final]."""

    m: int
    t_final: float
    dt: float

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("need at least one step")
        if self.t_final <= 0 or self.dt <= 0:
            raise ValueError("horizon and step must be positive")
        if abs(self.dt * self.m - self.t_final) > 1e-9 * self.t_final:
            raise ValueError("dt inconsistent with m and t_final")

    @classmethod
    def from_step(cls, t_final: float, dt: float) -> "TimeGrid":
        m = int(round(t_final / dt))
        return cls(m=m, t_final=t_final, dt=t_final / m)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.m + 1)


@dataclass
class ScalarField:
    """Grid samples of a function of x."""

    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n,):
            raise ValueError("values shape does not match grid")
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteFieldError("field has non-finite entries")

    @classmethod
    def from_function(cls, grid: SpatialGrid, f) -> "ScalarField":
        return cls(grid, f(grid.nodes))


@dataclass
class PathField:
    """Time-indexed family of grid functions, one row per time sample."""

    times: TimeGrid
    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.times.m + 1, self.grid.n):
            raise ValueError("values shape does not match time/space grids")
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteFieldError("path has non-finite entries")


def quadrature(f, rule: str = "trapezoid") -> float:
    """Integrate a ScalarField (or raw samples on a uniform grid) over [0, 1].

    Simpson requires an odd node count and is exact on cubics; trapezoid is
    the default everywhere because it is the rule the cumulative operators
    are built from.
    """
    if isinstance(f, ScalarField):
        v, h = f.values, f.grid.h
    else:
        v = np.asarray(f, dtype=float)
        h = 1.0 / (v.size - 1)
    if not np.all(np.isfinite(v)):
        raise NonFiniteFieldError("cannot integrate non-finite samples")
    if rule == "trapezoid":
        return float(trapezoid_values(v, h))
    if rule == "simpson":
        if v.size % 2 == 0:
            raise ValueError("Simpson needs an odd number of nodes")
        return float(h / 3.0 * (v[0] + v[-1] + 4.0 * v[1:-1:2].sum() + 2.0 * v[2:-1:2].sum()))
    raise ValueError(f"unknown rule {rule!r}")


def trapezoid_values(v: np.ndarray, h: float) -> float:
    return h * (v.sum() - 0.5 * (v[0] + v[-1]))


def cumulative_values(v: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(v)
    out[0] = 0.0
    np.cumsum((v[1:] + v[:-1]) * (0.5 * h), out=out[1:])
    return out


def cumulative_integral(f: ScalarField) -> ScalarField:
    """x -> integral of f from 0 to x, by trapezoid accumulation."""
    return ScalarField(f.grid, cumulative_values(f.values, f.grid.h))


def tail_integral(f: ScalarField) -> ScalarField:
    """x -> integral of f from x to 1; total minus cumulative by construction."""
    cum = cumulative_values(f.values, f.grid.h)
    return ScalarField(f.grid, cum[-1] - cum)


def ode_solve(state0, rhs, times: TimeGrid, method: str = "rk4") -> np.ndarray:
    """Fixed-step explicit integration of ``d state/dt = rhs(t, state)``.

    Returns the (m+1, dim) trajectory. A NaN/Inf state aborts with
    BlowUpError carrying the first bad time, which the Riccati module uses
    as blow-up detection.
    """
    y = np.atleast_1d(np.asarray(state0, dtype=float)).copy()
    out = np.empty((times.m + 1, y.size))
    out[0] = y
    dt = times.dt
    t = 0.0
    if method == "rk4":
        for k in range(times.m):
            k1 = np.asarray(rhs(t, y))
            k2 = np.asarray(rhs(t + 0.5 * dt, y + 0.5 * dt * k1))
            k3 = np.asarray(rhs(t + 0.5 * dt, y + 0.5 * dt * k2))
            k4 = np.asarray(rhs(t + dt, y + dt * k3))
            y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += dt
            if not np.all(np.isfinite(y)):
                raise BlowUpError(f"integration blew up at t={t:.6g}", time=t)
            out[k + 1] = y
    elif method == "midpoint":
        for k in range(times.m):
            k1 = np.asarray(rhs(t, y))
            y = y + dt * np.asarray(rhs(t + 0.5 * dt, y + 0.5 * dt * k1))
            t += dt
            if not np.all(np.isfinite(y)):
                raise BlowUpError(f"integration blew up at t={t:.6g}", time=t)
            out[k + 1] = y
    else:
        raise ValueError(f"unknown method {method!r}")
    return out


def time_derivative_values(values: np.ndarray, dt: float) -> np.ndarray:
    """Second-order time derivative of sampled rows (central + one-sided ends)."""
    if values.shape[0] < 3:
        raise ValueError("need at least 3 time samples")
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - values[:-2]) / (2.0 * dt)
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dt)
    out[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * dt)
    return out


def finite_diff_time(path: PathField) -> PathField:
    """Time derivative of a path, exact on rows quadratic in t."""
    return PathField(path.times, path.grid,
                     time_derivative_values(path.values, path.times.dt))


def spatial_derivative_values(v: np.ndarray, h: float) -> np.ndarray:
    """Second-order spatial derivative along the last axis."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 1:-1] = (v[..., 2:] - v[..., :-2]) / (2.0 * h)
    out[..., 0] = (-3.0 * v[..., 0] + 4.0 * v[..., 1] - v[..., 2]) / (2.0 * h)
    out[..., -1] = (3.0 * v[..., -1] - 4.0 * v[..., -2] + v[..., -3]) / (2.0 * h)
    return out


def spatial_second_derivative_values(v: np.ndarray, h: float) -> np.ndarray:
    """Three-point second derivative along the last axis, one-sided at ends."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 1:-1] = (v[..., 2:] - 2.0 * v[..., 1:-1] + v[..., :-2]) / h ** 2
    out[..., 0] = (2.0 * v[..., 0] - 5.0 * v[..., 1] + 4.0 * v[..., 2] - v[..., 3]) / h ** 2
    out[..., -1] = (2.0 * v[..., -1] - 5.0 * v[..., -2] + 4.0 * v[..., -3] - v[..., -4]) / h ** 2
    return out
