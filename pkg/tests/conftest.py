import numpy as np
import pytest

import diffsplines as ds
from diffsplines.coords import repair_values


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def warm_jit():
    """Touch every compiled loop once so timed tests see steady-state cost."""
    model = ds.CLAMPED
    state = ds.LandmarkState([0.25, 0.75], [1.0, -1.0])
    times = ds.TimeGrid.from_step(0.01, 1e-3)
    traj = ds.integrate_landmarks(model, state, times)
    grid = ds.SpatialGrid.uniform(17)
    ds.reconstruct_flow(model, traj, grid)
    ds.jacobian_along(model, traj, 0.5)
    q0 = ds.ScalarField(grid, np.zeros(grid.n))
    p0 = ds.ScalarField(grid, np.zeros(grid.n))
    ds.integrate_geodesic(p0, q0, times, reproject=False)
    ds.integrate_geodesic(p0, q0, times, reproject=True)
    ones = np.ones((times.m + 1, grid.n))
    prob = ds.RiccatiProblem(ds.PathField(times, grid, ones),
                             ds.PathField(times, grid, 0.0 * ones))
    ds.riccati_solve(prob)
    ds.riccati_via_linear(prob)
    return True


def constrained_q(grid: ds.SpatialGrid, seed: int = 0,
                  amplitude: float = 0.8) -> np.ndarray:
    """A smooth exactly-repaired constrained coordinate for property tests."""
    gen = np.random.default_rng(seed)
    x = grid.nodes
    q = np.zeros(grid.n)
    for k in range(1, 4):
        q += amplitude / k * (gen.standard_normal() * np.sin(k * np.pi * x)
                              + gen.standard_normal() * np.cos(k * np.pi * x))
    return repair_values(q, grid.h, tol=1e-14, max_steps=8)


@pytest.fixture(scope="session")
def pq_geodesic():
    """Shared moderate-resolution trajectory of the momentum system."""
    model = ds.CLAMPED
    grid = ds.SpatialGrid.uniform(257)
    state = ds.LandmarkState([0.25, 0.75], [15.0, -15.0])
    v0 = ds.ScalarField(grid, ds.velocity_field(model, state, grid.nodes))
    p0 = ds.initial_p_from_velocity(v0)
    q0 = ds.ScalarField(grid, np.zeros(grid.n))
    times = ds.TimeGrid.from_step(1.0, 1e-3)
    return ds.integrate_geodesic(p0, q0, times, reproject=False, drift_tol=1e-4)
