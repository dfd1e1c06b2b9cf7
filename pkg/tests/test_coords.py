from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import quad

import diffsplines as ds
from diffsplines.coords import (HILBERT2, HILBERT2_INV, eta_values,
                                phi_values, repair_values)
from diffsplines.errors import MonotonicityError
from conftest import constrained_q


def sfield(n, values):
    return ds.ScalarField(ds.SpatialGrid.uniform(n), values)


class TestEtaPhi:
    def test_identity(self):
        q = sfield(101, np.zeros(101))
        assert np.all(ds.eta_of_q(q).values == 1.0)
        assert ds.quadrature(ds.eta_of_q(q)) == pytest.approx(1.0)
        np.testing.assert_allclose(ds.phi_of_q(q).values, np.linspace(0, 1, 101), atol=1e-15)

    def test_eta_roundtrip_against_slope(self):
        # q from the log-derivative of 1 + f' reproduces eta = 1 + f'
        grid = ds.SpatialGrid.uniform(801)
        x = grid.nodes
        f = x ** 2 * (1 - x) ** 2
        fp = 2 * x - 6 * x ** 2 + 4 * x ** 3
        phi = ds.ScalarField(grid, x + f)
        q = ds.q_of_phi(phi)
        eta = ds.eta_of_q(q)
        np.testing.assert_allclose(eta.values, 1 + fp, atol=20 * grid.h ** 2)

    def test_overflow_guard(self):
        q = sfield(51, np.full(51, 2000.0))
        with pytest.raises(OverflowError):
            ds.eta_of_q(q)

    def test_phi_monotone(self, rng):
        q = sfield(201, rng.standard_normal(201))
        assert np.all(np.diff(ds.phi_of_q(q).values) > 0)


class TestQOfPhi:
    def test_identity(self):
        grid = ds.SpatialGrid.uniform(101)
        q = ds.q_of_phi(ds.ScalarField(grid, grid.nodes))
        assert np.abs(q.values).max() < 1e-11

    def test_round_trip_second_order(self):
        errs = []
        for n in (201, 401, 801):
            grid = ds.SpatialGrid.uniform(n)
            q = constrained_q(grid, seed=3)
            back = ds.q_of_phi(ds.phi_of_q(ds.ScalarField(grid, q)))
            errs.append(np.abs(back.values - q).max())
        assert errs[-1] < 1e-3
        for e0, e1 in zip(errs, errs[1:]):
            assert e0 / e1 > 3.0

    def test_nonmonotone_rejected(self):
        grid = ds.SpatialGrid.uniform(51)
        phi = grid.nodes.copy()
        phi[20] = phi[22]
        with pytest.raises(MonotonicityError):
            ds.q_of_phi(ds.ScalarField(grid, phi))

    def test_landmark_flow_q_is_constrained(self):
        model = ds.CLAMPED
        state = ds.LandmarkState([0.25, 0.75], [15.0, -15.0])
        times = ds.TimeGrid.from_step(1.0, 2e-3)
        traj = ds.integrate_landmarks(model, state, times)
        grid = ds.SpatialGrid.uniform(513)
        flow = ds.reconstruct_flow(model, traj, grid)
        q = ds.q_of_phi(ds.ScalarField(grid, flow.phi.values[-1]))
        r1, r2 = ds.check_constraints(q)
        assert abs(r1) < 50 * grid.h ** 2
        assert abs(r2) < 200 * grid.h ** 2


class TestConstraints:
    def test_zero(self):
        assert ds.check_constraints(sfield(101, np.zeros(101))) == (0.0, 0.0)

    def test_linear_profile_against_quadrature_oracle(self):
        grid = ds.SpatialGrid.uniform(2001)
        q = ds.ScalarField(grid, 2 * grid.nodes - 1)
        r1, r2 = ds.check_constraints(q)
        oracle, _ = quad(lambda x: np.exp(x ** 2 - x), 0, 1)
        assert r1 == pytest.approx(0.0, abs=1e-14)
        assert r2 == pytest.approx(oracle - 1.0, abs=1e-6)
        assert r2 == pytest.approx(-0.15113, abs=5e-4)

    def test_sign_flip(self):
        grid = ds.SpatialGrid.uniform(301)
        q = np.sin(2 * np.pi * grid.nodes) + 0.3
        r1a, r2a = ds.check_constraints(ds.ScalarField(grid, q))
        r1b, r2b = ds.check_constraints(ds.ScalarField(grid, -q))
        assert r1b == pytest.approx(-r1a, abs=1e-14)
        assert abs(r2b - r2a) > 1e-3  # second residual is nonlinear

    def test_repair(self, rng):
        grid = ds.SpatialGrid.uniform(257)
        q = ds.ScalarField(grid, rng.standard_normal(257) * 0.5)
        fixed = ds.repair_constraints(q, tol=1e-12)
        r1, r2 = ds.check_constraints(fixed)
        assert abs(r1) < 1e-12 and abs(r2) < 1e-12


class TestMetricAndProjections:
    def setup_state(self, n=1001, seed=1):
        grid = ds.SpatialGrid.uniform(n)
        q = ds.ScalarField(grid, constrained_q(grid, seed=seed))
        return grid, q

    def test_plain_l2_at_identity(self, rng):
        grid = ds.SpatialGrid.uniform(301)
        q = ds.ScalarField(grid, np.zeros(301))
        X = ds.ScalarField(grid, rng.standard_normal(301))
        assert ds.metric_inner(q, X, X) == pytest.approx(
            ds.quadrature(ds.ScalarField(grid, X.values ** 2)), abs=1e-13)

    def test_positivity(self, rng):
        grid, q = self.setup_state()
        X = ds.ScalarField(grid, rng.standard_normal(grid.n))
        assert ds.metric_inner(q, X, X) > 0

    def test_eta_unit_norm(self):
        grid, q = self.setup_state()
        eta = ds.eta_of_q(q)
        assert ds.metric_inner(q, eta, eta) == pytest.approx(1.0, abs=1e-8)

    def test_projection_kills_eta(self):
        grid, q = self.setup_state()
        eta = ds.eta_of_q(q)
        out = ds.project_tangent(q, eta)
        assert np.abs(out.values).max() < 1e-7

    def test_projection_idempotent(self, rng):
        grid, q = self.setup_state()
        f = ds.ScalarField(grid, rng.standard_normal(grid.n))
        once = ds.project_tangent(q, f)
        twice = ds.project_tangent(q, once)
        np.testing.assert_allclose(twice.values, once.values, atol=1e-12)

    def test_tangent_fixed(self):
        grid, q = self.setup_state()
        f = ds.ScalarField(grid, constrained_q(grid, seed=9))
        # make f exactly orthogonal to both constraint directions
        f = ds.project_tangent(q, f)
        again = ds.project_tangent(q, f)
        np.testing.assert_allclose(again.values, f.values, atol=1e-12)

    def test_cotangent_zero_and_idempotent(self, rng):
        grid, q = self.setup_state()
        zero = ds.project_cotangent(q, ds.ScalarField(grid, np.zeros(grid.n)))
        assert np.all(zero.values == 0.0)
        p = ds.ScalarField(grid, rng.standard_normal(grid.n))
        once = ds.project_cotangent(q, p)
        twice = ds.project_cotangent(q, once)
        np.testing.assert_allclose(twice.values, once.values, atol=1e-12)

    def test_adjoint_identity(self, rng):
        # <pi_q f, g>_{L2} = <f, pi*_q g>_{L2} under the trapezoid pairing
        grid, q = self.setup_state()
        w = _w(grid)
        for _ in range(20):
            f = rng.standard_normal(grid.n)
            g = rng.standard_normal(grid.n)
            pf = ds.project_tangent(q, ds.ScalarField(grid, f)).values
            pg = ds.project_cotangent(q, ds.ScalarField(grid, g)).values
            assert np.sum(w * pf * g) == pytest.approx(np.sum(w * f * pg), abs=1e-10)

    def test_complementarity(self, rng):
        grid, q = self.setup_state()
        eta = eta_values(q.values, grid.h)
        phi = phi_values(eta, grid.h)
        f = rng.standard_normal(grid.n)
        resid = f - ds.project_tangent(q, ds.ScalarField(grid, f)).values
        basis = np.column_stack([eta, phi * eta])
        coef, *_ = np.linalg.lstsq(basis, resid, rcond=None)
        assert np.abs(resid - basis @ coef).max() < 1e-10

    def test_gram_identity(self):
        for seed in (2, 5, 11):
            grid = ds.SpatialGrid.uniform(2001)
            q = ds.ScalarField(grid, constrained_q(grid, seed=seed))
            eta = ds.eta_of_q(q)
            phieta = ds.ScalarField(grid, ds.phi_of_q(q).values * eta.values)
            G = np.array([
                [ds.metric_inner(q, eta, eta), ds.metric_inner(q, eta, phieta)],
                [ds.metric_inner(q, phieta, eta), ds.metric_inner(q, phieta, phieta)],
            ])
            np.testing.assert_allclose(G, HILBERT2, atol=1e-7)

    def test_hilbert_matrix_exact_in_rationals(self):
        H = [[Fraction(1), Fraction(1, 2)], [Fraction(1, 2), Fraction(1, 3)]]
        Hinv = [[Fraction(4), Fraction(-6)], [Fraction(-6), Fraction(12)]]
        prod = [[sum(H[i][k] * Hinv[k][j] for k in range(2)) for j in range(2)]
                for i in range(2)]
        assert prod == [[1, 0], [0, 1]]
        np.testing.assert_allclose(HILBERT2 @ HILBERT2_INV, np.eye(2), atol=1e-15)


def _w(grid):
    w = np.full(grid.n, grid.h)
    w[0] = w[-1] = grid.h / 2
    return w


class TestEtaTimeDerivative:
    def test_zero(self):
        grid = ds.SpatialGrid.uniform(51)
        times = ds.TimeGrid.from_step(1.0, 0.1)
        qp = ds.PathField(times, grid, np.tile(constrained_q(grid, 1), (times.m + 1, 1)))
        zero = ds.PathField(times, grid, np.zeros((times.m + 1, grid.n)))
        out = ds.eta_time_derivative(qp, zero)
        assert np.all(out.values == 0.0)

    def test_linear_in_time_closed_form(self):
        grid = ds.SpatialGrid.uniform(401)
        times = ds.TimeGrid.from_step(0.5, 0.05)
        g = np.sin(2 * np.pi * grid.nodes)
        qvals = np.outer(times.times, g)
        qdot = np.tile(g, (times.m + 1, 1))
        out = ds.eta_time_derivative(ds.PathField(times, grid, qvals),
                                     ds.PathField(times, grid, qdot))
        from diffsplines.numerics import cumulative_values
        for k in (0, 5, 10):
            eta = eta_values(qvals[k], grid.h)
            expected = eta * cumulative_values(g, grid.h)
            np.testing.assert_allclose(out.values[k], expected, atol=1e-12)

    def test_matches_finite_differences(self, pq_geodesic):
        qp, _ = pq_geodesic.as_fields()
        qdot = ds.finite_diff_time(qp)
        out = ds.eta_time_derivative(qp, qdot)
        h = pq_geodesic.grid.h
        etas = np.array([eta_values(row, h) for row in pq_geodesic.q_path])
        fd = (etas[2:] - etas[:-2]) / (2 * pq_geodesic.times.dt)
        assert np.abs(out.values[1:-1] - fd).max() < 1e-4
