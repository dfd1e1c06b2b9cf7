"""Riccati-based optimality tests for sampled momentum-coordinate paths.

Per spatial node the scalar equation dg/dt + g^2/eta = m is integrated by
RK4 (backward from a zero terminal value for certification), with escape
past a large threshold reported as blow-up and the escape time bracketed
by bisection.  A second, independent route solves the equivalent linear
system u' = w/eta, w' = m u and reconstructs g = w/u, turning blow-up into
a zero crossing of u.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _accel
from .coords import eta_values, phi_values, project_cotangent_values
from .fisher_rao import AtomicMeasurePath, fr_atomic
from .functional import atomic_U_values, covariant_accel_flat, eta_probe_series
from .geodesic_pq import PQTrajectory
from .numerics import PathField, cumulative_values, trapezoid_values

G_MAX = 1e8
REFINE_TOL = 1e-6


@dataclass
class RiccatiProblem:
    eta_path: PathField
    rhs: PathField
    boundary: str = "terminal_zero"     # or "initial_value"
    g0: np.ndarray | None = None

    def __post_init__(self):
        if self.eta_path.values.shape != self.rhs.values.shape:
            raise ValueError("coefficient paths must share grids")
        if np.any(self.eta_path.values <= 0.0):
            raise ValueError("eta must be strictly positive")
        if self.boundary not in ("terminal_zero", "initial_value"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.boundary == "initial_value":
            if self.g0 is None:
                raise ValueError("initial_value problems need g0")
            self.g0 = np.asarray(self.g0, dtype=float) * np.ones(self.rhs.grid.n)


@dataclass
class RiccatiOutcome:
    status: str                          # "solved" or "blowup"
    g: PathField | None
    blown: np.ndarray
    blowup_time_per_x: np.ndarray
    max_x_jump: float = float("nan")     # x-continuity diagnostic

    @property
    def solved(self) -> bool:
        return self.status == "solved"


@dataclass
class OptimalityReport:
    w: PathField
    necessary_margins: np.ndarray
    equality_gap: float
    sufficient_status: RiccatiOutcome | None
    verdict: str                         # certified_minimum | not_minimum | inconclusive
    terminal_error: float = float("nan")


def _numpy_riccati_sweep(m_coef, eta, g0, dt, gmax, refine_tol):
    pole_jump = _accel.POLE_JUMP

    def step(g, m0, m1, e0, e1, width):
        mm = 0.5 * (m0 + m1)
        em = 0.5 * (e0 + e1)
        k1 = m0 - g * g / e0
        g2 = g + 0.5 * width * k1
        k2 = mm - g2 * g2 / em
        g3 = g + 0.5 * width * k2
        k3 = mm - g3 * g3 / em
        g4 = g + width * k3
        k4 = m1 - g4 * g4 / e1
        return g + width / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    def escaped(g_old, g_new):
        with np.errstate(invalid="ignore"):
            return (~np.isfinite(g_new) | (np.abs(g_new) > gmax)
                    | ((g_old < -pole_jump) & (g_new > g_old + pole_jump)))

    nsteps, n = m_coef.shape[0] - 1, m_coef.shape[1]
    g = np.full((nsteps + 1, n), np.nan)
    g[0] = g0
    blown = np.zeros(n, dtype=bool)
    t_blow = np.full(n, np.nan)
    cur = g0.astype(float).copy()
    alive = np.ones(n, dtype=bool)
    for k in range(nsteps):
        with np.errstate(all="ignore"):
            nxt = step(cur, m_coef[k], m_coef[k + 1], eta[k], eta[k + 1], dt)
        bad = alive & escaped(cur, nxt)
        for j in np.nonzero(bad)[0]:
            lo, hi = 0.0, dt
            while hi - lo > refine_tol:
                mid = 0.5 * (lo + hi)
                th = mid / dt
                m_mid = (1 - th) * m_coef[k, j] + th * m_coef[k + 1, j]
                e_mid = (1 - th) * eta[k, j] + th * eta[k + 1, j]
                gm = step(cur[j], m_coef[k, j], m_mid, eta[k, j], e_mid, mid)
                if escaped(np.asarray(cur[j]), np.asarray(gm)):
                    hi = mid
                else:
                    lo = mid
            blown[j] = True
            t_blow[j] = k * dt + 0.5 * (lo + hi)
        alive &= ~bad
        if not alive.any():
            break
        cur = np.where(alive, nxt, np.nan)
        g[k + 1, alive] = nxt[alive]
    return g, blown, t_blow


def riccati_solve(problem: RiccatiProblem, gmax: float = G_MAX,
                  refine_tol: float = REFINE_TOL) -> RiccatiOutcome:
    """Nodewise integration with escape detection.

    Terminal problems run backward through the substitution
    g_rev(s) = -g(T - s), which keeps the equation form and is the stable
    direction for the quadratic damping.
    """
    m = problem.rhs.values
    eta = problem.eta_path.values
    dt = problem.rhs.times.dt
    T = problem.rhs.times.t_final
    sweep = _accel.riccati_sweep if _accel.USE_NUMBA else _numpy_riccati_sweep
    if problem.boundary == "terminal_zero":
        g0 = np.zeros(m.shape[1])
        g_rev, blown, s_blow = sweep(m[::-1].copy(), eta[::-1].copy(),
                                     g0, dt, gmax, refine_tol)
        g = -g_rev[::-1]
        t_blow = T - s_blow
    else:
        g, blown, t_blow = sweep(m.copy(), eta.copy(),
                                 problem.g0.astype(float), dt, gmax, refine_tol)
    if blown.any():
        return RiccatiOutcome("blowup", None, blown, t_blow)
    gf = PathField(problem.rhs.times, problem.rhs.grid, g)
    jump = float(np.abs(np.diff(g, axis=1)).max()) if g.shape[1] > 1 else 0.0
    return RiccatiOutcome("solved", gf, blown, t_blow, max_x_jump=jump)


def _numpy_linear_sweep(m_coef, eta, u0, w0, dt):
    nsteps, n = m_coef.shape[0] - 1, m_coef.shape[1]
    us = np.empty((nsteps + 1, n))
    ws = np.empty((nsteps + 1, n))
    us[0], ws[0] = u0, w0
    u, w = u0.astype(float).copy(), w0.astype(float).copy()
    for k in range(nsteps):
        m0, m1 = m_coef[k], m_coef[k + 1]
        e0, e1 = eta[k], eta[k + 1]
        mm, em = 0.5 * (m0 + m1), 0.5 * (e0 + e1)
        k1u = w / e0; k1w = m0 * u
        u2 = u + 0.5 * dt * k1u; w2 = w + 0.5 * dt * k1w
        k2u = w2 / em; k2w = mm * u2
        u3 = u + 0.5 * dt * k2u; w3 = w + 0.5 * dt * k2w
        k3u = w3 / em; k3w = mm * u3
        u4 = u + dt * k3u; w4 = w + dt * k3w
        k4u = w4 / e1; k4w = m1 * u4
        u = u + dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        w = w + dt / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w)
        us[k + 1], ws[k + 1] = u, w
    return us, ws


def riccati_via_linear(problem: RiccatiProblem) -> RiccatiOutcome:
    """Independent route through the linear second-order reduction.

    Blow-up of g corresponds to a zero of u; the crossing time is located
    by interpolation between samples.
    """
    m = problem.rhs.values
    eta = problem.eta_path.values
    dt = problem.rhs.times.dt
    T = problem.rhs.times.t_final
    n = m.shape[1]
    sweep = _accel.riccati_linear_sweep if _accel.USE_NUMBA else _numpy_linear_sweep
    if problem.boundary == "terminal_zero":
        # u(T) = 1, eta u'(T) = 0, integrated in reversed time
        us_r, ws_r = sweep(m[::-1].copy(), eta[::-1].copy(),
                           np.ones(n), np.zeros(n), dt)
        us = us_r[::-1]
        ws = -ws_r[::-1]
    else:
        us, ws = sweep(m.copy(), eta.copy(), np.ones(n),
                       problem.g0.astype(float), dt)
    reversed_time = problem.boundary == "terminal_zero"
    blown = np.zeros(n, dtype=bool)
    t_blow = np.full(n, np.nan)
    order = us[::-1] if reversed_time else us
    for j in range(n):
        col = order[:, j]
        idx = np.nonzero(col <= 0.0)[0]
        if idx.size:
            k = int(idx[0])
            if k == 0:
                s_cross = 0.0
            else:
                frac = col[k - 1] / (col[k - 1] - col[k])
                s_cross = (k - 1 + frac) * dt
            blown[j] = True
            t_blow[j] = T - s_cross if reversed_time else s_cross
    if blown.any():
        return RiccatiOutcome("blowup", None, blown, t_blow)
    g = ws / us
    gf = PathField(problem.rhs.times, problem.rhs.grid, g)
    jump = float(np.abs(np.diff(g, axis=1)).max()) if n > 1 else 0.0
    return RiccatiOutcome("solved", gf, blown, t_blow, max_x_jump=jump)


@dataclass
class SturmReport:
    ordering_holds: bool
    min_gap: float
    window_contained: bool


def sturm_margin(problem_small: RiccatiProblem, problem_big: RiccatiProblem,
                 tol: float = 1e-8) -> SturmReport:
    """Comparison check: larger coefficients live at least as long and stay above."""
    ms, mb = problem_small.rhs.values, problem_big.rhs.values
    es, eb = problem_small.eta_path.values, problem_big.eta_path.values
    if np.any(ms > mb + 1e-12) or np.any(es > eb + 1e-12):
        raise ValueError("need pointwise ordered coefficients")
    if problem_small.boundary != "initial_value" or problem_big.boundary != "initial_value":
        raise ValueError("comparison runs on initial-value problems")
    if np.any(problem_small.g0 > problem_big.g0 + 1e-12):
        raise ValueError("need ordered initial values")
    out_s = riccati_solve(problem_small)
    out_b = riccati_solve(problem_big)
    contained = True
    for j in range(ms.shape[1]):
        if out_s.blown[j]:
            continue
        if out_b.blown[j]:
            contained = False
    min_gap = np.inf
    if out_s.g is not None and out_b.g is not None:
        min_gap = float((out_b.g.values - out_s.g.values).min())
    elif out_b.g is not None:
        gs = _partial_values(problem_small, out_s)
        mask = np.isfinite(gs)
        min_gap = float((out_b.g.values[mask] - gs[mask]).min())
    return SturmReport(bool(min_gap >= -tol), min_gap, contained)


def _partial_values(problem, outcome):
    # recompute the surviving prefix values for blown problems
    m = problem.rhs.values
    eta = problem.eta_path.values
    dt = problem.rhs.times.dt
    g, _, _ = _numpy_riccati_sweep(m, eta, problem.g0.astype(float), dt,
                                   G_MAX, REFINE_TOL)
    return g


def sufficient_bound_check(eta_path: PathField, rhs: PathField):
    """Coarse solvability bound: sup of the negative part over inf eta < pi^2."""
    neg = np.maximum(-rhs.values, 0.0).max()
    ratio = float(neg / eta_path.values.min())
    return ratio, bool(ratio < np.pi ** 2)


def compute_w(traj: PQTrajectory, delta: AtomicMeasurePath | None = None) -> PathField:
    """Riccati right-hand side: eta times the running integral of the
    acceleration direction (sharped) plus the projected defect term."""
    h = traj.grid.h
    nodes = traj.grid.nodes
    accel = covariant_accel_flat(traj).values
    out = np.empty_like(accel)
    for k in range(accel.shape[0]):
        q = traj.q_path[k]
        eta = eta_values(q, h)
        inner = eta * accel[k]
        if delta is not None:
            phi = phi_values(eta, h)
            U = atomic_U_values(delta, q, h, nodes, k)
            inner = inner + project_cotangent_values(U, eta, phi, h)
        out[k] = eta * cumulative_values(inner, h)
    return PathField(traj.times, traj.grid, out)


def _atom_pairing(w: PathField, mu: AtomicMeasurePath) -> float:
    w_at = np.array([np.interp(mu.x0, w.grid.nodes, row) for row in w.values])
    return float(trapezoid_values(mu.f ** 2 * w_at, w.times.dt))


def necessary_condition_test(traj: PQTrajectory, delta,
                             candidate_measures: Sequence[AtomicMeasurePath],
                             tol: float = 1e-9) -> OptimalityReport:
    """First-order necessary test: the defect cost of every candidate must
    dominate its pairing with -w; a strictly negative margin rejects."""
    for mu in candidate_measures:
        if mu.f[0] != 0.0:
            raise ValueError("candidates must vanish at time zero")
    w = compute_w(traj, delta)
    margins = np.empty(len(candidate_measures))
    for i, mu in enumerate(candidate_measures):
        fr = fr_atomic(mu, eta_probe_series(traj, mu.x0))
        margins[i] = fr + _atom_pairing(w, mu)
    if delta is None:
        gap = 0.0
    else:
        gap = fr_atomic(delta, eta_probe_series(traj, delta.x0)) + _atom_pairing(w, delta)
    verdict = "not_minimum" if np.any(margins < -tol) else "inconclusive"
    return OptimalityReport(w, margins, float(gap), None, verdict)


def certify_sufficient(traj: PQTrajectory, delta=None,
                       gap_tol: float = 1e-6) -> OptimalityReport:
    """Sufficient test: a global terminal-zero Riccati solution plus the
    pairing identity for the tested defect certify a minimum."""
    w = compute_w(traj, delta)
    h = traj.grid.h
    eta_rows = np.empty_like(traj.q_path)
    for k in range(eta_rows.shape[0]):
        eta_rows[k] = eta_values(traj.q_path[k], h)
    eta_path = PathField(traj.times, traj.grid, eta_rows)
    problem = RiccatiProblem(eta_path, w, boundary="terminal_zero")
    outcome = riccati_solve(problem)
    if delta is None:
        gap = 0.0
    else:
        gap = fr_atomic(delta, eta_probe_series(traj, delta.x0)) + _atom_pairing(w, delta)
    terminal = float(np.abs(outcome.g.values[-1]).max()) if outcome.solved else float("nan")
    if outcome.solved and abs(gap) <= gap_tol:
        verdict = "certified_minimum"
    else:
        verdict = "inconclusive"
    return OptimalityReport(w, np.empty(0), float(gap), outcome, verdict, terminal)
