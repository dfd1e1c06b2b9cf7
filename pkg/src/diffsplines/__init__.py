"""Geodesics and minimal-acceleration diagnostics on 1-d diffeomorphism flows."""

from .coords import (CotangentState, HILBERT2, HILBERT2_INV, QState,
                     check_constraints, eta_of_q, eta_time_derivative,
                     metric_inner, phi_of_q, project_cotangent,
                     project_tangent, q_of_phi, repair_constraints)
from .experiment import (ExperimentConfig, ExperimentReport,
                         build_reparametrized_geodesic, compute_pairing,
                         run_section7)
from .fisher_rao import (AtomicMeasurePath, GridMeasurePair,
                         check_inequality_condition, check_subgradient,
                         fr_atomic, fr_grid, r_integrand,
                         synthesize_oscillations)
from .functional import (AccelerationReport, acceleration_J0,
                         check_cs_inequality, covariant_accel_flat,
                         nonlocal_U, pi1, pi2, relaxed_F, relaxed_J)
from .geodesic_pq import (ABCCoefficients, PQTrajectory, abc_coefficients,
                          geodesic_rhs, initial_p_from_velocity,
                          integrate_geodesic, metric_speed, projected_flow)
from .kernel import (CLAMPED, PAPER, KernelModel, kernel_eval, kernel_matrix,
                     kernel_oracle_biharmonic, velocity_field)
from .landmark import (FlowReconstruction, LandmarkState, LandmarkTrajectory,
                       integrate_landmarks, jacobian_along, landmark_hamiltonian,
                       landmark_rhs, reconstruct_flow)
from .numerics import (PathField, ScalarField, SpatialGrid, TimeGrid,
                       cumulative_integral, finite_diff_time, ode_solve,
                       quadrature, tail_integral)
from .riccati import (OptimalityReport, RiccatiOutcome, RiccatiProblem,
                      certify_sufficient, compute_w, necessary_condition_test,
                      riccati_solve, riccati_via_linear, sturm_margin,
                      sufficient_bound_check)

__version__ = "0.1.0"
