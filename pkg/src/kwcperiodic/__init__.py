"""Time-discretized KWC grain-boundary system with a periodic-solution search."""
from .coefficients import (Alpha0Quadratic, ConstantWeight, LinearSource, QuadraticWeight,
                           TanhDoubleWell)
from .convergence import (ConvergenceReport, RefinementPlan, continuous_dependence_probe,
                          mosco_diagnostic, refine_study)
from .errors import ConfigError, NonConvergenceError
from .forcing import Constant, ForcingSchedule, Sinusoid, Tabulated, in_class_Z
from .functionals import (ConstantsReport, ModelParams, SchemeParams, compute_R0,
                          compute_constants, free_energy, gamma_eps, grad_gamma_eps, phi_nu,
                          phi_nu_eps, tau_star)
from .grid import (Grid, divergence, gradient, inner_product, inner_vec, norm,
                   signed_weighted_tv, total_variation, weighted_tv)
from .periodic import (GronwallInput, PeriodicSolution, check_membership, find_periodic,
                       gronwall_bound, period_map, x_sequence)
from .problem import Problem
from .stepper import State, Trajectory, eta_step, run_trajectory, step, theta_step

__version__ = "0.1.0"
