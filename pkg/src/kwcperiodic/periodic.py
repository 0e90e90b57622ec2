"""Period map, the invariant class, fixed-point search, and discrete Gronwall bounds."""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import NonConvergenceError
from .functionals import free_energy
from .grid import grad_norm_sq, norm, total_variation
from .stepper import State, run_trajectory


def pair_distance(grid, a, b):
    """Discrete L2 distance between two states, both components together."""
    return math.sqrt(norm(grid, a.eta - b.eta) ** 2 + norm(grid, a.theta - b.theta) ** 2)


def period_map(grid, x0, forcing, s, p):
    return run_trajectory(grid, x0, forcing, s, p).states[-1]


# ---------------------------------------------------------------------------
# invariant class
# ---------------------------------------------------------------------------

@dataclass
class MembershipReport:
    sup_norm: float
    weighted_l2: float
    energy_bound: float
    sup_margin: float
    weighted_l2_margin: float
    energy_margin: float

    @property
    def member(self):
        return self.sup_margin >= 0 and self.weighted_l2_margin >= 0 and self.energy_margin >= 0

    @property
    def violated(self):
        names = ("sup_norm", "weighted_l2", "energy_bound")
        margins = (self.sup_margin, self.weighted_l2_margin, self.energy_margin)
        return [n for n, mg in zip(names, margins) if mg < 0]


def x_value(grid, state, R_star, kappa, tau):
    """``|eta|^2 + R_star |theta|^2 + kappa^2 tau |grad eta|^2``."""
    return (norm(grid, state.eta) ** 2 + R_star * norm(grid, state.theta) ** 2
            + kappa**2 * tau * grad_norm_sq(grid, state.eta))


def check_membership(grid, x, c, nu, tau, p, tol=0.0):
    """Margins of the three defining inequalities (positive means satisfied).

    ``tol`` inflates every bound, to absorb solver tolerances.
    """
    sup = x.sup
    xl2 = x_value(grid, x, c.R_star, p.kappa, tau)
    en = (p.kappa**2 * grad_norm_sq(grid, x.eta) + p.delta_star * total_variation(grid, x.theta)
          + nu**2 * grad_norm_sq(grid, x.theta))
    return MembershipReport(
        sup_norm=sup, weighted_l2=xl2, energy_bound=en,
        sup_margin=c.R0 + tol - sup,
        weighted_l2_margin=c.R1 * (1 + tol) - xl2,
        energy_margin=c.R3 * (1 + tol) - en,
    )


# ---------------------------------------------------------------------------
# fixed point
# ---------------------------------------------------------------------------

@dataclass
class PeriodicSolution:
    trajectory: object
    fp_residual: float
    iterations: int
    membership: bool
    residual_history: list = field(default_factory=list)
    relaxation_history: list = field(default_factory=list)
    max_iterate_sup: float = 0.0

    @property
    def periodicity_gap(self):
        traj = self.trajectory
        return pair_distance(traj.grid, traj.states[0], traj.states[-1])


def find_periodic(grid, forcing, s, p, relaxation=None, seed=None, constants=None,
                  min_relaxation=1.0 / 16, max_iter=None, tol=None):
    """Damped Picard iteration on the period map.

    ``x <- (1 - lam) x + lam S(x)`` until ``|S(x) - x| <= tol`` in the pair
    L2 norm.  ``lam`` halves whenever the residual grows, down to
    ``min_relaxation``.  Raises :class:`NonConvergenceError` carrying the
    residual history when ``max_iter`` is exhausted.
    """
    lam = s.relaxation if relaxation is None else relaxation
    if not 0 < lam <= 1:
        raise ValueError(f"relaxation must lie in (0, 1], got {lam}")
    tol = s.fixed_point_tol(grid) if tol is None else tol
    max_iter = s.max_picard if max_iter is None else max_iter
    x = seed.copy() if seed is not None else State(grid.zeros(), grid.zeros())
    x.step_index = 0
    history, lams = [], []
    max_sup = x.sup
    for it in range(1, max_iter + 1):
        traj = run_trajectory(grid, x, forcing, s, p)
        Sx = traj.states[-1]
        res = pair_distance(grid, Sx, x)
        history.append(res)
        if res <= tol:
            member = True
            if constants is not None:
                member = check_membership(grid, x, constants, s.nu, s.tau, p, tol=1e-8).member
            return PeriodicSolution(traj, res, it, member, history, lams, max_sup)
        if len(history) > 1 and res > history[-2] and lam > min_relaxation:
            lam = max(lam / 2, min_relaxation)
        lams.append(lam)
        x = State((1 - lam) * x.eta + lam * Sx.eta, (1 - lam) * x.theta + lam * Sx.theta, 0)
        max_sup = max(max_sup, x.sup)
    raise NonConvergenceError(
        f"Picard iteration did not reach {tol:.2e} in {max_iter} iterations "
        f"(last residual {history[-1]:.3e})", residual=history[-1], history=history)


# ---------------------------------------------------------------------------
# Gronwall and the X sequence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GronwallInput:
    A0: float
    Lambda: float
    K: float
    tau: float
    n: int
    tau_star: float = math.inf

    def __post_init__(self):
        if not (self.A0 >= 0 and self.K >= 0 and self.Lambda > 0 and self.n >= 0):
            raise ValueError("need A0 >= 0, K >= 0, Lambda > 0, n >= 0")
        if not 0 < self.tau < self.tau_star:
            raise ValueError(f"tau must lie in (0, {self.tau_star}), got {self.tau}")


def gronwall_bound(gi):
    """Closed-form bound ``B_1..B_n`` for ``(A_i - A_{i-1})/(2 tau) + Lambda A_i <= K``."""
    i = np.arange(1, gi.n + 1)
    # q^i and 1 - q^i via log1p/expm1: the naive form cancels when tau*Lambda is small
    log_q = -i * np.log1p(2.0 * gi.tau * gi.Lambda)
    return np.exp(log_q) * gi.A0 - gi.K / gi.Lambda * np.expm1(log_q)


@dataclass
class XSequenceReport:
    values: np.ndarray
    energy_weighted: np.ndarray
    starts_inside: bool
    stays_inside: bool
    energy_bounded: bool
    recurrence_excess: np.ndarray

    @property
    def flag_a(self):
        return (not self.starts_inside) or self.stays_inside

    @property
    def flag_b(self):
        return (not self.starts_inside) or self.energy_bounded


def x_sequence(traj, c, s=None, rtol=1e-9):
    """The ``X_i`` sequence of a trajectory and the bound checks built on it.

    ``recurrence_excess[i-1]`` is ``(X_i - X_{i-1})/(2 tau) + C5 X_i - C3``,
    which is nonpositive whenever the one-step Gronwall recurrence holds.
    """
    s = s or traj.scheme
    grid, p = traj.grid, traj.model
    X = np.array([x_value(grid, st, c.R_star, p.kappa, s.tau) for st in traj.states])
    i = np.arange(1, len(X))
    F = np.array([free_energy(grid, st.eta, st.theta, s.nu, s.eps, p) for st in traj.states[1:]])
    weighted = i * s.tau * F
    excess = (X[1:] - X[:-1]) / (2 * s.tau) + c.C5 * X[1:] - c.C3
    return XSequenceReport(
        values=X,
        energy_weighted=weighted,
        starts_inside=bool(X[0] <= c.R1),
        stays_inside=bool(np.all(X <= c.R1 * (1 + rtol))),
        energy_bounded=bool(np.all(weighted <= c.R2 * (1 + rtol))),
        recurrence_excess=excess,
    )
