"""Refinement studies and variational-convergence diagnostics.

Weak limits cannot be observed on a finite grid.  What is checked instead:
boundedness of the quantities the a-priori estimates bound, Cauchy trends of
strong-norm distances between successive levels, and the explicit
inequality chains behind the Mosco/Gamma arguments.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
import math

import numpy as np

from . import coefficients as coef
from .errors import NonConvergenceError
from .forcing import ForcingSchedule, spatial_profile
from .functionals import compute_R0, compute_constants, free_energy, phi_nu_eps
from .grid import grad_norm_sq, norm, pointwise_grad_norm, total_variation
from .periodic import find_periodic
from .stepper import State, run_trajectory

SUBSEQUENCE_NOTE = ("limits in the compactness arguments are taken along subsequences; "
                    "full level sequences are reported and subsequential limits are not "
                    "distinguished")


@dataclass(frozen=True)
class RefinementPlan:
    nu_sequence: tuple
    eps_sequence: tuple
    m_sequence: tuple

    def __post_init__(self):
        n = len(self.nu_sequence)
        if not (n == len(self.eps_sequence) == len(self.m_sequence)) or n == 0:
            raise ValueError("refinement sequences must be non-empty and of equal length")

    @classmethod
    def default(cls, nu0=0.0, levels=8, m_base=16, m_cap=256):
        n = np.arange(1, levels + 1)
        return cls(tuple(nu0 + 2.0**-n), tuple(2.0**-n),
                   tuple(int(min(m_base * 2**k, m_cap)) for k in n))

    @classmethod
    def epsilon_only(cls, nu, m, levels=8):
        n = np.arange(1, levels + 1)
        return cls((nu,) * levels, tuple(2.0**-n), (m,) * levels)

    def violations(self, p, T):
        out = []
        for k, (nu, eps, m) in enumerate(zip(self.nu_sequence, self.eps_sequence, self.m_sequence)):
            if not 0 < nu <= p.nu0 + 1:
                out.append(("A6", f"level {k}: nu={nu} outside (0, nu0+1]"))
            if not 0 < eps < 1:
                out.append(("A6", f"level {k}: eps={eps} outside (0, 1)"))
            if not m > 4 * T * (p.g.lipschitz + 1):
                out.append(("A5", f"level {k}: m={m} violates m > 4T(|g'|+1)"))
        return out


@dataclass
class LevelResult:
    nu: float
    eps: float
    m: int
    converged: bool
    fp_residual: float = math.nan
    iterations: int = 0
    tv_time_integral: float = math.nan
    terminal_tv: float = math.nan
    max_weighted_energy: float = math.nan
    energies: list = field(default_factory=list)
    R2: float = math.nan
    R3: float = math.nan
    energy_bounded: bool = False
    tv_bounded: bool = False
    error: str = ""


@dataclass
class ConvergenceReport:
    levels: list
    distances: list
    cauchy_trend: bool
    metadata: dict = field(default_factory=dict)
    solutions: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {
            "levels": [asdict(lv) for lv in self.levels],
            "distances": self.distances,
            "cauchy_trend": self.cauchy_trend,
            "metadata": self.metadata,
        }

    def plot_data(self):
        """Two-column ``(level, value)`` series per metric."""
        out = {}
        for key in ("fp_residual", "tv_time_integral", "terminal_tv", "max_weighted_energy"):
            out[key] = [(k, getattr(lv, key)) for k, lv in enumerate(self.levels)]
        out["distance"] = [(k + 1, d) for k, d in enumerate(self.distances)]
        return out


def time_l2_distance(traj_a, traj_b):
    """``L2(0, T; X)`` distance of the piecewise-constant time interpolants."""
    grid = traj_a.grid
    ma, mb = len(traj_a.states) - 1, len(traj_b.states) - 1
    T = traj_a.scheme.T
    M = ma * mb // math.gcd(ma, mb)
    total = 0.0
    for j in range(M):
        ia = j * ma // M + 1
        ib = j * mb // M + 1
        a, b = traj_a.states[ia], traj_b.states[ib]
        total += norm(grid, a.eta - b.eta) ** 2 + norm(grid, a.theta - b.theta) ** 2
    return math.sqrt(total * T / M)


def _solve_level(args):
    problem, nu, eps, m = args
    level_problem = problem.with_scheme(nu=nu, eps=eps, m=m)
    s, p, grid = level_problem.scheme, level_problem.model, level_problem.grid
    forcing = level_problem.forcing()
    c = compute_constants(p, s, grid, forcing.R0, nu)
    lv = LevelResult(nu=nu, eps=eps, m=m, converged=False, R2=c.R2, R3=c.R3)
    try:
        sol = find_periodic(grid, forcing, s, p, seed=level_problem.seed_state(), constants=c)
    except NonConvergenceError as exc:
        lv.error = str(exc)
        lv.fp_residual = exc.residual
        return lv, None
    traj = sol.trajectory
    tvs = np.array([total_variation(grid, st.theta) for st in traj.states])
    F = traj.energies()
    i = np.arange(1, m + 1)
    lv.converged = True
    lv.fp_residual = sol.fp_residual
    lv.iterations = sol.iterations
    lv.tv_time_integral = float(s.tau * np.sum(tvs[1:]))
    lv.terminal_tv = float(tvs[-1])
    lv.energies = F.tolist()
    lv.max_weighted_energy = float(np.max(i * s.tau * F[1:]))
    lv.energy_bounded = bool(lv.max_weighted_energy <= c.R2)
    lv.tv_bounded = bool(np.all(tvs <= c.R3 / p.delta_star))
    return lv, sol


def refine_study(plan, problem, workers=1):
    """Solve the periodic problem at every level of ``plan``.

    Level failures are recorded and the study continues.  ``cauchy_trend``
    flags non-increasing distances between successive converged levels.
    """
    jobs = [(problem, float(nu), float(eps), int(m))
            for nu, eps, m in zip(plan.nu_sequence, plan.eps_sequence, plan.m_sequence)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_level, jobs))
    else:
        results = [_solve_level(j) for j in jobs]
    levels = [lv for lv, _ in results]
    sols = [sol for _, sol in results]
    distances = []
    for a, b in zip(sols[:-1], sols[1:]):
        if a is None or b is None:
            distances.append(math.nan)
        else:
            distances.append(time_l2_distance(a.trajectory, b.trajectory))
    finite = [d for d in distances if math.isfinite(d)]
    trend = all(d2 <= d1 * (1 + 1e-12) + 1e-14 for d1, d2 in zip(finite[:-1], finite[1:]))
    return ConvergenceReport(levels, distances, trend,
                             {"note": SUBSEQUENCE_NOTE, "levels": len(levels)}, sols)


# ---------------------------------------------------------------------------
# Mosco / Gamma diagnostics
# ---------------------------------------------------------------------------

@dataclass
class MoscoReport:
    differences: np.ndarray
    bounds: np.ndarray
    holds: np.ndarray
    liminf_margins: np.ndarray = None

    @property
    def all_hold(self):
        ok = bool(np.all(self.holds))
        if self.liminf_margins is not None:
            ok = ok and bool(np.all(self.liminf_margins >= 0))
        return ok

    def to_dict(self):
        d = {"differences": self.differences.tolist(), "bounds": self.bounds.tolist(),
             "holds": self.holds.tolist(), "all_hold": self.all_hold}
        if self.liminf_margins is not None:
            d["liminf_margins"] = self.liminf_margins.tolist()
        return d


def mosco_bound(grid, eta_n, eta_lim, theta, nu_n, nu_lim, eps_n, eps_lim, alpha_sup, lip):
    grad_abs = pointwise_grad_norm(grid, theta)
    return (abs(eps_n - eps_lim) * alpha_sup * grid.measure
            + lip * norm(grid, eta_n - eta_lim) * norm(grid, eps_lim + grad_abs)
            + abs(nu_n**2 - nu_lim**2) / 2 * grad_norm_sq(grid, theta))


def mosco_diagnostic(grid, eta_seq, eta_lim, theta_probe, nu_seq, eps_seq, nu_lim, eps_lim, p,
                     rtol=1e-12):
    """Compare level functionals against the limit one on a probe field.

    ``theta_probe`` is either one field (the constant recovery sequence) or
    one field per level; in the latter case the lower-bound margins
    ``Phi_n(eta_n, theta_n) - Phi_lim(eta_lim, theta_n) + bound_n`` are also
    reported.
    """
    eta_seq = [np.asarray(e, dtype=float) for e in eta_seq]
    n = len(eta_seq)
    probes = np.asarray(theta_probe, dtype=float)
    per_level = probes.shape == (n, *grid.shape) and probes.shape != grid.shape
    radius = max(float(np.max(np.abs(eta_lim))), *(float(np.max(np.abs(e))) for e in eta_seq))
    lip = coef.sup_abs(p.alpha.d1, radius)
    alpha_sup = max(float(np.max(p.alpha(e))) for e in eta_seq)
    diffs, bounds, margins = np.zeros(n), np.zeros(n), np.zeros(n)
    for k in range(n):
        th = probes[k] if per_level else probes
        phi_n = phi_nu_eps(grid, eta_seq[k], th, nu_seq[k], eps_seq[k], p)
        phi_l = phi_nu_eps(grid, eta_lim, th, nu_lim, eps_lim, p)
        diffs[k] = abs(phi_n - phi_l)
        bounds[k] = mosco_bound(grid, eta_seq[k], eta_lim, th, nu_seq[k], nu_lim,
                                eps_seq[k], eps_lim, alpha_sup, lip)
        margins[k] = phi_n - phi_l + bounds[k]
    holds = diffs <= bounds * (1 + rtol) + rtol * np.maximum(1.0, diffs)
    return MoscoReport(diffs, bounds, holds, margins if per_level else None)


# ---------------------------------------------------------------------------
# continuous dependence
# ---------------------------------------------------------------------------

@dataclass
class DependenceReport:
    deltas: list
    eta_distances: list
    theta_distances: list
    decreasing: bool

    def to_dict(self):
        return asdict(self)


def _h1(grid, f):
    return math.sqrt(norm(grid, f) ** 2 + grad_norm_sq(grid, f))


def continuous_dependence_probe(problem, deltas, mode=1):
    """Perturb the seed and the forcing by smooth fields of sup-norm ``delta``.

    Reports, per ``delta``, the largest step-wise distance from the base
    trajectory (H1 for the order parameter, L2 for the orientation).
    """
    deltas = [float(d) for d in deltas]
    grid, p, s = problem.grid, problem.model, problem.scheme
    prof = spatial_profile(grid, mode) if grid.shape[0] > 1 else np.ones(grid.shape)
    base_f = problem.forcing()
    seed = problem.seed_state()
    dmax = max(deltas, default=0.0)
    us = float(np.max(np.abs(base_f.u_steps))) + dmax
    vs = float(np.max(np.abs(base_f.v_steps))) + dmax
    R0 = compute_R0(us, vs, seed.sup + dmax, p)
    base = run_trajectory(grid, seed, ForcingSchedule.from_arrays(
        base_f.u_steps, base_f.v_steps, p, R0=R0), s, p)
    eta_d, theta_d = [], []
    for d in deltas:
        f = ForcingSchedule.from_arrays(base_f.u_steps + d * prof, base_f.v_steps + d * prof,
                                        p, R0=R0)
        x0 = State(seed.eta + d * prof, seed.theta + d * prof)
        traj = run_trajectory(grid, x0, f, s, p)
        eta_d.append(max(_h1(grid, a.eta - b.eta) for a, b in zip(traj.states, base.states)))
        theta_d.append(max(norm(grid, a.theta - b.theta) for a, b in zip(traj.states, base.states)))
    order = np.argsort(deltas)[::-1]
    e = np.array(eta_d)[order]
    t = np.array(theta_d)[order]
    decreasing = bool(np.all(np.diff(e) <= 1e-14) and np.all(np.diff(t) <= 1e-14))
    return DependenceReport(deltas, eta_d, theta_d, decreasing)
