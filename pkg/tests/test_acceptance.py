"""Exit criteria, one test per criterion, each printing a PASS/FAIL line.

Tolerances here are the contract; do not loosen them.
"""
import time

import numpy as np
import pytest

from kwcperiodic import coefficients as coef
from kwcperiodic.convergence import RefinementPlan, mosco_diagnostic, refine_study
from kwcperiodic.forcing import Constant, ForcingSchedule, Sinusoid, in_class_Z
from kwcperiodic.functionals import ModelParams, SchemeParams, compute_R0, compute_constants
from kwcperiodic.grid import Grid, divergence, gradient, inner_product, inner_vec, norm
from kwcperiodic.periodic import GronwallInput, find_periodic, gronwall_bound, x_sequence
from kwcperiodic.problem import Problem
from kwcperiodic.stepper import (EtaObjective, State, ThetaObjective, eta_step, run_trajectory,
                                 step, theta_step)

from instances import random_trajectory_problem, rough_field, smooth_field
from oracles import gronwall_sequence, scalar_eta, scalar_periodic_orbit, scalar_theta

pytestmark = pytest.mark.acceptance

P = ModelParams()
CELL = Grid.uniform((1,), (1.0,))
one = lambda x: np.array([float(x)])
TIMINGS = {}


def vec_norm(grid, w):
    return np.sqrt(inner_vec(grid, w, w))


# 1 ------------------------------------------------------------------------

def test_c01_adjointness(criterion):
    rng = np.random.default_rng(101)
    worst = 0.0
    for grid in (Grid.uniform((64,), (1.0,)), Grid.uniform((32, 32), (1.0, 1.0))):
        for _ in range(100):
            f = rng.normal(size=grid.shape) * rng.uniform(0.1, 10)
            w = rng.normal(size=(grid.dim, *grid.shape)) * rng.uniform(0.1, 10)
            lhs = abs(inner_product(grid, divergence(grid, w), f) + inner_vec(grid, w, gradient(grid, f)))
            worst = max(worst, lhs / (vec_norm(grid, w) * norm(grid, f)))
    criterion(1, worst <= 1e-12, f"max |<div w,f> + <w,grad f>| / (|w||f|) = {worst:.2e} <= 1e-12")


# 2 ------------------------------------------------------------------------

def test_c02_single_cell_closed_forms(criterion):
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(1000):
        m = int(rng.integers(9, 400))
        s = SchemeParams(T=1.0, m=m, eps=rng.uniform(0.01, 0.99), nu=rng.uniform(0.0, 1.0))
        eta0, theta0, f = rng.uniform(-2, 2, 3)
        th = theta_step(CELL, one(eta0), one(theta0), one(f), s, P)[0]
        et = eta_step(CELL, one(eta0), one(th), one(f), s, P)[0]
        worst = max(worst,
                    abs(th - scalar_theta(eta0, theta0, f, s.tau, P.M0, P.delta_star)),
                    abs(et - scalar_eta(eta0, f, s.tau, s.eps)))
    criterion(2, worst <= 1e-10, f"max closed-form error over 1000 draws = {worst:.2e} <= 1e-10")


# 3 ------------------------------------------------------------------------

def test_c03_maximum_principle(criterion):
    rng = np.random.default_rng(103)
    grid = Grid.uniform((64,), (1.0,))
    models = [P, ModelParams(g=coef.TanhDoubleWell(1.5))]
    worst = -np.inf
    for k in range(200):
        model = models[k % 2]
        s = SchemeParams(m=int(4 * (model.g.lipschitz + 1)) + 1 + int(rng.integers(0, 32)),
                         nu=rng.uniform(0.05, 1.0), eps=rng.uniform(0.01, 0.9))
        field = smooth_field if k % 3 else rough_field
        x = State(field(rng, grid, rng.uniform(0.1, 1.5)), field(rng, grid, rng.uniform(0.1, 1.5)))
        u, v = field(rng, grid, rng.uniform(0, 1)), field(rng, grid, rng.uniform(0, 1))
        R0 = compute_R0(np.max(np.abs(u)), np.max(np.abs(v)), x.sup, model)
        assert in_class_Z(u, v, R0, model)
        new, _ = step(grid, x, u, v, s, model)
        worst = max(worst, new.sup - R0)
    criterion(3, worst <= 1e-8, f"max(sup|output| - R0) over 200 steps = {worst:.2e} <= 1e-8")


# 4, 5, 6 ------------------------------------------------------------------

@pytest.fixture(scope="module")
def trajectories():
    rng = np.random.default_rng(104)
    start = time.perf_counter()
    out = []
    for _ in range(50):
        grid, s, p, seed, forcing = random_trajectory_problem(rng, N=64, m=32)
        traj = run_trajectory(grid, seed, forcing, s, p)
        out.append((traj, compute_constants(p, s, grid, forcing.R0)))
    TIMINGS["trajectories"] = time.perf_counter() - start
    return out


def test_c04_energy_inequality(criterion, trajectories):
    worst = -np.inf
    for traj, _ in trajectories:
        for d in traj.diagnostics:
            worst = max(worst, d.dissipation_lhs - d.dissipation_rhs - 1e-6 * max(1.0, d.dissipation_rhs))
    n = sum(len(t.diagnostics) for t, _ in trajectories)
    criterion(4, worst <= 0, f"{n} steps; max(lhs - rhs - 1e-6 max(1, rhs)) = {worst:.2e} <= 0 "
                             f"(50 trajectories built in {TIMINGS['trajectories']:.1f}s)")


def test_c05_discrete_gronwall(criterion, trajectories):
    rng = np.random.default_rng(105)
    worst = -np.inf
    for _ in range(10_000):
        A0, K = rng.uniform(0, 100, 2) * rng.choice([0.0, 1.0], 2, p=[0.1, 0.9])
        Lam = 10 ** rng.uniform(-3, 1)
        tau = 10 ** rng.uniform(-4, np.log10(0.12))
        n = int(rng.integers(1, 80))
        A = gronwall_sequence(rng, A0, Lam, K, tau, n)
        B = gronwall_bound(GronwallInput(A0, Lam, K, tau, n))
        worst = max(worst, np.max((A - B) / np.maximum(B, 1e-300)))
    inside = [x_sequence(t, c) for t, c in trajectories]
    inside = [xs for xs in inside if xs.starts_inside]
    flag_a = all(xs.flag_a for xs in inside)
    ok = worst <= 1e-12 and flag_a and len(inside) > 0
    criterion(5, ok, f"max relative excess over 1e4 sequences = {worst:.2e} <= 1e-12; "
                     f"X-sequence ball bound on {len(inside)}/{len(trajectories)} trajectories starting inside: {flag_a}")


def test_c06_energy_bound(criterion, trajectories):
    margins = []
    for traj, c in trajectories:
        xs = x_sequence(traj, c, rtol=0.0)
        margins.append(np.max(xs.energy_weighted) / c.R2)
    worst = max(margins)
    criterion(6, worst <= 1.0, f"max_i i*tau*F_i / R2 over {len(margins)} trajectories = {worst:.2e} <= 1")


# 7 ------------------------------------------------------------------------

def test_c07_periodic_fixed_point(criterion):
    g = Grid.uniform((32,), (1.0,))
    s = SchemeParams(m=32)
    zero = find_periodic(g, ForcingSchedule.zeros(g, s.m, P), s, P)
    zero_ok = zero.iterations <= 2 and zero.fp_residual <= 1e-12 and all(
        st.sup == 0 for st in zero.trajectory.states)

    sc = SchemeParams(m=32, eps=0.2)
    f = ForcingSchedule.from_waveforms(CELL, sc.T, sc.m, Sinusoid(0.6), Constant(0.0), P)
    sol = find_periodic(CELL, f, sc, P)
    orbit = scalar_periodic_orbit(f.u_steps[:, 0], sc.tau, sc.eps)
    err = np.max(np.abs(sol.trajectory.eta[:, 0] - orbit))
    ok = zero_ok and sol.fp_residual <= 1e-8 and err <= 1e-8
    criterion(7, ok, f"zero forcing: {zero.iterations} iteration(s), residual {zero.fp_residual:.1e}; "
                     f"single cell: residual {sol.fp_residual:.2e} <= 1e-8, orbit error {err:.2e} <= 1e-8")


# 8 ------------------------------------------------------------------------

def test_c08_periodicity(criterion):
    g = Grid.uniform((32,), (1.0,))
    s = SchemeParams(m=32, nu=0.5, eps=0.1)
    prob = Problem(g, P, s, Sinusoid(0.5, 0.1, mode=1), Sinusoid(0.3, 0.0, 1.0, mode=2))
    forcing = prob.forcing()
    assert forcing.in_class_Z
    sol = find_periodic(g, forcing, s, P)
    tol = s.fixed_point_tol(g)
    traj = sol.trajectory
    # X = L2 per component; the sum is at most sqrt(2) times the pair residual
    gap = (norm(g, traj.states[-1].eta - traj.states[0].eta)
           + norm(g, traj.states[-1].theta - traj.states[0].theta))
    criterion(8, gap <= 2 * tol, f"|eta_m - eta_0| + |theta_m - theta_0| = {gap:.2e} <= 2 fp_tol = {2 * tol:.1e}")


# 9 ------------------------------------------------------------------------

def test_c09_epsilon_refinement(criterion):
    c = 0.5
    c_alpha = P.alpha.c
    prob = Problem(CELL, P, SchemeParams(m=32), Constant(c), Constant(0.0))
    rep = refine_study(RefinementPlan.epsilon_only(0.5, 32, levels=8), prob)
    ratios, bounded = [], True
    for lv, sol in zip(rep.levels, rep.solutions):
        err = np.max(np.abs(sol.trajectory.eta - c))
        ratios.append(err / (c * c_alpha * lv.eps))
        bounded &= lv.converged and lv.energy_bounded and lv.tv_bounded
    eps = [lv.eps for lv in rep.levels]
    ok = bounded and max(ratios) <= 1.0 and eps == [2.0**-n for n in range(1, 9)]
    criterion(9, ok, f"max err/(c c_alpha eps_n) over 8 levels = {max(ratios):.4f} <= 1; "
                     f"energy/TV bounded at every level: {bounded}")


# 10 -----------------------------------------------------------------------

def test_c10_mosco_bound(criterion):
    rng = np.random.default_rng(110)
    grid = Grid.uniform((32,), (1.0,))
    n = np.arange(1, 11)
    held = []
    for _ in range(20):
        model = ModelParams(alpha=coef.QuadraticWeight(rng.uniform(0.01, 0.5), rng.uniform(0.1, 3)))
        nu_lim, eps_lim = rng.uniform(0, 0.5), rng.uniform(0, 0.5)
        eta_lim = smooth_field(rng, grid, 1.5)
        rate = rng.uniform(0.3, 0.9)
        eta_seq = [eta_lim + rate**k * rough_field(rng, grid, 1.0) for k in n]
        theta = rough_field(rng, grid, 1.0)
        rep = mosco_diagnostic(grid, eta_seq, eta_lim, theta, nu_lim + rate**n, eps_lim + rate**n,
                               nu_lim, eps_lim, model)
        held.append(rep.all_hold)
    criterion(10, all(held), f"functional-difference bound held at every level in {sum(held)}/20 sequences")


# 11 -----------------------------------------------------------------------

def test_c11_gradient_checks(criterion):
    rng = np.random.default_rng(111)
    grids = [Grid.uniform((24,), (1.0,)), Grid.uniform((6, 5), (1.0, 2.0))]
    worst = 0.0
    for k in range(50):
        g = grids[k % 2]
        s = SchemeParams(nu=rng.uniform(0.0, 1.0), eps=rng.uniform(0.05, 0.9))
        eta0, th0 = rough_field(rng, g, 1.0), rough_field(rng, g, 1.0)
        u, v = rough_field(rng, g, 1.0), rough_field(rng, g, 1.0)
        for obj in (ThetaObjective(g, eta0, th0, v, s, P), EtaObjective(g, eta0, th0, u, s, P)):
            x = rough_field(rng, g, 1.0).ravel()
            d = rng.normal(size=g.size)
            h = 1e-5
            fd = (obj.value(x + h * d) - obj.value(x - h * d)) / (2 * h)
            analytic = g.cell_volume * float(obj.residual(x) @ d)
            worst = max(worst, abs(fd - analytic) / abs(analytic))
    criterion(11, worst <= 1e-6, f"max relative FD error of J_theta and Psi_0 at 50 points = {worst:.2e} <= 1e-6")
