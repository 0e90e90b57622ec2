import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kwcperiodic.errors import NonConvergenceError
from kwcperiodic.forcing import Constant, ForcingSchedule, Sinusoid
from kwcperiodic.functionals import ModelParams, SchemeParams, compute_constants
from kwcperiodic.grid import Grid, grad_norm_sq, norm, total_variation
from kwcperiodic.periodic import (GronwallInput, check_membership, find_periodic, gronwall_bound,
                                  pair_distance, period_map, x_sequence, x_value)
from kwcperiodic.stepper import State, run_trajectory

from instances import random_trajectory_problem, smooth_field
from oracles import gronwall_sequence, scalar_periodic_orbit

P = ModelParams()
CELL = Grid.uniform((1,), (1.0,))
one = lambda x: np.array([float(x)])


# ---------------------------------------------------------------------------
# membership
# ---------------------------------------------------------------------------

def _constants(R0=0.8, g=None, s=None):
    g = g or Grid.uniform((2,), (1.0,))
    return compute_constants(P, s or SchemeParams(), g, R0)


def test_zero_state_is_member():
    g = Grid.uniform((2,), (1.0,))
    c = _constants(g=g)
    assert check_membership(g, State(g.zeros(), g.zeros()), c, 0.5, 1 / 32, P).member


def test_large_state_violates_sup_bullet():
    g = Grid.uniform((2,), (1.0,))
    c = _constants(g=g)
    rep = check_membership(g, State(np.full(2, c.R0 + 1), g.zeros()), c, 0.5, 1 / 32, P)
    assert not rep.member and rep.violated[0] == "sup_norm"


def test_membership_margins_two_cell_hand_evaluation():
    g = Grid.uniform((2,), (1.0,))  # h = 1/2, vol = 1/2, gradient = (diff/h, 0)
    c = _constants(g=g)
    nu, tau = 0.5, 1 / 32
    x = State(np.array([0.1, 0.3]), np.array([-0.2, 0.2]))
    eta_l2 = (0.01 + 0.09) / 2
    th_l2 = (0.04 + 0.04) / 2
    grad_eta2 = (0.2 / 0.5) ** 2 / 2
    grad_th2 = (0.4 / 0.5) ** 2 / 2
    tv = (0.4 / 0.5) / 2
    rep = check_membership(g, x, c, nu, tau, P)
    assert rep.sup_margin == pytest.approx(c.R0 - 0.3)
    assert rep.weighted_l2_margin == pytest.approx(c.R1 - (eta_l2 + c.R_star * th_l2 + tau * grad_eta2))
    assert rep.energy_margin == pytest.approx(c.R3 - (grad_eta2 + 0.1 * tv + nu**2 * grad_th2))


def test_x_value_two_cell_trajectory_by_hand():
    g = Grid.uniform((2,), (1.0,))
    s = SchemeParams(m=16)
    c = _constants(g=g, s=s)
    f = ForcingSchedule.from_arrays(np.full((16, 2), 0.2), np.zeros((16, 2)), P, R0=c.R0)
    traj = run_trajectory(g, State(np.array([0.1, 0.3]), np.array([-0.2, 0.2])), f, s, P)
    xs = x_sequence(traj, c)
    for st_, X in zip(traj.states, xs.values):
        e, t = st_.eta, st_.theta
        hand = (e @ e / 2 + c.R_star * (t @ t) / 2 + s.tau * ((e[1] - e[0]) / 0.5) ** 2 / 2)
        assert X == pytest.approx(hand, rel=1e-13)


# ---------------------------------------------------------------------------
# period map
# ---------------------------------------------------------------------------

def test_period_map_zero():
    g = Grid.uniform((8,), (1.0,))
    s = SchemeParams(m=16)
    out = period_map(g, State(g.zeros(), g.zeros()), ForcingSchedule.zeros(g, 16, P), s, P)
    assert out.sup == 0


def test_self_mapping_on_random_members():
    rng = np.random.default_rng(20)
    g = Grid.uniform((12,), (1.0,))
    s = SchemeParams(m=12, nu=0.5, eps=0.1)
    R0 = 0.9
    c = compute_constants(P, s, g, R0)
    for _ in range(100):
        x = State(smooth_field(rng, g, R0), smooth_field(rng, g, R0))
        rep = check_membership(g, x, c, s.nu, s.tau, P)
        if not rep.member:  # project radially onto the class
            x = State(0.5 * x.eta, 0.5 * x.theta)
        assert check_membership(g, x, c, s.nu, s.tau, P).member
        u = np.stack([smooth_field(rng, g, 0.6) for _ in range(s.m)])
        v = np.stack([smooth_field(rng, g, 0.6) for _ in range(s.m)])
        f = ForcingSchedule.from_arrays(u, v, P, R0=R0)
        assert f.in_class_Z
        y = period_map(g, x, f, s, P)
        assert check_membership(g, y, c, s.nu, s.tau, P, tol=1e-8).member


def test_period_map_continuity_trend():
    rng = np.random.default_rng(21)
    grid, s, p, seed, forcing = random_trajectory_problem(rng, N=32, m=16)
    base = period_map(grid, seed, forcing, s, p)
    d = smooth_field(rng, grid, 0.1)
    dists = []
    for k in range(5):
        x = State(seed.eta + 2.0**-k * d, seed.theta - 2.0**-k * d)
        dists.append(pair_distance(grid, period_map(grid, x, forcing, s, p), base))
    assert all(b <= 0.5 * a * (1 + 1e-3) for a, b in zip(dists, dists[1:]))


# ---------------------------------------------------------------------------
# fixed point
# ---------------------------------------------------------------------------

def test_find_periodic_zero_forcing():
    g = Grid.uniform((16,), (1.0,))
    s = SchemeParams(m=16)
    sol = find_periodic(g, ForcingSchedule.zeros(g, 16, P), s, P)
    assert sol.fp_residual == 0 and sol.iterations == 1 and sol.membership
    assert all(st_.sup == 0 for st_ in sol.trajectory.states)


@pytest.mark.parametrize("c", [0.2, 0.5, -0.3])
def test_find_periodic_constant_forcing_is_steady_state(c):
    s = SchemeParams(m=32, eps=0.1)
    f = ForcingSchedule.from_waveforms(CELL, s.T, s.m, Constant(c), Constant(0.0), P)
    sol = find_periodic(CELL, f, s, P, tol=1e-13)
    target = c / (1 + 0.1)
    # sub-steps stop once |residual| <= newton_tol, so the discrete steady
    # state is only resolved to newton_tol / (1 + c_alpha eps)
    for st_ in sol.trajectory.states:
        assert st_.eta[0] == pytest.approx(target, abs=s.newton_tol)
        assert st_.theta[0] == 0


def test_find_periodic_sinusoid_matches_orbit():
    s = SchemeParams(m=32, eps=0.2)
    f = ForcingSchedule.from_waveforms(CELL, s.T, s.m, Sinusoid(0.6, 0.3), Constant(0.0), P)
    sol = find_periodic(CELL, f, s, P)
    assert sol.fp_residual <= s.fixed_point_tol(CELL)
    assert abs(sol.trajectory.states[-1].eta[0] - sol.trajectory.states[0].eta[0]) <= 1e-8
    orbit = scalar_periodic_orbit(f.u_steps[:, 0], s.tau, s.eps)
    eta = sol.trajectory.eta[:, 0]
    assert np.max(np.abs(eta - orbit)) <= 2e-8


def test_find_periodic_reports_nonconvergence():
    s = SchemeParams(m=32)
    f = ForcingSchedule.from_waveforms(CELL, s.T, s.m, Sinusoid(0.6), Constant(0.0), P)
    with pytest.raises(NonConvergenceError) as info:
        find_periodic(CELL, f, s, P, max_iter=2)
    assert len(info.value.history) == 2 and info.value.residual == info.value.history[-1]
    with pytest.raises(ValueError):
        find_periodic(CELL, f, s, P, relaxation=0.0)


def test_damped_iteration_and_membership():
    rng = np.random.default_rng(22)
    grid, s, p, seed, forcing = random_trajectory_problem(rng, N=16, m=16)
    c = compute_constants(p, s, grid, forcing.R0)
    sol = find_periodic(grid, forcing, s, p, relaxation=0.5, constants=c)
    assert sol.fp_residual <= s.fixed_point_tol(grid)
    assert sol.periodicity_gap == pytest.approx(sol.fp_residual)
    assert sol.membership
    assert sol.max_iterate_sup <= forcing.R0 + s.newton_tol
    assert all(l == 0.5 for l in sol.relaxation_history)


def test_relaxation_halves_on_residual_increase():
    """An artificial map whose undamped residual oscillates exercises the halving rule."""
    g = Grid.uniform((4,), (1.0,))
    s = SchemeParams(m=16, max_picard=80)
    rng = np.random.default_rng(23)
    forcing = ForcingSchedule.from_arrays(rng.uniform(-0.5, 0.5, (16, 4)),
                                          rng.uniform(-0.5, 0.5, (16, 4)), P)
    sol = find_periodic(g, forcing, s, P, relaxation=1.0)
    hist = sol.residual_history
    if any(b > a for a, b in zip(hist, hist[1:])):
        assert min(sol.relaxation_history) < 1.0
    assert min(sol.relaxation_history, default=1.0) >= 1 / 16


# ---------------------------------------------------------------------------
# Gronwall
# ---------------------------------------------------------------------------

def test_gronwall_examples():
    gi = GronwallInput(A0=2.0, Lambda=0.5, K=0.0, tau=0.1, n=5)
    np.testing.assert_allclose(gronwall_bound(gi), 2.0 / 1.1 ** np.arange(1, 6), rtol=1e-15)
    assert np.all(gronwall_bound(GronwallInput(0.0, 1.0, 0.0, 0.1, 7)) == 0)
    with pytest.raises(ValueError):
        GronwallInput(1.0, 0.0, 1.0, 0.1, 3)
    with pytest.raises(ValueError):
        GronwallInput(1.0, 1.0, 1.0, 0.2, 3, tau_star=0.125)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 100), st.floats(1e-3, 10), st.floats(0, 100), st.floats(1e-4, 0.12),
       st.integers(1, 60), st.integers(0, 2**32 - 1))
def test_gronwall_dominates_recurrence(A0, Lam, K, tau, n, seed):
    A = gronwall_sequence(np.random.default_rng(seed), A0, Lam, K, tau, n)
    B = gronwall_bound(GronwallInput(A0, Lam, K, tau, n))
    assert np.all(A <= B * (1 + 1e-12) + 1e-300)


def test_x_sequence_zero_trajectory():
    g = Grid.uniform((8,), (1.0,))
    s = SchemeParams(m=16)
    traj = run_trajectory(g, State(g.zeros(), g.zeros()), ForcingSchedule.zeros(g, 16, P), s, P)
    c = compute_constants(P, s, g, 1.0)  # zero data lie in the class for every R0 > 0
    xs = x_sequence(traj, c)
    assert np.all(xs.values == 0) and xs.flag_a and xs.flag_b


def test_energy_bound_degenerates_at_zero_radius():
    """With R0 = 0 every constant vanishes, but the energy keeps its eps*alpha(0)|Omega| floor."""
    g = Grid.uniform((8,), (1.0,))
    s = SchemeParams(m=16)
    traj = run_trajectory(g, State(g.zeros(), g.zeros()), ForcingSchedule.zeros(g, 16, P), s, P)
    c = compute_constants(P, s, g, 0.0)
    xs = x_sequence(traj, c)
    assert c.R2 == 0 and xs.flag_a and not xs.flag_b
    floor = s.eps * P.delta_star * g.measure
    np.testing.assert_allclose(xs.energy_weighted, np.arange(1, 17) * s.tau * floor, rtol=1e-13)


def test_x_sequence_recurrence_and_gronwall_dominance():
    rng = np.random.default_rng(24)
    for _ in range(4):
        grid, s, p, seed, forcing = random_trajectory_problem(rng, N=32, m=16)
        traj = run_trajectory(grid, seed, forcing, s, p)
        c = compute_constants(p, s, grid, forcing.R0)
        xs = x_sequence(traj, c)
        assert xs.starts_inside and xs.flag_a and xs.flag_b
        assert np.all(xs.recurrence_excess <= 1e-9 * max(1.0, c.C3))
        B = gronwall_bound(GronwallInput(xs.values[0], c.C5, c.C3, s.tau, s.m))
        assert np.all(xs.values[1:] <= B * (1 + 1e-9))
