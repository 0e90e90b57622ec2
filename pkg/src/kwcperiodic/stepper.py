"""One semi-implicit step of the regularized system and trajectory runs.

Each step solves two strictly convex minimizations in sequence: the
orientation update (coefficients frozen at the previous order parameter),
then the order-parameter update against the new orientation.  Both are
solved by damped Newton iterations whose linear systems go to a
Jacobi-preconditioned conjugate gradient.

Swapping the sub-step order changes results by O(tau) on smooth data; the
order here is the one under which each sub-step is a decoupled convex solve.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from .errors import NonConvergenceError
from .functionals import compute_R0, free_energy, gamma_eps
from .grid import check_scalar, gradient, norm


@dataclass
class State:
    eta: np.ndarray
    theta: np.ndarray
    step_index: int = 0

    def copy(self):
        return State(self.eta.copy(), self.theta.copy(), self.step_index)

    @property
    def sup(self):
        return float(max(np.max(np.abs(self.eta)), np.max(np.abs(self.theta))))


@dataclass
class StepDiagnostics:
    eta_residual: float
    theta_residual: float
    energy_before: float
    energy_after: float
    dissipation_lhs: float
    dissipation_rhs: float
    dissipation_lhs_alpha: float
    linf_eta: float
    linf_theta: float
    newton_iterations: tuple = (0, 0)


@dataclass
class Trajectory:
    grid: object
    model: object
    scheme: object
    forcing: object
    states: list
    diagnostics: list = field(default_factory=list)

    @property
    def R0(self):
        return self.forcing.R0

    @property
    def eta(self):
        return np.stack([s.eta for s in self.states])

    @property
    def theta(self):
        return np.stack([s.theta for s in self.states])

    def energies(self):
        s = self.scheme
        return np.array([free_energy(self.grid, st.eta, st.theta, s.nu, s.eps, self.model)
                         for st in self.states])


# ---------------------------------------------------------------------------
# objectives: value, nodal gradient, nodal Hessian
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _assembly(grid):
    """Fixed sparsity pattern of ``diag(c) + sum_ab D_a^T diag(h_ab) D_b`` on ``grid``.

    Returns ``(A, indices, indptr, diag_pos)`` where ``A`` maps the stacked
    cell weights ``h_ab`` linearly onto the CSR data array, so assembling a
    Hessian is one sparse mat-vec instead of a chain of sparse products.
    """
    n, dim = grid.size, grid.dim
    D = grid.gradient_matrix.tocsr()
    D.eliminate_zeros()
    comps = [D[a * n:(a + 1) * n] for a in range(dim)]
    empty = np.empty(0, dtype=np.int64)
    rows, cols, vals, slots = [empty], [empty], [np.empty(0)], [empty]
    for a, Da in enumerate(comps):
        ka = np.repeat(np.arange(n), np.diff(Da.indptr))
        for b, Db in enumerate(comps):
            start, count = Db.indptr[ka], np.diff(Db.indptr)[ka]
            for off in range(int(count.max(initial=0))):
                m = count > off
                j = start[m] + off
                rows.append(Da.indices[m])
                cols.append(Db.indices[j])
                vals.append(Da.data[m] * Db.data[j])
                slots.append((a * dim + b) * n + ka[m])
    diag = np.arange(n)
    r = np.concatenate(rows + [diag]).astype(np.int64)
    c = np.concatenate(cols + [diag]).astype(np.int64)
    pattern = sp.csr_matrix((np.ones(r.size), (r, c)), shape=(n, n))
    pattern.sum_duplicates()
    keys = np.repeat(np.arange(n), np.diff(pattern.indptr)) * n + pattern.indices
    pos = np.searchsorted(keys, r[:-n] * n + c[:-n])
    A = sp.csr_matrix((np.concatenate(vals), (pos, np.concatenate(slots))),
                      shape=(keys.size, dim * dim * n))
    return A, pattern.indices, pattern.indptr, np.searchsorted(keys, diag * (n + 1))


class _Objective:
    """Discrete convex objective on a grid.

    ``value`` returns the integrated objective; ``residual`` its gradient
    divided by the cell volume (the strong-form equation residual), and
    ``hessian`` the matching sparse nodal Hessian.
    """

    def __init__(self, grid):
        self.grid = grid
        self.D = grid.gradient_matrix

    def _grad(self, x):
        return (self.D @ x).reshape(self.grid.dim, -1)

    def _assemble(self, diag, blocks):
        """CSR matrix ``diag(diag) + sum_ab D_a^T diag(blocks[a][b]) D_b``."""
        A, indices, indptr, diag_pos = _assembly(self.grid)
        n = self.grid.size
        h = np.concatenate([np.broadcast_to(blocks[a][b], n)
                            for a in range(self.grid.dim) for b in range(self.grid.dim)])
        data = A @ h
        data[diag_pos] += diag
        return sp.csr_matrix((data, indices.copy(), indptr.copy()), shape=(n, n))


class ThetaObjective(_Objective):
    """Orientation sub-problem with weights frozen at the previous order parameter."""

    def __init__(self, grid, eta_prev, theta_prev, v, s, p):
        super().__init__(grid)
        self.theta_prev = theta_prev.ravel()
        self.v = v.ravel()
        self.mass = p.alpha0(eta_prev).ravel() / s.tau
        self.weight = p.alpha(eta_prev).ravel()
        self.nu2 = s.nu**2
        self.eps = s.eps
        self.M0 = p.M0

    def value(self, x):
        y = self._grad(x)
        dx = x - self.theta_prev
        cells = (0.5 * self.mass * dx**2 + self.weight * gamma_eps(y, self.eps)
                 + 0.5 * self.nu2 * np.sum(y**2, axis=0) + 0.5 * self.M0 * x**2 - self.v * x)
        return float(np.sum(cells) * self.grid.cell_volume)

    def residual(self, x):
        y = self._grad(x)
        flux = (self.weight / gamma_eps(y, self.eps) + self.nu2) * y
        return (self.mass * (x - self.theta_prev) + self.M0 * x - self.v
                + self.D.T @ flux.ravel())

    def hessian(self, x):
        y = self._grad(x)
        gam = gamma_eps(y, self.eps)
        dim = self.grid.dim
        blocks = [[None] * dim for _ in range(dim)]
        for a in range(dim):
            for b in range(dim):
                h = -self.weight * y[a] * y[b] / gam**3
                if a == b:
                    h = h + self.weight / gam + self.nu2
                blocks[a][b] = h
        return self._assemble(self.mass + self.M0, blocks)


class EtaObjective(_Objective):
    """Order-parameter sub-problem against a fixed orientation field."""

    def __init__(self, grid, eta_prev, theta_new, u, s, p):
        super().__init__(grid)
        self.eta_prev = eta_prev.ravel()
        self.u = u.ravel()
        self.inv_tau = 1.0 / s.tau
        self.k2 = p.kappa**2
        self.gam = gamma_eps(gradient(grid, theta_new), s.eps).ravel()
        self.p = p

    def value(self, x):
        y = self._grad(x)
        p = self.p
        cells = (0.5 * self.inv_tau * (x - self.eta_prev) ** 2 + 0.5 * self.k2 * np.sum(y**2, axis=0)
                 + p.g.primitive(x) + p.alpha(x) * self.gam - self.u * x)
        return float(np.sum(cells) * self.grid.cell_volume)

    def residual(self, x):
        p = self.p
        return (self.inv_tau * (x - self.eta_prev) + self.k2 * (self.D.T @ (self.D @ x))
                + p.g(x) + p.alpha.d1(x) * self.gam - self.u)

    def hessian(self, x):
        p = self.p
        diag = self.inv_tau + p.g.d1(x) + p.alpha.d2(x) * self.gam
        dim = self.grid.dim
        blocks = [[self.k2 if a == b else 0.0 for b in range(dim)] for a in range(dim)]
        return self._assemble(diag, blocks)


def newton_minimize(obj, x0, tol, max_iter, cg_tol, max_cg, what="sub-step"):
    """Damped Newton with Armijo backtracking; stop on ``max|residual| <= tol``.

    Returns ``(x, residual_sup, iterations)``.
    """
    x = np.array(x0, dtype=float)
    vol = obj.grid.cell_volume
    f = obj.value(x)
    r = obj.residual(x)
    res = float(np.max(np.abs(r)))
    for it in range(max_iter + 1):
        if res <= tol:
            return x, res, it
        if it == max_iter:
            break
        H = obj.hessian(x)
        inv_diag = 1.0 / H.diagonal()
        jacobi = LinearOperator(H.shape, matvec=lambda z: inv_diag * z.ravel(), dtype=float)
        d, _ = cg(H, -r, rtol=cg_tol, atol=0.0, maxiter=max_cg, M=jacobi)
        slope = vol * float(r @ d)
        if slope >= 0:  # inexact solve lost descent; fall back to preconditioned gradient
            d = -inv_diag * r
            slope = vol * float(r @ d)
        t = 1.0
        slack = 1e-13 * (1.0 + abs(f))
        for _ in range(50):
            x_new = x + t * d
            f_new = obj.value(x_new)
            if f_new <= f + 1e-4 * t * slope + slack:
                break
            t *= 0.5
        else:
            break
        x, f = x_new, f_new
        r = obj.residual(x)
        res = float(np.max(np.abs(r)))
    raise NonConvergenceError(f"Newton failed on the {what} (residual {res:.3e})", residual=res)


# ---------------------------------------------------------------------------
# sub-steps and steps
# ---------------------------------------------------------------------------

def _solve(obj, x0, s, what):
    return newton_minimize(obj, x0.ravel(), s.newton_tol, s.max_newton, s.cg_tol, s.max_cg, what)


def theta_step(grid, eta_prev, theta_prev, v_i, s, p, return_info=False):
    eta_prev = check_scalar(grid, eta_prev, "eta_prev")
    theta_prev = check_scalar(grid, theta_prev, "theta_prev")
    v_i = check_scalar(grid, v_i, "v_i")
    obj = ThetaObjective(grid, eta_prev, theta_prev, v_i, s, p)
    x, res, its = _solve(obj, theta_prev, s, "orientation sub-step")
    x = x.reshape(grid.shape)
    return (x, res, its) if return_info else x


def eta_step(grid, eta_prev, theta_new, u_i, s, p, return_info=False):
    eta_prev = check_scalar(grid, eta_prev, "eta_prev")
    theta_new = check_scalar(grid, theta_new, "theta_new")
    u_i = check_scalar(grid, u_i, "u_i")
    obj = EtaObjective(grid, eta_prev, theta_new, u_i, s, p)
    x, res, its = _solve(obj, eta_prev, s, "order-parameter sub-step")
    x = x.reshape(grid.shape)
    return (x, res, its) if return_info else x


def energy_slack(grid, R0, s, p):
    """Per-step additive slack of the discrete energy inequality."""
    return s.tau * R0**2 * grid.measure * (1.0 + 1.0 / (2.0 * p.delta_star**2))


def step(grid, state, u_i, v_i, s, p, R0=None, energy_before=None):
    """Advance ``state`` by one step; returns ``(new_state, diagnostics)``.

    ``R0`` enters only the diagnostics (right side of the energy inequality);
    when omitted it is derived from the sup-norms of the data.
    """
    if R0 is None:
        R0 = compute_R0(np.max(np.abs(u_i)), np.max(np.abs(v_i)), state.sup, p)
    theta, th_res, th_it = theta_step(grid, state.eta, state.theta, v_i, s, p, return_info=True)
    eta, et_res, et_it = eta_step(grid, state.eta, theta, u_i, s, p, return_info=True)

    if energy_before is None:
        energy_before = free_energy(grid, state.eta, state.theta, s.nu, s.eps, p)
    energy_after = free_energy(grid, eta, theta, s.nu, s.eps, p)
    d_eta = norm(grid, eta - state.eta) ** 2 / (2 * s.tau)
    d_theta0 = norm(grid, np.sqrt(p.alpha0(state.eta)) * (theta - state.theta)) ** 2 / (2 * s.tau)
    d_theta = norm(grid, np.sqrt(p.alpha(state.eta)) * (theta - state.theta)) ** 2 / (2 * s.tau)
    diag = StepDiagnostics(
        eta_residual=et_res,
        theta_residual=th_res,
        energy_before=energy_before,
        energy_after=energy_after,
        dissipation_lhs=d_eta + d_theta0 + energy_after,
        dissipation_rhs=energy_before + energy_slack(grid, R0, s, p),
        dissipation_lhs_alpha=d_eta + d_theta + energy_after,
        linf_eta=float(np.max(np.abs(eta))),
        linf_theta=float(np.max(np.abs(theta))),
        newton_iterations=(th_it, et_it),
    )
    return State(eta, theta, state.step_index + 1), diag


def run_trajectory(grid, state0, forcing, s, p):
    if forcing.m != s.m:
        raise ValueError(f"forcing has {forcing.m} steps, scheme expects m={s.m}")
    state = State(check_scalar(grid, state0.eta, "eta0").copy(),
                  check_scalar(grid, state0.theta, "theta0").copy(), 0)
    traj = Trajectory(grid, p, s, forcing, [state])
    energy = free_energy(grid, state.eta, state.theta, s.nu, s.eps, p)
    for i in range(s.m):
        state, diag = step(grid, state, forcing.u_steps[i], forcing.v_steps[i], s, p,
                           R0=forcing.R0, energy_before=energy)
        energy = diag.energy_after
        traj.states.append(state)
        traj.diagnostics.append(diag)
    return traj
