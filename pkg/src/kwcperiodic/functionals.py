"""Regularized energies, model/scheme parameters, and the a-priori constants."""
from dataclasses import asdict, dataclass, field
import math

import numpy as np

from . import coefficients as coef
from .grid import check_scalar, grad_norm_sq, gradient, norm, weighted_tv


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelParams:
    """Physical constants and coefficient functions of the model."""

    kappa: float = 1.0
    M0: float = 1.0
    nu0: float = 0.0
    delta_star: float = 0.1
    alpha: object = None
    alpha0: object = None
    g: object = None

    def __post_init__(self):
        if self.alpha is None:
            object.__setattr__(self, "alpha", coef.QuadraticWeight(self.delta_star, 1.0))
        if self.alpha0 is None:
            object.__setattr__(self, "alpha0", coef.Alpha0Quadratic(self.delta_star, 1.0))
        if self.g is None:
            object.__setattr__(self, "g", coef.LinearSource(1.0))

    @classmethod
    def from_descriptors(cls, kappa=1.0, M0=1.0, nu0=0.0, delta_star=0.1,
                         alpha=None, alpha0=None, g=None):
        return cls(
            kappa=float(kappa), M0=float(M0), nu0=float(nu0), delta_star=float(delta_star),
            alpha=coef.make_alpha(alpha or {"family": "quadratic", "c": 1.0}, delta_star),
            alpha0=coef.make_alpha0(alpha0 or {"family": "quadratic", "c": 1.0}, delta_star),
            g=coef.make_source(g or {"family": "linear", "slope": 1.0}),
        )

    def describe(self):
        return {
            "kappa": self.kappa, "M0": self.M0, "nu0": self.nu0, "delta_star": self.delta_star,
            "alpha": coef.describe(self.alpha), "alpha0": coef.describe(self.alpha0),
            "g": coef.describe(self.g),
        }

    def violations(self, sweep=8.0, samples=2001):
        """Violated structural assumptions as ``(tag, message)`` pairs."""
        out = []
        if not (self.kappa > 0 and self.M0 > 0 and self.nu0 >= 0):
            out.append(("A1", f"need kappa > 0, M0 > 0, nu0 >= 0; got "
                              f"kappa={self.kappa}, M0={self.M0}, nu0={self.nu0}"))
        x = np.linspace(-sweep, sweep, samples)
        if not 0 < self.delta_star < 1:
            out.append(("A3", f"delta_star must lie in (0, 1), got {self.delta_star}"))
        if abs(float(self.alpha.d1(np.zeros(1))[0])) > 1e-12:
            out.append(("A3", "alpha'(0) must vanish"))
        if np.any(self.alpha.d2(x) < -1e-12):
            out.append(("A3", "alpha'' must be nonnegative"))
        if np.min(self.alpha(x)) < self.delta_star - 1e-12:
            out.append(("A3", "alpha must be bounded below by delta_star"))
        if np.min(self.alpha0(x)) < self.delta_star - 1e-12:
            out.append(("A3", "alpha0 must be bounded below by delta_star"))
        G = self.g.primitive(x)
        if np.min(G) < -1e-10:
            out.append(("A4", "primitive G must be nonnegative"))
        h = 1e-5
        fd = (self.g.primitive(x + h) - self.g.primitive(x - h)) / (2 * h)
        if np.max(np.abs(fd - self.g(x))) > 1e-6 * (1 + np.max(np.abs(self.g(x)))):
            out.append(("A4", "G' does not match g"))
        if not math.isfinite(self.g.lipschitz):
            out.append(("A4", "g must be Lipschitz"))
        if not (self.g(np.array([-1e6]))[0] < 0 < self.g(np.array([1e6]))[0]):
            out.append(("A4", "g must be coercive (g -> -inf at -inf, +inf at +inf)"))
        return out


@dataclass(frozen=True)
class SchemeParams:
    """Time discretization, regularization, and solver controls."""

    T: float = 1.0
    m: int = 32
    nu: float = 0.5
    eps: float = 0.1
    L: float = 1.0
    newton_tol: float = 1e-10
    cg_tol: float = 1e-12
    fp_tol: float = None
    max_newton: int = 60
    max_cg: int = 10_000
    max_picard: int = 500
    relaxation: float = 1.0

    @property
    def tau(self):
        return self.T / self.m

    def fixed_point_tol(self, grid):
        if self.fp_tol is not None:
            return self.fp_tol
        return 1e-8 * math.sqrt(grid.measure)

    def violations(self, p):
        out = []
        if not (self.T > 0 and self.m >= 1):
            out.append(("A5", f"need T > 0 and m >= 1, got T={self.T}, m={self.m}"))
        elif not self.m > 4 * self.T * (p.g.lipschitz + 1):
            out.append(("A5", f"m={self.m} must exceed 4T(|g'|+1) = "
                              f"{4 * self.T * (p.g.lipschitz + 1):g} (tau={self.tau:g} "
                              f">= tau*={tau_star(p):g})"))
        if not 0 < self.nu <= p.nu0 + 1:
            out.append(("A6", f"nu must lie in (0, nu0+1] = (0, {p.nu0 + 1}], got {self.nu}"))
        if not 0 < self.eps < 1:
            out.append(("A6", f"eps must lie in (0, 1), got {self.eps}"))
        if not self.L > 0:
            out.append(("A6", f"free constant L must be positive, got {self.L}"))
        return out


def tau_star(p):
    return 1.0 / (4.0 * (p.g.lipschitz + 1.0))


# ---------------------------------------------------------------------------
# regularized norm and energies
# ---------------------------------------------------------------------------

def gamma_eps(y, eps):
    """``sqrt(eps^2 + |y|^2)`` with the Euclidean norm taken over the leading axis."""
    y = np.asarray(y, dtype=float)
    return np.sqrt(eps**2 + np.sum(y**2, axis=0))


def grad_gamma_eps(y, eps):
    if not eps > 0:
        raise ValueError("grad_gamma_eps needs eps > 0; the eps = 0 subdifferential is set-valued")
    y = np.asarray(y, dtype=float)
    return y / gamma_eps(y, eps)


def phi_nu_eps(grid, eta, theta, nu, eps, p):
    eta = check_scalar(grid, eta, "eta")
    theta = check_scalar(grid, theta, "theta")
    vol = grid.cell_volume
    tv = np.sum(p.alpha(eta) * gamma_eps(gradient(grid, theta), eps)) * vol
    return float(tv + 0.5 * nu**2 * grad_norm_sq(grid, theta)
                 + 0.5 * p.M0 * np.sum(theta**2) * vol)


def phi_nu(grid, eta, theta, nu, p):
    """The unregularized orientation energy: ``alpha(eta)``-weighted TV plus quadratic terms."""
    eta = check_scalar(grid, eta, "eta")
    theta = check_scalar(grid, theta, "theta")
    return (weighted_tv(grid, p.alpha(eta), theta)
            + 0.5 * grad_norm_sq(grid, nu * theta)
            + 0.5 * p.M0 * norm(grid, theta) ** 2)


def free_energy(grid, eta, theta, nu, eps, p):
    eta = check_scalar(grid, eta, "eta")
    return (0.5 * p.kappa**2 * grad_norm_sq(grid, eta)
            + float(np.sum(p.g.primitive(eta)) * grid.cell_volume)
            + phi_nu_eps(grid, eta, theta, nu, eps, p))


# ---------------------------------------------------------------------------
# bounds and constants
# ---------------------------------------------------------------------------

def compute_R0(u_sup, v_sup, extra_sup, p, scan_max=1e8, inflate=1e-9):
    """Smallest admissible sup-norm radius for the given forcing and data bounds.

    Finds the least ``R >= max(u_sup, v_sup, extra_sup, v_sup/M0)`` with
    ``g(-R) <= -u_sup`` and ``g(R) >= u_sup`` (geometric scan, then bisection)
    and inflates it by a relative ``inflate``.
    """
    u_sup, v_sup, extra_sup = (abs(float(x)) for x in (u_sup, v_sup, extra_sup))
    lower = max(u_sup, v_sup, extra_sup, v_sup / p.M0)

    def ok(R):
        return p.g(np.array([-R]))[0] <= -u_sup and p.g(np.array([R]))[0] >= u_sup

    if ok(lower):
        return lower * (1.0 + inflate)
    lo, step = lower, max(lower, 1.0)
    hi = lo + step
    while not ok(hi):
        lo, step = hi, 2.0 * step
        hi = lo + step
        if hi > scan_max:
            raise ValueError(f"no admissible R0 found below {scan_max:g}; is g coercive?")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * hi:
            break
    return hi * (1.0 + inflate)


@dataclass
class ConstantsReport:
    R0: float
    R_star: float
    C1: float
    C2: float
    C3: float
    C4: float
    C5: float
    C6: float
    C7: float
    C8: float
    C9: float
    R1: float
    R2: float
    R3: float
    tau_star: float
    C4_uncapped: float
    absorb_coeff: float
    absorb_coeff_squared_form: float
    sup_norms: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def compute_constants(p, s, grid, R0, nu=None, initial=None, samples=10_001):
    """Evaluate every a-priori constant in closed form.

    ``initial`` is an optional ``(eta0, theta0)`` pair; the initial-energy
    constants ``C8``/``C9`` are evaluated for it (zero pair when omitted).
    ``absorb_coeff`` is the factor of ``|grad eta_{i-1}|^2`` that must stay
    below ``kappa^2/2`` after scaling by ``R_star``; both readings of the
    ``alpha0'`` power are recorded.
    """
    nu = s.nu if nu is None else nu
    d = p.delta_star
    meas = grid.measure
    A = coef.sup_abs(p.alpha, R0, samples)
    A0 = coef.sup_abs(p.alpha0, R0, samples)
    A0p = coef.sup_abs(p.alpha0.d1, R0, samples)
    Ap = coef.sup_abs(p.alpha.d1, R0, samples)
    Gp = p.g.lipschitz
    G0 = abs(float(p.g.primitive(np.zeros(1))[0]))
    Gsup = coef.sup_abs(p.g.primitive, R0, samples)
    k2 = p.kappa**2

    C1 = G0 * meas + R0**2 * meas + 0.5 * R0**2 * meas * Gp + s.L * R0**2 * meas
    R_star = (k2 / (2 * (1 + k2)) / (1 + R0**2) * d**4 / (1 + d**4)
              / (2 * (1 + p.nu0) ** 2) / (1 + A0) / (1 + A0p**2))
    C2 = R_star * meas * (R0**2 / d + (A * A0p * R0 / d**2) ** 2 / (2 * k2))
    C3 = C1 + C2
    C4_raw = min(d / (A0 * A), 1.0 / A0)
    C4 = min(C4_raw, 1.0)
    C5 = min(0.5, s.L, C4 * p.M0 / 2)
    R1 = C3 / C5
    C6 = min(1.0, C4 * R_star)
    C7 = R1 / (2 * C6) + s.T * C3 / C6
    slack = R0**2 * meas * (1 + 1 / (2 * d**2))
    R2 = s.T**2 * slack + C7
    R3 = 2 * R2 / s.T

    if initial is None:
        eta0 = theta0 = grid.zeros()
    else:
        eta0, theta0 = (check_scalar(grid, f) for f in initial)
    grad_eta0 = grad_norm_sq(grid, eta0)
    grad_theta0 = grad_norm_sq(grid, theta0)
    h1 = lambda f, gsq: norm(grid, f) ** 2 + gsq
    C8 = (0.5 * k2 * h1(eta0, grad_eta0) + Gsup * meas + meas * A * s.eps
          + math.sqrt(meas) * A * math.sqrt(grad_theta0)
          + 0.5 * max((1 + p.nu0) ** 2, p.M0) * h1(theta0, grad_theta0))
    C9 = ((norm(grid, eta0) ** 2 + d * norm(grid, theta0) ** 2) / (2 * s.T)
          + C8 + s.T * slack)

    absorb = R_star * (k2 / 2 + nu**2 * A0 / 2 * (A0p * R0 / d**2) ** 2)
    absorb_sq = R_star * (k2 / 2 + nu**2 * A0 / 2 * (A0p**2 * R0 / d**2) ** 2)

    return ConstantsReport(
        R0=R0, R_star=R_star, C1=C1, C2=C2, C3=C3, C4=C4, C5=C5, C6=C6, C7=C7,
        C8=C8, C9=C9, R1=R1, R2=R2, R3=R3, tau_star=tau_star(p),
        C4_uncapped=C4_raw, absorb_coeff=absorb, absorb_coeff_squared_form=absorb_sq,
        sup_norms={"alpha": A, "alpha0": A0, "alpha0_prime": A0p, "alpha_prime": Ap,
                   "g_prime": Gp, "G_at_0": G0, "G": Gsup},
    )

