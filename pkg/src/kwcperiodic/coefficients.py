"""Built-in coefficient families for the mobility weights and the source term.

Every family is addressable by name plus keyword parameters, e.g.
``{"family": "quadratic", "c": 1.0}``.  Weights are offset by ``delta_star``
so the lower bound required of them holds by construction.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq


@dataclass(frozen=True)
class QuadraticWeight:
    """``floor + (c/2) * eta**2``; convex, even, minimum ``floor`` at 0."""

    floor: float
    c: float = 1.0
    name: str = field(default="quadratic", init=False)

    def __call__(self, x):
        return self.floor + 0.5 * self.c * np.square(x)

    def d1(self, x):
        return self.c * np.asarray(x, dtype=float)

    def d2(self, x):
        return np.full(np.shape(x), float(self.c))

    def params(self):
        return {"c": self.c}


@dataclass(frozen=True)
class Alpha0Quadratic:
    """``floor + c * eta**2``, the orientation-mobility weight."""

    floor: float
    c: float = 1.0
    name: str = field(default="quadratic", init=False)

    def __call__(self, x):
        return self.floor + self.c * np.square(x)

    def d1(self, x):
        return 2.0 * self.c * np.asarray(x, dtype=float)

    def d2(self, x):
        return np.full(np.shape(x), 2.0 * self.c)

    def params(self):
        return {"c": self.c}


@dataclass(frozen=True)
class ConstantWeight:
    """Constant weight ``floor + c`` (with ``c >= 0``)."""

    floor: float
    c: float = 0.0
    name: str = field(default="constant", init=False)

    def __call__(self, x):
        return np.full(np.shape(x), self.floor + self.c)

    def d1(self, x):
        return np.zeros(np.shape(x))

    def d2(self, x):
        return np.zeros(np.shape(x))

    def params(self):
        return {"c": self.c}


@dataclass(frozen=True)
class LinearSource:
    """``g(eta) = slope * eta`` with primitive ``G = slope * eta**2 / 2``."""

    slope: float = 1.0
    name: str = field(default="linear", init=False)

    def __call__(self, x):
        return self.slope * np.asarray(x, dtype=float)

    def d1(self, x):
        return np.full(np.shape(x), float(self.slope))

    def d2(self, x):
        return np.zeros(np.shape(x))

    def primitive(self, x):
        return 0.5 * self.slope * np.square(x)

    @property
    def lipschitz(self):
        return abs(self.slope)

    def params(self):
        return {"slope": self.slope}


@dataclass(frozen=True)
class TanhDoubleWell:
    """Lipschitz double-well source ``g(eta) = eta - depth * tanh(eta)``.

    For ``depth > 1`` the primitive has two wells at ``+-eta_w`` where
    ``eta_w = depth * tanh(eta_w)``; it is shifted so its minimum is zero.
    """

    depth: float = 2.0
    name: str = field(default="double_well", init=False)

    def __post_init__(self):
        if self.depth > 1.0:
            well = brentq(lambda s: s - self.depth * np.tanh(s), 1e-12, self.depth + 1.0)
        else:
            well = 0.0
        object.__setattr__(self, "_shift", 0.5 * well**2 - self.depth * _log_cosh(well))

    def __call__(self, x):
        return np.asarray(x, dtype=float) - self.depth * np.tanh(x)

    def d1(self, x):
        return 1.0 - self.depth / np.cosh(x) ** 2

    def d2(self, x):
        return 2.0 * self.depth * np.tanh(x) / np.cosh(x) ** 2

    def primitive(self, x):
        return 0.5 * np.square(x) - self.depth * _log_cosh(x) - self._shift

    @property
    def lipschitz(self):
        return max(1.0, abs(self.depth - 1.0))

    def params(self):
        return {"depth": self.depth}


def _log_cosh(x):
    x = np.abs(np.asarray(x, dtype=float))
    return x + np.log1p(np.exp(-2.0 * x)) - np.log(2.0)


WEIGHT_FAMILIES = {"quadratic": QuadraticWeight, "constant": ConstantWeight}
ALPHA0_FAMILIES = {"quadratic": Alpha0Quadratic, "constant": ConstantWeight}
SOURCE_FAMILIES = {"linear": LinearSource, "double_well": TanhDoubleWell}


def _build(table, role, descriptor, **fixed):
    descriptor = dict(descriptor)
    name = descriptor.pop("family", None)
    if name not in table:
        raise ValueError(f"unknown {role} family {name!r}; choose from {sorted(table)}")
    try:
        return table[name](**fixed, **descriptor)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {role} family {name!r}: {exc}") from None


def make_alpha(descriptor, delta_star):
    return _build(WEIGHT_FAMILIES, "alpha", descriptor, floor=delta_star)


def make_alpha0(descriptor, delta_star):
    return _build(ALPHA0_FAMILIES, "alpha0", descriptor, floor=delta_star)


def make_source(descriptor):
    return _build(SOURCE_FAMILIES, "g", descriptor)


def describe(coef):
    return {"family": coef.name, **coef.params()}


def sup_abs(fn, radius, samples=10_001):
    """``max |fn|`` over ``[-radius, radius]`` by dense sampling (endpoints included)."""
    if radius <= 0:
        return float(np.abs(fn(np.zeros(1)))[0])
    x = np.concatenate([np.linspace(-radius, radius, samples), [0.0]])
    return float(np.max(np.abs(fn(x))))
