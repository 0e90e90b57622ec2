"""Continuous-time forcing waveforms and their step-averaged schedules."""
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .functionals import compute_R0


@dataclass(frozen=True)
class Constant:
    value: float = 0.0
    mode: int = 0

    kind = "constant"

    def average(self, t0, t1, T):
        return self.value

    @property
    def sup(self):
        return abs(self.value)


@dataclass(frozen=True)
class Sinusoid:
    """``offset + amplitude * sin(2 pi t / T + phase)``."""

    amplitude: float = 1.0
    phase: float = 0.0
    offset: float = 0.0
    mode: int = 0

    kind = "sinusoid"

    def average(self, t0, t1, T):
        w = 2.0 * np.pi / T
        integral = self.amplitude / w * (np.cos(w * t0 + self.phase) - np.cos(w * t1 + self.phase))
        return self.offset + integral / (t1 - t0)

    @property
    def sup(self):
        return abs(self.offset) + abs(self.amplitude)


@dataclass(frozen=True)
class Tabulated:
    """Piecewise-linear samples over one period, extended periodically.

    ``times`` must start at 0 and increase; the value at ``T`` wraps to the
    first sample.
    """

    times: tuple
    values: tuple
    mode: int = 0

    kind = "tabulated"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) != len(self.values) or len(t) < 1:
            raise ValueError("tabulated forcing needs matching 1-D times and values")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("tabulated times must start at 0 and increase strictly")
        object.__setattr__(self, "times", tuple(t))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def average(self, t0, t1, T):
        t = np.append(self.times, T)
        v = np.append(self.values, self.values[0])
        # exact integral of the interpolant over [t0, t1]
        knots = np.unique(np.concatenate([[t0, t1], t[(t > t0) & (t < t1)]]))
        vals = np.interp(knots, t, v)
        return float(trapezoid(vals, knots) / (t1 - t0))

    @property
    def sup(self):
        return float(np.max(np.abs(self.values)))


WAVEFORMS = {"constant": Constant, "sinusoid": Sinusoid, "tabulated": Tabulated}


def make_waveform(descriptor):
    descriptor = dict(descriptor or {"kind": "constant", "value": 0.0})
    kind = descriptor.pop("kind", "constant")
    if kind not in WAVEFORMS:
        raise ValueError(f"unknown forcing kind {kind!r}; choose from {sorted(WAVEFORMS)}")
    try:
        return WAVEFORMS[kind](**descriptor)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {kind} forcing: {exc}") from None


def spatial_profile(grid, mode):
    """``cos(mode * pi * x / L_x)``, constant for mode 0; sup-norm 1 either way."""
    if mode == 0:
        return np.ones(grid.shape)
    x = grid.centers()[0]
    return np.cos(mode * np.pi * x / grid.extents[0])


def in_class_Z(u, v, R0, p):
    """Whether the pair ``(u, v)`` of fields lies in the admissible class for ``R0``."""
    us = float(np.max(np.abs(u))) if np.size(u) else 0.0
    vs = float(np.max(np.abs(v))) if np.size(v) else 0.0
    return bool(
        max(us, vs) <= R0
        and p.g(np.array([-R0]))[0] <= -us
        and us <= p.g(np.array([R0]))[0]
        and p.M0 * R0 >= vs
    )


@dataclass
class ForcingSchedule:
    """Step-averaged forcing pairs; arrays of shape ``(m, *grid.shape)``."""

    u_steps: np.ndarray
    v_steps: np.ndarray
    R0: float
    in_class_Z: bool

    @property
    def m(self):
        return len(self.u_steps)

    @classmethod
    def from_arrays(cls, u_steps, v_steps, p, R0=None, extra_sup=0.0):
        u_steps = np.asarray(u_steps, dtype=float)
        v_steps = np.asarray(v_steps, dtype=float)
        if u_steps.shape != v_steps.shape:
            raise ValueError("u and v schedules must have the same shape")
        if R0 is None:
            us = float(np.max(np.abs(u_steps))) if u_steps.size else 0.0
            vs = float(np.max(np.abs(v_steps))) if v_steps.size else 0.0
            R0 = compute_R0(us, vs, extra_sup, p)
        return cls(u_steps, v_steps, float(R0), in_class_Z(u_steps, v_steps, R0, p))

    @classmethod
    def from_waveforms(cls, grid, T, m, u_wave, v_wave, p, R0=None, extra_sup=0.0):
        """Average each waveform over the ``m`` steps of ``[0, T]``."""
        t = np.linspace(0.0, T, m + 1)

        def schedule(wave):
            prof = spatial_profile(grid, wave.mode)
            return np.stack([wave.average(t[i], t[i + 1], T) * prof for i in range(m)])

        if R0 is None:
            R0 = compute_R0(u_wave.sup, v_wave.sup, extra_sup, p)
        return cls.from_arrays(schedule(u_wave), schedule(v_wave), p, R0=R0)

    @classmethod
    def zeros(cls, grid, m, p, R0=0.0):
        z = np.zeros((m, *grid.shape))
        return cls.from_arrays(z, z.copy(), p, R0=R0)
