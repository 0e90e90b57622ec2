"""A complete periodic problem: grid, model, scheme, forcing waveforms, seed."""
from dataclasses import dataclass, replace

import numpy as np

from .forcing import Constant, ForcingSchedule
from .functionals import ModelParams, SchemeParams, compute_R0
from .stepper import State


@dataclass(frozen=True)
class Problem:
    grid: object
    model: ModelParams
    scheme: SchemeParams
    u_wave: object = Constant(0.0)
    v_wave: object = Constant(0.0)
    seed: State = None
    R0_override: float = None

    def seed_state(self):
        if self.seed is None:
            return State(self.grid.zeros(), self.grid.zeros())
        return self.seed.copy()

    @property
    def R0(self):
        if self.R0_override is not None:
            return self.R0_override
        return compute_R0(self.u_wave.sup, self.v_wave.sup, self.seed_state().sup, self.model)

    def forcing(self, m=None):
        m = self.scheme.m if m is None else m
        return ForcingSchedule.from_waveforms(
            self.grid, self.scheme.T, m, self.u_wave, self.v_wave, self.model, R0=self.R0)

    def with_scheme(self, **changes):
        return replace(self, scheme=replace(self.scheme, **changes))

    def violations(self):
        out = list(self.model.violations()) + list(self.scheme.violations(self.model))
        for name, wave in (("u", self.u_wave), ("v", self.v_wave)):
            if not np.isfinite(wave.sup):
                out.append(("A2", f"forcing {name} must be bounded"))
        return out
