"""Time discretization for the transport problem."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid with k intervals on [t0, t_f]."""

    t_f: float
    k: int
    t0: float = 0.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("need at least one time interval")
        if not self.t_f > self.t0:
            raise ValueError("final time must exceed initial time")

    @property
    def dt(self) -> float:
        return (self.t_f - self.t0) / self.k

    @property
    def nodes(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.k + 1)
