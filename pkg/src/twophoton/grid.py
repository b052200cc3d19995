"""Uniform time grid with its conjugate angular-frequency axis.

Units are ps for time and rad/ps for angular frequency throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Periodic grid of ``n`` samples spaced ``dt`` around ``t_center``.

    Samples sit at ``t_k = t_center + (k - n/2) * dt``. Frequencies are kept in
    FFT order (``numpy.fft.fftfreq``), so ``omega[0] == 0``.
    """

    n: int
    dt: float
    t_center: float = 0.0

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 8 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two >= 8, got {n!r}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not np.isfinite(self.t_center):
            raise ValueError("t_center must be finite")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "t_center", float(self.t_center))

    @cached_property
    def t(self) -> np.ndarray:
        t = self.t_center + (np.arange(self.n) - self.n // 2) * self.dt
        t.flags.writeable = False
        return t

    @property
    def t_start(self) -> float:
        return self.t_center - (self.n // 2) * self.dt

    @property
    def span(self) -> float:
        return self.n * self.dt

    @property
    def d_omega(self) -> float:
        return 2 * np.pi / (self.n * self.dt)

    @property
    def omega_nyquist(self) -> float:
        return np.pi / self.dt

    @cached_property
    def omega(self) -> np.ndarray:
        """Angular frequencies in FFT order."""
        w = self.d_omega * np.fft.fftfreq(self.n, d=1.0 / self.n)
        w.flags.writeable = False
        return w

    @cached_property
    def omega_sorted(self) -> np.ndarray:
        w = np.fft.fftshift(self.omega)
        w.flags.writeable = False
        return w


def make_grid(n: int, dt: float, t_center: float = 0.0) -> TimeGrid:
    return TimeGrid(n, dt, t_center)
