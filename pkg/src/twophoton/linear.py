"""Single-mode linear propagators: loss, dispersion and temporal phase modulation.

Each operator acts on every stored pair that contains its mode, along the axis
(or both axes, for a same-mode pair) belonging to that mode. Loss is a
deterministic amplitude decay; no noise is injected.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import TimeGrid
from .state import (
    TIME,
    BiphotonAmplitude,
    ModeParams,
    TwoPhotonState,
    forward_transform,
    inverse_transform,
)

_AXIS_NAMES = {"first": 0, "second": 1, 0: 0, 1: 1}


def _axis(axis) -> int:
    try:
        return _AXIS_NAMES[axis]
    except (KeyError, TypeError):
        raise ValueError(f"axis must be 0/'first' or 1/'second', got {axis!r}") from None


@dataclass(frozen=True)
class DispersionOp:
    """Propagate ``mode`` over ``z`` metres; ``params=None`` uses the state's own mode."""

    mode: str
    z: float
    params: ModeParams | None = None

    def __post_init__(self):
        if not (np.isfinite(self.z) and self.z >= 0):
            raise ValueError(f"propagation length must be >= 0, got {self.z!r}")


@dataclass(frozen=True, eq=False)
class PhaseModOp:
    """Lumped multiplier exp(i * modulation(t) * length) * aperture(t) on ``mode``."""

    mode: str
    modulation: np.ndarray
    length: float = 1.0
    aperture: np.ndarray | None = None

    def __post_init__(self):
        if not (np.isfinite(self.length) and self.length >= 0):
            raise ValueError(f"modulator length must be >= 0, got {self.length!r}")
        mod = np.array(self.modulation, dtype=float)
        if mod.ndim != 1 or not np.all(np.isfinite(mod)):
            raise ValueError("modulation must be a finite 1-D sampled profile")
        object.__setattr__(self, "modulation", mod)
        if self.aperture is not None:
            ap = np.array(self.aperture, dtype=float)
            if ap.shape != mod.shape:
                raise ValueError("aperture and modulation must share the grid")
            if np.any(ap < 0) or np.any(ap > 1):
                raise ValueError("aperture values must lie in [0, 1]")
            object.__setattr__(self, "aperture", ap)

    def multiplier(self) -> np.ndarray:
        m = np.exp(1j * self.modulation * self.length)
        if self.aperture is not None:
            m = m * self.aperture
        return m


def rect_window(grid: TimeGrid, width: float, center: float = 0.0) -> np.ndarray:
    return (np.abs(grid.t - center) <= width / 2).astype(float)


def gaussian_window(grid: TimeGrid, width: float, center: float = 0.0) -> np.ndarray:
    """exp(-((t - center)/width)^2), peak 1."""
    return np.exp(-(((grid.t - center) / width) ** 2))


def aperture_window(grid: TimeGrid, shape: str, width: float | None, center: float = 0.0):
    if shape in ("ideal", None) or width is None or np.isinf(width):
        return None
    if not width > 0:
        raise ValueError("aperture width must be positive")
    if shape == "rect":
        return rect_window(grid, width, center)
    if shape == "gaussian":
        return gaussian_window(grid, width, center)
    raise ValueError(f"unknown aperture shape {shape!r}")


def time_lens(
    grid: TimeGrid,
    mode: str,
    focal: float,
    t0: float = 0.0,
    aperture_width: float | None = None,
    window: str = "ideal",
) -> PhaseModOp:
    """Quadratic modulator exp[i focal (t - t0)^2 / 2]; ``focal`` = k0 Delta n2 l [rad/ps^2].

    The aperture window is centred on the lens delay ``t0``.
    """
    return PhaseModOp(
        mode,
        modulation=focal * (grid.t - t0) ** 2 / 2,
        length=1.0,
        aperture=aperture_window(grid, window, aperture_width, t0),
    )


def spectral_factor(params: ModeParams, omega: np.ndarray, z: float) -> np.ndarray:
    """exp[(-alpha/2) z + i (beta1 Omega + beta2 Omega^2 / 2) z]."""
    return np.exp(
        -0.5 * params.alpha * z + 1j * (params.beta1 * omega + 0.5 * params.beta2 * omega**2) * z
    )


def _require_time(amp: BiphotonAmplitude) -> None:
    if amp.domain != (TIME, TIME):
        raise ValueError("linear elements act on time-domain amplitudes")


def _apply_spectral(data: np.ndarray, grid: TimeGrid, factor: np.ndarray, axis: int) -> np.ndarray:
    shape = [1, 1]
    shape[axis] = grid.n
    spec = forward_transform(data, grid, axis=axis) * factor.reshape(shape)
    return inverse_transform(spec, grid, axis=axis)


def _apply_pointwise(data: np.ndarray, mult: np.ndarray, axis: int) -> np.ndarray:
    return data * (mult[:, None] if axis == 0 else mult[None, :])


def map_mode_axes(state: TwoPhotonState, mode: str, fn) -> TwoPhotonState:
    """Apply ``fn(data, axis)`` to every axis of every pair that belongs to ``mode``.

    Same-mode results are re-symmetrised so the exchange rule is exact.
    """
    if mode not in state.modes:
        raise KeyError(f"unknown mode {mode!r}")
    pairs = {}
    for (j, k), amp in state.pairs.items():
        data = amp.data
        touched = False
        if j == mode:
            _require_time(amp)
            data = fn(data, 0)
            touched = True
        if k == mode:
            _require_time(amp)
            data = fn(data, 1)
            touched = True
        if touched and j == k:
            data = 0.5 * (data + data.T)
        pairs[(j, k)] = amp.with_data(data) if touched else amp
    return state.replace_pairs(pairs)


def apply_dispersion(state: TwoPhotonState, op: DispersionOp) -> TwoPhotonState:
    if op.mode not in state.modes:
        raise KeyError(f"unknown mode {op.mode!r}")
    if op.z == 0:
        return state
    params = op.params if op.params is not None else state.modes[op.mode]
    grid = state.grid
    factor = spectral_factor(params, grid.omega, op.z)
    return map_mode_axes(state, op.mode, lambda d, ax: _apply_spectral(d, grid, factor, ax))


def apply_phase_mod(state: TwoPhotonState, op: PhaseModOp) -> TwoPhotonState:
    if op.mode not in state.modes:
        raise KeyError(f"unknown mode {op.mode!r}")
    grid = state.grid
    if op.modulation.shape != (grid.n,):
        raise ValueError(
            f"modulation has {op.modulation.size} samples but the grid has {grid.n}"
        )
    if op.length == 0 and op.aperture is None:
        return state
    mult = op.multiplier()
    return map_mode_axes(state, op.mode, lambda d, ax: _apply_pointwise(d, mult, ax))


def fresnel_kernel(grid: TimeGrid, beta1: float, beta2: float, L: float) -> np.ndarray:
    """Matrix dt * b(t_a - t_b) of the chirped impulse response of a dispersive line."""
    b2L = beta2 * L
    if b2L == 0:
        raise ValueError("beta2 * L = 0 makes the Fresnel kernel singular; use apply_dispersion")
    pref = np.sqrt(1j / (2 * np.pi * b2L + 0j))
    u = grid.t[:, None] - beta1 * L - grid.t[None, :]
    return grid.dt * pref * np.exp(-1j * u**2 / (2 * b2L))


def fresnel_convolve(
    amp: BiphotonAmplitude, axis, beta1: float, beta2: float, L: float
) -> BiphotonAmplitude:
    """Direct (non-periodic) time-domain convolution with the Fresnel kernel.

    Independent of the FFT path; agreement requires the amplitude to vanish
    at the grid edges and the chirp to stay below Nyquist over its support.
    """
    _require_time(amp)
    ax = _axis(axis)
    K = fresnel_kernel(amp.grid, beta1, beta2, L)
    data = K @ amp.data if ax == 0 else amp.data @ K.T
    return amp.with_data(data)


def dispersion_sequence(
    state: TwoPhotonState, ops: Sequence[DispersionOp | PhaseModOp]
) -> TwoPhotonState:
    for op in ops:
        state = apply_dispersion(state, op) if isinstance(op, DispersionOp) else apply_phase_mod(state, op)
    return state
