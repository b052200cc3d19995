"""Two-photon amplitudes, mode parameters and spectral transforms.

A ``BiphotonAmplitude`` holds psi(t, t') for one ordered pair of modes on a
``TimeGrid``; axis 0 is the first photon, axis 1 the second. A
``TwoPhotonState`` stores one amplitude per unordered pair ``j <= k`` (in mode
declaration order); the reversed pair is always the transpose, so the exchange
rule psi_kj(t, t') = psi_jk(t', t) holds by construction.

Spectra use the kernel exp(+i Omega t):

    phi(Omega_m) = dt * sum_k psi(t_k) exp(+i Omega_m t_k)
    psi(t_k)     = dOmega / (2 pi) * sum_m phi(Omega_m) exp(-i Omega_m t_k)

so the discrete values approximate the continuum integrals directly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .grid import TimeGrid

TIME = "time"
SPECTRUM = "spectrum"

EDGE_WARN_LEVEL = 1e-8


class EdgeLeakageWarning(UserWarning):
    """Amplitude does not decay far enough before the periodic grid edge."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ModeParams:
    """Propagation constants of one guided mode.

    alpha   loss coefficient [1/m]
    beta1   inverse group velocity [ps/m]
    beta2   group-velocity dispersion [ps^2/m]
    delta_n_profile
            optional k0*Delta n(t) sampled on the grid [rad/m]
    """

    alpha: float = 0.0
    beta1: float = 0.0
    beta2: float = 0.0
    delta_n_profile: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha!r}")
        if not (np.isfinite(self.beta1) and np.isfinite(self.beta2)):
            raise ValueError("beta1 and beta2 must be finite")
        if self.delta_n_profile is not None:
            prof = np.array(self.delta_n_profile, dtype=float)
            if prof.ndim != 1 or not np.all(np.isfinite(prof)):
                raise ValueError("delta_n_profile must be a finite 1-D array")
            prof.flags.writeable = False
            object.__setattr__(self, "delta_n_profile", prof)


@dataclass(frozen=True, eq=False)
class BiphotonAmplitude:
    grid: TimeGrid
    data: np.ndarray
    domain: tuple[str, str] = (TIME, TIME)

    def __post_init__(self):
        data = _frozen(self.data)
        if data.shape != (self.grid.n, self.grid.n):
            raise ValueError(
                f"amplitude shape {data.shape} does not match grid n={self.grid.n}"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("amplitude contains non-finite entries")
        dom = tuple(self.domain)
        if len(dom) != 2 or any(d not in (TIME, SPECTRUM) for d in dom):
            raise ValueError(f"bad domain tag {self.domain!r}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "domain", dom)

    @property
    def T(self) -> "BiphotonAmplitude":
        """Exchange the two photons: psi(t, t') -> psi(t', t)."""
        return BiphotonAmplitude(self.grid, self.data.T, self.domain[::-1])

    def norm_sq(self) -> float:
        """Integrated |psi|^2 with the measure of each axis' domain."""
        w = 1.0
        for d in self.domain:
            w *= self.grid.dt if d == TIME else self.grid.d_omega / (2 * np.pi)
        return float(np.sum(np.abs(self.data) ** 2) * w)

    def scaled(self, c: complex) -> "BiphotonAmplitude":
        return BiphotonAmplitude(self.grid, self.data * c, self.domain)

    def with_data(self, data: np.ndarray) -> "BiphotonAmplitude":
        return BiphotonAmplitude(self.grid, data, self.domain)


def edge_leakage(amp: BiphotonAmplitude) -> float:
    """Largest |psi| on the outer rows/columns relative to the peak."""
    a = np.abs(amp.data)
    peak = a.max()
    if peak == 0:
        return 0.0
    edge = max(a[0].max(), a[-1].max(), a[:, 0].max(), a[:, -1].max())
    return float(edge / peak)


def _check_edges(amp: BiphotonAmplitude, what: str) -> None:
    leak = edge_leakage(amp)
    if leak > EDGE_WARN_LEVEL:
        warnings.warn(
            f"{what}: edge amplitude {leak:.2e} of peak; periodic wrap-around may matter",
            EdgeLeakageWarning,
            stacklevel=3,
        )


def _pair_key(modes: Sequence[str], j: str, k: str) -> tuple[str, str]:
    ij, ik = modes.index(j), modes.index(k)
    return (j, k) if ij <= ik else (k, j)


@dataclass(frozen=True, eq=False)
class TwoPhotonState:
    """Pair amplitudes for two photons shared among labelled modes.

    ``pairs`` maps ``(j, k)`` with ``j`` declared no later than ``k`` to
    psi_jk. Missing pairs are identically zero. Same-mode amplitudes keep the
    1/sqrt(2) normalisation, so every |psi_jk|^2 is a coincidence density
    and the total probability is the plain sum of pair norms.
    """

    modes: Mapping[str, ModeParams]
    pairs: Mapping[tuple[str, str], BiphotonAmplitude]

    def __post_init__(self):
        modes = dict(self.modes)
        if not modes:
            raise ValueError("state needs at least one mode")
        labels = list(modes)
        pairs = {}
        grid = None
        for (j, k), amp in dict(self.pairs).items():
            if j not in modes or k not in modes:
                raise ValueError(f"pair ({j}, {k}) references an undeclared mode")
            if grid is None:
                grid = amp.grid
            elif amp.grid != grid:
                raise ValueError("all pair amplitudes must share one grid")
            key = _pair_key(labels, j, k)
            if key != (j, k):
                amp = amp.T
            if key in pairs:
                raise ValueError(f"pair {key} given twice")
            if j == k and amp.domain[0] != amp.domain[1]:
                raise ValueError("same-mode amplitude must share its domain on both axes")
            pairs[key] = amp
        ordered = {p: pairs[p] for p in sorted(pairs, key=lambda p: (labels.index(p[0]), labels.index(p[1])))}
        object.__setattr__(self, "modes", MappingProxyType(modes))
        object.__setattr__(self, "pairs", MappingProxyType(ordered))

    @property
    def labels(self) -> list[str]:
        return list(self.modes)

    @property
    def grid(self) -> TimeGrid:
        for amp in self.pairs.values():
            return amp.grid
        raise ValueError("state has no amplitudes")

    def key(self, j: str, k: str) -> tuple[str, str]:
        return _pair_key(self.labels, j, k)

    def amplitude(self, j: str, k: str) -> BiphotonAmplitude:
        """psi_jk with axis 0 belonging to mode ``j``; zeros if absent."""
        if j not in self.modes or k not in self.modes:
            raise KeyError(f"unknown mode in pair ({j}, {k})")
        key = self.key(j, k)
        amp = self.pairs.get(key)
        if amp is None:
            g = self.grid
            return BiphotonAmplitude(g, np.zeros((g.n, g.n), complex))
        return amp if key == (j, k) else amp.T

    def pair_probability(self, j: str, k: str) -> float:
        return self.amplitude(j, k).norm_sq()

    def total_probability(self) -> float:
        return float(sum(a.norm_sq() for a in self.pairs.values()))

    def replace_pairs(self, pairs: Mapping[tuple[str, str], BiphotonAmplitude]) -> "TwoPhotonState":
        return TwoPhotonState(self.modes, pairs)

    def with_pair(self, j: str, k: str, amp: BiphotonAmplitude) -> "TwoPhotonState":
        pairs = dict(self.pairs)
        key = self.key(j, k)
        pairs[key] = amp if key == (j, k) else amp.T
        return TwoPhotonState(self.modes, pairs)

    def with_modes(self, **updates: ModeParams) -> "TwoPhotonState":
        modes = dict(self.modes)
        modes.update(updates)
        return TwoPhotonState(modes, self.pairs)


def single_pair_state(
    amp: BiphotonAmplitude,
    modes: Mapping[str, ModeParams] | Sequence[str] = ("1", "2"),
    pair: tuple[str, str] | None = None,
) -> TwoPhotonState:
    """Wrap one amplitude into a state; defaults to the (first, second) mode pair."""
    if not isinstance(modes, Mapping):
        modes = {m: ModeParams() for m in modes}
    labels = list(modes)
    if pair is None:
        pair = (labels[0], labels[1] if len(labels) > 1 else labels[0])
    return TwoPhotonState(modes, {pair: amp})


def normalize(state: TwoPhotonState) -> TwoPhotonState:
    p = state.total_probability()
    if not p > 0:
        raise ValueError("cannot normalize a zero-norm state")
    s = 1.0 / np.sqrt(p)
    return state.replace_pairs({k: a.scaled(s) for k, a in state.pairs.items()})


def normalize_amplitude(amp: BiphotonAmplitude) -> BiphotonAmplitude:
    p = amp.norm_sq()
    if not p > 0:
        raise ValueError("cannot normalize a zero-norm amplitude")
    return amp.scaled(1.0 / np.sqrt(p))


def exchange_asymmetry(state: TwoPhotonState) -> float:
    """Max |psi_jj - psi_jj^T| over same-mode pairs (cross pairs are exact by storage)."""
    worst = 0.0
    for (j, k), amp in state.pairs.items():
        if j == k:
            worst = max(worst, float(np.max(np.abs(amp.data - amp.data.T))))
    return worst


# ---------------------------------------------------------------- transforms

def _axes_arg(axes) -> tuple[int, ...]:
    if axes in ("both", None):
        return (0, 1)
    if axes in ("first", 0):
        return (0,)
    if axes in ("second", 1):
        return (1,)
    raise ValueError(f"axes must be 'first', 'second' or 'both', got {axes!r}")


def forward_transform(x: np.ndarray, grid: TimeGrid, axis: int = -1) -> np.ndarray:
    """dt * sum_k x(t_k) exp(+i Omega t_k) along ``axis`` (FFT-ordered output)."""
    shape = [1] * x.ndim
    shape[axis] = grid.n
    phase = np.exp(1j * grid.omega * grid.t_start).reshape(shape)
    return np.fft.ifft(x, axis=axis) * (grid.n * grid.dt) * phase


def inverse_transform(X: np.ndarray, grid: TimeGrid, axis: int = -1) -> np.ndarray:
    """dOmega/2pi * sum_m X(Omega_m) exp(-i Omega_m t) along ``axis``."""
    shape = [1] * X.ndim
    shape[axis] = grid.n
    phase = np.exp(-1j * grid.omega * grid.t_start).reshape(shape)
    return np.fft.fft(X * phase, axis=axis) / (grid.n * grid.dt)


def to_spectrum(amp: BiphotonAmplitude, axes="both") -> BiphotonAmplitude:
    ax = _axes_arg(axes)
    dom = list(amp.domain)
    data = amp.data
    for a in ax:
        if dom[a] != TIME:
            raise ValueError(f"axis {a} is already in the spectral domain")
        data = forward_transform(data, amp.grid, axis=a)
        dom[a] = SPECTRUM
    return BiphotonAmplitude(amp.grid, data, tuple(dom))


def from_spectrum(amp: BiphotonAmplitude, axes="both") -> BiphotonAmplitude:
    ax = _axes_arg(axes)
    dom = list(amp.domain)
    data = amp.data
    for a in ax:
        if dom[a] != SPECTRUM:
            raise ValueError(f"axis {a} is already in the time domain")
        data = inverse_transform(data, amp.grid, axis=a)
        dom[a] = TIME
    return BiphotonAmplitude(amp.grid, data, tuple(dom))


# -------------------------------------------------------------- constructors

def _require_resolved(grid: TimeGrid, widths: Iterable[float]) -> None:
    widths = list(widths)
    if any(not (w > 0) for w in widths):
        raise ValueError("widths must be positive")
    if min(widths) < 4 * grid.dt * (1 - 1e-12):
        raise ValueError(
            f"width {min(widths)} ps is not resolved by dt={grid.dt} (need >= 4 samples)"
        )
    if 6 * max(widths) > grid.span * (1 + 1e-12):
        raise ValueError(
            f"width {max(widths)} ps does not fit the {grid.span} ps grid (need 6 widths)"
        )


def correlated_gaussian(
    grid: TimeGrid,
    sigma_plus: float,
    sigma_minus: float,
    t_center_pair: float = 0.0,
) -> BiphotonAmplitude:
    """Gaussian biphoton exp(-tau+^2/(4 s+^2) - tau-^2/(4 s-^2)), unit norm.

    tau+- = ((t - c) +- (t' - c)) / 2, so ``sigma_plus`` and ``sigma_minus``
    are the rms widths of |psi|^2 along the mean-time and half-difference
    axes. The (t, t') correlation coefficient is
    (s+^2 - s-^2) / (s+^2 + s-^2).
    """
    _require_resolved(grid, (sigma_plus, sigma_minus))
    x = grid.t - t_center_pair
    tp = (x[:, None] + x[None, :]) / 2
    tm = (x[:, None] - x[None, :]) / 2
    data = np.exp(-tp**2 / (4 * sigma_plus**2) - tm**2 / (4 * sigma_minus**2))
    amp = normalize_amplitude(BiphotonAmplitude(grid, data))
    _check_edges(amp, "correlated_gaussian")
    return amp


def gaussian_pulse(
    grid: TimeGrid, sigma: float, t0: float = 0.0, omega0: float = 0.0
) -> np.ndarray:
    """Unit-norm one-photon amplitude exp(-(t-t0)^2/(2 sigma^2) - i omega0 t).

    ``sigma`` is the amplitude width (|f|^2 has rms width sigma/sqrt(2)).
    """
    f = np.exp(-((grid.t - t0) ** 2) / (2 * sigma**2) - 1j * omega0 * grid.t)
    return f / np.sqrt(np.sum(np.abs(f) ** 2) * grid.dt)


def product_amplitude(grid: TimeGrid, f: np.ndarray, g: np.ndarray) -> BiphotonAmplitude:
    """Separable psi(t, t') = f(t) g(t')."""
    f = np.asarray(f, complex)
    g = np.asarray(g, complex)
    if f.shape != (grid.n,) or g.shape != (grid.n,):
        raise ValueError("one-photon amplitudes must be sampled on the grid")
    amp = BiphotonAmplitude(grid, np.outer(f, g))
    _check_edges(amp, "product_amplitude")
    return amp


def product_gaussian(
    grid: TimeGrid,
    sigma1: float,
    sigma2: float | None = None,
    t1: float = 0.0,
    t2: float = 0.0,
) -> BiphotonAmplitude:
    sigma2 = sigma1 if sigma2 is None else sigma2
    _require_resolved(grid, (sigma1, sigma2))
    return product_amplitude(
        grid, gaussian_pulse(grid, sigma1, t1), gaussian_pulse(grid, sigma2, t2)
    )


def amplitude_from_function(
    grid: TimeGrid, fn: Callable[[np.ndarray, np.ndarray], np.ndarray], normalized: bool = True
) -> BiphotonAmplitude:
    tt, tp = np.meshgrid(grid.t, grid.t, indexing="ij")
    amp = BiphotonAmplitude(grid, fn(tt, tp))
    return normalize_amplitude(amp) if normalized else amp


def shift_1d(f: np.ndarray, grid: TimeGrid, delay: float) -> np.ndarray:
    """Band-limited delay f(t) -> f(t - delay) on the periodic grid."""
    F = forward_transform(np.asarray(f, complex), grid)
    return inverse_transform(F * np.exp(1j * grid.omega * delay), grid)


__all__ = [
    "TIME",
    "SPECTRUM",
    "EdgeLeakageWarning",
    "ModeParams",
    "BiphotonAmplitude",
    "TwoPhotonState",
    "single_pair_state",
    "normalize",
    "normalize_amplitude",
    "exchange_asymmetry",
    "edge_leakage",
    "forward_transform",
    "inverse_transform",
    "to_spectrum",
    "from_spectrum",
    "correlated_gaussian",
    "gaussian_pulse",
    "product_amplitude",
    "product_gaussian",
    "amplitude_from_function",
    "shift_1d",
]
