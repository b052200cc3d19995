"""Measured quantities: coincidence densities, moments, Schmidt number, HOM scans."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .coupling import two_mode_coupler
from .grid import TimeGrid
from .state import (
    TIME,
    BiphotonAmplitude,
    ModeParams,
    TwoPhotonState,
    product_amplitude,
    shift_1d,
)


@dataclass(frozen=True)
class MomentReport:
    """Arrival-time statistics of |psi(t, t')|^2 [ps, ps^2].

    ``var_mean_time`` and ``var_time_diff`` are the variances of (t + t')/2
    and (t - t')/2.
    """

    mean_t: float
    mean_tprime: float
    var_t: float
    var_tprime: float
    covariance: float
    var_mean_time: float
    var_time_diff: float
    correlation: float

    def as_dict(self) -> dict:
        return asdict(self)

    @property
    def std_mean_time(self) -> float:
        return float(np.sqrt(self.var_mean_time))

    @property
    def std_time_diff(self) -> float:
        return float(np.sqrt(self.var_time_diff))


def coincidence_density(state: TwoPhotonState, pair) -> np.ndarray:
    j, k = pair
    if state.key(j, k) not in state.pairs:
        raise KeyError(f"pair ({j}, {k}) is not present in the state")
    return np.abs(state.amplitude(j, k).data) ** 2


def moments(amp: BiphotonAmplitude) -> MomentReport:
    if amp.domain != (TIME, TIME):
        raise ValueError("moments are taken over arrival times")
    p = np.abs(amp.data) ** 2
    total = p.sum()
    if not total > 0:
        raise ValueError("zero-norm amplitude has no moments")
    p = p / total
    t = amp.grid.t
    pt, ptp = p.sum(axis=1), p.sum(axis=0)
    mt, mtp = float(pt @ t), float(ptp @ t)
    x, y = t - mt, t - mtp
    vt = float(pt @ x**2)
    vtp = float(ptp @ y**2)
    cov = float(x @ p @ y)
    return MomentReport(
        mean_t=mt,
        mean_tprime=mtp,
        var_t=vt,
        var_tprime=vtp,
        covariance=cov,
        var_mean_time=(vt + vtp + 2 * cov) / 4,
        var_time_diff=(vt + vtp - 2 * cov) / 4,
        correlation=cov / np.sqrt(vt * vtp) if vt > 0 and vtp > 0 else 0.0,
    )


def schmidt_coefficients(amp: BiphotonAmplitude) -> np.ndarray:
    """Normalised Schmidt weights p_i (squared singular values of psi dt)."""
    s = np.linalg.svd(amp.data * amp.grid.dt, compute_uv=False)
    w = s**2
    total = w.sum()
    if not total > 0:
        raise ValueError("zero-norm amplitude has no Schmidt decomposition")
    return w / total


def schmidt_number(amp: BiphotonAmplitude) -> float:
    p = schmidt_coefficients(amp)
    return float(1.0 / np.sum(p**2))


def overlap(a: BiphotonAmplitude, b: BiphotonAmplitude) -> complex:
    """<a|b> = sum conj(a) b dt^2."""
    if a.grid != b.grid:
        raise ValueError("overlap needs both amplitudes on the same grid")
    if a.domain != b.domain:
        raise ValueError("overlap needs matching domains")
    return complex(np.vdot(a.data, b.data) * a.grid.dt**2)


def _off_grid(g: np.ndarray) -> bool:
    a = np.abs(g)
    return max(a[:4].max(), a[-4:].max()) > 1e-6 * a.max()


def hom_dip_scan(
    grid: TimeGrid,
    pulse: np.ndarray,
    delays,
    kappaL: float = np.pi / 4,
    pulse2: np.ndarray | None = None,
) -> np.ndarray:
    """Separate-mode coincidence probability behind a coupler for each delay.

    Input psi_12(t, t') = f(t) g(t' - tau) with one photon per mode; ``pulse2``
    defaults to ``pulse``. Both envelopes are taken to be unit-norm.
    """
    f = np.asarray(pulse, complex)
    g0 = f if pulse2 is None else np.asarray(pulse2, complex)
    out = []
    modes = {"1": ModeParams(), "2": ModeParams()}
    for tau in np.atleast_1d(delays):
        g = shift_1d(g0, grid, float(tau))
        if _off_grid(g):
            raise ValueError(f"delay {tau} ps pushes the pulse off the grid")
        state = TwoPhotonState(modes, {("1", "2"): product_amplitude(grid, f, g)})
        out12 = two_mode_coupler(state, kappaL).amplitude("1", "2")
        out.append(out12.norm_sq())
    return np.array(out)


def hom_overlap_oracle(grid: TimeGrid, pulse, delays, kappaL: float = np.pi / 4, pulse2=None) -> np.ndarray:
    """T^2 + R^2 - 2 T R |int conj(f(t)) g(t - tau) dt|^2, by direct summation."""
    f = np.asarray(pulse, complex)
    g0 = f if pulse2 is None else np.asarray(pulse2, complex)
    T, R = np.cos(kappaL) ** 2, np.sin(kappaL) ** 2
    res = []
    for tau in np.atleast_1d(delays):
        g = shift_1d(g0, grid, float(tau))
        ov = np.vdot(f, g) * grid.dt
        res.append(T * T + R * R - 2 * T * R * abs(ov) ** 2)
    return np.array(res)


def marginal_spectrum(amp: BiphotonAmplitude, axis: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """(sorted Omega, spectral density of the photon on ``axis``)."""
    from .state import forward_transform

    spec = forward_transform(amp.data, amp.grid, axis=axis)
    p = np.sum(np.abs(spec) ** 2, axis=1 - axis)
    return amp.grid.omega_sorted, np.fft.fftshift(p)
