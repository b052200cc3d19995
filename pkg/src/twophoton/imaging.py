"""Dispersion / time-lens / dispersion imaging of one photon of a pair.

An input line with group delay ``b1`` [ps] and dispersion ``b2`` [ps^2], a
quadratic time lens of strength ``focal`` [rad/ps^2] centred at ``t0``, and an
output line ``(b1p, b2p)`` image the photon when

    1/b2 + 1/b2p = focal

with magnification M = -b2p/b2 and delay t_d = b1p + M b1 + (1 - M) t0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linear import DispersionOp, PhaseModOp, apply_dispersion, apply_phase_mod, time_lens
from .state import (
    TIME,
    BiphotonAmplitude,
    ModeParams,
    TwoPhotonState,
    forward_transform,
)

LENS_LAW_TOL = 1e-9
APERTURE_PASS = 20.0
SUPPORT_LEVEL = 1e-12  # marginal density below this fraction of peak counts as empty


def solve_lens_law(beta2L_in: float, focal: float) -> float:
    """Output dispersion that images an input line ``beta2L_in`` through ``focal``."""
    if beta2L_in == 0:
        raise ValueError("input dispersion must be nonzero")
    denom = focal - 1.0 / beta2L_in
    if denom == 0:
        raise ValueError("lens strength equals 1/beta2L_in: image at infinity")
    return 1.0 / denom


@dataclass(frozen=True)
class ImageTransform:
    """Ideal image map t -> M t + t_d."""

    M: float
    t_d: float

    def __post_init__(self):
        if not (np.isfinite(self.M) and self.M != 0):
            raise ValueError("magnification must be finite and nonzero")

    def then(self, other: "ImageTransform") -> "ImageTransform":
        """Cascade: apply ``self`` first, then ``other``."""
        return ImageTransform(self.M * other.M, other.M * self.t_d + other.t_d)

    @property
    def transform(self) -> "ImageTransform":
        return self


@dataclass(frozen=True)
class ImagingSystem:
    input_disp: tuple[float, float]
    focal: float
    output_disp: tuple[float, float]
    t0: float = 0.0
    aperture: float | None = None
    window: str = "ideal"

    def __post_init__(self):
        if self.input_disp[1] == 0 or self.output_disp[1] == 0:
            raise ValueError("both dispersive lines need nonzero beta2*L")
        if not np.isfinite(self.M) or self.M == 0:
            raise ValueError("magnification must be finite and nonzero")

    @classmethod
    def from_lens_law(
        cls,
        beta2L_in: float,
        focal: float,
        beta1L_in: float = 0.0,
        beta1L_out: float = 0.0,
        t0: float = 0.0,
        aperture: float | None = None,
        window: str = "ideal",
    ) -> "ImagingSystem":
        b2p = solve_lens_law(beta2L_in, focal)
        return cls((beta1L_in, beta2L_in), focal, (beta1L_out, b2p), t0, aperture, window)

    @property
    def M(self) -> float:
        return -self.output_disp[1] / self.input_disp[1]

    @property
    def t_d(self) -> float:
        return self.output_disp[0] + self.M * self.input_disp[0] + (1 - self.M) * self.t0

    @property
    def lens_law_residual(self) -> float:
        return abs(1 / self.input_disp[1] + 1 / self.output_disp[1] - self.focal)

    @property
    def transform(self) -> ImageTransform:
        return ImageTransform(self.M, self.t_d)


def aperture_margin(T_a: float, beta2L: float, T0: float) -> float:
    """T_a * T0 / |beta2 L|; values >= 20 count as a sufficiently wide lens."""
    if not (T_a > 0 and T0 > 0 and beta2L > 0):
        raise ValueError("aperture, dispersion and feature size must be positive")
    return T_a * T0 / beta2L


def aperture_ok(margin: float) -> bool:
    return margin >= APERTURE_PASS


def feature_size(amp: BiphotonAmplitude, axis: int = 0) -> float:
    """Inverse rms spectral width of the photon on ``axis`` [ps]."""
    if amp.domain != (TIME, TIME):
        raise ValueError("feature_size expects a time-domain amplitude")
    spec = forward_transform(amp.data, amp.grid, axis=axis)
    w = amp.grid.omega
    p = np.sum(np.abs(spec) ** 2, axis=1 - axis)
    p = p / p.sum()
    mean = np.sum(p * w)
    rms = np.sqrt(np.sum(p * (w - mean) ** 2))
    return float(1.0 / rms)


def _trig_interp_matrix(amp: BiphotonAmplitude, x: np.ndarray) -> np.ndarray:
    """Rows evaluate the band-limited interpolant of the grid samples at ``x``."""
    g = amp.grid
    n = g.n
    # Symmetric frequency set; the Nyquist bin is split so real data stays real.
    m = np.fft.fftfreq(n, d=1.0 / n)
    w = g.d_omega * m
    E = np.exp(-1j * (x - g.t_start)[:, None] * w[None, :])
    nyq = n // 2
    E[:, nyq] = np.cos(np.pi * (x - g.t_start) / g.dt)
    # E @ ifft-coefficients; fold the forward DFT in so the map acts on samples.
    F = np.fft.ifft(np.eye(n), axis=0)  # coefficients c_m = (1/n) sum_k x_k e^{+2 pi i m k/n}
    return E @ F


def predict_image(amp: BiphotonAmplitude, sys, axis: int = 0) -> BiphotonAmplitude:
    """Ideal image psi(t) -> |M|^{-1/2} psi((t - t_d)/M) along ``axis``.

    ``sys`` is an ``ImagingSystem`` (lens law enforced) or an ``ImageTransform``.
    The quadratic phase of the real system is not included, so compare
    magnitudes.
    """
    if amp.domain != (TIME, TIME):
        raise ValueError("predict_image expects a time-domain amplitude")
    if isinstance(sys, ImagingSystem) and sys.lens_law_residual >= LENS_LAW_TOL:
        raise ValueError(f"lens law violated (residual {sys.lens_law_residual:.3e})")
    tr = sys.transform
    g = amp.grid
    # Support of the photon on this axis must land inside the grid after imaging.
    marg = np.sum(np.abs(amp.data) ** 2, axis=1 - axis)
    sig = np.nonzero(marg > SUPPORT_LEVEL * marg.max())[0]
    ends = tr.M * g.t[[sig[0], sig[-1]]] + tr.t_d
    lo, hi = g.t[0] - 0.5 * g.dt, g.t[-1] + 0.5 * g.dt
    if ends.min() < lo or ends.max() > hi:
        raise ValueError(
            f"image support [{ends.min():.3g}, {ends.max():.3g}] ps exceeds the grid"
        )
    x = (g.t - tr.t_d) / tr.M
    P = _trig_interp_matrix(amp, x) / np.sqrt(abs(tr.M))
    data = P @ amp.data if axis == 0 else amp.data @ P.T
    # Samples that map outside the source window belong to nothing physical.
    outside = (x < lo) | (x > hi)
    if np.any(outside):
        data = data.copy()
        if axis == 0:
            data[outside, :] = 0
        else:
            data[:, outside] = 0
    return amp.with_data(data)


def imaging_ops(grid, sys: ImagingSystem, mode: str):
    """The element chain (dispersion, lens, dispersion) realising ``sys`` on ``mode``."""
    (b1, b2), (b1p, b2p) = sys.input_disp, sys.output_disp
    return [
        DispersionOp(mode, 1.0, ModeParams(beta1=b1, beta2=b2)),
        time_lens(grid, mode, sys.focal, sys.t0, sys.aperture, sys.window),
        DispersionOp(mode, 1.0, ModeParams(beta1=b1p, beta2=b2p)),
    ]


def run_imaging_system(state: TwoPhotonState, sys: ImagingSystem, mode: str) -> TwoPhotonState:
    for op in imaging_ops(state.grid, sys, mode):
        if isinstance(op, DispersionOp):
            state = apply_dispersion(state, op)
        else:
            state = apply_phase_mod(state, op)
    return state


def measured_magnification(amp_in: BiphotonAmplitude, amp_out: BiphotonAmplitude, axis: int = 0) -> float:
    """Width ratio along ``axis``, signed by whether the (t, t') correlation flipped."""
    from .observables import moments

    a, b = moments(amp_in), moments(amp_out)
    if axis == 0:
        ratio = np.sqrt(b.var_t / a.var_t)
    else:
        ratio = np.sqrt(b.var_tprime / a.var_tprime)
    sign = np.sign(a.correlation * b.correlation)
    if sign == 0:
        raise ValueError("input has no (t, t') correlation to read the sign of M from")
    return float(sign * ratio)


def relative_l2(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))
