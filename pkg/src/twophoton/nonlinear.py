"""Equal-space Kerr propagation of two photons in two modes.

With M11 = sqrt2 psi_11, M22 = sqrt2 psi_22 and psi_21(t, t') = psi_12(t', t),
and d = delta(t - t') (grid delta or band-limited sinc):

    (d/dz - iK_1 - iK_1') M11  = i kappa (psi_12 + psi_21) + i gamma d M11 + i chi d M22
    (d/dz - iK_2 - iK_2') M22  = i kappa* (psi_12 + psi_21) + i gamma d M22 + i chi* d M11
    (d/dz - iK_1 - iK_2') psi_12 = i kappa* M11 + i kappa M22 + i eta d psi_12

The coupling terms are those of the linear N-mode coupler restricted to
equal distances. The pointwise part closes on (M11, M22, s) with
s = (psi_12 + psi_21)/sqrt2, while q = (psi_12 - psi_21)/sqrt2 only picks up the
XPM phase; both are integrated exactly per grid point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .grid import TimeGrid
from .linear import spectral_factor
from .state import (
    TIME,
    BiphotonAmplitude,
    ModeParams,
    TwoPhotonState,
    forward_transform,
    inverse_transform,
    normalize_amplitude,
)

_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class NonlinearParams:
    """Kerr and coupling coefficients; ``bandwidth=inf`` means a grid delta.

    gamma, eta, chi [ps/m]; kappa [1/m]; bandwidth [rad/ps].
    """

    gamma: float = 0.0
    eta: float = 0.0
    chi: complex = 0.0
    kappa: complex = 0.0
    bandwidth: float = np.inf

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive (use inf for a delta)")


def regularized_delta(tau, bandwidth: float, dt: float | None = None):
    """sin(bandwidth tau / 2) / (pi tau), equal to bandwidth/(2 pi) at tau = 0.

    With ``bandwidth=inf`` this is the grid delta: 1/dt in the bin containing
    tau = 0 and zero elsewhere (``dt`` required).
    """
    tau = np.asarray(tau, dtype=float)
    if np.isinf(bandwidth):
        if dt is None:
            raise ValueError("the grid delta needs the grid step dt")
        return np.where(np.abs(tau) < dt / 2, 1.0 / dt, 0.0)
    return bandwidth / (2 * np.pi) * np.sinc(bandwidth * tau / (2 * np.pi))


def _check_bandwidth(grid: TimeGrid, bandwidth: float) -> None:
    if np.isfinite(bandwidth) and bandwidth > grid.omega_nyquist * (1 + 1e-12):
        raise ValueError(
            f"nonlinear bandwidth {bandwidth} exceeds the grid Nyquist {grid.omega_nyquist}"
        )


def delta_matrix(grid: TimeGrid, bandwidth: float) -> np.ndarray:
    """delta(t_a - t_b) on the grid, shape (n, n)."""
    _check_bandwidth(grid, bandwidth)
    tau = grid.t[:, None] - grid.t[None, :]
    return regularized_delta(tau, bandwidth, grid.dt)


def _only_cross_pair(state: TwoPhotonState, pair):
    if pair is not None:
        return tuple(pair)
    labels = state.labels
    if len(labels) < 2:
        raise ValueError("cross-phase modulation needs two modes")
    return (labels[0], labels[1])


def xpm_propagate(
    state: TwoPhotonState, eta: float, L: float, bandwidth: float = np.inf, pair=None
) -> TwoPhotonState:
    """psi_12(L) = exp[i eta L delta(t - t')] psi_12(0); other pairs untouched."""
    j, k = _only_cross_pair(state, pair)
    if j == k:
        raise ValueError("cross-phase modulation acts on a pair of distinct modes")
    if eta * L == 0:
        return state
    amp = state.amplitude(j, k)
    D = delta_matrix(state.grid, bandwidth)
    return state.with_pair(j, k, amp.with_data(amp.data * np.exp(1j * eta * L * D)))


def first_order_check(
    state: TwoPhotonState, eta: float, L: float, bandwidth: float = np.inf, pair=None
) -> float:
    """L-inf gap between the exact XPM phase and its first-order expansion.

    Normalised by max |psi_12|, so it approaches (eta L delta_max)^2 / 2 when the
    amplitude peaks on the diagonal.
    """
    j, k = _only_cross_pair(state, pair)
    psi = state.amplitude(j, k).data
    exact = xpm_propagate(state, eta, L, bandwidth, (j, k)).amplitude(j, k).data
    D = delta_matrix(state.grid, bandwidth)
    approx = psi * (1 + 1j * eta * L * D)
    return float(np.max(np.abs(exact - approx)) / np.max(np.abs(psi)))


# ----------------------------------------------------------------- split-step

def _local_generators(d: np.ndarray, p: NonlinearParams) -> np.ndarray:
    """Hermitian 3x3 generators on (M11, M22, s) for each delta value in ``d``."""
    k = complex(p.kappa)
    chi = complex(p.chi)
    H = np.zeros(d.shape + (3, 3), dtype=complex)
    H[..., 0, 0] = p.gamma * d
    H[..., 1, 1] = p.gamma * d
    H[..., 2, 2] = p.eta * d
    H[..., 0, 1] = chi * d
    H[..., 1, 0] = np.conj(chi) * d
    H[..., 0, 2] = _SQRT2 * k
    H[..., 2, 0] = _SQRT2 * np.conj(k)
    H[..., 1, 2] = _SQRT2 * np.conj(k)
    H[..., 2, 1] = _SQRT2 * k
    return H


def _expm_i_hermitian(H: np.ndarray, h: float) -> np.ndarray:
    w, v = np.linalg.eigh(H)
    return np.einsum("...ij,...j,...kj->...ik", v, np.exp(1j * w * h), v.conj())


class _PotentialStep:
    """Exact exp(i H(d) h) on every grid point, cached for a fixed step size."""

    def __init__(self, grid: TimeGrid, p: NonlinearParams, h: float):
        n = grid.n
        offsets = np.arange(-(n - 1), n) * grid.dt
        d_off = regularized_delta(offsets, p.bandwidth, grid.dt)
        idx = np.subtract.outer(np.arange(n), np.arange(n)) + (n - 1)
        self.diagonal = p.kappa == 0 and p.chi == 0
        if self.diagonal:
            self.ph_same = np.exp(1j * p.gamma * h * d_off)[idx]
            self.ph_cross = np.exp(1j * p.eta * h * d_off)[idx]
            return
        E = _expm_i_hermitian(_local_generators(d_off, p), h)
        self.q_phase = np.exp(1j * p.eta * h * d_off)[idx]
        self.E = [[E[:, a, b][idx] for b in range(3)] for a in range(3)]

    def __call__(self, m11, m22, p12):
        if self.diagonal:
            return m11 * self.ph_same, m22 * self.ph_same, p12 * self.ph_cross
        s = (p12 + p12.T) / _SQRT2
        q = (p12 - p12.T) / _SQRT2
        x = (m11, m22, s)
        E = self.E
        out = [E[a][0] * x[0] + E[a][1] * x[1] + E[a][2] * x[2] for a in range(3)]
        q = q * self.q_phase
        return out[0], out[1], (out[2] + q) / _SQRT2


def _rms_frequency(state: TwoPhotonState) -> float:
    g = state.grid
    worst = 0.0
    for amp in state.pairs.values():
        for axis in (0, 1):
            spec = forward_transform(amp.data, g, axis=axis)
            p = np.sum(np.abs(spec) ** 2, axis=1 - axis)
            if p.sum() == 0:
                continue
            p = p / p.sum()
            mean = np.sum(p * g.omega)
            worst = max(worst, float(np.sqrt(np.sum(p * (g.omega - mean) ** 2))))
    return worst


def default_step(state: TwoPhotonState, params: NonlinearParams, modes) -> float:
    """min(dispersion length, nonlinear length, coupling length) / 100.

    Dispersion length 1/(|beta2| Omega_rms^2) with Omega_rms the widest rms
    spectral width of any stored pair; nonlinear length 1/(c delta_max) with
    c the largest Kerr coefficient and delta_max the peak of the contact
    function (1/dt for the grid delta); coupling length 1/|kappa|.
    """
    b2 = max(abs(m.beta2) for m in modes)
    lengths = []
    w = _rms_frequency(state)
    if b2 > 0 and w > 0:
        lengths.append(1.0 / (b2 * w * w))
    c = max(abs(params.gamma), abs(params.eta), abs(params.chi))
    if c > 0:
        g = state.grid
        dmax = 1 / g.dt if np.isinf(params.bandwidth) else params.bandwidth / (2 * np.pi)
        lengths.append(1.0 / (c * dmax))
    if params.kappa != 0:
        lengths.append(1.0 / abs(params.kappa))
    return min(lengths) / 100 if lengths else np.inf


def fwm_split_step(
    state: TwoPhotonState,
    params: NonlinearParams,
    modes: tuple[ModeParams, ModeParams] | None,
    L: float,
    dz: float | None = None,
    labels: tuple[str, str] | None = None,
) -> TwoPhotonState:
    """Strang split-step integration of the (psi_11, psi_22, psi_12) system over ``L``.

    ``modes`` overrides the state's parameters for the two modes; ``labels``
    defaults to the first two declared modes. A half linear step applies loss
    and dispersion per axis (plus any delta_n profile as a pointwise phase),
    the full middle step the exact local potential/coupling exponential.
    """
    a, b = labels if labels is not None else tuple(state.labels[:2])
    if a == b:
        raise ValueError("split-step needs two distinct modes")
    m1, m2 = modes if modes is not None else (state.modes[a], state.modes[b])
    grid = state.grid
    _check_bandwidth(grid, params.bandwidth)
    if not L >= 0:
        raise ValueError("propagation length must be >= 0")
    for amp in state.pairs.values():
        if amp.domain != (TIME, TIME):
            raise ValueError("split-step integrates time-domain amplitudes")
    if L == 0:
        return state

    if dz is None:
        dz0 = default_step(state, params, (m1, m2))
        steps = max(1, int(np.ceil(L / dz0 - 1e-9))) if np.isfinite(dz0) else 1
    else:
        if not dz > 0:
            raise ValueError("dz must be positive")
        ratio = L / dz
        steps = int(round(ratio))
        if steps < 1 or abs(ratio - steps) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"dz={dz} does not divide L={L}")
    h = L / steps

    w = grid.omega
    f1 = spectral_factor(m1, w, h / 2)
    f2 = spectral_factor(m2, w, h / 2)
    g1 = np.exp(1j * m1.delta_n_profile * h / 2) if m1.delta_n_profile is not None else None
    g2 = np.exp(1j * m2.delta_n_profile * h / 2) if m2.delta_n_profile is not None else None

    def lin(x, fa, fb, ga, gb, first):
        if not first:
            x = _profile(x, ga, gb)
        X = forward_transform(forward_transform(x, grid, axis=0), grid, axis=1)
        X = X * fa[:, None] * fb[None, :]
        x = inverse_transform(inverse_transform(X, grid, axis=1), grid, axis=0)
        if first:
            x = _profile(x, ga, gb)
        return x

    pot = _PotentialStep(grid, params, h)
    had = {p for p in state.pairs}
    zero = np.zeros((grid.n, grid.n), complex)
    m11 = _SQRT2 * state.amplitude(a, a).data
    m22 = _SQRT2 * state.amplitude(b, b).data
    p12 = state.amplitude(a, b).data.copy()
    track11 = (a, a) in had or params.kappa != 0 or params.chi != 0
    track22 = (b, b) in had or params.kappa != 0 or params.chi != 0

    for _ in range(steps):
        if track11:
            m11 = lin(m11, f1, f1, g1, g1, True)
        if track22:
            m22 = lin(m22, f2, f2, g2, g2, True)
        p12 = lin(p12, f1, f2, g1, g2, True)
        m11, m22, p12 = pot(m11 if track11 else zero, m22 if track22 else zero, p12)
        if track11:
            m11 = lin(m11, f1, f1, g1, g1, False)
        if track22:
            m22 = lin(m22, f2, f2, g2, g2, False)
        p12 = lin(p12, f1, f2, g1, g2, False)

    pairs = dict(state.pairs)
    pairs[state.key(a, b)] = BiphotonAmplitude(grid, p12 if state.key(a, b) == (a, b) else p12.T)
    if track11:
        pairs[(a, a)] = BiphotonAmplitude(grid, 0.5 * (m11 + m11.T) / _SQRT2)
    if track22:
        pairs[(b, b)] = BiphotonAmplitude(grid, 0.5 * (m22 + m22.T) / _SQRT2)
    return state.replace_pairs(pairs)


def _profile(x, ga, gb):
    if ga is not None:
        x = x * ga[:, None]
    if gb is not None:
        x = x * gb[None, :]
    return x


# -------------------------------------------------------------- vector soliton

@dataclass(frozen=True)
class SolitonSpec:
    """Two-photon vector soliton in the moving frame.

    ``width`` is the rms width W [rad/ps] of the Gaussian mean-frequency
    envelope phi(Omega) = exp(-Omega^2 / (4 W^2)); a callable ``envelope``
    replaces the Gaussian, with ``width`` then only setting the grid scale.
    """

    eta: float
    beta2: float
    delta: float = 0.0
    width: float = 1.0
    z: float = 0.0
    envelope: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if not self.eta * self.beta2 < 0:
            raise ValueError("eta and beta2 must have opposite signs for a bound state")
        if not self.width > 0:
            raise ValueError("envelope width must be positive")

    @property
    def S(self) -> float:
        """Decay rate along tau_- = (tau - tau')/2 [1/ps]."""
        return -self.eta / self.beta2

    @property
    def is_gaussian(self) -> bool:
        return self.envelope is None

    def phi(self, omega: np.ndarray) -> np.ndarray:
        if self.envelope is None:
            return np.exp(-(omega**2) / (4 * self.width**2))
        return np.asarray(self.envelope(omega), dtype=complex)

    def dispersion_length(self) -> float:
        """Distance over which the mean-time width grows by sqrt(2) (Gaussian envelope)."""
        return 1.0 / (abs(self.beta2) * self.width**2)


def mean_time_envelope(spec: SolitonSpec, grid: TimeGrid, z: float) -> np.ndarray:
    """f_z(t) = int dOmega/2pi phi(Omega) exp(-i Omega t + i beta2 Omega^2 z / 4) on ``grid``."""
    phi = spec.phi(grid.omega)
    edge = np.abs(spec.phi(np.array([grid.omega_nyquist, -grid.omega_nyquist]))).max()
    if edge > 1e-10 * np.abs(phi).max():
        raise ValueError("envelope bandwidth is not contained in the grid")
    return inverse_transform(phi * np.exp(1j * spec.beta2 * grid.omega**2 * z / 4), grid)


def soliton_amplitude(spec: SolitonSpec, grid: TimeGrid) -> BiphotonAmplitude:
    """Exact bound-state psi_12(z, tau, tau') at ``spec.z``, unit norm."""
    n = grid.n
    # tau_+ = (t_a + t_b)/2 lives on a half-step grid of 2n points.
    half = TimeGrid(2 * n, grid.dt / 2, grid.t_center)
    f = mean_time_envelope(spec, half, spec.z)
    plus = f[np.add.outer(np.arange(n), np.arange(n))]
    diff = grid.t[:, None] - grid.t[None, :]
    b2, eta, dl = spec.beta2, spec.eta, spec.delta
    rel = np.exp(-abs(eta / (2 * b2)) * np.abs(diff) + 1j * (dl / b2) * diff)
    phase = np.exp(-1j * ((eta**2 / 4 + dl**2) / b2) * spec.z)
    return normalize_amplitude(BiphotonAmplitude(grid, phase * rel * plus))


def soliton_mean_time_spread(spec: SolitonSpec, z: float | None = None) -> float:
    """Variance [ps^2] of the mean-arrival-time marginal at ``z`` by quadrature.

    The 1-D quadrature grid is refined and widened until the variance is
    stable to 1e-12 relative.
    """
    z = spec.z if z is None else z
    W = spec.width
    dt = np.pi / (12 * W)
    n = 1024
    prev = None
    for _ in range(12):
        g = TimeGrid(n, dt)
        f = mean_time_envelope(spec, g, z)
        p = np.abs(f) ** 2
        edge = max(p[:8].max(), p[-8:].max()) / p.max()
        p = p / p.sum()
        mean = np.sum(p * g.t)
        var = float(np.sum(p * (g.t - mean) ** 2))
        if edge < 1e-20 and prev is not None and abs(var - prev) <= 1e-12 * var:
            return var
        prev = var
        n *= 2
    raise RuntimeError("mean-time variance did not converge")


# ------------------------------------------------------------ bound states

def finite_bandwidth_bound_states(
    eta: float, beta2: float, bandwidth: float, grid_1d: TimeGrid
) -> list[tuple[float, np.ndarray]]:
    """Bound states of -(beta2/4) d^2/dx^2 + eta delta_bw(2x) on the tau_- grid.

    x = tau_- = (t - t')/2, so delta(t - t') = delta_bw(2x); with bandwidth at
    the grid Nyquist this is (eta/2) times the grid delta. Second-order finite
    differences with hard walls give a symmetric tridiagonal problem. Returns
    (eigenvalue [1/m], shape) pairs from most to least bound; shapes have unit
    L2 norm and positive overlap with the well. Empty if nothing is bound.
    """
    if not eta * beta2 < 0:
        raise ValueError("eta and beta2 must have opposite signs for binding")
    h = grid_1d.dt
    x = grid_1d.t
    if np.isinf(bandwidth):
        V = eta * regularized_delta(2 * x, np.inf, 2 * h)
    else:
        if bandwidth > np.pi / h * (1 + 1e-12):
            raise ValueError("bandwidth exceeds the grid Nyquist")
        V = eta * regularized_delta(2 * x, bandwidth)
    sign = np.sign(beta2)
    kin = abs(beta2) / 4 / h**2
    diag = 2 * kin + sign * V
    off = -kin * np.ones(x.size - 1)
    # Continuum starts at 0 for the positive-kinetic orientation.
    vals, vecs = eigh_tridiagonal(diag, off, select="v", select_range=(-np.inf, -1e-300))
    out = []
    for lam, v in zip(vals, vecs.T):
        v = v / np.sqrt(np.sum(np.abs(v) ** 2) * h)
        if np.sum(v * np.abs(V)) < 0 or (np.sum(v * np.abs(V)) == 0 and v[np.argmax(np.abs(v))] < 0):
            v = -v
        out.append((float(sign * lam), v))
    return out


def decay_rate(shape: np.ndarray, grid_1d: TimeGrid, lo: float = 1e-6, hi: float = 1e-1) -> float:
    """Exponential decay rate of |shape| on x > 0, fitted where it lies in [lo, hi] of peak."""
    a = np.abs(shape) / np.abs(shape).max()
    x = grid_1d.t
    sel = (x > 0) & (a > lo) & (a < hi)
    if sel.sum() < 3:
        raise ValueError("not enough tail samples to fit a decay rate")
    slope = np.polyfit(x[sel], np.log(a[sel]), 1)[0]
    return float(-slope)
