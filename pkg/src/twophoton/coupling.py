"""Linear co-directional coupling between modes.

Working with the scaled amplitudes M_jk = sqrt(1 + delta_jk) psi_jk, equal-space
propagation through a constant coupler of Hermitian coupling matrix kappa is

    M(L) = U M(0) U^T,   U = exp(i kappa L),

applied pointwise in (t, t'). Every pair is stored once; the reversed pair
enters as a transpose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .state import BiphotonAmplitude, TwoPhotonState

_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    kappa: np.ndarray
    length: float = 1.0

    def __post_init__(self):
        k = np.array(self.kappa, dtype=complex)
        if k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise ValueError("coupling matrix must be square")
        if not np.allclose(k, k.conj().T, rtol=0, atol=1e-14 * max(1.0, np.abs(k).max())):
            raise ValueError("coupling matrix must be Hermitian (kappa_jk = conj(kappa_kj))")
        if np.any(np.diag(k) != 0):
            raise ValueError("coupling matrix must have a zero diagonal")
        k.flags.writeable = False
        object.__setattr__(self, "kappa", k)

    def unitary(self) -> np.ndarray:
        """exp(i kappa L) by eigendecomposition of the Hermitian kappa."""
        w, v = np.linalg.eigh(self.kappa)
        return (v * np.exp(1j * w * self.length)) @ v.conj().T


def two_mode_kappa(kappa: complex) -> np.ndarray:
    return np.array([[0, kappa], [np.conj(kappa), 0]], dtype=complex)


def _require_modes(state: TwoPhotonState, modes) -> None:
    for m in modes:
        if m not in state.modes:
            raise KeyError(f"unknown mode {m!r}")


def transform_pairs(state: TwoPhotonState, U: np.ndarray, modes) -> TwoPhotonState:
    """Apply M -> U M U^T on the subspace of ``modes`` (in that order).

    Pairs with one photon outside the subspace transform with a single U.
    """
    modes = list(modes)
    _require_modes(state, modes)
    if len(set(modes)) != len(modes):
        raise ValueError("coupled modes must be distinct")
    N = len(modes)
    if U.shape != (N, N):
        raise ValueError("unitary does not match the number of coupled modes")
    idx = {m: i for i, m in enumerate(modes)}
    grid = state.grid
    zero = np.zeros((grid.n, grid.n), complex)
    acc: dict[tuple[str, str], np.ndarray] = {}

    def add(j, k, coef, data):
        if coef == 0:
            return
        key = state.key(j, k)
        if key != (j, k):
            data = data.T
        acc[key] = acc.get(key, zero) + coef * data

    for (a, b), amp in state.pairs.items():
        A = amp.data
        ia, ib = idx.get(a), idx.get(b)
        if ia is not None and ib is not None:
            # Input as scaled entries: M_ab (and M_ba = M_ab^T when a != b).
            if a == b:
                ins = [(ia, ia, _SQRT2 * A)]
            else:
                ins = [(ia, ib, A), (ib, ia, A.T)]
            for j in range(N):
                for k in range(j, N):
                    out_scale = 1 / _SQRT2 if j == k else 1.0
                    for (p, q, Mpq) in ins:
                        add(modes[j], modes[k], U[j, p] * U[k, q] * out_scale, Mpq)
        elif ia is not None:
            for j in range(N):
                add(modes[j], b, U[j, ia], A)
        elif ib is not None:
            for k in range(N):
                add(a, modes[k], U[k, ib], A)
        else:
            acc[(a, b)] = acc.get((a, b), zero) + A

    pairs = {}
    for key, data in acc.items():
        if key[0] == key[1]:
            data = 0.5 * (data + data.T)
        pairs[key] = BiphotonAmplitude(grid, data)
    return state.replace_pairs(pairs)


def n_mode_coupler(state: TwoPhotonState, coupling: CouplingMatrix, modes=None) -> TwoPhotonState:
    """Propagate through a constant N-mode coupler; ``modes`` defaults to all modes in order."""
    modes = state.labels if modes is None else list(modes)
    if coupling.kappa.shape[0] != len(modes):
        raise ValueError("coupling matrix size does not match the coupled modes")
    return transform_pairs(state, coupling.unitary(), modes)


def two_mode_coupler(state: TwoPhotonState, kappaL: float, modes=("1", "2")) -> TwoPhotonState:
    """Closed-form constant coupler with T = cos^2(kappa L), R = sin^2(kappa L).

    psi_12 -> T psi_12 - R psi_12^T + i c s sqrt(2) (psi_11 + psi_22)
    psi_11 -> c^2 psi_11 - s^2 psi_22 + (i c s / sqrt 2)(psi_12 + psi_12^T)
    psi_22 -> c^2 psi_22 - s^2 psi_11 + (i c s / sqrt 2)(psi_12 + psi_12^T)

    with c = cos(kappa L), s = sin(kappa L); c s = sqrt(T R) for 0 <= kappa L <= pi/2.
    """
    j, k = modes
    _require_modes(state, modes)
    if j == k:
        raise ValueError("a coupler needs two distinct modes")
    c, s = np.cos(kappaL), np.sin(kappaL)
    T, R, cs = c * c, s * s, c * s
    p12 = state.amplitude(j, k).data
    p11 = state.amplitude(j, j).data
    p22 = state.amplitude(k, k).data
    sym12 = p12 + p12.T
    out12 = T * p12 - R * p12.T + 1j * _SQRT2 * cs * (p11 + p22)
    out11 = T * p11 - R * p22 + 1j * cs / _SQRT2 * sym12
    out22 = T * p22 - R * p11 + 1j * cs / _SQRT2 * sym12
    grid = state.grid
    pairs = dict(state.pairs)
    pairs[state.key(j, k)] = BiphotonAmplitude(grid, out12 if state.key(j, k) == (j, k) else out12.T)
    pairs[(j, j)] = BiphotonAmplitude(grid, 0.5 * (out11 + out11.T))
    pairs[(k, k)] = BiphotonAmplitude(grid, 0.5 * (out22 + out22.T))
    if any(m not in (j, k) for p in state.pairs for m in p):
        # Pairs with a photon outside the coupler see the one-photon map.
        U = np.array([[c, 1j * s], [1j * s, c]])
        rest = {key: a for key, a in state.pairs.items() if not set(key) <= {j, k}}
        moved = transform_pairs(state.replace_pairs(rest), U, (j, k)) if rest else None
        if moved is not None:
            for key, a in moved.pairs.items():
                if not set(key) <= {j, k}:
                    pairs[key] = a
    return state.replace_pairs(pairs)


def coupler_coefficients(kappa: float, z: float, zprime: float) -> tuple[complex, complex, complex, complex]:
    """Weights of (psi_12, psi_12^T, sqrt2 psi_22, sqrt2 psi_11) at unequal distances z, z'."""
    cz, sz = np.cos(kappa * z), np.sin(kappa * z)
    cp, sp = np.cos(kappa * zprime), np.sin(kappa * zprime)
    return (complex(cz * cp), complex(-sz * sp), complex(1j * sz * cp), complex(1j * cz * sp))


def two_space_psi12(state: TwoPhotonState, kappa: float, z: float, zprime: float, modes=("1", "2")) -> np.ndarray:
    """psi_12(z, t, z', t') of the constant-coupling solution (analytic, not on the pipeline)."""
    j, k = modes
    a, b, c, d = coupler_coefficients(kappa, z, zprime)
    p12 = state.amplitude(j, k).data
    return (
        a * p12
        + b * p12.T
        + c * _SQRT2 * state.amplitude(k, k).data
        + d * _SQRT2 * state.amplitude(j, j).data
    )


def combined_psi12_check(
    state: TwoPhotonState, kappa: float, L: float, dz: float = 1e-3, modes=("1", "2")
) -> float:
    """Max residual of d_z d_z' psi_12 = -kappa^2 psi_12(z', t', z, t) at z = z' = L.

    The mixed derivative is a central finite difference of the analytic
    two-space solution.
    """
    def psi(z, zp):
        return two_space_psi12(state, kappa, z, zp, modes)

    mixed = (psi(L + dz, L + dz) - psi(L + dz, L - dz) - psi(L - dz, L + dz) + psi(L - dz, L - dz)) / (4 * dz * dz)
    swapped = psi(L, L).T  # at z = z' the swap is the (t, t') transpose
    return float(np.max(np.abs(mixed + kappa**2 * swapped)))
