import numpy as np
import pytest
from hypothesis import given, strategies as st

from twophoton.grid import make_grid
from twophoton.linear import (
    DispersionOp,
    PhaseModOp,
    apply_dispersion,
    apply_phase_mod,
    dispersion_sequence,
    fresnel_convolve,
    fresnel_kernel,
    rect_window,
    time_lens,
)
from twophoton.observables import moments
from twophoton.state import (
    BiphotonAmplitude,
    ModeParams,
    TwoPhotonState,
    correlated_gaussian,
    exchange_asymmetry,
    forward_transform,
    normalize,
    product_amplitude,
    product_gaussian,
    single_pair_state,
)


def _state(grid, amp, **modes):
    params = {"1": modes.get("m1", ModeParams()), "2": modes.get("m2", ModeParams())}
    return single_pair_state(amp, params)


def _width_oracle(s0, b2z):
    """rms width of |psi|^2 for exp(-t^2/(4 s0^2)) after beta2 z, by direct quadrature
    of the Fresnel integral on a fine independent grid."""
    t = np.linspace(-40, 40, 4001)
    tau = t
    f = np.exp(-(tau**2) / (4 * s0**2))
    k = np.sqrt(1j / (2 * np.pi * b2z)) * np.exp(-1j * (t[:, None] - tau[None, :]) ** 2 / (2 * b2z))
    out = k @ f * (tau[1] - tau[0])
    p = np.abs(out) ** 2
    p /= p.sum()
    return np.sqrt(np.sum(p * t**2))


def test_width_oracle_sanity():
    # the oracle itself must reproduce sqrt(1 + (b2 z / 2 s0^2)^2)
    assert _width_oracle(1.0, 2.0) == pytest.approx(np.sqrt(2.0), rel=1e-4)


def test_zero_length_is_identity():
    g = make_grid(64, 0.25)
    s = _state(g, product_gaussian(g, 1.0))
    out = apply_dispersion(s, DispersionOp("1", 0.0, ModeParams(beta2=3.0)))
    assert out is s


def test_negative_length_rejected():
    with pytest.raises(ValueError):
        DispersionOp("1", -1.0)


def test_unknown_mode_rejected():
    g = make_grid(64, 0.25)
    s = _state(g, product_gaussian(g, 1.0))
    with pytest.raises(KeyError):
        apply_dispersion(s, DispersionOp("7", 1.0))


def test_gaussian_broadening_matches_fresnel_quadrature():
    g = make_grid(512, 0.1)
    s0 = 1.0
    f = np.exp(-(g.t**2) / (4 * s0**2))
    f = f / np.sqrt(np.sum(np.abs(f) ** 2) * g.dt)
    st_ = _state(g, product_amplitude(g, f, f))
    out = apply_dispersion(st_, DispersionOp("1", 2.0, ModeParams(beta2=1.0)))
    m = moments(out.amplitude("1", "2"))
    assert np.sqrt(m.var_t) == pytest.approx(_width_oracle(s0, 2.0), rel=1e-4)
    assert np.sqrt(m.var_tprime) == pytest.approx(s0, rel=1e-6)


def test_spectral_and_kernel_paths_agree():
    # window wide enough that neither the kernel tails nor wrap-around matter
    g = make_grid(512, 0.1)
    amp = correlated_gaussian(g, 1.5, 1.0)
    s = _state(g, amp)
    b1, b2, L = 0.4, 0.8, 1.5
    spectral = apply_dispersion(s, DispersionOp("2", L, ModeParams(beta1=b1, beta2=b2))).amplitude("1", "2")
    direct = fresnel_convolve(amp, "second", b1, b2, L)
    err = np.linalg.norm(spectral.data - direct.data) / np.linalg.norm(direct.data)
    assert err < 1e-6


def test_kernel_singular_at_zero_dispersion():
    g = make_grid(16, 0.5)
    with pytest.raises(ValueError):
        fresnel_kernel(g, 0.0, 0.0, 1.0)


def test_narrow_input_reproduces_chirped_kernel():
    g = make_grid(512, 0.05)
    b2L = 2.0
    sig = 0.1
    f = np.exp(-(g.t**2) / (2 * sig**2))
    f = f / (np.sum(f) * g.dt)  # unit area, approximates a delta
    amp = BiphotonAmplitude(g, np.outer(f, np.ones(g.n)))
    out = fresnel_convolve(amp, "first", 0.0, 1.0, b2L).data[:, 0]
    kern = np.sqrt(1j / (2 * np.pi * b2L)) * np.exp(-1j * g.t**2 / (2 * b2L))
    core = np.abs(g.t) < 3
    # chirp rate t/b2L stays far below 1/sig over the core
    assert np.max(np.abs(out[core] - kern[core])) < 2e-2


def test_loss_scales_probability():
    g = make_grid(64, 0.25)
    s = _state(g, product_gaussian(g, 1.0))
    out = apply_dispersion(s, DispersionOp("1", 2.0, ModeParams(alpha=0.3)))
    assert out.total_probability() == pytest.approx(np.exp(-0.6), rel=1e-12)


def test_same_mode_pair_loses_on_both_axes():
    g = make_grid(64, 0.25)
    amp = correlated_gaussian(g, 1.5, 1.0)
    s = TwoPhotonState({"1": ModeParams()}, {("1", "1"): amp})
    out = apply_dispersion(s, DispersionOp("1", 1.0, ModeParams(alpha=0.2, beta2=0.5)))
    assert out.total_probability() == pytest.approx(np.exp(-0.4), rel=1e-12)
    assert exchange_asymmetry(out) == 0.0


def test_beta1_is_a_delay():
    g = make_grid(256, 0.1)
    s = _state(g, product_gaussian(g, 1.0))
    out = apply_dispersion(s, DispersionOp("1", 2.0, ModeParams(beta1=0.5)))
    expect = product_gaussian(g, 1.0, 1.0, t1=1.0).data
    assert np.allclose(out.amplitude("1", "2").data, expect, atol=1e-12)


@given(st.floats(0.0, 3.0), st.floats(0.0, 3.0), st.floats(-2.0, 2.0), st.floats(-1, 1))
def test_dispersion_composes_and_conserves(z1, z2, b2, b1):
    g = make_grid(64, 0.25)
    s = _state(g, correlated_gaussian(g, 2.0, 1.0))
    p = ModeParams(beta1=b1, beta2=b2)
    a = apply_dispersion(apply_dispersion(s, DispersionOp("1", z1, p)), DispersionOp("1", z2, p))
    b = apply_dispersion(s, DispersionOp("1", z1 + z2, p))
    assert np.max(np.abs(a.amplitude("1", "2").data - b.amplitude("1", "2").data)) < 1e-12
    assert a.total_probability() == pytest.approx(1.0, abs=1e-10)


def test_state_mode_params_used_by_default():
    g = make_grid(64, 0.25)
    s = _state(g, product_gaussian(g, 1.0), m1=ModeParams(beta2=1.0))
    a = apply_dispersion(s, DispersionOp("1", 1.0))
    b = apply_dispersion(s, DispersionOp("1", 1.0, ModeParams(beta2=1.0)))
    assert np.array_equal(a.amplitude("1", "2").data, b.amplitude("1", "2").data)


# -------------------------------------------------------- phase modulation

def test_zero_length_modulator_is_identity():
    g = make_grid(32, 0.25)
    s = _state(g, product_gaussian(g, 1.0))
    assert apply_phase_mod(s, PhaseModOp("1", np.sin(g.t), 0.0)) is s


def test_quadratic_phase_chirps_spectrum_only():
    g = make_grid(512, 0.05)
    sigma = 1.0
    s = _state(g, product_gaussian(g, sigma))
    lens = time_lens(g, "1", 2.0)
    out = apply_phase_mod(s, lens).amplitude("1", "2")
    assert np.allclose(np.abs(out.data), np.abs(s.amplitude("1", "2").data), atol=1e-15)

    def spec_rms(a):
        X = forward_transform(a.data, g, axis=0)
        p = np.sum(np.abs(X) ** 2, axis=1)
        p = p / p.sum()
        return np.sqrt(np.sum(p * g.omega**2))

    # exp(-t^2/(2 s^2) + i f t^2/2): |X|^2 rms = sqrt((1/s^4 + f^2) s^2 / 2)
    oracle = np.sqrt((1 / sigma**4 + 4.0) * sigma**2 / 2)
    assert spec_rms(out) == pytest.approx(oracle, rel=1e-6)
    assert spec_rms(out) > spec_rms(s.amplitude("1", "2"))


def test_rect_aperture_loss_equals_in_window_fraction():
    g = make_grid(256, 0.1)
    f = np.exp(-(g.t**2) / 8)
    f = f / np.sqrt(np.sum(f**2) * g.dt)
    s = _state(g, product_amplitude(g, f, f))
    T_a = 2.0
    ap = rect_window(g, T_a)
    out = apply_phase_mod(s, PhaseModOp("1", np.zeros(g.n), 1.0, ap))
    inside = np.sum(f[np.abs(g.t) <= T_a / 2] ** 2) * g.dt
    assert out.total_probability() == pytest.approx(inside, rel=1e-12)


def test_modulation_grid_mismatch():
    g = make_grid(32, 0.25)
    s = _state(g, product_gaussian(g, 1.0))
    with pytest.raises(ValueError):
        apply_phase_mod(s, PhaseModOp("1", np.zeros(16)))


def test_aperture_range_checked():
    with pytest.raises(ValueError):
        PhaseModOp("1", np.zeros(8), 1.0, np.full(8, 1.5))


@given(st.integers(0, 2**31 - 1))
def test_phase_modulation_preserves_density(seed):
    r = np.random.default_rng(seed)
    g = make_grid(64, 0.25)
    amp = correlated_gaussian(g, 2.0, 1.0)
    s = TwoPhotonState({"1": ModeParams(), "2": ModeParams()}, {("1", "2"): amp, ("1", "1"): amp})
    s = normalize(s)
    mod = r.normal(size=g.n)
    out = apply_phase_mod(s, PhaseModOp("1", mod, float(r.uniform(0, 3))))
    for k in s.pairs:
        assert np.allclose(np.abs(out.pairs[k].data), np.abs(s.pairs[k].data), rtol=0, atol=1e-15)
    assert out.total_probability() == pytest.approx(1.0, abs=1e-10)
    assert exchange_asymmetry(out) == 0.0


def test_sequence_runs_in_order():
    g = make_grid(64, 0.25)
    s = _state(g, product_gaussian(g, 1.0))
    ops = [DispersionOp("1", 1.0, ModeParams(beta2=1.0)), time_lens(g, "1", 1.0), DispersionOp("1", 1.0, ModeParams(beta2=1.0))]
    manual = apply_dispersion(apply_phase_mod(apply_dispersion(s, ops[0]), ops[1]), ops[2])
    assert np.array_equal(dispersion_sequence(s, ops).amplitude("1", "2").data, manual.amplitude("1", "2").data)
