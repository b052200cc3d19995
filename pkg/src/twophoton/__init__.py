"""Two-photon temporal amplitudes through dispersion, time lenses, couplers and Kerr media."""

from .coupling import CouplingMatrix, n_mode_coupler, two_mode_coupler
from .grid import TimeGrid, make_grid
from .imaging import ImageTransform, ImagingSystem, predict_image, solve_lens_law
from .linear import DispersionOp, PhaseModOp, apply_dispersion, apply_phase_mod, time_lens
from .nonlinear import (
    NonlinearParams,
    SolitonSpec,
    finite_bandwidth_bound_states,
    first_order_check,
    fwm_split_step,
    soliton_amplitude,
    soliton_mean_time_spread,
    xpm_propagate,
)
from .observables import MomentReport, coincidence_density, hom_dip_scan, moments, overlap, schmidt_number
from .state import (
    BiphotonAmplitude,
    ModeParams,
    TwoPhotonState,
    correlated_gaussian,
    from_spectrum,
    normalize,
    product_gaussian,
    single_pair_state,
    to_spectrum,
)

__all__ = [
    "TimeGrid",
    "make_grid",
    "ModeParams",
    "BiphotonAmplitude",
    "TwoPhotonState",
    "single_pair_state",
    "normalize",
    "to_spectrum",
    "from_spectrum",
    "correlated_gaussian",
    "product_gaussian",
    "DispersionOp",
    "PhaseModOp",
    "apply_dispersion",
    "apply_phase_mod",
    "time_lens",
    "ImagingSystem",
    "ImageTransform",
    "solve_lens_law",
    "predict_image",
    "CouplingMatrix",
    "n_mode_coupler",
    "two_mode_coupler",
    "NonlinearParams",
    "SolitonSpec",
    "xpm_propagate",
    "first_order_check",
    "fwm_split_step",
    "soliton_amplitude",
    "soliton_mean_time_spread",
    "finite_bandwidth_bound_states",
    "MomentReport",
    "coincidence_density",
    "moments",
    "schmidt_number",
    "overlap",
    "hom_dip_scan",
]
