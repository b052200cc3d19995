"""Temporal imaging of one photon: residual against the ideal image versus lens aperture."""

import argparse

import numpy as np

from twophoton.grid import make_grid
from twophoton.imaging import (
    ImagingSystem,
    feature_size,
    measured_magnification,
    predict_image,
    relative_l2,
    run_imaging_system,
)
from twophoton.state import correlated_gaussian, single_pair_state


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--beta2L", type=float, default=1.0, help="input dispersion [ps^2]")
    ap.add_argument("--focal", type=float, default=3.0, help="lens strength [1/ps^2]")
    ap.add_argument("--margins", type=float, nargs="+", default=[5, 10, 20, 40, 80])
    args = ap.parse_args()

    g = make_grid(512, 0.05)
    a = correlated_gaussian(g, 2.0, 0.5, t_center_pair=0.3)
    T0 = feature_size(a, 0)
    ideal = ImagingSystem.from_lens_law(args.beta2L, args.focal, 0.5, 0.3, 1.0)
    print(f"M = {ideal.M:.4f}, t_d = {ideal.t_d:.4f} ps, feature size {T0:.3f} ps")
    print(f"{'window':>9} {'margin':>7} {'L2 error':>10} {'measured M':>11}")
    cases = [("ideal", None)] + [(w, m) for w in ("rect", "gaussian") for m in args.margins]
    for window, margin in cases:
        ap_width = None if margin is None else margin * args.beta2L / T0
        sys_ = ImagingSystem.from_lens_law(args.beta2L, args.focal, 0.5, 0.3, 1.0, aperture=ap_width, window=window)
        out = run_imaging_system(single_pair_state(a), sys_, "1").amplitude("1", "2")
        err = relative_l2(np.abs(out.data), np.abs(predict_image(a, sys_, 0).data))
        M = measured_magnification(a, out, 0)
        print(f"{window:>9} {'inf' if margin is None else f'{margin:g}':>7} {err:10.3e} {M:11.5f}")


if __name__ == "__main__":
    main()
