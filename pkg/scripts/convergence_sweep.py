"""Split-step error versus step size with every interaction switched on."""

import argparse

import numpy as np

from twophoton.grid import make_grid
from twophoton.nonlinear import NonlinearParams, fwm_split_step
from twophoton.state import ModeParams, TwoPhotonState, correlated_gaussian, normalize, product_gaussian


def _state(g):
    a = correlated_gaussian(g, 1.0, 0.4)
    b = product_gaussian(g, 0.8, 0.8, 0.5, 0.5)
    pairs = {("1", "2"): a, ("1", "1"): b.scaled(0.4), ("2", "2"): a.scaled(0.2j)}
    modes = {"1": ModeParams(beta2=1.0), "2": ModeParams(beta2=-0.5)}
    return normalize(TwoPhotonState(modes, pairs))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--length", type=float, default=0.5)
    ap.add_argument("--reference-steps", type=int, default=2048)
    ap.add_argument("--steps", type=int, nargs="+", default=[16, 32, 64, 128, 256])
    args = ap.parse_args()

    g = make_grid(128, 0.1)
    s = _state(g)
    p = NonlinearParams(gamma=0.5, eta=1.5, chi=0.3, kappa=0.8, bandwidth=g.omega_nyquist / 2)
    L = args.length
    ref = fwm_split_step(s, p, None, L, L / args.reference_steps)
    pairs = [("1", "1"), ("1", "2"), ("2", "2")]
    prev = None
    print(f"{'steps':>6} {'dz':>10} {'max error':>12} {'ratio':>7}")
    for n in args.steps:
        out = fwm_split_step(s, p, None, L, L / n)
        err = max(np.max(np.abs(out.amplitude(*q).data - ref.amplitude(*q).data)) for q in pairs)
        ratio = f"{prev / err:7.3f}" if prev else ""
        print(f"{n:6d} {L / n:10.3g} {err:12.4e} {ratio}")
        prev = err


if __name__ == "__main__":
    main()
