#!/usr/bin/env python3
"""Hurst estimation error on synthetic fBm over a grid of H values.

    python3 scripts/hurst_calibration.py --paths 50 --n 16384
"""
import argparse

import numpy as np

from murmurscale.monofractal import spectrum_slope, wavelet_spectrum
from murmurscale.synth import fbm
from murmurscale.wavelets import dwt_forward, make_filter


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=50)
    ap.add_argument("--n", type=int, default=2 ** 14)
    ap.add_argument("--wavelet", default="db6")
    ap.add_argument("--j-min", type=int, default=5)
    ap.add_argument("--j-max", type=int, default=12)
    ap.add_argument("--boundary", choices=("periodic", "interior"), default="interior")
    ap.add_argument("--hurst", type=float, nargs="+", default=[0.2, 0.3, 0.5, 0.7, 0.8])
    args = ap.parse_args()

    filt = make_filter(args.wavelet)
    print(f"{'H':>5} {'mean H^':>8} {'bias':>8} {'mean |err|':>10} {'<=0.2':>6}")
    for h in args.hurst:
        est = []
        for seed in range(args.paths):
            y = fbm(args.n, h, np.random.default_rng([seed, int(round(h * 100))]))
            spec = wavelet_spectrum(dwt_forward(y, filt), args.boundary)
            est.append(spectrum_slope(spec, args.j_min, args.j_max).hurst)
        est = np.array(est)
        err = np.abs(est - h)
        print(f"{h:5.2f} {est.mean():8.3f} {est.mean() - h:+8.3f} {err.mean():10.3f} "
              f"{np.mean(err <= 0.2):6.0%}")


if __name__ == "__main__":
    main()
