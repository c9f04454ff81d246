#!/usr/bin/env python3
"""Compare the estimated multifractal spectrum of a binomial cascade with its closed form."""
import argparse

import numpy as np

from murmurscale.multifractal import (
    empirical_moments,
    legendre_spectrum,
    partition_function,
    spectrum_descriptors,
)
from murmurscale.synth import binomial_cascade, cascade_partition_function, cascade_spectrum
from murmurscale.wavelets import dwt_forward, make_filter


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, default=0.7)
    ap.add_argument("--depth", type=int, default=14)
    ap.add_argument("--j-min", type=int, default=3)
    args = ap.parse_args()

    q = np.arange(0.0, 8.01, 0.125)
    dec = dwt_forward(binomial_cascade(args.depth, args.p), make_filter("haar"))
    pf = partition_function(empirical_moments(dec, q, (args.j_min, args.depth)))
    ms = legendre_spectrum(pf)
    t_true = cascade_partition_function(q, args.p)
    a_true, f_true = cascade_spectrum(q, args.p)

    print(f"{'q':>5} {'T est':>9} {'T true':>9} {'alpha':>8} {'a true':>8} {'f':>8} {'f true':>8}")
    for row in zip(q, pf.t, t_true, ms.alpha, a_true, ms.f, f_true):
        if row[0] != round(row[0]):
            continue
        print("{:5.2f} {:9.4f} {:9.4f} {:8.4f} {:8.4f} {:8.4f} {:8.4f}".format(*row))
    d = spectrum_descriptors(ms)
    print(f"mode {d.spectral_mode:.4f}  broadness {d.broadness}  "
          f"monofractal flag {d.effectively_monofractal}")


if __name__ == "__main__":
    main()
