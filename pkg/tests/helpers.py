"""Shared builders for the test suite."""

import numpy as np

from bvschro.bvcalc import PiecewiseBV, SignedMeasure


def random_piecewise(rng, n_breaks=(1, 10), span=3.0, max_deg=3, amp=1.0):
    nb = rng.integers(n_breaks[0], n_breaks[1] + 1)
    bps = np.unique(np.sort(rng.uniform(-span, span, nb)))
    pieces = [rng.uniform(-amp, amp, rng.integers(1, max_deg + 2))
              for _ in range(len(bps) + 1)]
    return PiecewiseBV(bps, pieces)


def random_measure(rng, span=3.0, n_atoms=3):
    dens = random_piecewise(rng, n_breaks=(1, 5), span=span, amp=1.0)
    atoms = [(float(x), float(m)) for x, m in
             zip(rng.uniform(-span, span, n_atoms), rng.uniform(-2, 2, n_atoms))]
    return SignedMeasure(dens, atoms)


def bounded_window_tv(diff, pad=1.0):
    """Total variation of a measure over the hull of its breakpoints + pad."""
    total = sum(abs(m) for _, m in diff.atoms)
    dens = diff.density
    if dens.breakpoints.size:
        total += dens.abs().integrate_interval(dens.breakpoints[0] - pad,
                                               dens.breakpoints[-1] + pad)
    return total
