"""Brute-force reference computations shared by the tests."""

import numpy as np

from pcmaps.pcmap import _branch_jets, affine_between


def brute_comp(f, g, r=0, points=200_001):
    """Dense-grid evaluation of the piecewise comparison sum."""
    total = sum(abs(a - b) for a, b in zip(f.breakpoints, g.breakpoints))
    for i in range(1, f.N + 1):
        pf, pg = f.piece(i), g.piece(i)
        xs = np.linspace(pf[0], pf[1], points)
        ys = affine_between(xs, pf, pg)
        F, G = _branch_jets(f, i, xs, r), _branch_jets(g, i, ys, r)
        total += sum(float(np.max(np.abs(F[j] - G[j]))) for j in range(r + 1))
    return total


def brute_dist(f, g, r=0, points=200_001):
    """Dense-grid evaluation of the uniform distance off the breakpoints."""
    total = sum(abs(a - b) for a, b in zip(f.breakpoints, g.breakpoints))
    cuts = np.union1d(f.cuts, g.cuts)
    sups = [0.0] * (r + 1)
    for a, b in zip(cuts[:-1], cuts[1:]):
        xs = np.linspace(a, b, points)  # sup off the breakpoints = max over the closed cell
        m = 0.5 * (a + b)
        p = int(np.searchsorted(f.breakpoints, m)) + 1
        q = int(np.searchsorted(g.breakpoints, m)) + 1
        F, G = _branch_jets(f, p, xs, r), _branch_jets(g, q, xs, r)
        for j in range(r + 1):
            sups[j] = max(sups[j], float(np.max(np.abs(F[j] - G[j]))))
    return total + sum(sups)
