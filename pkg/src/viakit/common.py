"""Shared numeric conventions.

Extended reals are encoded with a finite sentinel so that grids and CSV
files stay plain float arrays: any value >= INF means "+infinity", and
<= -INF means "-infinity".  The sentinel is far above any usable time
horizon, so thresholding against it is always safe.
"""

import numpy as np

#: +infinity sentinel for times and values (seconds / cost units).
INF = 1e18

#: Integration aborts once a state norm passes this (finite-time blow-up).
BLOWUP_NORM = 1e12


def is_inf(v):
    """True where v encodes +infinity."""
    return np.asarray(v) >= INF


def is_neg_inf(v):
    return np.asarray(v) <= -INF


def fmt17(v):
    """Format one float with 17 significant digits; sentinels become inf."""
    v = float(v)
    if v >= INF:
        return "inf"
    if v <= -INF:
        return "-inf"
    return "%.17g" % v
