"""Hot inner loops, compiled with numba when available.

Set the environment variable ``TBSIM_NO_NUMBA=1`` to force the pure
NumPy/Python fallback path (same functions, uncompiled, bit-identical
results).  ``benchmarks/bench_kernels.py`` compares the two paths.

Kernels are RNG-free: callers pass in pre-drawn uniform arrays from
``tbsim.rng`` so both backends consume identical random streams.
"""

from __future__ import annotations

import os

import numpy as np

USE_NUMBA = os.environ.get("TBSIM_NO_NUMBA", "0") != "1"

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

if USE_NUMBA:
    def _jit(f):
        return njit(cache=True)(f)
else:
    def _jit(f):
        return f


def telegraph_py(uniforms, p_on_to_off, p_off_to_on, start_on):
    """Two-state Markov chain; one uniform per step decides the transition.

    Returns an int8 array: 1 = ON, 0 = OFF.  The stationary ON fraction is
    p_off_on / (p_on_off + p_off_on).
    """
    n = len(uniforms)
    out = np.empty(n, dtype=np.int8)
    state = 1 if start_on else 0
    for i in range(n):
        out[i] = state
        if state == 1:
            if uniforms[i] < p_on_to_off:
                state = 0
        else:
            if uniforms[i] < p_off_to_on:
                state = 1
    return out


def pair_delay_counts_py(starts, stops, lo, bin_width, nbins):
    """Histogram of stop - start delays over all pairs with delay in range.

    Both inputs must be sorted ascending.  Bin i covers
    [lo + i*bin_width, lo + (i+1)*bin_width).
    """
    counts = np.zeros(nbins, dtype=np.int64)
    hi = lo + bin_width * nbins
    j_lo = 0
    n_stops = len(stops)
    for a in starts:
        while j_lo < n_stops and stops[j_lo] - a < lo:
            j_lo += 1
        j = j_lo
        while j < n_stops:
            d = stops[j] - a
            if d >= hi:
                break
            counts[int((d - lo) / bin_width)] += 1
            j += 1
    return counts


def dead_time_mask_py(times, dead_time):
    """Keep-mask for a sorted single-channel time series with dead time."""
    n = len(times)
    mask = np.zeros(n, dtype=np.bool_)
    last = -np.inf
    for i in range(n):
        if times[i] - last >= dead_time:
            mask[i] = True
            last = times[i]
    return mask


telegraph = _jit(telegraph_py)
pair_delay_counts = _jit(pair_delay_counts_py)
dead_time_mask = _jit(dead_time_mask_py)
