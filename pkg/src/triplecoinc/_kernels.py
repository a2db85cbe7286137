"""Compiled event-stream kernels (numba, nopython).

All times are int64 picoseconds. Bin index of a delay tau is
floor((2*tau + dt) / (2*dt)), i.e. floor((tau + dt/2)/dt) without rounding.
"""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def dead_time_mask(times, dead):
    n = times.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    if n == 0:
        return keep
    last = times[0]
    keep[0] = True
    for a in range(1, n):
        if times[a] - last >= dead:
            keep[a] = True
            last = times[a]
    return keep


@njit(cache=True, nogil=True)
def pair_histogram_kernel(ti, tj, tau_max, dt, n_side, out):
    """Two-pointer sweep: for each ti, visit every tj with |ti - tj| < tau_max."""
    m = tj.shape[0]
    lo = 0
    two_dt = 2 * dt
    for a in range(ti.shape[0]):
        t = ti[a]
        while lo < m and tj[lo] <= t - tau_max:
            lo += 1
        b = lo
        while b < m and tj[b] < t + tau_max:
            k = (2 * (t - tj[b]) + dt) // two_dt
            if -n_side <= k <= n_side:
                out[k + n_side] += 1
            b += 1


@njit(cache=True, nogil=True)
def triple_histogram_kernel(t1, t2, t3, tau_max, dt, n_side, out):
    """Windowed merge over channel 1 with sliding [lo, hi) windows in 2 and 3.

    Cost is O(n1 + n2 + n3 + sum over t1 of w2 * w3).
    """
    n2 = t2.shape[0]
    n3 = t3.shape[0]
    if t1.shape[0] == 0 or n2 == 0 or n3 == 0:
        return
    two_dt = 2 * dt
    start = t1[0] - tau_max
    lo2 = np.searchsorted(t2, start, side="right")
    lo3 = np.searchsorted(t3, start, side="right")
    hi2 = lo2
    hi3 = lo3
    for a in range(t1.shape[0]):
        t = t1[a]
        while lo2 < n2 and t2[lo2] <= t - tau_max:
            lo2 += 1
        while lo3 < n3 and t3[lo3] <= t - tau_max:
            lo3 += 1
        if hi2 < lo2:
            hi2 = lo2
        if hi3 < lo3:
            hi3 = lo3
        while hi2 < n2 and t2[hi2] < t + tau_max:
            hi2 += 1
        while hi3 < n3 and t3[hi3] < t + tau_max:
            hi3 += 1
        for b in range(lo2, hi2):
            k = (2 * (t - t2[b]) + dt) // two_dt
            if k < -n_side or k > n_side:
                continue
            for c in range(lo3, hi3):
                ell = (2 * (t - t3[c]) + dt) // two_dt
                if -n_side <= ell <= n_side:
                    out[k + n_side, ell + n_side] += 1


@njit(cache=True, nogil=True)
def pair_histogram_linear_kernel(ti, tj, tau_max, dt, n_side, out):
    """Like pair_histogram_kernel but splits each delay between the two nearest
    bin centers with weights (dt - r, r), r = tau mod dt; ``out`` is in units of 1/dt."""
    m = tj.shape[0]
    lo = 0
    for a in range(ti.shape[0]):
        t = ti[a]
        while lo < m and tj[lo] <= t - tau_max:
            lo += 1
        b = lo
        while b < m and tj[b] < t + tau_max:
            tau = t - tj[b]
            k = tau // dt
            r = tau - k * dt
            if -n_side <= k <= n_side:
                out[k + n_side] += dt - r
            if r > 0 and -n_side <= k + 1 <= n_side:
                out[k + 1 + n_side] += r
            b += 1
