"""Numba-compiled trajectory kernels, the fast twin of _kernels_numpy.

Each op is a serial loop over replicas. Because the RNG is a per-replica
counter stream and every op checks the jump-table bound before tallying
or drawing, the trajectories here match the lockstep numpy backend bit
for bit. Keep the step order in each op aligned with the numpy file when
editing either one.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._rng import GOLD as _GOLD
from ._rng import _MIX1, _MIX2
from .kernels import DONE, FAILED, NEED_EXTEND, RUN

_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TO_UNIT = 2.0 ** -53


@njit(cache=True)
def _mix64(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(cache=True)
def _uniform(key):
    key = key + _GOLD
    u = np.float64(_mix64(key) >> _S11) * _TO_UNIT
    return u, key


@njit(cache=True)
def walk_replicas(lo, row_ptr, offsets, cdf, state, step, key, status, n_steps):
    n_states = len(row_ptr) - 1
    events = 0
    for i in range(len(state)):
        if status[i] != RUN and status[i] != NEED_EXTEND:
            continue
        status[i] = RUN
        x = state[i]
        t = step[i]
        k = key[i]
        while t < n_steps:
            row = x - lo
            if row < 0:
                status[i] = FAILED
                break
            if row >= n_states:
                status[i] = NEED_EXTEND
                break
            u, k = _uniform(k)
            j = row_ptr[row]
            while u >= cdf[j]:
                j += 1
            x += offsets[j]
            t += 1
            events += 1
        if status[i] == RUN and t >= n_steps:
            status[i] = DONE
        state[i] = x
        step[i] = t
        key[i] = k
    return events


@njit(cache=True)
def walk_occupation(lo, row_ptr, offsets, cdf, state, step, key, status,
                    n_steps, hist2, h_lo):
    n_states = len(row_ptr) - 1
    h_len = hist2.shape[1]
    events = 0
    for i in range(len(state)):
        if status[i] != RUN and status[i] != NEED_EXTEND:
            continue
        status[i] = RUN
        x = state[i]
        t = step[i]
        k = key[i]
        while t < n_steps:
            row = x - lo
            if row < 0:
                status[i] = FAILED
                break
            if row >= n_states:
                status[i] = NEED_EXTEND
                break
            h = x - h_lo
            if 0 <= h < h_len:
                hist2[i, h] += 1
            u, k = _uniform(k)
            j = row_ptr[row]
            while u >= cdf[j]:
                j += 1
            x += offsets[j]
            t += 1
            events += 1
        if status[i] == RUN and t >= n_steps:
            status[i] = DONE
        state[i] = x
        step[i] = t
        key[i] = k
    return events


@njit(cache=True)
def first_passage(lo, row_ptr, offsets, cdf, state, step, key, status,
                  target, horizon, below_level, below_count, reached):
    n_states = len(row_ptr) - 1
    events = 0
    for i in range(len(state)):
        if status[i] != RUN and status[i] != NEED_EXTEND:
            continue
        status[i] = RUN
        x = state[i]
        t = step[i]
        k = key[i]
        while True:
            if x > target:
                status[i] = DONE
                reached[i] = 1
                break
            if t >= horizon:
                status[i] = DONE
                reached[i] = 0
                break
            row = x - lo
            if row < 0:
                status[i] = FAILED
                break
            if row >= n_states:
                status[i] = NEED_EXTEND
                break
            if x <= below_level:
                below_count[i] += 1
            u, k = _uniform(k)
            j = row_ptr[row]
            while u >= cdf[j]:
                j += 1
            x += offsets[j]
            t += 1
            events += 1
        state[i] = x
        step[i] = t
        key[i] = k
    return events


@njit(cache=True)
def ever_hit(lo, row_ptr, offsets, cdf, state, step, key, status,
             low, horizon, hit):
    n_states = len(row_ptr) - 1
    events = 0
    for i in range(len(state)):
        if status[i] != RUN and status[i] != NEED_EXTEND:
            continue
        status[i] = RUN
        x = state[i]
        t = step[i]
        k = key[i]
        while True:
            if x <= low:
                status[i] = DONE
                hit[i] = 1
                break
            if t >= horizon:
                status[i] = DONE
                break
            row = x - lo
            if row < 0:
                status[i] = FAILED
                break
            if row >= n_states:
                status[i] = NEED_EXTEND
                break
            u, k = _uniform(k)
            j = row_ptr[row]
            while u >= cdf[j]:
                j += 1
            x += offsets[j]
            t += 1
            events += 1
        state[i] = x
        step[i] = t
        key[i] = k
    return events


@njit(cache=True)
def long_run(lo, row_ptr, offsets, cdf, state, step, key, status,
             n_steps, hist, hist_lo, mark, crossings, prev_below):
    if status[0] == NEED_EXTEND:
        status[0] = RUN
    if status[0] != RUN:
        return 0
    n_states = len(row_ptr) - 1
    hist_len = len(hist)
    events = 0
    x = state[0]
    t = step[0]
    k = key[0]
    below = prev_below[0] != 0
    cross = crossings[0]
    while t < n_steps:
        row = x - lo
        if row < 0:
            status[0] = FAILED
            break
        if row >= n_states:
            status[0] = NEED_EXTEND
            break
        h = x - hist_lo
        if 0 <= h < hist_len:
            hist[h] += 1
        now_below = x <= mark
        if now_below and not below:
            cross += 1
        below = now_below
        u, k = _uniform(k)
        j = row_ptr[row]
        while u >= cdf[j]:
            j += 1
        x += offsets[j]
        t += 1
        events += 1
    if status[0] == RUN and t >= n_steps:
        status[0] = DONE
    state[0] = x
    step[0] = t
    key[0] = k
    prev_below[0] = 1 if below else 0
    crossings[0] = cross
    return events
