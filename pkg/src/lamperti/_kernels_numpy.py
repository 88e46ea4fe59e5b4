"""Vectorized numpy implementation of the trajectory kernels.

Replicas advance in lockstep with boolean masks; each op mutates the
per-replica state arrays in place and returns the number of simulated
steps. The draw order within a replica is fixed by the counter RNG, so
lockstep execution here and the serial loops in the numba twin produce
identical trajectories.

Every op checks the jump-table bound *before* tallying or drawing for a
step, which makes pausing on NEED_EXTEND exactly resumable: the paused
replica has consumed nothing of the step it could not take.
"""

from __future__ import annotations

import numpy as np

from ._rng import GOLD, mix64
from .kernels import DONE, FAILED, NEED_EXTEND, RUN

_TO_UNIT = 2.0 ** -53


def _resume_mask(status: np.ndarray) -> np.ndarray:
    mask = (status == RUN) | (status == NEED_EXTEND)
    status[mask] = RUN
    return mask


def _draw(key: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Advance the selected keys one draw and return uniforms in [0, 1)."""
    with np.errstate(over="ignore"):
        key[idx] = key[idx] + GOLD
        bits = mix64(key[idx]) >> np.uint64(11)
    return bits.astype(np.float64) * _TO_UNIT


def _pick_offsets(row_ptr, offsets, cdf, rows, u):
    """Smallest cdf entry above u in each row, via a short bounded scan."""
    j = row_ptr[rows].copy()
    while True:
        need = u >= cdf[j]
        if not need.any():
            return offsets[j]
        j[need] += 1


def _sift(run, state, lo, n_states, status):
    """Split the running mask by table coverage, flagging the rest."""
    rows = state - lo
    bad = run & (rows < 0)
    status[bad] = FAILED
    oob = run & (rows >= n_states)
    status[oob] = NEED_EXTEND
    return run & ~(bad | oob), rows


def walk_replicas(lo, row_ptr, offsets, cdf, state, step, key, status, n_steps):
    """Advance each running replica up to n_steps total steps."""
    active = _resume_mask(status)
    n_states = len(row_ptr) - 1
    events = 0
    while True:
        run = active & (status == RUN) & (step < n_steps)
        if not run.any():
            break
        run, rows = _sift(run, state, lo, n_states, status)
        if not run.any():
            break
        idx = np.nonzero(run)[0]
        u = _draw(key, idx)
        state[idx] += _pick_offsets(row_ptr, offsets, cdf, rows[idx], u)
        step[idx] += 1
        events += len(idx)
    done = active & (status == RUN) & (step >= n_steps)
    status[done] = DONE
    return events


def walk_occupation(lo, row_ptr, offsets, cdf, state, step, key, status,
                    n_steps, hist2, h_lo):
    """Like walk_replicas, tallying each replica's visits in a window.

    ``hist2[i, x - h_lo]`` counts the times t = 0 .. n_steps-1 replica i
    sat at x; the state after the final move is left untallied.
    """
    active = _resume_mask(status)
    n_states = len(row_ptr) - 1
    h_len = hist2.shape[1]
    events = 0
    while True:
        run = active & (status == RUN) & (step < n_steps)
        if not run.any():
            break
        run, rows = _sift(run, state, lo, n_states, status)
        if not run.any():
            break
        idx = np.nonzero(run)[0]
        h = state[idx] - h_lo
        ok = (h >= 0) & (h < h_len)
        np.add.at(hist2, (idx[ok], h[ok]), 1)
        u = _draw(key, idx)
        state[idx] += _pick_offsets(row_ptr, offsets, cdf, rows[idx], u)
        step[idx] += 1
        events += len(idx)
    done = active & (status == RUN) & (step >= n_steps)
    status[done] = DONE
    return events


def first_passage(lo, row_ptr, offsets, cdf, state, step, key, status,
                  target, horizon, below_level, below_count, reached):
    """Run until the state first exceeds target (or the horizon expires).

    ``step`` ends up holding the passage time for replicas that reached,
    and ``below_count`` the number of times t < T with X_t <= below_level.
    """
    active = _resume_mask(status)
    n_states = len(row_ptr) - 1
    events = 0
    while True:
        run = active & (status == RUN)
        done = run & (state > target)
        status[done] = DONE
        reached[done] = 1
        expired = run & ~done & (step >= horizon)
        status[expired] = DONE
        reached[expired] = 0
        run &= ~(done | expired)
        if not run.any():
            break
        run, rows = _sift(run, state, lo, n_states, status)
        if not run.any():
            break
        idx = np.nonzero(run)[0]
        below_count[idx[state[idx] <= below_level]] += 1
        u = _draw(key, idx)
        state[idx] += _pick_offsets(row_ptr, offsets, cdf, rows[idx], u)
        step[idx] += 1
        events += len(idx)
    return events


def ever_hit(lo, row_ptr, offsets, cdf, state, step, key, status,
             low, horizon, hit):
    """Flag replicas whose state ever drops to low or below within the horizon."""
    active = _resume_mask(status)
    n_states = len(row_ptr) - 1
    events = 0
    while True:
        run = active & (status == RUN)
        found = run & (state <= low)
        status[found] = DONE
        hit[found] = 1
        expired = run & ~found & (step >= horizon)
        status[expired] = DONE
        run &= ~(found | expired)
        if not run.any():
            break
        run, rows = _sift(run, state, lo, n_states, status)
        if not run.any():
            break
        idx = np.nonzero(run)[0]
        u = _draw(key, idx)
        state[idx] += _pick_offsets(row_ptr, offsets, cdf, rows[idx], u)
        step[idx] += 1
        events += len(idx)
    return events


def long_run(lo, row_ptr, offsets, cdf, state, step, key, status,
             n_steps, hist, hist_lo, mark, crossings, prev_below,
             block=1 << 16):
    """Single long trajectory: occupation histogram plus block entries.

    ``crossings`` counts transitions from above ``mark`` to at-or-below it
    (the start counts when it begins at or below). Uniforms are produced a
    block at a time from the counter RNG, so pausing for a table rebuild
    costs nothing but a recomputed block.
    """
    if status[0] == NEED_EXTEND:
        status[0] = RUN
    if status[0] != RUN:
        return 0
    n_states = len(row_ptr) - 1
    hist_len = len(hist)
    events = 0
    x = int(state[0])
    t = int(step[0])
    k = key[0]
    below = bool(prev_below[0])
    cross = int(crossings[0])
    while t < n_steps:
        todo = min(block, n_steps - t)
        with np.errstate(over="ignore"):
            keys = k + GOLD * np.arange(1, todo + 1, dtype=np.uint64)
            us = (mix64(keys) >> np.uint64(11)).astype(np.float64) * _TO_UNIT
        used = 0
        for u in us:
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
            j = row_ptr[row]
            while u >= cdf[j]:
                j += 1
            x += int(offsets[j])
            t += 1
            used += 1
        events += used
        with np.errstate(over="ignore"):
            k = k + GOLD * np.uint64(used)
        if status[0] != RUN:
            break
    if t >= n_steps:
        status[0] = DONE
    state[0] = x
    step[0] = t
    key[0] = k
    prev_below[0] = 1 if below else 0
    crossings[0] = cross
    return events
