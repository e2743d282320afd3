"""Compiled per-sample loop of the estimator's active phase.

Buffers are sample-major (``n x d``).  Indices into the previous loop are
local (0 at the loop's first sample); the caller translates them.
"""
import math

import numpy as np
from numba import njit

FULL = 0
WINDOWED = 1
TIME_PENALIZED = 2

# int state slots
I_PREV_START = 0
I_CUR_START = 1
I_N_PREV = 2
I_N_CUR = 3
I_LAST_MATCH = 4
I_LOOP = 5
N_INT = 6
# float state slots
F_LAST_PHASE = 0  # loop-relative phase, without the offset
F_OFFSET = 1
N_FLOAT = 2

TWO_PI = 2.0 * math.pi
# objective values this close to the minimum count as ties (smallest index wins)
TIE_TOL = 1e-10


@njit(cache=True)
def _sq_dists(buf, n, x, out):
    top = 0.0
    d = x.shape[0]
    for h in range(n):
        s = 0.0
        for q in range(d):
            r = buf[h, q] - x[q]
            s += r * r
        out[h] = s
        if s > top:
            top = s
    return top


@njit(cache=True)
def _first_min(vals, lo, hi, best_val):
    for h in range(lo, hi + 1):
        if vals[h] <= best_val + TIE_TOL:
            return h
    return -1


@njit(cache=True)
def _search(prev_p, prev_v, n, p, v, mode, last, dm, dp, elapsed, dp2, dv2):
    # objective values are written over dp2
    mp = math.sqrt(_sq_dists(prev_p, n, p, dp2))
    mv = math.sqrt(_sq_dists(prev_v, n, v, dv2))
    ip = 1.0 / mp if mp > 0.0 else 0.0
    iv = 1.0 / mv if mv > 0.0 else 0.0

    if mode == WINDOWED:
        # window around the last match, wrapping past either loop end, as an
        # ascending head and tail; the forward wrap counts n-1 -> 0 as no step
        lo = last - dm
        hi = last + dp
        if dm + dp >= n - 1:
            head_hi = n - 1
            tail_lo = n
        elif hi <= n - 1 and lo >= 0:
            head_hi = -1
            tail_lo = lo
        elif hi <= n - 1:
            head_hi = hi
            tail_lo = n + lo
        else:
            head_hi = hi - n + 1
            tail_lo = lo
        tail_hi = n - 1 if head_hi >= 0 else hi
        best_val = np.inf
        for h in range(0, head_hi + 1):
            dp2[h] = math.sqrt(dp2[h]) * ip + math.sqrt(dv2[h]) * iv
            if dp2[h] < best_val:
                best_val = dp2[h]
        for h in range(tail_lo, tail_hi + 1):
            dp2[h] = math.sqrt(dp2[h]) * ip + math.sqrt(dv2[h]) * iv
            if dp2[h] < best_val:
                best_val = dp2[h]
        h = _first_min(dp2, 0, head_hi, best_val)
        if h >= 0:
            return h
        return _first_min(dp2, tail_lo, tail_hi, best_val)

    smax = 0.0
    if mode == TIME_PENALIZED:
        for h in range(n):
            s = min(abs(h - elapsed), abs(h + n - elapsed))
            if s > smax:
                smax = s
    isg = 1.0 / smax if smax > 0.0 else 0.0
    best_val = np.inf
    for h in range(n):
        val = math.sqrt(dp2[h]) * ip + math.sqrt(dv2[h]) * iv
        if mode == TIME_PENALIZED:
            val += min(abs(h - elapsed), abs(h + n - elapsed)) * isg
        dp2[h] = val
        if val < best_val:
            best_val = val
    return _first_min(dp2, 0, n - 1, best_val)


@njit(cache=True, nogil=True)
def advance(pos, vel, k0, prev_p, prev_v, cur_p, cur_v, ints, floats,
            mode, dm, dp, min_period, out_theta, out_h, out_loop, out_boundary):
    """Run the active state machine over ``pos``/``vel`` starting at sample ``k0``.

    Returns the number of samples consumed; fewer than ``len(pos)`` means the
    current-loop buffer is full and must be grown before resuming.
    """
    cap = cur_p.shape[0]
    dp2 = np.empty(cap)
    dv2 = np.empty(cap)
    for j in range(pos.shape[0]):
        n_cur = ints[I_N_CUR]
        if n_cur >= cap:
            return j
        k = k0 + j
        p = pos[j]
        v = vel[j]
        n_prev = ints[I_N_PREV]
        elapsed = k - ints[I_CUR_START]
        h = _search(prev_p, prev_v, n_prev, p, v, mode, ints[I_LAST_MATCH], dm, dp, elapsed, dp2, dv2)
        rel = TWO_PI * h / n_prev
        theta = (rel + floats[F_OFFSET]) % TWO_PI
        if theta >= TWO_PI:
            theta = 0.0
        out_h[j] = ints[I_PREV_START] + h
        last = floats[F_LAST_PHASE]
        # boundaries follow the loop-relative phase so the offset cannot move them
        if (not math.isnan(last)) and rel - last < -math.pi and n_cur >= min_period:
            # close the current loop at k and promote it to previous
            for r in range(n_cur):
                for q in range(p.shape[0]):
                    prev_p[r, q] = cur_p[r, q]
                    prev_v[r, q] = cur_v[r, q]
            ints[I_N_PREV] = n_cur
            ints[I_PREV_START] = ints[I_CUR_START]
            ints[I_CUR_START] = k
            ints[I_N_CUR] = 0
            ints[I_LOOP] += 1
            ints[I_LAST_MATCH] = _search(prev_p, prev_v, n_cur, p, v, FULL, 0, 0, 0, 0, dp2, dv2)
            out_boundary[j] = True
            n_cur = 0
        else:
            ints[I_LAST_MATCH] = h
            out_boundary[j] = False
        for q in range(p.shape[0]):
            cur_p[n_cur, q] = p[q]
            cur_v[n_cur, q] = v[q]
        ints[I_N_CUR] = n_cur + 1
        floats[F_LAST_PHASE] = rel
        out_theta[j] = theta
        out_loop[j] = ints[I_LOOP]
    return pos.shape[0]
