"""Hot numeric kernels.

Two families live here:

* grid evaluators that score many inter-sensing policies at once (the inner
  loop of every optimiser), with a numba loop and a batched-numpy twin;
* sequential event loops that drive the Monte-Carlo simulator. These are
  plain Python loops over numpy arrays, compiled by numba when enabled.

Every public name dispatches on ``intersense._accel.USE_NUMBA``; the ``*_py``,
``*_numpy`` and ``*_numba`` variants stay importable for tests and benchmarks.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit

PIVOT_TOL = 1e-12
_SERIES_CUTOFF = 1e-8


# --------------------------------------------------------------------------
# scalar helpers


def _relax_py(rate_sum, t):
    x = rate_sum * t
    if x < _SERIES_CUTOFF:
        return t * x * (0.5 - x / 6.0)
    return t + math.expm1(-x) / rate_sum


def _stationary_py(m, out):
    """Solve ``pi M = pi, sum(pi) = 1`` by Gaussian elimination.

    The last balance equation is replaced by the normalisation row. Returns
    False when a pivot falls below ``PIVOT_TOL`` times the largest entry,
    which happens for reducible chains with several stationary laws.
    """
    n = m.shape[0]
    a = np.empty((n, n + 1))
    scale = 0.0
    for i in range(n):
        for j in range(n):
            a[i, j] = m[j, i]
        a[i, i] -= 1.0
        a[i, n] = 0.0
    for j in range(n):
        a[n - 1, j] = 1.0
    a[n - 1, n] = 1.0
    for i in range(n):
        for j in range(n):
            if abs(a[i, j]) > scale:
                scale = abs(a[i, j])
    for col in range(n):
        piv = col
        best = abs(a[col, col])
        for r in range(col + 1, n):
            if abs(a[r, col]) > best:
                best = abs(a[r, col])
                piv = r
        if best <= PIVOT_TOL * scale:
            return False
        if piv != col:
            for j in range(col, n + 1):
                tmp = a[col, j]
                a[col, j] = a[piv, j]
                a[piv, j] = tmp
        for r in range(col + 1, n):
            f = a[r, col] / a[col, col]
            if f != 0.0:
                for j in range(col, n + 1):
                    a[r, j] -= f * a[col, j]
    for i in range(n - 1, -1, -1):
        s = a[i, n]
        for j in range(i + 1, n):
            s -= a[i, j] * out[j]
        out[i] = s / a[i, i]
    return True


_relax = njit(_relax_py)
_stationary = njit(_stationary_py)


# --------------------------------------------------------------------------
# per-channel four-state chain over a batch of (T_free, T_busy) pairs


def _fill_four_state(m, u, decay_b, decay_f, p_fa, p_md):
    # rows: (busy, sensed busy), (busy, sensed free), (free, sensed busy), (free, sensed free)
    p01_b = (1.0 - u) * (1.0 - decay_b)
    p01_f = (1.0 - u) * (1.0 - decay_f)
    p11_b = (1.0 - u) + u * decay_b
    p11_f = (1.0 - u) + u * decay_f
    probs = (p01_b, p01_f, p11_b, p11_f)
    for r in range(4):
        p = probs[r]
        m[r, 0] = (1.0 - p) * (1.0 - p_md)
        m[r, 1] = (1.0 - p) * p_md
        m[r, 2] = p * p_fa
        m[r, 3] = p * (1.0 - p_fa)


_fill_four_state_jit = njit(_fill_four_state)


def _dual_grid_loop(c, u, p_fa, p_md, t_free, t_busy, thr, intf, mu, unexp, ok):
    n = t_free.shape[0]
    m = np.empty((4, 4))
    pi = np.empty(4)
    for k in range(n):
        tf = t_free[k]
        tb = t_busy[k]
        _fill_four_state_jit(m, u, math.exp(-c * tb), math.exp(-c * tf), p_fa, p_md)
        if not _stationary(m, pi):
            ok[k] = False
            thr[k] = np.nan
            intf[k] = np.nan
            mu[k] = np.nan
            unexp[k] = np.nan
            continue
        ok[k] = True
        rf = _relax(c, tf)
        rb = _relax(c, tb)
        d1f = tf - u * rf
        d0f = (1.0 - u) * rf
        d1b = tb - u * rb
        d0b = (1.0 - u) * rb
        cyc = (pi[0] + pi[2]) * tb + (pi[1] + pi[3]) * tf
        mu[k] = cyc
        thr[k] = (pi[3] * d1f + pi[1] * d0f) / cyc
        intf[k] = (pi[3] * (tf - d1f) + pi[1] * (tf - d0f)) / cyc
        unexp[k] = (pi[0] * d0b + pi[2] * d1b) / cyc


_dual_grid_loop_jit = njit(_dual_grid_loop)


def dual_period_grid_numba(c, u, p_fa, p_md, t_free, t_busy):
    t_free = np.ascontiguousarray(t_free, dtype=np.float64).ravel()
    t_busy = np.ascontiguousarray(t_busy, dtype=np.float64).ravel()
    n = t_free.shape[0]
    thr, intf, mu, unexp = (np.empty(n) for _ in range(4))
    ok = np.empty(n, dtype=np.bool_)
    _dual_grid_loop_jit(float(c), float(u), float(p_fa), float(p_md), t_free, t_busy, thr, intf, mu, unexp, ok)
    return thr, intf, mu, unexp, ok


def _relax_np(c, t):
    x = c * t
    small = x < _SERIES_CUTOFF
    exact = t + np.expm1(-np.where(small, 1.0, x)) / c
    return np.where(small, t * x * (0.5 - x / 6.0), exact)


def four_state_matrices(c, u, p_fa, p_md, t_free, t_busy):
    """Stacked four-state transition matrices, shape ``(n, 4, 4)``."""
    t_free = np.asarray(t_free, dtype=float).ravel()
    t_busy = np.asarray(t_busy, dtype=float).ravel()
    dec_b = np.exp(-c * t_busy)
    dec_f = np.exp(-c * t_free)
    rows = []
    for p in ((1 - u) * (1 - dec_b), (1 - u) * (1 - dec_f), (1 - u) + u * dec_b, (1 - u) + u * dec_f):
        rows.append(np.stack([(1 - p) * (1 - p_md), (1 - p) * p_md, p * p_fa, p * (1 - p_fa)], axis=-1))
    return np.stack(rows, axis=-2)


def stationary_batch(m):
    """Stationary laws of a stack of row-stochastic matrices (batched LAPACK)."""
    n = m.shape[-1]
    a = np.swapaxes(m, -1, -2) - np.eye(n)
    a[..., n - 1, :] = 1.0
    b = np.zeros(m.shape[:-1] + (1,))
    b[..., n - 1, 0] = 1.0
    return np.linalg.solve(a, b)[..., 0]


def dual_period_grid_numpy(c, u, p_fa, p_md, t_free, t_busy):
    tf = np.asarray(t_free, dtype=float).ravel()
    tb = np.asarray(t_busy, dtype=float).ravel()
    pi = stationary_batch(four_state_matrices(c, u, p_fa, p_md, tf, tb))
    rf = _relax_np(c, tf)
    rb = _relax_np(c, tb)
    d1f, d0f = tf - u * rf, (1 - u) * rf
    d1b, d0b = tb - u * rb, (1 - u) * rb
    mu = (pi[:, 0] + pi[:, 2]) * tb + (pi[:, 1] + pi[:, 3]) * tf
    thr = (pi[:, 3] * d1f + pi[:, 1] * d0f) / mu
    intf = (pi[:, 3] * (tf - d1f) + pi[:, 1] * (tf - d0f)) / mu
    unexp = (pi[:, 0] * d0b + pi[:, 2] * d1b) / mu
    return thr, intf, mu, unexp, np.isfinite(mu)


def dual_period_grid(c, u, p_fa, p_md, t_free, t_busy):
    """Score a batch of dual-period policies on one channel.

    Returns ``(throughput, interference, mean_cycle, unexplored, ok)`` arrays
    flattened over the broadcast inputs. ``throughput`` excludes the network
    sensing overhead factor.
    """
    t_free, t_busy = np.broadcast_arrays(np.asarray(t_free, float), np.asarray(t_busy, float))
    if USE_NUMBA:
        return dual_period_grid_numba(c, u, p_fa, p_md, t_free, t_busy)
    return dual_period_grid_numpy(c, u, p_fa, p_md, t_free, t_busy)


# --------------------------------------------------------------------------
# joint chain over sensed-outcome vectors (perfect sensing), batch of tables


def _joint_grid_loop(c, u, durations, t_s, thr, ovh, intf, unexp, mu, ok):
    n_ch = c.shape[0]
    n_st = durations.shape[1]
    m = np.empty((n_st, n_st))
    pi = np.empty(n_st)
    for r in range(durations.shape[0]):
        for k in range(n_st):
            t = durations[r, k]
            for l in range(n_st):
                p = 1.0
                for i in range(n_ch):
                    s_from = (k >> (n_ch - 1 - i)) & 1
                    s_to = (l >> (n_ch - 1 - i)) & 1
                    dec = math.exp(-c[i] * t)
                    if s_from == 1:
                        pf = (1.0 - u[i]) + u[i] * dec
                    else:
                        pf = (1.0 - u[i]) * (1.0 - dec)
                    p *= pf if s_to == 1 else 1.0 - pf
                m[k, l] = p
        if not _stationary(m, pi):
            ok[r] = False
            mu[r] = np.nan
            for i in range(n_ch):
                thr[r, i] = np.nan
                ovh[r, i] = np.nan
                intf[r, i] = np.nan
                unexp[r, i] = np.nan
            continue
        ok[r] = True
        cyc = 0.0
        for k in range(n_st):
            cyc += pi[k] * durations[r, k]
        mu[r] = cyc
        for i in range(n_ch):
            a_thr = 0.0
            a_ovh = 0.0
            a_int = 0.0
            a_unx = 0.0
            for k in range(n_st):
                t = durations[r, k]
                rel = _relax(c[i], t)
                if (k >> (n_ch - 1 - i)) & 1:
                    d1 = t - u[i] * rel
                    a_thr += pi[k] * d1 * (1.0 - t_s / t)
                    a_ovh += pi[k] * d1 * t_s / t
                    a_int += pi[k] * (t - d1)
                else:
                    a_unx += pi[k] * (1.0 - u[i]) * rel
            thr[r, i] = a_thr / cyc
            ovh[r, i] = a_ovh / cyc
            intf[r, i] = a_int / cyc
            unexp[r, i] = a_unx / cyc


_joint_grid_loop_jit = njit(_joint_grid_loop)


def joint_grid_numba(c, u, durations, t_s):
    c = np.ascontiguousarray(c, dtype=np.float64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    d = np.ascontiguousarray(durations, dtype=np.float64)
    n, n_ch = d.shape[0], c.shape[0]
    thr, ovh, intf, unexp = (np.empty((n, n_ch)) for _ in range(4))
    mu = np.empty(n)
    ok = np.empty(n, dtype=np.bool_)
    _joint_grid_loop_jit(c, u, d, float(t_s), thr, ovh, intf, unexp, mu, ok)
    return thr, ovh, intf, unexp, mu, ok


def outcome_bits(n_ch):
    """``bits[k, i]`` is channel ``i``'s sensed state in outcome ``k``."""
    k = np.arange(2**n_ch)[:, None]
    return (k >> (n_ch - 1 - np.arange(n_ch))[None, :]) & 1


def joint_matrices(c, u, durations):
    """Stacked joint transition matrices, shape ``(n, 2**N, 2**N)``."""
    c = np.asarray(c, float)
    u = np.asarray(u, float)
    d = np.atleast_2d(np.asarray(durations, float))
    n_ch = c.shape[0]
    bits = outcome_bits(n_ch)
    dec = np.exp(-c[None, None, :] * d[:, :, None])  # (n, S, N)
    p_free = np.where(bits[None], (1 - u) + u * dec, (1 - u) * (1 - dec))  # from row k
    # m[r, k, l] = prod_i (p_free if bit_l else 1 - p_free)
    to_bits = bits[None, None, :, :]
    pf = p_free[:, :, None, :]
    return np.prod(np.where(to_bits == 1, pf, 1 - pf), axis=-1)


def joint_grid_numpy(c, u, durations, t_s):
    c = np.asarray(c, float)
    u = np.asarray(u, float)
    d = np.atleast_2d(np.asarray(durations, float))
    pi = stationary_batch(joint_matrices(c, u, d))
    bits = outcome_bits(c.shape[0])
    mu = np.sum(pi * d, axis=1)
    t = d[:, :, None]
    rel = _relax_np(c[None, None, :], t)
    d1 = t - u * rel
    d0 = (1 - u) * rel
    w = pi[:, :, None] * bits[None]
    w0 = pi[:, :, None] * (1 - bits[None])
    thr = np.sum(w * d1 * (1 - t_s / t), axis=1) / mu[:, None]
    ovh = np.sum(w * d1 * t_s / t, axis=1) / mu[:, None]
    intf = np.sum(w * (t - d1), axis=1) / mu[:, None]
    unexp = np.sum(w0 * d0, axis=1) / mu[:, None]
    return thr, ovh, intf, unexp, mu, np.isfinite(mu)


def joint_grid(c, u, durations, t_s):
    """Score a batch of outcome-duration tables on the joint chain.

    ``durations`` has shape ``(n, 2**N)`` with columns in outcome order
    (channel 0 is the most significant bit). Returns per-channel throughput,
    overhead, interference and unexplored fractions ``(n, N)``, the mean time
    between sensing events ``(n,)`` and a success mask.
    """
    if USE_NUMBA:
        return joint_grid_numba(c, u, durations, t_s)
    return joint_grid_numpy(c, u, durations, t_s)


# --------------------------------------------------------------------------
# simulator event loops


def _advance(trans, ptr, stop, x):
    while ptr < stop and trans[ptr] <= x:
        ptr += 1
    return ptr


_advance_jit = njit(_advance)


def _dual_period_events_py(
    trans, offsets, init_state, t_free, t_busy, t_s, p_fa, p_md, unif, uoff, horizon,
    p_start, p_end, w_chan, w_start, w_end, n_sense, n_free,
):
    n_ch = init_state.shape[0]
    due = np.full(n_ch, t_s)
    ptr = offsets[:-1].copy()
    ucount = uoff[:-1].copy()
    is_open = np.zeros(n_ch, dtype=np.bool_)
    open_at = np.zeros(n_ch)
    sensor_free = 0.0
    n_p = 0
    n_w = 0
    while True:
        i = 0
        for j in range(1, n_ch):
            if due[j] < due[i]:
                i = j
        start = max(due[i] - t_s, sensor_free)
        if start >= horizon:
            break
        end = start + t_s
        sensor_free = end
        p_start[n_p] = start
        p_end[n_p] = end
        n_p += 1
        ptr[i] = _advance_jit(trans, ptr[i], offsets[i + 1], end)
        state = init_state[i] ^ ((ptr[i] - offsets[i]) & 1)
        r = unif[ucount[i]]
        ucount[i] += 1
        if state == 1:
            sensed = 0 if r < p_fa[i] else 1
        else:
            sensed = 1 if r < p_md[i] else 0
        n_sense[i] += 1
        if is_open[i]:
            w_chan[n_w] = i
            w_start[n_w] = open_at[i]
            w_end[n_w] = end
            n_w += 1
            is_open[i] = False
        if sensed == 1:
            n_free[i] += 1
            is_open[i] = True
            open_at[i] = end
            due[i] = end + t_free[i]
        else:
            due[i] = end + t_busy[i]
    for i in range(n_ch):
        if is_open[i]:
            w_chan[n_w] = i
            w_start[n_w] = open_at[i]
            w_end[n_w] = horizon
            n_w += 1
    return n_p, n_w


_dual_period_events_jit = njit(_dual_period_events_py)


def _full_scheme_events_py(
    trans, offsets, init_state, durations, t_s, p_fa, p_md, unif, uoff, horizon,
    p_start, p_end, w_chan, w_start, w_end, n_sense, n_free, outcome_count,
):
    n_ch = init_state.shape[0]
    ptr = offsets[:-1].copy()
    ucount = uoff[:-1].copy()
    is_open = np.zeros(n_ch, dtype=np.bool_)
    open_at = np.zeros(n_ch)
    due = t_s
    n_p = 0
    n_w = 0
    while True:
        start = due - t_s
        if start >= horizon:
            break
        end = due
        p_start[n_p] = start
        p_end[n_p] = end
        n_p += 1
        k = 0
        for i in range(n_ch):
            ptr[i] = _advance_jit(trans, ptr[i], offsets[i + 1], end)
            state = init_state[i] ^ ((ptr[i] - offsets[i]) & 1)
            r = unif[ucount[i]]
            ucount[i] += 1
            if state == 1:
                sensed = 0 if r < p_fa[i] else 1
            else:
                sensed = 1 if r < p_md[i] else 0
            n_sense[i] += 1
            if is_open[i]:
                w_chan[n_w] = i
                w_start[n_w] = open_at[i]
                w_end[n_w] = end
                n_w += 1
                is_open[i] = False
            if sensed == 1:
                n_free[i] += 1
                is_open[i] = True
                open_at[i] = end
            k = 2 * k + sensed
        outcome_count[k] += 1
        due = end + durations[k]
    for i in range(n_ch):
        if is_open[i]:
            w_chan[n_w] = i
            w_start[n_w] = open_at[i]
            w_end[n_w] = horizon
            n_w += 1
    return n_p, n_w


_full_scheme_events_jit = njit(_full_scheme_events_py)


def _limited_access_events_py(
    trans, offsets, init_state, c, u, t_access, t_s, horizon,
    p_start, p_end, w_chan, w_start, w_end, n_sense, n_free, delays,
):
    n_ch = init_state.shape[0]
    ptr = offsets[:-1].copy()
    last_state = np.zeros(n_ch, dtype=np.int64)
    last_time = np.full(n_ch, -np.inf)
    t = 0.0
    search_from = 0.0
    n_p = 0
    n_w = 0
    n_d = 0
    while t < horizon:
        best = -1.0
        i = 0
        for j in range(n_ch):
            dec = math.exp(-c[j] * (t - last_time[j]))
            if last_state[j] == 1:
                g = ((1.0 - u[j]) + u[j] * dec) / t_s
            else:
                g = (1.0 - u[j]) * (1.0 - dec) / t_s
            if g > best:
                best = g
                i = j
        end = t + t_s
        p_start[n_p] = t
        p_end[n_p] = end
        n_p += 1
        ptr[i] = _advance_jit(trans, ptr[i], offsets[i + 1], end)
        state = init_state[i] ^ ((ptr[i] - offsets[i]) & 1)
        n_sense[i] += 1
        last_state[i] = state
        last_time[i] = end
        if state == 1:
            n_free[i] += 1
            delays[n_d] = end - search_from
            n_d += 1
            stop = end + t_access[i]
            w_chan[n_w] = i
            w_start[n_w] = end
            w_end[n_w] = min(stop, horizon)
            n_w += 1
            t = stop
            search_from = stop
        else:
            t = end
    return n_p, n_w, n_d


_limited_access_events_jit = njit(_limited_access_events_py)


def _intersect_py(a_start, a_end, b_start, b_end, out_start, out_end):
    """Intersection of two sorted lists of disjoint intervals."""
    i = 0
    j = 0
    n = 0
    while i < a_start.shape[0] and j < b_start.shape[0]:
        lo = max(a_start[i], b_start[j])
        hi = min(a_end[i], b_end[j])
        if hi > lo:
            out_start[n] = lo
            out_end[n] = hi
            n += 1
        if a_end[i] < b_end[j]:
            i += 1
        else:
            j += 1
    return n


_intersect_jit = njit(_intersect_py)

if USE_NUMBA:
    dual_period_events = _dual_period_events_jit
    full_scheme_events = _full_scheme_events_jit
    limited_access_events = _limited_access_events_jit
    intersect_intervals = _intersect_jit
else:
    dual_period_events = _dual_period_events_py
    full_scheme_events = _full_scheme_events_py
    limited_access_events = _limited_access_events_py
    intersect_intervals = _intersect_py
