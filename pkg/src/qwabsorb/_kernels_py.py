"""
Pure NumPy implementations of the hot loops.

Every function here has a twin with the same signature in ``_kernels.pyx``;
both return the same results up to summation-order rounding.  Stop codes:
0 = converged, 1 = hit the step cap.
"""

import numpy as np

CONVERGED = 0
MAX_STEPS = 1
# line-walk amplitudes below this at the left edge are discarded
TINY = 1e-150


def _window_stop(p, t, window, eps):
    return t >= window and float(np.sum(p[t - window + 1:t + 1])) < eps


def graph_first_passage(neighbors, coin, absorbing, psi, t_max, eps, window, grover):
    """Absorbing coined walk on a labeled graph.

    ``neighbors`` is (d, V) int64, ``absorbing`` a (V,) uint8 mask and ``psi``
    a (d, V) complex128 state; the caller's array is left untouched.
    """
    psi = np.array(psi, dtype=np.complex128)
    d, nv = psi.shape
    mask = absorbing.astype(bool)
    rows = np.arange(d)[:, None]
    p = np.zeros(t_max + 1)
    p[0] = np.sum(np.abs(psi[:, mask]) ** 2)
    psi[:, mask] = 0.0
    absorbed = p[0]
    resid = float(np.vdot(psi, psi).real)
    defect = abs(absorbed + resid - 1.0)
    if resid <= eps:
        return p[:1], psi, CONVERGED, defect
    new = np.empty_like(psi)
    for t in range(1, t_max + 1):
        if grover:
            tmp = (2.0 / d) * psi.sum(axis=0) - psi
        else:
            tmp = coin @ psi
        new[rows, neighbors] = tmp
        psi, new = new, psi
        pt = np.sum(np.abs(psi[:, mask]) ** 2)
        psi[:, mask] = 0.0
        p[t] = pt
        absorbed += pt
        resid = float(np.vdot(psi, psi).real)
        defect = max(defect, abs(absorbed + resid - 1.0))
        if resid <= eps or _window_stop(p, t, window, eps):
            return p[:t + 1], psi, CONVERGED, defect
    return p, psi, MAX_STEPS, defect


def line_first_passage(m, a, b, t_max, eps, window):
    """Walk on the integer line started in |R,0>, coin [[a, b], [b, -a]].

    Position v lives at index ``v + t_max + 1``; the absorbing vertex m is the
    last index.  Returns (p, R, L, lo, stop_code, defect) where ``lo`` is the
    leftmost index that ever carried amplitude.
    """
    off = t_max + 1
    size = m + off + 1
    hi = size - 1
    right = np.zeros(size)
    left = np.zeros(size)
    right[off] = 1.0
    lo = off
    lowest = lo
    p = np.zeros(t_max + 1)
    absorbed = 0.0
    defect = 0.0
    for t in range(1, t_max + 1):
        lo -= 1
        lowest = min(lowest, lo)
        r = right[lo + 1:hi + 1].copy()
        l = left[lo + 1:hi + 1].copy()
        # coin then shift: R moves one index up, L one index down
        right[lo + 1:hi + 1] = 0.0
        left[lo:hi] = b * r - a * l
        right[lo + 2:hi + 1] = (a * r + b * l)[:-1]
        left[hi] = 0.0
        pt = right[hi] ** 2 + left[hi] ** 2
        right[hi] = 0.0
        p[t] = pt
        absorbed += pt
        # drop the far tail before it turns subnormal (mass < 1e-299 per site)
        while lo < hi and abs(right[lo]) < TINY and abs(left[lo]) < TINY:
            right[lo] = 0.0
            left[lo] = 0.0
            lo += 1
        seg_r = right[lo:hi]
        seg_l = left[lo:hi]
        resid = float(seg_r @ seg_r + seg_l @ seg_l)
        defect = max(defect, abs(absorbed + resid - 1.0))
        if resid <= eps or _window_stop(p, t, window, eps):
            return p[:t + 1], right, left, lowest, CONVERGED, defect
    return p, right, left, lowest, MAX_STEPS, defect


def chain_first_passage(targets, coeffs, absorbing, x, t_max, eps, window):
    """Real chain whose matrix has at most k nonzeros per column.

    Column j sends ``coeffs[r, j] * x[j]`` to ``targets[r, j]`` (skipped when
    the target is -1).  Absorbing states are given by a uint8 mask.
    """
    x = np.array(x, dtype=np.float64)
    k, nstate = targets.shape
    mask = absorbing.astype(bool)
    p = np.zeros(t_max + 1)
    p[0] = float(np.sum(x[mask] ** 2))
    x[mask] = 0.0
    absorbed = p[0]
    resid = float(x @ x)
    defect = abs(absorbed + resid - 1.0)
    if resid <= eps:
        return p[:1], x, CONVERGED, defect
    valid = targets >= 0
    tgt = [targets[r][valid[r]] for r in range(k)]
    src = [np.nonzero(valid[r])[0] for r in range(k)]
    cf = [coeffs[r][valid[r]] for r in range(k)]
    for t in range(1, t_max + 1):
        new = np.zeros(nstate)
        for r in range(k):
            np.add.at(new, tgt[r], cf[r] * x[src[r]])
        pt = float(np.sum(new[mask] ** 2))
        new[mask] = 0.0
        x = new
        p[t] = pt
        absorbed += pt
        resid = float(x @ x)
        defect = max(defect, abs(absorbed + resid - 1.0))
        if resid <= eps or _window_stop(p, t, window, eps):
            return p[:t + 1], x, CONVERGED, defect
    return p, x, MAX_STEPS, defect


def consume_labels(labels, diff0, state, steps, times, done):
    """Feed a block of random labels to sequential classical walkers.

    The walker state is the XOR of its position with the absorbing vertex; a
    walker is absorbed when the state reaches 0, at which point the next trial
    starts from ``diff0`` on the following label.  Returns
    ``(state, steps, done)`` after the block (or after ``times`` is full).
    """
    total = times.shape[0]
    if done >= total or labels.shape[0] == 0:
        return state, steps, done
    flips = np.left_shift(np.int64(1), labels.astype(np.int64))
    prefix = np.bitwise_xor.accumulate(flips)
    order = np.argsort(prefix, kind="stable")
    keys = prefix[order]
    nlab = labels.shape[0]

    def first_at_or_after(value, start):
        lo_i = np.searchsorted(keys, value, side="left")
        hi_i = np.searchsorted(keys, value, side="right")
        if lo_i == hi_i:
            return -1
        cand = order[lo_i:hi_i]
        j = np.searchsorted(cand, start, side="left")
        return int(cand[j]) if j < cand.shape[0] else -1

    # state after label j (0-based in block) is state_in ^ prefix[j] ^ base
    pos = 0
    base = 0
    cur = int(state)
    while done < total:
        j = first_at_or_after(cur ^ base, pos)
        if j < 0:
            final = cur ^ base ^ int(prefix[-1])
            return final, steps + (nlab - pos), done
        times[done] = steps + (j - pos + 1)
        done += 1
        steps = 0
        cur = int(diff0)
        base = int(prefix[j])
        pos = j + 1
    return cur, steps, done
