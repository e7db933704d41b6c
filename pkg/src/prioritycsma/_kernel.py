"""Compiled slot loop used by ``simulator.run``.

The body is plain Python over numpy arrays; numba compiles it when
available and the interpreted version is used otherwise (same results).
"""
import math

try:
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(*args, **kwargs):
        return (lambda f: f) if not args or not callable(args[0]) else args[0]


@njit(cache=True)
def run_block(counts, start, t0, size, e_blk, u_blk, r_blk, a_blk, nbr, deg, k,
              multi, bernoulli, forced, use_forced, dec, totals, queues, row,
              trans_cum, dep_cum, keys, mask, inflow):
    """Advance slots ``start + t0 .. start + size - 1`` in place.

    Returns ``(t, row)``: ``t`` is the block offset of a slot with tied
    competition statistics that the caller must redraw (``-1`` when the
    block completed). When ``use_forced`` is set, slot ``t0`` uses the
    transmission mask ``forced`` instead of drawing one.
    """
    n = counts.shape[0]
    leave_p = 1.0 / k
    for t in range(t0, size):
        if use_forced and t == t0:
            for i in range(n):
                mask[i] = forced[i]
        elif bernoulli:
            for i in range(n):
                s = counts[i]
                for q in range(deg[i]):
                    s += counts[nbr[i, q]]
                mask[i] = counts[i] > 0 and u_blk[t, i] < counts[i] / s
        else:
            for i in range(n):
                keys[i] = e_blk[t, i] / counts[i] if counts[i] > 0 else math.inf
            tie = False
            for i in range(n):
                best = math.inf
                for q in range(deg[i]):
                    v = keys[nbr[i, q]]
                    if v < best:
                        best = v
                mask[i] = keys[i] < best
                if counts[i] > 0 and keys[i] == best:
                    tie = True
            if tie:
                return t, row
        for i in range(n):
            inflow[i] = 0
        for i in range(n):
            if mask[i]:
                counts[i] -= 1
                trans_cum[i] += 1
                if multi and r_blk[t, i, 0] >= leave_p:
                    pick = int(r_blk[t, i, 1] * deg[i])
                    if pick > deg[i] - 1:
                        pick = deg[i] - 1
                    inflow[nbr[i, pick]] += 1
                else:
                    dep_cum[i] += 1
        total = 0
        for i in range(n):
            counts[i] += inflow[i] + a_blk[t, i]
            total += counts[i]
        slot = start + t + 1
        totals[slot] = total
        if slot % dec == 0:
            for i in range(n):
                queues[row, i] = counts[i]
            row += 1
    return -1, row
