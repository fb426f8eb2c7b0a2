"""Pure-Python implementations of the hot kernels.

These are the reference versions. The compiled module in ``_ext.pyx``
mirrors them operation for operation (same accumulation order, same
tie-breaking) so the two agree bit for bit.
"""

import math

import numpy as np

NEG_INF = -math.inf


def log_add(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


def lcp_length(seqs):
    """Length of the longest common prefix of ``seqs`` (a non-empty list)."""
    first = seqs[0]
    n = len(first)
    for s in seqs[1:]:
        if len(s) < n:
            n = len(s)
    for i in range(n):
        tok = first[i]
        for s in seqs[1:]:
            if s[i] != tok:
                return i
    return n


def stretch_linear(x, speed, out_len):
    """Linear interpolation of ``x`` at positions ``k * speed``, clamped to the last sample."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    pos = np.arange(out_len, dtype=np.float64) * speed
    i0 = np.floor(pos).astype(np.int64)
    out = np.empty(out_len, dtype=np.float64)
    tail = i0 >= n - 1
    out[tail] = x[n - 1]
    body = ~tail
    j = i0[body]
    frac = pos[body] - j
    x0 = x[j]
    out[body] = x0 + frac * (x[j + 1] - x0)
    return out


def prefix_beam_search(logp, ranks, beam, n_best):
    """CTC prefix beam search over a (T, V+1) log-probability matrix, blank last.

    ``ranks[c]`` is the sort rank of label ``c``'s token string; prefixes
    with equal scores are ordered lexicographically by these ranks.
    Returns up to ``n_best`` ``(labels, log_prob)`` pairs, best first.
    """
    logp = np.ascontiguousarray(logp, dtype=np.float64)
    T, width = logp.shape
    blank = width - 1
    ranks = [int(r) for r in ranks]

    cur = [((), 0.0, NEG_INF)]  # (prefix, log p ending in blank, log p ending in label)
    for t in range(T):
        row = logp[t].tolist()
        lp_blank = row[blank]
        next_b = {}
        next_nb = {}

        def add_b(p, v):
            next_b[p] = log_add(next_b.get(p, NEG_INF), v)
            next_nb.setdefault(p, NEG_INF)

        def add_nb(p, v):
            next_nb[p] = log_add(next_nb.get(p, NEG_INF), v)
            next_b.setdefault(p, NEG_INF)

        for prefix, pb, pnb in cur:
            total = log_add(pb, pnb)
            add_b(prefix, total + lp_blank)
            last = prefix[-1] if prefix else -1
            for c in range(blank):
                lpc = row[c]
                child = prefix + (c,)
                if c == last:
                    add_nb(child, pb + lpc)
                    add_nb(prefix, pnb + lpc)
                else:
                    add_nb(child, total + lpc)

        scored = []
        for p, vb in next_b.items():
            vnb = next_nb[p]
            total = log_add(vb, vnb)
            if total != NEG_INF:
                scored.append((-total, tuple(ranks[c] for c in p), p, vb, vnb))
        scored.sort(key=lambda e: (e[0], e[1]))
        cur = [(p, vb, vnb) for _, _, p, vb, vnb in scored[:beam]]

    return [(p, log_add(pb, pnb)) for p, pb, pnb in cur[:n_best]]
