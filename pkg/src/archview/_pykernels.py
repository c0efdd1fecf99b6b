"""Fallback kernels used when the compiled ``_speedups`` module is unavailable.

Rule rows are 10-tuples of ints::

    (action, src_any, src_net, src_mask, dst_any, dst_net, dst_mask, proto, port_lo, port_hi)

with ``proto == -1`` meaning any protocol.  Flow addresses are ints, ``-1``
for "no address" (only wildcards match it).
"""

import numpy as np

MAX_EDGES = 24


def prepare_rules(rows):
    return tuple(tuple(int(x) for x in r) for r in rows)


def first_match(rules, src, dst, proto, port):
    """Index of the first rule matching the flow, or -1."""
    for i, (_, s_any, s_net, s_mask, d_any, d_net, d_mask, r_proto, lo, hi) in enumerate(rules):
        if not s_any and (src < 0 or (src & s_mask) != s_net):
            continue
        if not d_any and (dst < 0 or (dst & d_mask) != d_net):
            continue
        if r_proto >= 0 and r_proto != proto:
            continue
        if port < lo or port > hi:
            continue
        return i
    return -1


def reach_mass(n_nodes, src, dst, prob, seeds):
    """Probability that each node is reached from a seed when every edge is
    independently active with its probability; exact sum over all 2**m
    activation subsets, vectorised over subsets.
    """
    m = len(src)
    if m > MAX_EDGES:
        raise ValueError(f"{m} edges exceeds the enumeration limit of {MAX_EDGES}")
    size = 1 << m
    masks = np.arange(size, dtype=np.uint32)
    weight = np.ones(size)
    bits = []
    for e in range(m):
        b = ((masks >> np.uint32(e)) & np.uint32(1)).astype(bool)
        weight *= np.where(b, prob[e], 1.0 - prob[e])
        bits.append(b)
    active = [np.full(size, bool(seeds[v])) for v in range(n_nodes)]
    changed = True
    while changed:
        changed = False
        for e in range(m):
            s, d = src[e], dst[e]
            grown = active[d] | (active[s] & bits[e])
            if not np.array_equal(grown, active[d]):
                active[d] = grown
                changed = True
    return [float(np.dot(weight, a)) for a in active]
