# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the two hot loops in :mod:`archview._pykernels`."""

import numpy as np

cdef enum:
    _MAX_NODES = 64
    _MAX_EDGES = 24

MAX_EDGES = _MAX_EDGES


def prepare_rules(rows):
    arr = np.asarray(list(rows), dtype=np.int64)
    if arr.size == 0:
        arr = np.zeros((0, 10), dtype=np.int64)
    return np.ascontiguousarray(arr.reshape(-1, 10))


def first_match(const long long[:, ::1] rules, long long src, long long dst, long long proto, long long port):
    cdef Py_ssize_t i, n = rules.shape[0], hit = -1
    with nogil:
        for i in range(n):
            if rules[i, 1] == 0 and (src < 0 or (src & rules[i, 3]) != rules[i, 2]):
                continue
            if rules[i, 4] == 0 and (dst < 0 or (dst & rules[i, 6]) != rules[i, 5]):
                continue
            if rules[i, 7] >= 0 and rules[i, 7] != proto:
                continue
            if port < rules[i, 8] or port > rules[i, 9]:
                continue
            hit = i
            break
    return hit


cdef struct _Walk:
    int m
    int n
    int* s
    int* d
    double* p
    double* acc
    double* comp


cdef void _leaf(_Walk* st, double w, unsigned long long act) noexcept nogil:
    cdef int v
    cdef double y, t
    for v in range(st.n):
        if (act >> v) & 1:
            # Kahan summation keeps up to 2**24 terms accurate
            y = w - st.comp[v]
            t = st.acc[v] + y
            st.comp[v] = (t - st.acc[v]) - y
            st.acc[v] = t


cdef void _walk(_Walk* st, int e, double w, unsigned long long act) noexcept nogil:
    # Edges arrive with every edge into a node ahead of every edge out of it,
    # so reachability of e's source is settled when e is decided.  An edge
    # whose source is unreached or whose target is already reached cannot
    # change anything, and its two outcomes merge into one branch.
    while e < st.m and (not ((act >> st.s[e]) & 1) or (act >> st.d[e]) & 1):
        e += 1
    if e == st.m:
        _leaf(st, w, act)
        return
    if st.p[e] > 0.0:
        _walk(st, e + 1, w * st.p[e], act | (1ULL << st.d[e]))
    if st.p[e] < 1.0:
        _walk(st, e + 1, w * (1.0 - st.p[e]), act)


def _topological_edges(int n_nodes, src, dst):
    """Edge indices ordered by a topological order of their sources, or None
    when the graph has a directed cycle.
    """
    indeg = [0] * n_nodes
    out = [[] for _ in range(n_nodes)]
    for e in range(len(src)):
        indeg[dst[e]] += 1
        out[src[e]].append(e)
    ready = [v for v in range(n_nodes) if indeg[v] == 0]
    order = []
    while ready:
        v = ready.pop()
        for e in out[v]:
            order.append(e)
            indeg[dst[e]] -= 1
            if indeg[dst[e]] == 0:
                ready.append(dst[e])
    return order if len(order) == len(src) else None


def reach_mass(int n_nodes, src, dst, prob, seeds):
    cdef int m = len(src)
    if m > _MAX_EDGES:
        raise ValueError(f"{m} edges exceeds the enumeration limit of {MAX_EDGES}")
    if n_nodes > _MAX_NODES:
        raise ValueError(f"{n_nodes} nodes exceeds the kernel limit of {_MAX_NODES:d}")
    cdef int s[_MAX_EDGES]
    cdef int d[_MAX_EDGES]
    cdef double pr[_MAX_EDGES]
    cdef double acc[_MAX_NODES]
    cdef double comp[_MAX_NODES]
    cdef unsigned long long seedmask = 0, act
    cdef unsigned long long mask, size = 1ULL << m
    cdef double w
    cdef int e, k, v, changed
    cdef _Walk st
    order = _topological_edges(n_nodes, src, dst)
    for k in range(m):
        e = order[k] if order is not None else k
        s[k] = src[e]
        d[k] = dst[e]
        pr[k] = prob[e]
    for v in range(n_nodes):
        acc[v] = 0.0
        comp[v] = 0.0
        if seeds[v]:
            seedmask |= 1ULL << v
    st.m, st.n, st.s, st.d, st.p, st.acc, st.comp = m, n_nodes, s, d, pr, acc, comp
    if order is not None:
        with nogil:
            _walk(&st, 0, 1.0, seedmask)
        return [acc[v] for v in range(n_nodes)]
    with nogil:
        for mask in range(size):
            w = 1.0
            for e in range(m):
                if (mask >> e) & 1:
                    w *= pr[e]
                else:
                    w *= 1.0 - pr[e]
            act = seedmask
            changed = 1
            while changed:
                changed = 0
                for e in range(m):
                    if (mask >> e) & 1 and (act >> s[e]) & 1 and not ((act >> d[e]) & 1):
                        act |= 1ULL << d[e]
                        changed = 1
            _leaf(&st, w, act)
    return [acc[v] for v in range(n_nodes)]

