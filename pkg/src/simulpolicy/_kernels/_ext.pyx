# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled versions of the kernels in ``_pure.py``.

Prefix beam search keeps prefixes in a trie (parent/label arrays plus a
child hash map) so no Python tuples are built inside the frame loop.
Accumulation order matches the pure version exactly.
"""

from libc.math cimport log1p, exp, floor, INFINITY
from libcpp.vector cimport vector
from libcpp.unordered_map cimport unordered_map
from libcpp.algorithm cimport sort as cpp_sort
from cython.operator cimport dereference as deref

import numpy as np


cdef inline double log_add(double a, double b) noexcept nogil:
    if a == -INFINITY:
        return b
    if b == -INFINITY:
        return a
    if a > b:
        return a + log1p(exp(b - a))
    return b + log1p(exp(a - b))


def lcp_length(list seqs):
    cdef object first = seqs[0]
    cdef Py_ssize_t n = len(first)
    cdef Py_ssize_t i, j, m = len(seqs)
    cdef list rest = [seqs[j] for j in range(1, m)]
    for s in rest:
        if len(s) < n:
            n = len(s)
    cdef object tok
    for i in range(n):
        tok = first[i]
        for s in rest:
            if s[i] != tok:
                return i
    return n


def stretch_linear(x, double speed, Py_ssize_t out_len):
    cdef const double[::1] src = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = src.shape[0]
    out = np.empty(out_len, dtype=np.float64)
    cdef double[::1] dst = out
    cdef Py_ssize_t k, i0
    cdef double pos, frac, x0
    with nogil:
        for k in range(out_len):
            pos = <double>k * speed
            i0 = <Py_ssize_t>floor(pos)
            if i0 >= n - 1:
                dst[k] = src[n - 1]
            else:
                frac = pos - <double>i0
                x0 = src[i0]
                dst[k] = x0 + frac * (src[i0 + 1] - x0)
    return out


cdef struct Entry:
    int node
    double total


cdef class _Trie:
    cdef vector[int] parent
    cdef vector[int] label
    cdef vector[int] rank
    cdef vector[double] cur_b
    cdef vector[double] cur_nb
    cdef vector[double] nxt_b
    cdef vector[double] nxt_nb
    cdef vector[int] stamp
    cdef unordered_map[long long, int] children
    cdef int width

    def __cinit__(self, int width):
        self.width = width
        self._new_node(-1, -1, -1)

    cdef int _new_node(self, int parent, int label, int rank) noexcept:
        self.parent.push_back(parent)
        self.label.push_back(label)
        self.rank.push_back(rank)
        self.cur_b.push_back(-INFINITY)
        self.cur_nb.push_back(-INFINITY)
        self.nxt_b.push_back(-INFINITY)
        self.nxt_nb.push_back(-INFINITY)
        self.stamp.push_back(-1)
        return <int>self.parent.size() - 1

    cdef int child(self, int node, int c, int rank) noexcept:
        cdef long long key = <long long>node * self.width + c
        cdef unordered_map[long long, int].iterator it = self.children.find(key)
        if it != self.children.end():
            return deref(it).second
        cdef int node_id = self._new_node(node, c, rank)
        self.children[key] = node_id
        return node_id

    cdef bint before(self, int a, int b) noexcept:
        """Lexicographic (by rank) order of the label sequences at nodes a and b."""
        cdef vector[int] sa, sb
        while a > 0:
            sa.push_back(self.rank[a])
            a = self.parent[a]
        while b > 0:
            sb.push_back(self.rank[b])
            b = self.parent[b]
        cdef Py_ssize_t i = <Py_ssize_t>sa.size() - 1
        cdef Py_ssize_t j = <Py_ssize_t>sb.size() - 1
        while i >= 0 and j >= 0:
            if sa[i] != sb[j]:
                return sa[i] < sb[j]
            i -= 1
            j -= 1
        return i < 0 and j >= 0

    cdef tuple labels(self, int node):
        cdef list out = []
        while node > 0:
            out.append(self.label[node])
            node = self.parent[node]
        out.reverse()
        return tuple(out)


cdef _Trie _SORT_TRIE = None


cdef bint _entry_less(const Entry& a, const Entry& b) noexcept:
    if a.total != b.total:
        return a.total > b.total
    return _SORT_TRIE.before(a.node, b.node)


def prefix_beam_search(logp, ranks, int beam, int n_best):
    global _SORT_TRIE
    cdef const double[:, ::1] lp = np.ascontiguousarray(logp, dtype=np.float64)
    cdef Py_ssize_t T = lp.shape[0]
    cdef int width = <int>lp.shape[1]
    cdef int blank = width - 1
    cdef vector[int] rk
    for r in ranks:
        rk.push_back(<int>r)

    cdef _Trie trie = _Trie(width)
    cdef vector[int] cur
    cdef vector[int] touched
    cdef vector[Entry] entries
    cdef Entry e
    cdef Py_ssize_t t, i
    cdef int node, c, ch, last, step
    cdef double pb, pnb, total, lpc, lp_blank

    trie.cur_b[0] = 0.0
    trie.cur_nb[0] = -INFINITY
    cur.push_back(0)

    for t in range(T):
        step = <int>t
        touched.clear()
        lp_blank = lp[t, blank]
        for i in range(<Py_ssize_t>cur.size()):
            node = cur[i]
            pb = trie.cur_b[node]
            pnb = trie.cur_nb[node]
            total = log_add(pb, pnb)
            if trie.stamp[node] != step:
                trie.stamp[node] = step
                touched.push_back(node)
            trie.nxt_b[node] = log_add(trie.nxt_b[node], total + lp_blank)
            last = trie.label[node]
            for c in range(blank):
                lpc = lp[t, c]
                ch = trie.child(node, c, rk[c])
                if trie.stamp[ch] != step:
                    trie.stamp[ch] = step
                    touched.push_back(ch)
                if c == last:
                    trie.nxt_nb[ch] = log_add(trie.nxt_nb[ch], pb + lpc)
                    trie.nxt_nb[node] = log_add(trie.nxt_nb[node], pnb + lpc)
                else:
                    trie.nxt_nb[ch] = log_add(trie.nxt_nb[ch], total + lpc)

        entries.clear()
        for i in range(<Py_ssize_t>touched.size()):
            node = touched[i]
            total = log_add(trie.nxt_b[node], trie.nxt_nb[node])
            if total != -INFINITY:
                e.node = node
                e.total = total
                entries.push_back(e)
        _SORT_TRIE = trie
        cpp_sort(entries.begin(), entries.end(), _entry_less)
        _SORT_TRIE = None

        cur.clear()
        for i in range(<Py_ssize_t>entries.size()):
            if i >= beam:
                break
            cur.push_back(entries[i].node)
        for i in range(<Py_ssize_t>cur.size()):
            node = cur[i]
            trie.cur_b[node] = trie.nxt_b[node]
            trie.cur_nb[node] = trie.nxt_nb[node]
        for i in range(<Py_ssize_t>touched.size()):
            node = touched[i]
            trie.nxt_b[node] = -INFINITY
            trie.nxt_nb[node] = -INFINITY

    out = []
    for i in range(<Py_ssize_t>cur.size()):
        if i >= n_best:
            break
        node = cur[i]
        out.append((trie.labels(node), log_add(trie.cur_b[node], trie.cur_nb[node])))
    return out
