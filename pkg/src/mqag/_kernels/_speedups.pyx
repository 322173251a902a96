# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled numeric kernels.

Semantics must match ``_fallback.py`` bit-for-bit: same operations in the
same order, so both import paths give identical floats.
"""

from libc.math cimport fabs, log2, sqrt
from libc.stdlib cimport free, malloc


def kl_div(p, q, double eps=1e-10):
    """Base-2 KL divergence after clamping both arguments to eps and renormalizing."""
    cdef Py_ssize_t i, n = len(p)
    cdef double ps = 0.0, qs = 0.0, acc = 0.0, pi, qi, x
    cdef double *pc = <double *> malloc(2 * n * sizeof(double))
    if pc == NULL:
        raise MemoryError()
    cdef double *qc = pc + n
    try:
        for i in range(n):
            x = <double> p[i]
            pc[i] = x if x > eps else eps
            ps += pc[i]
            x = <double> q[i]
            qc[i] = x if x > eps else eps
            qs += qc[i]
        for i in range(n):
            pi = pc[i] / ps
            qi = qc[i] / qs
            acc += pi * log2(pi / qi)
    finally:
        free(pc)
    return acc


def total_variation(p, q):
    cdef Py_ssize_t i, n = len(p)
    cdef double acc = 0.0
    for i in range(n):
        acc += fabs(<double> p[i] - <double> q[i])
    return 0.5 * acc


def hellinger(p, q):
    cdef Py_ssize_t i, n = len(p)
    cdef double acc = 0.0, d
    for i in range(n):
        d = sqrt(<double> p[i]) - sqrt(<double> q[i])
        acc += d * d
    return sqrt(0.5 * acc)


def one_best(p, q):
    """0 if the argmaxes agree, 1 otherwise. Ties break to the lowest index."""
    cdef Py_ssize_t i, n = len(p), bi = 0, bj = 0
    cdef double bp, bq, x
    bp = <double> p[0]
    bq = <double> q[0]
    for i in range(1, n):
        x = <double> p[i]
        if x > bp:
            bp = x
            bi = i
        x = <double> q[i]
        if x > bq:
            bq = x
            bj = i
    return 0 if bi == bj else 1


def entropy2(p):
    """Base-2 entropy with the 0*log(0) = 0 convention."""
    cdef Py_ssize_t i, n = len(p)
    cdef double acc = 0.0, x
    for i in range(n):
        x = <double> p[i]
        if x > 0.0:
            acc -= x * log2(x)
    return acc


def lcs_length(a, b):
    """Length of the longest common subsequence of two integer sequences."""
    cdef Py_ssize_t m = len(a), n = len(b)
    if m == 0 or n == 0:
        return 0
    # one block: a values, b values, then the two DP rows
    cdef long *buf = <long *> malloc((m + n + 2 * (n + 1)) * sizeof(long))
    if buf == NULL:
        raise MemoryError()
    cdef long *av = buf
    cdef long *bv = buf + m
    cdef long *prev = buf + m + n
    cdef long *cur = buf + m + n + (n + 1)
    cdef long *swap
    cdef long result, ai
    cdef Py_ssize_t i, j
    try:
        for i in range(m):
            av[i] = <long> a[i]
        for j in range(n):
            bv[j] = <long> b[j]
        for j in range(n + 1):
            prev[j] = 0
            cur[j] = 0
        for i in range(1, m + 1):
            ai = av[i - 1]
            for j in range(1, n + 1):
                if ai == bv[j - 1]:
                    cur[j] = prev[j - 1] + 1
                elif prev[j] >= cur[j - 1]:
                    cur[j] = prev[j]
                else:
                    cur[j] = cur[j - 1]
            swap = prev
            prev = cur
            cur = swap
        result = prev[n]
    finally:
        free(buf)
    return result
