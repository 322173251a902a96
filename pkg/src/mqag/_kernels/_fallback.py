"""Pure-Python numeric kernels.

Mirror of the compiled extension in ``_speedups.pyx``; both must produce
identical results. Inputs are plain sequences of floats (or ints for
``lcs_length``); validation happens in the calling layer.
"""

from __future__ import annotations

import math
from typing import Sequence


def kl_div(p: Sequence[float], q: Sequence[float], eps: float = 1e-10) -> float:
    """Base-2 KL divergence after clamping both arguments to eps and renormalizing."""
    n = len(p)
    pc = [x if x > eps else eps for x in p]
    qc = [x if x > eps else eps for x in q]
    ps = sum(pc)
    qs = sum(qc)
    acc = 0.0
    for i in range(n):
        pi = pc[i] / ps
        qi = qc[i] / qs
        acc += pi * math.log2(pi / qi)
    return acc


def total_variation(p: Sequence[float], q: Sequence[float]) -> float:
    acc = 0.0
    for a, b in zip(p, q):
        acc += abs(a - b)
    return 0.5 * acc


def hellinger(p: Sequence[float], q: Sequence[float]) -> float:
    acc = 0.0
    for a, b in zip(p, q):
        d = math.sqrt(a) - math.sqrt(b)
        acc += d * d
    return math.sqrt(0.5 * acc)


def one_best(p: Sequence[float], q: Sequence[float]) -> int:
    """0 if the argmaxes agree, 1 otherwise. Ties break to the lowest index."""
    bi = 0
    bj = 0
    for i in range(1, len(p)):
        if p[i] > p[bi]:
            bi = i
        if q[i] > q[bj]:
            bj = i
    return 0 if bi == bj else 1


def entropy2(p: Sequence[float]) -> float:
    """Base-2 entropy with the 0*log(0) = 0 convention."""
    acc = 0.0
    for x in p:
        if x > 0.0:
            acc -= x * math.log2(x)
    return acc


def lcs_length(a: Sequence[int], b: Sequence[int]) -> int:
    """Length of the longest common subsequence of two integer sequences."""
    m = len(a)
    n = len(b)
    if m == 0 or n == 0:
        return 0
    prev = [0] * (n + 1)
    cur = [0] * (n + 1)
    for i in range(1, m + 1):
        ai = a[i - 1]
        for j in range(1, n + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            elif prev[j] >= cur[j - 1]:
                cur[j] = prev[j]
            else:
                cur[j] = cur[j - 1]
        prev, cur = cur, prev
    return prev[n]
