"""Shared oracles: naive, definition-level reimplementations used as references."""

from __future__ import annotations

import math
from collections import Counter, defaultdict

import numpy as np
import pytest


def naive_counts(y, k):
    """{context tuple: Counter(symbol)} by a direct loop over cyclic positions."""
    n = len(y)
    table = defaultdict(Counter)
    for i in range(n):
        ctx = tuple(int(y[(i - k + t) % n]) for t in range(k))
        table[ctx][int(y[i])] += 1
    return table


def naive_joint_counts(w, y, z, k, k1):
    n = len(w)
    table = defaultdict(Counter)
    for i in range(n):
        b0 = tuple(int(w[(i - k + t) % n]) for t in range(k))
        b1 = tuple(int(y[(i + t) % n]) for t in range(-k1, k1 + 1))
        b2 = tuple(int(z[(i + t) % n]) for t in range(-k1, k1 + 1))
        table[(b0, b1, b2)][int(w[i])] += 1
    return table


def naive_cond_entropy(table, n):
    h = 0.0
    for col in table.values():
        tot = sum(col.values())
        for c in col.values():
            if c:
                h -= (c / n) * math.log2(c / tot)
    return h


def naive_hk(y, k):
    return naive_cond_entropy(naive_counts(y, k), len(y))


def naive_hkk1(w, y, z, k, k1):
    return naive_cond_entropy(naive_joint_counts(w, y, z, k, k1), len(w))


def naive_energy(x, y, z, w, weights, k, k1, dmat=None):
    """Energy from the definition, with Hamming distortion unless ``dmat`` is given."""
    n = len(x)
    g1, g2, g0, a1, a2, a0 = weights

    def dist(a, b):
        if dmat is None:
            return sum(int(p != q) for p, q in zip(a, b)) / n
        return sum(dmat[int(p)][int(q)] for p, q in zip(a, b)) / n

    return (g1 * naive_hk(y, k) + g2 * naive_hk(z, k) + g0 * naive_hkk1(w, y, z, k, k1)
            + a1 * dist(x, y) + a2 * dist(x, z) + a0 * dist(x, w))


def naive_boltzmann_min(x, weights, k, k1):
    """Brute-force minimum over all binary triples, pure Python (small n only)."""
    n = len(x)
    seqs = [tuple((v >> (n - 1 - j)) & 1 for j in range(n)) for v in range(2 ** n)]
    best = math.inf
    for y in seqs:
        for z in seqs:
            for w in seqs:
                best = min(best, naive_energy(x, y, z, w, weights, k, k1))
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
