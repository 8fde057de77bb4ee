"""Compiled Gibbs sweep over dense context tables.

Tables are flat ``int64`` arrays indexed by ``context * A + symbol`` with a
companion array of column sums.  Context packing matches
:mod:`mdcoding.empirical_stats` so keys are interchangeable.  Row 0, 1, 2 of
``seqs`` hold ``y``, ``z``, ``w``.
"""

import math

import numpy as np
from numba import njit

DENSE_LIMIT = 1 << 22


@njit(cache=True)
def _own_key(seq, j, k, n, A):
    key = 0
    for t in range(j - k, j):
        key = key * A + seq[t % n]
    return key


@njit(cache=True)
def _joint_key(seqs, j, k, k1, n, A):
    key = 0
    for t in range(j - k, j):
        key = key * A + seqs[2, t % n]
    for t in range(j - k1, j + k1 + 1):
        key = key * A + seqs[0, t % n]
    for t in range(j - k1, j + k1 + 1):
        key = key * A + seqs[1, t % n]
    return key


@njit(cache=True)
def _move(cnt, col, flog, cell, ctx, d):
    # change of f(col) - f(cell) after adding d (+1/-1) to one cell
    s = col[ctx]
    c = cnt[cell]
    r = (flog[s + d] - flog[s]) - (flog[c + d] - flog[c])
    cnt[cell] = c + d
    col[ctx] = s + d
    return r


@njit(cache=True)
def _own_pass(seq, cnt, col, flog, i, k, n, A, d):
    acc = 0.0
    for off in range(k + 1):
        j = (i + off) % n
        ctx = _own_key(seq, j, k, n, A)
        acc += _move(cnt, col, flog, ctx * A + seq[j], ctx, d)
    return acc


@njit(cache=True)
def _joint_pass(seqs, cnt, col, flog, i, lo, hi, k, k1, n, A, d):
    acc = 0.0
    for off in range(lo, hi + 1):
        j = (i + off) % n
        ctx = _joint_key(seqs, j, k, k1, n, A)
        acc += _move(cnt, col, flog, ctx * A + seqs[2, j], ctx, d)
    return acc


@njit(cache=True)
def _site_update(which, i, u, beta, x, seqs, cnt_y, col_y, cnt_z, col_z, cnt_j, col_j,
                 flog, wts, dmat, k, k1, A, deltas):
    n = seqs.shape[1]
    old = seqs[which, i]
    if which == 0:
        cnt_o, col_o, g_own, alpha = cnt_y, col_y, wts[0], wts[3]
        lo, hi = -k1, k1
    elif which == 1:
        cnt_o, col_o, g_own, alpha = cnt_z, col_z, wts[1], wts[4]
        lo, hi = -k1, k1
    else:
        cnt_o, col_o, g_own, alpha = cnt_y, col_y, 0.0, wts[5]
        lo, hi = 0, k
    g0 = wts[2]
    row = seqs[which]

    rem_own = 0.0
    if which < 2:
        rem_own = _own_pass(row, cnt_o, col_o, flog, i, k, n, A, -1)
    rem_j = _joint_pass(seqs, cnt_j, col_j, flog, i, lo, hi, k, k1, n, A, -1)

    dmin = 0.0
    for a in range(A):
        if a == old:
            deltas[a] = 0.0
            continue
        row[i] = a
        add_own = 0.0
        if which < 2:
            add_own = _own_pass(row, cnt_o, col_o, flog, i, k, n, A, 1)
        add_j = _joint_pass(seqs, cnt_j, col_j, flog, i, lo, hi, k, k1, n, A, 1)
        dd = dmat[x[i], a] - dmat[x[i], old]
        deltas[a] = (g_own * (rem_own + add_own) + g0 * (rem_j + add_j) + alpha * dd) / n
        if which < 2:
            _own_pass(row, cnt_o, col_o, flog, i, k, n, A, -1)
        _joint_pass(seqs, cnt_j, col_j, flog, i, lo, hi, k, k1, n, A, -1)
        if deltas[a] < dmin:
            dmin = deltas[a]

    total = 0.0
    for a in range(A):
        total += math.exp(-beta * (deltas[a] - dmin))
    target = u * total
    acc = 0.0
    chosen = A - 1
    for a in range(A):
        acc += math.exp(-beta * (deltas[a] - dmin))
        if target < acc:
            chosen = a
            break

    row[i] = chosen
    if which < 2:
        _own_pass(row, cnt_o, col_o, flog, i, k, n, A, 1)
    _joint_pass(seqs, cnt_j, col_j, flog, i, lo, hi, k, k1, n, A, 1)
    return deltas[chosen]


@njit(cache=True)
def run_chunk(x, seqs, cnt_y, col_y, cnt_z, col_z, cnt_j, col_j, flog, wts, dmat,
              k, k1, A, positions, uniforms, betas, t0, energy, trace, hist, thin):
    """Run ``len(positions)`` iterations starting after global iteration ``t0``.

    Returns the running energy.  ``trace[m]`` receives the energy after
    iteration ``m * n``; ``hist`` (if non-empty) counts visited triples every
    ``thin`` iterations.
    """
    n = seqs.shape[1]
    deltas = np.zeros(A)
    for s in range(positions.shape[0]):
        i = positions[s]
        beta = betas[s]
        for which in range(3):
            energy += _site_update(which, i, uniforms[s, which], beta, x, seqs,
                                   cnt_y, col_y, cnt_z, col_z, cnt_j, col_j,
                                   flog, wts, dmat, k, k1, A, deltas)
        t = t0 + s + 1
        if t >= 0 and t % n == 0 and t // n < trace.shape[0]:
            trace[t // n] = energy
        if hist.shape[0] > 0 and t > 0 and t % thin == 0:
            idx = 0
            for r in range(3):
                for j in range(n):
                    idx = idx * A + seqs[r, j]
            hist[idx] += 1
    return energy


def dense_tables(seqs: np.ndarray, k: int, k1: int, A: int):
    """Build dense count arrays for ``(y, z, w)``; returns the six arrays."""
    n = seqs.shape[1]
    m = 2 * k1 + 1
    n_own = A ** k
    n_joint = A ** (k + 2 * m)
    pos = np.arange(n)[:, None]
    past = (pos + np.arange(-k, 0)[None, :]) % n
    win = (pos + np.arange(-k1, k1 + 1)[None, :]) % n
    out = []
    for r in (0, 1):
        ctx = _pack(seqs[r][past], A)
        cnt = np.bincount(ctx * A + seqs[r], minlength=n_own * A).astype(np.int64)
        col = np.bincount(ctx, minlength=n_own).astype(np.int64)
        out += [cnt, col]
    flat = np.concatenate([seqs[2][past], seqs[0][win], seqs[1][win]], axis=1)
    ctx = _pack(flat, A)
    out.append(np.bincount(ctx * A + seqs[2], minlength=n_joint * A).astype(np.int64))
    out.append(np.bincount(ctx, minlength=n_joint).astype(np.int64))
    return tuple(out)


def _pack(digits: np.ndarray, A: int) -> np.ndarray:
    width = digits.shape[1]
    if width == 0:
        return np.zeros(digits.shape[0], dtype=np.int64)
    weights = A ** np.arange(width - 1, -1, -1, dtype=np.int64)
    return (digits * weights).sum(axis=1).astype(np.int64)


def dense_size(k: int, k1: int, A: int) -> int:
    return A ** (k + 2 * (2 * k1 + 1) + 1)


def dense_nh(cnt: np.ndarray, col: np.ndarray, flog: np.ndarray) -> float:
    return float(flog[col].sum() - flog[cnt].sum())
