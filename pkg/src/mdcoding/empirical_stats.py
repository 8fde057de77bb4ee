"""Empirical context counts and conditional empirical entropies.

Counts are stored un-normalized in sparse tables keyed by a packed base-``A``
integer encoding of the context; only occupied contexts are kept.  Every
entropy is evaluated through the identity

    n * H = sum_b f(n_b) - sum_{b, beta} f(m_{beta, b}),    f(x) = x log2 x,

so single-symbol substitutions can be scored from the handful of columns they
touch.  All logarithms are base 2 and indexing is cyclic at both ends.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .exceptions import InvalidCountsError, InvalidInputError
from .validation import (
    check_orders,
    check_same_length,
    check_sequence,
    infer_alphabet_size,
)

__all__ = [
    "CountMatrix",
    "JointCountMatrix",
    "apply_substitution",
    "build_counts",
    "build_joint_counts",
    "column_nh",
    "conditional_entropy",
    "conditional_entropy_joint",
    "entropy_functional",
    "substitution_diff",
    "xlog2x_table",
]


@lru_cache(maxsize=16)
def _xlog2x_cached(size: int) -> np.ndarray:
    c = np.arange(size, dtype=np.float64)
    out = np.zeros(size, dtype=np.float64)
    out[1:] = c[1:] * np.log2(c[1:])
    out.setflags(write=False)
    return out


def xlog2x_table(n: int) -> np.ndarray:
    """Read-only array ``t`` with ``t[c] = c * log2(c)`` for ``c = 0..n+1``.

    Sizes are rounded up to a power of two so nearby lengths share a table.
    """
    size = 1 << max(4, int(n + 2 - 1).bit_length())
    return _xlog2x_cached(size)


def _xlog2x(c: int) -> float:
    return c * float(np.log2(c)) if c > 0 else 0.0


def entropy_functional(v) -> float:
    """Entropy in bits of the pmf proportional to the non-negative vector ``v``.

    Returns 0 for the all-zero vector; zero entries contribute nothing.
    """
    arr = np.asarray(v, dtype=np.float64)
    if np.any(arr < 0):
        raise InvalidCountsError(f"count vector has negative entries: {v!r}")
    total = arr.sum()
    if total == 0:
        return 0.0
    nz = arr[arr > 0]
    p = nz / total
    return float(np.sum(p * np.log2(total / nz)))


def column_nh(column, table: np.ndarray | None = None) -> float:
    """``sum(column) * H(column)`` in bits, i.e. ``f(sum) - sum f(c)``."""
    if table is None:
        return _xlog2x(int(sum(column))) - sum(_xlog2x(int(c)) for c in column)
    s = 0
    acc = 0.0
    for c in column:
        acc -= table[c]
        s += c
    return float(table[s] + acc)


def _window_key(seq, start: int, length: int, n: int, A: int, pos: int, sym: int) -> int:
    """Pack ``seq[start:start+length]`` (cyclic) in base ``A``, oldest symbol most significant.

    ``seq[pos]`` is read as ``sym`` so hypothetical substitutions need no copy.
    """
    key = 0
    for t in range(start, start + length):
        j = t % n
        key = key * A + (sym if j == pos else seq[j])
    return key


def _unpack(key: int, length: int, A: int) -> tuple[int, ...]:
    out = []
    for _ in range(length):
        key, r = divmod(key, A)
        out.append(r)
    return tuple(reversed(out))


class _SparseTable:
    """Shared storage: ``table[context_key] -> list of A counts``."""

    alphabet_size: int
    n: int
    table: dict

    def column(self, key: int) -> list[int]:
        col = self.table.get(key)
        return list(col) if col is not None else [0] * self.alphabet_size

    @property
    def total(self) -> int:
        return sum(sum(col) for col in self.table.values())

    @property
    def n_contexts(self) -> int:
        return len(self.table)

    def nh(self) -> float:
        """``n`` times the conditional entropy, in bits."""
        t = xlog2x_table(self.n)
        return sum(column_nh(col, t) for col in self.table.values())

    def entropy(self) -> float:
        return self.nh() / self.n

    def _add(self, key: int, sym: int, d: int) -> None:
        col = self.table.get(key)
        if col is None:
            col = [0] * self.alphabet_size
            self.table[key] = col
        col[sym] += d
        if col[sym] < 0:
            raise InvalidCountsError(f"count for context {key} symbol {sym} went negative")
        if d < 0 and not any(col):
            del self.table[key]

    def _same_counts(self, other) -> bool:
        return self.n == other.n and self.alphabet_size == other.alphabet_size and self.table == other.table


@dataclass(eq=False)
class CountMatrix(_SparseTable):
    """Order-``k`` context counts of one sequence.

    ``table[b]`` holds the counts of each symbol following context ``b``, where
    ``b`` packs ``(y[i-k], ..., y[i-1])`` in base ``A`` with ``y[i-k]`` most
    significant.  Dividing by ``n`` gives the (k+1)-th order empirical law.
    """

    order: int
    alphabet_size: int
    n: int
    table: dict = field(default_factory=dict)

    def context_key(self, context) -> int:
        key = 0
        for s in context:
            key = key * self.alphabet_size + int(s)
        return key

    def unpack_context(self, key: int) -> tuple[int, ...]:
        return _unpack(key, self.order, self.alphabet_size)

    def copy(self) -> "CountMatrix":
        return CountMatrix(self.order, self.alphabet_size, self.n, {b: list(c) for b, c in self.table.items()})

    def __eq__(self, other) -> bool:
        if not isinstance(other, CountMatrix):
            return NotImplemented
        return self.order == other.order and self._same_counts(other)

    def affected_positions(self, i: int) -> list[int]:
        return sorted({(i + d) % self.n for d in range(self.order + 1)})

    def key_at(self, seq, j: int, pos: int = -1, sym: int = 0) -> tuple[int, int]:
        """(context key, symbol) at position ``j``, reading ``seq[pos]`` as ``sym``."""
        k, n = self.order, self.n
        ctx = _window_key(seq, j - k, k, n, self.alphabet_size, pos, sym)
        return ctx, (sym if j == pos else int(seq[j]))


@dataclass(eq=False)
class JointCountMatrix(_SparseTable):
    """Counts of ``w_i`` given ``(w_{i-k}^{i-1}, y_{i-k1}^{i+k1}, z_{i-k1}^{i+k1})``.

    Keys pack ``(b0, b1, b2)`` as ``(b0 * A**m + b1) * A**m + b2`` with
    ``m = 2*k1 + 1``.
    """

    order: int
    side_order: int
    alphabet_size: int
    n: int
    table: dict = field(default_factory=dict)

    @property
    def window(self) -> int:
        return 2 * self.side_order + 1

    def context_key(self, b0, b1, b2) -> int:
        A = self.alphabet_size
        key = 0
        for s in (*b0, *b1, *b2):
            key = key * A + int(s)
        return key

    def unpack_context(self, key: int):
        A, m, k = self.alphabet_size, self.window, self.order
        flat = _unpack(key, k + 2 * m, A)
        return flat[:k], flat[k:k + m], flat[k + m:]

    def copy(self) -> "JointCountMatrix":
        return JointCountMatrix(
            self.order, self.side_order, self.alphabet_size, self.n,
            {b: list(c) for b, c in self.table.items()},
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, JointCountMatrix):
            return NotImplemented
        return (
            self.order == other.order
            and self.side_order == other.side_order
            and self._same_counts(other)
        )

    def affected_positions(self, i: int, which: str) -> list[int]:
        n = self.n
        if which == "w":
            offsets = range(self.order + 1)
        elif which in ("y", "z"):
            offsets = range(-self.side_order, self.side_order + 1)
        else:
            raise InvalidInputError(f"which must be 'w', 'y' or 'z', got {which!r}")
        return sorted({(i + d) % n for d in offsets})

    def key_at(self, w, y, z, j: int, which: str = "w", pos: int = -1, sym: int = 0) -> tuple[int, int]:
        """(context key, symbol of w) at ``j``; ``which[pos]`` is read as ``sym``."""
        A, n, k, k1, m = self.alphabet_size, self.n, self.order, self.side_order, self.window
        pw = pos if which == "w" else -1
        py = pos if which == "y" else -1
        pz = pos if which == "z" else -1
        b0 = _window_key(w, j - k, k, n, A, pw, sym)
        b1 = _window_key(y, j - k1, m, n, A, py, sym)
        b2 = _window_key(z, j - k1, m, n, A, pz, sym)
        beta = sym if j == pw else int(w[j])
        return (b0 * A ** m + b1) * A ** m + b2, beta


def build_counts(y, k: int, alphabet_size: int | None = None) -> CountMatrix:
    """Order-``k`` cyclic context counts of ``y``.

    >>> cm = build_counts([0, 0, 1, 1], 1)
    >>> cm.column(0), cm.column(1)
    ([1, 1], [1, 1])
    """
    y = check_sequence(y, alphabet_size, name="y")
    n = len(y)
    check_orders(n, k)
    A = alphabet_size or infer_alphabet_size(y)
    # Rolling window: contexts for all positions at once.
    idx = (np.arange(n)[:, None] + np.arange(-k, 0)[None, :]) % n
    weights = A ** np.arange(k - 1, -1, -1, dtype=np.int64)
    ctx = (y[idx] * weights).sum(axis=1) if k else np.zeros(n, dtype=np.int64)
    cm = CountMatrix(k, A, n)
    cells, counts = np.unique(ctx * A + y, return_counts=True)
    for cell, c in zip(cells.tolist(), counts.tolist()):
        b, beta = divmod(cell, A)
        cm.table.setdefault(b, [0] * A)[beta] = c
    return cm


def conditional_entropy(counts: CountMatrix) -> float:
    """Conditional empirical entropy ``H_k`` in bits per symbol."""
    return counts.entropy()


def build_joint_counts(w, y, z, k: int, k1: int, alphabet_size: int | None = None) -> JointCountMatrix:
    """Counts of ``w_i`` in context ``(w_{i-k}^{i-1}, y_{i-k1}^{i+k1}, z_{i-k1}^{i+k1})``."""
    w = check_sequence(w, alphabet_size, name="w")
    y = check_sequence(y, alphabet_size, name="y")
    z = check_sequence(z, alphabet_size, name="z")
    n = check_same_length(w, y, z)
    check_orders(n, k, k1)
    A = alphabet_size or infer_alphabet_size(w, y, z)
    m = 2 * k1 + 1
    pos = np.arange(n)[:, None]
    past = (pos + np.arange(-k, 0)[None, :]) % n
    win = (pos + np.arange(-k1, k1 + 1)[None, :]) % n
    flat = np.concatenate([w[past], y[win], z[win]], axis=1)
    weights = A ** np.arange(k + 2 * m - 1, -1, -1, dtype=np.int64)
    ctx = (flat * weights).sum(axis=1)
    jm = JointCountMatrix(k, k1, A, n)
    cells, counts = np.unique(ctx * A + w, return_counts=True)
    for cell, c in zip(cells.tolist(), counts.tolist()):
        b, beta = divmod(cell, A)
        jm.table.setdefault(b, [0] * A)[beta] = c
    return jm


def conditional_entropy_joint(jcounts: JointCountMatrix) -> float:
    """``H_{k,k1}(w | y, z)`` in bits per symbol."""
    return jcounts.entropy()


def _check_substitution(table, seqs, i: int, symbol: int, which: str):
    n, A = table.n, table.alphabet_size
    if not 0 <= i < n:
        raise InvalidInputError(f"position {i} outside [0, {n})")
    if not 0 <= symbol < A:
        raise InvalidInputError(f"symbol {symbol} outside alphabet of size {A}")
    if isinstance(table, CountMatrix):
        if which != "y":
            raise InvalidInputError("a CountMatrix has a single sequence role 'y'")
        seq = seqs[0] if isinstance(seqs, tuple) else seqs
        if len(seq) != n:
            raise InvalidInputError("sequence length does not match the table")
        return (seq,)
    if not isinstance(seqs, tuple) or len(seqs) != 3:
        raise InvalidInputError("joint substitutions need the (w, y, z) triple")
    if which not in ("w", "y", "z"):
        raise InvalidInputError(f"which must be 'w', 'y' or 'z', got {which!r}")
    if any(len(s) != n for s in seqs):
        raise InvalidInputError("sequence lengths do not match the table")
    return seqs


def substitution_diff(table, seqs, i: int, symbol: int, which: str = "y") -> dict[int, list[int]]:
    """Column changes caused by setting ``which[i] = symbol``, without mutating anything.

    For a :class:`CountMatrix` pass the sequence itself (``which='y'``); for a
    :class:`JointCountMatrix` pass ``(w, y, z)``.  Returns ``{context: delta}``
    for every context whose column actually changes.
    """
    seqs = _check_substitution(table, seqs, i, symbol, which)
    A = table.alphabet_size
    diff: dict[int, list[int]] = {}
    if isinstance(table, CountMatrix):
        (seq,) = seqs
        if int(seq[i]) == symbol:
            return {}
        for j in table.affected_positions(i):
            ctx, beta = table.key_at(seq, j)
            diff.setdefault(ctx, [0] * A)[beta] -= 1
            ctx, beta = table.key_at(seq, j, i, symbol)
            diff.setdefault(ctx, [0] * A)[beta] += 1
    else:
        w, y, z = seqs
        if int({"w": w, "y": y, "z": z}[which][i]) == symbol:
            return {}
        for j in table.affected_positions(i, which):
            ctx, beta = table.key_at(w, y, z, j)
            diff.setdefault(ctx, [0] * A)[beta] -= 1
            ctx, beta = table.key_at(w, y, z, j, which, i, symbol)
            diff.setdefault(ctx, [0] * A)[beta] += 1
    return {ctx: d for ctx, d in diff.items() if any(d)}


def diff_nh(table, diff: dict[int, list[int]]) -> float:
    """Change of ``n * H`` when ``diff`` is applied to ``table``."""
    t = xlog2x_table(table.n)
    acc = 0.0
    for ctx, d in diff.items():
        old = table.column(ctx)
        new = [a + b for a, b in zip(old, d)]
        acc += column_nh(new, t) - column_nh(old, t)
    return acc


def apply_substitution(table, seqs, i: int, symbol: int, which: str = "y"):
    """Update ``table`` in place for ``which[i] = symbol``.

    The sequences themselves are not modified; the caller commits the symbol
    after every table owning that sequence has been updated.  Returns the list
    of ``(context, old_column, new_column)`` that changed.
    """
    diff = substitution_diff(table, seqs, i, symbol, which)
    touched = []
    for ctx, d in diff.items():
        old = table.column(ctx)
        for beta, delta in enumerate(d):
            if delta:
                table._add(ctx, beta, delta)
        touched.append((ctx, old, table.column(ctx)))
    return touched
