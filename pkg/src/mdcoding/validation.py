"""Input validation helpers shared by the public functions and estimators."""

from __future__ import annotations

import numbers

import numpy as np

from .exceptions import InvalidInputError, InvalidOrderError


def check_sequence(seq, alphabet_size: int | None = None, *, name: str = "sequence") -> np.ndarray:
    """Validate a discrete sequence and return it as a 1-D ``int64`` array.

    Parameters
    ----------
    seq : array-like of int
        Symbols, each in ``[0, alphabet_size)``.
    alphabet_size : int, optional
        Alphabet size. When omitted only non-negativity is checked.
    name : str
        Used in error messages.
    """
    arr = np.asarray(seq)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise InvalidInputError(f"{name} must contain at least one symbol")
    if arr.dtype.kind not in "iub":
        if arr.dtype.kind == "f" and np.all(np.mod(arr, 1) == 0):
            pass
        else:
            raise InvalidInputError(f"{name} must hold integer symbols, got dtype {arr.dtype}")
    arr = arr.astype(np.int64, copy=True)
    if arr.min() < 0:
        raise InvalidInputError(f"{name} contains negative symbols")
    if alphabet_size is not None and arr.max() >= alphabet_size:
        raise InvalidInputError(
            f"{name} contains symbol {int(arr.max())} outside alphabet of size {alphabet_size}"
        )
    return arr


def infer_alphabet_size(*seqs: np.ndarray) -> int:
    """Smallest alphabet (at least binary) covering every symbol in ``seqs``."""
    top = max(int(np.max(s)) for s in seqs)
    return max(2, top + 1)


def check_alphabet_size(alphabet_size) -> int:
    if not isinstance(alphabet_size, numbers.Integral) or alphabet_size < 2:
        raise InvalidInputError(f"alphabet_size must be an integer >= 2, got {alphabet_size!r}")
    return int(alphabet_size)


def check_orders(n: int, k: int, k1: int | None = None) -> None:
    """Check ``0 <= k < n`` and, if given, ``0 <= k1 <= k`` with ``2*k1 + 1 <= n``."""
    if not isinstance(k, numbers.Integral) or k < 0:
        raise InvalidOrderError(f"order k must be a non-negative integer, got {k!r}")
    if k >= n:
        raise InvalidOrderError(f"order k={k} must be smaller than the sequence length n={n}")
    if k1 is None:
        return
    if not isinstance(k1, numbers.Integral) or k1 < 0:
        raise InvalidOrderError(f"order k1 must be a non-negative integer, got {k1!r}")
    if k1 > k:
        raise InvalidOrderError(f"k1={k1} must not exceed k={k}")
    if 2 * k1 + 1 > n:
        raise InvalidOrderError(f"window 2*k1+1={2 * k1 + 1} exceeds sequence length n={n}")


def check_same_length(*seqs: np.ndarray) -> int:
    n = len(seqs[0])
    if any(len(s) != n for s in seqs[1:]):
        raise InvalidInputError(f"sequences differ in length: {[len(s) for s in seqs]}")
    return n


def check_random_state(seed) -> np.random.Generator:
    """Turn ``None``, an int, or a Generator into a ``numpy.random.Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
