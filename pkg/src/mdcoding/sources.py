"""Markov test sources and the on-disk sequence format."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DecodeError, InvalidInputError
from .validation import check_alphabet_size, check_sequence

__all__ = [
    "MarkovSourceSpec",
    "generate_markov",
    "read_sequence",
    "stationary_distribution",
    "write_sequence",
]

SEQ_MAGIC = b"MDSQ"
SEQ_HEADER = struct.Struct("<4sIB")


@dataclass(frozen=True)
class MarkovSourceSpec:
    """First-order Markov chain on ``{0, ..., A-1}`` with a row-stochastic matrix."""

    transition: np.ndarray = field(repr=False)
    n: int = 10_000
    seed: int | None = None

    def __post_init__(self):
        P = np.array(self.transition, dtype=np.float64)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 2:
            raise InvalidInputError(f"transition matrix must be square with size >= 2, got {P.shape}")
        if np.any(P < 0) or not np.all(np.isfinite(P)):
            raise InvalidInputError("transition probabilities must be finite and non-negative")
        if np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
            raise InvalidInputError("transition matrix rows must sum to 1")
        if self.n < 1:
            raise InvalidInputError("n must be >= 1")
        P.setflags(write=False)
        object.__setattr__(self, "transition", P)

    @classmethod
    def symmetric(cls, p: float, n: int, seed: int | None = None, alphabet_size: int = 2) -> "MarkovSourceSpec":
        """Stay with probability ``1 - p``, otherwise jump uniformly to another symbol."""
        A = check_alphabet_size(alphabet_size)
        if not 0 <= p <= 1:
            raise InvalidInputError(f"transition probability must lie in [0, 1], got {p}")
        P = np.full((A, A), p / (A - 1))
        np.fill_diagonal(P, 1.0 - p)
        return cls(P, n, seed)

    @property
    def alphabet_size(self) -> int:
        return self.transition.shape[0]

    def entropy_rate(self) -> float:
        """Entropy rate in bits/symbol under the stationary law."""
        P = self.transition
        pi = stationary_distribution(P)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(P > 0, -P * np.log2(P), 0.0)
        return float(pi @ terms.sum(axis=1))

    def to_dict(self) -> dict:
        return {"transition": self.transition.tolist(), "n": self.n, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "MarkovSourceSpec":
        if "transition" in d:
            return cls(np.asarray(d["transition"]), int(d["n"]), d.get("seed"))
        return cls.symmetric(float(d["p"]), int(d["n"]), d.get("seed"), int(d.get("alphabet_size", 2)))


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Left eigenvector of ``P`` for eigenvalue 1, normalized to sum 1."""
    A = P.shape[0]
    # solve pi (P - I) = 0 with sum(pi) = 1 in the least-squares sense
    M = np.vstack([(P - np.eye(A)).T, np.ones(A)])
    b = np.zeros(A + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(M, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def generate_markov(spec: MarkovSourceSpec) -> np.ndarray:
    """Sample ``spec.n`` symbols, starting from the stationary law."""
    rng = np.random.default_rng(spec.seed)
    P = spec.transition
    A = spec.alphabet_size
    pi = stationary_distribution(P)
    cdf = np.cumsum(P, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(spec.n)
    x = np.empty(spec.n, dtype=np.int64)
    x[0] = min(int(np.searchsorted(np.cumsum(pi), u[0], side="right")), A - 1)
    rows = [c.tolist() for c in cdf]
    prev = int(x[0])
    out = x.tolist()
    for i in range(1, spec.n):
        row = rows[prev]
        ui = u[i]
        s = 0
        while ui >= row[s]:
            s += 1
        out[i] = prev = s
    return np.array(out, dtype=np.int64)


def write_sequence(path, seq, alphabet_size: int | None = None) -> None:
    """Write ``MDSQ | u32 n | u8 A`` followed by one byte per symbol."""
    seq = check_sequence(seq, alphabet_size)
    A = alphabet_size or max(2, int(seq.max()) + 1)
    if A > 256:
        raise InvalidInputError("the sequence file format stores one byte per symbol")
    Path(path).write_bytes(SEQ_HEADER.pack(SEQ_MAGIC, len(seq), A) + seq.astype(np.uint8).tobytes())


def read_sequence(path) -> tuple[np.ndarray, int]:
    """Inverse of :func:`write_sequence`; returns ``(symbols, alphabet_size)``."""
    data = Path(path).read_bytes()
    if len(data) < SEQ_HEADER.size:
        raise DecodeError(f"{path}: file shorter than the sequence header")
    magic, n, A = SEQ_HEADER.unpack_from(data)
    if magic != SEQ_MAGIC:
        raise DecodeError(f"{path}: bad magic {magic!r}")
    body = np.frombuffer(data, dtype=np.uint8, offset=SEQ_HEADER.size)
    if len(body) != n:
        raise DecodeError(f"{path}: header says {n} symbols, file holds {len(body)}")
    seq = body.astype(np.int64)
    if n and seq.max() >= A:
        raise DecodeError(f"{path}: symbol outside alphabet of size {A}")
    return seq, A
