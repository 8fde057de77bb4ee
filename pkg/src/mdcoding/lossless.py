"""Adaptive context-model arithmetic coding of reconstruction sequences.

Each context keeps add-half (Krichevsky-Trofimov) counts, stored doubled so
they stay integral: every symbol starts at 1 and grows by 2 per occurrence.
The entropy coder is a 32-bit range coder with LZMA-style carry propagation.
Its flush picks the value in the final interval with the most trailing zero
bits, and the decoder reads zeros past the end of the payload, so trailing
zero bits are dropped and the recorded payload bit-length is tight.

Bitstream layout (little-endian)::

    magic "MDSC" | u8 version | u8 role | u32 n | u8 k | u8 k1 | u8 A
    | u64 payload bit-length | payload bytes
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .exceptions import DecodeError, InvalidInputError
from .validation import (
    check_alphabet_size,
    check_orders,
    check_same_length,
    check_sequence,
    infer_alphabet_size,
)

__all__ = [
    "Bitstream",
    "ContextModel",
    "ROLE_PLAIN",
    "ROLE_REFINEMENT",
    "ROLE_SIDE1",
    "ROLE_SIDE2",
    "decode_conditional",
    "decode_sequence",
    "encode_conditional",
    "encode_sequence",
]

MAGIC = b"MDSC"
VERSION = 1
HEADER = struct.Struct("<4sBBIBBBQ")

ROLE_PLAIN = 0
ROLE_SIDE1 = 1
ROLE_SIDE2 = 2
ROLE_REFINEMENT = 3
_ROLES = (ROLE_PLAIN, ROLE_SIDE1, ROLE_SIDE2, ROLE_REFINEMENT)

_TOP = 1 << 24
_MASK32 = 0xFFFFFFFF
# counts must stay below the minimum normalized range
MAX_LENGTH = (1 << 22)


@dataclass(frozen=True)
class Bitstream:
    role: int
    n: int
    k: int
    k1: int
    alphabet_size: int
    payload: bytes
    bit_length: int
    version: int = VERSION

    def __post_init__(self):
        if not (self.bit_length <= 8 * len(self.payload) < self.bit_length + 8):
            raise InvalidInputError(
                f"payload of {len(self.payload)} bytes inconsistent with bit length {self.bit_length}"
            )

    @property
    def total_bits(self) -> int:
        """Header bits plus the exact payload bit-length."""
        return 8 * HEADER.size + self.bit_length

    def to_bytes(self) -> bytes:
        head = HEADER.pack(MAGIC, self.version, self.role, self.n, self.k, self.k1,
                           self.alphabet_size, self.bit_length)
        return head + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "Bitstream":
        if len(data) < HEADER.size:
            raise DecodeError(f"bitstream shorter than its {HEADER.size}-byte header")
        magic, version, role, n, k, k1, A, bits = HEADER.unpack_from(data)
        if magic != MAGIC:
            raise DecodeError(f"bad magic {magic!r}")
        if version != VERSION:
            raise DecodeError(f"unsupported bitstream version {version}")
        if role not in _ROLES:
            raise DecodeError(f"unknown stream role {role}")
        payload = bytes(data[HEADER.size:])
        need = (bits + 7) // 8
        if len(payload) < need:
            raise DecodeError(f"payload truncated: {len(payload)} bytes, header needs {need}")
        if len(payload) > need:
            raise DecodeError(f"{len(payload) - need} trailing bytes after payload")
        return cls(role, n, k, k1, A, payload, bits, version)


class ContextModel:
    """Per-context adaptive symbol counts with add-half initialisation."""

    def __init__(self, alphabet_size: int):
        self.alphabet_size = alphabet_size
        self.tables: dict[int, list[int]] = {}

    def freqs(self, ctx: int) -> list[int]:
        f = self.tables.get(ctx)
        if f is None:
            f = [1] * self.alphabet_size
            self.tables[ctx] = f
        return f

    def probability(self, ctx: int, sym: int) -> float:
        f = self.freqs(ctx)
        return f[sym] / sum(f)

    def counts(self, ctx: int) -> list[int]:
        """Observed symbol counts in ``ctx`` (without the half pseudo-counts)."""
        return [(c - 1) // 2 for c in self.freqs(ctx)]

    @staticmethod
    def update(freqs: list[int], sym: int) -> None:
        freqs[sym] += 2


class _RangeEncoder:
    def __init__(self):
        self.low = 0
        self.range = _MASK32
        self.cache = 0
        self.cache_size = 1
        self.out = bytearray()

    def _shift_low(self):
        low = self.low
        if low < 0xFF000000 or low > _MASK32:
            carry = low >> 32
            temp = self.cache
            while True:
                self.out.append((temp + carry) & 0xFF)
                temp = 0xFF
                self.cache_size -= 1
                if self.cache_size == 0:
                    break
            self.cache = (low >> 24) & 0xFF
        self.cache_size += 1
        self.low = (low & 0x00FFFFFF) << 8

    def encode(self, cum: int, freq: int, total: int):
        r = self.range // total
        self.low += r * cum
        self.range = r * freq
        while self.range < _TOP:
            self.range <<= 8
            self._shift_low()

    def finish(self) -> tuple[bytes, int]:
        low, hi = self.low, self.low + self.range
        for b in range(32, -1, -1):
            mask = (1 << b) - 1
            v = (low + mask) & ~mask
            if v < hi:
                break
        self.low = v
        for _ in range(5):
            self._shift_low()
        # first byte is always the zero placeholder of the initial cache
        data = bytes(self.out[1:]).rstrip(b"\x00")
        if not data:
            return b"", 0
        last = data[-1]
        trailing = (last & -last).bit_length() - 1
        return data, 8 * len(data) - trailing


class _RangeDecoder:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.range = _MASK32
        code = 0
        for _ in range(4):
            code = (code << 8) | self._byte()
        self.code = code

    def _byte(self) -> int:
        p = self.pos
        self.pos = p + 1
        return self.data[p] if p < len(self.data) else 0

    def decode(self, freqs: list[int], total: int) -> int:
        r = self.range // total
        v = self.code // r
        if v >= total:
            raise DecodeError("arithmetic decoder left the coding interval")
        cum = 0
        for sym, f in enumerate(freqs):
            if v < cum + f:
                break
            cum += f
        self.code -= r * cum
        self.range = r * f
        while self.range < _TOP:
            self.code = ((self.code << 8) | self._byte()) & _MASK32
            self.range <<= 8
        return sym


def _code_symbol(enc: _RangeEncoder, freqs: list[int], sym: int):
    cum = 0
    for s in range(sym):
        cum += freqs[s]
    enc.encode(cum, freqs[sym], sum(freqs))
    freqs[sym] += 2


def _past_modulus(A: int, k: int) -> int:
    # past keys are base A+1 so a truncated prefix (leading 0 digits) stays distinct
    return (A + 1) ** k


def _side_keys(seq: np.ndarray, k1: int, A: int) -> np.ndarray:
    """Cyclic window key of ``seq[i-k1 .. i+k1]`` for every ``i``."""
    n = len(seq)
    m = 2 * k1 + 1
    idx = (np.arange(n)[:, None] + np.arange(-k1, k1 + 1)[None, :]) % n
    weights = A ** np.arange(m - 1, -1, -1, dtype=np.int64)
    return (seq[idx] * weights).sum(axis=1)


def _check_header(b: Bitstream, k: int, k1: int, n: int | None, roles) -> None:
    if b.role not in roles:
        raise DecodeError(f"stream role {b.role} not decodable here")
    if b.k != k or b.k1 != k1:
        raise DecodeError(f"header orders (k={b.k}, k1={b.k1}) do not match (k={k}, k1={k1})")
    if n is not None and b.n != n:
        raise DecodeError(f"header length n={b.n} does not match expected n={n}")
    if b.n < 1 or b.n > MAX_LENGTH or b.alphabet_size < 2:
        raise DecodeError("header carries an invalid length or alphabet size")


def _prepare(s, alphabet_size):
    s = check_sequence(s, alphabet_size, name="sequence")
    if len(s) > MAX_LENGTH:
        raise InvalidInputError(f"sequence longer than {MAX_LENGTH} symbols")
    A = check_alphabet_size(alphabet_size or infer_alphabet_size(s))
    return s, A


def _encode_plain(s: np.ndarray, k: int, A: int, model: ContextModel | None = None) -> tuple[bytes, int]:
    enc = _RangeEncoder()
    tables = (model or ContextModel(A)).tables
    modulus = _past_modulus(A, k)
    ctx = 0
    for sym in s.tolist():
        f = tables.get(ctx)
        if f is None:
            f = tables[ctx] = [1] * A
        _code_symbol(enc, f, sym)
        if k:
            ctx = (ctx * (A + 1) + sym + 1) % modulus
    return enc.finish()


def _decode_plain(payload: bytes, n: int, k: int, A: int, model: ContextModel | None = None) -> np.ndarray:
    dec = _RangeDecoder(payload)
    tables = (model or ContextModel(A)).tables
    modulus = _past_modulus(A, k)
    ctx = 0
    out = []
    for _ in range(n):
        f = tables.get(ctx)
        if f is None:
            f = tables[ctx] = [1] * A
        sym = dec.decode(f, sum(f))
        f[sym] += 2
        out.append(sym)
        if k:
            ctx = (ctx * (A + 1) + sym + 1) % modulus
    return np.array(out, dtype=np.int64)


def encode_sequence(s, k: int, alphabet_size: int | None = None, role: int = ROLE_PLAIN) -> Bitstream:
    """Code ``s`` with an adaptive order-``k`` context model.

    Contexts are the preceding ``k`` symbols, truncated at the start of the
    sequence (no cyclic wrap, the decoder has not seen the end yet).
    """
    s, A = _prepare(s, alphabet_size)
    if k < 0 or k > 255:
        raise InvalidInputError(f"order k must be in [0, 255], got {k}")
    payload, bits = _encode_plain(s, k, A)
    return Bitstream(role, len(s), k, 0, A, payload, bits)


def decode_sequence(b: Bitstream | bytes, k: int, n: int | None = None, *, verify: bool = True) -> np.ndarray:
    """Inverse of :func:`encode_sequence`.

    With ``verify`` the decoded sequence is re-encoded and compared with the
    payload, which turns silent corruption into :class:`DecodeError`.
    """
    if isinstance(b, (bytes, bytearray, memoryview)):
        b = Bitstream.from_bytes(bytes(b))
    _check_header(b, k, 0, n, (ROLE_PLAIN, ROLE_SIDE1, ROLE_SIDE2))
    out = _decode_plain(b.payload, b.n, k, b.alphabet_size)
    if verify and _encode_plain(out, k, b.alphabet_size) != (b.payload, b.bit_length):
        raise DecodeError("payload does not re-encode to itself; stream is corrupted")
    return out


def _conditional_parts(y, z, k1, A):
    m = 2 * k1 + 1
    return _side_keys(y, k1, A) * A ** m + _side_keys(z, k1, A)


def _encode_cond(w: np.ndarray, side: np.ndarray, k: int, k1: int, A: int,
                 model: ContextModel | None = None) -> tuple[bytes, int]:
    enc = _RangeEncoder()
    tables = (model or ContextModel(A)).tables
    modulus = _past_modulus(A, k)
    span = A ** (2 * (2 * k1 + 1))
    past = 0
    for sym, sk in zip(w.tolist(), side.tolist()):
        ctx = past * span + sk
        f = tables.get(ctx)
        if f is None:
            f = tables[ctx] = [1] * A
        _code_symbol(enc, f, sym)
        if k:
            past = (past * (A + 1) + sym + 1) % modulus
    return enc.finish()


def _decode_cond(payload: bytes, side: np.ndarray, k: int, k1: int, A: int,
                 model: ContextModel | None = None) -> np.ndarray:
    dec = _RangeDecoder(payload)
    tables = (model or ContextModel(A)).tables
    modulus = _past_modulus(A, k)
    span = A ** (2 * (2 * k1 + 1))
    past = 0
    out = []
    for sk in side.tolist():
        ctx = past * span + sk
        f = tables.get(ctx)
        if f is None:
            f = tables[ctx] = [1] * A
        sym = dec.decode(f, sum(f))
        f[sym] += 2
        out.append(sym)
        if k:
            past = (past * (A + 1) + sym + 1) % modulus
    return np.array(out, dtype=np.int64)


def encode_conditional(w, y, z, k: int, k1: int, alphabet_size: int | None = None,
                       role: int = ROLE_REFINEMENT) -> Bitstream:
    """Code ``w`` given side information ``(y, z)`` known to the decoder.

    The context of ``w_i`` is its truncated past ``w_{i-k}^{i-1}`` together
    with the cyclic windows ``y_{i-k1}^{i+k1}`` and ``z_{i-k1}^{i+k1}``.
    """
    w, A = _prepare(w, alphabet_size)
    y = check_sequence(y, A, name="y")
    z = check_sequence(z, A, name="z")
    n = check_same_length(w, y, z)
    check_orders(n, k, k1)
    if k > 255 or k1 > 255:
        raise InvalidInputError("orders must fit in one byte")
    payload, bits = _encode_cond(w, _conditional_parts(y, z, k1, A), k, k1, A)
    return Bitstream(role, n, k, k1, A, payload, bits)


def decode_conditional(b: Bitstream | bytes, y, z, k: int, k1: int, *, verify: bool = True) -> np.ndarray:
    """Inverse of :func:`encode_conditional` given the same side sequences."""
    if isinstance(b, (bytes, bytearray, memoryview)):
        b = Bitstream.from_bytes(bytes(b))
    A = b.alphabet_size
    try:
        y = check_sequence(y, A, name="y")
        z = check_sequence(z, A, name="z")
        check_same_length(y, z)
    except InvalidInputError as exc:
        raise DecodeError(f"side information unusable: {exc}") from exc
    _check_header(b, k, k1, len(y), (ROLE_REFINEMENT,))
    side = _conditional_parts(y, z, k1, A)
    out = _decode_cond(b.payload, side, k, k1, A)
    if verify and _encode_cond(out, side, k, k1, A) != (b.payload, b.bit_length):
        raise DecodeError("payload does not re-encode under this side information")
    return out


def code_length(b: Bitstream) -> int:
    """Payload bits; the quantity compared against ``n * H``."""
    return b.bit_length
