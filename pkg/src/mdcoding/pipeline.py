"""Two-message block code: encoder, two side decoders and the central decoder.

``md_encode`` anneals the source, codes the first reconstruction into M1 and
the second into M2, then codes the central reconstruction conditionally on
both and splits that refinement bitstream at bit ``ceil(theta * L)``: the head
rides in M1, the tail in M2.

Message layout (little-endian)::

    u8 role (1 or 2) | u32 theta numerator | u32 theta denominator
    | u8 fragment index | u32 fragment bit-length | u32 crc32 of the refinement
    | u32 crc32 of the side Bitstream | side Bitstream | fragment bytes (zero padded to a byte)
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .annealer import AnnealReport, AnnealSchedule, anneal
from .empirical_stats import build_counts, build_joint_counts
from .energy import DistortionMeasure, LagrangianWeights, average_distortion
from .exceptions import DecodeError, FragmentMismatchError, InvalidInputError
from .lossless import (
    HEADER as BITSTREAM_HEADER,
    ROLE_SIDE1,
    ROLE_SIDE2,
    Bitstream,
    decode_conditional,
    decode_sequence,
    encode_conditional,
    encode_sequence,
)
from .validation import check_sequence

__all__ = [
    "MDMessage",
    "RateReport",
    "Theorem0Verdict",
    "md_decode_central",
    "md_decode_side",
    "md_encode",
    "theorem0_check",
]

# role, theta num/den, fragment index, fragment bits, refinement crc, side-stream crc
MESSAGE_HEADER = struct.Struct("<BIIBIII")
THETA_DENOMINATOR_LIMIT = 1 << 20


def _split_bits(data: bytes, nbits: int, head_bits: int) -> tuple[bytes, bytes]:
    """Split the first ``nbits`` of ``data`` after ``head_bits`` bits; both parts zero padded."""
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[:nbits]
    return np.packbits(bits[:head_bits]).tobytes(), np.packbits(bits[head_bits:]).tobytes()


def _join_bits(a: bytes, a_bits: int, b: bytes, b_bits: int) -> bytes:
    bits_a = np.unpackbits(np.frombuffer(a, dtype=np.uint8))[:a_bits]
    bits_b = np.unpackbits(np.frombuffer(b, dtype=np.uint8))[:b_bits]
    return np.packbits(np.concatenate([bits_a, bits_b])).tobytes()


@dataclass(frozen=True)
class MDMessage:
    """One description: a side bitstream plus a fragment of the refinement."""

    role: int
    theta: Fraction
    fragment_index: int
    side: Bitstream
    fragment: bytes
    fragment_bits: int
    digest: int

    @property
    def bit_length(self) -> int:
        """Header, embedded side stream and exact fragment bits (padding excluded)."""
        return 8 * MESSAGE_HEADER.size + 8 * len(self.side.to_bytes()) + self.fragment_bits

    def to_bytes(self) -> bytes:
        side = self.side.to_bytes()
        head = MESSAGE_HEADER.pack(self.role, self.theta.numerator, self.theta.denominator,
                                   self.fragment_index, self.fragment_bits, self.digest, zlib.crc32(side))
        return head + side + self.fragment

    @classmethod
    def from_bytes(cls, data: bytes) -> "MDMessage":
        if len(data) < MESSAGE_HEADER.size + BITSTREAM_HEADER.size:
            raise DecodeError("message shorter than its headers")
        role, num, den, idx, frag_bits, digest, side_crc = MESSAGE_HEADER.unpack_from(data)
        if role not in (1, 2) or idx != role - 1:
            raise DecodeError(f"invalid role {role} / fragment index {idx}")
        if den == 0 or num > den:
            raise DecodeError(f"invalid theta {num}/{den}")
        off = MESSAGE_HEADER.size
        side_bits = BITSTREAM_HEADER.unpack_from(data, off)[-1]
        side_len = BITSTREAM_HEADER.size + (side_bits + 7) // 8
        raw = bytes(data[off:off + side_len])
        # the side code is nearly complete, so most corruptions still decode; the crc catches them
        if zlib.crc32(raw) != side_crc:
            raise DecodeError("side stream fails its checksum")
        side = Bitstream.from_bytes(raw)
        fragment = bytes(data[off + side_len:])
        if len(fragment) != (frag_bits + 7) // 8:
            raise DecodeError("fragment length disagrees with its header")
        return cls(role, Fraction(num, den), idx, side, fragment, frag_bits, digest)


@dataclass(frozen=True)
class MDMessages:
    m1: MDMessage
    m2: MDMessage

    @property
    def theta(self) -> Fraction:
        return self.m1.theta

    def __iter__(self):
        return iter((self.m1, self.m2))


@dataclass
class RateReport:
    n: int
    R1: float
    R2: float
    hk_1: float
    hk_2: float
    hkk1_0: float
    D1: float
    D2: float
    D0: float
    side_bits: tuple[int, int]
    refinement_bits: int
    header_bits: int

    @property
    def slack(self) -> float:
        """Rate above the empirical-entropy sum, in bits/symbol."""
        return self.R1 + self.R2 - (self.hk_1 + self.hk_2 + self.hkk1_0)

    def to_dict(self) -> dict:
        return {
            "R1": self.R1, "R2": self.R2, "hk_1": self.hk_1, "hk_2": self.hk_2,
            "hkk1_0": self.hkk1_0, "D1": self.D1, "D2": self.D2, "D0": self.D0,
            "slack": self.slack,
        }


@dataclass(frozen=True)
class Theorem0Verdict:
    passed: bool
    margins: dict = field(default_factory=dict)

    def __bool__(self):
        return self.passed


def _as_theta(theta) -> Fraction:
    t = Fraction(theta).limit_denominator(THETA_DENOMINATOR_LIMIT)
    if not 0 <= t <= 1:
        raise InvalidInputError(f"theta must lie in [0, 1], got {theta!r}")
    return t


def md_encode(x, weights: LagrangianWeights | None = None, distortion: DistortionMeasure | None = None,
              k: int = 5, k1: int = 1, schedule: AnnealSchedule | None = None, r: int = 0,
              theta=0.5, seed: int | None = None, *, backend: str = "auto"):
    """Anneal ``x`` and package the triple into two messages.

    Returns ``(MDMessages, AnnealReport, RateReport)``.  Rates count every
    header bit; the refinement fragment counts its exact bit-length.
    """
    theta = _as_theta(theta)
    x = check_sequence(x, None if distortion is None else distortion.alphabet_size, name="x")
    if distortion is None:
        distortion = DistortionMeasure.hamming(max(2, int(x.max()) + 1))
    report = anneal(x, weights, distortion, k, k1, schedule, r, seed, backend=backend)
    messages = pack_messages(report.y, report.z, report.w, k, k1, theta, distortion.alphabet_size)
    rates = rate_report(x, report, messages, distortion, k, k1)
    return messages, report, rates


def pack_messages(y, z, w, k: int, k1: int, theta, alphabet_size: int) -> MDMessages:
    """Lossless stage only: code an already chosen triple into (M1, M2)."""
    theta = _as_theta(theta)
    side1 = encode_sequence(y, k, alphabet_size, role=ROLE_SIDE1)
    side2 = encode_sequence(z, k, alphabet_size, role=ROLE_SIDE2)
    refinement = encode_conditional(w, y, z, k, k1, alphabet_size)
    data = refinement.to_bytes()
    total = refinement.total_bits
    head = math.ceil(theta * total)
    frag1, frag2 = _split_bits(data, total, head)
    digest = zlib.crc32(data)
    m1 = MDMessage(1, theta, 0, side1, frag1, head, digest)
    m2 = MDMessage(2, theta, 1, side2, frag2, total - head, digest)
    return MDMessages(m1, m2)


def rate_report(x, report: AnnealReport, messages: MDMessages, distortion, k, k1) -> RateReport:
    n = len(x)
    A = distortion.alphabet_size
    y, z, w = report.triple
    m1, m2 = messages
    header_bits = 2 * 8 * MESSAGE_HEADER.size + 3 * 8 * BITSTREAM_HEADER.size
    return RateReport(
        n=n,
        R1=m1.bit_length / n,
        R2=m2.bit_length / n,
        hk_1=build_counts(y, k, A).entropy(),
        hk_2=build_counts(z, k, A).entropy(),
        hkk1_0=build_joint_counts(w, y, z, k, k1, A).entropy(),
        D1=average_distortion(x, y, distortion),
        D2=average_distortion(x, z, distortion),
        D0=average_distortion(x, w, distortion),
        side_bits=(m1.side.bit_length, m2.side.bit_length),
        refinement_bits=m1.fragment_bits + m2.fragment_bits - 8 * BITSTREAM_HEADER.size,
        header_bits=header_bits,
    )


def _load(m) -> MDMessage:
    if isinstance(m, MDMessage):
        return m
    return MDMessage.from_bytes(bytes(m))


def md_decode_side(message, which: int | None = None) -> np.ndarray:
    """Side decoder: reconstruct from one message, ignoring its refinement fragment."""
    m = _load(message)
    if which is not None and which != m.role:
        raise DecodeError(f"message carries description {m.role}, not {which}")
    return decode_sequence(m.side, m.side.k)


def md_decode_central(m1, m2) -> np.ndarray:
    """Central decoder: both side reconstructions, then the refinement given them."""
    m1, m2 = _load(m1), _load(m2)
    if (m1.role, m2.role) != (1, 2):
        raise DecodeError("central decoder needs (M1, M2) in order")
    if m1.digest != m2.digest or m1.theta != m2.theta:
        raise FragmentMismatchError("refinement fragments come from different encodes")
    data = _join_bits(m1.fragment, m1.fragment_bits, m2.fragment, m2.fragment_bits)
    if zlib.crc32(data) != m1.digest:
        raise FragmentMismatchError("reassembled refinement fails its checksum")
    refinement = Bitstream.from_bytes(data)
    y = md_decode_side(m1)
    z = md_decode_side(m2)
    return decode_conditional(refinement, y, z, refinement.k, refinement.k1)


def theorem0_check(report: RateReport, eps: float = 1e-9) -> Theorem0Verdict:
    """Realized rates must not undercut the empirical entropies they code.

    Margins are ``R1 - H1``, ``R2 - H2`` and ``R1 + R2 - (H1 + H2 + H0)``.
    """
    margins = {
        "side1": report.R1 - report.hk_1,
        "side2": report.R2 - report.hk_2,
        "sum": report.R1 + report.R2 - (report.hk_1 + report.hk_2 + report.hkk1_0),
    }
    return Theorem0Verdict(all(v >= -eps for v in margins.values()), margins)
