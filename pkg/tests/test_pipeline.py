import math
from dataclasses import replace

import numpy as np
import pytest

from mdcoding.annealer import AnnealSchedule
from mdcoding.energy import DistortionMeasure, LagrangianWeights
from mdcoding.exceptions import DecodeError, FragmentMismatchError, InvalidInputError
from mdcoding.lossless import Bitstream, encode_conditional
from mdcoding.pipeline import (
    MESSAGE_HEADER,
    MDMessage,
    _join_bits,
    md_decode_central,
    md_decode_side,
    md_encode,
    pack_messages,
    theorem0_check,
)
from mdcoding.sources import MarkovSourceSpec, generate_markov


@pytest.fixture(scope="module")
def source():
    return generate_markov(MarkovSourceSpec.symmetric(0.2, 1500, seed=11))


@pytest.fixture(scope="module")
def encoded(source):
    return md_encode(source, k=4, k1=1, r=10 * len(source), theta=0.3, seed=2)


def test_decoders_reproduce_triple(encoded):
    msgs, rep, _ = encoded
    m1, m2 = (m.to_bytes() for m in msgs)
    assert np.array_equal(md_decode_side(m1, 1), rep.y)
    assert np.array_equal(md_decode_side(m2, 2), rep.z)
    assert np.array_equal(md_decode_central(m1, m2), rep.w)


def test_fragments_reassemble_refinement(encoded):
    msgs, rep, _ = encoded
    ref = encode_conditional(rep.w, rep.y, rep.z, 4, 1, 2)
    L = ref.total_bits
    assert msgs.m1.fragment_bits == math.ceil(0.3 * L)
    assert msgs.m1.fragment_bits + msgs.m2.fragment_bits == L
    joined = _join_bits(msgs.m1.fragment, msgs.m1.fragment_bits, msgs.m2.fragment, msgs.m2.fragment_bits)
    assert joined == ref.to_bytes()


@pytest.mark.parametrize("theta", [0.0, 1.0])
def test_extreme_splits(encoded, theta):
    _, rep, _ = encoded
    msgs = pack_messages(rep.y, rep.z, rep.w, 4, 1, theta, 2)
    empty = msgs.m2 if theta == 1.0 else msgs.m1
    assert empty.fragment_bits == 0 and empty.fragment == b""
    assert np.array_equal(md_decode_central(*(m.to_bytes() for m in msgs)), rep.w)


def test_rate_additivity_independent_of_theta(source, encoded):
    _, rep, _ = encoded
    totals = set()
    for theta in (0, 0.3, 0.5, 1):
        m1, m2 = pack_messages(rep.y, rep.z, rep.w, 4, 1, theta, 2)
        totals.add(m1.bit_length + m2.bit_length)
        assert m1.bit_length + m2.bit_length == (
            2 * 8 * MESSAGE_HEADER.size + 8 * len(m1.side.to_bytes()) + 8 * len(m2.side.to_bytes())
            + encode_conditional(rep.w, rep.y, rep.z, 4, 1, 2).total_bits
        )
    assert len(totals) == 1


def test_zero_iterations_on_constant_source():
    x = np.ones(4000, dtype=int)
    msgs, rep, rates = md_encode(x, k=5, k1=1, r=0, seed=0)
    assert all(np.array_equal(s, x) for s in rep.triple)
    assert rates.D1 == rates.D2 == rates.D0 == 0.0
    assert max(rates.side_bits) / 4000 < 0.01 and rates.refinement_bits / 4000 < 0.01
    # beyond the headers only the byte-padded side payloads and the exact refinement payload remain
    padded = sum(8 * math.ceil(b / 8) for b in rates.side_bits)
    assert round((rates.R1 + rates.R2) * 4000) - rates.header_bits == padded + rates.refinement_bits
    assert theorem0_check(rates)


def test_theorem0_passes_on_completed_run(encoded):
    verdict = theorem0_check(encoded[2])
    assert verdict.passed
    assert all(v >= 0 for v in verdict.margins.values())


def test_theorem0_flags_undercut(encoded):
    bad = replace(encoded[2], R1=encoded[2].hk_1 - 0.01)
    verdict = theorem0_check(bad)
    assert not verdict
    assert verdict.margins["side1"] == pytest.approx(-0.01)


def test_message_serialization_round_trip(encoded):
    for m in encoded[0]:
        assert MDMessage.from_bytes(m.to_bytes()) == m


def test_side_decoder_ignores_fragment(encoded):
    msgs, rep, _ = encoded
    data = bytearray(msgs.m1.to_bytes())
    data[-1] ^= 0xFF
    assert np.array_equal(md_decode_side(bytes(data), 1), rep.y)
    with pytest.raises(FragmentMismatchError):
        md_decode_central(bytes(data), msgs.m2.to_bytes())


def test_corrupted_side_stream_fails(encoded):
    msgs, _, _ = encoded
    clean = msgs.m1.to_bytes()
    side_end = MESSAGE_HEADER.size + len(msgs.m1.side.to_bytes())
    for pos in range(MESSAGE_HEADER.size, side_end):
        data = bytearray(clean)
        data[pos] ^= 0x21
        with pytest.raises(DecodeError):
            md_decode_side(bytes(data), 1)


def test_fragments_from_different_encodes(source, encoded):
    other, _, _ = md_encode(source, k=4, k1=1, r=5 * len(source), theta=0.3, seed=99)
    with pytest.raises(FragmentMismatchError):
        md_decode_central(encoded[0].m1.to_bytes(), other.m2.to_bytes())


def test_role_checks(encoded):
    m1, m2 = (m.to_bytes() for m in encoded[0])
    with pytest.raises(DecodeError):
        md_decode_side(m1, 2)
    with pytest.raises(DecodeError):
        md_decode_central(m2, m1)
    with pytest.raises(DecodeError):
        MDMessage.from_bytes(m1[:10])


def test_theta_validation(source):
    with pytest.raises(InvalidInputError):
        md_encode(source, k=2, k1=1, r=0, theta=1.5)


def test_ternary_pipeline(rng):
    x = rng.integers(0, 3, 600)
    d = DistortionMeasure.hamming(3)
    msgs, rep, rates = md_encode(x, LagrangianWeights(), d, 2, 1, AnnealSchedule.power_law(), 3000,
                                 theta=0.5, seed=1)
    m1, m2 = (m.to_bytes() for m in msgs)
    assert np.array_equal(md_decode_central(m1, m2), rep.w)
    assert theorem0_check(rates)


def test_bitstream_header_is_embedded(encoded):
    side = encoded[0].m1.side
    assert isinstance(side, Bitstream) and side.k == 4
