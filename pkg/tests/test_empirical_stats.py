import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import naive_counts, naive_hk, naive_hkk1, naive_joint_counts
from mdcoding.empirical_stats import (
    apply_substitution,
    build_counts,
    build_joint_counts,
    conditional_entropy,
    conditional_entropy_joint,
    diff_nh,
    entropy_functional,
    substitution_diff,
)
from mdcoding.exceptions import InvalidCountsError, InvalidInputError, InvalidOrderError


@st.composite
def sequences(draw, min_n=1, max_n=40, max_A=4):
    A = draw(st.integers(2, max_A))
    n = draw(st.integers(min_n, max_n))
    seq = draw(st.lists(st.integers(0, A - 1), min_size=n, max_size=n))
    return np.array(seq, dtype=np.int64), A


@st.composite
def triples(draw, max_n=24, max_A=3):
    A = draw(st.integers(2, max_A))
    n = draw(st.integers(1, max_n))
    k = draw(st.integers(0, min(n - 1, 4)))
    k1 = draw(st.integers(0, min(k, (n - 1) // 2)))
    seqs = [np.array(draw(st.lists(st.integers(0, A - 1), min_size=n, max_size=n))) for _ in range(3)]
    return (*seqs, k, k1, A)


def as_dict(counts):
    out = {}
    for key, col in counts.table.items():
        ctx = counts.unpack_context(key)
        out[ctx] = {b: c for b, c in enumerate(col) if c}
    return out


# --- entropy functional ---------------------------------------------------

def test_entropy_functional_examples():
    assert entropy_functional([1, 1]) == 1.0
    assert entropy_functional([0, 0]) == 0.0
    assert entropy_functional([3, 1]) == pytest.approx(0.8112781244591328, abs=1e-12)


def test_entropy_functional_rejects_negative():
    with pytest.raises(InvalidCountsError):
        entropy_functional([2, -1])


@given(st.lists(st.integers(0, 50), min_size=1, max_size=6))
def test_entropy_functional_range(v):
    h = entropy_functional(v)
    assert -1e-12 <= h <= math.log2(len(v)) + 1e-12


# --- own counts -------------------------------------------------------------

def test_counts_0011_order1():
    c = build_counts([0, 0, 1, 1], 1)
    assert as_dict(c) == {(0,): {0: 1, 1: 1}, (1,): {0: 1, 1: 1}}
    assert conditional_entropy(c) == pytest.approx(1.0, abs=1e-12)


def test_constant_sequence_single_context():
    c = build_counts([0, 0, 0, 0], 2)
    assert as_dict(c) == {(0, 0): {0: 4}}
    for k in range(4):
        assert conditional_entropy(build_counts([0, 0, 0, 0], k)) == 0.0


def test_alternating_is_deterministic():
    assert conditional_entropy(build_counts([0, 1, 0, 1], 1)) == 0.0


def test_order_must_be_below_length():
    with pytest.raises(InvalidOrderError):
        build_counts([0, 1, 1], 3)
    with pytest.raises(InvalidOrderError):
        build_counts([0, 1, 1], -1)


@given(sequences(), st.integers(0, 5))
def test_counts_match_direct_enumeration(data, k):
    y, A = data
    k = min(k, len(y) - 1)
    c = build_counts(y, k, A)
    expected = {ctx: dict(col) for ctx, col in naive_counts(y, k).items()}
    assert as_dict(c) == expected
    assert c.total == len(y)
    assert conditional_entropy(c) == pytest.approx(naive_hk(y, k), abs=1e-12)


@given(sequences(), st.integers(0, 5), st.integers(0, 100))
def test_rotation_invariance_exact(data, k, shift):
    y, A = data
    k = min(k, len(y) - 1)
    assert build_counts(np.roll(y, shift), k, A) == build_counts(y, k, A)


@given(sequences(min_n=2), st.integers(0, 4))
def test_entropy_bounds_and_order_monotonicity(data, k):
    y, A = data
    k = min(k, len(y) - 2)
    h0 = conditional_entropy(build_counts(y, k, A))
    h1 = conditional_entropy(build_counts(y, k + 1, A))
    assert -1e-12 <= h0 <= math.log2(A) + 1e-12
    assert h1 <= h0 + 1e-12


# --- joint counts -----------------------------------------------------------

def test_joint_constant():
    j = build_joint_counts([0] * 4, [0] * 4, [0] * 4, 1, 0)
    assert [list(c) for c in j.table.values()] == [[4, 0]]


def test_joint_0101_given_zeros():
    j = build_joint_counts([0, 1, 0, 1], [0] * 4, [0] * 4, 0, 0)
    assert as_dict(j) == {((), (0,), (0,)): {0: 2, 1: 2}}
    assert conditional_entropy_joint(j) == pytest.approx(1.0, abs=1e-12)


def test_joint_length_mismatch():
    with pytest.raises(InvalidInputError):
        build_joint_counts([0, 1, 0], [0, 1], [0, 1, 1], 1, 0)


def test_joint_window_must_fit():
    with pytest.raises(InvalidOrderError):
        build_joint_counts([0, 1, 0], [0, 1, 1], [0, 1, 1], 2, 2)


@given(triples())
def test_joint_matches_direct_enumeration(t):
    w, y, z, k, k1, A = t
    j = build_joint_counts(w, y, z, k, k1, A)
    expected = {ctx: dict(col) for ctx, col in naive_joint_counts(w, y, z, k, k1).items()}
    assert as_dict(j) == expected
    assert j.total == len(w)
    assert conditional_entropy_joint(j) == pytest.approx(naive_hkk1(w, y, z, k, k1), abs=1e-12)


@given(triples())
def test_w_equal_y_has_zero_joint_entropy(t):
    w, y, z, k, k1, A = t
    j = build_joint_counts(y, y, z, k, k1, A)
    assert all(sum(1 for c in col if c) == 1 for col in j.table.values())
    assert conditional_entropy_joint(j) == 0.0


@given(triples())
def test_swapping_sides_preserves_joint_entropy(t):
    w, y, z, k, k1, A = t
    a = conditional_entropy_joint(build_joint_counts(w, y, z, k, k1, A))
    b = conditional_entropy_joint(build_joint_counts(w, z, y, k, k1, A))
    assert a == pytest.approx(b, abs=1e-12)


# --- substitutions ----------------------------------------------------------

def test_self_substitution_is_noop():
    y = np.array([0, 1, 1, 0, 1])
    c = build_counts(y, 2)
    assert substitution_diff(c, y, 3, int(y[3])) == {}
    assert apply_substitution(c, y, 3, int(y[3])) == []


def test_substitution_rejects_bad_position_and_symbol():
    y = np.array([0, 1, 1, 0, 1])
    c = build_counts(y, 2)
    with pytest.raises(InvalidInputError):
        substitution_diff(c, y, 5, 0)
    with pytest.raises(InvalidInputError):
        substitution_diff(c, y, 0, 2)


def test_random_substitution_n32_equals_rebuild(rng):
    for _ in range(200):
        y = rng.integers(0, 2, 32)
        c = build_counts(y, 3, 2)
        i, a = int(rng.integers(32)), int(rng.integers(2))
        assert len(c.affected_positions(i)) == 3 + 1
        touched = apply_substitution(c, y, i, a)
        # position i keeps its context; each of the k later ones may leave one and enter another
        assert len(touched) <= 2 * 3 + 1
        y[i] = a
        assert c == build_counts(y, 3, 2)


def _brute_diff(before, after):
    keys = set(before.table) | set(after.table)
    return {
        key: [b - a for a, b in zip(before.column(key), after.column(key))]
        for key in keys
        if before.column(key) != after.column(key)
    }


@pytest.mark.parametrize("which", ["y", "z", "w"])
def test_joint_touched_set_matches_brute_force(rng, which):
    k, k1, n, A = 3, 1, 20, 2
    for _ in range(100):
        w, y, z = (rng.integers(0, A, n) for _ in range(3))
        j = build_joint_counts(w, y, z, k, k1, A)
        i, a = int(rng.integers(n)), int(rng.integers(A))
        diff = substitution_diff(j, (w, y, z), i, a, which)
        seqs = {"w": w.copy(), "y": y.copy(), "z": z.copy()}
        seqs[which][i] = a
        after = build_joint_counts(seqs["w"], seqs["y"], seqs["z"], k, k1, A)
        assert diff == _brute_diff(j, after)
        span = k + 1 if which == "w" else 2 * k1 + 1
        assert len(diff) <= 2 * span
        expected_nh = after.nh() - j.nh()
        assert diff_nh(j, diff) == pytest.approx(expected_nh, abs=1e-9)
        apply_substitution(j, (w, y, z), i, a, which)
        assert j == after


@settings(max_examples=60)
@given(triples(), st.data())
def test_substitution_sequences_keep_tables_exact(t, data):
    w, y, z, k, k1, A = t
    n = len(w)
    own = build_counts(y, k, A)
    joint = build_joint_counts(w, y, z, k, k1, A)
    for _ in range(10):
        which = data.draw(st.sampled_from("yzw"))
        i = data.draw(st.integers(0, n - 1))
        a = data.draw(st.integers(0, A - 1))
        if which == "y":
            apply_substitution(own, y, i, a)
        apply_substitution(joint, (w, y, z), i, a, which)
        {"w": w, "y": y, "z": z}[which][i] = a
    assert own == build_counts(y, k, A)
    assert joint == build_joint_counts(w, y, z, k, k1, A)
