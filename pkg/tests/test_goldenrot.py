import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from goldenrenorm.errors import NonPositiveLength
from goldenrenorm.goldenrot import (
    I_KIND, J_KIND, THETA, Partition, RotationState, Word, equidist_average, fibonacci_q,
    is_admissible, long_length, max_word, partition, prerenorm_rotation, refine_check,
    rotation_state, short_length, word_array, words,
)


def brute_force_count(n, kind):
    """Count words over {0,1,2}^n that satisfy the admissibility rules directly."""
    count = 0
    for digits in itertools.product((0, 1, 2), repeat=n):
        allowed = {0, 1} if kind == I_KIND else {0, 1, 2}
        ok = True
        for d in digits:
            if d not in allowed:
                ok = False
                break
            allowed = {0, 1} if d == 2 or (d == 1 and allowed == {0, 1}) else {0, 1, 2}
        count += ok
    return count


def test_fibonacci_examples():
    assert [fibonacci_q(n) for n in (0, 5, 10)] == [1, 8, 89]
    with pytest.raises(OverflowError):
        fibonacci_q(91)


@pytest.mark.parametrize("n", range(1, 9))
def test_word_counts_brute_force(n):
    assert len(word_array(n, J_KIND)) == brute_force_count(n, J_KIND) == fibonacci_q(2 * n + 1)
    assert len(word_array(n, I_KIND)) == brute_force_count(n, I_KIND) == fibonacci_q(2 * n)


def test_word_examples():
    assert words(0, J_KIND) == [Word((0,), J_KIND)]
    assert len(words(2, J_KIND)) == 8 and len(words(2, I_KIND)) == 5
    assert all(is_admissible(w) for w in words(4, J_KIND) + words(4, I_KIND))
    assert str(max_word(4)) == "2111"
    with pytest.raises(ValueError):
        Word.parse("22")


def test_words_sorted_lexicographically():
    rows = [tuple(r) for r in word_array(5, J_KIND).tolist()]
    assert rows == sorted(rows)


def test_prerenorm_rotation_examples():
    r1 = prerenorm_rotation(RotationState.golden())
    assert abs(r1.s - THETA ** 3) < 1e-15 and abs(r1.t - THETA ** 2) < 1e-15
    r2 = prerenorm_rotation(r1)
    assert abs(r2.s - THETA ** 5) < 1e-15 and abs(r2.t - THETA ** 4) < 1e-15
    with pytest.raises(NonPositiveLength):
        prerenorm_rotation(RotationState.from_floats(0.4, 1.0))


def test_ratio_preserved_over_twenty_levels():
    r = rotation_state(20)
    assert abs(r.s / r.t - THETA) < 1e-12
    assert abs(r.s / short_length(20) - 1) < 1e-12 and abs(r.t / long_length(20) - 1) < 1e-12


def test_partition_examples():
    p0 = partition(0)
    assert np.allclose(p0.left, [-THETA, 0]) and np.allclose(p0.right, [0, 1])
    assert list(p0.is_p) == [False, True]
    p1 = partition(1)
    assert p1.is_p.sum() == 3 and (~p1.is_p).sum() == 2
    assert np.allclose((p1.right - p1.left)[p1.is_p], THETA ** 2)
    assert np.allclose((p1.right - p1.left)[~p1.is_p], THETA ** 3)
    assert abs(np.sum(p1.right - p1.left) - (1 + THETA)) < 1e-15
    p12 = partition(12)
    assert len(p12) == fibonacci_q(25) + fibonacci_q(24)
    assert np.allclose((p12.right - p12.left)[p12.is_p], long_length(12), rtol=1e-10)


@pytest.mark.parametrize("n", range(0, 9))
def test_partition_covers_segment(n):
    p = partition(n)
    assert abs(p.left[0] + THETA) < 1e-12 and abs(p.right[-1] - 1) < 1e-12
    assert np.max(np.abs(p.left[1:] - p.right[:-1])) < 1e-12
    # one interval per word, and every interval is the image of J_n or I_n by its word
    assert len({(bool(p.is_p[i]), str(p.word(i))) for i in range(len(p))}) == len(p)
    for i in range(len(p)):
        w = p.word(i)
        base = (1 - long_length(n)) if p.is_p[i] else (1 - long_length(n) - short_length(n))
        assert abs(p.left[i] - (base - w.offset())) < 1e-12


def test_refine_check():
    assert all(refine_check(n) for n in range(0, 11))
    fine = partition(4)
    left = fine.left.copy()
    left[7] += 1e-3
    bad = Partition(4, left, fine.right, fine.is_p, fine.digits)
    assert not refine_check(3, fine=bad)


def test_rigid_spread_along_max_word():
    # T_0 o S^w for the maximal words is the rigid first-return pair (x - s_n, x + t_n)
    for n in range(1, 16):
        assert abs((1 - max_word(n, J_KIND).offset()) + short_length(n)) < 1e-12
        assert abs((1 - max_word(n, I_KIND).offset()) - long_length(n)) < 1e-12


def test_equidist_constant():
    q, f, _ = equidist_average(lambda x: np.ones_like(x), 0.0, 3)
    assert abs(q - 1) < 1e-12 and abs(f - 1) < 1e-12


def test_equidist_linear_bound():
    q, f, bound = equidist_average(lambda x: x, 1.0, 6)
    assert abs(q - f) <= 2 / THETA * short_length(6) and abs(bound - 2 / THETA * short_length(6)) < 1e-15


def test_equidist_shrink_rate():
    f = lambda x: np.sin(5 * x)
    e4 = abs(np.subtract(*equidist_average(f, 5.0, 4)[:2]))
    e8 = abs(np.subtract(*equidist_average(f, 5.0, 8)[:2]))
    ratio = e8 / e4
    target = short_length(8) / short_length(4)
    assert 0.5 * target <= ratio <= 1.5 * target


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=15), st.sampled_from([J_KIND, I_KIND]))
def test_counts_are_fibonacci(n, kind):
    got = len(word_array(n, kind))
    assert got == fibonacci_q(2 * n + 1 if kind == J_KIND else 2 * n)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=7), st.data())
def test_admissible_words_are_listed(n, data):
    digits = tuple(data.draw(st.lists(st.integers(0, 2), min_size=n, max_size=n)))
    kind = data.draw(st.sampled_from([J_KIND, I_KIND]))
    listed = {tuple(r) for r in word_array(n, kind).tolist()}
    assert is_admissible(Word(digits, kind)) == (digits in listed)


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=25))
def test_rotation_state_lengths(n):
    r = rotation_state(n)
    assert r.s < r.t
    assert math.isclose(r.s, THETA ** (2 * n + 1), rel_tol=1e-12)
    I, J = r.I, r.J
    assert I[1] == J[0] and J[1] == 1.0
    assert math.isclose(J[1] - J[0], r.t, rel_tol=0, abs_tol=1e-15)
    assert math.isclose(I[1] - I[0], r.s, rel_tol=0, abs_tol=1e-15)
