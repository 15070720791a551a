from collections import Counter

import pytest
from hypothesis import given, strategies as st

from patchcatch.rng import LCG64, sample_without_replacement

M, C = 6364136223846793005, 1442695040888963407


def test_first_draws_follow_the_recurrence():
    rng = LCG64(0)
    state = 0
    for _ in range(5):
        state = (M * state + C) % 2**64
        assert rng.next_u32() == state >> 32
    assert LCG64(0).next_u32() == 335903614


def test_seed_is_taken_mod_2_64():
    assert LCG64(-1).state == 2**64 - 1
    assert LCG64(2**64 + 5).next_u32() == LCG64(5).next_u32()


def test_randbelow_rejection_rule():
    # with n = 3, draws >= 2**32 - (2**32 % 3) are rejected
    rng = LCG64(9)
    probe = LCG64(9)
    limit = 2**32 - (2**32 % 3)
    for _ in range(50):
        value = rng.randbelow(3)
        draw = probe.next_u32()
        while draw >= limit:
            draw = probe.next_u32()
        assert value == draw % 3


def test_randbelow_bounds():
    with pytest.raises(ValueError):
        LCG64(0).randbelow(0)
    rng = LCG64(1)
    counts = Counter(rng.randbelow(4) for _ in range(4000))
    assert set(counts) == {0, 1, 2, 3}
    assert min(counts.values()) > 800


@given(st.integers(0, 2**64 - 1), st.integers(0, 30), st.integers(0, 40))
def test_sample_indices_distinct(seed, size, k):
    picked = LCG64(seed).sample_indices(size, k)
    assert len(picked) == min(size, k) == len(set(picked))
    assert all(0 <= i < size for i in picked)


def test_pool_split():
    items = list("abcdefgh")
    pool, rest = sample_without_replacement(items, 3, LCG64(4))
    assert sorted(pool + rest) == items
    assert rest == [x for x in items if x not in pool]
    assert sample_without_replacement(items, 10, LCG64(4)) == (items, [])
