"""The RNG contract: scalar and vectorized paths are the same stream, the
stream is a pure function of (seed, index), and values are frozen so a
regression can never silently change every seeded artifact downstream."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from capood.rng import Rng, byte_block, mix64, u64_block, uniform_block

# First outputs of streams 0 and 42 under the published splitmix64
# algorithm (seed 0 matches the reference test vector). Frozen: if these
# move, every seeded artifact in the package moves.
FROZEN_SEED0 = [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]
FROZEN_SEED42 = [0xBDD732262FEB6E95, 0x28EFE333B266F103, 0x47526757130F9F52]


def reference_splitmix(seed, n):
    # Straight transcription of the published algorithm: state += golden;
    # z = state; z = (z ^ z>>30) * c1; z = (z ^ z>>27) * c2; return z ^ z>>31.
    mask = (1 << 64) - 1
    state = seed
    out = []
    for _ in range(n):
        state = (state + 0x9E3779B97F4A7C15) & mask
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        out.append(z ^ (z >> 31))
    return out


def test_frozen_first_outputs():
    rng = Rng(0)
    assert [rng.next_u64() for _ in range(3)] == FROZEN_SEED0
    rng42 = Rng(42)
    assert [rng42.next_u64() for _ in range(3)] == FROZEN_SEED42


@pytest.mark.parametrize("seed", [0, 1, 42, 2**63, (1 << 64) - 1])
def test_matches_reference_algorithm(seed):
    rng = Rng(seed)
    assert [rng.next_u64() for _ in range(50)] == reference_splitmix(seed, 50)


@pytest.mark.parametrize("seed", [0, 7, 123456789, 2**61 + 3])
def test_vectorized_equals_scalar(seed):
    rng = Rng(seed)
    scalar = [rng.next_u64() for _ in range(100)]
    vec = u64_block(seed, 100)
    assert vec.dtype == np.uint64
    assert [int(x) for x in vec] == scalar


def test_vectorized_offset_is_random_access():
    whole = u64_block(9, 50)
    tail = u64_block(9, 30, offset=20)
    assert np.array_equal(whole[20:], tail)


def test_uniform_matches_u64_construction():
    rng = Rng(5)
    u64s = u64_block(5, 200)
    for i in range(200):
        expected = (int(u64s[i]) >> 11) * 2.0**-53
        assert rng.uniform() == expected
    assert np.array_equal(
        uniform_block(5, 200), (u64_block(5, 200) >> np.uint64(11)).astype(np.float64) * 2.0**-53
    )


def test_byte_block_is_top_byte():
    assert [int(b) for b in byte_block(3, 8)] == [int(x) >> 56 for x in u64_block(3, 8)]


@given(st.integers(min_value=0, max_value=(1 << 64) - 1))
def test_mix64_stays_in_range(z):
    assert 0 <= mix64(z) < (1 << 64)


@given(st.integers(min_value=0, max_value=(1 << 64) - 1), st.integers(0, 500))
def test_uniform_in_unit_interval(seed, skip):
    rng = Rng(seed)
    for _ in range(skip % 7):
        rng.next_u64()
    u = rng.uniform()
    assert 0.0 <= u < 1.0


def test_uniform_distribution_roughly_flat():
    # 20 equal bins over 40k draws: each expects 2000, sd ~44. A 6-sigma
    # band is a loose sanity check, not a statistical test suite.
    us = uniform_block(1234, 40_000)
    counts, _ = np.histogram(us, bins=20, range=(0.0, 1.0))
    assert counts.sum() == 40_000
    assert np.all(np.abs(counts - 2000) < 6 * np.sqrt(2000))


def test_below_bounds_and_determinism():
    rng = Rng(11)
    vals = [rng.below(7) for _ in range(500)]
    assert all(0 <= v < 7 for v in vals)
    assert set(vals) == set(range(7))
    rng2 = Rng(11)
    assert vals == [rng2.below(7) for _ in range(500)]
    with pytest.raises(ValueError):
        rng.below(0)


def test_draw_counter():
    rng = Rng(0)
    assert rng.draws == 0
    rng.uniform()
    rng.next_u64()
    assert rng.draws == 2
