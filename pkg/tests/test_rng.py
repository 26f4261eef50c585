import numpy as np
import pytest

from sgdsvm.rng import SplitMix64


def _reference(seed, n):
    # plain-Python SplitMix64 with explicit 64-bit masking
    mask = (1 << 64) - 1
    s = seed & mask
    out = []
    for _ in range(n):
        s = (s + 0x9E3779B97F4A7C15) & mask
        z = s
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        out.append(z ^ (z >> 31))
    return out


def test_known_values_seed_zero():
    g = SplitMix64(0)
    assert g.next_u64() == 0xE220A8397B1DCDAF
    assert g.next_u64() == 0x6E789E6AA1B965F4


@pytest.mark.parametrize("seed", [0, 1, 42, 2**63 + 5, 2**64 - 1])
def test_matches_pure_python(seed):
    g = SplitMix64(seed)
    assert [g.next_u64() for _ in range(50)] == _reference(seed, 50)


def test_bounded_range_and_spread():
    g = SplitMix64(7)
    draws = np.array([g.bounded(6) for _ in range(60_000)])
    assert draws.min() == 0 and draws.max() == 5
    counts = np.bincount(draws, minlength=6)
    # chi-square with 5 dof; 99.9% quantile is about 20.5
    chi2 = ((counts - 10_000) ** 2 / 10_000).sum()
    assert chi2 < 20.5


def test_bounded_one_and_power_of_two():
    g = SplitMix64(3)
    assert all(g.bounded(1) == 0 for _ in range(10))
    assert all(0 <= g.bounded(1 << 20) < 1 << 20 for _ in range(100))


def test_bounded_rejects_nonpositive():
    with pytest.raises(ValueError):
        SplitMix64(0).bounded(0)


def test_permutation_is_valid_and_deterministic():
    p = SplitMix64(11).permutation(500)
    assert sorted(p.tolist()) == list(range(500))
    np.testing.assert_array_equal(p, SplitMix64(11).permutation(500))
    assert not np.array_equal(p, SplitMix64(12).permutation(500))


def test_permutation_first_position_uniform():
    counts = np.zeros(4, int)
    g = SplitMix64(5)
    for _ in range(8000):
        counts[g.permutation(4)[0]] += 1
    assert np.all(np.abs(counts - 2000) < 200)
