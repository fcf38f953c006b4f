import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from statabft.rng import GAMMA, MASK64, SplitMix64, derive_seed, mix64, u64_stream, unit_floats


def reference_sequence(seed, n):
    # straight sequential SplitMix64, implemented independently of the module
    out = []
    state = seed & MASK64
    for _ in range(n):
        state = (state + GAMMA) & MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        out.append(z ^ (z >> 31))
    return out


def test_known_vector_seed_zero():
    # canonical splitmix64 outputs for seed 0
    expected = [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F, 0xF88BB8A8724C81EC]
    assert [int(v) for v in u64_stream(0, 4)] == expected


def test_stream_matches_reference():
    for seed in (0, 1, 42, 2**63, MASK64):
        assert [int(v) for v in u64_stream(seed, 16)] == reference_sequence(seed, 16)


def test_sequential_class_matches_stream():
    rng = SplitMix64(1234)
    assert [rng.next_u64() for _ in range(8)] == [int(v) for v in u64_stream(1234, 8)]


def test_offset_slices_stream():
    full = u64_stream(77, 20)
    assert np.array_equal(full[5:], u64_stream(77, 15, offset=5))


def test_unit_floats_in_range_and_value():
    u = u64_stream(9, 1000)
    f = unit_floats(u)
    assert f.dtype == np.float64
    assert np.all(f >= 0.0) and np.all(f < 1.0)
    assert f[0] == (int(u[0]) >> 11) * 2.0**-53


def test_derive_seed_distinguishes_paths():
    assert derive_seed(0, 1) != derive_seed(0, 2)
    assert derive_seed(0, 1, 2) != derive_seed(0, 2, 1)
    assert derive_seed(5, 0) != derive_seed(5, 0, 0)
    # frozen values guard against accidental algorithm changes
    assert derive_seed(0, 1) == 0xDDC1ED05282D1D64
    assert derive_seed(0, 1, 2) == 0x7947B6CB424A7ED5


@given(st.integers(min_value=0, max_value=MASK64))
@settings(max_examples=200, deadline=None)
def test_mix64_stays_in_64_bits(x):
    v = mix64(x)
    assert 0 <= v <= MASK64


@given(st.integers(min_value=0, max_value=MASK64), st.integers(min_value=1, max_value=64))
@settings(max_examples=100, deadline=None)
def test_stream_prefix_stability(seed, n):
    long = u64_stream(seed, 64)
    assert np.array_equal(long[:n], u64_stream(seed, n))
