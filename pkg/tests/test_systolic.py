import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from statabft.detectors import ChecksumPair, CriticalRegionParams, detect_statistical
from statabft.faults import FaultConfig
from statabft.gemm import checksum, gemm
from statabft.systolic import (
    ArrayConfig,
    Dataflow,
    StatUnitConfig,
    _theta_fixed,
    floor_log2,
    gemm_cycles,
    log2_fixed,
    run_array,
    statistical_unit,
    tile_cycles,
)
from statabft.workloads import random_quant_matrix

P = CriticalRegionParams(a=2.0, b=40.0, theta_freq=4)


def matrices(seed, m=8, k=8, n=8):
    return (
        random_quant_matrix(m, k, "uniform", seed),
        random_quant_matrix(k, n, "uniform", seed + 1),
    )


def test_floor_log2_matches_math():
    # exact integer oracle: e is the floor log iff 2**e <= x < 2**(e+1).
    # (math.log2 itself rounds wrong near 2**63, so no float comparison here.)
    for x in [1, 2, 3, 4, 7, 8, 255, 256, 2**40, 2**63 - 1, 2**63]:
        e = floor_log2(x)
        assert (1 << e) <= x < (1 << (e + 1))
    with pytest.raises(ValueError):
        floor_log2(0)


def test_log2_fixed_known_values():
    # x = 6 = 0b110, exponent 2, next 4 mantissa bits 1000 -> 2 + 8/16 = 2.5
    assert log2_fixed(6, 4) == (2 << 4) | 8
    assert log2_fixed(1, 4) == 0
    assert log2_fixed(2, 4) == 1 << 4
    # powers of two are exact in any precision
    for f in (0, 4, 8):
        for e in (0, 1, 5, 40):
            assert log2_fixed(1 << e, f) == e << f


def test_log2_fixed_truncates_toward_zero():
    for x in range(1, 4096):
        approx = log2_fixed(x, 6) / 64.0
        exact = math.log2(x)
        assert approx <= exact + 1e-12
        # Mitchell interpolation error (~0.086) plus frac truncation (2**-6)
        assert exact - approx < 0.086 + 1.0 / 64.0 + 1e-12


def test_theta_fixed_matches_exact_for_power_msd():
    # msd = 2**20: log2 is exact, theta = 40 - 20 = 20 on any grid
    assert _theta_fixed(2**20, P, 4) == 20 << 4
    assert _theta_fixed(0, P, 4) is None


def test_cycle_model():
    assert tile_cycles(1, 1, 1) == 2  # m+n+k-2 fill/drain + 1 checksum stage
    assert tile_cycles(8, 8, 8) == 23
    arr = ArrayConfig(rows=256, cols=256)
    assert gemm_cycles(8, 8, 8, arr) == 23
    # 300x300 output on a 256x256 array tiles into 4 pieces
    t = ArrayConfig(rows=256, cols=256)
    expect = (
        tile_cycles(256, 256, 8)
        + tile_cycles(256, 44, 8)
        + tile_cycles(44, 256, 8)
        + tile_cycles(44, 44, 8)
    )
    assert gemm_cycles(300, 8, 300, t) == expect


def test_tiling_can_be_disabled():
    arr = ArrayConfig(rows=4, cols=4, allow_tiling=False)
    with pytest.raises(ValueError, match="tiling is disabled"):
        gemm_cycles(8, 8, 8, arr)
    assert gemm_cycles(4, 8, 4, arr) == tile_cycles(4, 4, 8)


def test_run_array_clean_pass():
    w, x = matrices(1)
    sim = run_array(w, x, stat=StatUnitConfig(params=P))
    assert sim.output == gemm(w, x)
    assert sim.verdict.decision == "pass"
    assert sim.verdict.msd == 0 and math.isinf(sim.verdict.theta_mag)
    assert sim.events == ()
    assert sim.observed == checksum(sim.output, "row")


def test_run_array_applies_fault_and_logs_events():
    w, x = matrices(2)
    fault = FaultConfig(mode="ber", ber=0.02, seed=5)
    sim = run_array(w, x, fault=fault, stat=StatUnitConfig(params=P))
    clean = gemm(w, x)
    changed = int(np.count_nonzero(sim.output.data != clean.data))
    assert changed == len(sim.events) > 0
    # prediction is computed pre-fault
    assert sim.predicted == checksum(clean, "row")


def test_dataflow_values_and_validation():
    w, x = matrices(3)
    assert Dataflow("ws") is Dataflow.WEIGHT_STATIONARY
    with pytest.raises(ValueError, match="dataflow"):
        run_array(w, x, flow="diagonal")


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=60, deadline=None)
def test_ws_os_equivalence(seed):
    w, x = matrices(seed, m=(seed % 6) + 2, k=(seed % 5) + 2, n=(seed % 7) + 2)
    fault = FaultConfig(mode="ber", ber=0.01, seed=seed)
    stat = StatUnitConfig(params=P)
    ws = run_array(w, x, flow="ws", fault=fault, stat=stat)
    os_ = run_array(w, x, flow="os", fault=fault, stat=stat)
    assert ws.output == os_.output
    assert ws.predicted == os_.predicted and ws.observed == os_.observed
    assert ws.verdict == os_.verdict
    assert ws.cycles == os_.cycles


@st.composite
def checksum_pairs(draw):
    n = draw(st.integers(min_value=1, max_value=48))
    vals = st.one_of(
        st.just(0),
        st.integers(min_value=-(2**24), max_value=2**24),
        st.integers(min_value=-(2**45), max_value=2**45),
    )
    d = draw(st.lists(vals, min_size=n, max_size=n))
    return ChecksumPair.from_diff(np.array(d, dtype=np.int64))


@given(checksum_pairs())
@settings(max_examples=300, deadline=None)
def test_exact_unit_agrees_with_reference_detector(pair):
    ref = detect_statistical(pair, P)
    unit = statistical_unit(pair.predicted, pair.observed, StatUnitConfig(params=P))
    assert unit.msd == ref.msd
    assert unit.freq_eff == ref.freq_eff
    assert unit.decision == ref.decision


@given(checksum_pairs())
@settings(max_examples=300, deadline=None)
def test_lzc_unit_disagrees_only_near_quantization_edges(pair):
    exact = statistical_unit(pair.predicted, pair.observed, StatUnitConfig(params=P))
    lzc = statistical_unit(
        pair.predicted, pair.observed, StatUnitConfig(params=P, log2_mode="lzc")
    )
    if lzc.decision == exact.decision:
        return
    msd = pair.msd()
    assert msd > 0
    t_exact = P.b - (P.a - 1.0) * math.log2(msd)
    t_lzc = _theta_fixed(msd, P, 4) / 16.0
    near = False
    for v in pair.diff:
        v = int(v)
        if v == 0:
            continue
        if abs(math.log2(abs(v)) - t_exact) <= 1.0:
            near = True
            break
        e = floor_log2(abs(v))
        if min(t_exact, t_lzc) < e <= max(t_exact, t_lzc):
            near = True
            break
    assert near, f"diff {pair.diff.tolist()} disagreed away from the quantization edge"


def test_stat_unit_config_validation():
    with pytest.raises(ValueError, match="log2_mode"):
        StatUnitConfig(params=P, log2_mode="approx")
    with pytest.raises(ValueError, match="frac_bits"):
        StatUnitConfig(params=P, frac_bits=17)


def test_stat_unit_length_mismatch():
    a = ChecksumPair.from_diff(np.array([1, 2], dtype=np.int64))
    b = ChecksumPair.from_diff(np.array([1, 2, 3], dtype=np.int64))
    with pytest.raises(ValueError, match="lengths"):
        statistical_unit(a.predicted, b.observed, StatUnitConfig(params=P))
