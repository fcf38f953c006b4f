"""Randomized self-checks of the simulator's core invariants.

Each check runs a configurable number of randomized cases and reports the
first violation. These are the properties the whole methodology leans on:
exact checksum identities, dataflow equivalence, agreement between the
datapath-level statistical unit and the reference detector, fault-log
soundness, the MSD = freq * mag relation for uniform injections, and
voltage/BER table interpolation behavior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .detectors import ChecksumPair, CriticalRegionParams, detect_statistical
from .faults import FaultConfig, VoltageBerTable, apply_fault, default_table, replay_events
from .gemm import checksum, gemm, predicted_column_checksum, predicted_output_checksum, total_checksum
from .rng import derive_seed, u64_stream
from .systolic import StatUnitConfig, statistical_unit, floor_log2, _theta_fixed
from .workloads import random_quant_matrix


@dataclass(frozen=True)
class CheckResult:
    name: str
    cases: int
    passed: bool
    detail: str = ""


def _dims(seed: int, lo: int = 1, hi: int = 24) -> tuple[int, int, int]:
    u = u64_stream(seed, 3)
    span = hi - lo + 1
    return tuple(int(v % span) + lo for v in u)


def _random_params(seed: int) -> CriticalRegionParams:
    u = u64_stream(seed, 3)
    a = 1.1 + (int(u[0]) % 300) / 100.0
    b = (int(u[1]) % 600) / 10.0
    tf = int(u[2]) % 8
    return CriticalRegionParams(a=a, b=b, theta_freq=tf)


def _random_diff(seed: int, n: int) -> np.ndarray:
    """Deviation vector mixing zeros, small, and large magnitudes."""
    u = u64_stream(seed, 2 * n)
    kinds = (u[:n] % np.uint64(4)).astype(np.int64)
    raw = u[n:]
    small = (raw % np.uint64(255)).astype(np.int64) - 127
    big = ((raw % np.uint64(2**40)) + np.uint64(1)).astype(np.int64)
    sign = np.where((raw >> np.uint64(60)) & np.uint64(1), -1, 1)
    d = np.zeros(n, dtype=np.int64)
    d = np.where(kinds == 1, small, d)
    d = np.where(kinds == 2, sign * big, d)
    d = np.where(kinds == 3, sign * (big << 10), d)
    return d


def check_checksum_identities(cases: int, seed: int, planted_failure: bool = False) -> CheckResult:
    offset = 1 if planted_failure else 0
    for c in range(cases):
        s = derive_seed(seed, 1, c)
        m, k, n = _dims(s)
        w = random_quant_matrix(m, k, "uniform", derive_seed(s, 0))
        x = random_quant_matrix(k, n, "uniform", derive_seed(s, 1))
        y = gemm(w, x)
        if not np.array_equal(
            predicted_output_checksum(w, x).data + offset, checksum(y, "row").data
        ):
            return CheckResult(
                "checksum-identities", c + 1, False, f"row identity broken at case {c}"
            )
        if not np.array_equal(
            predicted_column_checksum(w, x).data, checksum(y, "column").data
        ):
            return CheckResult(
                "checksum-identities", c + 1, False, f"column identity broken at case {c}"
            )
        if total_checksum(w, x) != int(y.data.sum(dtype=np.int64)):
            return CheckResult(
                "checksum-identities", c + 1, False, f"scalar identity broken at case {c}"
            )
    return CheckResult("checksum-identities", cases, True)


def check_dataflow_equivalence(cases: int, seed: int) -> CheckResult:
    from .systolic import run_array

    for c in range(cases):
        s = derive_seed(seed, 2, c)
        m, k, n = _dims(s)
        w = random_quant_matrix(m, k, "uniform", derive_seed(s, 0))
        x = random_quant_matrix(k, n, "uniform", derive_seed(s, 1))
        fault = FaultConfig(mode="ber", ber=0.001, seed=derive_seed(s, 2))
        stat = StatUnitConfig(params=_random_params(derive_seed(s, 3)))
        ws = run_array(w, x, flow="ws", fault=fault, stat=stat)
        os_ = run_array(w, x, flow="os", fault=fault, stat=stat)
        same = (
            ws.output == os_.output
            and ws.predicted == os_.predicted
            and ws.observed == os_.observed
            and ws.cycles == os_.cycles
            and ws.verdict == os_.verdict
        )
        if not same:
            return CheckResult(
                "dataflow-equivalence", c + 1, False, f"ws/os diverge at case {c}"
            )
    return CheckResult("dataflow-equivalence", cases, True)


def check_stat_unit_reference(cases: int, seed: int) -> CheckResult:
    for c in range(cases):
        s = derive_seed(seed, 3, c)
        n = int(u64_stream(s, 1)[0] % np.uint64(63)) + 2
        d = _random_diff(derive_seed(s, 0), n)
        pair = ChecksumPair.from_diff(d)
        params = _random_params(derive_seed(s, 1))
        ref = detect_statistical(pair, params)
        unit = statistical_unit(
            pair.predicted, pair.observed, StatUnitConfig(params=params, log2_mode="exact")
        )
        same = (
            ref.msd == unit.msd
            and ref.freq_eff == unit.freq_eff
            and ref.decision == unit.decision
            and (math.isinf(ref.theta_mag) == math.isinf(unit.theta_mag))
        )
        if not same:
            return CheckResult(
                "stat-unit-reference", c + 1, False,
                f"datapath disagrees with reference at case {c}: "
                f"{unit.freq_eff} vs {ref.freq_eff}",
            )
    return CheckResult("stat-unit-reference", cases, True)


def check_event_replay(cases: int, seed: int) -> CheckResult:
    for c in range(cases):
        s = derive_seed(seed, 4, c)
        m, k, n = _dims(s)
        w = random_quant_matrix(m, k, "uniform", derive_seed(s, 0))
        x = random_quant_matrix(k, n, "uniform", derive_seed(s, 1))
        y = gemm(w, x)
        if c % 2 == 0:
            cfg = FaultConfig(mode="ber", ber=0.01, seed=derive_seed(s, 2))
        else:
            freq = int(u64_stream(derive_seed(s, 3), 1)[0] % np.uint64(y.data.size))
            cfg = FaultConfig(
                mode="uniform", freq=freq, mag=1 << 20, seed=derive_seed(s, 2)
            )
        corrupted, events = apply_fault(y, cfg)
        if replay_events(y, events) != corrupted:
            return CheckResult(
                "event-replay", c + 1, False, f"log does not reproduce corruption at case {c}"
            )
        changed = int(np.count_nonzero(corrupted.data != y.data))
        if changed != len(events):
            return CheckResult(
                "event-replay", c + 1, False,
                f"{changed} changed elements but {len(events)} events at case {c}",
            )
    return CheckResult("event-replay", cases, True)


def check_uniform_msd_relation(cases: int, seed: int) -> CheckResult:
    from .gemm import AccumMatrix

    zero = AccumMatrix(np.zeros((16, 16), dtype=np.int32))
    for c in range(cases):
        s = derive_seed(seed, 5, c)
        u = u64_stream(s, 2)
        freq = int(u[0] % np.uint64(256)) + 1
        mag = 1 << (int(u[1]) % 20)
        cfg = FaultConfig(mode="uniform", freq=freq, mag=mag, seed=derive_seed(s, 0))
        corrupted, events = apply_fault(zero, cfg)
        pair = ChecksumPair.from_vectors(checksum(zero, "row"), checksum(corrupted, "row"))
        if pair.msd() != freq * mag:
            return CheckResult(
                "uniform-msd-relation", c + 1, False,
                f"msd {pair.msd()} != freq*mag {freq * mag} at case {c}",
            )
        if len(events) != freq:
            return CheckResult(
                "uniform-msd-relation", c + 1, False,
                f"{len(events)} events for freq {freq} at case {c}",
            )
    return CheckResult("uniform-msd-relation", cases, True)


def check_ber_table(cases: int, seed: int) -> CheckResult:
    table = default_table()
    for c in range(cases):
        s = derive_seed(seed, 6, c)
        u = u64_stream(s, 2)
        i = int(u[0] % np.uint64(table.voltages.size - 1))
        v0, v1 = float(table.voltages[i]), float(table.voltages[i + 1])
        t = (int(u[1]) % 999 + 1) / 1000.0
        v = v0 + (v1 - v0) * t
        b = table.ber_at(v)
        lo, hi = float(table.bers[i]), float(table.bers[i + 1])
        if not (lo <= b <= hi):
            return CheckResult(
                "ber-table-interpolation", c + 1, False,
                f"ber({v}) = {b} outside [{lo}, {hi}] at case {c}",
            )
        if table.ber_at(v0) != lo or table.ber_at(v1) != hi:
            return CheckResult(
                "ber-table-interpolation", c + 1, False, f"exact row not verbatim at case {c}"
            )
    # zero-BER rows floor to the log-domain epsilon instead of blowing up
    zt = VoltageBerTable(np.array([0.9, 0.8]), np.array([0.0, 1e-6]))
    mid = zt.ber_at(0.85)
    if not (0.0 < mid < 1e-6):
        return CheckResult(
            "ber-table-interpolation", cases, False, f"zero-row interpolation gave {mid}"
        )
    return CheckResult("ber-table-interpolation", cases, True)


def check_lzc_band(cases: int, seed: int) -> CheckResult:
    """LZC-mode verdicts may differ from exact only near quantization edges."""
    for c in range(cases):
        s = derive_seed(seed, 7, c)
        n = int(u64_stream(s, 1)[0] % np.uint64(63)) + 2
        d = _random_diff(derive_seed(s, 0), n)
        pair = ChecksumPair.from_diff(d)
        params = _random_params(derive_seed(s, 1))
        exact = statistical_unit(
            pair.predicted, pair.observed, StatUnitConfig(params=params, log2_mode="exact")
        )
        lzc = statistical_unit(
            pair.predicted, pair.observed, StatUnitConfig(params=params, log2_mode="lzc")
        )
        if exact.decision == lzc.decision:
            continue
        msd = pair.msd()
        if msd == 0:
            return CheckResult(
                "lzc-agreement-band", c + 1, False, f"msd=0 disagreement at case {c}"
            )
        theta_exact = params.b - (params.a - 1.0) * math.log2(msd)
        theta_lzc = _theta_fixed(msd, params, 4) / 16.0
        near_edge = False
        for v in d:
            if v == 0:
                continue
            lg = math.log2(abs(int(v)))
            if abs(lg - theta_exact) <= 1.0:
                near_edge = True
                break
            e = floor_log2(abs(int(v)))
            if min(theta_exact, theta_lzc) < e <= max(theta_exact, theta_lzc):
                near_edge = True
                break
        if not near_edge:
            return CheckResult(
                "lzc-agreement-band", c + 1, False,
                f"disagreement away from quantization edge at case {c}",
            )
    return CheckResult("lzc-agreement-band", cases, True)


ALL_CHECKS = (
    "checksum-identities",
    "dataflow-equivalence",
    "stat-unit-reference",
    "event-replay",
    "uniform-msd-relation",
    "ber-table-interpolation",
    "lzc-agreement-band",
)


def run_checks(cases: int = 200, seed: int = 0, planted_failure: bool = False) -> list[CheckResult]:
    """Run every invariant check; results keep the ALL_CHECKS order."""
    if cases < 1:
        raise ValueError("cases must be >= 1")
    return [
        check_checksum_identities(cases, seed, planted_failure),
        check_dataflow_equivalence(max(cases // 4, 25), seed),
        check_stat_unit_reference(cases, seed),
        check_event_replay(max(cases // 4, 25), seed),
        check_uniform_msd_relation(cases, seed),
        check_ber_table(cases, seed),
        check_lzc_band(cases, seed),
    ]
