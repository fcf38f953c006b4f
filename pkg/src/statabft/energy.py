"""Energy accounting for undervolted GEMMs and detector comparison sweeps.

Compute energy scales quadratically with supply voltage:

    compute(v) = n_mac * e_mac_nom * (v / v_nom)**2

Checksum detectors add a fixed fractional power overhead on top of compute;
every triggered recovery costs one full recomputation at nominal voltage:

    total(v) = compute(v) * (1 + detect_overhead) + recovery_rate * compute(v_nom)

The "none" baseline pays neither overhead nor recovery; the DMR baseline
pays compute twice (dual execution) plus the same recovery term. Expected
latency stretches by the recovery rate: latency_factor = 1 + recovery_rate.

A voltage sweep runs the same GEMM stream at every operating point (paired
across voltages for variance reduction), injecting bit flips at the BER the
voltage/BER table gives, and scores every detector on the same checksum
evidence. The per-detector optimum is the sweep point with minimal energy
(ties break toward higher voltage).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from .detectors import (
    ChecksumPair,
    CriticalRegionParams,
    DetectorSpec,
    detect_statistical,
)
from .faults import BER_MODE, FaultConfig, VoltageBerTable, default_table
from .rng import derive_seed
from .systolic import Dataflow, StatUnitConfig, run_array
from .workloads import WorkloadSpec, workload_matrices

THREADS_ENV = "REALM_SIM_THREADS"

# derivation tag for fault streams inside sweeps/comparisons
_TAG_FAULT = 201


@dataclass(frozen=True)
class EnergyConfig:
    """Nominal operating point, per-MAC energy, and detector overheads.

    Defaults correspond to a checksum unit costing 1.79% power and 1.42%
    area on a 256x256 INT8 array at 0.9 V nominal.
    """

    v_nom: float = 0.9
    e_mac_nom: float = 1.0
    detect_overhead: float = 0.0179
    area_overhead: float = 0.0142
    table: VoltageBerTable = field(default_factory=default_table)

    def __post_init__(self):
        if not self.v_nom > 0:
            raise ValueError("v_nom must be > 0")
        if not self.e_mac_nom > 0:
            raise ValueError("e_mac_nom must be > 0")
        if self.detect_overhead < 0 or self.area_overhead < 0:
            raise ValueError("overheads must be >= 0")


def compute_energy(v: float, n_mac: int, cfg: EnergyConfig) -> float:
    """Energy of n_mac MACs at supply voltage v (quadratic scaling)."""
    if not (0.0 < v <= cfg.v_nom):
        raise ValueError(f"voltage must be in (0, {cfg.v_nom}], got {v}")
    if n_mac < 1:
        raise ValueError("n_mac must be >= 1")
    return n_mac * cfg.e_mac_nom * (v / cfg.v_nom) ** 2


def total_energy(
    v: float,
    recovery_rate: float,
    n_mac: int,
    cfg: EnergyConfig,
    detector: str = "statistical",
) -> float:
    """Expected per-GEMM energy including detection and recovery costs."""
    if not (0.0 <= recovery_rate <= 1.0):
        raise ValueError(f"recovery_rate must be in [0, 1], got {recovery_rate}")
    base = compute_energy(v, n_mac, cfg)
    nominal = n_mac * cfg.e_mac_nom
    if detector == "none":
        return base
    if detector == "dmr":
        return 2.0 * base + recovery_rate * nominal
    return base * (1.0 + cfg.detect_overhead) + recovery_rate * nominal


def latency_factor(recovery_rate: float) -> float:
    """Expected slowdown from recoveries: 1 + recovery_rate."""
    if not (0.0 <= recovery_rate <= 1.0):
        raise ValueError(f"recovery_rate must be in [0, 1], got {recovery_rate}")
    return 1.0 + recovery_rate


@dataclass(frozen=True)
class SweepPoint:
    """One (detector, voltage) operating point of a sweep."""

    voltage: float
    ber: float
    recovery_rate: float
    energy_total: float
    latency_factor: float
    quality_proxy: float
    detector: str


@dataclass(frozen=True)
class SweepResult:
    detector: str
    points: tuple[SweepPoint, ...]
    optimum: SweepPoint


@dataclass(frozen=True)
class CompareRow:
    """Per-detector summary of a fixed-operating-point comparison."""

    detector: str
    trials: int
    recovery_rate: float
    undetected_critical_rate: float
    mean_freq_eff: float
    mean_msd: float


def max_workers(n_items: int) -> int:
    """Worker count for per-voltage parallelism, capped by REALM_SIM_THREADS."""
    default = min(4, os.cpu_count() or 1, max(n_items, 1))
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return max(default, 1)
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if cap < 1:
        raise ValueError(f"{THREADS_ENV} must be >= 1, got {cap}")
    return max(min(default, cap), 1)


def _unique_labels(detectors) -> list[str]:
    labels = [d.kind for d in detectors]
    if len(set(labels)) != len(labels):
        raise ValueError(f"detector kinds must be unique, got {labels}")
    return labels


def _trial_pairs(
    spec: WorkloadSpec,
    trials: int,
    fault_for_trial,
    seed: int,
    flow,
    stat: StatUnitConfig | None,
):
    """Yield (ChecksumPair, verdict) for each trial of a GEMM stream."""
    stream = replace(spec, gemm_count=max(trials, 1))
    for t in range(trials):
        w, x = workload_matrices(stream, t)
        sim = run_array(w, x, flow=flow, fault=fault_for_trial(t), stat=stat)
        yield ChecksumPair.from_vectors(sim.predicted, sim.observed)


def _proxy_params(detectors, quality_params):
    if quality_params is not None:
        return quality_params
    for d in detectors:
        if d.kind == "statistical" and d.params is not None:
            return d.params
    return None


def _score_stream(pairs, detectors, quality_params):
    """Aggregate detector decisions over a stream of checksum pairs."""
    labels = _unique_labels(detectors)
    n = 0
    recoveries = dict.fromkeys(labels, 0)
    undetected = dict.fromkeys(labels, 0)
    freq_sum = dict.fromkeys(labels, 0)
    msd_sum = 0.0
    for pair in pairs:
        n += 1
        critical = (
            quality_params is not None
            and detect_statistical(pair, quality_params).recovers
        )
        msd_sum += float(pair.msd())
        for d, label in zip(detectors, labels):
            v = d.evaluate(pair)
            freq_sum[label] += v.freq_eff
            if v.recovers:
                recoveries[label] += 1
            elif critical:
                undetected[label] += 1
    return n, recoveries, undetected, freq_sum, msd_sum


def compare_detectors(
    spec: WorkloadSpec,
    detectors,
    fault: FaultConfig | None,
    *,
    trials: int | None = None,
    seed: int = 0,
    quality_params: CriticalRegionParams | None = None,
    flow: Dataflow | str = Dataflow.WEIGHT_STATIONARY,
    stat: StatUnitConfig | None = None,
) -> list[CompareRow]:
    """Run one GEMM stream at a fixed fault level; score every detector on it.

    The undetected-critical rate counts trials a detector passed whose
    checksum evidence lies inside the reference critical region
    (quality_params, defaulting to the statistical detector's own params).
    """
    if trials is None:
        trials = spec.gemm_count
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ref = _proxy_params(detectors, quality_params)

    def fault_for_trial(t):
        if fault is None:
            return None
        return replace(fault, seed=derive_seed(seed, _TAG_FAULT, 0, t))

    pairs = _trial_pairs(spec, trials, fault_for_trial, seed, flow, stat)
    n, recoveries, undetected, freq_sum, msd_sum = _score_stream(pairs, detectors, ref)
    return [
        CompareRow(
            detector=label,
            trials=n,
            recovery_rate=recoveries[label] / n,
            undetected_critical_rate=undetected[label] / n,
            mean_freq_eff=freq_sum[label] / n,
            mean_msd=msd_sum / n,
        )
        for label in _unique_labels(detectors)
    ]


def sweep_detectors(
    spec: WorkloadSpec,
    detectors,
    voltages,
    energy_cfg: EnergyConfig | None = None,
    *,
    trials: int | None = None,
    seed: int = 0,
    quality_params: CriticalRegionParams | None = None,
    flow: Dataflow | str = Dataflow.WEIGHT_STATIONARY,
    stat: StatUnitConfig | None = None,
    bit_window: tuple[int, int] = (16, 31),
) -> dict[str, SweepResult]:
    """Voltage sweep: same GEMM stream per point, BER from the table.

    Returns one SweepResult per detector kind with per-voltage points in the
    order given and the energy-minimal optimum (ties break toward higher
    voltage). Voltage points evaluate independently and may run on a small
    thread pool; REALM_SIM_THREADS caps the worker count.
    """
    if energy_cfg is None:
        energy_cfg = EnergyConfig()
    voltages = [float(v) for v in voltages]
    if not voltages:
        raise ValueError("sweep needs at least one voltage")
    if trials is None:
        trials = spec.gemm_count
    if trials < 1:
        raise ValueError("trials must be >= 1")
    labels = _unique_labels(detectors)
    ref = _proxy_params(detectors, quality_params)
    n_mac = spec.macs_per_gemm

    def eval_voltage(vi: int) -> list[SweepPoint]:
        v = voltages[vi]
        ber = energy_cfg.table.ber_at(v)

        def fault_for_trial(t):
            if ber == 0.0:
                return None
            return FaultConfig(
                mode=BER_MODE,
                ber=ber,
                bit_window=bit_window,
                seed=derive_seed(seed, _TAG_FAULT, vi + 1, t),
            )

        pairs = _trial_pairs(spec, trials, fault_for_trial, seed, flow, stat)
        n, recoveries, undetected, _, _ = _score_stream(pairs, detectors, ref)
        points = []
        for d, label in zip(detectors, labels):
            rate = recoveries[label] / n
            points.append(
                SweepPoint(
                    voltage=v,
                    ber=ber,
                    recovery_rate=rate,
                    energy_total=total_energy(v, rate, n_mac, energy_cfg, d.kind),
                    latency_factor=latency_factor(rate),
                    quality_proxy=undetected[label] / n,
                    detector=label,
                )
            )
        return points

    workers = max_workers(len(voltages))
    if workers > 1 and len(voltages) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_voltage = list(pool.map(eval_voltage, range(len(voltages))))
    else:
        per_voltage = [eval_voltage(i) for i in range(len(voltages))]

    results = {}
    for di, label in enumerate(labels):
        points = tuple(per_voltage[vi][di] for vi in range(len(voltages)))
        optimum = min(points, key=lambda p: (p.energy_total, -p.voltage))
        results[label] = SweepResult(detector=label, points=points, optimum=optimum)
    return results


def energy_saving(result: SweepResult, baseline: SweepResult) -> float:
    """Fractional energy saved at the optimum relative to a baseline's optimum."""
    return 1.0 - result.optimum.energy_total / baseline.optimum.energy_total
