"""Checksum-difference detectors, from classical ABFT to the statistical rule.

All detectors look at the same evidence: the element-wise difference d
between the predicted checksum row (computed from the inputs) and the
observed checksum row of the possibly-faulted output. From d they derive

    MSD      = |sum_j d_j|            (matrix sum deviation, exact int)
    theta    = b - (a - 1) * log2(MSD)        (+inf when MSD == 0)
    freq_eff = #{ j : d_j != 0 and log2|d_j| > theta }

and decide:

    classical     recover iff any d_j != 0
    msd           recover iff MSD > threshold
    statistical   recover iff freq_eff > theta_freq
    none          never recovers
    dmr           classical's decisions (costed differently by the energy
                  model: full dual execution instead of checksums)

The statistical rule encodes a critical region in (frequency, magnitude)
space: errors are worth recovering only when more than theta_freq checksum
lanes deviate by more than the magnitude bound theta, which shrinks as the
total deviation MSD grows (a > 1 makes the boundary slope downward in
log-log space).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .gemm import ChecksumVector

PASS = "pass"
RECOVER = "recover"

DETECTOR_KINDS = ("none", "classical", "msd", "statistical", "dmr")


@dataclass(frozen=True)
class CriticalRegionParams:
    """Parameters (a, b, theta_freq) of the critical-region boundary.

    The type admits a == 1 (a flat magnitude bound) so analysis code can
    probe the degenerate case; calibrated parameters loaded from disk are
    held to the strict a > 1 contract by load_params.
    """

    a: float
    b: float
    theta_freq: int

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a >= 1.0):
            raise ValueError(f"a must be finite and >= 1, got {self.a}")
        if not math.isfinite(self.b):
            raise ValueError(f"b must be finite, got {self.b}")
        if not (isinstance(self.theta_freq, int) and self.theta_freq >= 0):
            raise ValueError(f"theta_freq must be an int >= 0, got {self.theta_freq!r}")


@dataclass(frozen=True, eq=False)
class ChecksumPair:
    """Predicted vs observed checksum row and their exact difference."""

    predicted: ChecksumVector
    observed: ChecksumVector
    diff: np.ndarray

    @classmethod
    def from_vectors(cls, predicted: ChecksumVector, observed: ChecksumVector) -> "ChecksumPair":
        if len(predicted) != len(observed):
            raise ValueError(
                f"checksum lengths differ: {len(predicted)} vs {len(observed)}"
            )
        if predicted.side != observed.side:
            raise ValueError(
                f"checksum sides differ: {predicted.side!r} vs {observed.side!r}"
            )
        d = predicted.data - observed.data
        d.setflags(write=False)
        return cls(predicted=predicted, observed=observed, diff=d)

    @classmethod
    def from_diff(cls, diff) -> "ChecksumPair":
        """Build a synthetic pair with the given difference (observed = 0)."""
        d = np.asarray(diff, dtype=np.int64)
        return cls.from_vectors(
            ChecksumVector(d.copy()), ChecksumVector(np.zeros_like(d))
        )

    def msd(self) -> int:
        """|sum of differences|, summed exactly in arbitrary precision."""
        return abs(sum(int(v) for v in self.diff))

    def nonzero_count(self) -> int:
        return int(np.count_nonzero(self.diff))


@dataclass(frozen=True)
class DetectionVerdict:
    """What a detector saw and what it decided for one GEMM."""

    detector: str
    msd: int
    theta_mag: float
    freq_eff: int
    decision: str

    def __post_init__(self):
        if self.decision not in (PASS, RECOVER):
            raise ValueError(f"decision must be pass/recover, got {self.decision!r}")
        if self.msd < 0:
            raise ValueError("msd is an absolute value, must be >= 0")
        if self.freq_eff < 0:
            raise ValueError("freq_eff must be >= 0")

    @property
    def recovers(self) -> bool:
        return self.decision == RECOVER


def theta_mag(msd: int, params: CriticalRegionParams) -> float:
    """Magnitude bound b - (a-1) * log2(MSD); +inf when MSD == 0."""
    if msd < 0:
        raise ValueError("msd must be >= 0")
    if msd == 0:
        return math.inf
    return params.b - (params.a - 1.0) * math.log2(msd)


def effective_frequency(pair: ChecksumPair, theta: float) -> int:
    """Count checksum lanes whose deviation magnitude exceeds 2**theta."""
    d = pair.diff
    nz = d != 0
    if not nz.any() or math.isinf(theta):
        return 0
    mags = np.abs(d[nz].astype(np.float64))
    return int(np.count_nonzero(np.log2(mags) > theta))


def detect_classical(pair: ChecksumPair) -> DetectionVerdict:
    """Classical ABFT: any nonzero checksum difference triggers recovery."""
    nz = pair.nonzero_count()
    return DetectionVerdict(
        detector="classical",
        msd=pair.msd(),
        theta_mag=0.0,
        freq_eff=nz,
        decision=RECOVER if nz > 0 else PASS,
    )


def detect_msd(pair: ChecksumPair, threshold: int) -> DetectionVerdict:
    """Recover iff MSD strictly exceeds the fixed threshold."""
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    msd = pair.msd()
    return DetectionVerdict(
        detector="msd",
        msd=msd,
        theta_mag=0.0,
        freq_eff=pair.nonzero_count(),
        decision=RECOVER if msd > threshold else PASS,
    )


def detect_statistical(pair: ChecksumPair, params: CriticalRegionParams) -> DetectionVerdict:
    """Recover iff freq_eff strictly exceeds theta_freq.

    Both comparisons are strict: lanes count toward freq_eff only when
    log2|d_j| > theta, and recovery fires only when freq_eff > theta_freq.
    MSD == 0 gives theta = +inf, so fully cancelling errors always pass.
    """
    msd = pair.msd()
    theta = theta_mag(msd, params)
    freq_eff = effective_frequency(pair, theta)
    return DetectionVerdict(
        detector="statistical",
        msd=msd,
        theta_mag=theta,
        freq_eff=freq_eff,
        decision=RECOVER if freq_eff > params.theta_freq else PASS,
    )


def detect_none(pair: ChecksumPair) -> DetectionVerdict:
    """Baseline that never recovers; stats still reported for bookkeeping."""
    return DetectionVerdict(
        detector="none",
        msd=pair.msd(),
        theta_mag=0.0,
        freq_eff=pair.nonzero_count(),
        decision=PASS,
    )


@dataclass(frozen=True)
class DetectorSpec:
    """A detector kind plus whatever parameters that kind needs."""

    kind: str
    params: CriticalRegionParams | None = None
    msd_threshold: int = 0

    def __post_init__(self):
        if self.kind not in DETECTOR_KINDS:
            raise ValueError(f"kind must be one of {DETECTOR_KINDS}, got {self.kind!r}")
        if self.kind == "statistical" and self.params is None:
            raise ValueError("statistical detector needs CriticalRegionParams")
        if self.msd_threshold < 0:
            raise ValueError("msd_threshold must be >= 0")

    def evaluate(self, pair: ChecksumPair) -> DetectionVerdict:
        if self.kind == "classical":
            return detect_classical(pair)
        if self.kind == "msd":
            return detect_msd(pair, self.msd_threshold)
        if self.kind == "statistical":
            return detect_statistical(pair, self.params)
        if self.kind == "none":
            return detect_none(pair)
        # dmr: detection is by full re-execution, behaviorally equivalent to
        # catching every nonzero difference
        v = detect_classical(pair)
        return DetectionVerdict(
            detector="dmr",
            msd=v.msd,
            theta_mag=v.theta_mag,
            freq_eff=v.freq_eff,
            decision=v.decision,
        )


def save_params(params: CriticalRegionParams, path: str, provenance: str = "") -> None:
    """Write calibrated parameters as a small JSON document."""
    doc = {
        "a": params.a,
        "b": params.b,
        "theta_freq": params.theta_freq,
        "provenance": provenance,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_params(path: str) -> tuple[CriticalRegionParams, str]:
    """Read a parameter file; calibrated params must satisfy a > 1 strictly."""
    with open(path) as fh:
        doc = json.load(fh)
    missing = {"a", "b", "theta_freq"} - set(doc)
    if missing:
        raise ValueError(f"parameter file missing keys: {sorted(missing)}")
    a = float(doc["a"])
    b = float(doc["b"])
    tf = doc["theta_freq"]
    if not isinstance(tf, int) or isinstance(tf, bool):
        raise ValueError(f"theta_freq must be an integer, got {tf!r}")
    if not a > 1.0:
        raise ValueError(f"calibrated a must be > 1, got {a}")
    params = CriticalRegionParams(a=a, b=b, theta_freq=tf)
    return params, str(doc.get("provenance", ""))
