"""Quality grids and critical-region calibration.

A quality grid sweeps uniform injections over a (frequency, magnitude)
lattice, scores each cell with a workload-quality oracle, and marks cells
acceptable when mean degradation stays within an epsilon budget. Fitting a
line to the acceptable/unacceptable boundary recovers critical-region
parameters (a, b, theta_freq) for the statistical detector.

The boundary model is theta_mag = b - (a - 1) * log2(MSD) with
MSD = freq * mag for uniform injections, i.e. in (t, m) = (log2 freq,
log2 mag) coordinates the boundary is the line m = (b - (a - 1) t) / a.
The fit regresses m on t over boundary midpoints (between each acceptable
cell and its unacceptable 4-neighbors) and maps slope/intercept back to
(a, b). Regressing on t rather than on log2(MSD) = t + m sidesteps the
errors-in-regressor bias that grid quantization would otherwise inject,
while describing exactly the same boundary line.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .detectors import CriticalRegionParams
from .faults import UNIFORM_MODE, FaultConfig, ErrorEvent, inject_uniform
from .gemm import AccumMatrix
from .rng import derive_seed

# fallback slope when a grid shows no magnitude structure above theta_freq:
# effectively flat, but strictly a > 1 so the params remain loadable
_FLAT_A = 1.0 + 2.0**-20

MAX_MAG_LOG2 = 30.0


class NoBoundaryError(RuntimeError):
    """Grid has no fittable acceptable/unacceptable boundary; widen the axes."""


class GridCellError(RuntimeError):
    """Oracle or injection failure, annotated with the grid cell coordinates."""

    def __init__(self, freq: int, mag_log2: float, msg: str):
        super().__init__(f"cell (freq={freq}, mag_log2={mag_log2}): {msg}")
        self.freq = freq
        self.mag_log2 = mag_log2


@dataclass(frozen=True)
class OracleCase:
    """One injected trial handed to a quality oracle."""

    clean: AccumMatrix
    corrupted: AccumMatrix
    events: tuple[ErrorEvent, ...]
    freq: int
    mag: int
    mag_log2: float
    trial_index: int


QualityOracle = Callable[[OracleCase], float]


@dataclass(frozen=True, eq=False)
class QualityGrid:
    """Mean degradation per (freq, mag) cell plus the acceptability mask.

    quality has shape (len(freq_axis), len(mag_log2_axis)). epsilon may be
    NaN for grids deserialized from CSV, where the stored acceptability
    column is authoritative.
    """

    freq_axis: np.ndarray
    mag_log2_axis: np.ndarray
    quality: np.ndarray
    acceptable: np.ndarray
    epsilon: float

    def __post_init__(self):
        fa = np.asarray(self.freq_axis, dtype=np.int64)
        ma = np.asarray(self.mag_log2_axis, dtype=np.float64)
        q = np.asarray(self.quality, dtype=np.float64)
        acc = np.asarray(self.acceptable, dtype=bool)
        if fa.ndim != 1 or fa.size < 2 or np.any(fa < 1) or np.any(np.diff(fa) <= 0):
            raise ValueError("freq_axis must be >= 2 strictly increasing positives")
        if ma.ndim != 1 or ma.size < 2 or np.any(np.diff(ma) <= 0):
            raise ValueError("mag_log2_axis must be >= 2 strictly increasing values")
        shape = (fa.size, ma.size)
        if q.shape != shape or acc.shape != shape:
            raise ValueError(f"quality/acceptable must have shape {shape}")
        if np.any(q < 0) or not np.all(np.isfinite(q)):
            raise ValueError("quality values must be finite and >= 0")
        if not math.isnan(self.epsilon) and not np.array_equal(acc, q <= self.epsilon):
            raise ValueError("acceptable mask inconsistent with quality <= epsilon")
        for name, arr in (("freq_axis", fa), ("mag_log2_axis", ma),
                          ("quality", q), ("acceptable", acc)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _default_factory(seed: int) -> AccumMatrix:
    return AccumMatrix(np.zeros((16, 16), dtype=np.int32))


def quality_grid(
    oracle: QualityOracle,
    mag_log2_axis,
    freq_axis,
    *,
    epsilon: float,
    trials: int = 32,
    seed: int = 0,
    clean_factory: Callable[[int], AccumMatrix] | None = None,
) -> QualityGrid:
    """Score every (freq, mag) cell with ``trials`` uniform injections.

    Per trial the clean matrix comes from ``clean_factory`` (all-zero 16x16
    by default) and exactly ``freq`` elements get ``round(2**mag_log2)``
    added; the oracle maps the injected case to a degradation score >= 0.
    Seeds are derived per (cell, trial), so cells are independent and the
    whole grid is reproducible from ``seed``. Oracle or injection failures
    surface as GridCellError carrying the cell coordinates.
    """
    mag_axis = np.asarray(mag_log2_axis, dtype=np.float64)
    freqs = np.asarray(freq_axis, dtype=np.int64)
    if np.any(mag_axis < 0) or np.any(mag_axis > MAX_MAG_LOG2):
        raise ValueError(f"mag_log2 values must lie in [0, {MAX_MAG_LOG2}]")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not (epsilon >= 0):
        raise ValueError("epsilon must be >= 0")
    if clean_factory is None:
        clean_factory = _default_factory

    quality = np.zeros((freqs.size, mag_axis.size))
    for i, f in enumerate(freqs):
        f = int(f)
        for j, m in enumerate(mag_axis):
            m = float(m)
            mag = int(round(2.0**m))
            cell = i * mag_axis.size + j
            total = 0.0
            for t in range(trials):
                clean = clean_factory(derive_seed(seed, cell, t, 0))
                cfg = FaultConfig(mode=UNIFORM_MODE, freq=f, mag=mag)
                try:
                    corrupted, events = inject_uniform(
                        clean, cfg, derive_seed(seed, cell, t, 1)
                    )
                    score = float(
                        oracle(
                            OracleCase(
                                clean=clean,
                                corrupted=corrupted,
                                events=tuple(events),
                                freq=f,
                                mag=mag,
                                mag_log2=m,
                                trial_index=t,
                            )
                        )
                    )
                except Exception as e:
                    raise GridCellError(f, m, str(e)) from e
                if not (score >= 0.0 and math.isfinite(score)):
                    raise GridCellError(f, m, f"oracle returned {score!r}")
                total += score
            quality[i, j] = total / trials

    return QualityGrid(
        freq_axis=freqs,
        mag_log2_axis=mag_axis,
        quality=quality,
        acceptable=quality <= epsilon,
        epsilon=epsilon,
    )


def planted_step_oracle(params: CriticalRegionParams) -> QualityOracle:
    """Degradation 1.0 exactly inside the critical region of ``params``.

    The region test uses the axis coordinates (freq, log2 mag) directly with
    MSD = freq * mag, so the planted boundary is sharp: freq > theta_freq
    and log2(mag) > b - (a - 1) * (log2(freq) + log2(mag)).
    """

    def oracle(case: OracleCase) -> float:
        if case.freq <= params.theta_freq or case.freq < 1:
            return 0.0
        bound = params.b - (params.a - 1.0) * (math.log2(case.freq) + case.mag_log2)
        return 1.0 if case.mag_log2 > bound else 0.0

    return oracle


def norm_distortion_oracle(norm_kind: str = "layer_norm") -> QualityOracle:
    """Degradation = fraction of normalized outputs moved > 1% by the fault.

    The injected matrix is treated as one hidden-state vector (flattened,
    dequantized by a float cast) feeding a normalization layer.
    """
    from .resilience import apply_norm, measure_change

    def oracle(case: OracleCase) -> float:
        before = case.clean.data.astype(np.float64).ravel()
        after = case.corrupted.data.astype(np.float64).ravel()
        res = measure_change(apply_norm(before, norm_kind), apply_norm(after, norm_kind))
        return res.changed_fraction

    return oracle


def fit_critical_region(grid: QualityGrid) -> CriticalRegionParams:
    """Recover (a, b, theta_freq) from a quality grid.

    theta_freq is the largest frequency whose row and every lower row are
    fully acceptable (0 if none). The magnitude boundary is then fitted over
    rows with freq > theta_freq: every (acceptable cell, unacceptable
    4-neighbor) pair contributes its midpoint, and least squares on those
    midpoints in (log2 freq, log2 mag) gives the line mapped back to (a, b).

    Grids that are entirely acceptable, entirely unacceptable, or whose
    boundary has no frequency extent raise NoBoundaryError. Grids whose rows
    above theta_freq are uniformly unacceptable (a pure frequency boundary)
    return a flat magnitude bound at the lowest calibrated magnitude.
    """
    acc = grid.acceptable
    if acc.all():
        raise NoBoundaryError("grid entirely acceptable; extend axes upward")
    if not acc.any():
        raise NoBoundaryError("grid entirely unacceptable; extend axes downward")

    freqs = grid.freq_axis
    t_axis = np.log2(freqs.astype(np.float64))
    m_axis = grid.mag_log2_axis
    n_rows, n_cols = acc.shape

    theta_freq = 0
    for i in range(n_rows):
        if acc[i].all():
            theta_freq = int(freqs[i])
        else:
            break

    ts: list[float] = []
    ms: list[float] = []
    for i in range(n_rows):
        if freqs[i] <= theta_freq:
            continue
        for j in range(n_cols):
            if not acc[i, j]:
                continue
            if j + 1 < n_cols and not acc[i, j + 1]:
                ts.append(t_axis[i])
                ms.append(0.5 * (m_axis[j] + m_axis[j + 1]))
            if j > 0 and not acc[i, j - 1]:
                ts.append(t_axis[i])
                ms.append(0.5 * (m_axis[j] + m_axis[j - 1]))
            if i + 1 < n_rows and not acc[i + 1, j]:
                ts.append(0.5 * (t_axis[i] + t_axis[i + 1]))
                ms.append(m_axis[j])
            if i > 0 and freqs[i - 1] > theta_freq and not acc[i - 1, j]:
                ts.append(0.5 * (t_axis[i] + t_axis[i - 1]))
                ms.append(m_axis[j])

    if not ts:
        above = [i for i in range(n_rows) if freqs[i] > theta_freq]
        if above and not any(acc[i].any() for i in above):
            return CriticalRegionParams(
                a=_FLAT_A, b=float(m_axis[0]), theta_freq=theta_freq
            )
        raise NoBoundaryError("no acceptable/unacceptable boundary above theta_freq")
    if len(set(ts)) < 2:
        raise NoBoundaryError("boundary has no frequency extent; widen the freq axis")

    slope, intercept = np.polyfit(np.array(ts), np.array(ms), 1)
    # m = (b - (a-1) t) / a  =>  slope = -(a-1)/a, intercept = b/a
    slope = float(min(max(slope, -1.0 + 1e-9), 0.0))
    a = 1.0 / (1.0 + slope)
    b = float(intercept) * a
    return CriticalRegionParams(a=float(a), b=b, theta_freq=theta_freq)


# --- grid CSV exchange format ------------------------------------------------
#
# Columns: freq,mag_log2,quality,acceptable. One row per cell, freq-major.


def grid_to_csv(grid: QualityGrid) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["freq", "mag_log2", "quality", "acceptable"])
    for i, f in enumerate(grid.freq_axis):
        for j, m in enumerate(grid.mag_log2_axis):
            writer.writerow(
                [int(f), f"{float(m):.10g}", f"{grid.quality[i, j]:.10g}",
                 int(grid.acceptable[i, j])]
            )
    return buf.getvalue()


def grid_from_csv(text: str) -> QualityGrid:
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not rows or [c.strip() for c in rows[0]] != ["freq", "mag_log2", "quality", "acceptable"]:
        raise ValueError("grid CSV must start with header freq,mag_log2,quality,acceptable")
    cells: dict[tuple[int, float], tuple[float, bool]] = {}
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) != 4:
            raise ValueError(f"line {lineno}: expected 4 fields, got {len(r)}")
        try:
            f = int(r[0])
            m = float(r[1])
            q = float(r[2])
            acc = r[3].strip().lower()
        except ValueError:
            raise ValueError(f"line {lineno}: malformed cell {r!r}") from None
        if acc not in ("0", "1", "true", "false"):
            raise ValueError(f"line {lineno}: acceptable must be 0/1/true/false")
        if (f, m) in cells:
            raise ValueError(f"line {lineno}: duplicate cell (freq={f}, mag_log2={m})")
        cells[(f, m)] = (q, acc in ("1", "true"))

    freqs = sorted({f for f, _ in cells})
    mags = sorted({m for _, m in cells})
    quality = np.zeros((len(freqs), len(mags)))
    acceptable = np.zeros((len(freqs), len(mags)), dtype=bool)
    for i, f in enumerate(freqs):
        for j, m in enumerate(mags):
            if (f, m) not in cells:
                raise ValueError(f"grid CSV not rectangular: missing cell ({f}, {m})")
            quality[i, j], acceptable[i, j] = cells[(f, m)]
    return QualityGrid(
        freq_axis=np.array(freqs, dtype=np.int64),
        mag_log2_axis=np.array(mags),
        quality=quality,
        acceptable=acceptable,
        epsilon=math.nan,
    )
