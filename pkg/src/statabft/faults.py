"""Fault injection into INT32 GEMM outputs, plus the voltage -> BER table.

Two fault modes:

* "ber": every bit inside ``bit_window`` of every output element flips
  independently with probability ``ber``. Draws are counter-based SplitMix64
  (one uniform per candidate bit, elements in row-major order, bits from the
  low end of the window up), so a (seed, matrix shape, window) triple fixes
  the corruption pattern exactly, regardless of batching.

* "uniform": exactly ``freq`` output elements at distinct positions each get
  ``mag`` added (wrapping in INT32). When no element wraps, the checksum sum
  deviation is exactly freq * mag, which is what makes this mode useful for
  planting errors of known severity.

Every injection returns the corrupted matrix plus a ground-truth event log;
``replay_events`` applies a log onto the clean matrix and must reproduce the
corrupted one bit for bit.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .gemm import AccumMatrix
from .rng import derive_seed, u64_stream, unit_floats

BER_MODE = "ber"
UNIFORM_MODE = "uniform"

INT32_MIN = -(2**31)
INT32_MAX = 2**31 - 1

# BER values of exactly zero are floored to this in log space before
# interpolation; exact table rows are returned verbatim.
LOG_BER_FLOOR = 1e-15


@dataclass(frozen=True)
class FaultConfig:
    """Which fault mode to apply and with what parameters.

    mode="ber" uses ``ber`` and ``bit_window`` (inclusive bit positions
    within the 32-bit accumulator); mode="uniform" uses ``freq`` and ``mag``.
    ``seed`` is the default stream seed when the caller does not supply one.
    """

    mode: str
    ber: float = 0.0
    bit_window: tuple[int, int] = (16, 31)
    mag: int = 0
    freq: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in (BER_MODE, UNIFORM_MODE):
            raise ValueError(f"unknown fault mode {self.mode!r}")
        if not (0.0 <= self.ber <= 1.0):
            raise ValueError(f"ber must be in [0, 1], got {self.ber}")
        lo, hi = self.bit_window
        if not (0 <= lo <= hi <= 31):
            raise ValueError(f"bit_window must satisfy 0 <= lo <= hi <= 31, got {self.bit_window}")
        object.__setattr__(self, "bit_window", (int(lo), int(hi)))
        if self.freq < 0:
            raise ValueError(f"freq must be >= 0, got {self.freq}")
        if not (INT32_MIN <= self.mag <= INT32_MAX):
            raise ValueError(f"mag must fit INT32, got {self.mag}")


@dataclass(frozen=True)
class ErrorEvent:
    """One corrupted output element: position, values, and flipped bits.

    ``flipped_bits`` lists bit positions for mode="ber" and is empty for
    mode="uniform". ``before != after`` always holds; no-op flips are never
    logged.
    """

    row: int
    col: int
    before: int
    after: int
    flipped_bits: tuple[int, ...] = ()


def _wrap_int32(v: int) -> int:
    return ((v - INT32_MIN) % 2**32) + INT32_MIN


def sample_bitflips(
    y: AccumMatrix, cfg: FaultConfig, seed: int | None = None
) -> tuple[AccumMatrix, list[ErrorEvent]]:
    """Apply per-bit Bernoulli flips inside cfg.bit_window to every element."""
    if cfg.mode != BER_MODE:
        raise ValueError(f"sample_bitflips needs mode='ber', got {cfg.mode!r}")
    if seed is None:
        seed = cfg.seed
    if cfg.ber == 0.0:
        return AccumMatrix(y.data.copy()), []

    lo, hi = cfg.bit_window
    width = hi - lo + 1
    flat = y.data.ravel()
    n = flat.size

    u = u64_stream(seed, n * width)
    flips = (unit_floats(u) < cfg.ber).reshape(n, width)

    masks = np.zeros(n, dtype=np.uint32)
    for j in range(width):
        masks |= flips[:, j].astype(np.uint32) << np.uint32(lo + j)

    corrupted = (flat.view(np.uint32) ^ masks).view(np.int32)
    out = AccumMatrix(corrupted.reshape(y.data.shape))

    events = []
    cols = y.data.shape[1]
    for idx in np.nonzero(masks)[0]:
        mask = int(masks[idx])
        bits = tuple(b for b in range(lo, hi + 1) if mask & (1 << b))
        events.append(
            ErrorEvent(
                row=int(idx) // cols,
                col=int(idx) % cols,
                before=int(flat[idx]),
                after=int(corrupted[idx]),
                flipped_bits=bits,
            )
        )
    return out, events


def inject_uniform(
    y: AccumMatrix, cfg: FaultConfig, seed: int | None = None
) -> tuple[AccumMatrix, list[ErrorEvent]]:
    """Add cfg.mag to exactly cfg.freq distinct elements, chosen uniformly.

    Each element gets one SplitMix64 priority draw (row-major order, same
    stream discipline as the BER mode) and the cfg.freq smallest priorities
    are corrupted, which selects position sets uniformly. mag == 0 or
    freq == 0 yields an untouched copy and an empty log.
    """
    if cfg.mode != UNIFORM_MODE:
        raise ValueError(f"inject_uniform needs mode='uniform', got {cfg.mode!r}")
    if seed is None:
        seed = cfg.seed
    n = y.data.size
    if cfg.freq > n:
        raise ValueError(f"freq {cfg.freq} exceeds element count {n}")
    out_data = y.data.copy()
    if cfg.freq == 0 or cfg.mag == 0:
        return AccumMatrix(out_data), []

    priority = u64_stream(seed, n)
    if cfg.freq < n:
        positions = np.sort(np.argpartition(priority, cfg.freq)[: cfg.freq])
    else:
        positions = np.arange(n)

    flat = out_data.ravel()
    cols = y.data.shape[1]
    events = []
    for pos in positions:
        before = int(flat[pos])
        after = _wrap_int32(before + cfg.mag)
        flat[pos] = after
        events.append(
            ErrorEvent(row=int(pos) // cols, col=int(pos) % cols, before=before, after=after)
        )
    return AccumMatrix(out_data), events


def apply_fault(
    y: AccumMatrix, cfg: FaultConfig, seed: int | None = None
) -> tuple[AccumMatrix, list[ErrorEvent]]:
    """Dispatch on cfg.mode."""
    if cfg.mode == BER_MODE:
        return sample_bitflips(y, cfg, seed)
    return inject_uniform(y, cfg, seed)


def replay_events(y: AccumMatrix, events: list[ErrorEvent]) -> AccumMatrix:
    """Re-apply an event log onto the clean matrix it was recorded against.

    Raises if any event's ``before`` does not match the matrix, which would
    mean the log and matrix are from different runs.
    """
    out = y.data.copy()
    for e in events:
        if int(out[e.row, e.col]) != e.before:
            raise ValueError(
                f"event at ({e.row}, {e.col}) expects before={e.before}, "
                f"matrix has {int(out[e.row, e.col])}"
            )
        out[e.row, e.col] = e.after
    return AccumMatrix(out)


class TableFormatError(ValueError):
    """CSV table rejected; message carries the 1-based line number."""


@dataclass(frozen=True, eq=False)
class VoltageBerTable:
    """Operating points: strictly descending voltages, non-decreasing BERs.

    Queries between rows interpolate log-linearly in (voltage, log10 BER).
    Exact row voltages return the stored BER verbatim, including 0.0.
    """

    voltages: np.ndarray
    bers: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.voltages, dtype=np.float64)
        b = np.asarray(self.bers, dtype=np.float64)
        if v.ndim != 1 or v.size < 2 or v.shape != b.shape:
            raise ValueError("table needs matching 1-D voltage/ber arrays with >= 2 rows")
        if not np.all(np.diff(v) < 0):
            raise ValueError("voltages must be strictly descending")
        if np.any(b < 0) or np.any(b > 1):
            raise ValueError("ber values must lie in [0, 1]")
        if not np.all(np.diff(b) >= 0):
            raise ValueError("ber must be non-decreasing as voltage drops")
        v.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "voltages", v)
        object.__setattr__(self, "bers", b)

    @property
    def v_max(self) -> float:
        return float(self.voltages[0])

    @property
    def v_min(self) -> float:
        return float(self.voltages[-1])

    def ber_at(self, v: float) -> float:
        """BER at voltage ``v``; raises ValueError outside the table span."""
        if not (self.v_min <= v <= self.v_max):
            raise ValueError(
                f"voltage {v} outside table span [{self.v_min}, {self.v_max}]"
            )
        exact = np.nonzero(self.voltages == v)[0]
        if exact.size:
            return float(self.bers[exact[0]])
        # voltages descend, so search on the negated axis
        i = int(np.searchsorted(-self.voltages, -v)) - 1
        v0, v1 = float(self.voltages[i]), float(self.voltages[i + 1])
        b0 = max(float(self.bers[i]), LOG_BER_FLOOR)
        b1 = max(float(self.bers[i + 1]), LOG_BER_FLOOR)
        t = (v0 - v) / (v0 - v1)
        return 10.0 ** ((1 - t) * math.log10(b0) + t * math.log10(b1))

    @classmethod
    def from_csv(cls, path_or_text: str, *, is_text: bool = False) -> "VoltageBerTable":
        """Parse a ``voltage,ber`` CSV file (header row required)."""
        if is_text:
            fh = io.StringIO(path_or_text)
            return cls._parse(fh)
        with open(path_or_text, newline="") as fh:
            return cls._parse(fh)

    @classmethod
    def _parse(cls, fh) -> "VoltageBerTable":
        reader = csv.reader(fh)
        rows = []
        header = None
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if header is None:
                header = [c.strip().lower() for c in row]
                if header != ["voltage", "ber"]:
                    raise TableFormatError(
                        f"line {lineno}: header must be 'voltage,ber', got {','.join(row)!r}"
                    )
                continue
            if len(row) != 2:
                raise TableFormatError(f"line {lineno}: expected 2 fields, got {len(row)}")
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                raise TableFormatError(f"line {lineno}: non-numeric field in {row!r}") from None
        if header is None:
            raise TableFormatError("line 1: empty table")
        if len(rows) < 2:
            raise TableFormatError(f"table needs >= 2 data rows, got {len(rows)}")
        try:
            return cls(
                np.array([r[0] for r in rows]),
                np.array([r[1] for r in rows]),
            )
        except ValueError as e:
            raise TableFormatError(str(e)) from None

    def to_csv(self) -> str:
        lines = ["voltage,ber"]
        for v, b in zip(self.voltages, self.bers):
            lines.append(f"{v:.6g},{b:.6g}")
        return "\n".join(lines) + "\n"


def default_table() -> VoltageBerTable:
    """Synthetic undervolting curve: 1e-12 at 0.90 V up to 1e-4 at 0.60 V.

    Log-linear in between, sampled every 20 mV. Stands in for silicon
    characterization data when none is supplied.
    """
    voltages = np.round(np.arange(0.90, 0.60 - 1e-9, -0.02), 10)
    exponents = -12.0 + (0.90 - voltages) / 0.30 * 8.0
    return VoltageBerTable(voltages, 10.0**exponents)
