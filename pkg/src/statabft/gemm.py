"""Exact integer GEMM and checksum arithmetic.

This is the golden reference the rest of the package is validated against:
INT8 operands, INT32 accumulation, and 64-bit checksum vectors that cannot
wrap for any supported problem size.

Checksum identities (exact over the integers, fault-free):

    colsum(W @ X) == colsum(W) @ X      (checksum row  e^T W, then times X)
    rowsum(W @ X) == W @ rowsum(X)      (checksum col  X e)
    sum(W @ X)    == colsum(W) @ rowsum(X)

where colsum is the sum over rows (a length-N row vector) and rowsum the sum
over columns. The shared inner dimension K is capped at 2**16 so that INT32
accumulators provably cannot overflow (|y| <= 127 * 127 * 2**16 < 2**30) and
INT64 checksums hold sums of up to 2**16 such values with > 16 bits to spare.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_INNER_DIM = 2**16

ROW = "row"
COLUMN = "column"
_SIDES = (ROW, COLUMN)


def _frozen_2d(data, dtype) -> np.ndarray:
    arr = np.asarray(data)
    if arr.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("matrix must be non-empty")
    if arr.dtype != dtype:
        info = np.iinfo(dtype)
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"matrix elements must be integers, got {arr.dtype}")
        lo, hi = int(arr.min()), int(arr.max())
        if lo < info.min or hi > info.max:
            raise ValueError(
                f"element out of range for {np.dtype(dtype).name}: "
                f"values span [{lo}, {hi}]"
            )
        arr = arr.astype(dtype)
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class QuantMatrix:
    """Row-major INT8 matrix plus its quantization scale.

    The scale is metadata carried through for dequantization; all checksum
    arithmetic is done on the raw integers.
    """

    data: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen_2d(self.data, np.int8))
        if not (self.scale > 0.0 and np.isfinite(self.scale)):
            raise ValueError(f"scale must be finite and > 0, got {self.scale}")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, QuantMatrix):
            return NotImplemented
        return self.scale == other.scale and np.array_equal(self.data, other.data)

    @classmethod
    def from_text(cls, text: str, scale: float = 1.0) -> "QuantMatrix":
        return cls(parse_matrix_text(text), scale=scale)

    def to_text(self) -> str:
        return format_matrix_text(self.data)


@dataclass(frozen=True, eq=False)
class AccumMatrix:
    """INT32 accumulator matrix, the output domain of the integer GEMM."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen_2d(self.data, np.int32))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, AccumMatrix):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    @classmethod
    def from_text(cls, text: str) -> "AccumMatrix":
        return cls(parse_matrix_text(text))

    def to_text(self) -> str:
        return format_matrix_text(self.data)


@dataclass(frozen=True, eq=False)
class ChecksumVector:
    """INT64 checksum vector tagged with the side it was reduced over.

    side="row" is the checksum row (sum over matrix rows, one entry per
    column); side="column" is the checksum column (sum over columns, one
    entry per row).
    """

    data: np.ndarray
    side: str = ROW

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError(f"checksum must be a non-empty vector, got shape {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"checksum elements must be integers, got {arr.dtype}")
        arr = np.ascontiguousarray(arr.astype(np.int64))
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        if self.side not in _SIDES:
            raise ValueError(f"side must be one of {_SIDES}, got {self.side!r}")

    def __len__(self) -> int:
        return self.data.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, ChecksumVector):
            return NotImplemented
        return self.side == other.side and np.array_equal(self.data, other.data)


def gemm(w: QuantMatrix, x: QuantMatrix) -> AccumMatrix:
    """Exact INT8 x INT8 -> INT32 matrix product.

    Accumulation happens in int64 and is cast down; the MAX_INNER_DIM bound
    guarantees the result fits INT32, so the cast never wraps.
    """
    if w.cols != x.rows:
        raise ValueError(f"inner dimensions differ: {w.cols} vs {x.rows}")
    if w.cols > MAX_INNER_DIM:
        raise ValueError(f"inner dimension {w.cols} exceeds {MAX_INNER_DIM}")
    y = w.data.astype(np.int64) @ x.data.astype(np.int64)
    return AccumMatrix(y.astype(np.int32))


def checksum(m: QuantMatrix | AccumMatrix, side: str = ROW) -> ChecksumVector:
    """Exact column sums (side="row") or row sums (side="column") in int64."""
    if side not in _SIDES:
        raise ValueError(f"side must be one of {_SIDES}, got {side!r}")
    axis = 0 if side == ROW else 1
    return ChecksumVector(m.data.sum(axis=axis, dtype=np.int64), side=side)


def predicted_output_checksum(w: QuantMatrix, x: QuantMatrix) -> ChecksumVector:
    """Checksum row of W @ X computed from the inputs only: (e^T W) X.

    This is the quantity a checksum-extended array computes on the side; a
    fault in the main GEMM leaves it untouched, so comparing it against the
    observed checksum of the (possibly faulted) output isolates the fault.
    """
    if w.cols != x.rows:
        raise ValueError(f"inner dimensions differ: {w.cols} vs {x.rows}")
    wsum = w.data.sum(axis=0, dtype=np.int64)
    return ChecksumVector(wsum @ x.data.astype(np.int64), side=ROW)


def predicted_column_checksum(w: QuantMatrix, x: QuantMatrix) -> ChecksumVector:
    """Checksum column of W @ X computed from the inputs only: W (X e)."""
    if w.cols != x.rows:
        raise ValueError(f"inner dimensions differ: {w.cols} vs {x.rows}")
    xsum = x.data.sum(axis=1, dtype=np.int64)
    return ChecksumVector(w.data.astype(np.int64) @ xsum, side=COLUMN)


def total_checksum(w: QuantMatrix, x: QuantMatrix) -> int:
    """Scalar checksum of W @ X from the inputs only: (e^T W)(X e)."""
    if w.cols != x.rows:
        raise ValueError(f"inner dimensions differ: {w.cols} vs {x.rows}")
    wsum = w.data.sum(axis=0, dtype=np.int64)
    xsum = x.data.sum(axis=1, dtype=np.int64)
    return int(wsum @ xsum)


# --- plain-text matrix exchange format --------------------------------------
#
# First whitespace-separated token pair: rows cols. Then rows*cols integers
# in row-major order. Any whitespace (spaces, newlines) separates tokens.


def parse_matrix_text(text: str) -> np.ndarray:
    tokens = text.split()
    if len(tokens) < 2:
        raise ValueError("matrix text needs a 'rows cols' header")
    try:
        rows, cols = int(tokens[0]), int(tokens[1])
    except ValueError:
        raise ValueError(
            f"matrix header must be two integers, got {tokens[0]!r} {tokens[1]!r}"
        ) from None
    if rows <= 0 or cols <= 0:
        raise ValueError(f"matrix dimensions must be positive, got {rows}x{cols}")
    body = tokens[2:]
    if len(body) != rows * cols:
        raise ValueError(
            f"expected {rows * cols} elements for a {rows}x{cols} matrix, "
            f"got {len(body)}"
        )
    try:
        values = np.array([int(t) for t in body], dtype=np.int64)
    except ValueError as e:
        raise ValueError(f"non-integer matrix element: {e}") from None
    return values.reshape(rows, cols)


def format_matrix_text(data: np.ndarray) -> str:
    rows, cols = data.shape
    lines = [f"{rows} {cols}"]
    for r in range(rows):
        lines.append(" ".join(str(int(v)) for v in data[r]))
    return "\n".join(lines) + "\n"
