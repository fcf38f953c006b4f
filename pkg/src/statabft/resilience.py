"""How normalization layers spread a single numeric error across a vector.

A hidden state with a few large outliers dominates the mean/variance (or RMS)
statistics of its normalization layer. Corrupt one element enough to move
those statistics and every normalized output shifts, not just the corrupted
lane. This module builds synthetic hidden states with that structure and
measures the spread.

``changed_fraction`` uses the comparison form |after - before| > tol *
|before| rather than a division so zero baselines are handled without
special cases; ``max_rel_change`` divides but floors the denominator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORM_KINDS = ("layer_norm", "rms_norm", "none")

# relative-change threshold for counting an element as disturbed
CHANGE_TOL = 0.01
_EPS = 1e-6
_DENOM_FLOOR = 1e-12


@dataclass(frozen=True)
class NormPipelineConfig:
    """Synthetic hidden-state shape: Gaussian noise plus a few large outliers.

    ``outlier_value`` must dominate ``base_noise_scale`` by at least 10x so
    the outliers actually carry the normalization statistics.
    """

    dim: int = 4096
    outlier_count: int = 8
    outlier_value: float = 50.0
    base_noise_scale: float = 1.0
    norm_kind: str = "layer_norm"
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not (0 <= self.outlier_count < self.dim):
            raise ValueError(
                f"outlier_count must be in [0, dim), got {self.outlier_count}"
            )
        if self.base_noise_scale <= 0:
            raise ValueError("base_noise_scale must be > 0")
        if abs(self.outlier_value) < 10.0 * self.base_noise_scale:
            raise ValueError(
                "outlier_value must be >= 10x base_noise_scale "
                f"(got {self.outlier_value} vs {self.base_noise_scale})"
            )
        if self.norm_kind not in NORM_KINDS:
            raise ValueError(f"norm_kind must be one of {NORM_KINDS}")


def synthetic_hidden_state(cfg: NormPipelineConfig) -> np.ndarray:
    """Gaussian noise with ``outlier_count`` entries forced to outlier_value.

    Deterministic in cfg.seed: noise is drawn first, then outlier positions,
    both from one numpy Generator.
    """
    rng = np.random.default_rng(cfg.seed)
    v = rng.normal(0.0, cfg.base_noise_scale, cfg.dim)
    if cfg.outlier_count:
        pos = rng.choice(cfg.dim, size=cfg.outlier_count, replace=False)
        v[pos] = cfg.outlier_value
    return v


def layer_norm(v: np.ndarray, eps: float = _EPS) -> np.ndarray:
    """Zero-mean unit-variance normalization over the whole vector."""
    mu = v.mean()
    var = v.var()
    return (v - mu) / np.sqrt(var + eps)


def rms_norm(v: np.ndarray, eps: float = _EPS) -> np.ndarray:
    """Scale by the root-mean-square of the vector."""
    rms = np.sqrt(np.mean(v * v) + eps)
    return v / rms


def apply_norm(v: np.ndarray, kind: str) -> np.ndarray:
    if kind == "layer_norm":
        return layer_norm(v)
    if kind == "rms_norm":
        return rms_norm(v)
    if kind == "none":
        return v.copy()
    raise ValueError(f"norm_kind must be one of {NORM_KINDS}, got {kind!r}")


@dataclass(frozen=True)
class AmplificationResult:
    changed_fraction: float
    max_rel_change: float


def measure_change(before: np.ndarray, after: np.ndarray) -> AmplificationResult:
    """Fraction of elements moved > 1% relative, and the largest relative move."""
    delta = np.abs(after - before)
    changed = delta > CHANGE_TOL * np.abs(before)
    max_rel = float(np.max(delta / np.maximum(np.abs(before), _DENOM_FLOOR)))
    return AmplificationResult(
        changed_fraction=float(np.count_nonzero(changed)) / before.size,
        max_rel_change=max_rel,
    )


def norm_amplification(
    cfg: NormPipelineConfig, error_mag: float, error_index: int
) -> AmplificationResult:
    """Inject one additive error before normalization; measure spread after.

    With norm_kind="none" the error stays confined to its own lane: the
    changed fraction is exactly 1/dim for any error big enough to clear the
    1% threshold, and exactly 0 for error_mag == 0.
    """
    base = synthetic_hidden_state(cfg)
    if not (0 <= error_index < cfg.dim):
        raise ValueError(f"error_index {error_index} outside [0, {cfg.dim})")
    corrupted = base.copy()
    corrupted[error_index] += error_mag
    return measure_change(apply_norm(base, cfg.norm_kind), apply_norm(corrupted, cfg.norm_kind))
