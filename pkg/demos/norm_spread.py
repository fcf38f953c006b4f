"""How normalization layers smear one corrupted value across a vector.

A single large additive error in one lane of a hidden state is harmless to
every other lane until a normalization layer divides by a statistic of the
whole vector. After layer_norm or rms_norm the error has shifted every
output; with no normalization it stays put. The table below sweeps error
magnitude and reports the fraction of lanes changed (beyond a 1% relative
tolerance) plus the largest relative change.
"""
from __future__ import annotations

from statabft.resilience import NormPipelineConfig, norm_amplification

MAGNITUDES = [2.0**e for e in (4, 8, 12, 15, 18)]
KINDS = ("none", "rms_norm", "layer_norm")


def main() -> None:
    print("4096-lane synthetic hidden state, error planted at index 100, seed 0")
    print(f"\n{'error':>10}", end="")
    for kind in KINDS:
        print(f" | {kind + ' frac':>16} {'max rel':>12}", end="")
    print()
    for mag in MAGNITUDES:
        print(f"{mag:>10.0f}", end="")
        for kind in KINDS:
            r = norm_amplification(
                NormPipelineConfig(norm_kind=kind, seed=0),
                error_mag=mag,
                error_index=100,
            )
            print(f" | {r.changed_fraction:>16.6f} {r.max_rel_change:>12.4g}", end="")
        print()

    print(
        "\nWith norm_kind='none' the changed fraction is pinned at "
        f"1/4096 = {1 / 4096:.6f}: the fault never leaves its lane."
    )
    print(
        "Both normalizations push it toward 1.0, which is why a detector "
        "guarding a pre-norm GEMM cannot ignore large-magnitude errors."
    )


if __name__ == "__main__":
    main()
