"""Command-line entry point.

Subcommands: verify, calibrate, compare, sweep, inject. Global flags:
--config PATH, --seed N, --out DIR, --format csv|json. Exit codes: 0 on
success, 1 when the experiment itself fails (a verification check fails, no
boundary can be fitted), 2 for configuration or environment problems.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .calibration import (
    GridCellError,
    NoBoundaryError,
    fit_critical_region,
    grid_to_csv,
    norm_distortion_oracle,
    planted_step_oracle,
    quality_grid,
)
from .config import ConfigError, ExperimentConfig, load_config, override_seed, resolved_dict
from .detectors import ChecksumPair, save_params
from .energy import compare_detectors, energy_saving, sweep_detectors
from .faults import TableFormatError
from .gemm import AccumMatrix
from .rng import derive_seed
from .systolic import run_array
from .verify import run_checks
from .workloads import workload_matrices


def _jsonable(v):
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return _jsonable(float(v))
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.10g}"
    return str(v)


def _write_text(path: str, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)


def _write_table(out_dir: str, name: str, fmt: str, header: list[str], rows: list[list]) -> str:
    if fmt == "json":
        path = os.path.join(out_dir, f"{name}.json")
        docs = [dict(zip(header, _jsonable(list(r)))) for r in rows]
        _write_text(path, json.dumps(docs, indent=2) + "\n")
    else:
        path = os.path.join(out_dir, f"{name}.csv")
        lines = [",".join(header)]
        lines += [",".join(_fmt(v) for v in r) for r in rows]
        _write_text(path, "\n".join(lines) + "\n")
    return path


def _prepare_out(cfg: ExperimentConfig, command: str, out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    echo = {"version": __version__, "command": command, "config": resolved_dict(cfg)}
    _write_text(
        os.path.join(out_dir, "resolved_config.json"),
        json.dumps(_jsonable(echo), indent=2) + "\n",
    )
    return out_dir


def cmd_verify(cfg: ExperimentConfig, args) -> int:
    results = run_checks(
        cases=args.cases, seed=cfg.workload.seed, planted_failure=args.planted_failure
    )
    width = max(len(r.name) for r in results) + 2
    for r in results:
        line = f"{r.name:<{width}} cases={r.cases:<6} {'PASS' if r.passed else 'FAIL'}"
        if not r.passed:
            line += f"  ({r.detail})"
        print(line)
    failed = [r for r in results if not r.passed]
    if args.out_dir:
        out = _prepare_out(cfg, "verify", args.out_dir)
        _write_table(
            out,
            "verify_report",
            cfg.output_format,
            ["check", "cases", "passed", "detail"],
            [[r.name, r.cases, r.passed, r.detail] for r in results],
        )
    if failed:
        print(f"{len(failed)} of {len(results)} checks failed", file=sys.stderr)
        return 1
    print(f"all {len(results)} checks passed")
    return 0


def _make_oracle(cfg: ExperimentConfig):
    cal = cfg.calibrate
    if cal.oracle == "planted":
        return planted_step_oracle(cal.planted)
    return norm_distortion_oracle(cal.norm_kind)


def cmd_calibrate(cfg: ExperimentConfig, args) -> int:
    cal = cfg.calibrate
    rows, cols = cal.target_rows, cal.target_cols

    def factory(seed: int) -> AccumMatrix:
        return AccumMatrix(np.zeros((rows, cols), dtype=np.int32))

    grid = quality_grid(
        _make_oracle(cfg),
        cal.mag_log2_axis,
        cal.freq_axis,
        epsilon=cal.epsilon,
        trials=cal.trials,
        seed=cfg.workload.seed,
        clean_factory=factory,
    )
    params = fit_critical_region(grid)

    out = _prepare_out(cfg, "calibrate", args.out_dir or cfg.output_dir)
    _write_text(os.path.join(out, "grid.csv"), grid_to_csv(grid))
    provenance = (
        f"statabft {__version__} calibrate oracle={cal.oracle} "
        f"seed={cfg.workload.seed} epsilon={cal.epsilon} trials={cal.trials}"
    )
    save_params(params, os.path.join(out, "params.json"), provenance=provenance)
    print(
        f"fitted a={params.a:.4f} b={params.b:.4f} theta_freq={params.theta_freq} "
        f"-> {os.path.join(out, 'params.json')}"
    )
    return 0


def cmd_compare(cfg: ExperimentConfig, args) -> int:
    rows = compare_detectors(
        cfg.workload,
        cfg.detector_specs(),
        cfg.fault,
        trials=cfg.workload.gemm_count,
        seed=cfg.fault.seed,
        stat=cfg.stat_unit,
    )
    out = _prepare_out(cfg, "compare", args.out_dir or cfg.output_dir)
    header = [
        "detector",
        "trials",
        "recovery_rate",
        "undetected_critical_rate",
        "mean_freq_eff",
        "mean_msd",
    ]
    table = [
        [r.detector, r.trials, r.recovery_rate, r.undetected_critical_rate,
         r.mean_freq_eff, r.mean_msd]
        for r in rows
    ]
    path = _write_table(out, "detectors", cfg.output_format, header, table)
    for r in rows:
        print(
            f"{r.detector:<12} recovery_rate={r.recovery_rate:.4f} "
            f"undetected_critical={r.undetected_critical_rate:.4f} "
            f"mean_freq_eff={r.mean_freq_eff:.3f} mean_msd={r.mean_msd:.4g}"
        )
    print(f"wrote {path}")
    return 0


def cmd_sweep(cfg: ExperimentConfig, args) -> int:
    results = sweep_detectors(
        cfg.workload,
        cfg.detector_specs(),
        cfg.voltages(),
        cfg.energy,
        trials=cfg.sweep_trials,
        seed=cfg.fault.seed,
        stat=cfg.stat_unit,
        bit_window=cfg.fault.bit_window,
    )
    out = _prepare_out(cfg, "sweep", args.out_dir or cfg.output_dir)
    header = [
        "voltage",
        "ber",
        "recovery_rate",
        "energy_total",
        "latency_factor",
        "quality_proxy",
        "detector",
    ]
    rows = []
    for res in results.values():
        for p in res.points:
            rows.append(
                [p.voltage, p.ber, p.recovery_rate, p.energy_total,
                 p.latency_factor, p.quality_proxy, p.detector]
            )
    for res in results.values():
        p = res.optimum
        rows.append(
            [p.voltage, p.ber, p.recovery_rate, p.energy_total,
             p.latency_factor, p.quality_proxy, f"{p.detector}_optimum"]
        )
    path = _write_table(out, "sweep", cfg.output_format, header, rows)

    classical = results.get("classical")
    summary_rows = []
    for label, res in results.items():
        p = res.optimum
        saving = energy_saving(res, classical) if classical else math.nan
        summary_rows.append(
            [label, p.voltage, p.ber, p.recovery_rate, p.energy_total,
             p.latency_factor, p.quality_proxy, saving]
        )
        msg = (
            f"{label:<12} optimum v={p.voltage:.3f} energy={p.energy_total:.4g} "
            f"recovery_rate={p.recovery_rate:.4f}"
        )
        if classical and label != "classical":
            msg += f" saving_vs_classical={100 * saving:.1f}%"
        print(msg)
    _write_table(
        out,
        "sweep_summary",
        cfg.output_format,
        ["detector", "opt_voltage", "ber", "recovery_rate", "energy_total",
         "latency_factor", "quality_proxy", "energy_saving_vs_classical"],
        summary_rows,
    )
    print(f"wrote {path}")
    return 0


def cmd_inject(cfg: ExperimentConfig, args) -> int:
    spec = cfg.workload
    if not (0 <= args.index < spec.gemm_count):
        raise ConfigError(f"--index must be in [0, {spec.gemm_count}), got {args.index}")
    w, x = workload_matrices(spec, args.index)
    fault = replace(cfg.fault, seed=derive_seed(cfg.fault.seed, 900, args.index))
    sim = run_array(w, x, fault=fault, stat=cfg.stat_unit)
    pair = ChecksumPair.from_vectors(sim.predicted, sim.observed)
    verdicts = {d.kind: d.evaluate(pair) for d in cfg.detector_specs()}

    doc = {
        "version": __version__,
        "gemm_index": args.index,
        "shape": {"m": spec.m, "k": spec.k, "n": spec.n},
        "cycles": sim.cycles,
        "fault": resolved_dict(cfg)["fault"],
        "events": [
            {
                "row": e.row,
                "col": e.col,
                "before": e.before,
                "after": e.after,
                "flipped_bits": list(e.flipped_bits),
            }
            for e in sim.events
        ],
        "predicted_checksum": sim.predicted.data,
        "observed_checksum": sim.observed.data,
        "diff": pair.diff,
        "stat_unit": {
            "detector": sim.verdict.detector,
            "msd": sim.verdict.msd,
            "theta_mag": sim.verdict.theta_mag,
            "freq_eff": sim.verdict.freq_eff,
            "decision": sim.verdict.decision,
        },
        "verdicts": {
            kind: {
                "msd": v.msd,
                "theta_mag": v.theta_mag,
                "freq_eff": v.freq_eff,
                "decision": v.decision,
            }
            for kind, v in verdicts.items()
        },
    }
    text = json.dumps(_jsonable(doc), indent=2) + "\n"
    if args.out_dir:
        out = _prepare_out(cfg, "inject", args.out_dir)
        path = os.path.join(out, "inject.json")
        _write_text(path, text)
        print(f"{len(sim.events)} events, verdict {sim.verdict.decision}; wrote {path}")
    else:
        print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="statabft",
        description="Statistical ABFT simulator for undervolted quantized GEMM arrays.",
    )
    parser.add_argument("--config", metavar="PATH", help="JSON experiment config")
    parser.add_argument("--seed", type=int, metavar="N", help="override workload and fault seeds")
    parser.add_argument("--out", dest="out_dir", metavar="DIR", help="output directory")
    parser.add_argument("--format", choices=["csv", "json"], help="tabular output format")
    parser.add_argument("--version", action="version", version=f"statabft {__version__}")

    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run randomized invariant checks")
    p_verify.add_argument("--cases", type=int, default=200, help="cases per check")
    p_verify.add_argument(
        "--planted-failure", action="store_true", help=argparse.SUPPRESS
    )
    p_verify.set_defaults(handler=cmd_verify)

    p_cal = sub.add_parser("calibrate", help="fit critical-region params from a quality grid")
    p_cal.set_defaults(handler=cmd_calibrate)

    p_cmp = sub.add_parser("compare", help="score all detectors on one faulted GEMM stream")
    p_cmp.set_defaults(handler=cmd_compare)

    p_sweep = sub.add_parser("sweep", help="voltage sweep with energy accounting")
    p_sweep.set_defaults(handler=cmd_sweep)

    p_inj = sub.add_parser("inject", help="single-GEMM injection dump (JSON)")
    p_inj.add_argument("--index", type=int, default=0, help="GEMM index in the stream")
    p_inj.set_defaults(handler=cmd_inject)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be >= 0")
            cfg = override_seed(cfg, args.seed)
        if args.format:
            cfg = replace(cfg, output_format=args.format)
        return args.handler(cfg, args)
    except (ConfigError, TableFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (NoBoundaryError, GridCellError) as e:
        print(f"experiment failed: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
