import json

import pytest

from statabft.config import (
    DEFAULT_FREQ_AXIS,
    DEFAULT_MAG_AXIS,
    DEFAULT_PARAMS,
    ConfigError,
    ExperimentConfig,
    load_config,
    override_seed,
    parse_config,
    resolved_dict,
)
from statabft.detectors import CriticalRegionParams, save_params


def test_empty_config_gives_stock_experiment():
    cfg = parse_config({})
    assert cfg.workload.m == cfg.workload.k == cfg.workload.n == 64
    assert cfg.workload.gemm_count == 100
    assert cfg.workload.distribution == "uniform"
    assert cfg.fault.mode == "ber" and cfg.fault.ber == 1e-6
    assert cfg.fault.bit_window == (16, 31)
    assert cfg.detector.kind == "statistical"
    assert cfg.detector.params == DEFAULT_PARAMS
    assert cfg.stat_unit.log2_mode == "exact" and cfg.stat_unit.frac_bits == 4
    assert cfg.energy.v_nom == 0.9
    assert cfg.sweep_voltages == ()
    assert cfg.sweep_trials == 200
    assert cfg.detector_set == ("none", "classical", "statistical", "dmr")
    assert cfg.calibrate.freq_axis == DEFAULT_FREQ_AXIS
    assert cfg.calibrate.mag_log2_axis == DEFAULT_MAG_AXIS
    assert cfg.output_dir == "out" and cfg.output_format == "csv"
    # without explicit sweep voltages, the table's own rows drive the sweep
    assert cfg.voltages() == tuple(float(v) for v in cfg.energy.table.voltages)


def test_unknown_keys_rejected_everywhere():
    with pytest.raises(ConfigError, match="<root>"):
        parse_config({"wrkload": {}})
    with pytest.raises(ConfigError, match="workload"):
        parse_config({"workload": {"rows": 4}})
    with pytest.raises(ConfigError, match="fault"):
        parse_config({"fault": {"rate": 0.1}})
    with pytest.raises(ConfigError, match="sweep"):
        parse_config({"sweep": {"volts": [0.8]}})


def test_schema_bounds_enforced():
    with pytest.raises(ConfigError, match="workload.m"):
        parse_config({"workload": {"m": 0}})
    with pytest.raises(ConfigError, match="fault.ber"):
        parse_config({"fault": {"ber": 1.5}})
    with pytest.raises(ConfigError, match="detector.params.a"):
        parse_config({"detector": {"params": {"a": 1.0, "b": 40, "theta_freq": 4}}})
    with pytest.raises(ConfigError, match="stat_unit.frac_bits"):
        parse_config({"stat_unit": {"frac_bits": 99}})


def test_fault_ber_xor_voltage():
    with pytest.raises(ConfigError, match="not both"):
        parse_config({"fault": {"ber": 1e-5, "voltage": 0.8}})
    cfg = parse_config({"fault": {"voltage": 0.8}})
    expected = cfg.energy.table.ber_at(0.8)
    assert expected > 0
    assert cfg.fault.ber == pytest.approx(expected)
    with pytest.raises(ConfigError, match="fault.voltage"):
        parse_config({"fault": {"voltage": 0.3}})


def test_detector_params_inline_and_file(tmp_path):
    doc = {"detector": {"kind": "statistical", "params": {"a": 1.9, "b": 38.5, "theta_freq": 3}}}
    cfg = parse_config(doc)
    assert cfg.detector.params == CriticalRegionParams(a=1.9, b=38.5, theta_freq=3)
    assert cfg.params_provenance == ""

    p = tmp_path / "params.json"
    save_params(CriticalRegionParams(a=2.1, b=41.0, theta_freq=5), str(p), "calibrated on grid 7")
    cfg2 = parse_config({"detector": {"params_file": "params.json"}}, base_dir=str(tmp_path))
    assert cfg2.detector.params == CriticalRegionParams(a=2.1, b=41.0, theta_freq=5)
    assert cfg2.params_provenance == "calibrated on grid 7"
    # stat unit inherits the loaded params
    assert cfg2.stat_unit.params == cfg2.detector.params

    with pytest.raises(ConfigError, match="not both"):
        parse_config(
            {"detector": {"params": {"a": 2, "b": 40, "theta_freq": 4}, "params_file": "x"}}
        )
    with pytest.raises(ConfigError, match="no such file"):
        parse_config({"detector": {"params_file": "missing.json"}}, base_dir=str(tmp_path))


def test_table_file_resolution(tmp_path):
    table_csv = "voltage,ber\n0.9,0\n0.7,1e-6\n0.5,1e-3\n"
    (tmp_path / "table.csv").write_text(table_csv)
    cfg = parse_config({"energy": {"table_file": "table.csv"}}, base_dir=str(tmp_path))
    assert cfg.energy.table.ber_at(0.9) == 0.0
    assert cfg.energy.table.ber_at(0.5) == 1e-3
    assert cfg.voltages() == (0.9, 0.7, 0.5)

    (tmp_path / "bad.csv").write_text("voltage,ber\n0.5,1e-3\n0.9,0\n")
    with pytest.raises(ConfigError, match="table_file"):
        parse_config({"energy": {"table_file": "bad.csv"}}, base_dir=str(tmp_path))
    with pytest.raises(ConfigError, match="no such file"):
        parse_config({"energy": {"table_file": "nope.csv"}}, base_dir=str(tmp_path))


def test_sweep_voltages_explicit_and_range():
    cfg = parse_config({"sweep": {"voltages": [0.7, 0.9, 0.8]}})
    # normalized to descending order
    assert cfg.sweep_voltages == (0.9, 0.8, 0.7)
    assert cfg.voltages() == (0.9, 0.8, 0.7)

    cfg = parse_config({"sweep": {"v_min": 0.6, "v_max": 0.9, "v_step": 0.1}})
    assert cfg.sweep_voltages == (0.9, 0.8, 0.7, 0.6)

    with pytest.raises(ConfigError, match="either voltages or"):
        parse_config({"sweep": {"voltages": [0.8], "v_min": 0.6, "v_max": 0.9, "v_step": 0.1}})
    with pytest.raises(ConfigError, match="missing"):
        parse_config({"sweep": {"v_min": 0.6, "v_max": 0.9}})
    with pytest.raises(ConfigError, match="v_min"):
        parse_config({"sweep": {"v_min": 0.9, "v_max": 0.6, "v_step": 0.1}})


def test_sweep_detector_set():
    cfg = parse_config({"sweep": {"detectors": ["classical", "statistical"]}})
    assert cfg.detector_set == ("classical", "statistical")
    specs = cfg.detector_specs()
    assert [s.kind for s in specs] == ["classical", "statistical"]
    assert specs[1].params == DEFAULT_PARAMS
    with pytest.raises(ConfigError, match="unique"):
        parse_config({"sweep": {"detectors": ["none", "none"]}})


def test_msd_detector_threshold_plumbed():
    cfg = parse_config({"detector": {"kind": "msd", "msd_threshold": 4096},
                        "sweep": {"detectors": ["msd"]}})
    (spec,) = cfg.detector_specs()
    assert spec.kind == "msd" and spec.msd_threshold == 4096


def test_calibrate_axes_validation():
    with pytest.raises(ConfigError, match="freq_axis"):
        parse_config({"calibrate": {"freq_axis": [1, 1, 2]}})
    with pytest.raises(ConfigError, match="mag_log2_axis"):
        parse_config({"calibrate": {"mag_log2_axis": [5.0, 4.0]}})
    # max freq must fit in the injection target
    with pytest.raises(ConfigError, match="exceeds injection target"):
        parse_config({"calibrate": {"freq_axis": [1, 300], "target_rows": 16, "target_cols": 16}})
    cfg = parse_config(
        {"calibrate": {"freq_axis": [1, 300], "target_rows": 32, "target_cols": 16}}
    )
    assert cfg.calibrate.freq_axis == (1, 300)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(str(tmp_path / "none.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="valid JSON"):
        load_config(str(bad))
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="root"):
        load_config(str(arr))
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"workload": {"m": 8, "k": 8, "n": 8}}))
    cfg = load_config(str(good))
    assert cfg.workload.m == 8


def test_override_seed_touches_both_streams():
    cfg = parse_config({"workload": {"seed": 1}, "fault": {"seed": 2}})
    out = override_seed(cfg, 77)
    assert out.workload.seed == 77
    assert out.fault.seed == 77
    # everything else untouched
    assert out.workload.m == cfg.workload.m
    assert out.detector == cfg.detector


def test_resolved_dict_round_trips_through_parse():
    doc = {
        "workload": {"m": 16, "k": 32, "n": 8, "seed": 5},
        "fault": {"mode": "ber", "ber": 2e-5, "seed": 9},
        "detector": {"kind": "statistical", "params": {"a": 2.2, "b": 39.0, "theta_freq": 6}},
        "sweep": {"voltages": [0.9, 0.7], "trials": 12},
        "output": {"format": "json"},
    }
    cfg = parse_config(doc)
    echo = resolved_dict(cfg)
    assert echo["workload"]["m"] == 16
    assert echo["fault"]["ber"] == 2e-5
    assert echo["detector"]["params"]["a"] == 2.2
    assert echo["sweep"]["voltages"] == [0.9, 0.7]
    assert echo["sweep"]["trials"] == 12
    assert echo["output"]["format"] == "json"
    # the echo is JSON-serializable and reparses to the same config
    again = parse_config(
        {
            "workload": echo["workload"],
            "fault": {k: v for k, v in echo["fault"].items()},
            "detector": {
                "kind": echo["detector"]["kind"],
                "params": echo["detector"]["params"],
                "msd_threshold": echo["detector"]["msd_threshold"],
            },
            "stat_unit": echo["stat_unit"],
            "sweep": {
                "voltages": echo["sweep"]["voltages"],
                "trials": echo["sweep"]["trials"],
                "detectors": echo["sweep"]["detectors"],
            },
            "output": echo["output"],
        }
    )
    assert again.workload == cfg.workload
    assert again.fault == cfg.fault
    assert again.detector == cfg.detector
    assert again.sweep_voltages == cfg.sweep_voltages
    json.dumps(echo)


def test_experiment_config_default_constructible():
    cfg = ExperimentConfig()
    assert cfg.detector.params == DEFAULT_PARAMS
    assert len(cfg.voltages()) == 16
