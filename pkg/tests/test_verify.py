import numpy as np
import pytest

from statabft.verify import (
    ALL_CHECKS,
    _random_diff,
    check_ber_table,
    check_checksum_identities,
    check_lzc_band,
    check_stat_unit_reference,
    check_uniform_msd_relation,
    run_checks,
)


def test_all_checks_pass_on_healthy_build():
    results = run_checks(cases=60, seed=0)
    assert [r.name for r in results] == list(ALL_CHECKS)
    for r in results:
        assert r.passed, f"{r.name}: {r.detail}"
        assert r.cases > 0


def test_planted_failure_is_caught():
    results = run_checks(cases=30, seed=0, planted_failure=True)
    by_name = {r.name: r for r in results}
    assert not by_name["checksum-identities"].passed
    assert "identity broken" in by_name["checksum-identities"].detail
    # the plant only sabotages the checksum identity check
    for name in ALL_CHECKS[1:]:
        assert by_name[name].passed


def test_checks_are_seed_stable():
    a = run_checks(cases=25, seed=3)
    b = run_checks(cases=25, seed=3)
    assert a == b


def test_run_checks_rejects_bad_case_count():
    with pytest.raises(ValueError, match="cases"):
        run_checks(cases=0)


def test_random_diff_mixes_magnitudes():
    d = _random_diff(0, 4096)
    assert d.dtype == np.int64
    assert (d == 0).any()
    nz = np.abs(d[d != 0])
    assert nz.min() <= 127
    # the large band reaches past 2**40 via the shifted branch
    assert nz.max() > 2**40
    assert (d > 0).any() and (d < 0).any()


def test_individual_checks_report_case_counts():
    assert check_checksum_identities(7, 0).cases == 7
    assert check_stat_unit_reference(9, 1).cases == 9
    assert check_uniform_msd_relation(11, 2).cases == 11
    assert check_ber_table(13, 3).cases == 13
    assert check_lzc_band(17, 4).cases == 17
