import numpy as np
import pytest

from hysid.errors import HysidError
from hysid.metrics import (
    MetricsReport,
    SwitchReport,
    match_switches,
    rmse,
    toggle_indices,
)


def test_rmse_basic_and_validation():
    assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(np.sqrt(12.5))
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    with pytest.raises(HysidError):
        rmse([1.0], [1.0, 2.0])


def test_toggle_indices():
    np.testing.assert_array_equal(
        toggle_indices([0, 0, 1, 1, 0, 1]), [2, 4, 5]
    )
    assert toggle_indices([1, 1, 1]).size == 0


def test_match_switches_exact_and_offset():
    report = match_switches([10, 50, 90], [11, 50, 94])
    assert report.matched == ((10, 11), (50, 50), (90, 94))
    assert report.errors == (1, 0, 4)
    assert report.max_abs_error == 4
    assert report.missed == () and report.spurious == ()


def test_match_switches_missed_and_spurious():
    report = match_switches([10, 60], [12, 100])
    assert report.matched == ((10, 12),)
    assert report.missed == (60,)
    assert report.spurious == (100,)


def test_match_switches_window_and_greedy_nearest():
    # two candidates inside the window: the nearer one wins
    report = match_switches([20], [24, 21])
    assert report.matched == ((20, 21),)
    assert report.spurious == (24,)
    # outside the +-5 window nothing matches
    report = match_switches([20], [26])
    assert report.missed == (20,) and report.spurious == (26,)


def test_metrics_report_serialization():
    sw = SwitchReport(((1, 2),), (), (9,))
    rep = MetricsReport(
        rmse_scaled=0.5,
        rmse_raw=0.1,
        switch=sw,
        active_terms={"h": 3},
        library_columns=18,
    )
    doc = rep.to_dict()
    assert doc["switch"]["errors"] == [1]
    assert doc["active_terms"] == {"h": 3}
    with pytest.raises(HysidError):
        MetricsReport(
            rmse_scaled=-1.0,
            rmse_raw=0.0,
            switch=sw,
            active_terms={},
            library_columns=0,
        )
