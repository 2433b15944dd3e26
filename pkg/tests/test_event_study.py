import datetime as dt
import math

import numpy as np
import pytest

from bondlab.calendar import weekday_calendar
from bondlab.errors import InsufficientDataError, SchemaError
from bondlab.event_study import (
    REASON_INSUFFICIENT,
    REASON_ZERO_VARIANCE,
    AlignedPair,
    accuracy_table,
    align,
    correlation_grid,
    directional_accuracy,
    read_accuracy_csv,
    read_grid_csv,
    rolling_correlation,
    write_accuracy_csv,
    write_grid_csv,
)
from bondlab.sentiment import detect_shocks
from tests.conftest import make_bars, make_series

CAL = weekday_calendar(dt.date(2023, 1, 2), dt.date(2023, 12, 29))


def pair(day, sentiment, r_same, r_next, shock=0):
    return AlignedPair(dt.date(2023, 1, 2) + dt.timedelta(days=day),
                       sentiment, r_same, r_next, shock)


# --- align ---------------------------------------------------------------------

def test_align_inner_join_skips_first_bar():
    prices = [100.0, 100.5, 101.0, 100.8, 100.9]
    bars = make_bars(prices)
    series = make_series([0.1, 0.2, 0.3, 0.4, 0.5])
    pairs = align(series, bars, CAL)
    # first bar has no same-day return -> 4 pairs
    assert len(pairs) == 4
    assert pairs[0].date == bars[1].date
    assert pairs[0].sentiment == 0.2
    assert pairs[0].return_same == pytest.approx(math.log(100.5 / 100.0))
    assert pairs[0].return_next == pytest.approx(math.log(101.0 / 100.5))
    assert pairs[-1].return_next is None  # last bar has no successor


def test_align_survives_sentiment_gaps():
    bars = make_bars([100.0, 100.5, 101.0, 100.8])
    series = make_series([0.1, 0.2])  # only first two days
    pairs = align(series, bars, CAL)
    assert len(pairs) == 1  # day 2 only (day 1 is the return-less first bar)


def test_align_empty_intersection_names_both_ranges():
    bars = make_bars([100.0, 100.5, 101.0])
    series = make_series([0.1, 0.2, 0.3], start=dt.date(2023, 6, 5))
    with pytest.raises(InsufficientDataError) as err:
        align(series, bars, CAL)
    message = str(err.value)
    assert "2023-06" in message and "2023-01" in message


def test_align_rejects_unsorted_bars():
    bars = make_bars([100.0, 100.5])
    series = make_series([0.1, 0.2])
    with pytest.raises(SchemaError):
        align(series, list(reversed(bars)), CAL)


# --- rolling correlation ----------------------------------------------------------

def test_rolling_correlation_matches_numpy_on_smoothed_series():
    rng = np.random.default_rng(8)
    n = 60
    sentiment = rng.normal(0, 0.4, n)
    returns = 0.5 * sentiment + rng.normal(0, 0.2, n)
    pairs = [pair(i, float(sentiment[i]), float(returns[i]), 0.0) for i in range(n)]
    window = 7
    cell = rolling_correlation(pairs, window_days=window)

    kernel = np.ones(window) / window
    s_smooth = np.convolve(sentiment, kernel, mode="valid")
    r_smooth = np.convolve(returns, kernel, mode="valid")
    expected = float(np.corrcoef(s_smooth, r_smooth)[0, 1])
    assert cell.n == n - window + 1
    assert cell.r == pytest.approx(expected, abs=1e-12)
    assert cell.reason is None


def test_rolling_correlation_insufficient_points():
    pairs = [pair(i, 0.1 * i, 0.01 * i, 0.0) for i in range(8)]
    cell = rolling_correlation(pairs, window_days=7)  # only 2 full windows
    assert cell.r is None
    assert cell.reason == REASON_INSUFFICIENT
    assert cell.n == 2


def test_rolling_correlation_zero_variance():
    pairs = [pair(i, 0.5, 0.01 * ((-1) ** i), 0.0) for i in range(20)]
    cell = rolling_correlation(pairs, window_days=3)
    assert cell.r is None
    assert cell.reason == REASON_ZERO_VARIANCE


def test_rolling_correlation_shocks_only_filters():
    rng = np.random.default_rng(15)
    n = 40
    pairs = [pair(i, float(rng.normal()), float(rng.normal()), 0.0,
                  shock=1 if i % 3 == 0 else 0) for i in range(n)]
    full = rolling_correlation(pairs, window_days=5, shocks_only=False)
    shocked = rolling_correlation(pairs, window_days=5, shocks_only=True)
    assert shocked.n < full.n


def test_rolling_correlation_window_domain():
    with pytest.raises(ValueError):
        rolling_correlation([], window_days=1)


# --- directional accuracy -----------------------------------------------------------

def test_directional_accuracy_counts_and_exclusions():
    pairs = [
        pair(0, 0.5, 0.0, 0.01, shock=1),    # correct
        pair(1, -0.5, 0.0, -0.02, shock=-1),  # correct
        pair(2, 0.5, 0.0, -0.01, shock=1),   # wrong
        pair(3, 0.5, 0.0, None, shock=1),    # excluded: no next return
        pair(4, 0.5, 0.0, 0.0, shock=1),     # excluded: zero return
        pair(5, 0.0, 0.0, 0.01, shock=1),    # excluded: zero sentiment
        pair(6, 0.9, 0.0, 0.05, shock=0),    # not a shock: not a candidate
    ]
    result = directional_accuracy(pairs, shocks_only=True)
    assert result.n_events == 3
    assert result.n_excluded == 3
    assert result.accuracy == pytest.approx(2 / 3)
    assert result.n_events + result.n_excluded == 6


def test_directional_accuracy_pvalue_is_exact_binomial():
    pairs = [pair(i, 0.5, 0.0, 0.01 if i < 14 else -0.01, shock=1)
             for i in range(20)]
    result = directional_accuracy(pairs)
    expected = 2 * sum(math.comb(20, i) for i in range(14, 21)) / 2**20
    assert result.p_value == pytest.approx(expected, abs=1e-15)


def test_directional_accuracy_all_excluded_raises():
    with pytest.raises(InsufficientDataError):
        directional_accuracy([pair(0, 0.0, 0.0, 0.01, shock=1)])


# --- table builders -------------------------------------------------------------------

def _study_inputs(seed=0, n=80):
    rng = np.random.default_rng(seed)
    sentiment = np.clip(rng.normal(0, 0.4, n), -0.98, 0.98)
    prices = [100.0]
    for i in range(n - 1):
        prices.append(prices[-1] * math.exp(0.004 * sentiment[i] + rng.normal(0, 0.0008)))
    series_by_topic = {
        topic: detect_shocks(
            make_series(sentiment, model_id="m", topic=topic), 10.0
        )
        for topic in ("gilts", "inflation")
    }
    bars_map = {
        inst: make_bars(prices, instrument_id=inst) for inst in ("UKT2Y", "UKT10Y")
    }
    return list(series_by_topic.values()), bars_map


def test_correlation_grid_row_count_is_full_product():
    series_list, bars_map = _study_inputs()
    rows = correlation_grid(series_list, bars_map, CAL, window_days=5,
                            shocks_only=False)
    assert len(rows) == len(series_list) * len(bars_map)
    keys = {(r.topic, r.instrument, r.model) for r in rows}
    assert len(keys) == len(rows)


def test_correlation_grid_absent_cell_reason():
    series_list, bars_map = _study_inputs()
    flat = make_series([0.5] * 80, model_id="m", topic="flat")
    rows = correlation_grid([flat], bars_map, CAL, window_days=5, shocks_only=False)
    assert all(row.cell.r is None for row in rows)
    assert all(row.cell.reason == REASON_ZERO_VARIANCE for row in rows)


def test_accuracy_table_pools_instruments():
    series_list, bars_map = _study_inputs()
    rows = accuracy_table(series_list, bars_map, CAL, shocks_only=True)
    assert len(rows) == len(series_list)
    for row in rows:
        single = accuracy_table([s for s in series_list
                                 if s.topic == row.topic],
                                {"UKT2Y": bars_map["UKT2Y"]}, CAL)
        assert row.result.n_events > single[0].result.n_events


def test_grid_csv_round_trip(tmp_path):
    series_list, bars_map = _study_inputs()
    rows = correlation_grid(series_list, bars_map, CAL, window_days=5)
    path = tmp_path / "grid.csv"
    write_grid_csv(rows, path)
    assert read_grid_csv(path) == rows


def test_accuracy_csv_round_trip(tmp_path):
    series_list, bars_map = _study_inputs()
    rows = accuracy_table(series_list, bars_map, CAL)
    path = tmp_path / "accuracy.csv"
    write_accuracy_csv(rows, path)
    back = read_accuracy_csv(path)
    assert [(r.topic, r.model) for r in back] == [(r.topic, r.model) for r in rows]
    for a, b in zip(back, rows):
        assert a.result.accuracy == pytest.approx(b.result.accuracy, abs=1e-15)
        assert a.result.p_value == pytest.approx(b.result.p_value, abs=1e-15)
        assert a.result.n_events == b.result.n_events
