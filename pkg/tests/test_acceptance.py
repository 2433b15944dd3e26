"""Acceptance gate: one test per top-level behavioral guarantee.

Every test here states its tolerance and runtime budget inline.  The
conftest hook prints one PASS/FAIL verdict line per test at the end of
the session.  The synthetic market study (500 trading days, 3
instruments, two scoring models, 10 training seeds) is built once and
shared by the heavy tests.
"""
from __future__ import annotations

import math
import time
from math import fsum
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

from bondlab import market_data, news_corpus, sentiment, synthetic
from bondlab.cli import main as cli_main
from bondlab.event_study import align, directional_accuracy
from bondlab.forecaster import (
    HyperParams,
    TrainSettings,
    build_windows,
    scaler_leakage_probe,
    test_errors as forecast_errors,
    train,
)
from bondlab.lstm import init_params, lstm_backward, lstm_forward
from bondlab.sentiment import detect_shocks, ndi, ndi_with_flag
from bondlab.stats import dm_test, newey_west_variance, pearson

from conftest import make_series

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

INSTRUMENTS = ("UKT2Y", "UKT10Y", "UKT30Y")
MODELS = ("signal", "permuted")
STUDY_HP = HyperParams(hidden_size=24, num_layers=1, dropout=0.0,
                       learning_rate=1e-2, weight_decay=1e-6,
                       history_length=10)
STUDY_SETTINGS = TrainSettings(max_epochs=150, patience=20, batch_size=32)
STUDY_SEEDS = range(10)


# ---------------------------------------------------------------------------
# shared synthetic study
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def market(tmp_path_factory):
    """Generator output round-tripped through the real ingest path."""
    out = tmp_path_factory.mktemp("market")
    bundle = synthetic.generate(synthetic.SyntheticConfig())
    paths = synthetic.write_bundle(bundle, out)
    calendar = bundle.calendar
    result = market_data.ingest_trades(paths["trades"], calendar)
    bars_map = market_data.bars_by_instrument(
        market_data.daily_aggregate(result.records, calendar))
    raw = news_corpus.read_articles_jsonl(paths["articles"])
    articles, _ = news_corpus.clean_corpus(raw, ("football",), calendar)
    index = {a.article_id: a for a in articles}
    series = {}
    for model, key in (("signal", "probabilities_signal"),
                       ("permuted", "probabilities_permuted")):
        chunks = sentiment.load_chunk_probabilities(paths[key])
        series[model] = sentiment.daily_series(
            sentiment.score_articles(chunks, index), model, None)
    return SimpleNamespace(calendar=calendar, bars_map=bars_map, series=series)


@pytest.fixture(scope="module")
def forecast_study(market):
    """Train signal and permuted forecasters per instrument over 10 seeds."""
    started = time.monotonic()
    datasets = {
        (inst, model): build_windows(market.bars_map[inst],
                                     market.series[model],
                                     STUDY_HP.history_length)
        for inst in INSTRUMENTS for model in MODELS
    }
    per_seed = []
    seed0_errors = {}
    for seed in STUDY_SEEDS:
        means = {}
        for model in MODELS:
            nrmse, ic = [], []
            for inst in INSTRUMENTS:
                dataset = datasets[(inst, model)]
                run = train(dataset, STUDY_HP, seed=seed,
                            settings=STUDY_SETTINGS)
                assert run.status == "ok", f"{inst}/{model} seed {seed} failed"
                nrmse.append(run.metrics.nrmse)
                ic.append(run.metrics.ic)
                if seed == 0:
                    seed0_errors[(inst, model)] = list(
                        forecast_errors(run, dataset))
            means[model] = (fsum(nrmse) / len(nrmse), fsum(ic) / len(ic))
        per_seed.append(means)
    dm_by_instrument = {
        inst: dm_test(seed0_errors[(inst, "signal")],
                      seed0_errors[(inst, "permuted")])
        for inst in INSTRUMENTS
    }
    return SimpleNamespace(
        datasets=datasets,
        per_seed=per_seed,
        dm=dm_by_instrument,
        elapsed=time.monotonic() - started,
    )


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def test_ndi_exactness():
    """Antisymmetry, scale invariance, boundary values to 1e-12; 10,000
    random valid probability pairs stay in [-1, 1].  Budget: < 1 s."""
    started = time.monotonic()

    assert abs(ndi(0.6, 0.2) - 0.5) <= 1e-12
    for p in (1e-9, 0.25, 0.5):
        assert abs(ndi(p, p)) <= 1e-12
    assert abs(ndi(0.3, 0.0) - 1.0) <= 1e-12
    score, degenerate = ndi_with_flag(0.0, 0.0)
    assert score == 0.0 and degenerate

    rng = np.random.default_rng(9)
    pairs = rng.uniform(0.0, 1.0, size=(10_000, 2))
    scales = rng.uniform(0.01, 100.0, size=10_000)
    for (a, b), k in zip(pairs, scales):
        s = ndi(a, b)
        assert -1.0 <= s <= 1.0
        assert abs(ndi(b, a) + s) <= 1e-12
        assert abs(ndi(k * a, k * b) - s) <= 1e-12

    assert time.monotonic() - started < 1.0


def brute_force_flags(scores, percentile):
    """Sort-based linear-interpolation threshold oracle."""
    ordered = sorted(scores)
    n = len(ordered)

    def pct(q):
        h = (n - 1) * q / 100.0
        lo, hi = math.floor(h), math.ceil(h)
        if lo == hi:
            return ordered[lo]
        return ordered[lo] + (h - lo) * (ordered[hi] - ordered[lo])

    lower, upper = pct(percentile), pct(100.0 - percentile)
    if lower == upper:
        return [0] * n
    return [1 if s >= upper else (-1 if s <= lower else 0) for s in scores]


def test_shock_flags_match_brute_force_oracle():
    """detect_shocks equals a sort-based oracle on 500 random series of
    lengths 10-200, exactly.  Budget: < 10 s."""
    started = time.monotonic()
    rng = np.random.default_rng(5)
    for _ in range(500):
        n = int(rng.integers(10, 201))
        scores = np.clip(rng.normal(0.0, 0.5, n), -0.99, 0.99)
        if rng.random() < 0.3:
            scores = np.round(scores, 1)   # force ties at the thresholds
        percentile = float(rng.uniform(1.0, 49.0))
        flagged = detect_shocks(make_series(list(scores)), percentile)
        assert list(flagged.shock_flags) == brute_force_flags(
            list(scores), percentile)
    assert time.monotonic() - started < 10.0


def _variance_oracle(d):
    n = len(d)
    mean = math.fsum(d) / n
    centered = [v - mean for v in d]
    return math.fsum(c * c for c in centered) / n


def _nw_oracle(d, lag):
    arr = np.asarray(d, dtype=float)
    n = arr.size
    centered = arr - arr.mean()
    total = float(np.dot(centered, centered))
    for j in range(1, lag + 1):
        gamma = float(np.dot(centered[j:], centered[:-j]))
        total += 2.0 * (1.0 - j / (lag + 1.0)) * gamma
    return total / n


def test_pearson_and_newey_west_match_direct_formulas():
    """Match independent direct-formula implementations to 1e-10 on 200
    random series; NW at lag 0 equals the 1/n sample variance exactly."""
    rng = np.random.default_rng(11)
    worst_pearson = worst_nw = 0.0
    for _ in range(200):
        n = int(rng.integers(10, 300))
        x = rng.normal(size=n)
        y = 0.5 * x + rng.normal(size=n)
        expected = float(np.corrcoef(x, y)[0, 1])
        worst_pearson = max(worst_pearson,
                            abs(pearson(list(x), list(y)) - expected))

        d = list(rng.normal(size=n) + rng.uniform(-1.0, 1.0))
        lag = int(rng.integers(0, min(8, n - 1)))
        worst_nw = max(worst_nw,
                       abs(newey_west_variance(d, lag) - _nw_oracle(d, lag)))
        assert newey_west_variance(d, 0) == _variance_oracle(d)
    assert worst_pearson < 1e-10
    assert worst_nw < 1e-10


def test_dm_test_sanity_and_power():
    """Antisymmetry exact; identical errors degenerate with p=1; under a
    planted accuracy gap (n=500, 50 seeds) the null is rejected at 5% in
    >= 90% of seeds, and under the null in <= 10%."""
    rng = np.random.default_rng(2024)
    for _ in range(20):
        e1 = list(rng.normal(size=60))
        e2 = list(rng.normal(size=60) * rng.uniform(0.5, 2.0))
        forward = dm_test(e1, e2)
        reverse = dm_test(e2, e1)
        assert forward.dm_stat == -reverse.dm_stat
        assert forward.p_value == reverse.p_value

    same = list(rng.normal(size=50))
    degenerate = dm_test(same, list(same))
    assert degenerate.degenerate
    assert degenerate.dm_stat == 0.0 and degenerate.p_value == 1.0

    rejections_gap = rejections_null = 0
    for seed in range(50):
        r = np.random.default_rng(seed)
        base = list(r.normal(size=500))
        worse = list(r.normal(size=500) * 1.2)
        null = list(r.normal(size=500))
        rejections_gap += dm_test(base, worse).p_value < 0.05
        rejections_null += dm_test(base, null).p_value < 0.05
    assert rejections_gap >= 45
    assert rejections_null <= 5


def test_lstm_gradients_match_finite_differences():
    """Max relative error vs central finite differences < 1e-4 across all
    parameter tensors; 20 seeded runs over hidden {4, 8} x layers {1, 2}.
    Budget: < 60 s."""
    started = time.monotonic()
    eps = 1e-5
    worst = 0.0
    seed = 0
    for hidden in (4, 8):
        for layers in (1, 2):
            for _ in range(5):
                params = init_params(3, hidden, layers, 0.0,
                                     np.random.default_rng(seed))
                data_rng = np.random.default_rng(1000 + seed)
                x = data_rng.normal(size=(4, 6, 3))
                targets = data_rng.normal(size=4)
                grads = lstm_backward(lstm_forward(params, x), targets)

                for name, tensor in params.tensors():
                    gradient = grads[name].reshape(-1)
                    flat = tensor.reshape(-1)
                    numeric = np.empty_like(gradient)
                    for idx in range(flat.size):
                        original = flat[idx]
                        flat[idx] = original + eps
                        up = float(np.sum(
                            (lstm_forward(params, x).predictions - targets) ** 2))
                        flat[idx] = original - eps
                        down = float(np.sum(
                            (lstm_forward(params, x).predictions - targets) ** 2))
                        flat[idx] = original
                        numeric[idx] = (up - down) / (2.0 * eps)
                    # Per-element relative error; the denominator is floored
                    # at 1e-4 of the tensor's gradient scale so that
                    # central-difference roundoff on near-zero elements
                    # measures the check's noise, not the gradient.
                    scale = max(float(np.max(np.abs(numeric))),
                                float(np.max(np.abs(gradient))), 1e-8)
                    denom = np.maximum(
                        np.maximum(np.abs(numeric), np.abs(gradient)),
                        1e-4 * scale)
                    worst = max(worst,
                                float(np.max(np.abs(numeric - gradient) / denom)))
                seed += 1
    assert seed == 20
    assert worst < 1e-4
    assert time.monotonic() - started < 60.0


def test_pipeline_outputs_are_byte_deterministic(tmp_path):
    """The full six-command pipeline on the bundled fixtures, run twice
    with the same seed, produces byte-identical CSV outputs."""
    config = FIXTURES / "config.toml"
    assert config.is_file(), "bundled fixtures missing; run scripts/make_fixtures.py"
    commands = ("ingest", "score-aggregate", "events", "forecast", "dm", "report")
    outputs = []
    for label in ("first", "second"):
        out = tmp_path / label
        for command in commands:
            code = cli_main([command, "--config", str(config),
                             "--out", str(out)])
            assert code == 0, f"{command} ({label} run) exited {code}"
        outputs.append(out)

    first, second = outputs
    first_csvs = sorted(p.relative_to(first) for p in first.rglob("*.csv"))
    second_csvs = sorted(p.relative_to(second) for p in second.rglob("*.csv"))
    assert first_csvs == second_csvs
    assert len(first_csvs) >= 8
    for relative in first_csvs:
        assert (first / relative).read_bytes() == (second / relative).read_bytes(), \
            f"{relative} differs between identical runs"


def test_signal_model_beats_permuted_baseline(forecast_study):
    """With a planted inverse sentiment-to-next-day-return effect, the
    true-signal model achieves strictly lower mean nRMSE and strictly
    higher mean IC than the permuted baseline in >= 8 of 10 seeds, and
    the DM matrix flags >= 1 instrument at 5%.  Budget: < 15 min."""
    both_wins = 0
    for means in forecast_study.per_seed:
        nrmse_win = means["signal"][0] < means["permuted"][0]
        ic_win = means["signal"][1] > means["permuted"][1]
        both_wins += nrmse_win and ic_win
    assert both_wins >= 8, f"signal won both metrics in only {both_wins}/10 seeds"

    favoring = [inst for inst, result in forecast_study.dm.items()
                if result.significant_5pct and result.dm_stat < 0]
    assert favoring, f"no instrument significant at 5%: " \
        f"{ {i: round(r.p_value, 3) for i, r in forecast_study.dm.items()} }"
    assert forecast_study.elapsed < 900.0


def test_shock_day_directional_accuracy_separates_models(market):
    """Directional accuracy on shock days: the true-signal model exceeds
    0.5 with binomial p < 0.05, while the permuted baseline's 95% CI
    covers 0.5."""
    accuracy = {}
    for model in MODELS:
        flagged = detect_shocks(market.series[model], 10.0)
        pairs = []
        for inst in INSTRUMENTS:
            pairs.extend(align(flagged, market.bars_map[inst], market.calendar))
        accuracy[model] = directional_accuracy(pairs, shocks_only=True)

    signal = accuracy["signal"]
    assert signal.accuracy > 0.5
    assert signal.p_value < 0.05

    permuted = accuracy["permuted"]
    half_width = 1.96 * math.sqrt(
        permuted.accuracy * (1.0 - permuted.accuracy) / permuted.n_events)
    assert permuted.accuracy - half_width <= 0.5 <= permuted.accuracy + half_width


def test_scaler_leakage_probe_detects_full_data_fit(forecast_study):
    """Scalers fit on train-only vs all data are distinguished by the
    leakage probe on every dataset in the study."""
    for (inst, model), dataset in forecast_study.datasets.items():
        train_matches, full_differs = scaler_leakage_probe(dataset)
        assert train_matches, f"{inst}/{model}: stored scaler not train-fit"
        assert full_differs, f"{inst}/{model}: probe cannot separate " \
            "train-only from full-data statistics"
