"""Tests for the seeded hyperparameter search."""
from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bondlab.errors import TotalFailureError
from bondlab.forecaster import HyperParams, TrainSettings, train
from bondlab.hyperopt import (
    AdaptiveSampler,
    Dimension,
    HaltonSampler,
    SearchSpace,
    TrainingData,
    search,
    search_and_train,
    training_objective,
    trial_seed,
)

from conftest import make_bars, make_series


def planted_objective(hp: HyperParams, seed: int) -> tuple[float, str]:
    """Quadratic bowl with its optimum at hidden_size = 64."""
    return float((hp.hidden_size - 64) ** 2), "ok"


# --- dimensions ---------------------------------------------------------------------


def test_dimension_endpoints():
    hidden = Dimension("hidden_size", 8, 128, kind="int")
    assert hidden.from_unit(0.0) == 8
    assert hidden.from_unit(0.999999) == 128

    lr = Dimension("learning_rate", 1e-5, 1e-2, kind="log")
    assert lr.from_unit(0.0) == pytest.approx(1e-5)
    assert lr.from_unit(1.0) == pytest.approx(1e-2)

    drop = Dimension("dropout", 0.0, 0.5, kind="float")
    assert drop.from_unit(0.5) == pytest.approx(0.25)

    with pytest.raises(ValueError):
        Dimension("x", 0, 1, kind="squiggle").from_unit(0.5)


@given(st.floats(min_value=0.0, max_value=0.999999))
@settings(max_examples=60, deadline=None)
def test_dimension_int_mapping_stays_in_range(u):
    dim = Dimension("history_length", 5, 60, kind="int")
    value = dim.from_unit(u)
    assert isinstance(value, int)
    assert 5 <= value <= 60


def test_dimension_unit_round_trip():
    log_dim = Dimension("weight_decay", 1e-8, 1e-2, kind="log")
    for u in (0.0, 0.2, 0.5, 0.9):
        assert log_dim.to_unit(log_dim.from_unit(u)) == pytest.approx(u, abs=1e-12)
    int_dim = Dimension("num_layers", 1, 3, kind="int")
    for v in (1, 2, 3):
        assert int_dim.from_unit(int_dim.to_unit(v)) == v


def test_params_from_units_zeroes_dropout_for_single_layer():
    space = SearchSpace()
    # num_layers unit 0.0 -> 1 layer; dropout unit 0.9 would otherwise be 0.45
    hp = space.params_from_units([0.5, 0.0, 0.9, 0.5, 0.5, 0.5])
    assert hp.num_layers == 1
    assert hp.dropout == 0.0
    # with 3 layers the same dropout unit survives
    hp3 = space.params_from_units([0.5, 0.99, 0.9, 0.5, 0.5, 0.5])
    assert hp3.num_layers == 3
    assert hp3.dropout == pytest.approx(0.45)


# --- Halton sampler -----------------------------------------------------------------


def test_halton_proposals_depend_only_on_seed_and_index():
    space = SearchSpace()
    a = HaltonSampler(space, seed=3)
    b = HaltonSampler(space, seed=3)
    # propose out of order on one of them; index alone must decide the draw
    left = [a.propose(i) for i in (4, 0, 2, 1, 3)]
    right = [b.propose(i) for i in (0, 1, 2, 3, 4)]
    assert sorted(left, key=lambda hp: hp.learning_rate) == sorted(
        right, key=lambda hp: hp.learning_rate
    )
    assert a.propose(2) == b.propose(2)


def test_halton_rotation_varies_with_seed():
    space = SearchSpace()
    first = [HaltonSampler(space, seed=1).propose(i) for i in range(6)]
    second = [HaltonSampler(space, seed=2).propose(i) for i in range(6)]
    assert first != second


def test_halton_proposals_respect_bounds():
    space = SearchSpace(
        hidden_size=(8, 32),
        num_layers=(1, 2),
        dropout=(0.0, 0.3),
        learning_rate=(1e-4, 1e-2),
        weight_decay=(1e-7, 1e-3),
        history_length=(5, 20),
    )
    sampler = HaltonSampler(space, seed=9)
    for i in range(100):
        assert space.contains(sampler.propose(i))


# --- search mechanics ---------------------------------------------------------------


def test_search_prefix_property():
    short = search(planted_objective, budget=12, seed=17)
    long = search(planted_objective, budget=30, seed=17)
    assert long.trials[:12] == short.trials
    assert short.budget == 12 and long.budget == 30


def test_search_finds_planted_optimum():
    report = search(planted_objective, budget=50, seed=1)
    assert abs(report.best.hyperparams.hidden_size - 64) <= 8
    assert report.best.loss == min(
        t.loss for t in report.trials if t.loss is not None
    )


def test_adaptive_sampler_finds_planted_optimum():
    space = SearchSpace()
    sampler = AdaptiveSampler(space, seed=4)
    report = search(planted_objective, budget=40, seed=4, sampler=sampler)
    assert report.sampler == "AdaptiveSampler"
    assert abs(report.best.hyperparams.hidden_size - 64) <= 8


def test_adaptive_sampler_is_deterministic_given_history():
    space = SearchSpace()

    def run_once():
        sampler = AdaptiveSampler(space, seed=2, startup_trials=4)
        proposals = []
        for i in range(12):
            hp = sampler.propose(i)
            proposals.append(hp)
            sampler.observe(i, hp, float((hp.hidden_size - 64) ** 2))
        return proposals

    assert run_once() == run_once()


def test_failed_and_non_finite_trials_never_win():
    def objective(hp: HyperParams, seed: int) -> tuple[float | None, str]:
        if hp.hidden_size % 2 == 0:
            return None, "failed"
        if hp.hidden_size < 30:
            return math.inf, "ok"  # must be demoted to failed
        return float(hp.hidden_size), "ok"

    report = search(objective, budget=40, seed=5)
    assert report.best.status == "ok"
    assert report.best.hyperparams.hidden_size % 2 == 1
    assert report.best.hyperparams.hidden_size >= 30
    for t in report.trials:
        if t.status == "failed":
            assert t.loss is None


def test_all_trials_failed_raises_with_report_attached():
    def objective(hp: HyperParams, seed: int) -> tuple[None, str]:
        return None, "failed"

    with pytest.raises(TotalFailureError) as err:
        search(objective, budget=6, seed=0)
    report = err.value.report
    assert report.best_index is None
    assert len(report.trials) == 6
    with pytest.raises(TotalFailureError):
        _ = report.best


def test_budget_must_be_positive():
    with pytest.raises(ValueError):
        search(planted_objective, budget=0, seed=0)


def test_trial_seeds_are_derived_not_sequential():
    expected = int(np.random.SeedSequence([17, 3]).generate_state(1)[0])
    assert trial_seed(17, 3) == expected

    report = search(planted_objective, budget=8, seed=17)
    seeds = [t.seed for t in report.trials]
    assert seeds == [trial_seed(17, i) for i in range(8)]
    assert len(set(seeds)) == 8


def test_report_json_round_trip(tmp_path):
    report = search(planted_objective, budget=5, seed=2)
    out = tmp_path / "nested" / "report.json"
    report.write_json(out)
    payload = json.loads(out.read_text())
    assert payload == report.as_dict()
    assert payload["best_index"] == report.best_index
    assert set(payload["trials"][0]["hyperparams"]) == {
        "hidden_size",
        "num_layers",
        "dropout",
        "learning_rate",
        "weight_decay",
        "history_length",
    }


# --- end to end against the real trainer --------------------------------------------


def small_training_data(n: int = 60) -> TrainingData:
    rng = np.random.default_rng(21)
    prices, scores, p, z = [], [], 100.0, 0.0
    for _ in range(n):
        z = 0.8 * z + rng.normal(0.0, 0.3)
        scores.append(float(np.clip(np.tanh(-z) + rng.normal(0.0, 0.05), -0.98, 0.98)))
        prices.append(p)
        r = 0.10 * (math.log(100.0) - math.log(p)) - 0.012 * z + rng.normal(0.0, 0.0005)
        p *= math.exp(r)
    return TrainingData(make_bars(prices), make_series(scores))


def test_training_data_caches_by_history_length():
    data = small_training_data()
    assert data.dataset_for(8) is data.dataset_for(8)
    assert data.dataset_for(8) is not data.dataset_for(10)


def test_search_and_train_retrains_best_on_its_trial_seed():
    data = small_training_data()
    space = SearchSpace(
        hidden_size=(4, 8),
        num_layers=(1, 1),
        dropout=(0.0, 0.0),
        learning_rate=(1e-3, 1e-2),
        weight_decay=(1e-7, 1e-5),
        history_length=(8, 8),
    )
    fast = TrainSettings(max_epochs=5, patience=5, batch_size=16)
    report, run, dataset = search_and_train(data, budget=3, seed=11,
                                            space=space, settings=fast)
    assert run.status == "ok"
    best = report.best
    assert best.loss == pytest.approx(run.best_val_loss)

    replay = train(dataset, best.hyperparams, best.seed, settings=fast)
    np.testing.assert_array_equal(replay.predictions, run.predictions)


def test_training_objective_reports_failures_without_raising():
    data = small_training_data()
    objective = training_objective(data, TrainSettings(max_epochs=3, patience=3,
                                                       batch_size=16))
    hot = HyperParams(4, 1, 0.0, 1e308, 0.0, 8)
    with np.errstate(over="ignore", invalid="ignore"):
        loss, status = objective(hot, seed=0)
    assert loss is None
    assert status == "failed"
