"""Seeded hyperparameter search over the six-dimensional forecaster space.

The default sampler is a Halton low-discrepancy sequence with a seeded
Cranley-Patterson rotation: trial i's draw depends only on (seed, i), so
reports are reproducible and a longer budget extends a shorter one
(prefix property).  An adaptive sampler in the spirit of tree-structured
Parzen estimators is available behind the same interface.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np

from .errors import TotalFailureError
from .forecaster import (
    ForecastRun,
    HyperParams,
    TrainSettings,
    WindowedDataset,
    build_windows,
    train,
)
from .market_data import DailyBar
from .sentiment import DailySentimentSeries

logger = logging.getLogger(__name__)

HALTON_BASES = (2, 3, 5, 7, 11, 13)
DEFAULT_BUDGET = 30

STATUS_OK = "ok"
STATUS_FAILED = "failed"


@dataclass(frozen=True)
class Dimension:
    """One search dimension with its scale ('int', 'float', 'log')."""

    name: str
    low: float
    high: float
    kind: str

    def from_unit(self, u: float) -> float | int:
        """Map u in [0,1) onto the dimension's range."""
        if self.kind == "int":
            span = int(self.high) - int(self.low) + 1
            return int(self.low) + min(int(u * span), span - 1)
        if self.kind == "float":
            return self.low + u * (self.high - self.low)
        if self.kind == "log":
            lo, hi = math.log(self.low), math.log(self.high)
            return math.exp(lo + u * (hi - lo))
        raise ValueError(f"unknown dimension kind {self.kind!r}")

    def to_unit(self, value: float) -> float:
        """Inverse of from_unit up to integer rounding; used by the
        adaptive sampler to model history in a common space."""
        if self.kind == "int":
            span = int(self.high) - int(self.low) + 1
            return (value - int(self.low) + 0.5) / span
        if self.kind == "float":
            return (value - self.low) / (self.high - self.low)
        lo, hi = math.log(self.low), math.log(self.high)
        return (math.log(value) - lo) / (hi - lo)


@dataclass(frozen=True)
class SearchSpace:
    hidden_size: tuple[int, int] = (8, 128)
    num_layers: tuple[int, int] = (1, 3)
    dropout: tuple[float, float] = (0.0, 0.5)
    learning_rate: tuple[float, float] = (1e-5, 1e-2)
    weight_decay: tuple[float, float] = (1e-8, 1e-2)
    history_length: tuple[int, int] = (5, 60)

    def dimensions(self) -> list[Dimension]:
        return [
            Dimension("hidden_size", *self.hidden_size, kind="int"),
            Dimension("num_layers", *self.num_layers, kind="int"),
            Dimension("dropout", *self.dropout, kind="float"),
            Dimension("learning_rate", *self.learning_rate, kind="log"),
            Dimension("weight_decay", *self.weight_decay, kind="log"),
            Dimension("history_length", *self.history_length, kind="int"),
        ]

    def params_from_units(self, units: Sequence[float]) -> HyperParams:
        values = {dim.name: dim.from_unit(u)
                  for dim, u in zip(self.dimensions(), units)}
        if values["num_layers"] == 1:
            values["dropout"] = 0.0
        hp = HyperParams(**values)
        hp.validate()
        return hp

    def contains(self, hp: HyperParams) -> bool:
        checks = [
            self.hidden_size[0] <= hp.hidden_size <= self.hidden_size[1],
            self.num_layers[0] <= hp.num_layers <= self.num_layers[1],
            self.dropout[0] <= hp.dropout <= self.dropout[1],
            self.learning_rate[0] <= hp.learning_rate <= self.learning_rate[1],
            self.weight_decay[0] <= hp.weight_decay <= self.weight_decay[1],
            self.history_length[0] <= hp.history_length <= self.history_length[1],
        ]
        return all(checks)


def _halton(index: int, base: int) -> float:
    """The index-th term (1-based) of the van der Corput sequence."""
    result = 0.0
    fraction = 1.0 / base
    i = index
    while i > 0:
        result += fraction * (i % base)
        i //= base
        fraction /= base
    return result


class Sampler(Protocol):
    def propose(self, trial_index: int) -> HyperParams: ...

    def observe(self, trial_index: int, hp: HyperParams, loss: float | None) -> None: ...


class HaltonSampler:
    """Quasi-random sampler; deterministic in (seed, trial_index) alone."""

    def __init__(self, space: SearchSpace, seed: int):
        self.space = space
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x4a17]))
        self.rotation = rng.random(len(HALTON_BASES))

    def propose(self, trial_index: int) -> HyperParams:
        units = [
            (_halton(trial_index + 1, base) + rot) % 1.0
            for base, rot in zip(HALTON_BASES, self.rotation)
        ]
        return self.space.params_from_units(units)

    def observe(self, trial_index: int, hp: HyperParams, loss: float | None) -> None:
        pass  # history-free by design


class AdaptiveSampler:
    """Good/bad-density sampler along the lines of a Parzen-estimator
    search: after a seeded-random startup, candidates are drawn from a
    kernel density over the best-quartile trials and ranked by the
    good/bad density ratio.

    Deterministic given (seed, observation history).
    """

    def __init__(
        self,
        space: SearchSpace,
        seed: int,
        startup_trials: int = 10,
        gamma: float = 0.25,
        candidates: int = 24,
    ):
        self.space = space
        self.rng = np.random.default_rng(np.random.SeedSequence([seed, 0x7e9]))
        self.startup_trials = startup_trials
        self.gamma = gamma
        self.candidates = candidates
        self.history: list[tuple[HyperParams, float]] = []

    def propose(self, trial_index: int) -> HyperParams:
        finite = [(hp, loss) for hp, loss in self.history if math.isfinite(loss)]
        if trial_index < self.startup_trials or len(finite) < 4:
            return self.space.params_from_units(self.rng.random(len(HALTON_BASES)))
        finite.sort(key=lambda pair: pair[1])
        n_good = max(1, int(math.ceil(self.gamma * len(finite))))
        dims = self.space.dimensions()
        good = np.array([[dim.to_unit(getattr(hp, dim.name)) for dim in dims]
                         for hp, _ in finite[:n_good]])
        bad = np.array([[dim.to_unit(getattr(hp, dim.name)) for dim in dims]
                        for hp, _ in finite[n_good:]])
        bandwidth = max(0.05, 1.0 / (1 + len(finite)) ** 0.5)

        best_units, best_score = None, -math.inf
        for _ in range(self.candidates):
            center = good[self.rng.integers(len(good))]
            candidate = (center + self.rng.normal(0.0, bandwidth, len(dims))) % 1.0
            score = self._log_density(candidate, good, bandwidth) \
                - self._log_density(candidate, bad, bandwidth)
            if score > best_score:
                best_units, best_score = candidate, score
        assert best_units is not None
        return self.space.params_from_units(best_units)

    @staticmethod
    def _log_density(point: np.ndarray, sample: np.ndarray, bandwidth: float) -> float:
        if len(sample) == 0:
            return 0.0
        sq = np.sum((sample - point) ** 2, axis=1)
        kernel = np.exp(-0.5 * sq / bandwidth**2)
        return float(np.log(np.mean(kernel) + 1e-300))

    def observe(self, trial_index: int, hp: HyperParams, loss: float | None) -> None:
        self.history.append((hp, loss if loss is not None else math.inf))


@dataclass(frozen=True)
class TrialResult:
    index: int
    hyperparams: HyperParams
    loss: float | None
    status: str
    seed: int


@dataclass
class SearchReport:
    trials: list[TrialResult]
    best_index: int | None
    seed: int
    budget: int
    sampler: str

    @property
    def best(self) -> TrialResult:
        if self.best_index is None:
            raise TotalFailureError("no successful trial in report")
        return self.trials[self.best_index]

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "budget": self.budget,
            "sampler": self.sampler,
            "best_index": self.best_index,
            "trials": [
                {
                    "index": t.index,
                    "hyperparams": asdict(t.hyperparams),
                    "loss": t.loss,
                    "status": t.status,
                    "seed": t.seed,
                }
                for t in self.trials
            ],
        }

    def write_json(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.as_dict(), indent=2, sort_keys=True))


@dataclass
class TrainingData:
    """Raw series bundle; datasets are rebuilt per trial because the
    history length itself is searched."""

    bars: Sequence[DailyBar]
    sentiment: DailySentimentSeries | None
    split_fracs: tuple[float, float, float] = (0.70, 0.15, 0.15)
    _cache: dict[int, WindowedDataset] = field(default_factory=dict, repr=False)

    def dataset_for(self, history_length: int) -> WindowedDataset:
        if history_length not in self._cache:
            self._cache[history_length] = build_windows(
                self.bars, self.sentiment, history_length, self.split_fracs)
        return self._cache[history_length]


def trial_seed(search_seed: int, trial_index: int) -> int:
    return int(np.random.SeedSequence([search_seed, trial_index]).generate_state(1)[0])


Objective = Callable[[HyperParams, int], tuple[float | None, str]]


def training_objective(
    data: TrainingData,
    settings: TrainSettings = TrainSettings(),
) -> Objective:
    """Objective returning (best validation MSE, status) for one trial."""

    def objective(hp: HyperParams, seed: int) -> tuple[float | None, str]:
        dataset = data.dataset_for(hp.history_length)
        run = train(dataset, hp, seed, settings=settings)
        if run.status != "ok" or run.best_val_loss is None:
            return None, STATUS_FAILED
        return run.best_val_loss, STATUS_OK

    return objective


def search(
    objective: Objective,
    budget: int,
    seed: int,
    space: SearchSpace = SearchSpace(),
    sampler: Sampler | None = None,
) -> SearchReport:
    """Run seeded trials and select the minimal finite validation loss.

    Failed trials stay in the report but never win; ties go to the
    earliest index.  Raises when every trial failed, with the report
    attached to the error.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    if sampler is None:
        sampler = HaltonSampler(space, seed)
    trials: list[TrialResult] = []
    best_index: int | None = None
    best_loss = math.inf
    for index in range(budget):
        hp = sampler.propose(index)
        run_seed = trial_seed(seed, index)
        loss, status = objective(hp, run_seed)
        if loss is not None and not math.isfinite(loss):
            loss, status = None, STATUS_FAILED
        trials.append(TrialResult(index, hp, loss, status, run_seed))
        sampler.observe(index, hp, loss)
        if status == STATUS_OK and loss is not None and loss < best_loss:
            best_loss = loss
            best_index = index
    report = SearchReport(
        trials=trials,
        best_index=best_index,
        seed=seed,
        budget=budget,
        sampler=type(sampler).__name__,
    )
    if best_index is None:
        error = TotalFailureError(f"all {budget} trials failed")
        error.report = report
        raise error
    return report


def search_and_train(
    data: TrainingData,
    budget: int,
    seed: int,
    space: SearchSpace = SearchSpace(),
    settings: TrainSettings = TrainSettings(),
    sampler: Sampler | None = None,
) -> tuple[SearchReport, ForecastRun, WindowedDataset]:
    """Search, then retrain the winning configuration on its own seed."""
    report = search(training_objective(data, settings), budget, seed,
                    space=space, sampler=sampler)
    best = report.best
    dataset = data.dataset_for(best.hyperparams.history_length)
    run = train(dataset, best.hyperparams, best.seed, settings=settings)
    return report, run, dataset
