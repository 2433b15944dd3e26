"""Next-day price forecasting on rolling windows of price and sentiment.

Covers dataset construction (windowing, train-only standardization,
chronological splits), training (Adam with decoupled weight decay, seeded
shuffling and dropout, early stopping with best-epoch restore), and
evaluation (range-normalised RMSE and the correlation between predicted
and realized next-day log returns).
"""
from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateSeriesError,
    InsufficientDataError,
    NumericError,
    SchemaError,
)
from .lstm import (
    LSTMParams,
    init_params,
    lstm_backward,
    lstm_forward,
    save_params,
)
from .market_data import DailyBar
from .sentiment import DailySentimentSeries
from .stats import pearson, spearman

logger = logging.getLogger(__name__)

FEATURE_NAMES = ("price", "sentiment", "sentiment_missing")
CONTINUOUS_FEATURES = ("price", "sentiment")
DEFAULT_SPLIT = (0.70, 0.15, 0.15)
MIN_EXTRA_DAYS = 10  # bars required beyond the history length

REASON_ZERO_RANGE = "zero_price_range"
REASON_ZERO_VARIANCE = "zero_variance"
REASON_NONPOSITIVE_PRICE = "nonpositive_predicted_price"


@dataclass(frozen=True)
class HyperParams:
    """One point in the six-dimensional search space."""

    hidden_size: int
    num_layers: int
    dropout: float
    learning_rate: float
    weight_decay: float
    history_length: int

    def validate(self) -> None:
        if self.hidden_size < 1 or self.num_layers < 1 or self.history_length < 1:
            raise ValueError(f"nonpositive structural hyperparameter: {self}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout out of range: {self.dropout}")
        if self.num_layers == 1 and self.dropout != 0.0:
            raise ValueError("dropout must be 0 with a single layer")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ValueError(
                f"bad optimizer hyperparameters: lr={self.learning_rate} "
                f"wd={self.weight_decay}"
            )


@dataclass(frozen=True)
class FeatureScaler:
    """Per-feature (mean, std) fit on training windows only.

    Indicator features keep identity scaling so their 0/1 semantics
    survive; ``inverse_price`` undoes the price standardization exactly.
    """

    feature_names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    def transform(self, raw: np.ndarray) -> np.ndarray:
        return (raw - self.mean) / self.std

    def price_to_standard(self, prices: np.ndarray) -> np.ndarray:
        return (prices - self.mean[0]) / self.std[0]

    def inverse_price(self, standardized: np.ndarray) -> np.ndarray:
        return standardized * self.std[0] + self.mean[0]

    def allclose(self, other: "FeatureScaler") -> bool:
        return (np.array_equal(self.mean, other.mean)
                and np.array_equal(self.std, other.std))


def fit_scaler(raw_window_rows: np.ndarray) -> FeatureScaler:
    """Fit per-feature standardization on a (rows, features) matrix."""
    mean = np.zeros(len(FEATURE_NAMES))
    std = np.ones(len(FEATURE_NAMES))
    for index, name in enumerate(FEATURE_NAMES):
        if name not in CONTINUOUS_FEATURES:
            continue
        column = raw_window_rows[:, index]
        mu = float(np.mean(column))
        sigma = float(np.std(column))
        if sigma <= 0.0:
            raise DegenerateSeriesError(
                f"zero variance in feature {name!r} on the training partition"
            )
        mean[index], std[index] = mu, sigma
    return FeatureScaler(FEATURE_NAMES, mean, std)


@dataclass
class WindowedDataset:
    """Standardized rolling windows with chronological split indices.

    ``windows[t]`` covers ``history_length`` consecutive bar days and
    ``targets[t]`` is the standardized price of the following bar day, so
    no target date overlaps its own input window.
    """

    windows: np.ndarray            # (W, H, F) standardized
    targets: np.ndarray            # (W,) standardized next-day price
    raw_windows: np.ndarray        # (W, H, F) unstandardized
    target_prices: np.ndarray      # (W,) raw prices
    last_input_prices: np.ndarray  # (W,) raw price on each window's final day
    target_dates: list[dt.date]
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    scaler: FeatureScaler
    history_length: int
    instrument_id: str

    @property
    def n_windows(self) -> int:
        return len(self.targets)

    def partition(self, which: str) -> tuple[np.ndarray, np.ndarray]:
        idx = {"train": self.train_idx, "val": self.val_idx,
               "test": self.test_idx}[which]
        return self.windows[idx], self.targets[idx]


def build_windows(
    bars: Sequence[DailyBar],
    sentiment: DailySentimentSeries | None,
    history_length: int,
    split_fracs: tuple[float, float, float] = DEFAULT_SPLIT,
) -> WindowedDataset:
    """Construct the windowed dataset for one instrument.

    Features per day: raw price, sentiment score (0 when the day has no
    sentiment), and a missing-sentiment indicator.  Standardization is fit
    on the training windows only and applied everywhere; targets reuse the
    price scaler so predictions de-standardize back to price units.
    """
    if history_length < 1:
        raise ValueError(f"history_length must be positive, got {history_length}")
    if abs(math.fsum(split_fracs) - 1.0) > 1e-9 or len(split_fracs) != 3:
        raise ValueError(f"split fractions must sum to 1, got {split_fracs}")
    if any(f < 0 for f in split_fracs):
        raise ValueError(f"split fractions must be nonnegative, got {split_fracs}")
    n = len(bars)
    minimum = history_length + MIN_EXTRA_DAYS + 1
    if n < minimum:
        raise InsufficientDataError(
            f"need at least {minimum} bars for history_length={history_length}, "
            f"got {n}"
        )
    instrument_id = bars[0].instrument_id
    for bar in bars:
        if bar.instrument_id != instrument_id:
            raise SchemaError("build_windows expects bars of a single instrument")

    score_by_date = {}
    if sentiment is not None:
        score_by_date = {p.date: p.score for p in sentiment.points}
    raw_days = np.zeros((n, len(FEATURE_NAMES)))
    for row, bar in enumerate(bars):
        score = score_by_date.get(bar.date)
        raw_days[row, 0] = bar.price
        raw_days[row, 1] = score if score is not None else 0.0
        raw_days[row, 2] = 0.0 if score is not None else 1.0

    n_windows = n - history_length
    raw_windows = np.stack([raw_days[t: t + history_length]
                            for t in range(n_windows)])
    prices = raw_days[:, 0]
    target_prices = prices[history_length:]
    last_input_prices = prices[history_length - 1: -1]
    target_dates = [bars[t + history_length].date for t in range(n_windows)]

    n_train = int(n_windows * split_fracs[0])
    n_val = int(n_windows * split_fracs[1])
    train_idx = np.arange(0, n_train)
    val_idx = np.arange(n_train, n_train + n_val)
    test_idx = np.arange(n_train + n_val, n_windows)
    if len(train_idx) == 0:
        raise InsufficientDataError("empty training partition after split")

    scaler = fit_scaler(raw_windows[train_idx].reshape(-1, len(FEATURE_NAMES)))
    windows = scaler.transform(raw_windows)
    targets = scaler.price_to_standard(target_prices)
    return WindowedDataset(
        windows=windows,
        targets=targets,
        raw_windows=raw_windows,
        target_prices=target_prices,
        last_input_prices=last_input_prices,
        target_dates=target_dates,
        train_idx=train_idx,
        val_idx=val_idx,
        test_idx=test_idx,
        scaler=scaler,
        history_length=history_length,
        instrument_id=instrument_id,
    )


def scaler_leakage_probe(dataset: WindowedDataset) -> tuple[bool, bool]:
    """(refit-on-train matches, fit-on-all differs) — both should be True.

    A False first element means the stored scaler was not fit on the
    training partition; a False second element means train and full-data
    distributions coincide, so the probe cannot detect leakage on this
    fixture.
    """
    feature_count = len(dataset.scaler.feature_names)
    train_refit = fit_scaler(
        dataset.raw_windows[dataset.train_idx].reshape(-1, feature_count))
    all_fit = fit_scaler(dataset.raw_windows.reshape(-1, feature_count))
    return (train_refit.allclose(dataset.scaler),
            not all_fit.allclose(dataset.scaler))


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainSettings:
    max_epochs: int = 200
    patience: int = 10
    batch_size: int = 32


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass(frozen=True)
class ForecastMetrics:
    nrmse: float | None
    ic: float | None
    nrmse_divisor: float | None = None
    nrmse_reason: str | None = None
    ic_reason: str | None = None
    ic_method: str = "pearson"


@dataclass
class ForecastRun:
    """Everything one training run produced, including failure state."""

    status: str                      # "ok" | "failed"
    seed: int
    hyperparams: dict
    settings: TrainSettings
    history: list[EpochRecord]
    best_epoch: int | None = None
    best_val_loss: float | None = None
    failed_epoch: int | None = None
    params: LSTMParams | None = None
    predictions: np.ndarray | None = None   # de-standardized test prices
    test_dates: list[dt.date] = field(default_factory=list)
    metrics: ForecastMetrics | None = None


class _AdamW:
    """Adam with decoupled weight decay; decay skips bias vectors."""

    BETA1 = 0.9
    BETA2 = 0.999
    EPS = 1e-8

    def __init__(self, params: LSTMParams, learning_rate: float, weight_decay: float):
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = {name: np.zeros_like(arr) for name, arr in params.tensors()}
        self.v = {name: np.zeros_like(arr) for name, arr in params.tensors()}

    @staticmethod
    def _decays(name: str) -> bool:
        return not (name.endswith(".bias") or name.endswith(".b"))

    def step(self, params: LSTMParams, grads: dict[str, np.ndarray]) -> None:
        self.step_count += 1
        t = self.step_count
        for name, arr in params.tensors():
            g = grads[name]
            self.m[name] = self.BETA1 * self.m[name] + (1 - self.BETA1) * g
            self.v[name] = self.BETA2 * self.v[name] + (1 - self.BETA2) * (g * g)
            m_hat = self.m[name] / (1 - self.BETA1 ** t)
            v_hat = self.v[name] / (1 - self.BETA2 ** t)
            arr -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.EPS)
            if self.weight_decay > 0 and self._decays(name):
                arr -= self.learning_rate * self.weight_decay * arr
        params.bump_version()


def _eval_loss(params: LSTMParams, windows: np.ndarray, targets: np.ndarray) -> float:
    cache = lstm_forward(params, windows, train_mode=False)
    diff = cache.predictions - targets
    return float(np.mean(diff * diff))


def train(
    dataset: WindowedDataset,
    hp: HyperParams,
    seed: int,
    settings: TrainSettings = TrainSettings(),
    ic_method: str = "pearson",
) -> ForecastRun:
    """Train one forecaster; fully deterministic given (dataset, hp, seed).

    Three independent RNG streams derive from the seed (initialization,
    batch shuffling, dropout masks) so changing one consumer cannot shift
    another.  Validation loss drives early stopping; the best epoch's
    parameters are restored before test evaluation.  Divergence marks the
    run failed instead of raising.
    """
    hp.validate()
    if dataset.history_length != hp.history_length:
        raise SchemaError(
            f"dataset built with history_length={dataset.history_length}, "
            f"hyperparams say {hp.history_length}"
        )
    if len(dataset.val_idx) == 0 or len(dataset.test_idx) == 0:
        raise InsufficientDataError("training requires nonempty val and test partitions")

    init_rng, shuffle_rng, dropout_rng = [
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)
    ]
    params = init_params(
        input_size=dataset.windows.shape[2],
        hidden_size=hp.hidden_size,
        num_layers=hp.num_layers,
        dropout=hp.dropout if hp.num_layers > 1 else 0.0,
        rng=init_rng,
    )
    optimizer = _AdamW(params, hp.learning_rate, hp.weight_decay)
    x_train, y_train = dataset.partition("train")
    x_val, y_val = dataset.partition("val")

    run = ForecastRun(
        status="ok",
        seed=seed,
        hyperparams=asdict(hp),
        settings=settings,
        history=[],
    )
    best_params: LSTMParams | None = None
    best_val = math.inf
    bad_epochs = 0

    for epoch in range(settings.max_epochs):
        order = shuffle_rng.permutation(len(y_train))
        batch_losses = []
        try:
            for start in range(0, len(order), settings.batch_size):
                batch = order[start: start + settings.batch_size]
                cache = lstm_forward(params, x_train[batch], train_mode=True,
                                     dropout_rng=dropout_rng)
                diff = cache.predictions - y_train[batch]
                batch_losses.append(float(np.mean(diff * diff)))
                grads = lstm_backward(cache, y_train[batch])
                scale = 1.0 / len(batch)
                grads = {name: g * scale for name, g in grads.items()}
                optimizer.step(params, grads)
            val_loss = _eval_loss(params, x_val, y_val)
        except NumericError as exc:
            logger.warning("run diverged at epoch %d: %s", epoch, exc)
            run.status = "failed"
            run.failed_epoch = epoch
            return run
        train_loss = float(np.mean(batch_losses))
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            run.status = "failed"
            run.failed_epoch = epoch
            return run
        run.history.append(EpochRecord(epoch, train_loss, val_loss))

        if val_loss < best_val:
            best_val = val_loss
            best_params = params.copy()
            run.best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs > settings.patience:
                break

    assert best_params is not None  # max_epochs >= 1 and no divergence
    run.params = best_params
    run.best_val_loss = best_val
    x_test, _ = dataset.partition("test")
    test_cache = lstm_forward(best_params, x_test, train_mode=False)
    run.predictions = dataset.scaler.inverse_price(test_cache.predictions)
    run.test_dates = [dataset.target_dates[i] for i in dataset.test_idx]
    run.metrics = compute_metrics(run.predictions, dataset, ic_method=ic_method)
    return run


def compute_metrics(
    predicted_prices: np.ndarray,
    dataset: WindowedDataset,
    ic_method: str = "pearson",
) -> ForecastMetrics:
    """Range-normalised RMSE plus predicted-vs-realized return correlation.

    Either metric degrades to None with a reason instead of raising: a flat
    test price range kills nRMSE; zero variance (or nonpositive predicted
    prices, which break the log) kills the correlation.
    """
    if ic_method not in ("pearson", "spearman"):
        raise ValueError(f"unknown ic_method {ic_method!r}")
    actual = dataset.target_prices[dataset.test_idx]
    previous = dataset.last_input_prices[dataset.test_idx]
    if len(actual) == 0:
        raise InsufficientDataError("empty test partition")
    predicted_prices = np.asarray(predicted_prices, dtype=np.float64)

    rmse = float(np.sqrt(np.mean((predicted_prices - actual) ** 2)))
    divisor = float(np.max(actual) - np.min(actual))
    if divisor > 0:
        nrmse, nrmse_reason = rmse / divisor, None
    else:
        nrmse, nrmse_reason = None, REASON_ZERO_RANGE

    ic: float | None
    ic_reason = None
    if np.any(predicted_prices <= 0.0):
        ic, ic_reason = None, REASON_NONPOSITIVE_PRICE
    else:
        realized = np.log(actual / previous)
        predicted_returns = np.log(predicted_prices / previous)
        correlate = pearson if ic_method == "pearson" else spearman
        try:
            ic = correlate(predicted_returns.tolist(), realized.tolist())
        except (DegenerateSeriesError, InsufficientDataError) as exc:
            logger.debug("correlation degenerate: %s", exc)
            ic, ic_reason = None, REASON_ZERO_VARIANCE
    return ForecastMetrics(
        nrmse=nrmse,
        ic=ic,
        nrmse_divisor=divisor if divisor > 0 else None,
        nrmse_reason=nrmse_reason,
        ic_reason=ic_reason,
        ic_method=ic_method,
    )


def persistence_mse(dataset: WindowedDataset) -> float:
    """Test MSE of the predict-last-observed-price baseline."""
    actual = dataset.target_prices[dataset.test_idx]
    previous = dataset.last_input_prices[dataset.test_idx]
    return float(np.mean((previous - actual) ** 2))


def test_errors(run: ForecastRun, dataset: WindowedDataset) -> np.ndarray:
    """Per-date raw-price forecast errors on the test partition."""
    if run.predictions is None:
        raise InsufficientDataError("run has no predictions (failed?)")
    return run.predictions - dataset.target_prices[dataset.test_idx]


# ---------------------------------------------------------------------------
# Run persistence
# ---------------------------------------------------------------------------

PREDICTIONS_CSV = "predictions.csv"
RUN_JSON = "run.json"
PARAMS_DIR = "params"


def save_run(run: ForecastRun, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if run.params is not None:
        save_params(run.params, directory / PARAMS_DIR)
    payload = {
        "status": run.status,
        "seed": run.seed,
        "hyperparams": run.hyperparams,
        "settings": asdict(run.settings),
        "best_epoch": run.best_epoch,
        "best_val_loss": run.best_val_loss,
        "failed_epoch": run.failed_epoch,
        "history": [asdict(record) for record in run.history],
        "metrics": asdict(run.metrics) if run.metrics else None,
    }
    (directory / RUN_JSON).write_text(json.dumps(payload, indent=2, sort_keys=True))


def write_predictions_csv(
    run: ForecastRun,
    dataset: WindowedDataset,
    path: str | Path,
) -> None:
    if run.predictions is None:
        raise InsufficientDataError("run has no predictions (failed?)")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    actual = dataset.target_prices[dataset.test_idx]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "actual_price", "predicted_price"])
        for date, act, pred in zip(run.test_dates, actual, run.predictions):
            writer.writerow([date.isoformat(), repr(float(act)), repr(float(pred))])
