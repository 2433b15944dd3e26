"""Command-line pipeline: ingest → score-aggregate → events → forecast →
dm → report.

Exit codes are a stable contract: 0 success, 2 missing input file,
3 data-quality failure, 4 missing upstream artifact, 5 total failure.
``BONDLAB_LOG`` sets the log level.  Every command echoes its resolved
configuration into the output directory.
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import math
import os
import sys
import zlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from . import event_study, figures, market_data, news_corpus, sentiment
from .calendar import TradingCalendar
from .config import CONFIG_ECHO_NAME as CONFIG_ECHO_JSON
from .config import PipelineConfig, load_config
from .errors import (
    BondlabError,
    DataQualityError,
    DegenerateSeriesError,
    InsufficientDataError,
    MissingInputError,
    MissingUpstreamError,
    NumericError,
    SchemaError,
    StaleCacheError,
    TotalFailureError,
)
from .forecaster import TrainSettings, write_predictions_csv, save_run, test_errors
from .hyperopt import AdaptiveSampler, HaltonSampler, TrainingData, search_and_train
from .stats import dm_test

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MISSING_INPUT = 2
EXIT_DATA_QUALITY = 3
EXIT_MISSING_UPSTREAM = 4
EXIT_TOTAL_FAILURE = 5

BARS_CSV = "bars.csv"
CORPUS_JSONL = "corpus.jsonl"
CLEANING_REPORT_CSV = "cleaning_report.csv"
INGEST_ERRORS_CSV = "ingest_errors.csv"
SCORES_JSONL = "scores.jsonl"
DAILY_SENTIMENT_CSV = "daily_sentiment.csv"
GRID_CSV = "grid.csv"
ACCURACY_CSV = "accuracy.csv"
FIGURES_DIR = "figures"
FORECAST_DIR = "forecast"
SUMMARY_CSV = "summary.csv"
DM_CSV = "dm.csv"
FAILURES_JSON = "failures.json"
REPORT_MD = "report.md"

DM_CSV_HEADER = ["instrument_id", "baseline_model", "dm_stat", "p_value",
                 "lag", "n", "significant_5pct"]
SUMMARY_CSV_HEADER = ["model", "mean_nrmse", "mean_ic", "n_instruments"]

MIN_DM_POINTS = 10


def _require_upstream(path: Path, artifact: str, producer: str) -> None:
    if not path.is_file():
        raise MissingUpstreamError(
            f"missing upstream artifact {artifact!r} at {path} "
            f"(run `bondlab {producer}` first)"
        )


def _load_calendar(config: PipelineConfig) -> TradingCalendar:
    if not config.calendar_path.is_file():
        raise MissingInputError(f"calendar file not found: {config.calendar_path}")
    return TradingCalendar.from_file(config.calendar_path)


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------

def cmd_ingest(config: PipelineConfig) -> int:
    config.echo()
    calendar = _load_calendar(config)
    out = config.out_dir

    try:
        result = market_data.ingest_trades(config.trades_path, calendar)
    except DataQualityError as exc:
        report_path = out / INGEST_ERRORS_CSV
        _write_malformed_report(exc.details or [], report_path)
        raise DataQualityError(f"{exc} (report: {report_path})") from exc
    if result.malformed:
        _write_malformed_report(result.malformed, out / INGEST_ERRORS_CSV)
        logger.warning("%d malformed trade rows (report: %s)",
                       len(result.malformed), out / INGEST_ERRORS_CSV)
    bars = market_data.daily_aggregate(result.records, calendar)
    market_data.write_daily_bars_csv(bars, out / BARS_CSV)
    logger.info("wrote %d daily bars for %d instruments", len(bars),
                len({b.instrument_id for b in bars}))

    raw_articles = news_corpus.read_articles_jsonl(config.articles_path)
    articles, report = news_corpus.clean_corpus(
        raw_articles, config.topic_blocklist, calendar)
    news_corpus.write_corpus_jsonl(articles, out / CORPUS_JSONL)
    report.write_csv(out / CLEANING_REPORT_CSV)
    logger.info("cleaned corpus: kept %d of %d articles", report.kept,
                report.input_total)

    if config.split_boundaries is not None:
        split = news_corpus.chronological_split(articles, config.split_boundaries)
        for name, part in (("train", split.train),
                           ("validation", split.validation),
                           ("test", split.test),
                           ("evaluation", split.evaluation)):
            news_corpus.write_corpus_jsonl(part, out / f"corpus_{name}.jsonl")
    return EXIT_OK


def _write_malformed_report(rows: Sequence[tuple[int, str]], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["line", "reason"])
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# score-aggregate
# ---------------------------------------------------------------------------

def cmd_score_aggregate(config: PipelineConfig) -> int:
    config.echo()
    out = config.out_dir
    _require_upstream(out / CORPUS_JSONL, CORPUS_JSONL, "ingest")
    articles = news_corpus.read_corpus_jsonl(out / CORPUS_JSONL)
    index = {a.article_id: a for a in articles}

    all_records: list[sentiment.SentimentRecord] = []
    for model in config.selected_models():
        chunks = sentiment.load_chunk_probabilities(config.probability_files[model])
        records = sentiment.score_articles(chunks, index, mode=config.chunk_mode)
        logger.info("model %s: %d article scores from %d chunks",
                    model, len(records), len(chunks))
        all_records.extend(records)
    sentiment.write_records_jsonl(all_records, out / SCORES_JSONL)

    series_list = _build_series(all_records, config)
    flagged = []
    for series in series_list:
        try:
            flagged.append(sentiment.detect_shocks(series, config.percentile))
        except InsufficientDataError as exc:
            logger.warning("no shocks for %s/%s: %s", series.model_id,
                           series.topic, exc)
            flagged.append(series)
    sentiment.write_daily_series_csv(flagged, out / DAILY_SENTIMENT_CSV)
    return EXIT_OK


def _build_series(
    records: Sequence[sentiment.SentimentRecord],
    config: PipelineConfig,
) -> list[sentiment.DailySentimentSeries]:
    models = config.selected_models()
    topics = sorted({r.topic for r in records if r.topic is not None})
    if config.topics:
        topics = [t for t in topics if t in config.topics]
    series_list = []
    for model in models:
        for topic in topics:
            series = sentiment.daily_series(records, model, topic)
            if series.points:
                series_list.append(series)
        if config.include_pooled:
            pooled = sentiment.daily_series(records, model, None)
            if pooled.points:
                series_list.append(pooled)
    return series_list


# ---------------------------------------------------------------------------
# events
# ---------------------------------------------------------------------------

def cmd_events(config: PipelineConfig) -> int:
    config.echo()
    out = config.out_dir
    _require_upstream(out / DAILY_SENTIMENT_CSV, DAILY_SENTIMENT_CSV, "score-aggregate")
    _require_upstream(out / BARS_CSV, BARS_CSV, "ingest")
    calendar = _load_calendar(config)
    series_list = _select_series(
        sentiment.read_daily_series_csv(out / DAILY_SENTIMENT_CSV), config)
    bars_map = market_data.bars_by_instrument(
        market_data.read_daily_bars_csv(out / BARS_CSV))

    grid = event_study.correlation_grid(
        series_list, bars_map, calendar,
        window_days=config.window_days, shocks_only=config.shocks_only)
    event_study.write_grid_csv(grid, out / GRID_CSV)

    accuracy = event_study.accuracy_table(
        series_list, bars_map, calendar, shocks_only=config.shocks_only)
    event_study.write_accuracy_csv(accuracy, out / ACCURACY_CSV)

    figures_dir = out / FIGURES_DIR
    for model in sorted({row.model for row in grid}):
        figures.write_svg(figures.correlation_heatmap_svg(grid, model),
                          figures_dir / f"heatmap_{model}.svg")
    figures.write_svg(figures.accuracy_bars_svg(accuracy),
                      figures_dir / "accuracy.svg")
    logger.info("events: %d grid cells, %d accuracy rows", len(grid), len(accuracy))
    return EXIT_OK


def _select_series(
    series_list: list[sentiment.DailySentimentSeries],
    config: PipelineConfig,
) -> list[sentiment.DailySentimentSeries]:
    models = set(config.selected_models())
    selected = [s for s in series_list if s.model_id in models]
    if config.topics:
        allowed = set(config.topics)
        if config.include_pooled:
            allowed.add(sentiment.POOLED_TOPIC)
        selected = [s for s in selected if s.topic in allowed]
    elif not config.include_pooled:
        selected = [s for s in selected if s.topic != sentiment.POOLED_TOPIC]
    return selected


# ---------------------------------------------------------------------------
# forecast
# ---------------------------------------------------------------------------

def _unit_seed(base_seed: int, instrument: str, model: str) -> int:
    tag = zlib.crc32(f"{instrument}/{model}".encode())
    return int(np.random.SeedSequence([base_seed, tag]).generate_state(1)[0])


def _forecast_unit(
    config: PipelineConfig,
    instrument: str,
    model: str,
    bars,
    series,
):
    seed = _unit_seed(config.seed, instrument, model)
    data = TrainingData(bars=bars, sentiment=series, split_fracs=config.split_fracs)
    settings = TrainSettings(max_epochs=config.max_epochs,
                             patience=config.patience,
                             batch_size=config.batch_size)
    sampler_cls = HaltonSampler if config.sampler == "halton" else AdaptiveSampler
    sampler = sampler_cls(config.space, seed)
    return search_and_train(data, config.budget, seed, space=config.space,
                            settings=settings, sampler=sampler)


def cmd_forecast(config: PipelineConfig) -> int:
    config.echo()
    out = config.out_dir
    _require_upstream(out / BARS_CSV, BARS_CSV, "ingest")
    _require_upstream(out / DAILY_SENTIMENT_CSV, DAILY_SENTIMENT_CSV, "score-aggregate")
    forecast_dir = out / FORECAST_DIR
    forecast_dir.mkdir(parents=True, exist_ok=True)

    bars_map = market_data.bars_by_instrument(
        market_data.read_daily_bars_csv(out / BARS_CSV))
    instruments = sorted(market_data.liquidity_filter(
        [b for bars in bars_map.values() for b in bars],
        min_trades_per_day=config.min_trades_per_day,
        top_n=config.top_n_instruments))
    if not instruments:
        raise DataQualityError("no instrument passed the liquidity filter")

    pooled = {
        s.model_id: s
        for s in sentiment.read_daily_series_csv(out / DAILY_SENTIMENT_CSV)
        if s.topic == sentiment.POOLED_TOPIC
    }
    models = config.selected_models()
    missing_pooled = [m for m in models if m not in pooled]
    if missing_pooled:
        raise MissingUpstreamError(
            f"no pooled sentiment series for model(s) {missing_pooled}; "
            f"re-run `bondlab score-aggregate` with include_pooled enabled"
        )

    units = [(instrument, model) for instrument in instruments for model in models]
    results: dict[tuple[str, str], tuple] = {}
    failures: list[dict] = []

    def run_unit(unit: tuple[str, str]):
        instrument, model = unit
        return _forecast_unit(config, instrument, model,
                              bars_map[instrument], pooled[model])

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = {unit: pool.submit(run_unit, unit) for unit in units}
        outcomes = {unit: future for unit, future in futures.items()}
    else:
        outcomes = None

    for unit in units:
        instrument, model = unit
        try:
            if outcomes is not None:
                report, run, dataset = outcomes[unit].result()
            else:
                report, run, dataset = run_unit(unit)
        except (TotalFailureError, InsufficientDataError,
                DegenerateSeriesError, NumericError) as exc:
            logger.error("forecast unit %s/%s failed: %s", instrument, model, exc)
            failures.append({"instrument": instrument, "model": model,
                             "error": str(exc)})
            continue
        results[unit] = (report, run, dataset)
        unit_dir = forecast_dir / "runs" / instrument / model
        save_run(run, unit_dir)
        write_predictions_csv(run, dataset, unit_dir / "predictions.csv")
        report.write_json(forecast_dir / f"search_{instrument}_{model}.json")

    (forecast_dir / FAILURES_JSON).write_text(
        json.dumps(failures, indent=2, sort_keys=True) + "\n")
    if not results:
        raise TotalFailureError(
            f"every forecast unit failed ({len(failures)} failures; "
            f"see {forecast_dir / FAILURES_JSON})"
        )

    _write_summary(results, models, forecast_dir / SUMMARY_CSV)
    _write_dm_matrix(results, config, instruments, models, forecast_dir / DM_CSV)
    return EXIT_OK


def _write_summary(results: dict, models: Sequence[str], path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_CSV_HEADER)
        for model in models:
            nrmses, ics = [], []
            for (_, unit_model), (_, run, _) in sorted(results.items()):
                if unit_model != model or run.metrics is None:
                    continue
                if run.metrics.nrmse is not None:
                    nrmses.append(run.metrics.nrmse)
                if run.metrics.ic is not None:
                    ics.append(run.metrics.ic)
            writer.writerow([
                model,
                repr(math.fsum(nrmses) / len(nrmses)) if nrmses else "",
                repr(math.fsum(ics) / len(ics)) if ics else "",
                len(nrmses),
            ])


def _reference_model(models: Sequence[str]) -> str:
    return models[0]


def _write_dm_matrix(
    results: dict,
    config: PipelineConfig,
    instruments: Sequence[str],
    models: Sequence[str],
    path: Path,
) -> None:
    """DM rows comparing the reference (first selected) model's forecast
    errors against each baseline, per instrument, on common test dates."""
    reference = _reference_model(models)
    rows = []
    for instrument in instruments:
        ref = results.get((instrument, reference))
        if ref is None:
            continue
        _, ref_run, ref_dataset = ref
        ref_errors = _errors_by_date(ref_run, ref_dataset)
        for baseline in models:
            if baseline == reference:
                continue
            base = results.get((instrument, baseline))
            if base is None:
                continue
            _, base_run, base_dataset = base
            base_errors = _errors_by_date(base_run, base_dataset)
            common = sorted(set(ref_errors) & set(base_errors))
            if len(common) < MIN_DM_POINTS:
                logger.warning("DM skipped for %s vs %s on %s: only %d common dates",
                               reference, baseline, instrument, len(common))
                continue
            result = dm_test([ref_errors[d] for d in common],
                             [base_errors[d] for d in common])
            rows.append([
                instrument, baseline, repr(result.dm_stat), repr(result.p_value),
                result.lag, result.n, str(result.significant_5pct).lower(),
            ])
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DM_CSV_HEADER)
        writer.writerows(rows)


def _errors_by_date(run, dataset) -> dict[dt.date, float]:
    errors = test_errors(run, dataset)
    return {date: float(err) for date, err in zip(run.test_dates, errors)}


# ---------------------------------------------------------------------------
# dm (standalone recompute from stored predictions)
# ---------------------------------------------------------------------------

def cmd_dm(config: PipelineConfig) -> int:
    config.echo()
    runs_dir = config.out_dir / FORECAST_DIR / "runs"
    if not runs_dir.is_dir():
        raise MissingUpstreamError(
            f"missing upstream artifact 'forecast runs' at {runs_dir} "
            f"(run `bondlab forecast` first)"
        )
    predictions: dict[tuple[str, str], dict[dt.date, float]] = {}
    for pred_path in sorted(runs_dir.glob("*/*/predictions.csv")):
        model = pred_path.parent.name
        instrument = pred_path.parent.parent.name
        errors = {}
        with pred_path.open(newline="") as fh:
            for record in csv.DictReader(fh):
                errors[dt.date.fromisoformat(record["date"])] = (
                    float(record["predicted_price"]) - float(record["actual_price"]))
        predictions[(instrument, model)] = errors
    if not predictions:
        raise MissingUpstreamError(f"no stored predictions under {runs_dir}")

    models = config.selected_models()
    reference = _reference_model(models)
    rows = []
    for instrument in sorted({i for i, _ in predictions}):
        ref_errors = predictions.get((instrument, reference))
        if ref_errors is None:
            continue
        for baseline in models:
            if baseline == reference:
                continue
            base_errors = predictions.get((instrument, baseline))
            if base_errors is None:
                continue
            common = sorted(set(ref_errors) & set(base_errors))
            if len(common) < MIN_DM_POINTS:
                continue
            result = dm_test([ref_errors[d] for d in common],
                             [base_errors[d] for d in common])
            rows.append([
                instrument, baseline, repr(result.dm_stat), repr(result.p_value),
                result.lag, result.n, str(result.significant_5pct).lower(),
            ])
    path = config.out_dir / FORECAST_DIR / DM_CSV
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DM_CSV_HEADER)
        writer.writerows(rows)
    logger.info("wrote %d DM rows to %s", len(rows), path)
    return EXIT_OK


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def cmd_report(config: PipelineConfig) -> int:
    config.echo()
    out = config.out_dir
    sections: list[str] = ["# Pipeline report", ""]
    found_any = False

    cleaning = out / CLEANING_REPORT_CSV
    if cleaning.is_file():
        found_any = True
        sections.append("## Corpus cleaning")
        sections.append("")
        with cleaning.open(newline="") as fh:
            for record in csv.DictReader(fh):
                sections.append(f"- {record['reason']}: {record['count']}")
        sections.append("")

    sentiment_csv = out / DAILY_SENTIMENT_CSV
    if sentiment_csv.is_file():
        found_any = True
        series_list = sentiment.read_daily_series_csv(sentiment_csv)
        sections.append("## Daily sentiment series")
        sections.append("")
        sections.append("| model | topic | days | +shocks | -shocks |")
        sections.append("|---|---|---|---|---|")
        for series in series_list:
            pos = sum(1 for f in series.shock_flags if f == 1)
            neg = sum(1 for f in series.shock_flags if f == -1)
            sections.append(f"| {series.model_id} | {series.topic} | "
                            f"{len(series.points)} | {pos} | {neg} |")
        sections.append("")

    accuracy_csv = out / ACCURACY_CSV
    if accuracy_csv.is_file():
        found_any = True
        sections.append("## Directional accuracy (shock days, next-day returns)")
        sections.append("")
        sections.append("| topic | model | accuracy | events | p-value |")
        sections.append("|---|---|---|---|---|")
        for row in event_study.read_accuracy_csv(accuracy_csv):
            sections.append(
                f"| {row.topic} | {row.model} | {row.result.accuracy:.4f} | "
                f"{row.result.n_events} | {row.result.p_value:.4g} |")
        sections.append("")

    summary_csv = out / FORECAST_DIR / SUMMARY_CSV
    if summary_csv.is_file():
        found_any = True
        sections.append("## Forecast summary (mean over instruments)")
        sections.append("")
        sections.append("| model | mean nRMSE | mean IC | instruments |")
        sections.append("|---|---|---|---|")
        with summary_csv.open(newline="") as fh:
            for record in csv.DictReader(fh):
                nrmse = f"{float(record['mean_nrmse']):.6f}" \
                    if record["mean_nrmse"] else "n/a"
                ic = f"{float(record['mean_ic']):.4f}" if record["mean_ic"] else "n/a"
                sections.append(f"| {record['model']} | {nrmse} | {ic} | "
                                f"{record['n_instruments']} |")
        sections.append("")

    dm_csv = out / FORECAST_DIR / DM_CSV
    if dm_csv.is_file():
        found_any = True
        sections.append("## Forecast comparison (reference model vs baselines)")
        sections.append("")
        sections.append("| instrument | baseline | DM stat | p-value | lag | n "
                        "| significant at 5% |")
        sections.append("|---|---|---|---|---|---|---|")
        with dm_csv.open(newline="") as fh:
            for record in csv.DictReader(fh):
                sections.append(
                    f"| {record['instrument_id']} | {record['baseline_model']} | "
                    f"{float(record['dm_stat']):.4f} | "
                    f"{float(record['p_value']):.4g} | {record['lag']} | "
                    f"{record['n']} | {record['significant_5pct']} |")
        sections.append("")
        sections.append(
            "Comparison convention: squared-error loss differentials, "
            "automatic Bartlett lag floor(4*(n/100)^(2/9)) unless overridden, "
            "asymptotic normal two-sided p-values.")
        sections.append("")

    failures_json = out / FORECAST_DIR / FAILURES_JSON
    if failures_json.is_file():
        failures = json.loads(failures_json.read_text())
        if failures:
            sections.append("## Forecast failures")
            sections.append("")
            for failure in failures:
                sections.append(f"- {failure['instrument']}/{failure['model']}: "
                                f"{failure['error']}")
            sections.append("")

    sections.append(f"Resolved configuration: `{CONFIG_ECHO_JSON}` in this directory.")
    sections.append("")
    report_path = out / REPORT_MD
    if not found_any:
        raise MissingUpstreamError(
            f"nothing to report in {out}; run the pipeline commands first")
    report_path.write_text("\n".join(sections) + "\n")
    logger.info("wrote %s", report_path)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

COMMANDS = {
    "ingest": cmd_ingest,
    "score-aggregate": cmd_score_aggregate,
    "events": cmd_events,
    "forecast": cmd_forecast,
    "dm": cmd_dm,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bondlab",
        description="News-sentiment vs sovereign-bond-price analysis pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="TOML config file")
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--workers", type=int, default=None)
        cmd.add_argument("--out", default=None, help="override output directory")
        cmd.add_argument("--model", action="append", default=[],
                         help="restrict to this model id (repeatable)")
        cmd.add_argument("--topic", action="append", default=[],
                         help="restrict to this topic (repeatable)")
    return parser


def _configure_logging() -> None:
    level_name = os.environ.get("BONDLAB_LOG", "WARNING").upper()
    level = getattr(logging, level_name, logging.WARNING)
    logging.basicConfig(level=level,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config).with_overrides(
            seed=args.seed,
            workers=args.workers,
            out=args.out,
            models=tuple(args.model),
            topics=tuple(args.topic),
        )
        return COMMANDS[args.command](config)
    except MissingInputError as exc:
        print(f"error: input not found: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except (DataQualityError, SchemaError, DegenerateSeriesError,
            InsufficientDataError) as exc:
        print(f"error: data quality: {exc}", file=sys.stderr)
        return EXIT_DATA_QUALITY
    except MissingUpstreamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_UPSTREAM
    except (TotalFailureError, NumericError, StaleCacheError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOTAL_FAILURE
    except BondlabError as exc:  # any future subtype: data-quality bucket
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA_QUALITY


if __name__ == "__main__":
    sys.exit(main())
