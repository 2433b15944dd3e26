"""Pipeline configuration: one TOML file, flag overrides, JSON echo.

Every run is driven by explicit config — seeds included, so nothing falls
back to wall-clock entropy — and each command echoes the resolved config
into the output directory for provenance.
"""
from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - 3.10 fallback
    import tomli as tomllib

from .errors import MissingInputError, SchemaError
from .hyperopt import SearchSpace

CONFIG_ECHO_NAME = "config_echo.json"


@dataclass(frozen=True)
class PipelineConfig:
    trades_path: Path
    calendar_path: Path
    articles_path: Path
    out_dir: Path
    probability_files: dict[str, Path]

    topic_blocklist: tuple[str, ...] = ()
    split_boundaries: tuple[dt.date, dt.date, dt.date] | None = None

    percentile: float = 10.0
    window_days: int = 7
    shocks_only: bool = True
    include_pooled: bool = True
    chunk_mode: str = "prob_mean"

    seed: int = 7
    budget: int = 30
    split_fracs: tuple[float, float, float] = (0.70, 0.15, 0.15)
    max_epochs: int = 200
    patience: int = 10
    batch_size: int = 32
    min_trades_per_day: int = 5
    top_n_instruments: int = 10
    ic_method: str = "pearson"
    sampler: str = "halton"
    space: SearchSpace = field(default_factory=SearchSpace)

    workers: int = 1
    models: tuple[str, ...] = ()
    topics: tuple[str, ...] = ()

    def __post_init__(self):
        if not 0.0 < self.percentile < 50.0:
            raise SchemaError(f"percentile must be in (0, 50), got {self.percentile}")
        if self.window_days < 2:
            raise SchemaError(f"window_days must be >= 2, got {self.window_days}")
        if self.budget < 1 or self.workers < 1:
            raise SchemaError("budget and workers must be positive")
        if self.sampler not in ("halton", "adaptive"):
            raise SchemaError(f"unknown sampler {self.sampler!r}")
        if self.ic_method not in ("pearson", "spearman"):
            raise SchemaError(f"unknown ic_method {self.ic_method!r}")
        if not self.probability_files:
            raise SchemaError("at least one model probability file is required")

    def selected_models(self) -> list[str]:
        available = sorted(self.probability_files)
        if not self.models:
            return available
        missing = [m for m in self.models if m not in self.probability_files]
        if missing:
            raise SchemaError(f"unknown model id(s) {missing}; have {available}")
        return [m for m in available if m in self.models]

    def as_dict(self) -> dict:
        return {
            "paths": {
                "trades": str(self.trades_path),
                "calendar": str(self.calendar_path),
                "articles": str(self.articles_path),
                "out": str(self.out_dir),
            },
            "models": {m: str(p) for m, p in sorted(self.probability_files.items())},
            "corpus": {
                "topic_blocklist": list(self.topic_blocklist),
                "split_boundaries": [d.isoformat() for d in self.split_boundaries]
                if self.split_boundaries else None,
            },
            "events": {
                "percentile": self.percentile,
                "window_days": self.window_days,
                "shocks_only": self.shocks_only,
                "include_pooled": self.include_pooled,
                "chunk_mode": self.chunk_mode,
                "topics": list(self.topics),
            },
            "forecast": {
                "seed": self.seed,
                "budget": self.budget,
                "split": list(self.split_fracs),
                "max_epochs": self.max_epochs,
                "patience": self.patience,
                "batch_size": self.batch_size,
                "min_trades_per_day": self.min_trades_per_day,
                "top_n_instruments": self.top_n_instruments,
                "ic_method": self.ic_method,
                "sampler": self.sampler,
                "space": {
                    "hidden_size": list(self.space.hidden_size),
                    "num_layers": list(self.space.num_layers),
                    "dropout": list(self.space.dropout),
                    "learning_rate": list(self.space.learning_rate),
                    "weight_decay": list(self.space.weight_decay),
                    "history_length": list(self.space.history_length),
                },
            },
            "workers": self.workers,
            "model_filter": list(self.models),
        }

    def echo(self) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        payload = json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"
        (self.out_dir / CONFIG_ECHO_NAME).write_text(payload)

    def with_overrides(
        self,
        *,
        seed: int | None = None,
        workers: int | None = None,
        out: str | None = None,
        models: tuple[str, ...] = (),
        topics: tuple[str, ...] = (),
    ) -> "PipelineConfig":
        updates = {}
        if seed is not None:
            updates["seed"] = seed
        if workers is not None:
            updates["workers"] = workers
        if out is not None:
            updates["out_dir"] = Path(out)
        if models:
            updates["models"] = tuple(models)
        if topics:
            updates["topics"] = tuple(topics)
        return replace(self, **updates) if updates else self


def _parse_boundaries(raw: list | None) -> tuple[dt.date, dt.date, dt.date] | None:
    if raw is None:
        return None
    if len(raw) != 3:
        raise SchemaError(f"split_boundaries needs exactly 3 dates, got {len(raw)}")
    try:
        dates = tuple(dt.date.fromisoformat(str(entry)) for entry in raw)
    except ValueError as exc:
        raise SchemaError(f"bad split boundary: {exc}") from exc
    return dates  # type: ignore[return-value]


def _pair(section: dict, key: str, default: tuple) -> tuple:
    raw = section.get(key)
    if raw is None:
        return default
    if len(raw) != 2:
        raise SchemaError(f"space.{key} must be a [low, high] pair, got {raw}")
    return tuple(type(default[0])(v) for v in raw)


def load_config(path: str | Path) -> PipelineConfig:
    """Parse the TOML config; relative paths resolve against the file."""
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"config file not found: {path}")
    with path.open("rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise SchemaError(f"{path}: invalid TOML: {exc}") from exc
    base = path.parent

    def resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else base / candidate

    try:
        paths = raw["paths"]
        models_section = raw["models"]
    except KeyError as exc:
        raise SchemaError(f"{path}: missing required section {exc}") from exc
    for key in ("trades", "calendar", "articles", "out"):
        if key not in paths:
            raise SchemaError(f"{path}: [paths] missing {key!r}")

    corpus = raw.get("corpus", {})
    events = raw.get("events", {})
    forecast = raw.get("forecast", {})
    space_raw = forecast.get("space", {})
    space = SearchSpace(
        hidden_size=_pair(space_raw, "hidden_size", SearchSpace.hidden_size),
        num_layers=_pair(space_raw, "num_layers", SearchSpace.num_layers),
        dropout=_pair(space_raw, "dropout", SearchSpace.dropout),
        learning_rate=_pair(space_raw, "learning_rate", SearchSpace.learning_rate),
        weight_decay=_pair(space_raw, "weight_decay", SearchSpace.weight_decay),
        history_length=_pair(space_raw, "history_length", SearchSpace.history_length),
    )
    split = forecast.get("split", list(PipelineConfig.split_fracs))
    if len(split) != 3:
        raise SchemaError(f"forecast.split must have 3 fractions, got {split}")

    return PipelineConfig(
        trades_path=resolve(paths["trades"]),
        calendar_path=resolve(paths["calendar"]),
        articles_path=resolve(paths["articles"]),
        out_dir=resolve(paths["out"]),
        probability_files={model: resolve(p) for model, p in models_section.items()},
        topic_blocklist=tuple(corpus.get("topic_blocklist", ())),
        split_boundaries=_parse_boundaries(corpus.get("split_boundaries")),
        percentile=float(events.get("percentile", 10.0)),
        window_days=int(events.get("window_days", 7)),
        shocks_only=bool(events.get("shocks_only", True)),
        include_pooled=bool(events.get("include_pooled", True)),
        chunk_mode=str(events.get("chunk_mode", "prob_mean")),
        seed=int(forecast.get("seed", 7)),
        budget=int(forecast.get("budget", 30)),
        split_fracs=tuple(float(f) for f in split),  # type: ignore[arg-type]
        max_epochs=int(forecast.get("max_epochs", 200)),
        patience=int(forecast.get("patience", 10)),
        batch_size=int(forecast.get("batch_size", 32)),
        min_trades_per_day=int(forecast.get("min_trades_per_day", 5)),
        top_n_instruments=int(forecast.get("top_n_instruments", 10)),
        ic_method=str(forecast.get("ic_method", "pearson")),
        sampler=str(forecast.get("sampler", "halton")),
        space=space,
        workers=int(raw.get("workers", 1)),
    )
