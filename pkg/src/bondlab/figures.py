"""Dependency-free SVG figures: a diverging correlation heatmap and a
grouped accuracy bar chart with a 0.5 baseline.

Output is deterministic — fixed fonts, fixed geometry, formatted numbers,
no timestamps — so re-runs produce byte-identical files.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

from .event_study import AccuracyRow, GridRow

CELL = 64
LEFT_MARGIN = 120
TOP_MARGIN = 60
FONT = "font-family=\"Helvetica, Arial, sans-serif\""

ABSENT_FILL = "#d0d0d0"


def _diverging_color(value: float) -> str:
    """Map [-1, 1] onto blue → white → red."""
    v = max(-1.0, min(1.0, value))
    if v >= 0:
        level = int(round(255 * (1.0 - v)))
        return f"#ff{level:02x}{level:02x}"
    level = int(round(255 * (1.0 + v)))
    return f"#{level:02x}{level:02x}ff"


def _esc(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def correlation_heatmap_svg(rows: Sequence[GridRow], model: str) -> str:
    """Topic × instrument heatmap for one model; absent cells are gray
    and annotated with their reason code."""
    cells = [r for r in rows if r.model == model]
    topics = sorted({r.topic for r in cells})
    instruments = sorted({r.instrument for r in cells})
    by_key = {(r.topic, r.instrument): r.cell for r in cells}

    width = LEFT_MARGIN + CELL * max(1, len(instruments)) + 20
    height = TOP_MARGIN + CELL * max(1, len(topics)) + 30
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<text x="{LEFT_MARGIN}" y="24" {FONT} font-size="16">'
        f'Sentiment/return correlation — {_esc(model)}</text>',
    ]
    for col, instrument in enumerate(instruments):
        x = LEFT_MARGIN + col * CELL + CELL // 2
        parts.append(
            f'<text x="{x}" y="{TOP_MARGIN - 10}" {FONT} font-size="11" '
            f'text-anchor="middle">{_esc(instrument)}</text>')
    for row, topic in enumerate(topics):
        y = TOP_MARGIN + row * CELL + CELL // 2
        parts.append(
            f'<text x="{LEFT_MARGIN - 8}" y="{y + 4}" {FONT} font-size="11" '
            f'text-anchor="end">{_esc(topic)}</text>')
        for col, instrument in enumerate(instruments):
            cell = by_key.get((topic, instrument))
            x = LEFT_MARGIN + col * CELL
            y0 = TOP_MARGIN + row * CELL
            if cell is None or cell.r is None:
                label = cell.reason if cell is not None and cell.reason else "absent"
                parts.append(
                    f'<rect x="{x}" y="{y0}" width="{CELL}" height="{CELL}" '
                    f'fill="{ABSENT_FILL}" stroke="#888"/>')
                parts.append(
                    f'<text x="{x + CELL // 2}" y="{y0 + CELL // 2 + 4}" {FONT} '
                    f'font-size="8" text-anchor="middle">{_esc(label)}</text>')
            else:
                parts.append(
                    f'<rect x="{x}" y="{y0}" width="{CELL}" height="{CELL}" '
                    f'fill="{_diverging_color(cell.r)}" stroke="#888"/>')
                parts.append(
                    f'<text x="{x + CELL // 2}" y="{y0 + CELL // 2 + 4}" {FONT} '
                    f'font-size="11" text-anchor="middle">{cell.r:+.2f}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


BAR_WIDTH = 36
BAR_GAP = 10
GROUP_GAP = 40
CHART_HEIGHT = 220
MODEL_PALETTE = ("#3465a4", "#cc4125", "#6aa84f", "#8e63ce", "#bf9000")


def accuracy_bars_svg(rows: Sequence[AccuracyRow]) -> str:
    """Grouped bars (group = topic, bar = model) with a dashed 0.5 line."""
    topics = sorted({r.topic for r in rows})
    models = sorted({r.model for r in rows})
    by_key = {(r.topic, r.model): r.result for r in rows}
    colors = {m: MODEL_PALETTE[i % len(MODEL_PALETTE)]
              for i, m in enumerate(models)}

    group_width = len(models) * (BAR_WIDTH + BAR_GAP)
    width = LEFT_MARGIN + max(1, len(topics)) * (group_width + GROUP_GAP) + 40
    base_y = TOP_MARGIN + CHART_HEIGHT
    height = base_y + 70
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<text x="{LEFT_MARGIN}" y="24" {FONT} font-size="16">'
        f'Next-day directional accuracy by model</text>',
        f'<line x1="{LEFT_MARGIN - 10}" y1="{base_y}" '
        f'x2="{width - 20}" y2="{base_y}" stroke="#333"/>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = base_y - tick * CHART_HEIGHT
        parts.append(
            f'<text x="{LEFT_MARGIN - 16}" y="{y + 4}" {FONT} font-size="10" '
            f'text-anchor="end">{tick:.2f}</text>')
    baseline_y = base_y - 0.5 * CHART_HEIGHT
    parts.append(
        f'<line x1="{LEFT_MARGIN - 10}" y1="{baseline_y}" x2="{width - 20}" '
        f'y2="{baseline_y}" stroke="#555" stroke-dasharray="6,4"/>')
    parts.append(
        f'<text x="{width - 18}" y="{baseline_y + 4}" {FONT} font-size="10">0.5</text>')

    for g, topic in enumerate(topics):
        group_x = LEFT_MARGIN + g * (group_width + GROUP_GAP)
        parts.append(
            f'<text x="{group_x + group_width // 2}" y="{base_y + 20}" {FONT} '
            f'font-size="12" text-anchor="middle">{_esc(topic)}</text>')
        for m, model in enumerate(models):
            result = by_key.get((topic, model))
            if result is None:
                continue
            x = group_x + m * (BAR_WIDTH + BAR_GAP)
            bar_height = result.accuracy * CHART_HEIGHT
            y = base_y - bar_height
            parts.append(
                f'<rect x="{x}" y="{y:.1f}" width="{BAR_WIDTH}" '
                f'height="{bar_height:.1f}" fill="{colors[model]}"/>')
            parts.append(
                f'<text x="{x + BAR_WIDTH // 2}" y="{y - 4:.1f}" {FONT} '
                f'font-size="10" text-anchor="middle">{result.accuracy:.2f}</text>')
    legend_y = base_y + 42
    x = LEFT_MARGIN
    for model in models:
        parts.append(f'<rect x="{x}" y="{legend_y - 10}" width="12" height="12" '
                     f'fill="{colors[model]}"/>')
        parts.append(f'<text x="{x + 18}" y="{legend_y}" {FONT} font-size="11">'
                     f'{_esc(model)}</text>')
        x += 26 + 8 * len(model)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(content: str, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content)
