"""Tests for the deterministic SVG figure builders."""
from __future__ import annotations

import re
import xml.etree.ElementTree as ET

from bondlab.event_study import (
    AccuracyRow,
    CorrelationCell,
    DirectionalAccuracy,
    GridRow,
)
from bondlab.figures import (
    ABSENT_FILL,
    accuracy_bars_svg,
    correlation_heatmap_svg,
    write_svg,
)

GRID = [
    GridRow("gilts", "UKT10Y", "signal", CorrelationCell(r=-0.42, n=120)),
    GridRow("gilts", "UKT2Y", "signal", CorrelationCell(r=0.05, n=120)),
    GridRow("inflation", "UKT10Y", "signal",
            CorrelationCell(r=None, n=2, reason="insufficient_points")),
    GridRow("inflation", "UKT2Y", "signal",
            CorrelationCell(r=None, n=40, reason="zero_variance")),
    # a second model that must not leak into the signal heatmap
    GridRow("gilts", "UKT10Y", "permuted", CorrelationCell(r=0.9, n=120)),
]

ACCURACY = [
    AccuracyRow("gilts", "signal", DirectionalAccuracy(0.83, 60, 1e-6, 4)),
    AccuracyRow("gilts", "permuted", DirectionalAccuracy(0.51, 58, 0.9, 6)),
    AccuracyRow("inflation", "signal", DirectionalAccuracy(0.74, 40, 1e-3, 2)),
    AccuracyRow("inflation", "permuted", DirectionalAccuracy(0.47, 41, 0.7, 1)),
]


def test_heatmap_is_well_formed_svg():
    svg = correlation_heatmap_svg(GRID, "signal")
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    rects = [el for el in root.iter() if el.tag.endswith("rect")]
    # one cell per topic x instrument combination of the selected model
    assert len(rects) == 4


def test_heatmap_filters_to_requested_model():
    svg = correlation_heatmap_svg(GRID, "signal")
    assert "+0.90" not in svg          # the permuted-model cell
    assert "-0.42" in svg
    assert "+0.05" in svg


def test_heatmap_marks_absent_cells_with_reason():
    svg = correlation_heatmap_svg(GRID, "signal")
    assert "insufficient_points" in svg
    assert "zero_variance" in svg
    assert svg.count(ABSENT_FILL) == 2


def test_heatmap_color_polarity():
    svg = correlation_heatmap_svg(GRID, "signal")
    fills = re.findall(r'fill="(#[0-9a-f]{6})"', svg)
    colored = [f for f in fills if f != ABSENT_FILL]
    # r = -0.42 -> blue-ish (blue channel saturated), r = +0.05 -> red-ish
    assert any(f.endswith("ff") for f in colored)
    assert any(f.startswith("#ff") for f in colored)


def test_heatmap_is_byte_deterministic():
    first = correlation_heatmap_svg(GRID, "signal")
    second = correlation_heatmap_svg(GRID, "signal")
    assert first == second
    # no volatile content such as timestamps
    assert not re.search(r"\d{4}-\d{2}-\d{2}[T ]\d{2}:", first)


def test_accuracy_bars_structure():
    svg = accuracy_bars_svg(ACCURACY)
    root = ET.fromstring(svg)
    rects = [el for el in root.iter() if el.tag.endswith("rect")]
    # 4 bars + 2 legend swatches
    assert len(rects) == 6
    assert "0.83" in svg and "0.51" in svg
    assert "stroke-dasharray" in svg   # the 0.5 guide line


def test_accuracy_bars_height_is_proportional():
    svg = accuracy_bars_svg(ACCURACY)
    heights = [float(h) for h in re.findall(r'height="([0-9.]+)" fill="#', svg)
               if float(h) > 12]       # skip legend swatches
    expected = [round(row.result.accuracy * 220, 1) for row in ACCURACY]
    assert sorted(heights) == sorted(expected)


def test_accuracy_bars_deterministic():
    assert accuracy_bars_svg(ACCURACY) == accuracy_bars_svg(ACCURACY)


def test_escaping_of_markup_characters():
    rows = [GridRow("<gilts & risk>", "UKT10Y", "m",
                    CorrelationCell(r=0.1, n=10))]
    svg = correlation_heatmap_svg(rows, "m")
    assert "&lt;gilts &amp; risk&gt;" in svg
    ET.fromstring(svg)  # still parses


def test_write_svg_creates_parent_dirs(tmp_path):
    target = tmp_path / "figures" / "deep" / "grid.svg"
    content = correlation_heatmap_svg(GRID, "signal")
    write_svg(content, target)
    assert target.read_text() == content
