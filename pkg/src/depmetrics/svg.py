"""Standalone SVG renderings: heatmap grids, rho curves, coverage tables.

Output is plain string assembly with stable formatting, so equal inputs
produce identical documents.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .occlusion import Heatmap, PixelSets
from .scenario import CoverageReport
from .model import ScenarioSpace

CELL = 24
PAD = 40

HOT_STROKE = "#ff8c00"
OCC_FILL = "#4477aa"


def _esc(s: str) -> str:
    return (
        str(s)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def _gray(value: float) -> str:
    level = int(round(255 * max(0.0, min(1.0, value))))
    return f"#{level:02x}{level:02x}{level:02x}"


def _header(width: int, height: int, title: str) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<title>{_esc(title)}</title>",
    ]


def render_heatmap_svg(heatmap: Heatmap, sets: PixelSets | None = None) -> str:
    """Grid of confidence cells; hot cells stroked, occluding cells tinted."""
    width = heatmap.cols * CELL + 2 * PAD
    height = heatmap.rows * CELL + 2 * PAD
    title = f"occlusion heatmap: {heatmap.target.class_label}"
    out = _header(width, height, title)
    hot = sets.hot if sets is not None else frozenset()
    occluding = sets.occluding if sets is not None else frozenset()
    for r in range(heatmap.rows):
        for c in range(heatmap.cols):
            value = heatmap.grid[r, c]
            classes = ["cell"]
            if (r, c) in hot:
                classes.append("hot")
            if (r, c) in occluding:
                classes.append("occ")
            x = PAD + c * CELL
            y = PAD + r * CELL
            fill = "#ffffff" if math.isnan(value) else _gray(value)
            extra = ""
            if (r, c) in occluding:
                extra += f' fill-opacity="0.65" stroke="{OCC_FILL}" stroke-width="1"'
            if (r, c) in hot:
                extra += f' stroke="{HOT_STROKE}" stroke-width="3"'
            out.append(
                f'<rect class="{" ".join(classes)}" x="{x}" y="{y}" '
                f'width="{CELL}" height="{CELL}" fill="{fill}"{extra}/>'
            )
    label = title
    if sets is not None:
        label += f" (rho={sets.rho:g}, hot={len(hot)}, occluding={len(occluding)})"
    out.append(f'<text x="{PAD}" y="{PAD - 12}" font-size="12">{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _polyline(points: list[tuple[float, float]], color: str, cls: str) -> str:
    coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    return (
        f'<polyline class="{cls}" points="{coords}" fill="none" '
        f'stroke="{color}" stroke-width="2"/>'
    )


def render_rho_curve_svg(points, width: int = 480, height: int = 320) -> str:
    """Sweep curves over rho: occlusion-sensitivity always, precision where defined."""
    out = _header(width, height, "metrics over rho")
    x0, y0 = PAD, height - PAD
    x1, y1 = width - PAD, PAD

    def sx(rho: float) -> float:
        return x0 + rho * (x1 - x0)

    def sy(v: float | Fraction) -> float:
        return y0 - float(v) * (y0 - y1)

    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="#000"/>')
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="#000"/>')
    out.append(f'<text x="{x1 - 18}" y="{y0 + 24}" font-size="11">rho</text>')
    occsen = [(sx(p.rho), sy(p.occsen)) for p in points]
    if occsen:
        out.append(_polyline(occsen, OCC_FILL, "occsen"))
    run: list[tuple[float, float]] = []
    for p in points:
        if p.interpret is None:
            if len(run) > 1:
                out.append(_polyline(run, HOT_STROKE, "interpret"))
            run = []
        else:
            run.append((sx(p.rho), sy(p.interpret)))
    if len(run) > 1:
        out.append(_polyline(run, HOT_STROKE, "interpret"))
    out.append(
        f'<text x="{x0}" y="{y1 - 8}" font-size="11">'
        f'<tspan fill="{OCC_FILL}">occlusion-sensitivity</tspan> / '
        f'<tspan fill="{HOT_STROKE}">interpretation precision</tspan></text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_coverage_svg(report: CoverageReport, space: ScenarioSpace) -> str:
    """One occupancy grid per condition pair; occupied cells are filled."""
    blocks = []
    x_cursor = PAD
    height = 0
    for table in report.tables:
        i, j = table.pair
        ci, cj = space.conditions[i], space.conditions[j]
        block_width = cj.size * CELL
        block_height = ci.size * CELL
        cells = []
        for r, vi in enumerate(ci.values):
            for c, vj in enumerate(cj.values):
                occupied = (vi, vj) in table.occupied
                fill = OCC_FILL if occupied else "#ffffff"
                cls = "pair occupied" if occupied else "pair empty"
                cells.append(
                    f'<rect class="{cls}" x="{x_cursor + c * CELL}" y="{PAD + CELL + r * CELL}" '
                    f'width="{CELL}" height="{CELL}" fill="{fill}" stroke="#888"/>'
                )
        label = f"{ci.name} x {cj.name}"
        cells.append(
            f'<text x="{x_cursor}" y="{PAD + CELL - 8}" font-size="11">{_esc(label)}</text>'
        )
        blocks.append("\n".join(cells))
        x_cursor += block_width + CELL
        height = max(height, block_height)
    width = x_cursor + PAD - CELL
    total_height = PAD + CELL + height + PAD
    out = _header(width, total_height, f"scenario coverage {report.rational}")
    out.extend(blocks)
    out.append(
        f'<text x="{PAD}" y="{total_height - 12}" font-size="12">'
        f"coverage {report.rational} = {report.value:.4f}</text>"
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"
