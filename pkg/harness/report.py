from __future__ import annotations

import csv
import json
import math
import xml.etree.ElementTree as ET
from collections import OrderedDict
from datetime import datetime, timezone
from html import escape
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from harness.schemas import REPORT_COLUMNS, RegretRecord, RegretRow, SweepCell, SweepRow
from mdp.errors import ContractViolation, LabError

ReportFormat = Literal["csv", "json", "svg", "svg_lines", "html"]

SVG_NS = "http://www.w3.org/2000/svg"
# left, top, width, height of the plot area
FRAME = (70.0, 30.0, 560.0, 340.0)
PALETTE = ("#0f766e", "#b45309", "#1d4ed8", "#be123c", "#4d7c0f", "#6d28d9", "#374151")


class ReportError(LabError):
    pass


def _slugify(value: str) -> str:
    cleaned = "".join(ch if ch.isalnum() else "_" for ch in value.strip())
    while "__" in cleaned:
        cleaned = cleaned.replace("__", "_")
    return cleaned.strip("_") or "run"


def record_stem(record: RegretRecord) -> str:
    return f"{_slugify(record.config.name)}_{_slugify(record.learner)}_seed{record.seed}"


def write_csv(rows: Sequence[RegretRow], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow([repr(getattr(row, column)) for column in REPORT_COLUMNS])
    return path


def read_csv(path: str | Path) -> list[RegretRow]:
    with Path(path).open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
            raise ContractViolation(f"{path}: unexpected header {reader.fieldnames}")
        return [RegretRow(**row) for row in reader]


def _series(records: Sequence[RegretRecord]) -> OrderedDict[str, tuple[np.ndarray, np.ndarray]]:
    """Seed-averaged cumulative regret per learner on the checkpoints all its records share."""
    grouped: OrderedDict[str, list[RegretRecord]] = OrderedDict()
    for record in records:
        grouped.setdefault(record.learner, []).append(record)
    out: OrderedDict[str, tuple[np.ndarray, np.ndarray]] = OrderedDict()
    for label, members in grouped.items():
        common = set.intersection(*({row.k for row in r.rows} for r in members))
        ks = np.array(sorted(common), dtype=float)
        regrets = np.mean(
            [[row.regret for row in r.rows if row.k in common] for r in members],
            axis=0,
        )
        out[label] = (ks, np.asarray(regrets, dtype=float))
    return out


def _range(values: list[np.ndarray]) -> tuple[float, float]:
    flat = np.concatenate(values) if values else np.array([0.0])
    lo, hi = (float(flat.min()), float(flat.max())) if flat.size else (0.0, 1.0)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def render_svg(records: Sequence[RegretRecord], *, log_log: bool = True, title: str = "Cumulative regret") -> str:
    if not records:
        raise ContractViolation("report needs at least one record")
    series = _series(records)
    plotted: OrderedDict[str, tuple[np.ndarray, np.ndarray]] = OrderedDict()
    for label, (ks, regrets) in series.items():
        if log_log:
            keep = (ks > 0) & (regrets > 0)
            plotted[label] = (np.log10(ks[keep]), np.log10(regrets[keep]))
        else:
            plotted[label] = (ks, regrets)

    x_lo, x_hi = _range([x for x, _ in plotted.values()])
    y_lo, y_hi = _range([y for _, y in plotted.values()])
    left, top, width, height = FRAME

    def px(x: float) -> float:
        return left + (x - x_lo) / (x_hi - x_lo) * width

    def py(y: float) -> float:
        return top + height - (y - y_lo) / (y_hi - y_lo) * height

    def tick(value: float) -> str:
        shown = 10.0**value if log_log else value
        return f"{shown:.3g}"

    parts = [
        f'<svg xmlns="{SVG_NS}" width="{left + width + 200:.0f}" height="{top + height + 60:.0f}" '
        f'data-log-log="{int(log_log)}" data-x-range="{x_lo!r} {x_hi!r}" data-y-range="{y_lo!r} {y_hi!r}" '
        f'data-frame="{left} {top} {width} {height}">',
        f'<text x="{left}" y="{top - 10}" font-family="sans-serif" font-size="14">{escape(title)}'
        f'{" (log-log)" if log_log else ""}</text>',
        f'<rect x="{left}" y="{top}" width="{width}" height="{height}" fill="none" stroke="#9ca3af"/>',
    ]
    for i in range(5):
        fx = x_lo + (x_hi - x_lo) * i / 4
        fy = y_lo + (y_hi - y_lo) * i / 4
        parts.append(
            f'<text x="{px(fx):.1f}" y="{top + height + 18}" font-size="11" text-anchor="middle">{tick(fx)}</text>'
        )
        parts.append(f'<text x="{left - 6}" y="{py(fy):.1f}" font-size="11" text-anchor="end">{tick(fy)}</text>')
    parts.append(
        f'<text x="{left + width / 2}" y="{top + height + 40}" font-size="12" text-anchor="middle">episode k</text>'
    )

    for index, (label, (xs, ys)) in enumerate(plotted.items()):
        color = PALETTE[index % len(PALETTE)]
        points = " ".join(f"{px(x):.4f},{py(y):.4f}" for x, y in zip(xs, ys))
        parts.append(
            f'<polyline data-label="{escape(label)}" fill="none" stroke="{color}" stroke-width="2" points="{points}"/>'
        )
        parts.append(
            f'<text x="{left + width + 12}" y="{top + 16 + 18 * index}" font-size="12" fill="{color}">{escape(label)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def read_svg_series(path: str | Path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Recover (k, regret) per line from an emitted chart."""
    root = ET.parse(path).getroot()
    log_log = root.get("data-log-log") == "1"
    x_lo, x_hi = (float(v) for v in root.get("data-x-range").split())
    y_lo, y_hi = (float(v) for v in root.get("data-y-range").split())
    left, top, width, height = (float(v) for v in root.get("data-frame").split())
    out = {}
    for line in root.iter(f"{{{SVG_NS}}}polyline"):
        pairs = [p.split(",") for p in (line.get("points") or "").split()]
        pixels = np.array(pairs, dtype=float).reshape(-1, 2)
        xs = x_lo + (pixels[:, 0] - left) / width * (x_hi - x_lo)
        ys = y_lo + (top + height - pixels[:, 1]) / height * (y_hi - y_lo)
        if log_log:
            xs, ys = 10.0**xs, 10.0**ys
        out[line.get("data-label")] = (xs, ys)
    return out


def render_html(records: Sequence[RegretRecord], *, log_log: bool = True, generated_at: str | None = None) -> str:
    """Single-page summary: the regret chart plus the final-regret table."""
    generated_at = generated_at or datetime.now(timezone.utc).strftime("%Y-%m-%d %H:%M UTC")
    svg = render_svg(records, log_log=log_log)
    rows = "\n".join(
        f"<tr><td>{escape(r.learner)}</td><td>{r.seed}</td><td>{r.rows[-1].k}</td>"
        f"<td>{r.total_delay}</td><td>{r.max_delay}</td><td>{r.final_regret:.4f}</td></tr>"
        for r in records
    )
    names = sorted({r.config.name for r in records})
    return f"""<!doctype html>
<html lang="en">
<head>
  <meta charset="utf-8">
  <title>Regret report - {escape(", ".join(names))}</title>
  <style>
    body {{
      margin: 0;
      padding: 2rem 1rem;
      background: #f7f7f2;
      color: #1f2a30;
      font: 15px/1.5 "Georgia", "Times New Roman", serif;
    }}
    main {{
      max-width: 960px;
      margin: 0 auto;
      background: #ffffff;
      border: 1px solid #dfe5e7;
      border-radius: 14px;
      padding: 1.5rem;
    }}
    .meta {{ color: #637177; font-size: 0.9rem; }}
    table {{ border-collapse: collapse; width: 100%; }}
    th, td {{ border-bottom: 1px solid #dfe5e7; padding: 0.3rem 0.5rem; text-align: right; }}
    th:first-child, td:first-child {{ text-align: left; }}
  </style>
</head>
<body>
  <main>
    <h1>Regret report</h1>
    <p class="meta">Generated: {escape(generated_at)} &middot; {len(records)} run(s)</p>
    <section>
      {svg}
    </section>
    <section>
      <h2>Final regret</h2>
      <table>
        <tr><th>learner</th><th>seed</th><th>K</th><th>D</th><th>d_max</th><th>regret</th></tr>
        {rows}
      </table>
    </section>
  </main>
</body>
</html>
"""


def emit_report(
    records: Sequence[RegretRecord],
    out_dir: str | Path,
    format: ReportFormat = "csv",
    *,
    log_log: bool = True,
) -> list[Path]:
    """Write records as per-run CSV or JSON files, or one chart (svg / html)."""
    if not records:
        raise ContractViolation("report needs at least one record")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if format == "csv":
            return [write_csv(r.rows, out_dir / f"{record_stem(r)}.csv") for r in records]
        if format == "json":
            paths = []
            for r in records:
                path = out_dir / f"{record_stem(r)}.json"
                path.write_text(r.model_dump_json(indent=2), encoding="utf-8")
                paths.append(path)
            return paths
        if format in {"svg", "svg_lines"}:
            path = out_dir / "regret.svg"
            path.write_text(render_svg(records, log_log=log_log), encoding="utf-8")
            return [path]
        if format == "html":
            path = out_dir / "report.html"
            path.write_text(render_html(records, log_log=log_log), encoding="utf-8")
            return [path]
    except OSError as exc:
        raise ReportError(f"cannot write report to {out_dir}: {exc}") from exc
    raise ContractViolation(f"unknown report format: {format}")


def load_report(path: str | Path):
    """CSV -> rows, JSON -> RegretRecord, SVG -> recovered series."""
    path = Path(path)
    if path.suffix == ".csv":
        return read_csv(path)
    if path.suffix == ".json":
        return RegretRecord(**json.loads(path.read_text(encoding="utf-8")))
    if path.suffix == ".svg":
        return read_svg_series(path)
    raise ContractViolation(f"cannot load report {path}")


def load_records(directory: str | Path) -> list[RegretRecord]:
    """Every RegretRecord JSON in a directory, sorted by file name."""
    records = []
    for path in sorted(Path(directory).glob("*.json")):
        try:
            records.append(load_report(path))
        except (ValueError, TypeError):
            continue
    return records


def write_sweep(cells: Sequence[SweepCell], rows: Sequence[SweepRow], out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "sweep.csv"
    fields = list(SweepRow.model_fields)
    with csv_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow(row.model_dump())
    json_path = out_dir / "sweep.json"
    json_path.write_text(
        json.dumps(
            {"rows": [r.model_dump() for r in rows], "cells": [c.model_dump() for c in cells]},
            indent=2,
            allow_nan=False,
        ),
        encoding="utf-8",
    )
    return [csv_path, json_path]


def regret_slope(ks: np.ndarray, regrets: np.ndarray) -> float:
    """Least-squares slope of log regret against log k over the positive points."""
    ks, regrets = np.asarray(ks, dtype=float), np.asarray(regrets, dtype=float)
    keep = (ks > 0) & (regrets > 0)
    if keep.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(ks[keep]), np.log(regrets[keep]), 1)[0])
