"""Evaluation reports: CSV tables, a text summary and an optional SVG chart.

Floats are written with ``repr`` so reruns produce identical bytes.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

from .metrics import Metrics
from .pipeline import Evaluation

RATE_NAMES = ("sensitivity", "specificity", "false_positive_rate", "false_negative_rate",
              "accuracy")


def _num(value) -> str:
    return "" if value is None else repr(float(value))


def _csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def metrics_csv(ev: Evaluation) -> str:
    c = ev.counts
    rows = [("quantity", "value"), ("tp", c.tp), ("fp", c.fp), ("tn", c.tn), ("fn", c.fn)]
    rows += [(name, _num(getattr(ev.metrics, name))) for name in RATE_NAMES]
    return _csv(rows)


def per_image_csv(ev: Evaluation) -> str:
    rows = [("subject_id", "source", "kind", "predicted", "score", "accepted", "outcome")]
    for r in ev.rows:
        rows.append((r.subject_id, r.source, r.kind, r.predicted, _num(r.score),
                     str(r.accepted).lower(), r.outcome))
    return _csv(rows)


def _pct(value) -> str:
    return "absent" if value is None else f"{100.0 * value:.2f}%"


def summary_text(ev: Evaluation, threshold: float | None = None, metric: str | None = None) -> str:
    c, m = ev.counts, ev.metrics
    lines = [
        "evaluation summary",
        f"positive test images: {c.tp + c.fn}",
        f"negative test images: {c.fp + c.tn}",
        f"TP={c.tp} FP={c.fp} TN={c.tn} FN={c.fn}",
    ]
    if metric is not None:
        lines.append(f"metric: {metric}")
    if threshold is not None:
        lines.append(f"acceptance threshold: {threshold!r}")
    lines += [f"{name}: {_pct(getattr(m, name))}" for name in RATE_NAMES]
    return "\n".join(lines) + "\n"


def bar_chart_svg(runs: list[tuple[str, Metrics]], width: int = 480, height: int = 240) -> str:
    """Grouped bars of sensitivity and specificity, one group per run."""
    margin, axis_h = 40, height - 80
    colors = {"sensitivity": "#3465a4", "specificity": "#f57900"}
    group_w = (width - 2 * margin) / max(1, len(runs))
    bar_w = group_w / 3
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{margin + axis_h}" x2="{width - margin}" '
        f'y2="{margin + axis_h}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{margin + axis_h}" stroke="black"/>',
        f'<text x="{margin - 4}" y="{margin + 4}" font-size="10" text-anchor="end">1</text>',
        f'<text x="{margin - 4}" y="{margin + axis_h}" font-size="10" text-anchor="end">0</text>',
    ]
    for g, (name, m) in enumerate(runs):
        x0 = margin + g * group_w + bar_w / 2
        for k, rate in enumerate(("sensitivity", "specificity")):
            value = getattr(m, rate)
            h = 0.0 if value is None else axis_h * value
            x = x0 + k * bar_w
            parts.append(
                f'<rect x="{x:.2f}" y="{margin + axis_h - h:.2f}" width="{bar_w:.2f}" '
                f'height="{h:.2f}" fill="{colors[rate]}"><title>{rate}: {_pct(value)}</title></rect>'
            )
        parts.append(
            f'<text x="{x0 + bar_w:.2f}" y="{margin + axis_h + 14}" font-size="11" '
            f'text-anchor="middle">{_escape(name)}</text>'
        )
    y = height - 18
    for k, rate in enumerate(("sensitivity", "specificity")):
        x = margin + k * 110
        parts.append(f'<rect x="{x}" y="{y - 9}" width="10" height="10" fill="{colors[rate]}"/>')
        parts.append(f'<text x="{x + 14}" y="{y}" font-size="11">{rate}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_report(ev: Evaluation, directory, threshold: float | None = None,
                 metric: str | None = None, svg: bool = False, run_name: str = "run") -> list[Path]:
    """Write ``metrics.csv``, ``per_image.csv``, ``summary.txt`` and optionally ``metrics.svg``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = {
        "metrics.csv": metrics_csv(ev),
        "per_image.csv": per_image_csv(ev),
        "summary.txt": summary_text(ev, threshold, metric),
    }
    if svg:
        files["metrics.svg"] = bar_chart_svg([(run_name, ev.metrics)])
    out = []
    for name, text in files.items():
        path = d / name
        path.write_text(text, encoding="utf-8", newline="\n")
        out.append(path)
    return out
