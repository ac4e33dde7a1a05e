"""Report file emission: metric tables, curves, history, and the ROC plot.

All tabular output is RFC-4180 CSV with a header row.  metrics.csv
rounds to four decimals for readability; every other file stores full
``repr`` precision so a report can be regenerated byte-identically and
downstream consumers can recompute metrics without rounding loss.
Undefined values (zero denominators, one-class score sets) are written
as the literal string ``undefined`` in metrics.csv and confusion.csv;
curve files for a one-class run contain only their header row.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

from .dataset import DatasetManifest
from .metrics import MetricsReport, ScoredSample
from .train import EpochStats

UNDEFINED = "undefined"

_SVG_SIZE = 320
_SVG_MARGIN = 20
_SVG_SPAN = _SVG_SIZE - 2 * _SVG_MARGIN


def _fixed(value: float | None) -> str:
    return UNDEFINED if value is None else f"{value:.4f}"


def _full(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def write_metrics_csv(report: MetricsReport, path: Path) -> None:
    rows = [
        ["accuracy", _fixed(report.accuracy)],
        ["precision", _fixed(report.precision)],
        ["recall", _fixed(report.recall)],
        ["f1", _fixed(report.f1)],
        ["kappa", _fixed(report.kappa)],
        ["auc", _fixed(report.auc)],
        ["average_precision", _fixed(report.average_precision)],
    ]
    _write_csv(path, ["metric", "value"], rows)


def write_confusion_csv(report: MetricsReport, path: Path) -> None:
    """Four count rows, each with its row-normalized rate."""
    cm = report.confusion
    norm = report.normalized
    cells = [
        ("tp", cm.tp, norm[0][0] if norm else None),
        ("fn", cm.fn, norm[0][1] if norm else None),
        ("fp", cm.fp, norm[1][0] if norm else None),
        ("tn", cm.tn, norm[1][1] if norm else None),
    ]
    rows = [
        [name, str(count), UNDEFINED if rate is None else _full(rate)]
        for name, count, rate in cells
    ]
    _write_csv(path, ["cell", "count", "normalized"], rows)


def write_roc_csv(report: MetricsReport, path: Path) -> None:
    points = report.roc_points or []
    rows = [[_full(t), _full(fpr), _full(tpr)] for t, fpr, tpr in points]
    _write_csv(path, ["threshold", "fpr", "tpr"], rows)


def write_pr_csv(report: MetricsReport, path: Path) -> None:
    points = report.pr_points or []
    rows = [[_full(t), _full(p), _full(r)] for t, p, r in points]
    _write_csv(path, ["threshold", "precision", "recall"], rows)


def write_history_csv(history: Sequence[EpochStats], path: Path) -> None:
    rows = [
        [str(s.epoch), _full(s.train_loss), _full(s.train_acc), _full(s.val_loss), _full(s.val_acc)]
        for s in history
    ]
    _write_csv(path, ["epoch", "train_loss", "train_acc", "val_loss", "val_acc"], rows)


def write_scores_csv(
    manifest: DatasetManifest,
    samples: Sequence[ScoredSample],
    predictions: Sequence[str],
    path: Path,
) -> None:
    """Per-image score table in manifest order, full precision."""
    rows = [
        [entry.path, entry.label, _full(sample.score), predicted]
        for entry, sample, predicted in zip(manifest.entries, samples, predictions)
    ]
    _write_csv(path, ["path", "label", "score", "prediction"], rows)


def read_scores_csv(path: str | Path):
    """Parse a scores.csv back into (manifest, samples, predictions)."""
    from .dataset import ManifestEntry
    from .errors import BadConfig

    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows or rows[0] != ["path", "label", "score", "prediction"]:
        raise BadConfig(f"{path} is not a scores CSV")
    entries, samples, predictions = [], [], []
    for row in rows[1:]:
        entries.append(ManifestEntry(row[0], row[1]))
        samples.append(ScoredSample(row[1], float(row[2])))
        predictions.append(row[3])
    return DatasetManifest(entries), samples, predictions


def read_history_csv(path: str | Path) -> list[EpochStats]:
    """Parse a history.csv back into epoch stats (timings not stored)."""
    from .errors import BadConfig

    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    header = ["epoch", "train_loss", "train_acc", "val_loss", "val_acc"]
    if not rows or rows[0] != header:
        raise BadConfig(f"{path} is not a history CSV")
    out = []
    for row in rows[1:]:
        out.append(
            EpochStats(
                epoch=int(row[0]),
                train_loss=float(row[1]),
                train_acc=float(row[2]),
                val_loss=float(row[3]) if row[3] else None,
                val_acc=float(row[4]) if row[4] else None,
                seconds=0.0,
            )
        )
    return out


def roc_svg(report: MetricsReport) -> str:
    """A standalone SVG: unit square, axis lines, and the ROC polyline."""
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_SIZE}" height="{_SVG_SIZE}" '
        f'viewBox="0 0 {_SVG_SIZE} {_SVG_SIZE}">',
        f'<rect x="{_SVG_MARGIN}" y="{_SVG_MARGIN}" width="{_SVG_SPAN}" height="{_SVG_SPAN}" '
        'fill="none" stroke="#cccccc"/>',
        f'<line x1="{_SVG_MARGIN}" y1="{_SVG_SIZE - _SVG_MARGIN}" '
        f'x2="{_SVG_SIZE - _SVG_MARGIN}" y2="{_SVG_SIZE - _SVG_MARGIN}" stroke="#000000"/>',
        f'<line x1="{_SVG_MARGIN}" y1="{_SVG_MARGIN}" '
        f'x2="{_SVG_MARGIN}" y2="{_SVG_SIZE - _SVG_MARGIN}" stroke="#000000"/>',
    ]
    if report.roc_points:
        coords = " ".join(
            f"{_SVG_MARGIN + fpr * _SVG_SPAN:.2f},{_SVG_MARGIN + (1.0 - tpr) * _SVG_SPAN:.2f}"
            for _, fpr, tpr in report.roc_points
        )
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="#1f77b4" stroke-width="2"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(
    report: MetricsReport,
    history: Sequence[EpochStats],
    out_dir: str | Path,
) -> list[Path]:
    """Write every report file into ``out_dir`` and list what was written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "metrics.csv": lambda p: write_metrics_csv(report, p),
        "confusion.csv": lambda p: write_confusion_csv(report, p),
        "roc.csv": lambda p: write_roc_csv(report, p),
        "pr.csv": lambda p: write_pr_csv(report, p),
        "history.csv": lambda p: write_history_csv(history, p),
    }
    written = []
    for name, writer in files.items():
        path = out / name
        writer(path)
        written.append(path)
    svg_path = out / "roc.svg"
    svg_path.write_text(roc_svg(report))
    written.append(svg_path)
    return written
