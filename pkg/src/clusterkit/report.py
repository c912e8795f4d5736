"""CSV and SVG output for experiment records."""

from __future__ import annotations

import csv
import io
import statistics
from collections import OrderedDict
from dataclasses import fields
from pathlib import Path

from .experiment import CSV_FIELDS, MetricsRecord

SUMMARY_METRICS = ("ch_count", "avg_cluster_size", "coverage_pct", "overlap_degree",
                   "orphan_count", "rounds", "total_messages")

_TYPES = {f.name: f.type for f in fields(MetricsRecord)}


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write(path, text: str) -> None:
    try:
        Path(path).write_bytes(text.encode())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def records_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for r in records:
        writer.writerow([_cell(getattr(r, name)) for name in CSV_FIELDS])
    return buf.getvalue()


def emit_csv(records, path) -> None:
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    _write(path, records_to_csv(records))


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_FIELDS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        out = []
        for row in reader:
            values = {}
            for name in CSV_FIELDS:
                kind = _TYPES[name]
                raw = row[name]
                if kind == "str":
                    values[name] = raw
                elif kind == "float":
                    values[name] = float(raw)
                else:
                    values[name] = int(raw)
            out.append(MetricsRecord(**values))
        return out


def summarize(records, axis: str) -> list:
    """Mean and population standard deviation of each metric per axis value."""
    groups: "OrderedDict" = OrderedDict()
    for r in records:
        groups.setdefault(getattr(r, axis), []).append(r)
    rows = []
    for value, group in groups.items():
        row = {axis: value, "runs": len(group)}
        for metric in SUMMARY_METRICS:
            xs = [float(getattr(r, metric)) for r in group]
            row[f"{metric}_mean"] = statistics.fmean(xs)
            row[f"{metric}_std"] = statistics.pstdev(xs) if len(xs) > 1 else 0.0
        rows.append(row)
    return rows


def emit_summary_csv(rows, path) -> None:
    if not rows:
        raise ValueError("no rows to write")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(rows[0])
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(row[h]) for h in header])
    _write(path, buf.getvalue())


def emit_plot(records, path, axis: str = "node_count",
              metrics=("ch_count", "avg_cluster_size", "coverage_pct", "rounds")) -> None:
    """Mean +- standard deviation of a few metrics against the sweep axis, as SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    records = list(records)
    if not records:
        raise ValueError("no records to plot")
    rows = summarize(records, axis)
    xs = [row[axis] for row in rows]
    fig, axes = plt.subplots(1, len(metrics), figsize=(4 * len(metrics), 3.2))
    if len(metrics) == 1:
        axes = [axes]
    for ax, metric in zip(axes, metrics):
        ax.errorbar(xs, [row[f"{metric}_mean"] for row in rows],
                    yerr=[row[f"{metric}_std"] for row in rows], marker="o", capsize=3)
        ax.set_xlabel(axis)
        ax.set_title(metric)
    fig.suptitle(records[0].algorithm)
    fig.tight_layout()
    try:
        # a fixed hash salt keeps clip-path ids, and so the file bytes, stable
        with matplotlib.rc_context({"svg.hashsalt": "clusterkit"}):
            fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    finally:
        plt.close(fig)
