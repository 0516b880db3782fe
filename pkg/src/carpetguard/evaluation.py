"""Classification metrics, ROC AUC and report files.

The positive class is attack (label 1) throughout. Metrics whose
denominator is zero are reported as ``None`` ("undefined"), never as 0.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .exceptions import ReportParseError

RUN_LOG_COLUMNS = (
    "timestamp",
    "port",
    "features_digest",
    "prediction",
    "truth",
    "latency_s",
    "packet_in_count",
    "load_proxy",
    "action",
)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass
class MetricsReport:
    accuracy: float | None
    precision: float | None
    recall: float | None
    f1: float | None
    tp: int
    tn: int
    fp: int
    fn: int
    auc: float | None = None
    auc_kind: str = "none"
    mean_request_latency_s: float | None = None
    n_benign: int = 0
    n_attack: int = 0
    n_unclassified: int = 0
    extra: dict = field(default_factory=dict)


def _check_binary(values, name):
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0 and 1")
    return arr.astype(np.int64)


def confusion(predictions, truths) -> ConfusionMatrix:
    p = _check_binary(predictions, "predictions")
    t = _check_binary(truths, "truths")
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} predictions vs {t.size} truths")
    if p.size == 0:
        raise ValueError("need at least one prediction")
    return ConfusionMatrix(
        tp=int(np.sum((p == 1) & (t == 1))),
        tn=int(np.sum((p == 0) & (t == 0))),
        fp=int(np.sum((p == 1) & (t == 0))),
        fn=int(np.sum((p == 0) & (t == 1))),
    )


def _ratio(num, den):
    return num / den if den > 0 else None


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    accuracy = _ratio(cm.tp + cm.tn, cm.total)
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return MetricsReport(accuracy, precision, recall, f1, cm.tp, cm.tn, cm.fp, cm.fn,
                         n_benign=cm.tn + cm.fp, n_attack=cm.tp + cm.fn)


def roc_auc(scores, truths) -> float:
    """Area under the ROC curve via the rank-sum statistic, ties counted half."""
    s = np.asarray(scores, dtype=float)
    t = _check_binary(truths, "truths")
    if s.shape != t.shape:
        raise ValueError("scores and truths differ in length")
    n_pos = int(t.sum())
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC AUC needs both classes present")
    ranks = rankdata(s)  # average ranks resolve ties as half-credit
    return float((ranks[t == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


# -- report files --------------------------------------------------------------


def format_value(value):
    if value is None:
        return "undefined"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_report(report: MetricsReport, path, rows=None, csv_path=None) -> None:
    """Write ``key = value`` lines, plus the per-window CSV when rows are given."""
    path = Path(path)
    items = asdict(report)
    extra = items.pop("extra")
    lines = [f"{k} = {format_value(v)}" for k, v in items.items()]
    lines += [f"{k} = {format_value(v)}" for k, v in sorted(extra.items())]
    path.write_text("\n".join(lines) + "\n")
    if rows is not None:
        write_run_log(rows, csv_path or path.with_suffix(".csv"))


def _parse_value(text):
    if text == "undefined":
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def read_report(path) -> MetricsReport:
    values = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        key, sep, value = line.partition(" = ")
        if not sep:
            raise ReportParseError(f"{path}:{n}: expected 'key = value'")
        values[key] = _parse_value(value)
    known = {f for f in MetricsReport.__dataclass_fields__ if f != "extra"}
    base = {k: v for k, v in values.items() if k in known}
    for key in ("accuracy", "precision", "recall", "f1", "auc", "mean_request_latency_s"):
        if isinstance(base.get(key), int):
            base[key] = float(base[key])
    extra = {k: v for k, v in values.items() if k not in known}
    return MetricsReport(**base, extra=extra)


def write_run_log(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RUN_LOG_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row.get(c, "") for c in RUN_LOG_COLUMNS})


def read_run_log(path) -> list[dict]:
    """Parse a run-log CSV; malformed lines raise with their line number."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != RUN_LOG_COLUMNS:
            raise ReportParseError(f"{path}:1: unexpected header {header!r}")
        for record in reader:
            line = reader.line_num
            if len(record) != len(RUN_LOG_COLUMNS):
                raise ReportParseError(
                    f"{path}:{line}: expected {len(RUN_LOG_COLUMNS)} fields, got {len(record)}"
                )
            row = dict(zip(RUN_LOG_COLUMNS, record))
            try:
                row["timestamp"] = float(row["timestamp"])
                row["packet_in_count"] = int(row["packet_in_count"])
                row["load_proxy"] = float(row["load_proxy"])
            except ValueError as exc:
                raise ReportParseError(f"{path}:{line}: {exc}") from None
            rows.append(row)
    return rows
