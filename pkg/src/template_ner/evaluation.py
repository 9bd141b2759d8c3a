"""Entity-level precision/recall/F1.

An entity counts as correct only when start, end, and label all match
exactly; headline numbers are micro-averaged over the pooled corpus counts.
Per-type breakdowns and training-frequency bucket breakdowns reuse the same
counting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .corpus import Corpus, EntitySpan, corpus_stats

BUCKET_NAMES = ("high", "mid", "low")


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    per_type: dict[str, "EvalReport"] = field(default_factory=dict)
    buckets: dict[str, "EvalReport"] | None = None


def _report_from_counts(tp: int, fp: int, fn: int) -> EvalReport:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalReport(precision, recall, f1, tp, fp, fn)


def _count(
    predicted: Sequence[Sequence[EntitySpan]],
    gold: Sequence[Sequence[EntitySpan]],
) -> tuple[int, int, int]:
    tp = fp = fn = 0
    for pred_sent, gold_sent in zip(predicted, gold):
        pred_set = set(pred_sent)
        gold_set = set(gold_sent)
        tp += len(pred_set & gold_set)
        fp += len(pred_set - gold_set)
        fn += len(gold_set - pred_set)
    return tp, fp, fn


def evaluate(
    predicted: Sequence[Sequence[EntitySpan]],
    gold: Sequence[Sequence[EntitySpan]],
) -> EvalReport:
    """Micro P/R/F1 over per-sentence entity span lists, with a per-type
    breakdown attached."""
    if len(predicted) != len(gold):
        raise ValueError(
            f"sentence count mismatch: {len(predicted)} predicted vs {len(gold)} gold"
        )
    report = _report_from_counts(*_count(predicted, gold))
    labels = sorted(
        {s.label for sent in predicted for s in sent}
        | {s.label for sent in gold for s in sent}
    )
    for label in labels:
        pred_l = [[s for s in sent if s.label == label] for sent in predicted]
        gold_l = [[s for s in sent if s.label == label] for sent in gold]
        report.per_type[label] = _report_from_counts(*_count(pred_l, gold_l))
    return report


def per_type_report(
    predicted: Sequence[Sequence[EntitySpan]],
    gold: Sequence[Sequence[EntitySpan]],
) -> dict[str, EvalReport]:
    return evaluate(predicted, gold).per_type


def frequency_buckets(
    train: Corpus,
    test: Corpus,
    by: str = "types",
) -> dict[str, list[str]]:
    """Partition the test entity types into high/mid/low buckets by their
    training-set mention frequency.

    "types" (default) splits the ranked type list into tertiles of
    ceil(k/3) high and floor(k/3) low types; "mentions" instead grows the
    high bucket until it covers a third of the training mention mass, then
    the mid bucket until two thirds. Frequency ties rank by label name.
    """
    if len(train) == 0:
        raise ValueError("train corpus is empty")
    if by not in ("types", "mentions"):
        raise ValueError(f"unknown bucketing mode {by!r}")
    counts = corpus_stats(train).mention_count_per_label
    types = sorted(test.label_set, key=lambda t: (-counts.get(t, 0), t))
    k = len(types)
    if k == 0:
        return {name: [] for name in BUCKET_NAMES}
    if by == "types":
        hi = math.ceil(k / 3)
        lo = math.floor(k / 3)
        return {
            "high": types[:hi],
            "mid": types[hi : k - lo],
            "low": types[k - lo :] if lo else [],
        }
    total = sum(counts.get(t, 0) for t in types)
    if total == 0:
        return frequency_buckets(train, test, by="types")
    buckets: dict[str, list[str]] = {name: [] for name in BUCKET_NAMES}
    acc = 0
    for t in types:
        acc += counts.get(t, 0)
        if acc <= total / 3 or not buckets["high"]:
            buckets["high"].append(t)
        elif acc <= 2 * total / 3 or not buckets["mid"]:
            buckets["mid"].append(t)
        else:
            buckets["low"].append(t)
    return buckets


def evaluate_with_buckets(
    predicted: Sequence[Sequence[EntitySpan]],
    gold: Sequence[Sequence[EntitySpan]],
    train: Corpus,
    by: str = "types",
) -> EvalReport:
    """evaluate() plus per-bucket sub-reports restricted to each bucket's types."""
    report = evaluate(predicted, gold)
    test_labels = tuple(sorted({s.label for sent in gold for s in sent}))
    fake_test = Corpus((), test_labels)
    buckets = frequency_buckets(train, fake_test, by=by)
    report.buckets = {}
    for name, labels in buckets.items():
        label_set = set(labels)
        pred_b = [[s for s in sent if s.label in label_set] for sent in predicted]
        gold_b = [[s for s in sent if s.label in label_set] for sent in gold]
        report.buckets[name] = _report_from_counts(*_count(pred_b, gold_b))
    return report


def report_to_dict(report: EvalReport) -> dict:
    out = {
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
        "tp": report.tp,
        "fp": report.fp,
        "fn": report.fn,
    }
    if report.per_type:
        out["per_type"] = {k: report_to_dict(v) for k, v in report.per_type.items()}
    if report.buckets is not None:
        out["buckets"] = {k: report_to_dict(v) for k, v in report.buckets.items()}
    return out


def format_report(report: EvalReport) -> str:
    """Human-readable table: overall row, then per-type and bucket rows."""
    lines = [
        f"{'':12s} {'P':>8s} {'R':>8s} {'F1':>8s} {'TP':>6s} {'FP':>6s} {'FN':>6s}"
    ]

    def row(name: str, r: EvalReport) -> str:
        return (
            f"{name:12s} {r.precision:8.4f} {r.recall:8.4f} {r.f1:8.4f} "
            f"{r.tp:6d} {r.fp:6d} {r.fn:6d}"
        )

    lines.append(row("overall", report))
    for label in sorted(report.per_type):
        lines.append(row(label, report.per_type[label]))
    if report.buckets is not None:
        for name in BUCKET_NAMES:
            if name in report.buckets:
                lines.append(row(f"[{name}]", report.buckets[name]))
    return "\n".join(lines)
