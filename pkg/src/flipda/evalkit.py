"""Metrics, per-task composite scores, the Avg column, and MaxDrop.

Values are percentages in [0, 100]. A task's composite score is the
arithmetic mean of its metric values; this is the only composite rule
consistent with the published average/robustness columns this kit
reconstructs. MaxDrop of a method against a baseline is the largest
per-task composite drop, clamped at zero:

    MD = max over tasks of max(0, composite_baseline - composite_method)

Internal math runs at full precision; display values round half-up to two
decimals.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping, Sequence

from .corpus import Dataset, TaskSpec
from .tasks import TASK_ORDER

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


def display_round(x: float, places: int = 2) -> float:
    """Round half-up for display; pre-rounding absorbs binary float noise."""
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(round(x, places + 6))).quantize(q, rounding=ROUND_HALF_UP))


def _check_lengths(preds: Sequence, golds: Sequence) -> None:
    if len(preds) != len(golds):
        raise ValueError(f"length mismatch: {len(preds)} preds vs {len(golds)} golds")
    if not golds:
        raise ValueError("empty inputs")


def accuracy(preds: Sequence[str], golds: Sequence[str]) -> float:
    _check_lengths(preds, golds)
    return 100.0 * sum(1 for p, g in zip(preds, golds) if p == g) / len(golds)


def macro_f1(preds: Sequence[str], golds: Sequence[str], labels: Sequence[str]) -> float:
    """Unweighted mean of per-class F1 over the declared labels.

    A class absent from both preds and golds contributes F1 = 0.
    """
    _check_lengths(preds, golds)
    if len(labels) < 2:
        raise ValueError("macro_f1 needs at least 2 labels")
    scores = []
    for label in labels:
        tp = sum(1 for p, g in zip(preds, golds) if p == label and g == label)
        fp = sum(1 for p, g in zip(preds, golds) if p == label and g != label)
        fn = sum(1 for p, g in zip(preds, golds) if p != label and g == label)
        scores.append(0.0 if tp == 0 else 100.0 * 2 * tp / (2 * tp + fp + fn))
    return sum(scores) / len(scores)


def binary_f1(preds: Sequence[str], golds: Sequence[str], positive: str = "1") -> float:
    """F1 of the positive class over the flattened answer-option set."""
    _check_lengths(preds, golds)
    tp = sum(1 for p, g in zip(preds, golds) if p == positive and g == positive)
    fp = sum(1 for p, g in zip(preds, golds) if p == positive and g != positive)
    fn = sum(1 for p, g in zip(preds, golds) if p != positive and g == positive)
    return 0.0 if tp == 0 else 100.0 * 2 * tp / (2 * tp + fp + fn)


def exact_match_grouped(preds: Sequence[str], golds: Sequence[str], groups: Sequence[str]) -> float:
    """Share of groups whose members are all predicted correctly."""
    _check_lengths(preds, golds)
    if len(groups) != len(preds):
        raise ValueError("groups must align with preds")
    ok: dict[str, bool] = {}
    for p, g, group in zip(preds, golds, groups):
        ok[group] = ok.get(group, True) and p == g
    return 100.0 * sum(ok.values()) / len(ok)


def token_f1(pred: str, golds: Sequence[str]) -> float:
    """Best word-token overlap F1 of pred against any gold string."""
    pred_tokens = [w.lower() for w in _WORD_RE.findall(pred)]
    best = 0.0
    for gold in golds:
        gold_tokens = [w.lower() for w in _WORD_RE.findall(gold)]
        if not pred_tokens or not gold_tokens:
            best = max(best, 100.0 if pred_tokens == gold_tokens else 0.0)
            continue
        remaining = list(gold_tokens)
        overlap = 0
        for tok in pred_tokens:
            if tok in remaining:
                remaining.remove(tok)
                overlap += 1
        if overlap:
            precision = overlap / len(pred_tokens)
            recall = overlap / len(gold_tokens)
            best = max(best, 100.0 * 2 * precision * recall / (precision + recall))
    return best


def composite_score(metrics: Mapping[str, float]) -> float:
    """Arithmetic mean of a task's metric values."""
    if not metrics:
        raise ValueError("no metric values")
    return sum(metrics.values()) / len(metrics)


@dataclass(frozen=True)
class TaskScore:
    task_id: str
    metrics: dict[str, float]

    @property
    def composite(self) -> float:
        return composite_score(self.metrics)


def avg_score(scores: Sequence[TaskScore]) -> float:
    """Mean of composites over tasks, display-rounded to 2 decimals."""
    if not scores:
        raise ValueError("no task scores")
    return display_round(sum(s.composite for s in scores) / len(scores))


def max_drop(baseline: Sequence[TaskScore], method: Sequence[TaskScore]) -> float:
    """Largest per-task composite drop against the baseline, clamped at 0."""
    base = {s.task_id: s.composite for s in baseline}
    meth = {s.task_id: s.composite for s in method}
    if set(base) != set(meth):
        raise ValueError(f"task sets differ: {sorted(base)} vs {sorted(meth)}")
    if not base:
        raise ValueError("no task scores")
    return display_round(max(max(0.0, base[t] - meth[t]) for t in base))


def _multirc_group(example_id: str) -> str:
    # MultiRC ids follow "questionId#answerIdx"; the group is the question.
    return example_id.rsplit("#", 1)[0]


def compute_metrics(task: TaskSpec, preds: Mapping[str, str], dataset: Dataset) -> dict[str, float]:
    """Compute the task's declared metrics from an id -> prediction map.

    Placeholder-style tasks score predictions against their answer strings
    (accuracy = exact membership; f1 = best token overlap — an approximation
    of the official scorer, flagged in the report footer); every other task
    compares predicted label ids. Missing predictions are an error.
    """
    if not dataset:
        raise ValueError("empty dataset")
    missing = [ex.id for ex in dataset if ex.id not in preds]
    if missing:
        raise ValueError(f"missing predictions for {len(missing)} examples (first: {missing[0]})")
    ordered_preds = [preds[ex.id] for ex in dataset]
    out: dict[str, float] = {}
    for metric in task.metrics:
        if task.requires_entities:
            gold_answers = [list(ex.answers or ()) for ex in dataset]
            if metric == "acc":
                out[metric] = 100.0 * sum(
                    1 for p, golds in zip(ordered_preds, gold_answers) if p in golds
                ) / len(dataset)
            elif metric == "f1":
                out[metric] = sum(token_f1(p, golds) for p, golds in zip(ordered_preds, gold_answers)) / len(dataset)
            else:
                raise ValueError(f"unsupported metric {metric!r} for {task.task_id}")
            continue
        golds = [ex.label for ex in dataset]
        if metric == "acc":
            out[metric] = accuracy(ordered_preds, golds)
        elif metric == "f1":
            out[metric] = macro_f1(ordered_preds, golds, task.label_set.labels)
        elif metric == "f1a":
            out[metric] = binary_f1(ordered_preds, golds, positive=task.label_set.labels[-1])
        elif metric == "em":
            out[metric] = exact_match_grouped(ordered_preds, golds, [_multirc_group(ex.id) for ex in dataset])
        else:
            raise ValueError(f"unknown metric {metric!r}")
    return out


@dataclass
class ReportTable:
    rows: dict[str, list[TaskScore]]  # method -> scores (shared task order)
    baseline_method: str
    avg: dict[str, float]
    maxdrop: dict[str, float]  # baseline itself is absent


def _task_sort_key(task_id: str):
    try:
        return (0, TASK_ORDER.index(task_id))
    except ValueError:
        return (1, task_id)


def build_report(runs: Mapping[str, Sequence[TaskScore]], baseline_method: str) -> tuple[ReportTable, str]:
    """Assemble the score table and its plain-text rendering.

    Methods keep their input order (baseline first if not already); tasks
    follow the canonical column order. All methods must cover the same
    task set.
    """
    if not runs:
        raise ValueError("no runs to report")
    if baseline_method not in runs:
        raise ValueError(f"baseline method {baseline_method!r} not in runs")
    task_sets = {m: frozenset(s.task_id for s in scores) for m, scores in runs.items()}
    base_tasks = task_sets[baseline_method]
    for method, tasks in task_sets.items():
        if tasks != base_tasks:
            raise ValueError(f"method {method!r} covers different tasks than the baseline")
    if not base_tasks:
        raise ValueError("no task scores")
    task_order = sorted(base_tasks, key=_task_sort_key)

    methods = [baseline_method] + [m for m in runs if m != baseline_method]
    rows: dict[str, list[TaskScore]] = {}
    for method in methods:
        by_task = {s.task_id: s for s in runs[method]}
        rows[method] = [by_task[t] for t in task_order]
    avg = {m: avg_score(rows[m]) for m in methods}
    maxdrop = {m: max_drop(rows[baseline_method], rows[m]) for m in methods if m != baseline_method}

    header = ["Method"] + list(task_order) + ["Avg.", "MD"]
    lines = [header]
    for method in methods:
        cells = [method]
        for score in rows[method]:
            ordered = [score.metrics[k] for k in sorted(score.metrics)]
            cells.append("/".join(f"{display_round(v):.2f}" for v in ordered))
        cells.append(f"{avg[method]:.2f}")
        cells.append("-" if method == baseline_method else f"{maxdrop[method]:.2f}")
        lines.append(cells)
    widths = [max(len(row[i]) for row in lines) for i in range(len(header))]
    rendered = "\n".join(
        "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip() for row in lines
    )
    return ReportTable(rows=rows, baseline_method=baseline_method, avg=avg, maxdrop=maxdrop), rendered


def cells_to_scores(cells: Sequence[Mapping]) -> dict[str, list[TaskScore]]:
    """Group flat (method, task, metric, value) records into TaskScores."""
    grouped: dict[str, dict[str, dict[str, float]]] = {}
    for cell in cells:
        grouped.setdefault(str(cell["method"]), {}).setdefault(str(cell["task"]), {})[
            str(cell["metric"])
        ] = float(cell["value"])
    return {
        method: [TaskScore(task_id=t, metrics=m) for t, m in tasks.items()]
        for method, tasks in grouped.items()
    }


def write_cells(path: str, method: str, task_id: str, metrics: Mapping[str, float], append: bool = True) -> None:
    """Emit one machine-readable line per metric value."""
    with open(path, "a" if append else "w", encoding="utf-8") as fh:
        for metric in sorted(metrics):
            fh.write(
                json.dumps(
                    {"method": method, "task": task_id, "metric": metric, "value": metrics[metric]},
                    sort_keys=True,
                )
            )
            fh.write("\n")


def load_cells(paths: Sequence[str]) -> list[dict]:
    cells = []
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    cells.append(json.loads(line))
    return cells


def report_records(table: ReportTable) -> list[dict]:
    """Flatten a ReportTable into (method, task, metric, value) records."""
    out = []
    for method, scores in table.rows.items():
        for score in scores:
            for metric in sorted(score.metrics):
                out.append(
                    {"method": method, "task": score.task_id, "metric": metric, "value": score.metrics[metric]}
                )
        out.append({"method": method, "task": "all", "metric": "avg", "value": table.avg[method]})
        if method != table.baseline_method:
            out.append({"method": method, "task": "all", "metric": "md", "value": table.maxdrop[method]})
    return out
