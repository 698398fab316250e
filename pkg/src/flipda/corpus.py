"""Data model for tasks, examples, and generated candidates, plus JSONL I/O.

Datasets and candidate caches are line-delimited JSON, one record per line,
mirroring the shape of the original task distribution files. Loaders are
pure functions of file contents and the returned objects are treated as
immutable, so they are safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

Dataset = list["Example"]

_GENERATION_KEYS = ("method", "mask_ratio", "decode", "fill_strategy", "seed")
_CANDIDATE_KEYS = ("source_id", "fields", "intended_label", "generation", "consistency_ok")


class DatasetFormatError(ValueError):
    """A dataset or candidate-cache line failed validation.

    ``kind`` is one of: malformed-line, missing-field, unknown-label,
    duplicate-id. ``line`` is the 1-based line number.
    """

    def __init__(self, kind: str, line: int, message: str):
        super().__init__(f"line {line}: {message} [{kind}]")
        self.kind = kind
        self.line = line


@dataclass(frozen=True)
class LabelSet:
    """Ordered label ids and their verbalizations (e.g. entailment -> "Yes")."""

    labels: tuple[str, ...]
    verbalizer: dict[str, str]

    def __post_init__(self):
        if not self.labels:
            raise ValueError("label set must not be empty")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("label ids must be unique")
        if set(self.verbalizer) != set(self.labels):
            raise ValueError("verbalizer must cover exactly the label ids")
        verbs = list(self.verbalizer.values())
        if len(set(verbs)) != len(verbs):
            raise ValueError("verbalizations must be unique within a task")

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def __contains__(self, label: str) -> bool:
        return label in self.labels


@dataclass(frozen=True)
class TaskSpec:
    """A task's fields, labels, cloze templates, and flip policy.

    flip_policy: "full" (any target label), "none" (never flip; WSC),
    or "question_flip" (COPA: flipping swaps the choice and may flip the
    cause/effect question).
    """

    task_id: str
    text_fields: tuple[str, ...]
    label_set: LabelSet
    templates: dict[str, Any]  # label id -> cloze.ClozeTemplate
    flip_policy: str = "full"
    metrics: tuple[str, ...] = ("acc",)
    max_seq_tokens: int = 512
    requires_choices: bool = False
    requires_entities: bool = False

    def __post_init__(self):
        if self.flip_policy not in ("full", "none", "question_flip"):
            raise ValueError(f"unknown flip_policy {self.flip_policy!r}")
        if self.max_seq_tokens <= 0:
            raise ValueError("max_seq_tokens must be positive")
        for label, template in self.templates.items():
            if label not in self.label_set:
                raise ValueError(f"template for undeclared label {label!r}")
            referenced = getattr(template, "referenced_fields", None)
            if referenced is not None:
                extra = set(referenced()) - set(self.text_fields)
                if extra:
                    raise ValueError(f"template references undeclared fields {sorted(extra)}")

    def flip_targets(self, source_label: str) -> tuple[str, ...]:
        """Target labels a flip may assume for an example with ``source_label``."""
        if self.flip_policy == "none":
            return ()
        return tuple(l for l in self.label_set.labels if l != source_label)


@dataclass(frozen=True)
class Example:
    """One labeled training instance."""

    id: str
    fields: dict[str, str]
    label: str
    choices: tuple[str, ...] | None = None
    entities: tuple[str, ...] | None = None
    answers: tuple[str, ...] | None = None


@dataclass(frozen=True)
class GenerationInfo:
    """Provenance of one generated candidate."""

    method: str
    mask_ratio: float
    decode: str
    fill_strategy: str
    seed: int


@dataclass
class CandidateRecord:
    """One generated augmented instance with provenance.

    ``extra`` holds additional top-level keys (e.g. the selection stage's
    assigned_label / p_assigned); it is flattened into the JSON object on
    save and recovered on load, so round-trips are exact.
    """

    source_id: str
    fields: dict[str, str]
    intended_label: str
    generation: GenerationInfo
    consistency_ok: bool = True
    extra: dict[str, Any] = field(default_factory=dict)


def _normalize_label(raw: Any) -> str:
    # Original task files carry booleans (BoolQ/WiC/WSC) or ints (COPA/MultiRC).
    if isinstance(raw, bool):
        return "True" if raw else "False"
    return str(raw)


def _parse_line(line: str, lineno: int) -> dict[str, Any]:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError("malformed-line", lineno, f"invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise DatasetFormatError("malformed-line", lineno, "record is not an object")
    return obj


def load_dataset(path: str, task: TaskSpec) -> Dataset:
    """Load a line-delimited dataset and validate it against ``task``.

    Required keys per line: every task text field plus "label". Optional:
    "idx" (else ids are synthesized as "<task>:<line>"), "choices",
    "entities", "answers". Unknown keys are ignored.
    """
    examples: Dataset = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = _parse_line(line, lineno)
            for name in task.text_fields:
                if name not in obj:
                    raise DatasetFormatError("missing-field", lineno, f"missing field {name!r}")
            if "label" not in obj:
                raise DatasetFormatError("missing-field", lineno, "missing field 'label'")
            label = _normalize_label(obj["label"])
            if label not in task.label_set:
                raise DatasetFormatError("unknown-label", lineno, f"unknown label {label!r}")
            ex_id = str(obj["idx"]) if "idx" in obj else f"{task.task_id}:{lineno}"
            if ex_id in seen_ids:
                raise DatasetFormatError("duplicate-id", lineno, f"duplicate id {ex_id!r}")
            seen_ids.add(ex_id)
            choices = obj.get("choices")
            if task.requires_choices and not choices:
                raise DatasetFormatError("missing-field", lineno, "task requires 'choices'")
            if choices and not task.requires_choices:
                raise DatasetFormatError("malformed-line", lineno, "unexpected 'choices' for this task")
            entities = obj.get("entities")
            answers = obj.get("answers")
            if task.requires_entities and not entities:
                raise DatasetFormatError("missing-field", lineno, "task requires 'entities'")
            examples.append(
                Example(
                    id=ex_id,
                    fields={name: str(obj[name]) for name in task.text_fields},
                    label=label,
                    choices=tuple(choices) if choices else None,
                    entities=tuple(entities) if entities else None,
                    answers=tuple(answers) if answers else None,
                )
            )
    return examples


def save_dataset(path: str, examples: Dataset) -> None:
    """Write examples as line-delimited JSON; inverse of load_dataset.

    Labels are written in normalized string form, which load_dataset
    accepts, so save/load round-trips.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            obj: dict[str, Any] = {"idx": ex.id, "label": ex.label}
            obj.update(ex.fields)
            if ex.choices is not None:
                obj["choices"] = list(ex.choices)
            if ex.entities is not None:
                obj["entities"] = list(ex.entities)
            if ex.answers is not None:
                obj["answers"] = list(ex.answers)
            fh.write(json.dumps(obj, ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def candidate_to_obj(record: CandidateRecord) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "source_id": record.source_id,
        "fields": record.fields,
        "intended_label": record.intended_label,
        "generation": {
            "method": record.generation.method,
            "mask_ratio": record.generation.mask_ratio,
            "decode": record.generation.decode,
            "fill_strategy": record.generation.fill_strategy,
            "seed": record.generation.seed,
        },
        "consistency_ok": record.consistency_ok,
    }
    obj.update(record.extra)
    return obj


def save_candidates(path: str, candidates: list[CandidateRecord]) -> None:
    """Write one JSON object per candidate; inverse of load_candidates."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in candidates:
            fh.write(json.dumps(candidate_to_obj(record), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def load_candidates(path: str) -> list[CandidateRecord]:
    """Read a candidate cache written by save_candidates.

    Source ids are not resolved here; a candidate referencing an unknown
    source id is accepted at load time and rejected at selection time.
    """
    records: list[CandidateRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = _parse_line(line, lineno)
            for key in _CANDIDATE_KEYS:
                if key not in obj:
                    raise DatasetFormatError("missing-field", lineno, f"missing key {key!r}")
            gen = obj["generation"]
            if not isinstance(gen, dict):
                raise DatasetFormatError("malformed-line", lineno, "'generation' is not an object")
            for key in _GENERATION_KEYS:
                if key not in gen:
                    raise DatasetFormatError("missing-field", lineno, f"missing generation key {key!r}")
            extra = {k: v for k, v in obj.items() if k not in _CANDIDATE_KEYS}
            records.append(
                CandidateRecord(
                    source_id=str(obj["source_id"]),
                    fields={str(k): str(v) for k, v in obj["fields"].items()},
                    intended_label=str(obj["intended_label"]),
                    generation=GenerationInfo(
                        method=str(gen["method"]),
                        mask_ratio=float(gen["mask_ratio"]),
                        decode=str(gen["decode"]),
                        fill_strategy=str(gen["fill_strategy"]),
                        seed=int(gen["seed"]),
                    ),
                    consistency_ok=bool(obj["consistency_ok"]),
                    extra=extra,
                )
            )
    return records
