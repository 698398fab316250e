"""Classifier-scored candidate selection and training-set assembly.

The default strategy follows the per-example set construction: for source
example i and target label y', the set S_(i,y') holds candidates whose
classifier argmax is y'; the single highest-probability member of each set
is selected and labeled y', and empty sets contribute nothing. The three
alternatives (global top-K, global top-P, diverse top-K) pool candidates
per transformation direction instead.

Ties anywhere break by (higher probability, source dataset order, candidate
cache order, label-set order), so selection is deterministic regardless of
traversal order.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .backends import ClassifierBackend, ClassifyRequest
from .corpus import CandidateRecord, Dataset, Example, TaskSpec

STRATEGIES = ("default", "global_topk", "global_topp", "diverse_topk", "all")


class SelectionError(ValueError):
    """A candidate references an unknown source example, or config is invalid."""


@dataclass(frozen=True)
class ScoredCandidate:
    candidate: CandidateRecord
    probs: tuple[float, ...]
    argmax_label: str
    p_max: float
    source_label: str
    source_index: int  # position of the source example in the dataset
    candidate_index: int  # position in the candidate cache

    def prob_of(self, label: str, task: TaskSpec) -> float:
        return self.probs[task.label_set.index(label)]


@dataclass(frozen=True)
class SelectionConfig:
    """Strategy choice plus the knobs the strategies share.

    ``require_label_agreement`` True keeps only candidates whose argmax
    equals their intended label; False lets every candidate join its
    argmax's set; None auto-calibrates (agreement on iff at least half of
    the scored pool passed the generation-consistency check).
    ``drop_inconsistent`` excludes consistency_ok=False candidates before
    scoring. ``directions`` restricts to (source label -> assigned label)
    pairs; None means all pairs.
    """

    strategy: str = "default"
    k: int | None = None
    rate: float | None = None
    p_threshold: float | None = None
    directions: frozenset[tuple[str, str]] | None = None
    require_label_agreement: bool | None = True
    include_preserved: bool = True
    include_flipped: bool = True
    drop_inconsistent: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise SelectionError(f"unknown strategy {self.strategy!r}")
        if self.strategy in ("global_topk", "diverse_topk"):
            if (self.k is None) == (self.rate is None):
                raise SelectionError(f"{self.strategy} needs exactly one of k or rate")
        if self.strategy == "global_topp" and self.p_threshold is None:
            raise SelectionError("global_topp needs p_threshold")
        if self.rate is not None and not 0 < self.rate <= 1:
            raise SelectionError("rate must be in (0, 1]")
        if self.k is not None and self.k < 0:
            raise SelectionError("k must be >= 0")


@dataclass(frozen=True)
class SelectedItem:
    record: CandidateRecord
    assigned_label: str
    p_assigned: float
    source_label: str
    source_index: int
    candidate_index: int

    @property
    def direction(self) -> tuple[str, str]:
        return (self.source_label, self.assigned_label)


@dataclass
class SelectionResult:
    selected: list[SelectedItem]
    per_direction_counts: dict[str, int] = field(default_factory=dict)
    skipped_empty_sets: int = 0


def direction_key(source_label: str, assigned_label: str) -> str:
    return f"{source_label}->{assigned_label}"


def render_for_classification(task: TaskSpec, ex: Example) -> str:
    """Classifier input text: field values in declared order, space joined.

    Choice tasks append the choices so the classifier can see them.
    """
    parts = [ex.fields[name] for name in task.text_fields]
    if task.requires_choices and ex.choices:
        parts.extend(ex.choices)
    return " ".join(parts)


def candidate_to_example(
    record: CandidateRecord,
    source: Example,
    aug_index: int,
    label: str | None = None,
) -> Example:
    """Materialize a candidate as an Example, inheriting non-text attributes.

    Placeholder tasks override the inherited answers with the entity the
    candidate was generated around (stored in its extra keys).
    """
    answers = record.extra.get("answers")
    return Example(
        id=f"{record.source_id}#aug{aug_index}",
        fields=dict(record.fields),
        label=label if label is not None else record.intended_label,
        choices=source.choices,
        entities=source.entities,
        answers=tuple(answers) if answers else source.answers,
    )


def _index_dataset(dataset: Dataset) -> dict[str, tuple[int, Example]]:
    return {ex.id: (i, ex) for i, ex in enumerate(dataset)}


def score_candidates(
    candidates: list[CandidateRecord],
    task: TaskSpec,
    backend: ClassifierBackend,
    dataset: Dataset,
    drop_inconsistent: bool = False,
) -> list[ScoredCandidate]:
    """Classify every candidate; order is preserved.

    With ``drop_inconsistent``, candidates that failed the generation
    consistency check are excluded before scoring.
    """
    by_id = _index_dataset(dataset)
    kept: list[tuple[int, CandidateRecord, int, Example]] = []
    for idx, record in enumerate(candidates):
        if drop_inconsistent and not record.consistency_ok:
            continue
        if record.source_id not in by_id:
            raise SelectionError(f"candidate {idx}: unknown source id {record.source_id!r}")
        src_index, src = by_id[record.source_id]
        kept.append((idx, record, src_index, src))
    if not kept:
        return []
    inputs = tuple(
        render_for_classification(task, candidate_to_example(record, src, idx))
        for idx, record, _, src in kept
    )
    resp = backend.classify(
        ClassifyRequest(task_id=task.task_id, rendered_inputs=inputs, labels=task.label_set.labels)
    )
    scored = []
    for (idx, record, src_index, src), probs in zip(kept, resp.probs):
        best = max(range(len(probs)), key=lambda i: (probs[i], -i))
        scored.append(
            ScoredCandidate(
                candidate=record,
                probs=tuple(probs),
                argmax_label=task.label_set.labels[best],
                p_max=probs[best],
                source_label=src.label,
                source_index=src_index,
                candidate_index=idx,
            )
        )
    return scored


def resolve_agreement(config: SelectionConfig, scored: list[ScoredCandidate]) -> bool:
    """Pin the agreement mode; None auto-calibrates on the scored pool."""
    if config.require_label_agreement is not None:
        return config.require_label_agreement
    if not scored:
        return True
    passed = sum(1 for s in scored if s.candidate.consistency_ok)
    return passed / len(scored) >= 0.5


def _sort_key(task: TaskSpec, sc: ScoredCandidate, p: float):
    return (-p, sc.source_index, sc.candidate_index, task.label_set.index(sc.argmax_label))


def _assignments(
    scored: list[ScoredCandidate],
    config: SelectionConfig,
    task: TaskSpec,
) -> list[tuple[ScoredCandidate, str, float]]:
    """(candidate, assigned label, p) triples surviving the eligibility rules."""
    agreement = resolve_agreement(config, scored)
    out = []
    for sc in scored:
        if agreement and sc.argmax_label != sc.candidate.intended_label:
            continue
        assigned = sc.argmax_label
        is_preserve = assigned == sc.source_label
        if is_preserve and not config.include_preserved:
            continue
        # flip_policy "none" bans flip-direction output even when the
        # classifier disagrees with the source label (agreement off).
        if not is_preserve and (not config.include_flipped or task.flip_policy == "none"):
            continue
        if config.directions is not None and (sc.source_label, assigned) not in config.directions:
            continue
        out.append((sc, assigned, sc.prob_of(assigned, task)))
    return out


def _to_item(sc: ScoredCandidate, assigned: str, p: float) -> SelectedItem:
    return SelectedItem(
        record=sc.candidate,
        assigned_label=assigned,
        p_assigned=p,
        source_label=sc.source_label,
        source_index=sc.source_index,
        candidate_index=sc.candidate_index,
    )


def _result(items: list[SelectedItem], skipped_empty_sets: int = 0) -> SelectionResult:
    counts: dict[str, int] = {}
    for item in items:
        key = direction_key(*item.direction)
        counts[key] = counts.get(key, 0) + 1
    return SelectionResult(selected=items, per_direction_counts=counts, skipped_empty_sets=skipped_empty_sets)


def _target_labels(source_label: str, config: SelectionConfig, task: TaskSpec) -> list[str]:
    targets = []
    for label in task.label_set.labels:
        if label == source_label and not config.include_preserved:
            continue
        if label != source_label:
            if not config.include_flipped or task.flip_policy == "none":
                continue
        if config.directions is not None and (source_label, label) not in config.directions:
            continue
        targets.append(label)
    return targets


def select_default(
    scored: list[ScoredCandidate],
    config: SelectionConfig,
    task: TaskSpec,
) -> SelectionResult:
    """Per (source example, target label) set, pick the top-probability member.

    skipped_empty_sets counts (source, target) pairs that the configuration
    asked for but whose set was empty.
    """
    triples = _assignments(scored, config, task)
    groups: dict[tuple[str, str], list[tuple[ScoredCandidate, str, float]]] = {}
    for sc, assigned, p in triples:
        groups.setdefault((sc.candidate.source_id, assigned), []).append((sc, assigned, p))

    sources: dict[str, tuple[int, str]] = {}
    for sc in scored:
        sources.setdefault(sc.candidate.source_id, (sc.source_index, sc.source_label))

    items = []
    skipped = 0
    for source_id, (_, source_label) in sorted(sources.items(), key=lambda kv: kv[1][0]):
        for target in _target_labels(source_label, config, task):
            members = groups.get((source_id, target), [])
            if not members:
                skipped += 1
                continue
            sc, assigned, p = min(members, key=lambda t: _sort_key(task, t[0], t[2]))
            items.append(_to_item(sc, assigned, p))
    return _result(items, skipped_empty_sets=skipped)


def _resolve_k(config: SelectionConfig, pool_size: int) -> int:
    if config.k is not None:
        return config.k
    # round() guards float noise in rate * pool (e.g. 0.2 * 15).
    return math.ceil(round(config.rate * pool_size, 9))


def _direction_pools(
    triples: list[tuple[ScoredCandidate, str, float]],
) -> dict[tuple[str, str], list[tuple[ScoredCandidate, str, float]]]:
    pools: dict[tuple[str, str], list[tuple[ScoredCandidate, str, float]]] = {}
    for sc, assigned, p in triples:
        pools.setdefault((sc.source_label, assigned), []).append((sc, assigned, p))
    return pools


def _pool_order(pools: dict) -> list:
    return sorted(pools.keys())


def select_global_topk(
    scored: list[ScoredCandidate],
    config: SelectionConfig,
    task: TaskSpec,
) -> SelectionResult:
    """Keep the top-K of each direction's pool (K = k or ceil(rate * pool))."""
    pools = _direction_pools(_assignments(scored, config, task))
    items = []
    for direction in _pool_order(pools):
        pool = sorted(pools[direction], key=lambda t: _sort_key(task, t[0], t[2]))
        for sc, assigned, p in pool[: _resolve_k(config, len(pool))]:
            items.append(_to_item(sc, assigned, p))
    return _result(items)


def select_global_topp(
    scored: list[ScoredCandidate],
    config: SelectionConfig,
    task: TaskSpec,
) -> SelectionResult:
    """Keep candidates with assigned-label probability >= the threshold (closed)."""
    pools = _direction_pools(_assignments(scored, config, task))
    items = []
    for direction in _pool_order(pools):
        pool = sorted(pools[direction], key=lambda t: _sort_key(task, t[0], t[2]))
        for sc, assigned, p in pool:
            if p >= config.p_threshold:
                items.append(_to_item(sc, assigned, p))
    return _result(items)


def select_diverse_topk(
    scored: list[ScoredCandidate],
    config: SelectionConfig,
    task: TaskSpec,
) -> SelectionResult:
    """Round-robin per-source ranks within each direction until K are kept."""
    pools = _direction_pools(_assignments(scored, config, task))
    items = []
    for direction in _pool_order(pools):
        pool = pools[direction]
        k = _resolve_k(config, len(pool))
        per_source: dict[str, list] = {}
        source_order: dict[str, int] = {}
        for sc, assigned, p in pool:
            per_source.setdefault(sc.candidate.source_id, []).append((sc, assigned, p))
            source_order.setdefault(sc.candidate.source_id, sc.source_index)
        for source_id in per_source:
            per_source[source_id].sort(key=lambda t: _sort_key(task, t[0], t[2]))
        taken = 0
        rank = 0
        ordered_sources = sorted(per_source, key=lambda s: source_order[s])
        while taken < k and any(rank < len(per_source[s]) for s in ordered_sources):
            for source_id in ordered_sources:
                if taken == k:
                    break
                if rank < len(per_source[source_id]):
                    items.append(_to_item(*per_source[source_id][rank]))
                    taken += 1
            rank += 1
    return _result(items)


def select_all(
    scored: list[ScoredCandidate],
    config: SelectionConfig,
    task: TaskSpec,
) -> SelectionResult:
    """Keep every eligible candidate; the baseline mixing recipes use this."""
    return _result([_to_item(sc, a, p) for sc, a, p in _assignments(scored, config, task)])


def run_selection(
    scored: list[ScoredCandidate],
    config: SelectionConfig,
    task: TaskSpec,
) -> SelectionResult:
    fn = {
        "default": select_default,
        "global_topk": select_global_topk,
        "global_topp": select_global_topp,
        "diverse_topk": select_diverse_topk,
        "all": select_all,
    }[config.strategy]
    return fn(scored, config, task)


def filter_directions(
    scored: list[ScoredCandidate],
    directions: frozenset[tuple[str, str]] | set[tuple[str, str]],
) -> list[ScoredCandidate]:
    """Keep candidates whose (source label -> argmax label) pair is listed."""
    return [sc for sc in scored if (sc.source_label, sc.argmax_label) in directions]


@dataclass(frozen=True)
class MixPolicy:
    """How originals and selections combine into the output training set."""

    n_copies: int = 1

    def __post_init__(self):
        if self.n_copies < 1:
            raise ValueError("n_copies must be >= 1")


def attach_assignments(result: SelectionResult) -> list[CandidateRecord]:
    """Copies of the selected records carrying assigned_label / p_assigned."""
    out = []
    for item in result.selected:
        record = item.record
        extra = dict(record.extra)
        extra["assigned_label"] = item.assigned_label
        extra["p_assigned"] = item.p_assigned
        out.append(
            CandidateRecord(
                source_id=record.source_id,
                fields=dict(record.fields),
                intended_label=record.intended_label,
                generation=record.generation,
                consistency_ok=record.consistency_ok,
                extra=extra,
            )
        )
    return out


def assemble_training_set(
    original: Dataset,
    result: SelectionResult,
    mix: MixPolicy,
    task: TaskSpec,
) -> Dataset:
    """Originals (repeated n_copies times) followed by the selections.

    Selections are ordered by direction, then source order, then candidate
    order. Repeated originals and augmented examples get id suffixes so the
    output remains loadable (ids stay unique).
    """
    by_id = _index_dataset(original)
    out: list[Example] = []
    for copy in range(mix.n_copies):
        for ex in original:
            if copy == 0:
                out.append(ex)
            else:
                out.append(
                    Example(
                        id=f"{ex.id}#copy{copy}",
                        fields=ex.fields,
                        label=ex.label,
                        choices=ex.choices,
                        entities=ex.entities,
                        answers=ex.answers,
                    )
                )
    label_index = {label: i for i, label in enumerate(task.label_set.labels)}
    ordered = sorted(
        result.selected,
        key=lambda it: (
            label_index[it.source_label],
            label_index[it.assigned_label],
            it.source_index,
            it.candidate_index,
        ),
    )
    counters: dict[str, int] = {}
    for item in ordered:
        if item.record.source_id not in by_id:
            raise SelectionError(f"selected candidate has unknown source id {item.record.source_id!r}")
        _, src = by_id[item.record.source_id]
        n = counters.get(item.record.source_id, 0)
        counters[item.record.source_id] = n + 1
        out.append(candidate_to_example(item.record, src, n, label=item.assigned_label))
    return out


_DIRECTION_RE = re.compile(r"^\s*(.+?)\s*->\s*(.+?)\s*$")


def parse_directions(specs: list[str], task: TaskSpec) -> frozenset[tuple[str, str]]:
    """Parse "src->dst" strings against the task's label set."""
    pairs = set()
    for spec in specs:
        m = _DIRECTION_RE.match(spec)
        if not m:
            raise SelectionError(f"bad direction {spec!r}; expected 'src->dst'")
        src, dst = m.group(1), m.group(2)
        for label in (src, dst):
            if label not in task.label_set:
                raise SelectionError(f"direction {spec!r}: unknown label {label!r}")
        pairs.add((src, dst))
    return frozenset(pairs)
