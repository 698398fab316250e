"""Pattern-based cloze engine: render, mask, fill, and the consistency filter.

An example and a target label render into a ClozeInstance: one or two text
parts, each an ordered list of units. Units come from template segments —
literal pattern text, a field slot carrying the example's (tokenized) field
text, or the label slot carrying the target label's verbalization. Only
word tokens inside maskable field slots are ever blanked; literals and the
label slot are immune by construction.

Field texts are re-extracted from the filled unit structure rather than by
string search: each unit remembers which field it came from, so span
boundaries survive fills of any length. A unit may override its extraction
text, which is how the answer entity spliced into a query at render time
turns back into "@placeholder" on the way out.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field, replace
from random import Random
from typing import Sequence

from .backends import (
    DecodeConfig,
    InfillBackend,
    InfillRequest,
    ProtocolError,
    blank_sentinel,
)
from .corpus import CandidateRecord, Dataset, Example, GenerationInfo, TaskSpec
from .hashing import derive_seed
from .lexops import Token, round_half_up, tokenize

log = logging.getLogger(__name__)

PLACEHOLDER = "@placeholder"
# Rendered stand-in for a blank that is pending but not part of the current
# request round (rand_iter_k only).
MASK_TOKEN = "[MASK]"

_RAND_ITER_RE = re.compile(r"^rand_iter_([1-9]\d*)$")
_TRAILING_PUNCT = ".,!?;:"

DECODE_NAMES = ("greedy", "sample_top15", "beam10")


class RenderError(ValueError):
    """The example cannot be rendered for the requested target label."""


class FlipNotAllowedError(RenderError):
    """A flip direction was requested for a task that never flips."""


@dataclass(frozen=True)
class Segment:
    """One template element: literal text, a field slot, or the label slot."""

    kind: str  # "literal" | "field" | "label"
    text: str = ""
    field: str | None = None
    maskable: bool = False


def lit(text: str) -> Segment:
    return Segment(kind="literal", text=text)


def field_slot(name: str, maskable: bool = True) -> Segment:
    return Segment(kind="field", field=name, maskable=maskable)


def label_slot() -> Segment:
    return Segment(kind="label")


@dataclass(frozen=True)
class ClozeTemplate:
    """Static segment list, or a split-pair recipe rendering one part per field."""

    segments: tuple[Segment, ...] = ()
    mode: str = "single"  # "single" | "split_pair"
    split_fields: tuple[str, ...] = ()

    def __post_init__(self):
        if self.mode not in ("single", "split_pair"):
            raise ValueError(f"unknown template mode {self.mode!r}")
        if self.mode == "single":
            if sum(1 for s in self.segments if s.kind == "label") > 1:
                raise ValueError("template may have at most one label slot")
        elif not self.split_fields:
            raise ValueError("split_pair template needs split_fields")

    def referenced_fields(self) -> tuple[str, ...]:
        if self.mode == "split_pair":
            return self.split_fields
        return tuple(s.field for s in self.segments if s.kind == "field")


@dataclass
class RenderUnit:
    """One rendered slot; field units hold tokens, others hold raw text."""

    kind: str
    text: str = ""
    field: str | None = None
    maskable: bool = False
    tokens: tuple[Token, ...] = ()
    extract_override: str | None = None


@dataclass
class ClozeInstance:
    task_id: str
    source_id: str
    direction: str  # "preserve" | "flip"
    source_label: str
    intended_label: str
    parts: tuple[tuple[RenderUnit, ...], ...]
    label_text: str | None
    base_fields: dict[str, str]
    field_overrides: dict[str, str] = field(default_factory=dict)
    extra_record_keys: dict = field(default_factory=dict)

    def maskable_positions(self) -> list[tuple[int, int, int]]:
        """(part, unit, token) index of every word token in a maskable slot."""
        out = []
        for pi, part in enumerate(self.parts):
            for ui, unit in enumerate(part):
                if unit.kind != "field" or not unit.maskable:
                    continue
                for ti, tok in enumerate(unit.tokens):
                    if tok.maskable:
                        out.append((pi, ui, ti))
        return out

    def label_slot_position(self) -> tuple[int, int] | None:
        for pi, part in enumerate(self.parts):
            for ui, unit in enumerate(part):
                if unit.kind == "label":
                    return (pi, ui)
        return None

    def part_text(self, pi: int) -> str:
        out = []
        for unit in self.parts[pi]:
            out.append("".join(t.surface for t in unit.tokens) if unit.kind == "field" else unit.text)
        return "".join(out)

    def text(self) -> str:
        return "\n".join(self.part_text(pi) for pi in range(len(self.parts)))


@dataclass(frozen=True)
class MaskPlan:
    positions: tuple[tuple[int, int, int], ...]  # sorted (part, unit, token)
    ratio: float
    seed: int


@dataclass(frozen=True)
class FillConfig:
    """Mask ratio, decode name, fill strategy and candidate count.

    Value-set restrictions (ratio in {0.3, 0.5, 0.8} etc.) are a search-space
    concern enforced at the CLI boundary, not here: the preserve-only
    masked-LM baseline runs this same engine at ratio 0.1.
    """

    mask_ratio: float = 0.5
    decode: str = "greedy"
    fill_strategy: str = "default"
    n_candidates: int = 10

    def __post_init__(self):
        if not 0 < self.mask_ratio <= 1:
            raise ValueError("mask_ratio must be in (0, 1]")
        if self.decode not in DECODE_NAMES:
            raise ValueError(f"unknown decode {self.decode!r}")
        if self.fill_strategy != "default" and not _RAND_ITER_RE.match(self.fill_strategy):
            raise ValueError(f"unknown fill_strategy {self.fill_strategy!r}")
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be >= 1")

    def rand_iter_k(self) -> int | None:
        m = _RAND_ITER_RE.match(self.fill_strategy)
        return int(m.group(1)) if m else None

    def decode_config(self, seed: int) -> DecodeConfig:
        strategy = {"greedy": "greedy", "sample_top15": "sample", "beam10": "beam"}[self.decode]
        return DecodeConfig(strategy=strategy, seed=seed)


def _field_unit(ex: Example, name: str, maskable: bool, text: str | None = None) -> RenderUnit:
    raw = ex.fields[name] if text is None else text
    return RenderUnit(kind="field", field=name, maskable=maskable, tokens=tokenize(raw).tokens)


def _render_static(task: TaskSpec, ex: Example, target: str) -> ClozeInstance:
    template: ClozeTemplate = task.templates[target]
    label_text = task.label_set.verbalizer[target]
    units = []
    for seg in template.segments:
        if seg.kind == "literal":
            units.append(RenderUnit(kind="literal", text=seg.text))
        elif seg.kind == "field":
            units.append(_field_unit(ex, seg.field, seg.maskable))
        else:
            units.append(RenderUnit(kind="label", text=label_text))
    return _instance(task, ex, target, (tuple(units),), label_text)


def _render_split_pair(task: TaskSpec, ex: Example, target: str, rng: Random, dataset: Dataset | None) -> ClozeInstance:
    # Each sentence is clozed separately; a sentence sampled from another
    # training example is appended as unmaskable context to push the fills
    # away from simply reconstructing the original. No label slot, so the
    # consistency check is vacuous for these instances.
    template: ClozeTemplate = task.templates[target]
    donors = [d for d in dataset if d.id != ex.id] if dataset else []
    parts = []
    for name in template.split_fields:
        units = [_field_unit(ex, name, maskable=True)]
        if donors:
            donor = donors[rng.randrange(len(donors))]
            donor_field = template.split_fields[rng.randrange(len(template.split_fields))]
            units.append(RenderUnit(kind="literal", text=". " + donor.fields[donor_field]))
        parts.append(tuple(units))
    return _instance(task, ex, target, tuple(parts), label_text=None)


def _render_choice_swap(task: TaskSpec, ex: Example, target: str, rng: Random) -> ClozeInstance:
    if not ex.choices or len(ex.choices) != len(task.label_set.labels):
        raise RenderError(f"{task.task_id} example {ex.id} needs one choice per label")
    choice = ex.choices[task.label_set.index(target)]
    question = ex.fields["question"]
    overrides: dict[str, str] = {}
    if target != ex.label and rng.random() < 0.5:
        question = "effect" if question == "cause" else "cause"
        overrides["question"] = question
    connective = " so that " if question == "effect" else ", because "
    units = (
        _field_unit(ex, "premise", maskable=True),
        RenderUnit(kind="literal", text=connective),
        RenderUnit(kind="label", text=choice),
    )
    return _instance(task, ex, target, (units,), label_text=choice, field_overrides=overrides)


def _render_placeholder_swap(task: TaskSpec, ex: Example, target: str, rng: Random) -> ClozeInstance:
    query = ex.fields["query"]
    if query.count(PLACEHOLDER) != 1:
        raise RenderError(f"example {ex.id}: query must contain {PLACEHOLDER} exactly once")
    answers = ex.answers or ()
    if target == ex.label:
        pool = list(answers)
    else:
        pool = [e for e in (ex.entities or ()) if e not in set(answers)]
    if not pool:
        raise RenderError(f"example {ex.id}: no candidate entities for target {target!r}")
    answer = pool[rng.randrange(len(pool))]
    pre, post = query.split(PLACEHOLDER)
    units = (
        _field_unit(ex, "query", maskable=True, text=pre),
        RenderUnit(kind="label", text=answer, field="query", extract_override=PLACEHOLDER),
        _field_unit(ex, "query", maskable=True, text=post),
        RenderUnit(kind="literal", text=". "),
        _field_unit(ex, "passage", maskable=True),
    )
    inst = _instance(task, ex, target, (units,), label_text=answer)
    inst.extra_record_keys["answers"] = [answer]
    return inst


def _instance(
    task: TaskSpec,
    ex: Example,
    target: str,
    parts: tuple[tuple[RenderUnit, ...], ...],
    label_text: str | None,
    field_overrides: dict[str, str] | None = None,
) -> ClozeInstance:
    return ClozeInstance(
        task_id=task.task_id,
        source_id=ex.id,
        direction="preserve" if target == ex.label else "flip",
        source_label=ex.label,
        intended_label=target,
        parts=parts,
        label_text=label_text,
        base_fields=dict(ex.fields),
        field_overrides=dict(field_overrides or {}),
    )


def render_cloze(
    task: TaskSpec,
    ex: Example,
    target_label: str,
    rng: Random,
    dataset: Dataset | None = None,
) -> ClozeInstance:
    """Render (example, target label) into a single maskable sequence.

    The rng drives only the render-time choices some tasks make: the
    question-flip coin, entity sampling, and donor-sentence sampling for
    split-pair templates (drawn from ``dataset`` when given).
    """
    if target_label not in task.label_set:
        raise RenderError(f"unknown target label {target_label!r} for task {task.task_id}")
    if target_label != ex.label and task.flip_policy == "none":
        raise FlipNotAllowedError(f"task {task.task_id} never flips labels")
    if task.flip_policy == "question_flip":
        return _render_choice_swap(task, ex, target_label, rng)
    if task.requires_entities:
        return _render_placeholder_swap(task, ex, target_label, rng)
    template = task.templates.get(target_label)
    if template is None:
        raise RenderError(f"task {task.task_id} has no template for label {target_label!r}")
    if template.mode == "split_pair":
        return _render_split_pair(task, ex, target_label, rng, dataset)
    return _render_static(task, ex, target_label)


def plan_mask(instance: ClozeInstance, ratio: float, seed: int) -> MaskPlan:
    """Sample round_half_up(ratio * maskable_count) positions to blank.

    An instance with no maskable tokens yields an empty plan; filling then
    degenerates to the identity and the candidates are flagged.
    """
    if not 0 < ratio <= 1:
        raise ValueError("ratio must be in (0, 1]")
    maskable = instance.maskable_positions()
    n = min(round_half_up(ratio * len(maskable)), len(maskable))
    positions = sorted(Random(seed).sample(maskable, n))
    return MaskPlan(positions=tuple(positions), ratio=ratio, seed=seed)


@dataclass
class FilledCandidate:
    """A candidate record plus the per-unit final texts it was cut from."""

    record: CandidateRecord
    unit_texts: tuple[tuple[str, ...], ...]


def _extract_fields(instance: ClozeInstance, unit_texts: Sequence[Sequence[str]]) -> dict[str, str]:
    fields = dict(instance.base_fields)
    collected: dict[str, list[str]] = {}
    for part, texts in zip(instance.parts, unit_texts):
        for unit, text in zip(part, texts):
            if unit.field is None:
                continue
            collected.setdefault(unit.field, []).append(
                unit.extract_override if unit.extract_override is not None else text
            )
    fields.update({name: "".join(pieces) for name, pieces in collected.items()})
    fields.update(instance.field_overrides)
    return fields


def _fill_one(
    instance: ClozeInstance,
    plan: MaskPlan,
    cfg: FillConfig,
    backend: InfillBackend,
    cand_seed: int,
) -> FilledCandidate | None:
    rng = Random(cand_seed)
    positions = list(plan.positions)
    blank_at = {pos: bid for bid, pos in enumerate(positions)}
    fills: dict[int, str] = {}
    pending = list(range(len(positions)))
    k = cfg.rand_iter_k()
    round_idx = 0
    while pending:
        chosen = sorted(pending if k is None else rng.sample(pending, min(k, len(pending))))
        chosen_set = set(chosen)
        for pi in sorted({positions[b][0] for b in chosen}):
            part_blanks = [b for b in chosen if positions[b][0] == pi]
            local = {bid: j for j, bid in enumerate(part_blanks)}
            pieces = []
            for ui, unit in enumerate(instance.parts[pi]):
                if unit.kind != "field":
                    pieces.append(unit.text)
                    continue
                for ti, tok in enumerate(unit.tokens):
                    bid = blank_at.get((pi, ui, ti))
                    if bid is None:
                        pieces.append(tok.surface)
                    elif bid in fills:
                        pieces.append(fills[bid])
                    elif bid in chosen_set:
                        pieces.append(blank_sentinel(local[bid]))
                    else:
                        pieces.append(MASK_TOKEN)
            decode = cfg.decode_config(seed=derive_seed(cand_seed, "round", round_idx, pi))
            req = InfillRequest(text="".join(pieces), blank_count=len(part_blanks), decode=decode)
            try:
                resp = backend.infill(req)
            except ProtocolError as exc:
                log.warning("dropping candidate for %s: %s", instance.source_id, exc)
                return None
            for j, bid in enumerate(part_blanks):
                fills[bid] = resp.fills[j]
        pending = [b for b in pending if b not in chosen_set]
        round_idx += 1

    unit_texts = []
    for pi, part in enumerate(instance.parts):
        texts = []
        for ui, unit in enumerate(part):
            if unit.kind != "field":
                texts.append(unit.text)
                continue
            surfaces = []
            for ti, tok in enumerate(unit.tokens):
                bid = blank_at.get((pi, ui, ti))
                surfaces.append(tok.surface if bid is None else fills[bid])
            texts.append("".join(surfaces))
        unit_texts.append(tuple(texts))

    extra = dict(instance.extra_record_keys)
    extra["direction"] = instance.direction
    if not positions:
        extra["degenerate"] = True
    record = CandidateRecord(
        source_id=instance.source_id,
        fields=_extract_fields(instance, unit_texts),
        intended_label=instance.intended_label,
        generation=GenerationInfo(
            method="flipda",
            mask_ratio=plan.ratio,
            decode=cfg.decode,
            fill_strategy=cfg.fill_strategy,
            seed=cand_seed,
        ),
        consistency_ok=True,
        extra=extra,
    )
    return FilledCandidate(record=record, unit_texts=tuple(unit_texts))


def fill_detailed(
    instance: ClozeInstance,
    plan: MaskPlan,
    cfg: FillConfig,
    backend: InfillBackend,
    base_seed: int | None = None,
) -> list[FilledCandidate]:
    """As fill(), but keeps the per-unit texts for downstream checks."""
    base = plan.seed if base_seed is None else base_seed
    out = []
    for j in range(cfg.n_candidates):
        fc = _fill_one(instance, plan, cfg, backend, derive_seed(base, "cand", j))
        if fc is not None:
            out.append(fc)
    return out


def fill(
    instance: ClozeInstance,
    plan: MaskPlan,
    cfg: FillConfig,
    backend: InfillBackend,
    base_seed: int | None = None,
) -> list[CandidateRecord]:
    """Produce cfg.n_candidates filled candidates from one mask plan.

    The default strategy sends every blank in one request per part;
    rand_iter_k repeatedly picks k random unfilled blanks (pending blanks
    outside the round render as a literal mask token), requesting fills
    until none remain — ceil(B/k) rounds for B blanks. A backend response
    with the wrong blank count drops that candidate with a warning.
    """
    return [fc.record for fc in fill_detailed(instance, plan, cfg, backend, base_seed)]


def _normalize_label_guess(text: str) -> str:
    return text.strip().rstrip(_TRAILING_PUNCT).strip().lower()


def consistency_check(
    instance: ClozeInstance,
    unit_texts: Sequence[Sequence[str]],
    task: TaskSpec,
    backend: InfillBackend,
    seed: int = 0,
) -> bool:
    """Re-present the filled candidate with its label slot blanked.

    True iff the backend's single-blank fill matches the intended label
    verbalization after case, whitespace and trailing-punctuation
    normalization.
    """
    slot = instance.label_slot_position()
    if slot is None:
        raise ValueError("instance has no label slot")
    pi, ui = slot
    pieces = [
        blank_sentinel(0) if j == ui else text
        for j, text in enumerate(unit_texts[pi])
    ]
    req = InfillRequest(text="".join(pieces), blank_count=1, decode=DecodeConfig(strategy="greedy", seed=seed))
    guess = backend.infill(req).fills[0]
    return _normalize_label_guess(guess) == _normalize_label_guess(instance.label_text or "")


def generate_candidates(
    task: TaskSpec,
    ex: Example,
    directions: set[str],
    cfg: FillConfig,
    backend: InfillBackend,
    seed: int = 0,
    dataset: Dataset | None = None,
    check: bool = True,
    drop_inconsistent: bool = False,
) -> list[CandidateRecord]:
    """Render, mask, fill and consistency-check cfg.n_candidates per direction.

    Each candidate gets its own render (the per-candidate question-flip coin
    and entity draws live there) and its own mask plan, all derived from the
    per-example ``seed``, so generation is deterministic and independent of
    traversal order. Failing directions are skipped with a warning; with
    ``drop_inconsistent`` candidates failing the check are omitted instead
    of just marked.
    """
    allowed = {ex.label, *task.flip_targets(ex.label)}
    bad = set(directions) - allowed
    if bad:
        raise FlipNotAllowedError(
            f"directions {sorted(bad)} not allowed for task {task.task_id} example with label {ex.label!r}"
        )
    out: list[CandidateRecord] = []
    for target in [l for l in task.label_set.labels if l in directions]:
        direction = "preserve" if target == ex.label else "flip"
        for j in range(cfg.n_candidates):
            cand_seed = derive_seed(seed, direction, target, j)
            try:
                instance = render_cloze(task, ex, target, Random(derive_seed(cand_seed, "render")), dataset=dataset)
            except RenderError as exc:
                log.warning("skipping %s direction for %s: %s", direction, ex.id, exc)
                break
            plan = plan_mask(instance, cfg.mask_ratio, seed=derive_seed(cand_seed, "mask"))
            filled = fill_detailed(
                instance, plan, replace(cfg, n_candidates=1), backend, base_seed=derive_seed(cand_seed, "fill")
            )
            if not filled:
                continue
            fc = filled[0]
            if check and instance.label_slot_position() is not None:
                ok = consistency_check(
                    instance, fc.unit_texts, task, backend, seed=derive_seed(cand_seed, "check")
                )
                fc.record.consistency_ok = ok
                if drop_inconsistent and not ok:
                    continue
            out.append(fc.record)
    return out
