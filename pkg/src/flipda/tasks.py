"""Built-in task definitions: fields, labels, verbalizers, cloze templates.

Eight few-shot classification tasks with their cloze patterns. Pattern
texts follow the augmentation recipes these tasks are usually run with;
literal punctuation and spacing are part of the pattern. Three tasks
have dynamic patterns handled by the engine rather than static segments:
the choice task swaps the selected choice (and sometimes the cause/effect
question) when flipping, the placeholder task splices a sampled entity
into its query, and the word-sense task switches to split-sentence
rendering when the target label is "different".
"""

from __future__ import annotations

from .cloze import ClozeTemplate, field_slot, label_slot, lit
from .corpus import LabelSet, TaskSpec

# Report column order; also the canonical task enumeration.
TASK_ORDER = ("boolq", "cb", "copa", "rte", "wic", "wsc", "multirc", "record")

_BOOLQ_TEMPLATE = ClozeTemplate(
    segments=(
        field_slot("question"),
        lit("?"),
        label_slot(),
        lit(", "),
        field_slot("passage"),
    )
)

_CB_TEMPLATE = ClozeTemplate(
    segments=(
        lit('"'),
        field_slot("hypothesis"),
        lit('" ?'),
        label_slot(),
        lit('. "'),
        field_slot("premise"),
        lit('"'),
    )
)

_RTE_TEMPLATE = ClozeTemplate(
    segments=(
        field_slot("hypothesis"),
        lit("?"),
        label_slot(),
        lit(", "),
        field_slot("premise"),
    )
)

_WIC_SAME_TEMPLATE = ClozeTemplate(
    segments=(
        field_slot("sentence1"),
        lit(". "),
        field_slot("sentence2"),
        lit('. Word " '),
        field_slot("word", maskable=False),
        lit(' " means the '),
        label_slot(),
        lit(" in the two sentences"),
    )
)

_WIC_DIFFERENT_TEMPLATE = ClozeTemplate(mode="split_pair", split_fields=("sentence1", "sentence2"))

_WSC_TEMPLATE = ClozeTemplate(
    segments=(
        field_slot("text"),
        lit(' Question: In the passage above, does the pronoun " '),
        field_slot("span2_text", maskable=False),
        lit(' " refer to " '),
        field_slot("span1_text", maskable=False),
        lit(' "? Answer: '),
        label_slot(),
        lit("."),
    )
)

_MULTIRC_TEMPLATE = ClozeTemplate(
    segments=(
        field_slot("question"),
        lit('? Is the correct answer "'),
        field_slot("answer"),
        lit('"?'),
        label_slot(),
        lit(". "),
        field_slot("passage"),
    )
)

TASKS: dict[str, TaskSpec] = {
    "boolq": TaskSpec(
        task_id="boolq",
        text_fields=("question", "passage"),
        label_set=LabelSet(labels=("False", "True"), verbalizer={"False": "No", "True": "Yes"}),
        templates={"False": _BOOLQ_TEMPLATE, "True": _BOOLQ_TEMPLATE},
        metrics=("acc",),
    ),
    "cb": TaskSpec(
        task_id="cb",
        text_fields=("premise", "hypothesis"),
        label_set=LabelSet(
            labels=("entailment", "contradiction", "neutral"),
            verbalizer={"entailment": "Yes", "contradiction": "No", "neutral": "Maybe"},
        ),
        templates={label: _CB_TEMPLATE for label in ("entailment", "contradiction", "neutral")},
        metrics=("acc", "f1"),
    ),
    "copa": TaskSpec(
        task_id="copa",
        text_fields=("premise", "question"),
        # Verbalizations are symbolic: the rendered label slot is the
        # per-example choice text, tracked on the instance.
        label_set=LabelSet(labels=("0", "1"), verbalizer={"0": "<choice1>", "1": "<choice2>"}),
        templates={},
        flip_policy="question_flip",
        requires_choices=True,
        metrics=("acc",),
    ),
    "rte": TaskSpec(
        task_id="rte",
        text_fields=("premise", "hypothesis"),
        label_set=LabelSet(
            labels=("entailment", "not_entailment"),
            verbalizer={"entailment": "Yes", "not_entailment": "No"},
        ),
        templates={"entailment": _RTE_TEMPLATE, "not_entailment": _RTE_TEMPLATE},
        metrics=("acc",),
    ),
    "wic": TaskSpec(
        task_id="wic",
        text_fields=("sentence1", "sentence2", "word"),
        label_set=LabelSet(labels=("False", "True"), verbalizer={"False": "different", "True": "same"}),
        templates={"True": _WIC_SAME_TEMPLATE, "False": _WIC_DIFFERENT_TEMPLATE},
        metrics=("acc",),
    ),
    "wsc": TaskSpec(
        task_id="wsc",
        text_fields=("text", "span1_text", "span2_text"),
        label_set=LabelSet(labels=("False", "True"), verbalizer={"False": "No", "True": "Yes"}),
        templates={"False": _WSC_TEMPLATE, "True": _WSC_TEMPLATE},
        flip_policy="none",
        metrics=("acc",),
    ),
    "multirc": TaskSpec(
        task_id="multirc",
        text_fields=("passage", "question", "answer"),
        label_set=LabelSet(labels=("0", "1"), verbalizer={"0": "No", "1": "Yes"}),
        templates={"0": _MULTIRC_TEMPLATE, "1": _MULTIRC_TEMPLATE},
        metrics=("em", "f1a"),
    ),
    "record": TaskSpec(
        task_id="record",
        text_fields=("passage", "query"),
        # "correct" marks originals and preserved candidates; "flipped"
        # marks candidates whose substituted entity is not a gold answer.
        label_set=LabelSet(
            labels=("correct", "flipped"),
            verbalizer={"correct": "<answer>", "flipped": "<other-entity>"},
        ),
        templates={},
        requires_entities=True,
        metrics=("acc", "f1"),
    ),
}


def get_task(task_id: str) -> TaskSpec:
    try:
        return TASKS[task_id]
    except KeyError:
        raise KeyError(f"unknown task {task_id!r}; known: {', '.join(TASK_ORDER)}") from None
