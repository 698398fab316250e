"""
Comparing the four candidate-selection strategies
=================================================

Builds a small scored pool by hand (two source examples, five candidates
with known classifier probabilities) and runs every strategy over it, so
the differences are visible side by side:

* default      -- per (source, target-label) set, keep the single most
                  confident candidate; empty sets contribute nothing.
* global_topk  -- one ranked pool across all sources, keep k (or rate*n).
* global_topp  -- keep everything with assigned-label probability >= p.
* diverse_topk -- round-robin over sources by per-source rank, then cap.
* all          -- no classifier gate (how the ablation baselines mix).
"""

from __future__ import annotations

from flipda.backends import check_classify_response
from flipda.corpus import CandidateRecord, Example, GenerationInfo, LabelSet, TaskSpec
from flipda.select import SelectionConfig, run_selection, score_candidates

# A two-label task with sixteenth-valued probabilities: exact in binary
# floating point, so every comparison below is reproducible to the bit.
task = TaskSpec(
    task_id="demo",
    text_fields=("text",),
    label_set=LabelSet(labels=("A", "B"), verbalizer={"A": "yes", "B": "no"}),
    templates={},
    flip_policy="full",
)
dataset = [
    Example(id="s:0", fields={"text": "first source"}, label="A"),
    Example(id="s:1", fields={"text": "second source"}, label="A"),
]
gen = GenerationInfo(method="flipda", mask_ratio=0.5, decode="greedy", fill_strategy="default", seed=0)

# Five candidates: three from s:0, two from s:1, all intending label A.
rows = [(1.0, 0.0), (0.875, 0.125), (0.75, 0.25), (0.9375, 0.0625), (0.5625, 0.4375)]
attribution = [0, 0, 0, 1, 1]
records = [
    CandidateRecord(source_id=f"s:{attribution[j]}", fields={"text": f"candidate {j}"},
                    intended_label="A", generation=gen)
    for j in range(len(rows))
]


class FixedProbs:
    def classify(self, req):
        return check_classify_response(req, rows)


scored = score_candidates(records, task, FixedProbs(), dataset)
print("scored pool (candidate, source, P(A)):")
for sc in scored:
    print(f"  cand {sc.candidate_index}  {sc.candidate.source_id}  {sc.prob_of('A', task):.4f}")

configs = {
    "default": SelectionConfig(),
    "global_topk k=4": SelectionConfig(strategy="global_topk", k=4),
    "global_topk rate=0.5": SelectionConfig(strategy="global_topk", rate=0.5),
    "global_topp p>=0.75": SelectionConfig(strategy="global_topp", p_threshold=0.75),
    "diverse_topk k=4": SelectionConfig(strategy="diverse_topk", k=4),
    "all": SelectionConfig(strategy="all"),
}
print("\nstrategy comparison (selection order, assigned labels):")
for name, config in configs.items():
    result = run_selection(scored, config, task)
    picks = [(item.candidate_index, item.assigned_label) for item in result.selected]
    note = f"  skipped empty sets: {result.skipped_empty_sets}" if result.skipped_empty_sets else ""
    print(f"  {name:<22} -> {picks}{note}")

# The default strategy kept one candidate per source for target A (cand 0
# and cand 3) and reported the two empty (source, B) sets. diverse_topk
# interleaves sources by rank, so s:1's weaker cand 4 enters before s:0's
# third-best -- that is the diversity/confidence trade.

# Label agreement: with it on (the default), a candidate only enters the
# set of its *intended* label and only if the classifier agrees. With it
# off, candidates join whatever set the classifier argmax points at --
# useful when the filler is too weak for its intentions to be trusted.
loose = [
    CandidateRecord(source_id="s:0", fields={"text": "meant A, looks B"}, intended_label="A", generation=gen),
]


class Disagree:
    def classify(self, req):
        return check_classify_response(req, [(0.25, 0.75)])


loose_scored = score_candidates(loose, task, Disagree(), dataset)
for agreement in (True, False):
    result = run_selection(loose_scored, SelectionConfig(require_label_agreement=agreement), task)
    picks = [(item.candidate_index, item.assigned_label) for item in result.selected]
    print(f"\nagreement={agreement}: {picks or 'nothing selected'}")
print("(with agreement off the same candidate is kept as a B-labelled flip)")
