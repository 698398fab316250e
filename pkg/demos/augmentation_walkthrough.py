"""
Label-flipped augmentation, step by step
========================================

Walks two sentence-pair examples through the full generation pipeline:
render the cloze pattern for a target label, plan which word tokens to
mask, fill the blanks with the deterministic stub backend, and run the
self-consistency check that asks the filler to restore the label word.
"""

from __future__ import annotations

from pathlib import Path
from random import Random

from flipda.backends import StubInfillBackend, load_fill_lexicon
from flipda.cloze import FillConfig, consistency_check, fill_detailed, generate_candidates, plan_mask, render_cloze
from flipda.corpus import load_dataset
from flipda.tasks import get_task

DATA = Path(__file__).resolve().parents[1] / "tests" / "data"

task = get_task("rte")
dataset = load_dataset(str(DATA / "rte32.jsonl"), task)
backend = StubInfillBackend(load_fill_lexicon(str(DATA / "fill_lexicon.txt")))

ex = dataset[0]
print("source example:", ex.id)
for name in task.text_fields:
    print(f"  {name}: {ex.fields[name]}")
print("  label:", ex.label)

# 1. Render the cloze pattern. The target label decides which verbalizer
#    word lands in the label slot; flipping just means rendering for the
#    other label and keeping that label as the candidate's intention.
for target in task.label_set.labels:
    inst = render_cloze(task, ex, target, Random(0))
    print(f"\nrendered for target {target!r}:")
    print(" ", inst.part_text(0))

# 2. Plan the mask. Only word tokens inside the example's own fields are
#    eligible; the pattern glue and the label word are never touched.
inst = render_cloze(task, ex, "not_entailment", Random(0))
plan = plan_mask(inst, ratio=0.5, seed=42)
maskable = inst.maskable_positions()
print(f"\nmask plan at ratio 0.5: {len(plan.positions)} of {len(maskable)} word tokens")
for pi, ui, ti in plan.positions:
    print("  masked word:", inst.parts[pi][ui].tokens[ti].surface)

# 3. Fill. Each planned token becomes a numbered blank; the stub backend
#    picks lexicon words by hashing the request text, so reruns agree.
detail = fill_detailed(inst, plan, FillConfig(mask_ratio=0.5, n_candidates=2), backend, base_seed=7)
for j, cand in enumerate(detail):
    print(f"\ncandidate {j}:")
    for name in task.text_fields:
        print(f"  {name}: {cand.record.fields[name]}")

# 4. Consistency check: blank the label word in the filled text and ask
#    the backend to restore it. Real infill models pass when the filled
#    pair still supports the intended label; the stub fills an arbitrary
#    lexicon word, so the check (correctly) fails here.
ok = consistency_check(inst, detail[0].unit_texts, task, backend, seed=7)
print("\nconsistency check on candidate 0:", ok)

# 5. generate_candidates bundles all of the above: fresh render + plan per
#    candidate, both directions, consistency flags recorded on the records.
records = generate_candidates(
    task, ex, set(task.label_set.labels), FillConfig(mask_ratio=0.5, n_candidates=2), backend, seed=5
)
print(f"\ngenerate_candidates produced {len(records)} records:")
for rec in records:
    print(f"  {rec.extra['direction']:>8} -> intended {rec.intended_label:<15} "
          f"consistency_ok={rec.consistency_ok}")
