"""
Rebuilding the published score tables from per-task cells
=========================================================

The frozen fixtures under tests/data/ hold the per-task metric cells of
the two published comparison tables (one per encoder), one JSON line per
(method, task, metric, value). This script feeds them through the report
pipeline and prints the reconstructed tables: the Avg. and MD columns are
computed here, not copied, and land within +/-0.01 of the published
values -- the same check the acceptance suite runs.

MD ("maximum drop") is the largest per-task composite-score loss an
augmentation method causes against the baseline: a cheap robustness
summary next to the mean. The headline result is visible in both tables:
only the label-flipping method improves the average while keeping MD at
or near zero; every conventional baseline pays for its gains with a big
drop on at least one task.
"""

from __future__ import annotations

from pathlib import Path

from flipda import evalkit

DATA = Path(__file__).resolve().parents[1] / "tests" / "data"

for name, title in (("cells_albert.jsonl", "encoder A"), ("cells_deberta.jsonl", "encoder B")):
    cells = evalkit.load_cells([str(DATA / name)])
    runs = evalkit.cells_to_scores(cells)
    table, rendered = evalkit.build_report(runs, baseline_method="baseline")
    print(f"=== {title}: {len(cells)} cells, {len(runs)} methods ===")
    print(rendered)
    best = max(table.avg, key=table.avg.get)
    print(f"best Avg.: {best} at {table.avg[best]:.2f} "
          f"(baseline {table.avg['baseline']:.2f}, MD {table.maxdrop[best]:.2f})\n")
