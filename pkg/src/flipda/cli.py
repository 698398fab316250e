"""Pipeline driver: augment -> select -> evaluate -> report, plus sweep.

Subcommands:
  augment   generate candidates for a dataset (cloze engine or a baseline)
  select    score a candidate cache, select, and assemble a training set
  evaluate  compute task metrics from a prediction file
  report    build the score table (Avg. and MD columns) from metric cells
  sweep     run augment+select over a hyperparameter grid

Settings resolve as: command-line flags > config file (single JSON
document) > environment (FLIPDA_BACKEND) > built-in defaults. With --stub,
or when no backend endpoint resolves, deterministic in-process stubs serve
all model calls. Exit codes: 0 success, 1 config/user error, 2
backend/transport error, 3 internal error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
import traceback
from dataclasses import replace
from importlib.resources import files
from pathlib import Path
from random import Random
from typing import Any, Sequence

from . import backends, cloze, evalkit, lexops, select
from .corpus import (
    CandidateRecord,
    Dataset,
    DatasetFormatError,
    Example,
    GenerationInfo,
    TaskSpec,
    load_candidates,
    load_dataset,
    save_candidates,
    save_dataset,
)
from .hashing import derive_seed
from .tasks import TASKS, get_task

ENV_BACKEND = "FLIPDA_BACKEND"

METHODS = ("flipda", "t5mlm", "sr", "knn", "eda", "bt10", "bt6", "tbert")

# Documented per-task hyperparameter search space: mask ratios and fill
# strategies; all three decode strategies are always in space.
SEARCH_SPACE: dict[str, dict[str, tuple]] = {
    "boolq": {"mask_ratio": (0.3, 0.5), "fill_strategy": ("default",)},
    "cb": {"mask_ratio": (0.5,), "fill_strategy": ("default",)},
    "copa": {"mask_ratio": (0.8,), "fill_strategy": ("default", "rand_iter_1")},
    "rte": {"mask_ratio": (0.5,), "fill_strategy": ("default",)},
    "wic": {"mask_ratio": (0.8,), "fill_strategy": ("default",)},
    "wsc": {"mask_ratio": (0.3,), "fill_strategy": ("default",)},
    "multirc": {"mask_ratio": (0.3, 0.5), "fill_strategy": ("rand_iter_10",)},
    "record": {"mask_ratio": (0.3,), "fill_strategy": ("rand_iter_10",)},
}

# Default originals-to-augment mixing per method (how many copies of the
# original set accompany the augmented data).
DEFAULT_N_COPIES = {"flipda": 1, "t5mlm": 10, "sr": 10, "knn": 10, "eda": 1, "bt10": 1, "bt6": 1, "tbert": 1}


class CliError(Exception):
    """User/config error; maps to exit code 1."""


class Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); 2 means backend error here
        raise CliError(message)


def log_event(event: str, **fields: Any) -> None:
    print(json.dumps({"event": event, **fields}, sort_keys=True), file=sys.stderr)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise CliError("config must be a JSON object")
    return obj


def _get(config: dict, *path: str, default: Any = None) -> Any:
    node: Any = config
    for key in path:
        if not isinstance(node, dict) or key not in node:
            return default
        node = node[key]
    return node


def _pick(flag_value: Any, config: dict, *path: str, env: str | None = None, default: Any = None) -> Any:
    if flag_value is not None:
        return flag_value
    from_config = _get(config, *path)
    if from_config is not None:
        return from_config
    if env and os.environ.get(env):
        return os.environ[env]
    return default


def _data_file(name: str) -> str:
    return str(files("flipda").joinpath("data").joinpath(name))


def _resolve_task(args, config) -> TaskSpec:
    task_id = _pick(getattr(args, "task", None), config, "task")
    if not task_id:
        raise CliError("no task given (--task or config 'task')")
    if task_id not in TASKS:
        raise CliError(f"unknown task {task_id!r}; known: {', '.join(sorted(TASKS))}")
    return get_task(task_id)


def _resolve_out_dir(args, config) -> Path:
    out = Path(_pick(getattr(args, "out", None), config, "output_dir", default="out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resolve_seed(args, config) -> int:
    return int(_pick(getattr(args, "seed", None), config, "seed", default=0))


def _backend_config(args, config) -> backends.BackendConfig | None:
    if getattr(args, "stub", False):
        return None
    endpoint = _pick(getattr(args, "backend", None), config, "backend", "endpoint", env=ENV_BACKEND)
    if not endpoint:
        return None
    return backends.BackendConfig(
        endpoint=str(endpoint),
        timeout=float(_get(config, "backend", "timeout", default=10.0)),
        max_parallel=int(_get(config, "backend", "max_parallel", default=4)),
        retries=int(_get(config, "backend", "retries", default=2)),
    )


class Services:
    """Lazily built model backends and lexicons for one run."""

    def __init__(self, args, config: dict):
        self.config = config
        self.backend_config = _backend_config(args, config)
        self._http = backends.HttpBackend(self.backend_config) if self.backend_config else None
        if self._http is None:
            log_event("backend", mode="stub")
        else:
            log_event("backend", mode="http", endpoint=self.backend_config.endpoint)

    def infill(self) -> backends.InfillBackend:
        if self._http:
            return self._http
        path = _get(self.config, "stub", "fill_lexicon", default=_data_file("fill_lexicon.txt"))
        return backends.StubInfillBackend(backends.load_fill_lexicon(path))

    def classifier(self) -> backends.ClassifierBackend:
        if self._http:
            return self._http
        path = _get(self.config, "stub", "classifier_weights")
        weights = backends.load_classifier_weights(path) if path else {}
        return backends.KeywordClassifierBackend(weights)

    def translator(self) -> backends.TranslationBackend:
        if self._http:
            return self._http
        path = _get(self.config, "stub", "translations")
        if path:
            return backends.DictionaryTranslationBackend(backends.load_translation_table(path))
        return backends.IdentityTranslationBackend()

    def lexicon(self) -> lexops.LexiconIndex:
        return lexops.LexiconIndex.load(
            synonyms_path=_get(self.config, "lexicon", "synonyms"),
            embeddings_path=_get(self.config, "lexicon", "embeddings"),
            stopwords_path=_get(self.config, "lexicon", "stopwords", default=_data_file("stopwords_en.txt")),
        )


def _fill_config(args, config: dict, task: TaskSpec, method: str) -> cloze.FillConfig:
    space = SEARCH_SPACE[task.task_id]
    default_ratio = 0.1 if method == "t5mlm" else space["mask_ratio"][0]
    default_fill = "default" if method == "t5mlm" else space["fill_strategy"][0]
    try:
        return cloze.FillConfig(
            mask_ratio=float(_pick(getattr(args, "mask_ratio", None), config, "fill", "mask_ratio", default=default_ratio)),
            decode=str(_pick(getattr(args, "decode", None), config, "fill", "decode", default="greedy")),
            fill_strategy=str(
                _pick(getattr(args, "fill_strategy", None), config, "fill", "fill_strategy", default=default_fill)
            ),
            n_candidates=int(
                _pick(getattr(args, "n_candidates", None), config, "fill", "n_candidates", default=10)
            ),
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _check_search_space(cfg: cloze.FillConfig, task: TaskSpec, method: str, unsafe: bool) -> None:
    if method != "flipda" or unsafe:
        return
    space = SEARCH_SPACE[task.task_id]
    problems = []
    if not any(abs(cfg.mask_ratio - r) < 1e-9 for r in space["mask_ratio"]):
        problems.append(f"mask_ratio {cfg.mask_ratio} not in {space['mask_ratio']}")
    if cfg.fill_strategy not in space["fill_strategy"]:
        problems.append(f"fill_strategy {cfg.fill_strategy!r} not in {space['fill_strategy']}")
    if problems:
        raise CliError(
            f"outside the documented search space for {task.task_id}: "
            + "; ".join(problems)
            + " (pass --unsafe-params to override)"
        )


def _augment_directions(args, config: dict, task: TaskSpec, ex: Example) -> set[str]:
    preserve = _pick(getattr(args, "preserve", None), config, "augment", "preserve", default=True)
    flip = _pick(getattr(args, "flip", None), config, "augment", "flip", default="auto")
    directions: set[str] = set()
    if preserve:
        directions.add(ex.label)
    if flip == "auto":
        directions.update(task.flip_targets(ex.label))
    elif flip:
        if task.flip_policy == "none":
            raise CliError(f"flip requested but task {task.task_id} never flips labels (flip-not-allowed)")
        directions.update(task.flip_targets(ex.label))
    return directions


def _augmentable_fields(task: TaskSpec) -> tuple[str, ...]:
    if task.flip_policy == "question_flip":
        return ("premise",)
    if task.requires_entities:
        return ("passage", "query")
    names: list[str] = []
    for template in task.templates.values():
        for name in template.referenced_fields():
            is_maskable = template.mode == "split_pair" or any(
                seg.kind == "field" and seg.field == name and seg.maskable for seg in template.segments
            )
            if is_maskable and name not in names:
                names.append(name)
    return tuple(names)


def _baseline_candidates(
    method: str,
    task: TaskSpec,
    ex: Example,
    services: Services,
    config: dict,
    seed: int,
) -> list[CandidateRecord]:
    lex = services.lexicon()
    fields = _augmentable_fields(task)
    base = _get(config, "baseline", default={}) or {}
    records: list[CandidateRecord] = []

    def add(variant: int, new_fields: dict[str, str], ratio: float) -> None:
        merged = dict(ex.fields)
        merged.update(new_fields)
        records.append(
            CandidateRecord(
                source_id=ex.id,
                fields=merged,
                intended_label=ex.label,
                generation=GenerationInfo(
                    method=method,
                    mask_ratio=ratio,
                    decode="-",
                    fill_strategy="-",
                    seed=derive_seed(seed, method, variant),
                ),
                consistency_ok=True,
                extra={"direction": "preserve"},
            )
        )

    if method in ("sr", "knn"):
        ratio = float(base.get("ratio", 0.1))
        n_aug = int(base.get("n_aug", 10))
        k = int(base.get("k", 15))
        for v in range(n_aug):
            rng = Random(derive_seed(seed, method, v))
            new = {}
            for name in fields:
                seq = lexops.tokenize(ex.fields[name])
                if method == "sr":
                    new[name] = lexops.synonym_replace(seq, ratio, lex, rng).text
                else:
                    new[name] = lexops.knn_replace(seq, ratio, k, lex, rng).text
            add(v, new, ratio)
    elif method == "eda":
        alpha = float(base.get("alpha", 0.1))
        n_aug = int(base.get("n_aug", 9))
        for v in range(n_aug):
            rng = Random(derive_seed(seed, method, v))
            new = {
                name: lexops.eda_augment(lexops.tokenize(ex.fields[name]), alpha, 1, lex, rng)[0].text
                for name in fields
            }
            add(v, new, alpha)
    elif method in ("bt10", "bt6"):
        chain = lexops.BT10_CHAIN if method == "bt10" else lexops.BT6_CHAIN
        translator = services.translator()
        per_field = {name: lexops.back_translate(ex.fields[name], chain, translator) for name in fields}
        for v in range(len(chain)):
            new = {name: outs[v] for name, outs in per_field.items() if v < len(outs)}
            if len(new) == len(fields):
                add(v, new, 0.0)
    elif method == "tbert":
        p = float(base.get("p", 0.4))
        n_aug = int(base.get("n_aug", 1))
        infill = services.infill()
        for v in range(n_aug):
            rng = Random(derive_seed(seed, method, v))
            new = {
                name: lexops.mlm_token_replace(
                    lexops.tokenize(ex.fields[name]), p, infill, rng,
                    max_tokens=task.max_seq_tokens, seed=derive_seed(seed, method, v, name),
                ).text
                for name in fields
            }
            add(v, new, p)
    else:
        raise CliError(f"unknown method {method!r}")
    return records


def cmd_augment(args) -> int:
    config = _load_config(args.config)
    task = _resolve_task(args, config)
    train_path = _pick(args.train, config, "train")
    if not train_path:
        raise CliError("no training file given (--train or config 'train')")
    out_dir = _resolve_out_dir(args, config)
    seed = _resolve_seed(args, config)
    method = _pick(args.method, config, "method", default="flipda")
    if method not in METHODS:
        raise CliError(f"unknown method {method!r}; known: {', '.join(METHODS)}")
    dataset = load_dataset(train_path, task)
    services = Services(args, config)

    candidates: list[CandidateRecord] = []
    if method in ("flipda", "t5mlm"):
        fill_cfg = _fill_config(args, config, task, method)
        _check_search_space(fill_cfg, task, method, args.unsafe_params)
        backend = services.infill()
        drop = bool(_get(config, "augment", "drop_inconsistent", default=False))
        for ex in dataset:
            directions = _augment_directions(args, config, task, ex)
            if method == "t5mlm":
                directions &= {ex.label}
            if not directions:
                continue
            try:
                recs = cloze.generate_candidates(
                    task, ex, directions, fill_cfg, backend,
                    seed=derive_seed(seed, ex.id), dataset=dataset, drop_inconsistent=drop,
                )
            except cloze.FlipNotAllowedError as exc:
                raise CliError(str(exc)) from exc
            if method == "t5mlm":
                for rec in recs:
                    rec.generation = replace(rec.generation, method="t5mlm")
            candidates.extend(recs)
    else:
        for ex in dataset:
            candidates.extend(
                _baseline_candidates(method, task, ex, services, config, derive_seed(seed, ex.id))
            )

    cache_path = out_dir / "candidates.jsonl"
    save_candidates(str(cache_path), candidates)
    counts: dict[str, int] = {}
    for rec in candidates:
        key = f"{rec.extra.get('direction', 'preserve')}:{rec.intended_label}"
        counts[key] = counts.get(key, 0) + 1
    rate = (
        f"{100.0 * sum(1 for r in candidates if r.consistency_ok) / len(candidates):.1f}%"
        if candidates
        else "n/a"
    )
    log_event("augment", task=task.task_id, method=method, candidates=len(candidates), cache=str(cache_path))
    print(f"cached {len(candidates)} candidates -> {cache_path}")
    for key in sorted(counts):
        print(f"  {key}: {counts[key]}")
    print(f"  consistency pass rate: {rate}")
    return 0


def _selection_config(args, config: dict, task: TaskSpec) -> select.SelectionConfig:
    agreement_raw = _pick(getattr(args, "agreement", None), config, "selection", "require_label_agreement", default=True)
    if isinstance(agreement_raw, str):
        agreement = {"true": True, "on": True, "false": False, "off": False, "auto": None}.get(agreement_raw.lower())
        if agreement is None and agreement_raw.lower() != "auto":
            raise CliError(f"bad agreement value {agreement_raw!r} (true/false/auto)")
    else:
        agreement = agreement_raw
    raw_directions = _pick(getattr(args, "directions", None) or None, config, "selection", "directions")
    directions = select.parse_directions(list(raw_directions), task) if raw_directions else None
    try:
        return select.SelectionConfig(
            strategy=str(_pick(getattr(args, "strategy", None), config, "selection", "strategy", default="default")),
            k=_maybe_int(_pick(getattr(args, "k", None), config, "selection", "k")),
            rate=_maybe_float(_pick(getattr(args, "rate", None), config, "selection", "rate")),
            p_threshold=_maybe_float(_pick(getattr(args, "p_threshold", None), config, "selection", "p_threshold")),
            directions=directions,
            require_label_agreement=agreement,
            include_preserved=bool(_pick(getattr(args, "preserve", None), config, "selection", "include_preserved", default=True)),
            include_flipped=bool(_pick(getattr(args, "flip", None), config, "selection", "include_flipped", default=True)),
            drop_inconsistent=bool(_pick(None, config, "selection", "drop_inconsistent", default=False)),
        )
    except select.SelectionError as exc:
        raise CliError(str(exc)) from exc


def _maybe_int(v: Any) -> int | None:
    return None if v is None else int(v)


def _maybe_float(v: Any) -> float | None:
    return None if v is None else float(v)


def cmd_select(args) -> int:
    config = _load_config(args.config)
    task = _resolve_task(args, config)
    train_path = _pick(args.train, config, "train")
    if not train_path:
        raise CliError("no training file given (--train or config 'train')")
    out_dir = _resolve_out_dir(args, config)
    cache_path = _pick(args.cache, config, "cache", default=str(out_dir / "candidates.jsonl"))
    dataset = load_dataset(train_path, task)
    candidates = load_candidates(cache_path)
    sel_cfg = _selection_config(args, config, task)
    services = Services(args, config)

    scored = select.score_candidates(
        candidates, task, services.classifier(), dataset, drop_inconsistent=sel_cfg.drop_inconsistent
    )
    result = select.run_selection(scored, sel_cfg, task)

    method = candidates[0].generation.method if candidates else "flipda"
    n_copies = int(
        _pick(getattr(args, "n_copies", None), config, "mix", "n_copies", default=DEFAULT_N_COPIES.get(method, 1))
    )
    assembled = select.assemble_training_set(dataset, result, select.MixPolicy(n_copies=n_copies), task)

    selected_path = out_dir / "selected.jsonl"
    save_candidates(str(selected_path), select.attach_assignments(result))
    train_out = out_dir / "train_augmented.jsonl"
    save_dataset(str(train_out), assembled)

    log_event(
        "select",
        task=task.task_id,
        strategy=sel_cfg.strategy,
        scored=len(scored),
        selected=len(result.selected),
        skipped_empty_sets=result.skipped_empty_sets,
        assembled=len(assembled),
    )
    print(f"selected {len(result.selected)} of {len(scored)} scored candidates -> {selected_path}")
    for key in sorted(result.per_direction_counts):
        print(f"  {key}: {result.per_direction_counts[key]}")
    print(f"  skipped empty sets: {result.skipped_empty_sets}")
    print(f"assembled training set: {len(assembled)} examples -> {train_out}")
    return 0


def _load_predictions(path: str) -> dict[str, str]:
    preds: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CliError(f"{path} line {lineno}: invalid JSON: {exc.msg}") from exc
            if "idx" not in obj or "pred" not in obj:
                raise CliError(f"{path} line {lineno}: prediction lines need 'idx' and 'pred'")
            preds[str(obj["idx"])] = str(obj["pred"])
    return preds


def cmd_evaluate(args) -> int:
    config = _load_config(args.config)
    task = _resolve_task(args, config)
    gold_path = _pick(args.gold, config, "gold")
    pred_path = _pick(args.pred, config, "pred")
    if not gold_path or not pred_path:
        raise CliError("evaluate needs --gold and --pred")
    out_dir = _resolve_out_dir(args, config)
    dataset = load_dataset(gold_path, task)
    preds = _load_predictions(pred_path)
    try:
        metrics = evalkit.compute_metrics(task, preds, dataset)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    cells_path = args.cells_out or str(out_dir / "cells.jsonl")
    evalkit.write_cells(cells_path, args.method, task.task_id, metrics, append=True)
    log_event("evaluate", task=task.task_id, method=args.method, **{k: round(v, 4) for k, v in metrics.items()})
    for metric in sorted(metrics):
        print(f"{task.task_id} {args.method} {metric}={evalkit.display_round(metrics[metric]):.2f}")
    return 0


_REPORT_FOOTNOTES = {
    "record": "note: record f1 here is best token overlap against the answer strings (approximation).",
    "cb": "note: cb f1 is macro-F1 over all declared classes; absent classes contribute 0.",
}


def cmd_report(args) -> int:
    config = _load_config(args.config)
    out_dir = _resolve_out_dir(args, config)
    cells_paths = args.cells or _get(config, "cells") or []
    if isinstance(cells_paths, str):
        cells_paths = [cells_paths]
    if not cells_paths:
        raise CliError("report needs at least one --cells file")
    baseline = _pick(args.baseline, config, "baseline_method")
    if not baseline:
        raise CliError("report needs --baseline")
    try:
        cells = evalkit.load_cells(cells_paths)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read cells: {exc}") from exc
    try:
        runs = evalkit.cells_to_scores(cells)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"malformed cells record: {exc!r}") from exc
    try:
        table, rendered = evalkit.build_report(runs, baseline)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    footnotes = [
        _REPORT_FOOTNOTES[t]
        for t in sorted(_REPORT_FOOTNOTES)
        if any(s.task_id == t for scores in table.rows.values() for s in scores)
    ]
    if footnotes:
        rendered = rendered + "\n" + "\n".join(footnotes)
    report_txt = out_dir / "report.txt"
    report_txt.write_text(rendered + "\n", encoding="utf-8")
    report_jsonl = out_dir / "report.jsonl"
    with open(report_jsonl, "w", encoding="utf-8") as fh:
        for record in evalkit.report_records(table):
            fh.write(json.dumps(record, sort_keys=True))
            fh.write("\n")
    log_event("report", methods=len(table.rows), out=str(report_txt))
    print(rendered)
    return 0


def _sweep_values(config: dict, task: TaskSpec, args) -> tuple[list[float], list[str], list[str], list[Any]]:
    space = SEARCH_SPACE[task.task_id]
    ratios = [float(v) for v in _get(config, "sweep", "mask_ratio", default=list(space["mask_ratio"]))]
    decodes = [str(v) for v in _get(config, "sweep", "decode", default=list(cloze.DECODE_NAMES))]
    fills = [str(v) for v in _get(config, "sweep", "fill_strategy", default=[space["fill_strategy"][0]])]
    agreements = _get(config, "sweep", "agreement", default=[True])
    if not args.unsafe_params:
        for r in ratios:
            if not any(abs(r - allowed) < 1e-9 for allowed in space["mask_ratio"]):
                raise CliError(f"sweep mask_ratio {r} outside search space for {task.task_id} (use --unsafe-params)")
        for f in fills:
            if f not in space["fill_strategy"]:
                raise CliError(f"sweep fill_strategy {f!r} outside search space for {task.task_id} (use --unsafe-params)")
    return ratios, decodes, fills, list(agreements)


def _agreement_tag(value: Any) -> str:
    if value is None or (isinstance(value, str) and value.lower() == "auto"):
        return "auto"
    return "on" if value in (True, "true", "on") else "off"


def cmd_sweep(args) -> int:
    config = _load_config(args.config)
    task = _resolve_task(args, config)
    out_dir = _resolve_out_dir(args, config)
    ratios, decodes, fills, agreements = _sweep_values(config, task, args)
    combos = list(itertools.product(ratios, decodes, fills, agreements))
    log_event("sweep", task=task.task_id, combinations=len(combos))
    for ratio, decode, fill_strategy, agreement in combos:
        name = f"mr{ratio:g}_{decode}_{fill_strategy}_agree-{_agreement_tag(agreement)}"
        combo_dir = out_dir / "sweep" / name
        combo_dir.mkdir(parents=True, exist_ok=True)
        sub = argparse.Namespace(**vars(args))
        sub.out = str(combo_dir)
        sub.mask_ratio = ratio
        sub.decode = decode
        sub.fill_strategy = fill_strategy
        sub.agreement = _agreement_tag(agreement) if agreement is not None else "auto"
        sub.cache = None
        sub.method = getattr(args, "method", None)
        print(f"[sweep] {name}")
        code = cmd_augment(sub)
        if code == 0:
            code = cmd_select(sub)
        if code != 0:
            return code
    return 0


def _add_common(p: Parser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--task", help="task id")
    p.add_argument("--out", help="output directory (default 'out')")
    p.add_argument("--seed", type=int, help="global seed")
    p.add_argument("--backend", help="backend endpoint URL")
    p.add_argument("--stub", action="store_true", help="force in-process stub backends")
    p.add_argument("--unsafe-params", action="store_true", help="allow values outside the documented search space")


def build_parser() -> Parser:
    parser = Parser(prog="flipda", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("augment", help="generate augmentation candidates")
    _add_common(p)
    p.add_argument("--train", help="training dataset (jsonl)")
    p.add_argument("--method", choices=METHODS, help="augmentation method (default flipda)")
    p.add_argument("--mask-ratio", dest="mask_ratio", type=float)
    p.add_argument("--decode", choices=cloze.DECODE_NAMES)
    p.add_argument("--fill-strategy", dest="fill_strategy")
    p.add_argument("--n-candidates", dest="n_candidates", type=int)
    p.add_argument("--preserve", dest="preserve", action="store_true", default=None, help="generate label-preserved candidates")
    p.add_argument("--no-preserve", dest="preserve", action="store_false", help="skip label-preserved candidates")
    p.add_argument("--flip", dest="flip", action="store_true", default=None, help="require label-flipped candidates")
    p.add_argument("--no-flip", dest="flip", action="store_false", help="skip label-flipped candidates")
    p.set_defaults(fn=cmd_augment)

    p = sub.add_parser("select", help="score, select, and assemble the training set")
    _add_common(p)
    p.add_argument("--train", help="original training dataset (jsonl)")
    p.add_argument("--cache", help="candidate cache (default <out>/candidates.jsonl)")
    p.add_argument("--strategy", choices=select.STRATEGIES)
    p.add_argument("--k", type=int)
    p.add_argument("--rate", type=float)
    p.add_argument("--p-threshold", dest="p_threshold", type=float)
    p.add_argument("--agreement", help="label agreement: true, false, or auto")
    p.add_argument("--directions", nargs="*", help="allowed 'src->dst' label pairs")
    p.add_argument("--n-copies", dest="n_copies", type=int, help="copies of the originals in the output")
    p.set_defaults(fn=cmd_select, preserve=None, flip=None)

    p = sub.add_parser("evaluate", help="compute metrics from a prediction file")
    _add_common(p)
    p.add_argument("--gold", help="gold dataset (jsonl)")
    p.add_argument("--pred", help="predictions (jsonl with idx/pred)")
    p.add_argument("--method", default="method", help="method name for the cells file")
    p.add_argument("--cells-out", dest="cells_out", help="cells file to append to (default <out>/cells.jsonl)")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("report", help="build the score table from metric cells")
    _add_common(p)
    p.add_argument("--cells", nargs="*", help="cells files (jsonl)")
    p.add_argument("--baseline", help="baseline method id")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("sweep", help="run augment+select over the hyperparameter grid")
    _add_common(p)
    p.add_argument("--train", help="training dataset (jsonl)")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--n-candidates", dest="n_candidates", type=int)
    p.set_defaults(fn=cmd_sweep, preserve=None, flip=None, agreement=None, n_copies=None)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except CliError as exc:
        log_event("error", kind="usage", message=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DatasetFormatError, select.SelectionError, cloze.RenderError, OSError) as exc:
        log_event("error", kind="data", message=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except backends.BackendError as exc:
        log_event("error", kind="backend", message=str(exc))
        print(f"backend error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal invariant violation
        log_event("error", kind="internal", message=str(exc))
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
