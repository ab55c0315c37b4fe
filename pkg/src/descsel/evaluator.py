"""Classification accuracy under every scoring regime.

Setups:
    cls_only             plain zero-shot: argmax of classname cosine
    classname_included   ensemble over rendered "{cls} + {desc}" pair
                         embeddings, mean or max aggregation
    classname_free       weighted ensemble over bare description
                         embeddings plus a w_cls-weighted classname term

The classname-free score for a class with description set D of size
|D| = 1 + #descriptions is

    (w_cls * phi_cls + mean_d phi_d) / |D|        outer_norm = "full"
    w_cls * phi_cls + mean_d phi_d                outer_norm = "desc_only"

"full" divides the classname term by the ensemble size, which makes
classes with different description counts incomparable in principle;
it is kept as the default because it is the weighting the method is
defined with.  max aggregation replaces the description mean with a
max; the classname term is unaffected.  An empty description list
always degrades to the classname term alone.
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .neighborhood import CandidateSet, candidates
from .selector import (
    ClassAssignment,
    ImageAssignment,
    SelectionConfig,
    assign_llm,
    assign_random,
    select,
)
from .similarity import LookupMatrix, _unit_rows, lookup_for
from .store import DatasetStore, default_probe_count, sample_probe_set

SETUPS = ("classname_free", "classname_included", "cls_only")
ASSIGNMENTS = ("selected", "llm", "random")
AGGREGATIONS = ("mean", "max")
SCOPES = ("local_k", "global")
OUTER_NORMS = ("full", "desc_only")

CSV_COLUMNS = (
    "dataset", "setup", "assignment", "aggregation", "scope",
    "k", "m", "n", "w_cls", "top1",
)


@dataclass(frozen=True)
class EvalConfig:
    setup: str = "classname_free"
    assignment: str = "selected"
    aggregation: str = "mean"
    scope: str = "local_k"
    w_cls: float | None = None
    outer_norm: str = "full"
    k: int = 3
    m: int = 5
    positivity_mode: str = "clamp"
    n: int | None = None
    seed: int = 0
    assign_seed: int | None = None


@dataclass
class EvalResult:
    top1: float
    per_class: dict[int, float]
    records: list[dict]
    config: dict
    meta: dict = field(default_factory=dict)


def validate_config(config: EvalConfig, store: DatasetStore | None = None) -> None:
    for name, value, allowed in (
        ("setup", config.setup, SETUPS),
        ("assignment", config.assignment, ASSIGNMENTS),
        ("aggregation", config.aggregation, AGGREGATIONS),
        ("scope", config.scope, SCOPES),
        ("outer_norm", config.outer_norm, OUTER_NORMS),
        ("positivity_mode", config.positivity_mode, ("clamp", "strict")),
    ):
        if value not in allowed:
            raise ConfigError(f"{name} must be one of {allowed}, got {value!r}")
    if config.k < 2:
        raise ConfigError(f"k must be >= 2, got {config.k}")
    if config.m < 1:
        raise ConfigError(f"m must be >= 1, got {config.m}")
    if config.setup == "classname_free":
        if config.w_cls is not None and config.w_cls < 0:
            raise ConfigError(f"w_cls must be >= 0, got {config.w_cls}")
    elif config.w_cls is not None:
        raise ConfigError("w_cls only applies to the classname-free setup")
    if config.n is not None and config.n < 1:
        raise ConfigError(f"n must be >= 1, got {config.n}")
    if (
        store is not None
        and config.setup == "classname_included"
        and store.pairs is None
    ):
        raise DataError("classname-included setup needs a pair embedding table")


# ---------------------------------------------------------------------------
# score primitives

def score_mean(image: np.ndarray, desc_embs: np.ndarray) -> float:
    """Mean cosine between one image and a description ensemble."""
    sims = _pairwise(image, desc_embs)
    return float(sims.mean())


def score_max(image: np.ndarray, desc_embs: np.ndarray) -> float:
    """Best single cosine between one image and a description ensemble."""
    sims = _pairwise(image, desc_embs)
    return float(sims.max())


def score_classname_free(
    image: np.ndarray,
    cls_emb: np.ndarray,
    desc_embs: np.ndarray | None,
    w_cls: float,
    outer_norm: str = "full",
) -> float:
    """Weighted classname-free ensemble score for one class."""
    if outer_norm not in OUTER_NORMS:
        raise ConfigError(f"unknown outer_norm {outer_norm!r}")
    phi_cls = float(_pairwise(image, np.asarray(cls_emb).reshape(1, -1))[0])
    if desc_embs is None or len(desc_embs) == 0:
        return w_cls * phi_cls  # |D| = 1, no description block
    block = float(_pairwise(image, desc_embs).mean())
    if outer_norm == "full":
        return (w_cls * phi_cls + block) / (1 + len(desc_embs))
    return w_cls * phi_cls + block


def _pairwise(image: np.ndarray, rows: np.ndarray) -> np.ndarray:
    if len(rows) == 0:
        raise ValueError("empty description list")
    img = np.asarray(image, dtype=np.float64).reshape(-1)
    norm = np.linalg.norm(img)
    if norm == 0.0:
        raise ValueError("cosine of zero vector")
    return _unit_rows(rows) @ (img / norm)


# ---------------------------------------------------------------------------
# evaluation context

@dataclass
class EvalContext:
    store: DatasetStore
    config: EvalConfig
    test_indices: np.ndarray
    image_unit: np.ndarray  # (|test|, dim) float64 unit rows
    cls_unit: np.ndarray
    pool_unit: np.ndarray
    pairs_unit: np.ndarray | None
    candidate_sets: list[CandidateSet]
    image_assignments: list[ImageAssignment] | None
    class_assignment: ClassAssignment | None
    lookup: LookupMatrix | None
    w_cls: float
    n_used: int | None


def _resolve_w(config: EvalConfig) -> float:
    if config.setup != "classname_free":
        return 0.0
    return 1.0 if config.w_cls is None else float(config.w_cls)


def _map_ordered(fn, count: int, threads: int) -> list:
    """Index-ordered map; results match the sequential run bit for bit."""
    if threads <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def prepare(
    store: DatasetStore,
    config: EvalConfig,
    threads: int = 1,
    lookup: LookupMatrix | None = None,
    cache_dir: str | Path | None = None,
    assignments: ClassAssignment | list[ImageAssignment] | None = None,
) -> EvalContext:
    """Everything that does not depend on w_cls: candidates, assignments."""
    validate_config(config, store)
    test_indices = store.split_indices(1)
    image_unit = _unit_rows(store.images[test_indices], "images")
    cls_unit = _unit_rows(store.cls_emb, "cls_emb")
    pool_unit = (
        _unit_rows(store.pool.embeddings, "pool_emb") if len(store.pool) else
        np.zeros((0, store.dim))
    )
    pairs_unit = None
    if config.setup == "classname_included":
        pairs_unit = _unit_rows(store.pairs.embeddings, "pairs_emb")

    cand_sets = [
        candidates(store.images[idx], store.cls_emb, config.k, image_index=int(idx))
        for idx in test_indices
    ]

    image_assignments: list[ImageAssignment] | None = None
    class_assignment: ClassAssignment | None = None
    n_used: int | None = None
    if assignments is not None:
        if isinstance(assignments, dict):
            class_assignment = assignments
        else:
            image_assignments = assignments
    elif config.setup == "cls_only":
        pass
    elif config.assignment == "selected":
        n_used = config.n if config.n is not None else default_probe_count(store)
        if lookup is None or lookup.n != n_used or lookup.seed != config.seed:
            probes = sample_probe_set(store, n_used, config.seed)
            lookup = lookup_for(store, probes, cache_dir)
        sel_cfg = SelectionConfig(m=config.m, positivity_mode=config.positivity_mode)
        lookup_obj = lookup
        image_assignments = _map_ordered(
            lambda i: select(lookup_obj, cand_sets[i], sel_cfg),
            len(cand_sets),
            threads,
        )
    elif config.assignment == "llm":
        class_assignment = assign_llm(store.pool, store.n_classes, cap=None)
    else:  # random
        seed = config.seed if config.assign_seed is None else config.assign_seed
        class_assignment = assign_random(
            len(store.pool), config.m, seed, store.n_classes
        )

    return EvalContext(
        store=store,
        config=config,
        test_indices=test_indices,
        image_unit=image_unit,
        cls_unit=cls_unit,
        pool_unit=pool_unit,
        pairs_unit=pairs_unit,
        candidate_sets=cand_sets,
        image_assignments=image_assignments,
        class_assignment=class_assignment,
        lookup=lookup,
        w_cls=_resolve_w(config),
        n_used=n_used,
    )


def _descs_for(ctx: EvalContext, position: int, class_id: int) -> list[int]:
    if ctx.config.setup == "cls_only":
        return []
    if ctx.image_assignments is not None:
        return ctx.image_assignments[position].selected.get(class_id, [])
    if ctx.class_assignment is not None:
        return ctx.class_assignment.get(class_id, [])
    return []


def _candidate_score(
    ctx: EvalContext, img: np.ndarray, class_id: int, desc_ids: list[int], w: float
) -> float:
    config = ctx.config
    phi_cls = float(ctx.cls_unit[class_id] @ img)
    if config.setup == "cls_only":
        return phi_cls
    if not desc_ids:
        # no description evidence: classname term only
        return w * phi_cls if config.setup == "classname_free" else phi_cls
    if config.setup == "classname_free":
        sims = ctx.pool_unit[desc_ids] @ img
        block = float(sims.max() if config.aggregation == "max" else sims.mean())
        if config.outer_norm == "full":
            return (w * phi_cls + block) / (1 + len(desc_ids))
        return w * phi_cls + block
    rows = [ctx.store.pairs.row_index(class_id, d) for d in desc_ids]
    sims = ctx.pairs_unit[rows] @ img
    return float(sims.max() if config.aggregation == "max" else sims.mean())


def _argmax_by_id(class_ids, scores) -> int:
    best_id, best_score = None, None
    for cid, s in zip(class_ids, scores):
        cid = int(cid)
        if best_id is None or s > best_score or (s == best_score and cid < best_id):
            best_id, best_score = cid, s
    return best_id


def _classify_position(ctx: EvalContext, position: int, w: float) -> dict:
    img = ctx.image_unit[position]
    cand = ctx.candidate_sets[position]
    if ctx.config.scope == "local_k":
        scope_ids = [int(c) for c in cand.class_ids]
    else:
        scope_ids = list(range(ctx.store.n_classes))
    scores = [
        _candidate_score(ctx, img, c, _descs_for(ctx, position, c), w)
        for c in scope_ids
    ]
    predicted = _argmax_by_id(scope_ids, scores)
    label = int(ctx.store.labels[ctx.test_indices[position]])
    top = sorted(zip(scope_ids, scores), key=lambda cs: (-cs[1], cs[0]))
    top = top[: min(ctx.config.k, len(top))]
    return {
        "image": int(ctx.test_indices[position]),
        "label": label,
        "predicted": predicted,
        "correct": int(predicted == label),
        "top": [[c, float(s)] for c, s in top],
    }


def score_pass(
    ctx: EvalContext, w_cls: float | None = None, threads: int = 1
) -> EvalResult:
    """Classify every test image under the prepared context."""
    w = ctx.w_cls if w_cls is None else float(w_cls)
    records = _map_ordered(
        lambda i: _classify_position(ctx, i, w), len(ctx.test_indices), threads
    )
    n_correct = sum(r["correct"] for r in records)
    top1 = n_correct / len(records) if records else 0.0
    # the headline number must equal the mean of the per-image records
    assert records and abs(top1 - np.mean([r["correct"] for r in records])) < 1e-12

    per_class: dict[int, float] = {}
    for c in range(ctx.store.n_classes):
        rs = [r["correct"] for r in records if r["label"] == c]
        if rs:
            per_class[c] = sum(rs) / len(rs)

    config_echo = asdict(ctx.config)
    config_echo["w_cls"] = w if ctx.config.setup == "classname_free" else None
    meta = {"n_used": ctx.n_used, "test_images": len(records)}
    if ctx.lookup is not None:
        meta["lookup"] = {
            "n": ctx.lookup.n,
            "seed": ctx.lookup.seed,
            "pool_hash": ctx.lookup.pool_hash,
            "store_hash": ctx.lookup.store_hash,
        }
    return EvalResult(
        top1=top1, per_class=per_class, records=records,
        config=config_echo, meta=meta,
    )


def evaluate(
    store: DatasetStore,
    config: EvalConfig,
    threads: int = 1,
    lookup: LookupMatrix | None = None,
    cache_dir: str | Path | None = None,
    assignments: ClassAssignment | list[ImageAssignment] | None = None,
) -> EvalResult:
    ctx = prepare(
        store, config, threads=threads, lookup=lookup,
        cache_dir=cache_dir, assignments=assignments,
    )
    return score_pass(ctx, threads=threads)


def classify(
    image_index: int,
    store: DatasetStore,
    config: EvalConfig,
    assignments: ClassAssignment | list[ImageAssignment] | None = None,
    lookup: LookupMatrix | None = None,
) -> int:
    """Predicted class id for a single test image."""
    ctx = prepare(store, config, lookup=lookup, assignments=assignments)
    positions = np.nonzero(ctx.test_indices == image_index)[0]
    if positions.size == 0:
        raise DataError(f"image {image_index} is not in the test split")
    record = _classify_position(ctx, int(positions[0]), ctx.w_cls)
    return record["predicted"]


def sweep_wcls(
    store: DatasetStore,
    config: EvalConfig,
    grid: list[float],
    threads: int = 1,
    lookup: LookupMatrix | None = None,
    cache_dir: str | Path | None = None,
) -> list[tuple[float, EvalResult]]:
    """Evaluate once per w_cls; candidates and selections are shared."""
    if config.setup != "classname_free":
        raise ConfigError("w_cls sweeps require the classname-free setup")
    if not grid:
        raise ConfigError("empty w_cls grid")
    for w in grid:
        if w < 0:
            raise ConfigError(f"w_cls must be >= 0, got {w}")
    ctx = prepare(store, config, threads=threads, lookup=lookup, cache_dir=cache_dir)
    return [(float(w), score_pass(ctx, w_cls=w, threads=threads)) for w in grid]


# ---------------------------------------------------------------------------
# result serialization

def _format_float(x) -> str:
    return "" if x is None else f"{x:.17g}"


def result_row(dataset: str, result: EvalResult) -> dict:
    c = result.config
    return {
        "dataset": dataset,
        "setup": c["setup"],
        "assignment": c["assignment"],
        "aggregation": c["aggregation"],
        "scope": c["scope"],
        "k": c["k"],
        "m": c["m"],
        "n": result.meta.get("n_used"),
        "w_cls": c["w_cls"],
        "top1": result.top1,
    }


def write_results_json(result: EvalResult, path: str | Path) -> None:
    payload = {
        "top1": result.top1,
        "per_class": {str(c): acc for c, acc in sorted(result.per_class.items())},
        "config": result.config,
        "meta": result.meta,
        "records": result.records,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_results_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([
                row["dataset"], row["setup"], row["assignment"],
                row["aggregation"], row["scope"], row["k"], row["m"],
                "" if row["n"] is None else row["n"],
                _format_float(row["w_cls"]),
                _format_float(row["top1"]),
            ])
