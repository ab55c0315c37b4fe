"""Distinctiveness scoring and description selection.

For a candidate class a inside a neighborhood A, a description d is
distinctive when the pool's lookup row of a exceeds the rivals' rows at
column d.  Two positivity modes exist because "keep the positive part"
can be read per rival or over the rival mean:

    clamp   score(d) = mean over rivals a' of max(0, S[a][d] - S[a'][d])
    strict  score(d) = mean over rivals of the raw differences, but
            zeroed unless S[a][d] - S[a'][d] > 0 for every rival

Selection keeps the up-to-m strictly positive descriptions per
candidate, highest score first, ties toward the smaller pool id.  A
description whose score is zero distinguishes nothing and is never
selected, so selections may be short or empty.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .neighborhood import CandidateSet
from .rng import sample_without_replacement, stream
from .similarity import LookupMatrix
from .store import DescriptionPool

POSITIVITY_MODES = ("clamp", "strict")

# {class id: ordered pool ids}, the class-level assignment shape shared
# by generated-description baselines and planted ground truth.
ClassAssignment = dict[int, list[int]]


@dataclass(frozen=True)
class SelectionConfig:
    m: int = 5
    positivity_mode: str = "clamp"

    def __post_init__(self):
        if self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if self.positivity_mode not in POSITIVITY_MODES:
            raise ConfigError(f"unknown positivity mode {self.positivity_mode!r}")


@dataclass
class ImageAssignment:
    """Per-candidate selected descriptions for one image."""

    image_index: int
    candidates: np.ndarray  # (k,) int64
    selected: dict[int, list[int]] = field(default_factory=dict)
    scores: dict[int, list[float]] = field(default_factory=dict)


def _values(lookup: LookupMatrix | np.ndarray) -> np.ndarray:
    mat = lookup.values if isinstance(lookup, LookupMatrix) else lookup
    return np.asarray(mat, dtype=np.float64)


def distinctiveness(
    lookup: LookupMatrix | np.ndarray,
    candidate_ids: np.ndarray | list[int],
    target: int,
    mode: str = "clamp",
) -> np.ndarray:
    """Per-description distinctiveness of `target` against its rivals.

    Rival differences accumulate in float64 in candidate order, so the
    result is reproducible term for term.
    """
    if mode not in POSITIVITY_MODES:
        raise ConfigError(f"unknown positivity mode {mode!r}")
    values = _values(lookup)
    ids = [int(c) for c in candidate_ids]
    if target not in ids:
        raise ValueError(f"target {target} not among candidates {ids}")
    rivals = [c for c in ids if c != target]
    if not rivals:
        raise ValueError("need at least one rival (k >= 2)")
    row = values[target]
    acc = np.zeros(values.shape[1], dtype=np.float64)
    all_positive = np.ones(values.shape[1], dtype=bool)
    for rival in rivals:
        diff = row - values[rival]
        all_positive &= diff > 0.0
        acc += np.maximum(diff, 0.0) if mode == "clamp" else diff
    scores = acc / len(rivals)
    if mode == "strict":
        scores = np.where(all_positive, scores, 0.0)
    return scores


def _top_positive(scores: np.ndarray, m: int) -> tuple[list[int], list[float]]:
    order = np.lexsort((np.arange(scores.shape[0]), -scores))
    ids: list[int] = []
    vals: list[float] = []
    for p in order:
        if len(ids) == m or scores[p] <= 0.0:
            break
        ids.append(int(p))
        vals.append(float(scores[p]))
    return ids, vals


def select(
    lookup: LookupMatrix | np.ndarray,
    cand: CandidateSet,
    config: SelectionConfig,
) -> ImageAssignment:
    """Up to m distinctive descriptions for every candidate of one image."""
    out = ImageAssignment(
        image_index=cand.image_index,
        candidates=np.asarray(cand.class_ids, dtype=np.int64),
    )
    for target in cand.class_ids:
        scores = distinctiveness(
            lookup, cand.class_ids, int(target), config.positivity_mode
        )
        ids, vals = _top_positive(scores, config.m)
        out.selected[int(target)] = ids
        out.scores[int(target)] = vals
    return out


def select_batch(
    lookup: LookupMatrix | np.ndarray,
    cands: list[CandidateSet],
    config: SelectionConfig,
) -> list[ImageAssignment]:
    return [select(lookup, cand, config) for cand in cands]


def dump_distinctiveness(
    lookup: LookupMatrix | np.ndarray,
    cand: CandidateSet,
    target: int,
) -> list[tuple[int, float]]:
    """Full positive clamp-mode score list for one candidate, descending."""
    scores = distinctiveness(lookup, cand.class_ids, target, "clamp")
    ids, vals = _top_positive(scores, scores.shape[0])
    return list(zip(ids, vals))


# ---------------------------------------------------------------------------
# class-level baselines

def assign_llm(
    pool: DescriptionPool,
    n_classes: int,
    cap: int | None = None,
) -> ClassAssignment:
    """Per-class generated-description lists, taken from pool origin tags.

    Order follows the pool; `cap` truncates each list, None keeps all.
    Classes that generated nothing get an empty list.
    """
    if pool.origin_class is None:
        raise DataError("pool has no origin_class metadata")
    if cap is not None and cap < 0:
        raise ConfigError(f"cap must be >= 0, got {cap}")
    out: ClassAssignment = {c: [] for c in range(n_classes)}
    for pool_id, origin in enumerate(pool.origin_class):
        if origin is None:
            continue
        if not 0 <= origin < n_classes:
            raise DataError(f"pool entry {pool_id}: origin class {origin} out of range")
        if cap is None or len(out[origin]) < cap:
            out[origin].append(pool_id)
    return out


def assign_random(
    pool_size: int,
    per_class: int,
    seed: int,
    n_classes: int,
) -> ClassAssignment:
    """Per-class draws without replacement from the whole pool.

    Classes draw independently (probe-sampler-v1 stream per class), so
    two classes may share descriptions.
    """
    if per_class > pool_size:
        raise ConfigError(f"per_class {per_class} exceeds pool size {pool_size}")
    return {
        c: sample_without_replacement(pool_size, per_class, stream(seed, c))
        for c in range(n_classes)
    }
