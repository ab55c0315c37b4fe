"""Top-k candidate neighborhoods from classname-prompt similarity."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .similarity import sim_matrix

log = logging.getLogger(__name__)


@dataclass
class CandidateSet:
    image_index: int
    class_ids: np.ndarray  # (k,) int64, descending score
    scores: np.ndarray     # (k,) float64

    @property
    def k(self) -> int:
        return len(self.class_ids)


def candidates(
    image: np.ndarray,
    cls_emb: np.ndarray,
    k: int,
    image_index: int = -1,
) -> CandidateSet:
    """The k classes most cosine-similar to one image embedding.

    Ties break toward the smaller class id.  k below 2 is rejected: a
    single candidate has no rival to be distinctive against.  k above
    the class count is clamped with a warning.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    n_classes = cls_emb.shape[0]
    if k > n_classes:
        log.warning("k=%d clamped to class count %d", k, n_classes)
        k = n_classes
    scores = sim_matrix(np.asarray(image).reshape(1, -1), cls_emb)[0]
    order = np.lexsort((np.arange(n_classes), -scores))[:k]
    return CandidateSet(
        image_index=image_index,
        class_ids=order.astype(np.int64),
        scores=scores[order],
    )


def candidates_batch(
    images: np.ndarray,
    cls_emb: np.ndarray,
    k: int,
    image_indices: list[int] | np.ndarray | None = None,
) -> list[CandidateSet]:
    """Per-image candidate sets; row i uses image_indices[i] if given."""
    if image_indices is None:
        image_indices = range(images.shape[0])
    return [
        candidates(images[row], cls_emb, k, image_index=int(idx))
        for row, idx in enumerate(image_indices)
    ]
