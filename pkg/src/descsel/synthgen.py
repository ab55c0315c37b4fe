"""Synthetic stores with planted, recoverable description structure.

Geometry (orthonormal axes of R^dim):

    axis c                 class prototype e_c,      c < C
    axis C + c*g + j       planted trait f_{c,j}     j < g per class
    axis C + g*C + c       prompt jitter u_c         when dim allows

    images      normalize(e_c + noise), noise iid N(0, sigma^2/dim)
                per coordinate, so sigma is the expected noise norm
    planted     normalize(0.9 e_c + sqrt(1-0.81) f_{c,j}); high cosine
                to own-class images, near zero elsewhere
    distractors a `overlap` fraction of the remaining pool mixes two or
                three prototypes (ambiguous between those classes), the
                rest are directions orthogonal-in-expectation to
                everything (class-neutral)
    prompts     normalize(gamma e_c + sqrt(1-gamma^2) u_c) with gamma
                proportional to sigma: the classname margin shrinks
                with the noise floor, leaving rank-1 accuracy around
                3/4 so description evidence has headroom, while sigma=0
                keeps prompts exactly on the prototype (rank-1 always
                correct).  Without spare dims prompts stay on e_c.
    pairs       normalize(cls_emb[c] + pool_emb[p]) for every (c, p)

Guarantees validated after generation: planted descriptions beat every
other class's images by at least 2*sigma in mean cosine, else the spec
is infeasible and generation fails.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .selector import ClassAssignment
from .store import (
    DEFAULT_PAIR_TEMPLATE,
    DatasetStore,
    DescriptionPool,
    PairEmbeddingTable,
    save_store,
    validate_store,
)

PLANTED_ALIGN = 0.9          # prototype weight inside a planted description
CLS_MARGIN_SCALE = 3.5       # classname margin in units of the noise floor
PARTNER_LEAN = 0.85          # even-class prompt lean toward its odd partner


@dataclass(frozen=True)
class SynthSpec:
    n_classes: int = 10
    dim: int = 128
    train_per_class: int = 30
    test_per_class: int = 50
    pool_size: int = 100
    planted_per_class: int = 3
    sigma: float = 0.3
    overlap: float = 0.3
    seed: int = 7
    dataset_name: str = "synthetic"

    def __post_init__(self):
        if min(self.n_classes, self.train_per_class, self.test_per_class) < 1:
            raise DataError("class and per-class image counts must be >= 1")
        if self.planted_per_class < 1:
            raise DataError("planted_per_class must be >= 1")
        planted = self.n_classes * self.planted_per_class
        if planted > self.pool_size:
            raise DataError(
                f"{planted} planted descriptions exceed pool size {self.pool_size}"
            )
        if self.dim < self.n_classes + planted:
            raise DataError(
                f"dim {self.dim} too small for {self.n_classes} classes "
                f"with {self.planted_per_class} orthogonally planted traits each"
            )
        if self.sigma < 0 or not 0 <= self.overlap <= 1:
            raise DataError("sigma must be >= 0 and overlap within [0, 1]")


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def generate(
    spec: SynthSpec,
) -> tuple[DatasetStore, ClassAssignment, PairEmbeddingTable]:
    rng = np.random.default_rng(spec.seed)
    C, g, dim = spec.n_classes, spec.planted_per_class, spec.dim
    axis = np.eye(dim)
    proto = axis[:C]
    trait = axis[C : C + C * g].reshape(C, g, dim)

    # classname prompts: weak prototype alignment plus, for even classes,
    # a lean toward the next class.  Leaned prompts outrank the partner's
    # own prompt on a noise flip, which caps rank-1 accuracy while the
    # true class stays inside small neighborhoods.  sigma = 0 keeps
    # prompts exactly on the prototype, so rank-1 is then always right.
    jitter_axes = axis[C + C * g :]
    gamma = CLS_MARGIN_SCALE * spec.sigma / np.sqrt(dim)
    cls_rows = np.empty((C, dim))
    for c in range(C):
        if spec.sigma == 0.0 or len(jitter_axes) == 0 or gamma >= 1.0:
            cls_rows[c] = proto[c]
            continue
        signal = gamma * proto[c]
        if c % 2 == 0 and c + 1 < C:
            signal = signal + gamma * PARTNER_LEAN * proto[c + 1]
        if len(jitter_axes) >= C:
            u = jitter_axes[c]
        else:
            # shared complement: random direction orthogonal to all signal axes
            u = jitter_axes.T @ _unit(rng.standard_normal(len(jitter_axes)))
        cls_rows[c] = _unit(signal + np.sqrt(1 - gamma**2) * u)

    # description pool: planted first, then distractors; order shuffled below
    beta = np.sqrt(1.0 - PLANTED_ALIGN**2)
    rows, texts, origins = [], [], []
    for c in range(C):
        for j in range(g):
            rows.append(PLANTED_ALIGN * proto[c] + beta * trait[c, j])
            texts.append(f"planted cue {c:02d}.{j}")
            origins.append(c)
    n_distract = spec.pool_size - C * g
    n_mix = int(round(spec.overlap * n_distract))
    for i in range(n_distract):
        if i < n_mix:
            members = rng.choice(C, size=int(rng.integers(2, 4)), replace=False)
            weights = rng.uniform(0.5, 1.0, size=len(members))
            v = weights @ proto[members] + 0.2 * _unit(rng.standard_normal(dim))
            texts.append(f"shared cue {i:03d}")
        else:
            v = rng.standard_normal(dim)
            texts.append(f"background cue {i:03d}")
        rows.append(_unit(v))
        origins.append(None)
    order = rng.permutation(spec.pool_size)
    pool_rows = np.stack([_unit(rows[i]) for i in order])
    pool = DescriptionPool(
        texts=[texts[i] for i in order],
        embeddings=pool_rows.astype(np.float32),
        origin_class=[origins[i] for i in order],
    )
    planted: ClassAssignment = {c: [] for c in range(C)}
    for new_id, old_id in enumerate(order):
        if origins[old_id] is not None:
            planted[origins[old_id]].append(new_id)
    planted = {c: sorted(ids) for c, ids in planted.items()}

    # images: per-class train block, then per-class test block
    def draw(count: int, c: int) -> np.ndarray:
        noise = spec.sigma / np.sqrt(dim) * rng.standard_normal((count, dim))
        raw = proto[c] + noise
        return raw / np.linalg.norm(raw, axis=1, keepdims=True)

    blocks, labels, split = [], [], []
    for which, count in ((0, spec.train_per_class), (1, spec.test_per_class)):
        for c in range(C):
            blocks.append(draw(count, c))
            labels.extend([c] * count)
            split.extend([which] * count)
    images = np.concatenate(blocks)

    cls_emb = cls_rows.astype(np.float32)
    pair_keys = [(c, p) for c in range(C) for p in range(spec.pool_size)]
    pair_rows = np.stack([
        _unit(cls_rows[c] + pool_rows[p]) for c, p in pair_keys
    ])
    pairs = PairEmbeddingTable(
        keys=pair_keys,
        embeddings=pair_rows.astype(np.float32),
        template=DEFAULT_PAIR_TEMPLATE,
    )

    store = DatasetStore(
        name=spec.dataset_name,
        classnames=[f"class_{c:02d}" for c in range(C)],
        cls_emb=cls_emb,
        pool=pool,
        images=images.astype(np.float32),
        labels=np.array(labels, dtype=np.uint32),
        split=np.array(split, dtype=np.uint8),
        normalized=True,
        prompt_template="a photo of a {cls}",
        pairs=pairs,
        extra={"synthetic": True, "synthetic_pairs": True, "seed": spec.seed},
    )
    validate_store(store)
    _check_planted_margin(store, planted, spec)
    return store, planted, pairs


def _check_planted_margin(
    store: DatasetStore, planted: ClassAssignment, spec: SynthSpec
) -> None:
    """Planted descriptions must beat foreign images by 2*sigma in mean."""
    imgs = store.images.astype(np.float64)
    pool = store.pool.embeddings.astype(np.float64)
    train = store.split_indices(0)
    class_means = np.stack([
        imgs[train[store.labels[train] == c]].mean(axis=0)
        for c in range(spec.n_classes)
    ])  # (C, dim); rows are unit in expectation, close enough for the check
    sims = class_means @ pool.T
    worst = np.inf
    for c, ids in planted.items():
        for p in ids:
            own = sims[c, p]
            cross = max(sims[a, p] for a in range(spec.n_classes) if a != c)
            worst = min(worst, own - cross)
    if worst < 2 * spec.sigma:
        raise DataError(
            f"infeasible spec: planted margin {worst:.3f} below 2*sigma "
            f"{2 * spec.sigma:.3f}"
        )


def write_synthetic(spec: SynthSpec, out_dir: str | Path) -> Path:
    """Generate and persist a store plus its ground truth assignment."""
    store, planted, _pairs = generate(spec)
    root = Path(out_dir)
    save_store(store, root)
    payload = {
        "dataset": spec.dataset_name,
        "planted": {str(c): ids for c, ids in sorted(planted.items())},
        "spec": {
            "n_classes": spec.n_classes,
            "dim": spec.dim,
            "train_per_class": spec.train_per_class,
            "test_per_class": spec.test_per_class,
            "pool_size": spec.pool_size,
            "planted_per_class": spec.planted_per_class,
            "sigma": spec.sigma,
            "overlap": spec.overlap,
            "seed": spec.seed,
        },
    }
    (root / "ground_truth.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n"
    )
    return root


def load_ground_truth(store_dir: str | Path) -> ClassAssignment:
    path = Path(store_dir) / "ground_truth.json"
    if not path.exists():
        raise DataError(f"missing file: {path}")
    payload = json.loads(path.read_text())
    return {int(c): list(ids) for c, ids in payload["planted"].items()}
