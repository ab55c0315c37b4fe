"""Small store builders shared across test modules."""
import numpy as np

from descsel.store import DatasetStore, DescriptionPool


def unit_rows(mat) -> np.ndarray:
    mat = np.asarray(mat, dtype=np.float64)
    return (mat / np.linalg.norm(mat, axis=1, keepdims=True)).astype(np.float32)


def random_store(
    rng: np.random.Generator,
    n_classes: int = 4,
    dim: int = 8,
    train_per_class: int = 6,
    test_per_class: int = 2,
    pool_size: int = 10,
    name: str = "rand",
) -> DatasetStore:
    """A valid store of unit-normalized random rows; no planted structure."""
    pool = DescriptionPool(
        texts=[f"desc {i}" for i in range(pool_size)],
        embeddings=(
            unit_rows(rng.standard_normal((pool_size, dim)))
            if pool_size
            else np.zeros((0, dim), dtype=np.float32)
        ),
        origin_class=None,
    )
    blocks, labels, split = [], [], []
    for which, count in ((0, train_per_class), (1, test_per_class)):
        for c in range(n_classes):
            blocks.append(unit_rows(rng.standard_normal((count, dim))))
            labels.extend([c] * count)
            split.extend([which] * count)
    return DatasetStore(
        name=name,
        classnames=[f"thing_{c}" for c in range(n_classes)],
        cls_emb=unit_rows(rng.standard_normal((n_classes, dim))),
        pool=pool,
        images=np.concatenate(blocks),
        labels=np.array(labels, dtype=np.uint32),
        split=np.array(split, dtype=np.uint8),
    )
