"""Embedding store: on-disk layout, validation, probe sampling.

A store is a directory:

    manifest.json    schema_version, dataset, dim, counts, dtype ("f32le"),
                     normalized flag, prompt_template, free-form extra keys
    classnames.json  list of class display names, index = class id
    cls_emb.f32      classname prompt embeddings, one row per class
    pool.json        {"texts": [...], "origin_class": [...] | null}
    pool_emb.f32     description pool embeddings, one row per description
    images.f32       image embeddings
    labels.u32le     per-image class id, uint32
    split.u8         per-image split, 0 = train, 1 = test
    pairs.idx        optional, (class_id u32, pool_id u32) per row
    pairs_emb.f32    optional, one row per pairs.idx entry

All floats are 32-bit little-endian, row-major; round trips are bit-exact.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, InsufficientSamples, NormViolation
from .rng import sample_without_replacement, stream

SCHEMA_VERSION = 1
DTYPE_TAG = "f32le"
NORM_TOL = 1e-3
TRAIN, TEST = 0, 1
DEFAULT_PAIR_TEMPLATE = "a photo of a {cls}, {desc}"


@dataclass
class DescriptionPool:
    """Global pool of classname-free description texts and embeddings."""

    texts: list[str]
    embeddings: np.ndarray  # (|P|, dim) float32
    origin_class: list[int | None] | None = None

    def __len__(self) -> int:
        return len(self.texts)


@dataclass
class PairEmbeddingTable:
    """Embeddings of rendered '{classname} + {description}' texts."""

    keys: list[tuple[int, int]]  # (class_id, pool_id), aligned with rows
    embeddings: np.ndarray       # (len(keys), dim) float32
    template: str = ""
    _index: dict[tuple[int, int], int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = {key: i for i, key in enumerate(self.keys)}

    def __len__(self) -> int:
        return len(self.keys)

    def row_index(self, class_id: int, pool_id: int) -> int:
        from .errors import PairMissingError

        try:
            return self._index[(class_id, pool_id)]
        except KeyError:
            raise PairMissingError(class_id, pool_id) from None


@dataclass
class DatasetStore:
    """In-memory view of one store directory."""

    name: str
    classnames: list[str]
    cls_emb: np.ndarray   # (|C|, dim) float32
    pool: DescriptionPool
    images: np.ndarray    # (N, dim) float32
    labels: np.ndarray    # (N,) uint32
    split: np.ndarray     # (N,) uint8
    normalized: bool = True
    prompt_template: str = "a photo of a {cls}"
    pairs: PairEmbeddingTable | None = None
    extra: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return int(self.cls_emb.shape[1])

    @property
    def n_classes(self) -> int:
        return len(self.classnames)

    def split_indices(self, which: int) -> np.ndarray:
        return np.nonzero(self.split == which)[0]

    def class_train_indices(self, class_id: int) -> np.ndarray:
        mask = (self.split == TRAIN) & (self.labels == class_id)
        return np.nonzero(mask)[0]


@dataclass
class ProbeSet:
    """n train-image indices per class, indices sorted ascending."""

    indices: np.ndarray  # (|C|, n) int64
    n: int
    seed: int


# ---------------------------------------------------------------------------
# validation

def _check_matrix(mat: np.ndarray, dim: int, name: str) -> None:
    if mat.ndim != 2:
        raise DataError(f"{name}: expected 2-d matrix, got shape {mat.shape}")
    if mat.shape[1] != dim:
        raise DataError(f"{name}: dim {mat.shape[1]} does not match manifest dim {dim}")
    if mat.dtype != np.float32:
        raise DataError(f"{name}: expected float32, got {mat.dtype}")
    if not np.all(np.isfinite(mat)):
        raise DataError(f"{name}: non-finite entries")


def _check_unit_rows(mat: np.ndarray, name: str) -> None:
    if mat.shape[0] == 0:
        return
    norms = np.linalg.norm(mat.astype(np.float64), axis=1)
    bad = np.nonzero(np.abs(norms - 1.0) > NORM_TOL)[0]
    if bad.size:
        i = int(bad[0])
        raise NormViolation(f"{name} row {i} has norm {norms[i]:.6f}")


def validate_store(store: DatasetStore) -> None:
    """Raise DataError (or a subclass) on any inconsistency."""
    dim = store.dim
    if store.cls_emb.shape[0] != store.n_classes:
        raise DataError(
            f"cls_emb rows {store.cls_emb.shape[0]} != classnames {store.n_classes}"
        )
    _check_matrix(store.cls_emb, dim, "cls_emb")
    _check_matrix(store.pool.embeddings, dim, "pool_emb")
    _check_matrix(store.images, dim, "images")
    if len(store.pool.texts) != store.pool.embeddings.shape[0]:
        raise DataError(
            f"pool texts {len(store.pool.texts)} != pool_emb rows "
            f"{store.pool.embeddings.shape[0]}"
        )
    n_images = store.images.shape[0]
    if store.labels.shape != (n_images,) or store.split.shape != (n_images,):
        raise DataError("labels/split length does not match image count")
    if n_images and int(store.labels.max(initial=0)) >= store.n_classes:
        raise DataError(f"label {int(store.labels.max())} out of range")
    if not np.all(np.isin(store.split, (TRAIN, TEST))):
        raise DataError("split values must be 0 (train) or 1 (test)")
    test_labels = store.labels[store.split == TEST]
    missing = set(range(store.n_classes)) - set(int(c) for c in test_labels)
    if missing:
        raise DataError(f"classes without test images: {sorted(missing)}")
    if store.normalized:
        _check_unit_rows(store.cls_emb, "cls_emb")
        _check_unit_rows(store.pool.embeddings, "pool_emb")
        _check_unit_rows(store.images, "images")

    origin = store.pool.origin_class
    if origin is not None:
        if len(origin) != len(store.pool.texts):
            raise DataError("origin_class length does not match pool size")
        for i, c in enumerate(origin):
            if c is None:
                continue
            if not 0 <= c < store.n_classes:
                raise DataError(f"pool entry {i}: origin class {c} out of range")
            if store.classnames[c].lower() in store.pool.texts[i].lower():
                raise DataError(
                    f"pool entry {i} contains its origin classname "
                    f"{store.classnames[c]!r}"
                )

    if store.pairs is not None:
        _check_matrix(store.pairs.embeddings, dim, "pairs_emb")
        if len(store.pairs.keys) != store.pairs.embeddings.shape[0]:
            raise DataError("pairs.idx length does not match pairs_emb rows")
        _check_unit_rows(store.pairs.embeddings, "pairs_emb")
        for c, p in store.pairs.keys:
            if not (0 <= c < store.n_classes and 0 <= p < len(store.pool)):
                raise DataError(f"pair key ({c}, {p}) out of range")


# ---------------------------------------------------------------------------
# persistence

def _require(path: Path) -> Path:
    if not path.exists():
        raise DataError(f"missing file: {path}")
    return path


def _read_binary(path: Path, dtype: str, columns: int | None = None) -> np.ndarray:
    raw = np.fromfile(_require(path), dtype=dtype)
    if columns is None:
        return raw
    if columns == 0 or raw.size % columns:
        if raw.size:
            raise DataError(f"{path.name}: size {raw.size} not divisible by {columns}")
        return raw.reshape(0, max(columns, 1))
    return raw.reshape(-1, columns)


def load_store(path: str | Path) -> DatasetStore:
    """Load and validate a store directory."""
    root = Path(path)
    if not root.is_dir():
        raise DataError(f"store directory not found: {root}")
    manifest = json.loads(_require(root / "manifest.json").read_text())
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise DataError(f"unsupported schema_version {manifest.get('schema_version')}")
    if manifest.get("dtype") != DTYPE_TAG:
        raise DataError(f"unsupported dtype {manifest.get('dtype')}")
    dim = int(manifest["dim"])

    classnames = json.loads(_require(root / "classnames.json").read_text())
    pool_meta = json.loads(_require(root / "pool.json").read_text())
    pool = DescriptionPool(
        texts=list(pool_meta["texts"]),
        embeddings=_read_binary(root / "pool_emb.f32", "<f4", dim),
        origin_class=pool_meta.get("origin_class"),
    )
    store = DatasetStore(
        name=manifest.get("dataset", root.name),
        classnames=list(classnames),
        cls_emb=_read_binary(root / "cls_emb.f32", "<f4", dim),
        pool=pool,
        images=_read_binary(root / "images.f32", "<f4", dim),
        labels=_read_binary(root / "labels.u32le", "<u4"),
        split=_read_binary(root / "split.u8", "u1"),
        normalized=bool(manifest.get("normalized", True)),
        prompt_template=manifest.get("prompt_template", ""),
        extra=dict(manifest.get("extra", {})),
    )

    counts = manifest.get("counts", {})
    for key, actual in (
        ("classes", store.n_classes),
        ("pool", len(pool)),
        ("images", store.images.shape[0]),
    ):
        if key in counts and counts[key] != actual:
            raise DataError(f"manifest counts.{key}={counts[key]} but found {actual}")

    idx_path = root / "pairs.idx"
    if idx_path.exists():
        raw = _read_binary(idx_path, "<u4")
        if raw.size % 2:
            raise DataError("pairs.idx: odd number of u32 values")
        keys = [(int(a), int(b)) for a, b in raw.reshape(-1, 2)]
        store.pairs = PairEmbeddingTable(
            keys=keys,
            embeddings=_read_binary(root / "pairs_emb.f32", "<f4", dim),
            template=manifest.get("extra", {}).get("pair_template", ""),
        )
        if "pairs" in counts and counts["pairs"] != len(keys):
            raise DataError(f"manifest counts.pairs={counts['pairs']} but found {len(keys)}")

    validate_store(store)
    return store


def build_manifest(store: DatasetStore) -> dict:
    counts = {
        "classes": store.n_classes,
        "pool": len(store.pool),
        "images": int(store.images.shape[0]),
    }
    if store.pairs is not None:
        counts["pairs"] = len(store.pairs)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "dataset": store.name,
        "dim": store.dim,
        "dtype": DTYPE_TAG,
        "normalized": store.normalized,
        "prompt_template": store.prompt_template,
        "counts": counts,
        "extra": dict(store.extra),
    }
    if store.pairs is not None and store.pairs.template:
        manifest["extra"]["pair_template"] = store.pairs.template
    return manifest


def _write_json(path: Path, payload) -> None:
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    )


def save_store(store: DatasetStore, path: str | Path) -> None:
    """Persist a valid store; overwrites byte-identically for equal input."""
    validate_store(store)
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    _write_json(root / "manifest.json", build_manifest(store))
    _write_json(root / "classnames.json", store.classnames)
    _write_json(
        root / "pool.json",
        {"texts": store.pool.texts, "origin_class": store.pool.origin_class},
    )
    (root / "cls_emb.f32").write_bytes(_f32_bytes(store.cls_emb))
    (root / "pool_emb.f32").write_bytes(_f32_bytes(store.pool.embeddings))
    (root / "images.f32").write_bytes(_f32_bytes(store.images))
    (root / "labels.u32le").write_bytes(
        np.ascontiguousarray(store.labels, dtype="<u4").tobytes()
    )
    (root / "split.u8").write_bytes(
        np.ascontiguousarray(store.split, dtype="u1").tobytes()
    )
    if store.pairs is not None:
        flat = np.array(store.pairs.keys, dtype="<u4").reshape(-1)
        (root / "pairs.idx").write_bytes(flat.tobytes())
        (root / "pairs_emb.f32").write_bytes(_f32_bytes(store.pairs.embeddings))


def _f32_bytes(mat: np.ndarray) -> bytes:
    return np.ascontiguousarray(mat, dtype="<f4").tobytes()


# ---------------------------------------------------------------------------
# probe sampling

def default_probe_count(store: DatasetStore) -> int:
    """Per-class probe count default: minimum train-class cardinality."""
    sizes = [len(store.class_train_indices(c)) for c in range(store.n_classes)]
    smallest = min(sizes)
    if smallest == 0:
        raise DataError(f"class {sizes.index(0)} has no train images")
    return smallest


def sample_probe_set(store: DatasetStore, n: int, seed: int) -> ProbeSet:
    """Draw n train probes per class with the probe-sampler-v1 scheme.

    Per-class draws are without replacement from that class's train
    indices in ascending order; the result rows are re-sorted ascending
    so the same (store, n, seed) always yields the identical array.
    """
    if n < 1:
        raise ConfigError(f"probe count must be >= 1, got {n}")
    rows = []
    for c in range(store.n_classes):
        candidates = store.class_train_indices(c)
        if len(candidates) < n:
            raise InsufficientSamples(c, len(candidates), n)
        picks = sample_without_replacement(len(candidates), n, stream(seed, c))
        rows.append(np.sort(candidates[np.array(picks, dtype=np.int64)]))
    return ProbeSet(indices=np.stack(rows).astype(np.int64), n=n, seed=seed)


# ---------------------------------------------------------------------------
# content hashes (cache keys)

def store_hash(store: DatasetStore) -> str:
    h = hashlib.sha256()
    h.update(_f32_bytes(store.images))
    h.update(np.ascontiguousarray(store.labels, dtype="<u4").tobytes())
    h.update(np.ascontiguousarray(store.split, dtype="u1").tobytes())
    return h.hexdigest()


def pool_hash(store: DatasetStore) -> str:
    return hashlib.sha256(_f32_bytes(store.pool.embeddings)).hexdigest()
