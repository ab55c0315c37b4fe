"""Writer and light reader for embedding-store directories.

Layout (all floats 32-bit little-endian, row-major):

    manifest.json    schema_version, dataset, dim, dtype ("f32le"),
                     normalized, prompt_template, counts, extra
    classnames.json  list of class display names, index = class id
    cls_emb.f32      classname prompt embeddings, one row per class
    pool.json        {"texts": [...], "origin_class": [...] | null}
    pool_emb.f32     description pool embeddings, one row per text
    images.f32       image embeddings
    labels.u32le     per-image class id, uint32
    split.u8         per-image split, 0 = train, 1 = test
    pairs.idx        optional, (class_id u32, pool_id u32) per row
    pairs_emb.f32    optional, one row per pairs.idx entry

Every file goes through a temp file plus os.replace, and manifest.json
is written last, so an interrupted export leaves a directory that fails
to load rather than one that silently loads half-written data.
"""
from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .errors import DataError

SCHEMA_VERSION = 1
DTYPE_TAG = "f32le"
TRAIN, TEST = 0, 1


def _atomic_bytes(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def write_json(path: Path, payload) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    _atomic_bytes(path, text.encode("utf-8"))


def f32_bytes(mat: np.ndarray) -> bytes:
    return np.ascontiguousarray(mat, dtype="<f4").tobytes()


def _load_json(path: Path):
    if not path.exists():
        raise DataError(f"missing file: {path}")
    return json.loads(path.read_text())


def read_manifest(store_dir: str | Path) -> dict:
    manifest = _load_json(Path(store_dir) / "manifest.json")
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise DataError(f"unsupported schema_version {manifest.get('schema_version')}")
    if manifest.get("dtype") != DTYPE_TAG:
        raise DataError(f"unsupported dtype {manifest.get('dtype')}")
    return manifest


def read_classnames(store_dir: str | Path) -> list[str]:
    names = _load_json(Path(store_dir) / "classnames.json")
    return [str(n) for n in names]


def read_pool(store_dir: str | Path) -> tuple[list[str], list[int | None] | None]:
    meta = _load_json(Path(store_dir) / "pool.json")
    origins = meta.get("origin_class")
    return list(meta["texts"]), origins


def _check_coherent(
    classnames, cls_emb, pool_texts, pool_origins, pool_emb, images, labels, split
) -> int:
    if cls_emb.ndim != 2 or cls_emb.shape[0] != len(classnames):
        raise DataError(
            f"cls_emb rows {cls_emb.shape[0]} != classnames {len(classnames)}"
        )
    dim = int(cls_emb.shape[1])
    for name, mat in (("pool_emb", pool_emb), ("images", images)):
        if mat.ndim != 2 or mat.shape[1] != dim:
            raise DataError(f"{name}: shape {mat.shape} does not match dim {dim}")
    if pool_emb.shape[0] != len(pool_texts):
        raise DataError(
            f"pool_emb rows {pool_emb.shape[0]} != pool texts {len(pool_texts)}"
        )
    if pool_origins is not None and len(pool_origins) != len(pool_texts):
        raise DataError("origin_class length does not match pool size")
    n = images.shape[0]
    if labels.shape != (n,) or split.shape != (n,):
        raise DataError("labels/split length does not match image count")
    return dim


def write_store(
    out_dir: str | Path,
    *,
    name: str,
    classnames: list[str],
    cls_emb: np.ndarray,
    pool_texts: list[str],
    pool_origins: list[int | None] | None,
    pool_emb: np.ndarray,
    images: np.ndarray,
    labels: np.ndarray,
    split: np.ndarray,
    prompt_template: str,
    extra: dict | None = None,
) -> Path:
    """Write a complete store directory; overwrites byte-identically."""
    dim = _check_coherent(
        classnames, cls_emb, pool_texts, pool_origins, pool_emb, images, labels, split
    )
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    write_json(root / "classnames.json", list(classnames))
    write_json(
        root / "pool.json",
        {"texts": list(pool_texts), "origin_class": pool_origins},
    )
    _atomic_bytes(root / "cls_emb.f32", f32_bytes(cls_emb))
    _atomic_bytes(root / "pool_emb.f32", f32_bytes(pool_emb))
    _atomic_bytes(root / "images.f32", f32_bytes(images))
    _atomic_bytes(
        root / "labels.u32le", np.ascontiguousarray(labels, dtype="<u4").tobytes()
    )
    _atomic_bytes(root / "split.u8", np.ascontiguousarray(split, dtype="u1").tobytes())
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "dataset": name,
        "dim": dim,
        "dtype": DTYPE_TAG,
        "normalized": True,
        "prompt_template": prompt_template,
        "counts": {
            "classes": len(classnames),
            "pool": len(pool_texts),
            "images": int(images.shape[0]),
        },
        "extra": dict(extra or {}),
    }
    write_json(root / "manifest.json", manifest)
    return root


def write_pairs(
    store_dir: str | Path,
    keys: list[tuple[int, int]],
    embeddings: np.ndarray,
    template: str,
) -> None:
    """Add or replace the pair table of an existing store in place."""
    root = Path(store_dir)
    manifest = read_manifest(root)
    if embeddings.ndim != 2 or embeddings.shape[1] != int(manifest["dim"]):
        raise DataError(
            f"pairs_emb shape {embeddings.shape} does not match store dim "
            f"{manifest['dim']}"
        )
    if embeddings.shape[0] != len(keys):
        raise DataError("pairs_emb rows do not match key count")
    flat = np.asarray(
        [v for key in keys for v in key], dtype="<u4"
    )
    _atomic_bytes(root / "pairs.idx", flat.tobytes())
    _atomic_bytes(root / "pairs_emb.f32", f32_bytes(embeddings))
    manifest["counts"]["pairs"] = len(keys)
    manifest.setdefault("extra", {})["pair_template"] = template
    write_json(root / "manifest.json", manifest)
