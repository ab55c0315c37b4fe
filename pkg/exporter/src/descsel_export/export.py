"""Store and pair-table export.

export_store walks a class-folder dataset, encodes images, classname
prompts and an optional description pool, and writes a normalized store
directory.

export_pairs is the second half of the two-pass protocol: `descsel
emit-pairs` lists the (class, description) keys a selection or
assignment actually needs, and this module renders and encodes exactly
those texts. Dense |C| x |P| tables are never materialized.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import storeio
from .datasets import scan_dataset
from .encoders import Encoder
from .errors import ConfigError, DataError

DEFAULT_PROMPT_TEMPLATE = "a photo of a {cls}"
DEFAULT_PAIR_TEMPLATE = "a photo of a {cls}, {desc}"


def require_template_fields(
    template: str, fields: tuple[str, ...], what: str
) -> None:
    for field in fields:
        if "{" + field + "}" not in template:
            raise ConfigError(f"{what} must contain {{{field}}}: {template!r}")


def unit_rows(mat: np.ndarray, what: str) -> np.ndarray:
    """L2-normalize rows in float64, cast to float32."""
    mat = np.asarray(mat, dtype=np.float64)
    if mat.shape[0] == 0:
        return mat.astype(np.float32)
    norms = np.linalg.norm(mat, axis=1)
    bad = np.nonzero(norms == 0.0)[0]
    if bad.size:
        raise DataError(f"{what}: row {int(bad[0])} has zero norm")
    return (mat / norms[:, None]).astype(np.float32)


def load_pool_file(path: str | Path) -> tuple[list[str], list[int | None] | None]:
    """Read a pool JSON: either a bare list of texts or the store shape."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"pool file not found: {path}")
    payload = json.loads(path.read_text())
    if isinstance(payload, list):
        return [str(t) for t in payload], None
    try:
        texts = [str(t) for t in payload["texts"]]
    except (TypeError, KeyError):
        raise DataError(f"pool file {path} has neither a list nor a 'texts' key")
    origins = payload.get("origin_class")
    if origins is not None:
        origins = [None if o is None else int(o) for o in origins]
    return texts, origins


def _check_pool_against_classnames(
    texts: list[str], origins: list[int | None] | None, classnames: list[str]
) -> None:
    # mirror of the store contract: a description must not contain its
    # own origin classname (case-insensitive substring)
    if origins is None:
        return
    if len(origins) != len(texts):
        raise DataError("origin_class length does not match pool size")
    for i, origin in enumerate(origins):
        if origin is None:
            continue
        if not 0 <= origin < len(classnames):
            raise DataError(f"pool entry {i}: origin class {origin} out of range")
        if classnames[origin].lower() in texts[i].lower():
            raise DataError(
                f"pool entry {i} contains its origin classname "
                f"{classnames[origin]!r}"
            )


def export_store(
    data_root: str | Path,
    out_dir: str | Path,
    encoder: Encoder,
    *,
    template: str = DEFAULT_PROMPT_TEMPLATE,
    name: str | None = None,
    pool_file: str | Path | None = None,
) -> Path:
    """Encode a dataset folder into a valid normalized store directory."""
    require_template_fields(template, ("cls",), "classname template")
    dataset = scan_dataset(data_root)
    pool_texts: list[str] = []
    pool_origins: list[int | None] | None = None
    if pool_file is not None:
        pool_texts, pool_origins = load_pool_file(pool_file)
        _check_pool_against_classnames(pool_texts, pool_origins, dataset.classnames)

    prompts = [template.format(cls=c) for c in dataset.classnames]
    cls_emb = unit_rows(encoder.encode_texts(prompts), "classname embeddings")
    if pool_texts:
        pool_emb = unit_rows(encoder.encode_texts(pool_texts), "pool embeddings")
    else:
        pool_emb = np.zeros((0, encoder.dim), dtype=np.float32)
    images = unit_rows(
        encoder.encode_images([item.path for item in dataset.items]),
        "image embeddings",
    )
    labels = np.asarray([item.class_id for item in dataset.items], dtype=np.uint32)
    split = np.asarray([item.split for item in dataset.items], dtype=np.uint8)

    return storeio.write_store(
        out_dir,
        name=name or dataset.name,
        classnames=dataset.classnames,
        cls_emb=cls_emb,
        pool_texts=pool_texts,
        pool_origins=pool_origins,
        pool_emb=pool_emb,
        images=images,
        labels=labels,
        split=split,
        prompt_template=template,
        extra={"encoder": encoder.id},
    )


def read_keys_file(path: str | Path) -> tuple[list[tuple[int, int]], str | None]:
    """Read an emit-pairs payload or a bare [[class, pool], ...] list."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"keys file not found: {path}")
    payload = json.loads(path.read_text())
    template = None
    if isinstance(payload, dict):
        template = payload.get("template")
        payload = payload.get("keys")
    if not isinstance(payload, list):
        raise DataError(f"keys file {path} has no key list")
    try:
        keys = [(int(c), int(p)) for c, p in payload]
    except (TypeError, ValueError):
        raise DataError(f"keys file {path}: entries must be [class_id, pool_id]")
    return keys, template


def export_pairs(
    store_dir: str | Path,
    keys: list[tuple[int, int]],
    encoder: Encoder,
    *,
    template: str | None = None,
) -> int:
    """Encode one row per unique key into the store's pair table.

    Returns the number of rows written. An empty key list writes an
    empty (but present and valid) table.
    """
    store_dir = Path(store_dir)
    manifest = storeio.read_manifest(store_dir)
    dim = int(manifest["dim"])
    if encoder.dim != dim:
        raise ConfigError(
            f"encoder dim {encoder.dim} does not match store dim {dim}"
        )
    classnames = storeio.read_classnames(store_dir)
    pool_texts, _ = storeio.read_pool(store_dir)

    if template is None:
        template = manifest.get("extra", {}).get("pair_template") or (
            DEFAULT_PAIR_TEMPLATE
        )
    require_template_fields(template, ("cls", "desc"), "pair template")

    unique = sorted(set(keys))
    for c, p in unique:
        if not (0 <= c < len(classnames) and 0 <= p < len(pool_texts)):
            raise DataError(f"pair key ({c}, {p}) out of range")
    texts = [
        template.format(cls=classnames[c], desc=pool_texts[p]) for c, p in unique
    ]
    if texts:
        rows = unit_rows(encoder.encode_texts(texts), "pair embeddings")
    else:
        rows = np.zeros((0, dim), dtype=np.float32)
    storeio.write_pairs(store_dir, unique, rows, template)
    return len(unique)
