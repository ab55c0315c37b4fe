"""Cosine similarity and the classwise lookup matrix S.

S[c][p] is the mean cosine between class c's probe images and pool
description p.  Accumulation runs in float64 over probes in ascending
index order, the result is stored float32; that keeps independent
implementations within 1e-6 of each other.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .store import DatasetStore, ProbeSet, pool_hash, store_hash

LOOKUP_BIN = "lookup.f32"
LOOKUP_META = "lookup.json"


@dataclass
class LookupMatrix:
    values: np.ndarray  # (|C|, |P|) float32
    n: int
    seed: int
    pool_hash: str
    store_hash: str


def _unit_rows(mat: np.ndarray, name: str = "matrix") -> np.ndarray:
    out = np.asarray(mat, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name}: expected 2-d input, got shape {out.shape}")
    norms = np.linalg.norm(out, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError(f"{name}: zero-norm row")
    return out / norms


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if u.shape != v.shape:
        raise ValueError(f"dim mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine of zero vector")
    return float(np.dot(u, v) / (nu * nv))


def sim_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All pairwise cosines between rows of a and rows of b, float64."""
    ua, ub = _unit_rows(a, "a"), _unit_rows(b, "b")
    if ua.shape[1] != ub.shape[1]:
        raise ValueError(f"dim mismatch: {ua.shape[1]} vs {ub.shape[1]}")
    return ua @ ub.T


def build_lookup(store: DatasetStore, probes: ProbeSet) -> LookupMatrix:
    """Classwise probe-mean similarities against the description pool.

    Worker counts never enter here: each (class, description) cell is an
    independent probe-order reduction, so the output is a pure function
    of (store, probes).
    """
    pool_unit = _unit_rows(store.pool.embeddings, "pool_emb")
    n_classes = store.n_classes
    values = np.empty((n_classes, len(store.pool)), dtype=np.float32)
    for c in range(n_classes):
        rows = _unit_rows(store.images[probes.indices[c]], "images")
        sims = rows @ pool_unit.T  # (n, |P|) float64
        acc = np.zeros(len(store.pool), dtype=np.float64)
        for i in range(probes.n):  # fixed ascending probe order
            acc += sims[i]
        values[c] = (acc / probes.n).astype(np.float32)
    return LookupMatrix(
        values=values,
        n=probes.n,
        seed=probes.seed,
        pool_hash=pool_hash(store),
        store_hash=store_hash(store),
    )


def save_lookup(lookup: LookupMatrix, directory: str | Path) -> None:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    (root / LOOKUP_BIN).write_bytes(
        np.ascontiguousarray(lookup.values, dtype="<f4").tobytes()
    )
    meta = {
        "n": lookup.n,
        "seed": lookup.seed,
        "pool_hash": lookup.pool_hash,
        "store_hash": lookup.store_hash,
        "classes": int(lookup.values.shape[0]),
        "pool": int(lookup.values.shape[1]),
    }
    (root / LOOKUP_META).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_lookup(directory: str | Path) -> LookupMatrix:
    root = Path(directory)
    meta_path = root / LOOKUP_META
    bin_path = root / LOOKUP_BIN
    if not meta_path.exists() or not bin_path.exists():
        raise DataError(f"no cached lookup under {root}")
    meta = json.loads(meta_path.read_text())
    raw = np.fromfile(bin_path, dtype="<f4")
    shape = (int(meta["classes"]), int(meta["pool"]))
    if raw.size != shape[0] * shape[1]:
        raise DataError(f"{LOOKUP_BIN}: size {raw.size} does not match {shape}")
    return LookupMatrix(
        values=raw.reshape(shape),
        n=int(meta["n"]),
        seed=int(meta["seed"]),
        pool_hash=str(meta["pool_hash"]),
        store_hash=str(meta["store_hash"]),
    )


def lookup_for(
    store: DatasetStore,
    probes: ProbeSet,
    cache_dir: str | Path | None = None,
) -> LookupMatrix:
    """Build S, or reuse a cached copy whose (n, seed, hashes) match."""
    if cache_dir is not None:
        try:
            cached = load_lookup(cache_dir)
        except DataError:
            cached = None
        if (
            cached is not None
            and cached.n == probes.n
            and cached.seed == probes.seed
            and cached.pool_hash == pool_hash(store)
            and cached.store_hash == store_hash(store)
        ):
            return cached
    lookup = build_lookup(store, probes)
    if cache_dir is not None:
        save_lookup(lookup, cache_dir)
    return lookup
