"""Embedding encoders behind one small protocol.

HashEncoder derives rows from SHA-256 digests of the raw file bytes or
text, so identical inputs map to identical vectors on every platform
with zero model dependencies. It stands in for a real checkpoint
wherever bitwise-reproducible exports matter (tests, demos, format
work); its geometry is meaningless for actual classification.

ClipEncoder wraps a transformers CLIP-family checkpoint. torch,
transformers and Pillow are imported lazily so the base install stays
numpy-only.

Encoders return raw feature rows; export normalizes centrally.
"""
from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Protocol

import numpy as np

from .errors import ConfigError, DataError


class Encoder(Protocol):
    id: str
    dim: int

    def encode_images(self, paths: list[Path]) -> np.ndarray: ...

    def encode_texts(self, texts: list[str]) -> np.ndarray: ...


class HashEncoder:
    """Deterministic digest-based encoder, unit-free pseudo features."""

    def __init__(self, dim: int = 64):
        if dim < 2:
            raise ConfigError(f"hash encoder dim must be >= 2, got {dim}")
        self.dim = int(dim)
        self.id = f"hash-v1/d{self.dim}"

    def _row(self, tag: bytes, payload: bytes) -> np.ndarray:
        # counter-mode expansion of one digest into dim u64 lanes
        seed = hashlib.sha256(tag + payload).digest()
        need = self.dim * 8
        blocks = [
            hashlib.sha256(seed + i.to_bytes(4, "little")).digest()
            for i in range((need + 31) // 32)
        ]
        raw = b"".join(blocks)[:need]
        lanes = np.frombuffer(raw, dtype="<u8").astype(np.float64)
        return lanes / float(2**64) * 2.0 - 1.0

    def _stack(self, rows: list[np.ndarray]) -> np.ndarray:
        if not rows:
            return np.zeros((0, self.dim), dtype=np.float32)
        return np.stack(rows).astype(np.float32)

    def encode_images(self, paths: list[Path]) -> np.ndarray:
        rows = []
        for path in paths:
            path = Path(path)
            if not path.is_file():
                raise DataError(f"image file not found: {path}")
            rows.append(self._row(b"image\x00", path.read_bytes()))
        return self._stack(rows)

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        return self._stack(
            [self._row(b"text\x00", t.encode("utf-8")) for t in texts]
        )


class ClipEncoder:
    """CLIP checkpoint via transformers.

    CPU by default: GPU kernels are not bitwise stable, and the store
    contract promises reproducible re-export for a fixed checkpoint.
    """

    def __init__(self, checkpoint: str, device: str = "cpu", batch_size: int = 32):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:  # pragma: no cover - env dependent
            raise ConfigError(
                "clip encoder needs torch/transformers/Pillow; "
                "install the [clip] extra"
            ) from exc
        self._torch = torch
        self.model = CLIPModel.from_pretrained(checkpoint).to(device).eval()
        self.processor = CLIPProcessor.from_pretrained(checkpoint)
        self.device = device
        self.batch_size = int(batch_size)
        self.dim = int(self.model.config.projection_dim)
        self.id = f"clip/{checkpoint}"

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        out = []
        with self._torch.inference_mode():
            for i in range(0, len(texts), self.batch_size):
                batch = self.processor(
                    text=list(texts[i : i + self.batch_size]),
                    return_tensors="pt",
                    padding=True,
                    truncation=True,
                ).to(self.device)
                out.append(self.model.get_text_features(**batch).cpu().numpy())
        if not out:
            return np.zeros((0, self.dim), dtype=np.float32)
        return np.concatenate(out).astype(np.float32)

    def encode_images(self, paths: list[Path]) -> np.ndarray:
        from PIL import Image

        out = []
        with self._torch.inference_mode():
            for i in range(0, len(paths), self.batch_size):
                chunk = paths[i : i + self.batch_size]
                images = [Image.open(p).convert("RGB") for p in chunk]
                batch = self.processor(images=images, return_tensors="pt").to(
                    self.device
                )
                out.append(self.model.get_image_features(**batch).cpu().numpy())
        if not out:
            return np.zeros((0, self.dim), dtype=np.float32)
        return np.concatenate(out).astype(np.float32)


def make_encoder(
    kind: str, checkpoint: str | None = None, dim: int = 64
) -> Encoder:
    if kind == "hash":
        return HashEncoder(dim=dim)
    if kind == "clip":
        if not checkpoint:
            raise ConfigError("clip encoder needs --checkpoint")
        return ClipEncoder(checkpoint)
    raise ConfigError(f"unknown encoder kind {kind!r}")
