"""HashEncoder determinism and the encoder factory."""
import numpy as np
import pytest

from descsel_export.encoders import HashEncoder, make_encoder
from descsel_export.errors import ConfigError, DataError


def test_text_shape_and_dtype():
    enc = HashEncoder(dim=16)
    out = enc.encode_texts(["a", "b", "c"])
    assert out.shape == (3, 16)
    assert out.dtype == np.float32
    assert np.all(np.isfinite(out))


def test_empty_inputs_keep_width():
    enc = HashEncoder(dim=8)
    assert enc.encode_texts([]).shape == (0, 8)
    assert enc.encode_images([]).shape == (0, 8)


def test_determinism_across_instances():
    a = HashEncoder(dim=32).encode_texts(["same text", "other"])
    b = HashEncoder(dim=32).encode_texts(["same text", "other"])
    assert np.array_equal(a, b)


def test_image_rows_follow_file_bytes(tmp_path):
    f1 = tmp_path / "one.png"
    f2 = tmp_path / "two.png"
    f1.write_bytes(b"payload")
    f2.write_bytes(b"payload")
    enc = HashEncoder(dim=16)
    rows = enc.encode_images([f1, f2])
    assert np.array_equal(rows[0], rows[1])  # content, not path, decides
    f2.write_bytes(b"different")
    rows2 = enc.encode_images([f1, f2])
    assert not np.array_equal(rows2[0], rows2[1])


def test_text_and_image_domains_are_separated(tmp_path):
    f = tmp_path / "x.png"
    f.write_bytes(b"abc")
    enc = HashEncoder(dim=16)
    img = enc.encode_images([f])[0]
    txt = enc.encode_texts(["abc"])[0]
    assert not np.array_equal(img, txt)


def test_distinct_texts_distinct_rows():
    enc = HashEncoder(dim=16)
    rows = enc.encode_texts([f"text {i}" for i in range(50)])
    assert len({r.tobytes() for r in rows}) == 50


def test_missing_image_file(tmp_path):
    with pytest.raises(DataError, match="not found"):
        HashEncoder(dim=8).encode_images([tmp_path / "absent.png"])


def test_dim_too_small():
    with pytest.raises(ConfigError, match="dim"):
        HashEncoder(dim=1)


def test_factory_dispatch():
    enc = make_encoder("hash", dim=24)
    assert enc.dim == 24
    assert enc.id == "hash-v1/d24"
    with pytest.raises(ConfigError, match="checkpoint"):
        make_encoder("clip")
    with pytest.raises(ConfigError, match="unknown encoder"):
        make_encoder("resnet")
