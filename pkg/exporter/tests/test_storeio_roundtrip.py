"""Store directory writer: layout, atomicity hygiene, reread."""
import numpy as np
import pytest

from descsel_export import storeio
from descsel_export.errors import DataError


def _unit(rows):
    mat = np.asarray(rows, dtype=np.float64)
    return (mat / np.linalg.norm(mat, axis=1)[:, None]).astype(np.float32)


def _tiny_args():
    # 2 classes, dim 4, one train + one test image per class
    return dict(
        name="tiny",
        classnames=["ash tree", "oak tree"],
        cls_emb=_unit([[1, 0, 0, 0], [0, 1, 0, 0]]),
        pool_texts=["deeply lobed leaves", "winged seed keys"],
        pool_origins=[1, 0],
        pool_emb=_unit([[0, 0, 1, 0], [0, 0, 0, 1]]),
        images=_unit([[1, 1, 0, 0], [1, 0, 1, 0], [0, 1, 1, 0], [0, 1, 0, 1]]),
        labels=np.array([0, 1, 0, 1], dtype=np.uint32),
        split=np.array([0, 0, 1, 1], dtype=np.uint8),
        prompt_template="a photo of a {cls}",
        extra={"encoder": "test"},
    )


def test_write_and_reread(tmp_path):
    out = storeio.write_store(tmp_path / "st", **_tiny_args())
    manifest = storeio.read_manifest(out)
    assert manifest["dataset"] == "tiny"
    assert manifest["dim"] == 4
    assert manifest["counts"] == {"classes": 2, "images": 4, "pool": 2}
    assert manifest["normalized"] is True
    assert manifest["extra"] == {"encoder": "test"}
    assert storeio.read_classnames(out) == ["ash tree", "oak tree"]
    texts, origins = storeio.read_pool(out)
    assert texts == ["deeply lobed leaves", "winged seed keys"]
    assert origins == [1, 0]


def test_rewrite_is_byte_identical(tmp_path, snapshot):
    args = _tiny_args()
    out = storeio.write_store(tmp_path / "st", **args)
    first = snapshot(out)
    storeio.write_store(tmp_path / "st", **_tiny_args())
    assert snapshot(out) == first


def test_no_temp_files_left(tmp_path):
    out = storeio.write_store(tmp_path / "st", **_tiny_args())
    assert not list(out.glob("*.tmp"))


def test_binary_bytes_are_exact(tmp_path):
    args = _tiny_args()
    out = storeio.write_store(tmp_path / "st", **args)
    raw = np.frombuffer((out / "images.f32").read_bytes(), dtype="<f4")
    assert np.array_equal(raw.reshape(4, 4), args["images"])
    labels = np.frombuffer((out / "labels.u32le").read_bytes(), dtype="<u4")
    assert labels.tolist() == [0, 1, 0, 1]
    split = np.frombuffer((out / "split.u8").read_bytes(), dtype="u1")
    assert split.tolist() == [0, 0, 1, 1]


def test_validates_against_primary(tmp_path, descsel_cli):
    out = storeio.write_store(tmp_path / "st", **_tiny_args())
    descsel_cli("validate", "--store", str(out))


@pytest.mark.parametrize(
    "mutate, match",
    [
        (lambda a: a.update(classnames=["only one"]), "cls_emb rows"),
        (lambda a: a.update(pool_texts=["just one"]), "pool_emb rows"),
        (
            lambda a: a.update(labels=np.array([0], dtype=np.uint32)),
            "labels/split",
        ),
        (lambda a: a.update(pool_origins=[0]), "origin_class length"),
        (
            lambda a: a.update(pool_emb=_unit([[1, 0], [0, 1]])),
            "does not match dim",
        ),
    ],
)
def test_incoherent_inputs_rejected(tmp_path, mutate, match):
    args = _tiny_args()
    mutate(args)
    with pytest.raises(DataError, match=match):
        storeio.write_store(tmp_path / "st", **args)


def test_read_manifest_errors(tmp_path):
    with pytest.raises(DataError, match="missing file"):
        storeio.read_manifest(tmp_path)
    out = storeio.write_store(tmp_path / "st", **_tiny_args())
    manifest = storeio.read_manifest(out)
    manifest["schema_version"] = 9
    storeio.write_json(out / "manifest.json", manifest)
    with pytest.raises(DataError, match="schema_version"):
        storeio.read_manifest(out)
    manifest["schema_version"] = 1
    manifest["dtype"] = "f64be"
    storeio.write_json(out / "manifest.json", manifest)
    with pytest.raises(DataError, match="dtype"):
        storeio.read_manifest(out)


def test_write_pairs_updates_manifest(tmp_path):
    out = storeio.write_store(tmp_path / "st", **_tiny_args())
    keys = [(0, 0), (1, 1)]
    rows = _unit([[1, 0, 0, 1], [0, 1, 1, 0]])
    storeio.write_pairs(out, keys, rows, "a photo of a {cls}, {desc}")
    manifest = storeio.read_manifest(out)
    assert manifest["counts"]["pairs"] == 2
    assert manifest["extra"]["pair_template"] == "a photo of a {cls}, {desc}"
    idx = np.frombuffer((out / "pairs.idx").read_bytes(), dtype="<u4")
    assert idx.tolist() == [0, 0, 1, 1]


def test_write_pairs_shape_errors(tmp_path):
    out = storeio.write_store(tmp_path / "st", **_tiny_args())
    with pytest.raises(DataError, match="does not match store dim"):
        storeio.write_pairs(out, [(0, 0)], _unit([[1, 0]]), "t {cls} {desc}")
    with pytest.raises(DataError, match="rows do not match key count"):
        storeio.write_pairs(
            out, [(0, 0), (1, 1)], _unit([[1, 0, 0, 1]]), "t {cls} {desc}"
        )
