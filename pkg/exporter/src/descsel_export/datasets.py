"""Image-folder scanning in the standard published layout.

    root/train/<classname>/xxx.jpg
    root/test/<classname>/yyy.jpg      ("val" is accepted for the eval split)

Class ids follow sorted directory names and display names swap
underscores for spaces. Items are ordered train block first, then by
class id, then by filename, so rescanning the same tree always yields
the identical store.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import DataError

TRAIN, TEST = 0, 1
IMG_SUFFIXES = {
    ".jpg", ".jpeg", ".png", ".bmp", ".gif", ".webp", ".ppm", ".pgm",
    ".tif", ".tiff",
}


@dataclass(frozen=True)
class DatasetItem:
    path: Path
    class_id: int
    split: int  # 0 = train, 1 = test


@dataclass
class FolderDataset:
    root: Path
    name: str
    classnames: list[str]
    items: list[DatasetItem]

    @property
    def n_classes(self) -> int:
        return len(self.classnames)


def _class_dirs(split_dir: Path) -> dict[str, Path]:
    return {
        d.name: d
        for d in split_dir.iterdir()
        if d.is_dir() and not d.name.startswith(".")
    }


def _files(class_dir: Path) -> list[Path]:
    return sorted(
        p
        for p in class_dir.iterdir()
        if p.is_file()
        and not p.name.startswith(".")
        and p.suffix.lower() in IMG_SUFFIXES
    )


def scan_dataset(root: str | Path) -> FolderDataset:
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset directory not found: {root}")
    train_dir = root / "train"
    if not train_dir.is_dir():
        raise DataError(f"missing train split directory: {train_dir}")
    test_dir = root / "test"
    if not test_dir.is_dir():
        test_dir = root / "val"
    if not test_dir.is_dir():
        raise DataError(f"missing test (or val) split directory under {root}")

    train_classes = _class_dirs(train_dir)
    test_classes = _class_dirs(test_dir)
    dirnames = sorted(set(train_classes) | set(test_classes))
    if not dirnames:
        raise DataError(f"no class directories under {root}")

    items: list[DatasetItem] = []
    no_test: list[str] = []
    for split, dirs in ((TRAIN, train_classes), (TEST, test_classes)):
        for cid, dirname in enumerate(dirnames):
            if dirname not in dirs:
                continue
            for path in _files(dirs[dirname]):
                items.append(DatasetItem(path=path, class_id=cid, split=split))
    covered = {item.class_id for item in items if item.split == TEST}
    no_test = [d for i, d in enumerate(dirnames) if i not in covered]
    if no_test:
        raise DataError(f"classes without test images: {no_test}")

    classnames = [d.replace("_", " ") for d in dirnames]
    return FolderDataset(
        root=root, name=root.resolve().name, classnames=classnames, items=items
    )
