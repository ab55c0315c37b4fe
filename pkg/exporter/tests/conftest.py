"""Shared fixtures for descsel-export tests.

The exporter talks to descsel through exactly two surfaces: the store
directory format and the `descsel` command line. Tests exercise both,
so the primary package must be installed, but it is never imported
here; bridge checks run it as a subprocess.
"""
import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

pytest.importorskip("descsel_export")

# sorted dirnames decide class ids: brown_bear=0, gray_wolf=1,
# red_fox=2, snow_hare=3
CLASSES = ["red_fox", "gray_wolf", "brown_bear", "snow_hare"]

POOL = {
    "texts": [
        "broad shoulder hump",
        "pale silver guard hairs",
        "russet coat and black leg tips",
        "seasonally white coat",
        "slender muzzle",
        "pack-hunting posture",
    ],
    "origin_class": [0, 1, 2, 3, 2, 1],
}


def write_tree(root: Path, classes=None, train=4, test=2) -> Path:
    """Class-folder dataset with distinct tiny byte files as images."""
    for split, count in (("train", train), ("test", test)):
        for name in classes or CLASSES:
            class_dir = root / split / name
            class_dir.mkdir(parents=True)
            for i in range(count):
                (class_dir / f"im{i}.png").write_bytes(
                    f"{split}/{name}/{i}".encode() * 7
                )
    return root


@pytest.fixture
def toy_tree(tmp_path):
    return write_tree(tmp_path / "toyds")


@pytest.fixture
def pool_file(tmp_path):
    path = tmp_path / "pool_in.json"
    path.write_text(json.dumps(POOL))
    return path


@pytest.fixture(scope="session")
def descsel_cli():
    """Run the descsel CLI in a subprocess and assert its exit code."""
    exe = shutil.which("descsel")

    def run(*args, expect=0):
        if exe:
            cmd = [exe, *args]
        else:  # fall back to the same entry point without the wrapper script
            cmd = [
                sys.executable,
                "-c",
                "import sys; from descsel.cli import main; "
                "sys.exit(main(sys.argv[1:]))",
                *args,
            ]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        assert proc.returncode == expect, (
            f"descsel {' '.join(map(str, args))} -> {proc.returncode}\n"
            f"{proc.stdout}{proc.stderr}"
        )
        return proc

    return run


def dir_bytes(root: Path) -> dict[str, bytes]:
    return {
        p.name: p.read_bytes() for p in sorted(root.iterdir()) if p.is_file()
    }


@pytest.fixture(scope="session")
def tree_builder():
    return write_tree


@pytest.fixture(scope="session")
def snapshot():
    return dir_bytes
