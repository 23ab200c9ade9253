"""Accessors for the bundled desk-scale test assets."""

from __future__ import annotations

from importlib.resources import files
from pathlib import Path

import numpy as np

from .errors import InputError
from .trainer import ImageField

PHOTO_NAMES = ("photo_blocks.png", "photo_peaks.png", "photo_cells.png")


def asset_path(name: str) -> Path:
    path = Path(str(files("inrpart").joinpath("assets", name)))
    if not path.exists():
        raise InputError(f"no bundled asset named {name!r}")
    return path


def load_photo(name: str, gray: bool = False) -> ImageField:
    from .imageio import load_png

    return load_png(asset_path(name), gray=gray)


def bundled_photos(gray: bool = False) -> list[ImageField]:
    return [load_photo(n, gray=gray) for n in PHOTO_NAMES]


def halves_image() -> ImageField:
    """8x8 oracle image: left half black, right half white."""
    return load_photo("halves.png")


def toy_label_map() -> np.ndarray:
    """Hand-written 4x4 label map with regions of areas {2, 6, 8}."""
    rows = []
    with open(asset_path("toy_label_map.txt")) as f:
        for line in f:
            line = line.strip()
            if line and not line.startswith("#"):
                rows.append([int(v) for v in line.split()])
    return np.array(rows, dtype=np.int32)


def meta_corpus() -> tuple[list[ImageField], list[ImageField]]:
    """Bundled 32x32 grayscale corpus: (64 training, 16 held-out) images."""
    from .imageio import load_png

    folder = Path(str(files("inrpart").joinpath("assets", "meta_corpus")))
    paths = sorted(folder.glob("img_*.png"))
    if len(paths) < 80:
        raise InputError(f"meta corpus incomplete: found {len(paths)} images")
    images = [load_png(p) for p in paths]
    return images[:64], images[64:80]
