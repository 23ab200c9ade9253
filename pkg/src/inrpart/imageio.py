"""PNG in/out for 8-bit gray and RGB images, mapped to [0, 1] by /255."""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import InputError
from .trainer import ImageField


def load_png(path, gray: bool = False) -> ImageField:
    """Read an 8-bit gray or RGB PNG; gray=True averages RGB channels."""
    img = Image.open(path)
    if img.mode == "L":
        arr = np.asarray(img, dtype=np.float64)[:, :, None]
    elif img.mode == "RGB":
        arr = np.asarray(img, dtype=np.float64)
    else:
        raise InputError(
            f"{path}: unsupported PNG mode {img.mode!r} (8-bit L or RGB only)")
    values = arr / 255.0
    if gray and values.shape[2] == 3:
        values = values.mean(axis=2, keepdims=True)
    return ImageField(values)


def save_png(path, field: ImageField) -> None:
    """Write [0, 1] values as 8-bit PNG; a load/save cycle of 8-bit data is
    bit-identical."""
    arr = np.round(field.values * 255.0).astype(np.uint8)
    if arr.shape[2] == 1:
        Image.fromarray(arr[:, :, 0], mode="L").save(path, format="PNG")
    else:
        Image.fromarray(arr, mode="RGB").save(path, format="PNG")
