"""PNG raster I/O: images as float arrays in [0, 1], masks as booleans."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ValidationError


def load_image(path) -> np.ndarray:
    """Decode a PNG into float64 [0, 1]; (H, W) grayscale or (H, W, 3) RGB."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            if img.mode in ("1", "L", "I", "I;16", "F"):
                img = img.convert("L")
                arr = np.asarray(img, dtype=np.float64) / 255.0
            else:
                img = img.convert("RGB")
                arr = np.asarray(img, dtype=np.float64) / 255.0
    except FileNotFoundError:
        raise ValidationError("image not found", path=path) from None
    except OSError as e:
        raise ValidationError(f"cannot decode image: {e}", path=path) from None
    return arr


def save_image(arr: np.ndarray, path) -> None:
    """Encode a [0, 1] float array as an 8-bit PNG."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim not in (2, 3):
        raise ValidationError(f"image array must be 2-D or 3-D, got shape {arr.shape}")
    data = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    mode = "L" if arr.ndim == 2 else "RGB"
    Image.fromarray(data, mode=mode).save(Path(path), format="PNG")


def load_mask(path) -> np.ndarray:
    """Decode a segmentation mask PNG: nonzero pixels mark the object."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("L"))
    except FileNotFoundError:
        raise ValidationError("mask not found", path=path) from None
    except OSError as e:
        raise ValidationError(f"cannot decode mask: {e}", path=path) from None
    return arr > 0


def save_mask(mask: np.ndarray, path) -> None:
    data = np.where(np.asarray(mask), 255, 0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(Path(path), format="PNG")
