"""Image ingestion: 8/16-bit single-channel PNG and PGM, green-channel reduction."""

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import IngestionError


def load_gray(path):
    """Load an image file as float64 in [0, 1].

    Multi-channel inputs are reduced to their green channel; integer dtypes
    scale by their nominal maximum (255 or 65535).
    """
    try:
        with Image.open(path) as img:
            arr = np.asarray(img)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise IngestionError(f"cannot read image {path}: {exc}") from exc
    if arr.ndim == 3:
        arr = arr[:, :, 1]
    arr = arr.astype(np.float64)
    if arr.size == 0:
        raise IngestionError(f"empty image {path}")
    peak = arr.max()
    if peak <= 255:
        arr /= 255.0
    elif peak <= 65535:
        arr /= 65535.0
    else:
        raise IngestionError(f"unsupported intensity range in {path}")
    return np.clip(arr, 0.0, 1.0)


def save_gray(path, arr):
    """Write a [0, 1] float array as an 8-bit grayscale PNG/PGM."""
    data = np.clip(np.asarray(arr, dtype=np.float64), 0.0, 1.0)
    Image.fromarray((data * 255.0 + 0.5).astype(np.uint8)).save(path)


def image_bytes(arr):
    """Canonical bytes of a [0, 1] image for content hashing."""
    return np.ascontiguousarray(np.asarray(arr, dtype="<f4")).tobytes()
