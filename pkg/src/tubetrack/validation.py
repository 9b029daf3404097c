"""Input validation helpers shared by the functional API and the estimator."""

import numpy as np

from .errors import ConfigurationError, DimensionError, InputError

MIN_IMAGE_SIDE = 16


def check_gray_image(image, normalize=False):
    """Validate a 2-D grayscale image and return it as float64 in [0, 1].

    Parameters
    ----------
    image : array_like
        2-D scalar field.
    normalize : bool
        If True, rescale min..max to [0, 1] (a constant image maps to 0).
        If False, values must already lie in [0, 1].
    """
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D image, got shape {arr.shape}")
    if arr.shape[0] < MIN_IMAGE_SIDE or arr.shape[1] < MIN_IMAGE_SIDE:
        raise DimensionError(
            f"image {arr.shape[1]}x{arr.shape[0]} is smaller than the minimum "
            f"{MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE} filter support"
        )
    if not np.all(np.isfinite(arr)):
        raise InputError("image contains non-finite pixel values")
    if normalize:
        lo, hi = arr.min(), arr.max()
        arr = (arr - lo) / (hi - lo) if hi > lo else np.zeros_like(arr)
    elif arr.min() < 0.0 or arr.max() > 1.0:
        raise InputError(
            f"image values must lie in [0, 1], got [{arr.min():.4g}, {arr.max():.4g}]"
        )
    return arr


def check_positive(name, value):
    value = float(value)
    if not value > 0:
        raise ConfigurationError(f"{name} must be > 0, got {value}")
    return value


def check_in_range(name, value, lo, hi, include_lo=False, include_hi=True):
    value = float(value)
    ok_lo = value >= lo if include_lo else value > lo
    ok_hi = value <= hi if include_hi else value < hi
    if not (ok_lo and ok_hi):
        raise ConfigurationError(f"{name}={value} outside required range ({lo}, {hi})")
    return value


def check_n_theta(n_theta):
    n_theta = int(n_theta)
    if n_theta < 8 or n_theta % 2 != 0:
        raise ConfigurationError(f"n_theta must be even and >= 8, got {n_theta}")
    return n_theta


def check_radii(radii):
    radii = [float(r) for r in radii]
    if not radii:
        raise ConfigurationError("radii must be a nonempty list")
    if any(r < 1.0 for r in radii):
        raise ConfigurationError("each radius must be >= 1 pixel")
    return radii


def check_seeds(seeds, shape, minimum=2):
    """Validate seed pixel coordinates (x, y) against an image shape."""
    pts = [(float(x), float(y)) for x, y in seeds]
    if len(pts) < minimum:
        raise InputError(f"need at least {minimum} seed points, got {len(pts)}")
    h, w = shape
    for x, y in pts:
        if not (0 <= x < w and 0 <= y < h):
            raise InputError(f"seed ({x:.1f}, {y:.1f}) outside {w}x{h} image")
    return pts
