"""Tubularity features from oriented-flux filtering.

The feature pipeline turns a grayscale image with dark tubular structures
into (1) a per-pixel vessel score and optimal radius, (2) per-(pixel, angle)
orientation scores, and (3) the exponential data cost used by the lifted
geodesic metrics. The filter response at radius r is the image convolved
with the Hessian of a Gaussian and a disk indicator, giving a symmetric
2x2 tensor per pixel whose eigenstructure encodes tube strength and
direction.
"""

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.signal import fftconvolve

from .errors import ConfigurationError, DimensionError, InputError
from .validation import check_gray_image, check_n_theta, check_positive, check_radii

GAUSS_TRUNCATE = 4.0

TFF_MAGIC = b"TFF1"


@dataclass
class OOFResponse:
    """Oriented-flux tensors per radius: ``tensors[k]`` holds (xx, xy, yy)
    response planes for ``radii[k]``, each of shape (H, W)."""

    sigma: float
    radii: list
    tensors: np.ndarray  # (n_radii, 3, H, W)

    @property
    def shape(self):
        return self.tensors.shape[2:]


@dataclass
class TubularFeatureField:
    """Vessel score, optimal radius, orientation scores and data cost."""

    zeta: np.ndarray      # (H, W)  nonnegative vessel score
    rho: np.ndarray       # (H, W)  optimal radius in [r_min, r_max]
    psi_os: np.ndarray    # (H, W, n_theta)  orientation scores in [0, 1]
    cost: np.ndarray      # (H, W, n_theta)  exp(-alpha * psi_os), in (0, 1]
    n_theta: int
    params: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.zeta.shape


def hessian_of_gaussian_kernels(sigma):
    """Return (Gxx, Gxy, Gyy) sampled on a (2h+1)^2 grid, h = ceil(4 sigma)."""
    sigma = check_positive("sigma", sigma)
    h = int(np.ceil(GAUSS_TRUNCATE * sigma))
    yy, xx = np.mgrid[-h : h + 1, -h : h + 1].astype(np.float64)
    g = np.exp(-(xx**2 + yy**2) / (2.0 * sigma**2)) / (2.0 * np.pi * sigma**2)
    gxx = g * (xx**2 - sigma**2) / sigma**4
    gxy = g * xx * yy / sigma**4
    gyy = g * (yy**2 - sigma**2) / sigma**4
    # truncation leaves a small DC offset; remove it so constant images
    # produce an exactly vanishing response
    gxx -= gxx.mean()
    gyy -= gyy.mean()
    return gxx, gxy, gyy


def disk_indicator(radius):
    """Binary disk: pixel centers with ||x|| <= radius count as 1."""
    r_int = int(np.ceil(radius))
    yy, xx = np.mgrid[-r_int : r_int + 1, -r_int : r_int + 1].astype(np.float64)
    return (xx**2 + yy**2 <= radius**2 + 1e-12).astype(np.float64)


def _combined_kernels(sigma, radius):
    """Hessian-of-Gaussian kernels convolved with the disk of ``radius``."""
    disk = disk_indicator(radius)
    return [fftconvolve(k, disk, mode="full") for k in hessian_of_gaussian_kernels(sigma)]


def _convolve_reflect_fft(image, kernel):
    """True convolution with reflective boundary handling, via FFT."""
    kh, kw = kernel.shape
    py, px = kh // 2, kw // 2
    padded = np.pad(image, ((py, py), (px, px)), mode="reflect")
    full = fftconvolve(padded, kernel, mode="same")
    return full[py : py + image.shape[0], px : px + image.shape[1]]


def compute_oof(image, sigma, radii, method="fft"):
    """Oriented-flux filter response over a set of radii.

    For each radius r the response is the image convolved (reflective
    boundaries) with the Hessian of a Gaussian of scale ``sigma`` and the
    disk indicator of radius r, i.e. the flux tensor of the smoothed image
    gradient through the circle of radius r.

    Parameters
    ----------
    image : (H, W) array in [0, 1]
    sigma : float
        Gaussian smoothing scale, > 0.
    radii : sequence of float
        Disk radii, each >= 1 pixel.
    method : {'fft', 'direct'}
        'direct' uses plain spatial-domain convolution; kept as a slow
        reference path for validation.

    Returns
    -------
    OOFResponse
    """
    image = check_gray_image(image)
    sigma = check_positive("sigma", sigma)
    radii = check_radii(radii)
    if method not in ("fft", "direct"):
        raise ConfigurationError(f"unknown convolution method {method!r}")

    h, w = image.shape
    max_half = int(np.ceil(GAUSS_TRUNCATE * sigma)) + int(np.ceil(max(radii)))
    if max_half >= min(h, w):
        raise DimensionError(
            f"filter half-support {max_half} exceeds image sides {w}x{h}"
        )

    tensors = np.empty((len(radii), 3, h, w), dtype=np.float64)
    for k, r in enumerate(radii):
        for c, kernel in enumerate(_combined_kernels(sigma, r)):
            if method == "fft":
                tensors[k, c] = _convolve_reflect_fft(image, kernel)
            else:
                # np.pad 'reflect' mirrors across the edge pixel, which is
                # ndimage's 'mirror' mode
                tensors[k, c] = ndimage.convolve(image, kernel, mode="mirror")
    return OOFResponse(sigma=sigma, radii=radii, tensors=tensors)


def eigen_symmetric_2x2(a, b, c):
    """Eigen-decomposition of symmetric [[a, b], [b, c]] fields.

    Returns (lam1, lam2, v1x, v1y, v2x, v2y) with lam1 <= lam2 and unit
    eigenvectors. Near-zero off-diagonals (|b| < 1e-12) fall back to
    axis-aligned eigenvectors.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    half_tr = 0.5 * (a + c)
    disc = np.sqrt((0.5 * (a - c)) ** 2 + b**2)
    lam1 = half_tr - disc
    lam2 = half_tr + disc

    # analytic eigenvector of lam2 from the off-diagonal branch
    v2x = np.where(np.abs(b) >= 1e-12, b, np.where(a >= c, 1.0, 0.0))
    v2y = np.where(np.abs(b) >= 1e-12, lam2 - a, np.where(a >= c, 0.0, 1.0))
    norm = np.hypot(v2x, v2y)
    norm = np.where(norm == 0, 1.0, norm)
    v2x, v2y = v2x / norm, v2y / norm
    # the other eigenvector is the perpendicular
    v1x, v1y = -v2y, v2x
    return lam1, lam2, v1x, v1y, v2x, v2y


def vesselness_and_scale(oof):
    """Vessel score and optimal radius from an oriented-flux response.

    The score at a pixel is the largest radius-normalized tube response
    max_r lambda_max(x, r) / r clamped at zero; the optimal radius is the
    argmax (first index wins ties). For the assumed dark-on-bright polarity
    the cross-tube eigenvalue of the flux tensor is positive, so the
    largest eigenvalue carries the tube strength and the smallest one's
    eigenvector carries the tube direction.
    """
    n_r = len(oof.radii)
    h, w = oof.shape
    responses = np.empty((n_r, h, w), dtype=np.float64)
    for k in range(n_r):
        a, b, c = oof.tensors[k]
        _, lam2, *_ = eigen_symmetric_2x2(a, b, c)
        responses[k] = lam2 / oof.radii[k]
    best = np.argmax(responses, axis=0)
    zeta = np.maximum(np.take_along_axis(responses, best[None], axis=0)[0], 0.0)
    rho = np.asarray(oof.radii, dtype=np.float64)[best]
    return zeta, rho


def orientation_scores(oof, rho, n_theta):
    """Per-(pixel, angle) tube score at each pixel's optimal radius.

    ``psi[y, x, k]`` is the flux tensor quadratic form along the normal of
    theta_k = 2 pi k / n_theta, clamped at zero and globally normalized to
    [0, 1]. A blank response stays identically zero. The scores satisfy
    psi(theta) == psi(theta + pi) exactly.
    """
    n_theta = check_n_theta(n_theta)
    h, w = oof.shape
    radii = np.asarray(oof.radii, dtype=np.float64)
    ridx = np.searchsorted(radii, np.asarray(rho, dtype=np.float64))
    ridx = np.clip(ridx, 0, len(radii) - 1)

    # gather the tensor at the per-pixel optimal radius
    iy, ix = np.mgrid[0:h, 0:w]
    a = oof.tensors[ridx, 0, iy, ix]
    b = oof.tensors[ridx, 1, iy, ix]
    c = oof.tensors[ridx, 2, iy, ix]

    # the quadratic form is pi-periodic, so evaluate half a turn and tile;
    # tiling keeps psi(theta) == psi(theta + pi) bit-exact
    half = n_theta // 2
    thetas = 2.0 * np.pi * np.arange(half) / n_theta
    # normal of theta is (-sin t, cos t); quadratic form in the tensor
    sin_t, cos_t = np.sin(thetas), np.cos(thetas)
    psi = (
        a[..., None] * sin_t**2
        - 2.0 * b[..., None] * sin_t * cos_t
        + c[..., None] * cos_t**2
    )
    np.maximum(psi, 0.0, out=psi)
    psi = np.concatenate([psi, psi], axis=2)
    peak = psi.max()
    # float dust from the zero-sum kernels is not signal; a blank response
    # stays exactly zero instead of being amplified by normalization
    if peak > 1e-12:
        psi /= peak
    else:
        psi[:] = 0.0
    return psi


def cost_function(psi_os, alpha):
    """Exponential data cost exp(-alpha * psi); strictly positive, <= 1."""
    alpha = check_positive("alpha", alpha)
    psi_os = np.asarray(psi_os, dtype=np.float64)
    if psi_os.min() < 0 or psi_os.max() > 1 + 1e-12:
        raise InputError("psi_os must be normalized to [0, 1]")
    return np.exp(-alpha * psi_os)


def compute_features(image, sigma=1.5, r_min=1, r_max=8, n_theta=60, alpha=5.0,
                     invert=False, method="fft"):
    """Run the full feature pipeline on one image.

    ``invert=True`` negates the image first, for structures brighter than
    their background (the filtering itself assumes dark structures).
    Radii are sampled at integer steps from r_min to r_max.
    """
    image = check_gray_image(image)
    if invert:
        image = 1.0 - image
    if r_min > r_max:
        raise ConfigurationError(f"r_min={r_min} must be <= r_max={r_max}")
    radii = list(range(int(r_min), int(r_max) + 1))
    oof = compute_oof(image, sigma, radii, method=method)
    zeta, rho = vesselness_and_scale(oof)
    psi = orientation_scores(oof, rho, n_theta)
    cost = cost_function(psi, alpha)
    return TubularFeatureField(
        zeta=zeta, rho=rho, psi_os=psi, cost=cost, n_theta=int(n_theta),
        params={"sigma": sigma, "r_min": int(r_min), "r_max": int(r_max),
                "n_theta": int(n_theta), "alpha": alpha, "invert": bool(invert)},
    )


# --- flat binary container (magic "TFF1") ------------------------------

def save_features(path, features):
    """Write a feature field to the little-endian 'TFF1' container."""
    h, w = features.shape
    with open(path, "wb") as fh:
        fh.write(TFF_MAGIC)
        fh.write(struct.pack("<III", h, w, features.n_theta))
        for arr in (features.zeta, features.rho, features.psi_os, features.cost):
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_features(path):
    """Read a feature field written by :func:`save_features`."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != TFF_MAGIC:
            raise InputError(f"bad feature container magic {magic!r}")
        h, w, n_theta = struct.unpack("<III", fh.read(12))
        plane = h * w

        def read(n):
            data = np.frombuffer(fh.read(4 * n), dtype="<f4")
            if data.size != n:
                raise InputError("truncated feature container")
            return data.astype(np.float64)

        zeta = read(plane).reshape(h, w)
        rho = read(plane).reshape(h, w)
        psi = read(plane * n_theta).reshape(h, w, n_theta)
        cost = read(plane * n_theta).reshape(h, w, n_theta)
    return TubularFeatureField(zeta=zeta, rho=rho, psi_os=psi, cost=cost,
                               n_theta=int(n_theta))
