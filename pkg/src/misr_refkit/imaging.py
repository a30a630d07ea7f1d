"""Pixel containers, translation warps and the block-average 3x decimation.

Images are plain 2-D ``float64`` numpy arrays of reflectance in [0, 1];
status maps are 2-D ``bool`` arrays where ``True`` marks a clear pixel.
Pixel centers sit at integer coordinates and a translation ``(dx, dy)``
means ``out(x, y) = in(x + dx, y + dy)``.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import DimensionMismatchError, InvalidArgumentError

INTERP_ORDER = {"nearest": 0, "bilinear": 1, "bicubic": 3}
DEFAULT_SEARCH_BOUND = 10.0


class Translation(NamedTuple):
    dx: float
    dy: float

    def __neg__(self) -> "Translation":
        return Translation(-self.dx, -self.dy)

    def scaled(self, k: float) -> "Translation":
        return Translation(self.dx * k, self.dy * k)

    def norm(self) -> float:
        return math.hypot(self.dx, self.dy)


def as_image(values, name: str = "image") -> np.ndarray:
    """Validate and return ``values`` as a finite 2-D float64 array."""
    img = np.asarray(values, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
        raise InvalidArgumentError(f"{name} must be a non-empty 2-D array, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return img


def as_mask(values, shape: tuple[int, int] | None = None, name: str = "mask") -> np.ndarray:
    m = np.asarray(values, dtype=bool)
    if m.ndim != 2:
        raise InvalidArgumentError(f"{name} must be 2-D, got shape {m.shape}")
    if shape is not None and m.shape != tuple(shape):
        raise DimensionMismatchError(f"{name} shape {m.shape} does not match image shape {tuple(shape)}")
    return m


def check_translation(t, bound: float | None = DEFAULT_SEARCH_BOUND) -> Translation:
    t = Translation(float(t[0]), float(t[1]))
    if not (math.isfinite(t.dx) and math.isfinite(t.dy)):
        raise InvalidArgumentError(f"non-finite translation {t}")
    if bound is not None and (abs(t.dx) > bound or abs(t.dy) > bound):
        raise InvalidArgumentError(f"translation {t} exceeds search bound {bound}")
    return t


def warp(
    img,
    t,
    interp: str = "bicubic",
    clamp: bool | None = None,
    bound: float | None = DEFAULT_SEARCH_BOUND,
) -> tuple[np.ndarray, np.ndarray]:
    """Translate ``img`` by ``t`` and return ``(warped, valid)``.

    ``valid`` is False where the sample position falls outside the source
    grid; those pixels hold edge-replicated values and must not be scored.
    Bicubic output is clamped to [0, 1] unless ``clamp=False``.
    """
    if interp not in INTERP_ORDER:
        raise InvalidArgumentError(f"unknown interpolation {interp!r}")
    t = check_translation(t, bound)
    img = as_image(img)
    out, valid = _kernels.translate(img, t.dx, t.dy, INTERP_ORDER[interp])
    if clamp is None:
        clamp = interp == "bicubic"
    if clamp:
        np.clip(out, 0.0, 1.0, out=out)
    return out, valid


def warp_mask(mask, t, bound: float | None = DEFAULT_SEARCH_BOUND) -> np.ndarray:
    """Nearest-neighbour warp of a status map; out-of-frame samples are obscured."""
    t = check_translation(t, bound)
    m = np.asarray(mask, dtype=bool)
    out, valid = _kernels.translate(m.astype(np.float64), t.dx, t.dy, 0)
    return (out > 0.5) & valid


def _check_divisible(shape, factor: int) -> None:
    if factor < 1:
        raise InvalidArgumentError(f"factor must be >= 1, got {factor}")
    if shape[0] % factor or shape[1] % factor:
        raise DimensionMismatchError(f"dimensions {shape} not divisible by {factor}")


def _block_mean(a: np.ndarray, factor: int) -> np.ndarray:
    h, w = a.shape
    return a.reshape(h // factor, factor, w // factor, factor).mean(axis=(1, 3))


def downsample_hr(hr, factor: int = 3) -> np.ndarray:
    """Block-average low-pass followed by decimation by ``factor``."""
    hr = as_image(hr, "hr")
    _check_divisible(hr.shape, factor)
    return _block_mean(hr, factor)


def downscale_mask(mask, factor: int = 3) -> np.ndarray:
    """Fraction of clear pixels in every ``factor x factor`` block."""
    m = as_mask(mask)
    _check_divisible(m.shape, factor)
    return _block_mean(m.astype(np.float64), factor)


def upsample_bicubic(img, factor: int) -> np.ndarray:
    """Separable Catmull-Rom upsampling by an integer factor, clamped to [0, 1].

    Output pixel ``j`` samples the input at ``(j - (factor - 1) / 2) / factor``,
    so each block of ``factor`` output pixels is centred on its source pixel.
    """
    img = as_image(img)
    if factor < 1:
        raise InvalidArgumentError(f"upscale factor must be >= 1, got {factor}")
    out = _upsample_axis(img, factor, 1)
    out = _upsample_axis(out, factor, 0)
    return np.clip(out, 0.0, 1.0)


def _upsample_axis(img: np.ndarray, factor: int, axis: int) -> np.ndarray:
    n = img.shape[axis]
    pieces = []
    for k in range(factor):
        # phase k samples source coordinate x + (k - (factor-1)/2) / factor
        off = (k - (factor - 1) / 2.0) / factor
        if axis == 1:
            pieces.append(_kernels.translate(img, off, 0.0, 3)[0])
        else:
            pieces.append(_kernels.translate(img, 0.0, off, 3)[0])
    stacked = np.stack(pieces, axis=axis + 1)
    shape = list(img.shape)
    shape[axis] = n * factor
    return stacked.reshape(shape)
