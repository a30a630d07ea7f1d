"""Masked RMSE and the corrected-clear PSNR (cPSNR) used to score SR output.

cPSNR crops a border from the target, scans every integer offset of the
SR image inside that border, removes the mean brightness difference over
clear target pixels and keeps the best PSNR.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import DimensionMismatchError, NoValidPixelsError, InvalidArgumentError
from .imaging import as_image, as_mask

CMSE_FLOOR = 1e-10
DEFAULT_BORDER = 3


def masked_rmse(a, b, mask=None) -> float:
    """Root-mean-square difference of ``a`` and ``b`` over ``mask``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shapes {a.shape} and {b.shape} differ")
    m = np.ones(a.shape, bool) if mask is None else as_mask(mask, a.shape)
    n = int(m.sum())
    if n == 0:
        raise NoValidPixelsError("mask selects no pixels")
    d = a[m] - b[m]
    return math.sqrt(float(np.dot(d, d)) / n)


@dataclass(frozen=True)
class CpsnrReport:
    scene_id: str
    cpsnr_db: float
    best_shift: tuple[int, int]
    bias_b: float
    clear_pixel_count: int


def psnr_from_mse(mse: float) -> float:
    return -10.0 * math.log10(max(mse, CMSE_FLOOR))


def cpsnr(
    sr,
    hr,
    hr_mask,
    border: int = DEFAULT_BORDER,
    scene_id: str = "",
    window: int | None = None,
) -> CpsnrReport:
    """Best bias-corrected PSNR of ``sr`` over a ``window x window`` offset search.

    With the default ``window = 2*border + 1`` the SR crop for ``(u, v)`` is
    ``sr[u:u+H-2b, v:v+W-2b]`` (``u`` indexes rows), compared with
    ``hr[b:H-b, b:W-b]``; a smaller window is centred on ``(border, border)``.
    Ties resolve to the lexicographically smallest ``(u, v)``.
    """
    sr = as_image(sr, "sr")
    hr = as_image(hr, "hr")
    if sr.shape != hr.shape:
        raise DimensionMismatchError(f"sr {sr.shape} and hr {hr.shape} differ")
    m = as_mask(hr_mask, hr.shape, "hr_mask")
    if border < 0 or 2 * border >= min(hr.shape):
        raise InvalidArgumentError(f"border {border} too large for shape {hr.shape}")
    h, w = hr.shape
    crop = hr[border:h - border, border:w - border]
    clear = m[border:h - border, border:w - border]
    full = 2 * border + 1
    window = full if window is None else int(window)
    if window < 1 or window > full or window % 2 == 0:
        raise InvalidArgumentError(f"window must be odd and in [1, {full}], got {window}")
    lo = (full - window) // 2
    view = sr[lo:h - lo, lo:w - lo]
    cmse, bias, count = _kernels.cpsnr_scan(crop, clear, view, window)
    best = None
    for u in range(window):
        for v in range(window):
            if count[u, v] == 0:
                continue
            score = psnr_from_mse(float(cmse[u, v]))
            if best is None or score > best[0]:
                best = (score, (u, v), float(bias[u, v]), int(count[u, v]))
    if best is None:
        raise NoValidPixelsError("no shift window contains clear target pixels")
    return CpsnrReport(scene_id, best[0], best[1], best[2], best[3])


@dataclass
class EvalSummary:
    reports: list[CpsnrReport] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)

    @property
    def mean_cpsnr(self) -> float | None:
        if not self.reports:
            return None
        return math.fsum(r.cpsnr_db for r in self.reports) / len(self.reports)

    def as_dict(self) -> dict:
        return {
            "mean_cpsnr": self.mean_cpsnr,
            "n_scenes": len(self.reports),
            "n_skipped": len(self.skipped),
        }


def evaluate_corpus(
    scenes: Sequence,
    sr_images: Mapping[str, np.ndarray],
    border: int = DEFAULT_BORDER,
    window: int | None = None,
) -> EvalSummary:
    """Score one SR image per scene; scenes without an SR image are skipped.

    Each scene must provide ``id``, ``hr`` and ``hr_mask``. Reports are
    ordered by scene id.
    """
    summary = EvalSummary()
    for scene in sorted(scenes, key=lambda s: s.id):
        sr = sr_images.get(scene.id)
        if sr is None or scene.hr is None:
            summary.skipped.append(scene.id)
            continue
        try:
            summary.reports.append(cpsnr(sr, scene.hr, scene.hr_mask, border, scene.id, window))
        except NoValidPixelsError:
            summary.skipped.append(scene.id)
    return summary
