"""Reference-anchored classical super-resolution baselines.

``shift_and_add`` starts from the bicubic upsampling of the reference and
adds, at every fine-grid cell, the weighted mean residual of the LR samples
that land nearby once registered to the reference. Residuals are measured
against the reference itself, so the output stays anchored to the
reference's content: samples that disagree with it (temporal change) are
down-weighted, and a view with a global brightness offset is re-levelled
before it contributes.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InvalidArgumentError, RefkitError
from .imaging import as_image, upsample_bicubic, warp_mask
from .reference import ReferenceDecision, Scene, select_reference
from .registration import RegistrationConfig, estimate_translation

log = logging.getLogger(__name__)

REF_METHODS = ("similarity", "clearance", "median", "heuristic", "fixed")
_FIXED_RE = re.compile(r"^fixed[:(](\d+)\)?$")


@dataclass(frozen=True)
class SrConfig:
    upscale: int = 3
    ref_method: str = "similarity"
    fixed_index: int | None = None
    fill: str = "bicubic-ref"
    accumulator_sigma: float = 0.5
    accumulator_radius: float = 1.5
    consistency_sigma: float | None = 0.02
    outlier_factor: float = 3.0
    registration: RegistrationConfig = field(default_factory=RegistrationConfig)

    def __post_init__(self):
        if self.upscale < 2:
            raise InvalidArgumentError("upscale must be >= 2")
        if self.ref_method not in REF_METHODS:
            raise InvalidArgumentError(f"unknown reference method {self.ref_method!r}")
        if self.ref_method == "fixed" and (self.fixed_index is None or self.fixed_index < 0):
            raise InvalidArgumentError("fixed reference needs a non-negative fixed_index")
        if self.fill not in ("bicubic-ref", "nearest"):
            raise InvalidArgumentError(f"unknown fill {self.fill!r}")

    @classmethod
    def from_method(cls, method: str, **kwargs) -> "SrConfig":
        """Build a config from ``similarity``, ``median``, ``fixed:3``, ``fixed(3)``, ..."""
        m = _FIXED_RE.match(method)
        if m:
            return cls(ref_method="fixed", fixed_index=int(m.group(1)), **kwargs)
        return cls(ref_method=method, **kwargs)


@dataclass
class SrResult:
    image: np.ndarray
    reference_index: int
    reference_method: str
    used_views: list[int]
    dropped_views: list[int]
    fallback: bool = False
    warnings: list[str] = field(default_factory=list)


def bicubic_sisr(view, upscale: int = 3) -> np.ndarray:
    """Single-image control arm: bicubic upsampling clamped to [0, 1]."""
    if upscale < 2:
        raise InvalidArgumentError("upscale must be >= 2")
    return upsample_bicubic(as_image(view, "view"), upscale)


def _nearest_up(img: np.ndarray, f: int) -> np.ndarray:
    return np.repeat(np.repeat(img, f, axis=0), f, axis=1)


def resolve_reference(scene: Scene, cfg: SrConfig, decision: ReferenceDecision | None = None):
    """Return ``(ref_image, ref_mask, ref_index, decision)`` for ``cfg.ref_method``."""
    if cfg.ref_method == "fixed":
        if cfg.fixed_index >= scene.n_views:
            raise InvalidArgumentError(f"fixed index {cfg.fixed_index} out of range for {scene.n_views} views")
        i = cfg.fixed_index
        return scene.lrs[i], scene.masks[i], i, None
    if decision is None:
        decision = select_reference(scene, cfg.ref_method)
    if decision.composite is not None:
        return decision.composite, decision.extra["composite_mask"], decision.chosen, decision
    i = decision.chosen
    return scene.lrs[i], scene.masks[i], i, decision


def shift_and_add(scene: Scene, cfg: SrConfig | None = None, decision: ReferenceDecision | None = None) -> SrResult:
    cfg = cfg or SrConfig()
    ref_img, ref_mask, ref_index, _ = resolve_reference(scene, cfg, decision)
    f = cfg.upscale
    base = bicubic_sisr(ref_img, f) if cfg.fill == "bicubic-ref" else _nearest_up(ref_img, f)
    is_composite = cfg.ref_method == "median"

    regs: dict[int, object] = {}
    failures = []
    for i in range(scene.n_views):
        if i == ref_index and not is_composite:
            regs[i] = None  # the anchor registers onto itself at zero shift
            continue
        try:
            regs[i] = estimate_translation(scene.lrs[i], ref_img, scene.masks[i], cfg.registration,
                                           fixed_mask=ref_mask)
        except RefkitError as exc:
            failures.append(i)
            log.debug("view %d of %s not registered: %s", i, scene.id, exc)

    residuals = [r.residual_rmse for r in regs.values() if r is not None]
    dropped = list(failures)
    if residuals:
        limit = cfg.outlier_factor * float(np.median(residuals))
        for i, r in list(regs.items()):
            if r is not None and r.residual_rmse > limit:
                dropped.append(i)
                del regs[i]

    result = SrResult(base, ref_index, cfg.ref_method, sorted(regs), sorted(dropped))
    if not any(r is not None for r in regs.values()):
        result.fallback = True
        result.warnings.append("no view registered; output is the reference upsampled")
        return result

    h, w = ref_img.shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    px, py, vals, wts = [], [], [], []
    for i in sorted(regs):
        r = regs[i]
        dx, dy = (0.0, 0.0) if r is None else (r.t.dx, r.t.dy)
        pred, valid = _kernels.translate(ref_img, dx, dy, 3)
        usable = valid & scene.masks[i]
        if not usable.any():
            continue
        res = scene.lrs[i] - pred
        ref_clear = warp_mask(ref_mask, (dx, dy), bound=None)
        anchor = usable & ref_clear
        if anchor.any():
            res = res - float(np.median(res[anchor]))
        weight = np.ones_like(res)
        if cfg.consistency_sigma:
            c = np.exp(-(res * res) / (2.0 * cfg.consistency_sigma ** 2))
            weight = np.where(ref_clear, c, 1.0)
        px.append(f * (xs[usable] + dx) + (f - 1) / 2.0)
        py.append(f * (ys[usable] + dy) + (f - 1) / 2.0)
        vals.append(res[usable])
        wts.append(weight[usable])

    if not px:
        result.fallback = True
        result.warnings.append("no clear samples; output is the reference upsampled")
        return result
    acc_w, acc_v = _kernels.splat(np.concatenate(px), np.concatenate(py), np.concatenate(vals),
                                  np.concatenate(wts), h * f, w * f,
                                  cfg.accumulator_sigma, cfg.accumulator_radius)
    covered = acc_w > 1e-12
    correction = np.zeros_like(base)
    correction[covered] = acc_v[covered] / acc_w[covered]
    result.image = np.clip(base + correction, 0.0, 1.0)
    return result
