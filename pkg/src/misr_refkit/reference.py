"""Choosing the reference LR view of a scene.

Four strategies are provided:

* ``similarity`` aligns each view to the block-averaged HR target and keeps
  the one with the lowest masked RMSE (needs the HR image);
* ``heuristic`` scores views from status maps and medians only
  (needs the HR status map, not its pixels);
* ``clearance`` takes the view with the most clear pixels;
* ``median`` builds a per-pixel median of the nine clearest views.

Every argmin/argmax breaks ties towards the lower view index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidArgumentError,
    NoValidViewError,
    PreconditionError,
    RefkitError,
    SceneValidationError,
)
from .imaging import downsample_hr, downscale_mask, warp, warp_mask
from .metrics import masked_rmse
from .registration import RegistrationConfig, estimate_translation

BANDS = ("NIR", "RED")
METHODS = ("similarity", "clearance", "median", "heuristic")
LR_MIN_CLEARANCE = 0.60
HR_MIN_CLEARANCE = 0.75
MIN_VIEWS, MAX_VIEWS = 9, 35
MEDIAN_VIEWS = 9


@dataclass
class Scene:
    """One site: a stack of LR views with status maps and an optional HR target.

    ``lrs`` is ``(n_views, h, w)`` float64, ``masks`` the matching bool stack.
    """

    id: str
    band: str
    lrs: np.ndarray
    masks: np.ndarray
    hr: np.ndarray | None = None
    hr_mask: np.ndarray | None = None
    true_ref: int | None = None

    def __post_init__(self):
        self.lrs = np.asarray(self.lrs, dtype=np.float64)
        self.masks = np.asarray(self.masks, dtype=bool)
        if self.lrs.ndim != 3 or self.lrs.shape[0] < 1:
            raise InvalidArgumentError(f"scene {self.id}: lrs must be (n, h, w) with n >= 1")
        if self.masks.shape != self.lrs.shape:
            raise DimensionMismatchError(f"scene {self.id}: masks {self.masks.shape} != lrs {self.lrs.shape}")
        if self.hr is not None:
            self.hr = np.asarray(self.hr, dtype=np.float64)
            if self.hr_mask is None:
                self.hr_mask = np.ones(self.hr.shape, bool)
        if self.hr_mask is not None:
            self.hr_mask = np.asarray(self.hr_mask, dtype=bool)
            if self.hr is not None and self.hr_mask.shape != self.hr.shape:
                raise DimensionMismatchError(f"scene {self.id}: HR mask shape differs from HR")

    @property
    def n_views(self) -> int:
        return self.lrs.shape[0]

    @property
    def views(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(self.lrs[i], self.masks[i]) for i in range(self.n_views)]

    def validate(self, check_view_count: bool = True) -> None:
        """Enforce the dataset curation rules; raises ``SceneValidationError``."""
        if check_view_count and not MIN_VIEWS <= self.n_views <= MAX_VIEWS:
            raise SceneValidationError(
                f"scene {self.id}: {self.n_views} views outside [{MIN_VIEWS}, {MAX_VIEWS}]"
            )
        for i, m in enumerate(self.masks):
            c = clearance_fraction(m)
            if c < LR_MIN_CLEARANCE:
                raise SceneValidationError(f"scene {self.id}: QM{i:03d} clearance {c:.4f} < {LR_MIN_CLEARANCE}")
        if self.hr_mask is not None:
            c = clearance_fraction(self.hr_mask)
            if c < HR_MIN_CLEARANCE:
                raise SceneValidationError(f"scene {self.id}: SM clearance {c:.4f} < {HR_MIN_CLEARANCE}")
        if not np.all(np.isfinite(self.lrs)):
            raise SceneValidationError(f"scene {self.id}: non-finite LR values")


@dataclass(frozen=True)
class HeuristicWeights:
    alpha: float = 0.1
    beta: float = 0.3

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise InvalidArgumentError("heuristic weights must be finite")


@dataclass
class ReferenceDecision:
    scene_id: str
    method: str
    chosen: int
    scores: list[float]
    composite: np.ndarray | None = None
    band: str = ""
    extra: dict = field(default_factory=dict)


def clearance_sum(m) -> int:
    return int(np.count_nonzero(m))


def clearance_fraction(m) -> float:
    m = np.asarray(m, dtype=bool)
    if m.size == 0:
        return 0.0
    return clearance_sum(m) / m.size


def _argmin(scores: Sequence[float]) -> int:
    # np.argmin returns the first minimum, which is the documented tie-break
    return int(np.argmin(np.asarray(scores, dtype=np.float64)))


def find_true_reference(
    scene: Scene,
    cfg: RegistrationConfig | None = None,
    *,
    factor: int = 3,
    remove_bias: bool = False,
    mask_threshold: float = 0.5,
) -> ReferenceDecision:
    """Pick the view most similar to the block-averaged HR target.

    Each view is registered onto ``downsample_hr(hr)`` and scored by masked
    RMSE over pixels that are clear in the view, inside the warp, and clear
    in the downscaled HR status map (block fraction ``>= mask_threshold``).
    With ``remove_bias`` the mean difference is subtracted before scoring.
    """
    if scene.hr is None:
        raise PreconditionError(f"scene {scene.id}: similarity reference needs the HR image")
    target = downsample_hr(scene.hr, factor)
    target_mask = downscale_mask(scene.hr_mask, factor) >= mask_threshold
    if target.shape != scene.lrs.shape[1:]:
        raise DimensionMismatchError(
            f"scene {scene.id}: downsampled HR {target.shape} != LR {scene.lrs.shape[1:]}"
        )
    scores = []
    shifts = []
    for img, m in scene.views:
        try:
            res = estimate_translation(img, target, m, cfg, fixed_mask=target_mask)
            aligned, valid = warp(img, -res.t)
            usable = valid & warp_mask(m, -res.t) & target_mask
            if remove_bias:
                d = target[usable] - aligned[usable]
                aligned = aligned + (d.mean() if d.size else 0.0)
            scores.append(masked_rmse(aligned, target, usable))
            shifts.append((res.t.dx, res.t.dy))
        except RefkitError:
            scores.append(math.inf)
            shifts.append((math.nan, math.nan))
    if all(math.isinf(s) for s in scores):
        raise NoValidViewError(f"scene {scene.id}: no view could be aligned to the HR target")
    return ReferenceDecision(scene.id, "similarity", _argmin(scores), scores, band=scene.band,
                             extra={"shifts": shifts})


def heuristic_reference(
    scene: Scene,
    w: HeuristicWeights | None = None,
    *,
    factor: int = 3,
    raw_terms: bool = False,
    clearance_sign: float = 1.0,
    median_mode: str = "pooled",
    clear_only: bool = False,
) -> ReferenceDecision:
    """Score views from status maps and medians; the lowest score wins.

    score_i = L1(mask_i, downscale(HR mask))
              + alpha * |median(view_i) - median(all views)|
              + sign * beta * clearance(view_i)

    The L1 and clearance terms are divided by the pixel count unless
    ``raw_terms``. ``median_mode="per_view"`` replaces the pooled median by
    the median of per-view medians; ``clear_only`` restricts medians to
    clear pixels. HR pixel values are never read.
    """
    w = w or HeuristicWeights()
    if scene.hr_mask is None:
        raise PreconditionError(f"scene {scene.id}: heuristic reference needs the HR status map")
    if median_mode not in ("pooled", "per_view"):
        raise InvalidArgumentError(f"unknown median mode {median_mode!r}")
    target = downscale_mask(scene.hr_mask, factor)
    if target.shape != scene.lrs.shape[1:]:
        raise DimensionMismatchError(f"scene {scene.id}: downscaled HR mask {target.shape} != LR shape")
    npx = target.size
    norm = 1.0 if raw_terms else float(npx)

    def med(i):
        v = scene.lrs[i][scene.masks[i]] if clear_only else scene.lrs[i]
        return float(np.median(v)) if v.size else 0.0

    medians = [med(i) for i in range(scene.n_views)]
    if median_mode == "pooled":
        pool = scene.lrs[scene.masks] if clear_only else scene.lrs
        pooled = float(np.median(pool)) if pool.size else 0.0
    else:
        pooled = float(np.median(medians))

    scores = []
    for i in range(scene.n_views):
        l1 = float(np.abs(scene.masks[i].astype(np.float64) - target).sum()) / norm
        clr = clearance_sum(scene.masks[i]) / norm
        scores.append(l1 + w.alpha * abs(medians[i] - pooled) + clearance_sign * w.beta * clr)
    return ReferenceDecision(scene.id, "heuristic", _argmin(scores), scores, band=scene.band)


def clearance_reference(scene: Scene) -> ReferenceDecision:
    fractions = [clearance_fraction(m) for m in scene.masks]
    # argmin over negated clearance keeps the lower-index tie-break
    scores = [-f for f in fractions]
    return ReferenceDecision(scene.id, "clearance", _argmin(scores), scores, band=scene.band)


def clearest_views(scene: Scene, k: int = MEDIAN_VIEWS) -> list[int]:
    fractions = np.array([clearance_fraction(m) for m in scene.masks])
    order = np.argsort(-fractions, kind="stable")
    return [int(i) for i in order[:k]]


def median_reference(scene: Scene, k: int = MEDIAN_VIEWS) -> ReferenceDecision:
    """Per-pixel median of the ``k`` clearest views.

    ``chosen`` is the clearest contributing view; the composite's status map
    (clear where most contributors are clear) is stored in ``extra``.
    """
    idx = clearest_views(scene, k)
    composite = np.median(scene.lrs[idx], axis=0)
    comp_mask = scene.masks[idx].mean(axis=0) >= 0.5
    scores = [-clearance_fraction(m) for m in scene.masks]
    return ReferenceDecision(
        scene.id, "median", idx[0], scores, composite=composite, band=scene.band,
        extra={"members": idx, "composite_mask": comp_mask},
    )


def select_reference(scene: Scene, method: str, **kwargs) -> ReferenceDecision:
    """Dispatch on ``method`` (one of :data:`METHODS`)."""
    if method == "similarity":
        return find_true_reference(scene, **kwargs)
    if method == "heuristic":
        return heuristic_reference(scene, **kwargs)
    if method == "clearance":
        return clearance_reference(scene)
    if method == "median":
        return median_reference(scene)
    raise InvalidArgumentError(f"unknown reference method {method!r}")


def decisions_accuracy(decisions: Sequence[ReferenceDecision], truth: dict[str, int]) -> float | None:
    """Fraction of decisions whose chosen index matches ``truth``."""
    scored = [d for d in decisions if d.scene_id in truth]
    if not scored:
        return None
    return sum(d.chosen == truth[d.scene_id] for d in scored) / len(scored)
