"""Sub-pixel translation estimation with the inverse compositional algorithm.

The template (``fixed``) gradient and its normal matrix are computed once
per pyramid level; each iteration only resamples ``moving`` at the current
translation and solves a 3x3 system for a translation update and an
additive brightness offset.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import DegenerateInputError, DimensionMismatchError, NoValidPixelsError, RefkitError
from .imaging import DEFAULT_SEARCH_BOUND, Translation, as_image, as_mask, warp_mask

MIN_USABLE_FRACTION = 0.25


@dataclass(frozen=True)
class RegistrationConfig:
    max_iters: int = 50
    tol: float = 1e-3
    pyramid_levels: int = 3
    bias_correction: bool = True
    search_bound: float = DEFAULT_SEARCH_BOUND
    min_level_size: int = 16


@dataclass(frozen=True)
class RegistrationResult:
    """Outcome of one alignment.

    ``t`` is the displacement of ``moving`` relative to ``fixed``:
    ``moving(x) ~ fixed(x + t)``, so ``warp(moving, -t)`` lands on ``fixed``.
    """

    t: Translation
    iterations: int
    final_update_norm: float
    converged: bool
    residual_rmse: float
    bias: float = 0.0


@dataclass(frozen=True)
class RegistrationFailure:
    index: int
    error: str


def _gradients(img: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # central differences; the one-pixel frame is flagged unusable
    gy, gx = np.gradient(img)
    interior = np.zeros(img.shape, dtype=bool)
    interior[1:-1, 1:-1] = True
    return gx, gy, interior


def _half(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    h2, w2 = h // 2 * 2, w // 2 * 2
    a = img[:h2, :w2]
    return a.reshape(h2 // 2, 2, w2 // 2, 2).mean(axis=(1, 3))


def _half_mask(m: np.ndarray) -> np.ndarray:
    h, w = m.shape
    h2, w2 = h // 2 * 2, w // 2 * 2
    a = m[:h2, :w2]
    return a.reshape(h2 // 2, 2, w2 // 2, 2).all(axis=(1, 3))


def _pyramid(img, fixed, m_mov, m_fix, levels, min_size):
    out = [(img, fixed, m_mov, m_fix)]
    for _ in range(levels - 1):
        img, fixed = _half(img), _half(fixed)
        m_mov, m_fix = _half_mask(m_mov), _half_mask(m_fix)
        if min(img.shape) < min_size:
            break
        out.append((img, fixed, m_mov, m_fix))
    return out[::-1]


def _sample(moving: np.ndarray, m_mov: np.ndarray, q: Translation):
    warped, valid = _kernels.translate(moving, q.dx, q.dy, 3)
    return warped, valid & warp_mask(m_mov, q, bound=None)


def _cost(warped, fixed, valid, bias_correction):
    n = int(valid.sum())
    if n == 0:
        return math.inf, 0.0
    e = warped[valid] - fixed[valid]
    b = e.mean() if bias_correction else 0.0
    r = e - b
    return math.sqrt(float(np.dot(r, r)) / n), float(b)


def _run_level(moving, fixed, m_mov, m_fix, q, cfg, check_degenerate):
    gx, gy, interior = _gradients(fixed)
    base = m_fix & interior
    nfull = moving.size
    h2 = np.array([[np.dot(gx[base], gx[base]), np.dot(gx[base], gy[base])],
                   [np.dot(gx[base], gy[base]), np.dot(gy[base], gy[base])]])
    npx = max(int(base.sum()), 1)
    eig = np.linalg.eigvalsh(h2 / npx)
    degenerate = eig[0] <= 1e-12 or eig[0] < 1e-8 * max(eig[1], 1e-300)
    if degenerate:
        if check_degenerate:
            raise DegenerateInputError("fixed image has a singular gradient normal matrix")
        return q, 0, math.inf, False

    bias = 0.0
    update = math.inf
    it = 0
    converged = False
    prev_valid = None
    hinv = None
    for it in range(1, cfg.max_iters + 1):
        warped, valid = _sample(moving, m_mov, q)
        valid &= base
        if valid.sum() < 0.1 * nfull:
            break
        err = warped - fixed - bias
        jtj, jte, _, _ = _kernels.ic_sums(gx, gy, err, valid)
        if not cfg.bias_correction:
            jtj = jtj[:2, :2]
            jte = jte[:2]
        if prev_valid is None or not np.array_equal(valid, prev_valid):
            # normal matrix depends only on the template and the active support
            try:
                hinv = np.linalg.inv(jtj)
            except np.linalg.LinAlgError:
                break
            prev_valid = valid
        delta = hinv @ jte
        q = Translation(q.dx - float(delta[0]), q.dy - float(delta[1]))
        if cfg.bias_correction:
            bias += float(delta[2])
        if abs(q.dx) > cfg.search_bound or abs(q.dy) > cfg.search_bound:
            q = Translation(float(np.clip(q.dx, -cfg.search_bound, cfg.search_bound)),
                            float(np.clip(q.dy, -cfg.search_bound, cfg.search_bound)))
            break
        update = math.hypot(float(delta[0]), float(delta[1]))
        if update < cfg.tol:
            converged = True
            break
    return q, it, update, converged


def estimate_translation(
    moving,
    fixed,
    mask=None,
    cfg: RegistrationConfig | None = None,
    *,
    fixed_mask=None,
) -> RegistrationResult:
    """Estimate the translation ``t`` with ``moving(x) ~ fixed(x + t)``.

    ``mask`` is the status map of ``moving`` and ``fixed_mask`` that of
    ``fixed``; obscured pixels are excluded from both the cost and the normal
    matrix. A coarse-to-fine pyramid extends the capture range. Returns the
    best translation seen, with ``converged=False`` if the tolerance was
    never met.
    """
    cfg = cfg or RegistrationConfig()
    moving = as_image(moving, "moving")
    fixed = as_image(fixed, "fixed")
    if moving.shape != fixed.shape:
        raise DimensionMismatchError(f"moving {moving.shape} and fixed {fixed.shape} differ")
    m_mov = np.ones(moving.shape, bool) if mask is None else as_mask(mask, moving.shape)
    m_fix = np.ones(fixed.shape, bool) if fixed_mask is None else as_mask(fixed_mask, fixed.shape, "fixed_mask")
    if (m_mov & m_fix).sum() < MIN_USABLE_FRACTION * moving.size:
        raise NoValidPixelsError("fewer than 25% of pixels are usable for registration")

    levels = _pyramid(moving, fixed, m_mov, m_fix, max(cfg.pyramid_levels, 1), cfg.min_level_size)
    q = Translation(0.0, 0.0)
    iters = 0
    update = math.inf
    converged = False
    for k, (mv, fx, mm, mf) in enumerate(levels):
        finest = k == len(levels) - 1
        if k:
            q = q.scaled(2.0)
        q, iters, update, converged = _run_level(mv, fx, mm, mf, q, cfg, check_degenerate=finest)

    # best-so-far guard: never return something worse than the identity
    candidates = [q, Translation(0.0, 0.0)]
    best = None
    for cand in candidates:
        warped, valid = _sample(moving, m_mov, cand)
        valid &= m_fix
        rmse, b = _cost(warped, fixed, valid, cfg.bias_correction)
        if best is None or rmse < best[1]:
            best = (cand, rmse, b)
    q, rmse, b = best
    t = Translation(-q.dx + 0.0, -q.dy + 0.0)
    return RegistrationResult(
        t=t,
        iterations=iters,
        final_update_norm=update,
        converged=converged and update <= cfg.tol,
        residual_rmse=rmse,
        bias=b,
    )


def align_views(
    views: Sequence[tuple[np.ndarray, np.ndarray | None]],
    target,
    cfg: RegistrationConfig | None = None,
    *,
    target_mask=None,
) -> list[RegistrationResult | RegistrationFailure]:
    """Register every ``(image, status_map)`` view onto ``target``.

    Failures are reported in place as :class:`RegistrationFailure` entries.
    """
    target = as_image(target, "target")
    out: list[RegistrationResult | RegistrationFailure] = []
    for i, (img, m) in enumerate(views):
        try:
            out.append(estimate_translation(img, target, m, cfg, fixed_mask=target_mask))
        except RefkitError as exc:
            out.append(RegistrationFailure(i, f"{type(exc).__name__}: {exc}"))
    return out
