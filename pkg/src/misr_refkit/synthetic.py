"""Seeded generator of PROBA-V-like scenes with known reference views.

Every scene is drawn from its own ``numpy`` PCG64 stream derived from
``(seed, scene_index)``, so scenes can be generated independently and in any
order while staying bit-reproducible.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import InvalidArgumentError, SceneValidationError
from .imaging import Translation, downsample_hr, downscale_mask
from .reference import HR_MIN_CLEARANCE, LR_MIN_CLEARANCE, MAX_VIEWS, MIN_VIEWS, Scene, clearance_fraction

QUANT = 65535.0


@dataclass(frozen=True)
class SyntheticConfig:
    seed: int = 0
    n_scenes: int = 10
    n_views: int = 12
    shift_sigma: float = 0.5  # LR pixels
    max_shift: float = 2.0
    noise_sigma: float = 0.01
    cloud_coverage_max: float = 0.40
    hr_cloud_coverage_max: float = 0.25
    temporal_amplitude: float = 0.15
    bias_range: float = 0.03
    patch_probability: float = 0.3
    lr_size: int = 128
    factor: int = 3
    band: str = "NIR"
    quantize: bool = True

    def validate(self) -> None:
        if self.seed < 0:
            raise InvalidArgumentError("seed must be non-negative")
        if self.n_scenes < 0:
            raise InvalidArgumentError("n_scenes must be non-negative")
        if not MIN_VIEWS <= self.n_views <= MAX_VIEWS:
            raise InvalidArgumentError(f"n_views must be in [{MIN_VIEWS}, {MAX_VIEWS}]")
        if not 0.0 <= self.cloud_coverage_max <= 1.0 - LR_MIN_CLEARANCE:
            raise InvalidArgumentError("cloud_coverage_max must be in [0, 0.40]")
        if not 0.0 <= self.hr_cloud_coverage_max <= 1.0 - HR_MIN_CLEARANCE:
            raise InvalidArgumentError("hr_cloud_coverage_max must be in [0, 0.25]")
        for name in ("shift_sigma", "max_shift", "noise_sigma", "temporal_amplitude", "bias_range"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise InvalidArgumentError(f"{name} must be finite and >= 0")
        if not 0.0 <= self.patch_probability <= 1.0:
            raise InvalidArgumentError("patch_probability must be in [0, 1]")
        if self.lr_size < 16 or self.factor < 1:
            raise InvalidArgumentError("lr_size must be >= 16 and factor >= 1")


@dataclass
class SceneTruth:
    scene_id: str
    true_ref_index: int
    shifts: list[Translation]
    biases: list[float]
    temporal: list[dict] = field(default_factory=list)


def scene_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))


def scene_id_for(index: int) -> str:
    return f"imgset{index:04d}"


def smooth_field(rng: np.random.Generator, shape: tuple[int, int], corr: float) -> np.ndarray:
    """Gaussian-correlated noise with zero mean and unit std (periodic)."""
    h, w = shape
    white = rng.standard_normal(shape)
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.rfftfreq(w)[None, :]
    gain = np.exp(-2.0 * (math.pi * corr) ** 2 * (fx * fx + fy * fy))
    f = np.fft.irfft2(np.fft.rfft2(white) * gain, s=shape)
    f -= f.mean()
    sd = f.std()
    return f / sd if sd > 0 else f


def texture(rng: np.random.Generator, size: int) -> np.ndarray:
    """Multi-octave smooth noise plus blurred rectangular fields, in about [0.05, 0.65]."""
    img = np.zeros((size, size))
    # octave scales in HR pixels, independent of the scene size
    for corr, amp in ((24.0, 1.0), (12.0, 0.6), (6.0, 0.35), (3.0, 0.2)):
        img += amp * smooth_field(rng, (size, size), corr)
    fields = np.zeros((size, size))
    for _ in range(int(rng.integers(6, 16))):
        y0, x0 = rng.integers(0, size, 2)
        hh, ww = rng.integers(size // 16, size // 3, 2)
        fields[y0:y0 + hh, x0:x0 + ww] += rng.normal(0.0, 0.8)
    fields = np.fft.irfft2(
        np.fft.rfft2(fields)
        * np.exp(-2.0 * math.pi**2 * (np.fft.fftfreq(size)[:, None] ** 2 + np.fft.rfftfreq(size)[None, :] ** 2)),
        s=(size, size),
    )
    img = img / img.std() + fields
    lo, hi = np.percentile(img, [1.0, 99.0])
    base = rng.uniform(0.05, 0.15)
    span = rng.uniform(0.3, 0.5)
    return np.clip(base + span * (img - lo) / (hi - lo), 0.0, 1.0)


def _quantize(a: np.ndarray) -> np.ndarray:
    return np.round(np.clip(a, 0.0, 1.0) * QUANT) / QUANT


def _cloud_mask(rng, shape, coverage, corr) -> tuple[np.ndarray, np.ndarray]:
    f = smooth_field(rng, shape, corr)
    if coverage <= 0.0:
        return np.zeros(shape, bool), f
    thr = np.quantile(f, 1.0 - coverage)
    return f > thr, f


def _cloud_values(f: np.ndarray) -> np.ndarray:
    return np.clip(0.75 + 0.08 * f, 0.6, 0.95)


def _patches(rng, content: np.ndarray, count: int) -> np.ndarray:
    size = content.shape[0]
    yy, xx = np.mgrid[0:size, 0:size]
    out = content.copy()
    for _ in range(count):
        cy, cx = rng.uniform(0, size, 2)
        ry, rx = rng.uniform(size / 40, size / 10, 2)
        inside = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        if rng.random() < 0.5:
            out[inside] = 0.8 + 0.05 * rng.random()  # snow/ice
        else:
            out[inside] *= 0.5  # shadow
    return out


def generate_scene(cfg: SyntheticConfig, rng: np.random.Generator | None = None, index: int = 0):
    """Return ``(Scene, SceneTruth)`` for scene ``index`` of ``cfg``.

    The planted reference is sampled from the clean HR content with no
    temporal change and no bias; its status map is the HR cloud mask moved by
    the view's shift. All views carry their own shift and sensor noise.
    """
    cfg.validate()
    rng = rng if rng is not None else scene_rng(cfg.seed, index)
    size = cfg.lr_size * cfg.factor
    hr_cov_max = min(cfg.hr_cloud_coverage_max, cfg.cloud_coverage_max)

    for _attempt in range(20):
        clean = texture(rng, size)
        if cfg.quantize:
            clean = _quantize(clean)
        hr_cloud, hr_field = _cloud_mask(rng, (size, size), rng.uniform(0.0, hr_cov_max), size / 24)
        hr = np.where(hr_cloud, _cloud_values(hr_field), clean)
        if cfg.quantize:
            hr = _quantize(hr)
        ref = int(rng.integers(cfg.n_views))

        lrs, masks, shifts, biases, temporal = [], [], [], [], []
        for i in range(cfg.n_views):
            s = np.clip(rng.normal(0.0, cfg.shift_sigma, 2) if cfg.shift_sigma > 0 else np.zeros(2),
                        -cfg.max_shift, cfg.max_shift)
            t = Translation(float(s[0]), float(s[1]))
            if i == ref:
                content, bias, info = clean, 0.0, {"amplitude": 0.0, "patches": 0}
            else:
                amp = cfg.temporal_amplitude * rng.uniform(0.5, 1.0)
                g = smooth_field(rng, (size, size), size / 10)
                g /= max(np.abs(g).max(), 1e-12)
                content = clean * (1.0 + amp * g)
                n_patch = 0
                if cfg.temporal_amplitude > 0 and rng.random() < cfg.patch_probability:
                    n_patch = int(rng.integers(1, 4))
                    content = _patches(rng, content, n_patch)
                bias = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.3, 1.0) * cfg.bias_range)
                info = {"amplitude": float(amp), "patches": n_patch}
            moved, _ = _kernels.translate(content, t.dx * cfg.factor, t.dy * cfg.factor, 3)
            lr = downsample_hr(moved, cfg.factor) + bias
            lr = lr + rng.normal(0.0, 1.0, lr.shape) * cfg.noise_sigma
            if i == ref:
                moved_cloud, _ = _kernels.translate(hr_cloud.astype(np.float64), t.dx * cfg.factor,
                                                    t.dy * cfg.factor, 0)
                cloud = downscale_mask(moved_cloud > 0.5, cfg.factor) >= 0.5
                cfield = downsample_hr(_kernels.translate(hr_field, t.dx * cfg.factor, t.dy * cfg.factor, 1)[0],
                                       cfg.factor)
            else:
                cloud, cfield = _cloud_mask(rng, lr.shape, rng.uniform(0.0, cfg.cloud_coverage_max),
                                            max(cfg.lr_size / 24, 3.0))
            lr = np.where(cloud, _cloud_values(cfield), lr)
            lr = _quantize(lr) if cfg.quantize else np.clip(lr, 0.0, 1.0)
            lrs.append(lr)
            masks.append(~cloud)
            shifts.append(t)
            biases.append(bias)
            temporal.append(info)

        sid = scene_id_for(index)
        scene = Scene(sid, cfg.band, np.stack(lrs), np.stack(masks), hr, ~hr_cloud, true_ref=ref)
        if all(clearance_fraction(m) >= LR_MIN_CLEARANCE for m in scene.masks) and \
                clearance_fraction(scene.hr_mask) >= HR_MIN_CLEARANCE:
            return scene, SceneTruth(sid, ref, shifts, biases, temporal)
    raise SceneValidationError(f"could not draw a scene satisfying the clearance rules for index {index}")


def _write_one(args):
    from .dataset_io import save_scene

    cfg, root, index, force = args
    scene, truth = generate_scene(cfg, index=index)
    save_scene(root, scene, force=force)
    return truth.scene_id, truth.true_ref_index


def generate_corpus(cfg: SyntheticConfig, root, *, force: bool = False, jobs: int = 1) -> Path:
    """Write ``cfg.n_scenes`` scenes under ``root/<band>/`` plus ``truth.csv``.

    Returns the path of the truth manifest.
    """
    from .dataset_io import write_truth_csv

    cfg.validate()
    root = Path(root)
    (root / cfg.band).mkdir(parents=True, exist_ok=True)
    tasks = [(cfg, root, i, force) for i in range(cfg.n_scenes)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_write_one, tasks))
    else:
        rows = [_write_one(t) for t in tasks]
    path = root / cfg.band / "truth.csv"
    write_truth_csv(path, dict(rows))
    return path
