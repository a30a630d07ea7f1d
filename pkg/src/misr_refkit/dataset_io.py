"""On-disk scene layout and reference-index CSV files.

Layout::

    <root>/<band>/<scene_id>/LR000.png, QM000.png, ..., HR.png, SM.png

Images are 16-bit grayscale PNGs normalized by 65535; status maps are
PNGs of any depth where nonzero means clear.
"""
from __future__ import annotations

import csv
import logging
import os
import re
import shutil
import tempfile
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from PIL import Image

from .errors import MalformedSceneError, ParseError, SceneValidationError
from .reference import ReferenceDecision, Scene

log = logging.getLogger(__name__)

QUANT = 65535.0
_LR_RE = re.compile(r"^LR(\d+)\.png$")
_INDEX_COLUMNS = ("index", "chosen_index", "true_ref_index")


def read_png16(path) -> np.ndarray:
    path = Path(path)
    with Image.open(path) as im:
        if im.mode not in ("I;16", "I;16B", "I;16L", "I"):
            raise MalformedSceneError(f"{path}: expected a 16-bit grayscale PNG, got mode {im.mode}")
        a = np.array(im)
    if a.ndim != 2:
        raise MalformedSceneError(f"{path}: expected a single-channel image")
    if a.min(initial=0) < 0 or a.max(initial=0) > 65535:
        raise MalformedSceneError(f"{path}: values outside the 16-bit range")
    return a.astype(np.float64) / QUANT


def write_png16(path, img: np.ndarray) -> None:
    q = np.round(np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * QUANT).astype(np.uint16)
    Image.fromarray(q).save(path)


def read_mask_png(path, invert: bool = False) -> np.ndarray:
    path = Path(path)
    with Image.open(path) as im:
        a = np.array(im)
    if a.ndim != 2:
        raise MalformedSceneError(f"{path}: status map must be single-channel")
    m = a != 0
    return ~m if invert else m


def write_mask_png(path, mask: np.ndarray) -> None:
    Image.fromarray(np.asarray(mask, dtype=bool).astype(np.uint8) * 255).save(path)


def list_scenes(root, band: str) -> list[str]:
    """Scene ids under ``root/band`` in lexicographic order."""
    d = Path(root) / band
    if not d.is_dir():
        return []
    return sorted(p.name for p in d.iterdir() if p.is_dir() and not p.name.startswith("."))


def load_scene(
    root,
    band: str,
    scene_id: str,
    validate: bool = False,
    *,
    invert_masks: bool = False,
    check_view_count: bool = True,
) -> Scene:
    d = Path(root) / band / scene_id
    if not d.is_dir():
        raise MalformedSceneError(f"{d}: scene directory not found")
    indices = sorted(int(m.group(1)) for p in d.iterdir() if (m := _LR_RE.match(p.name)))
    if not indices:
        raise MalformedSceneError(f"{d}: no LR images")
    lrs, masks = [], []
    width = max(3, max(len(str(i)) for i in indices))
    for i in indices:
        name = f"{i:0{width}d}"
        lr_path, qm_path = d / f"LR{name}.png", d / f"QM{name}.png"
        if not qm_path.exists():
            raise MalformedSceneError(f"{lr_path}: missing status map {qm_path.name}")
        lr = read_png16(lr_path)
        qm = read_mask_png(qm_path, invert_masks)
        if qm.shape != lr.shape or (lrs and lr.shape != lrs[0].shape):
            raise MalformedSceneError(f"{lr_path}: dimension mismatch")
        lrs.append(lr)
        masks.append(qm)
    hr = hr_mask = None
    if (d / "HR.png").exists():
        hr = read_png16(d / "HR.png")
        sm = d / "SM.png"
        hr_mask = read_mask_png(sm, invert_masks) if sm.exists() else np.ones(hr.shape, bool)
        if hr_mask.shape != hr.shape:
            raise MalformedSceneError(f"{sm}: dimension mismatch with HR.png")
    scene = Scene(scene_id, band, np.stack(lrs), np.stack(masks), hr, hr_mask)
    if validate:
        scene.validate(check_view_count=check_view_count)
    return scene


def save_scene(root, scene: Scene, *, force: bool = False) -> Path:
    """Write ``scene`` atomically (temp directory + rename).

    Refuses to replace an existing scene directory unless ``force``.
    """
    parent = Path(root) / scene.band
    parent.mkdir(parents=True, exist_ok=True)
    dest = parent / scene.id
    if dest.exists() and not force:
        raise FileExistsError(f"{dest} exists; pass force=True to overwrite")
    tmp = Path(tempfile.mkdtemp(prefix=f".{scene.id}-", dir=parent))
    try:
        for i in range(scene.n_views):
            write_png16(tmp / f"LR{i:03d}.png", scene.lrs[i])
            write_mask_png(tmp / f"QM{i:03d}.png", scene.masks[i])
        if scene.hr is not None:
            write_png16(tmp / "HR.png", scene.hr)
            write_mask_png(tmp / "SM.png", scene.hr_mask)
        if dest.exists():
            shutil.rmtree(dest)
        os.replace(tmp, dest)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return dest


def load_corpus(root, band: str, validate: bool = True, **kwargs) -> tuple[list[Scene], list[str]]:
    """Load every scene of a band, skipping broken ones with a diagnostic."""
    scenes, problems = [], []
    for sid in list_scenes(root, band):
        try:
            scenes.append(load_scene(root, band, sid, validate, **kwargs))
        except (MalformedSceneError, SceneValidationError) as exc:
            log.warning("skipping %s/%s: %s", band, sid, exc)
            problems.append(f"{sid}: {exc}")
    return scenes, problems


def read_reference_csv(path) -> dict[str, int]:
    """Read ``scene_id -> index`` from any of the toolkit's index CSVs."""
    out: dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if "scene_id" not in fields:
            raise ParseError(f"{path}: missing scene_id column")
        col = next((c for c in _INDEX_COLUMNS if c in fields), None)
        if col is None:
            raise ParseError(f"{path}: no index column among {_INDEX_COLUMNS}")
        for row in reader:
            sid = row["scene_id"]
            if sid in out:
                raise ParseError(f"{path}: duplicate scene_id {sid}")
            try:
                out[sid] = int(row[col])
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{path}: bad index for {sid}: {row[col]!r}") from exc
    return out


def _write_rows(path, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_reference_csv(path, mapping: Mapping[str, int], band: str = "") -> None:
    _write_rows(path, ("scene_id", "band", "index"), ((k, band, mapping[k]) for k in sorted(mapping)))


def write_truth_csv(path, mapping: Mapping[str, int]) -> None:
    _write_rows(path, ("scene_id", "true_ref_index"), ((k, mapping[k]) for k in sorted(mapping)))


def write_decisions_csv(path, decisions: Iterable[ReferenceDecision]) -> None:
    rows = sorted(((d.scene_id, d.band, d.method, d.chosen) for d in decisions), key=lambda r: r[0])
    _write_rows(path, ("scene_id", "band", "method", "chosen_index"), rows)
