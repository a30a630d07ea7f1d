import numpy as np
import pytest
from PIL import Image

from misr_refkit.dataset_io import (
    list_scenes,
    load_corpus,
    load_scene,
    read_png16,
    read_reference_csv,
    save_scene,
    write_decisions_csv,
    write_png16,
    write_reference_csv,
)
from misr_refkit.errors import MalformedSceneError, ParseError, SceneValidationError
from misr_refkit.reference import ReferenceDecision, Scene
from misr_refkit.synthetic import SyntheticConfig, generate_scene


def _scene(index=0, **kw):
    return generate_scene(SyntheticConfig(lr_size=24, **kw), index=index)[0]


def test_round_trip_bit_exact(tmp_path):
    scene = _scene()
    save_scene(tmp_path, scene)
    back = load_scene(tmp_path, "NIR", scene.id, validate=True)
    assert back.id == scene.id and back.band == scene.band
    assert np.array_equal(back.lrs, scene.lrs)
    assert np.array_equal(back.masks, scene.masks)
    assert np.array_equal(back.hr, scene.hr)
    assert np.array_equal(back.hr_mask, scene.hr_mask)


def test_overwrite_refused_without_force(tmp_path):
    scene = _scene()
    save_scene(tmp_path, scene)
    with pytest.raises(FileExistsError):
        save_scene(tmp_path, scene)
    other = _scene(index=1)
    other.id = scene.id
    save_scene(tmp_path, other, force=True)
    assert np.array_equal(load_scene(tmp_path, "NIR", scene.id).lrs, other.lrs)
    assert [p.name for p in (tmp_path / "NIR").iterdir()] == [scene.id]


def test_quantization_bound(tmp_path):
    img = np.random.default_rng(0).random((16, 16))
    write_png16(tmp_path / "x.png", img)
    assert np.abs(read_png16(tmp_path / "x.png") - img).max() <= 1 / 65535


def test_eight_bit_image_rejected(tmp_path):
    scene = _scene()
    d = save_scene(tmp_path, scene)
    Image.fromarray(np.zeros((24, 24), np.uint8)).save(d / "LR000.png")
    with pytest.raises(MalformedSceneError):
        load_scene(tmp_path, "NIR", scene.id)


def test_missing_status_map(tmp_path):
    d = save_scene(tmp_path, _scene())
    (d / "QM003.png").unlink()
    with pytest.raises(MalformedSceneError, match="QM003"):
        load_scene(tmp_path, "NIR", d.name)


def test_dimension_mismatch(tmp_path):
    d = save_scene(tmp_path, _scene())
    write_png16(d / "LR001.png", np.zeros((10, 10)))
    with pytest.raises(MalformedSceneError):
        load_scene(tmp_path, "NIR", d.name)


def test_validation_names_file(tmp_path):
    scene = _scene()
    scene.masks[4][:12] = False
    save_scene(tmp_path, scene)
    with pytest.raises(SceneValidationError, match="QM004"):
        load_scene(tmp_path, "NIR", scene.id, validate=True)
    scenes, problems = load_corpus(tmp_path, "NIR")
    assert scenes == [] and len(problems) == 1


def test_test_split_without_hr(tmp_path):
    lrs = np.random.default_rng(1).random((9, 12, 12))
    scene = Scene("imgset1160", "RED", np.round(lrs * 65535) / 65535, np.ones_like(lrs, bool))
    save_scene(tmp_path, scene)
    back = load_scene(tmp_path, "RED", "imgset1160", validate=True)
    assert back.hr is None and back.hr_mask is None


def test_mask_inversion(tmp_path):
    scene = _scene()
    save_scene(tmp_path, scene)
    inv = load_scene(tmp_path, "NIR", scene.id, invert_masks=True)
    assert np.array_equal(inv.masks, ~scene.masks)


def test_enumeration_is_lexicographic(tmp_path):
    for sid in ("imgset0010", "imgset0002", "imgset0100"):
        s = _scene()
        s.id = sid
        save_scene(tmp_path, s)
    (tmp_path / "NIR" / "notes.csv").write_text("x")
    assert list_scenes(tmp_path, "NIR") == ["imgset0002", "imgset0010", "imgset0100"]
    assert list_scenes(tmp_path, "RED") == []


def test_reference_csv(tmp_path):
    p = tmp_path / "refs.csv"
    p.write_text("scene_id,band,index\n")
    assert read_reference_csv(p) == {}
    mapping = {"imgset0002": 4, "imgset0001": 0, "imgset0010": 12}
    write_reference_csv(p, mapping, "NIR")
    assert p.read_text().splitlines() == [
        "scene_id,band,index", "imgset0001,NIR,0", "imgset0002,NIR,4", "imgset0010,NIR,12"]
    assert read_reference_csv(p) == mapping
    p.write_text("scene_id,band,index\na,NIR,1\na,NIR,2\n")
    with pytest.raises(ParseError):
        read_reference_csv(p)
    p.write_text("scene_id,band\na,NIR\n")
    with pytest.raises(ParseError):
        read_reference_csv(p)


def test_reference_csv_with_170_rows(tmp_path):
    p = tmp_path / "val.csv"
    write_reference_csv(p, {f"imgset{i:04d}": i % 9 for i in range(170)}, "NIR")
    assert len(read_reference_csv(p)) == 170
    assert len(p.read_text().splitlines()) == 171


def test_decisions_csv(tmp_path):
    p = tmp_path / "d.csv"
    write_decisions_csv(p, [ReferenceDecision("b", "heuristic", 3, [], band="NIR"),
                            ReferenceDecision("a", "heuristic", 1, [], band="NIR")])
    assert p.read_text() == "scene_id,band,method,chosen_index\na,NIR,heuristic,1\nb,NIR,heuristic,3\n"
    assert read_reference_csv(p) == {"a": 1, "b": 3}
