import numpy as np
import pytest

from conftest import textured
from misr_refkit.baseline_sr import SrConfig, bicubic_sisr, shift_and_add
from misr_refkit.errors import InvalidArgumentError
from misr_refkit.imaging import downsample_hr, warp, warp_mask
from misr_refkit.metrics import masked_rmse
from misr_refkit.reference import Scene
from misr_refkit.synthetic import SyntheticConfig, generate_scene

SMALL = SyntheticConfig(lr_size=48, n_views=12)


def test_bicubic_sisr_constant_and_shape():
    out = bicubic_sisr(np.full((128, 128), 0.5), 3)
    assert out.shape == (384, 384)
    assert np.all(out == 0.5)
    with pytest.raises(InvalidArgumentError):
        bicubic_sisr(np.zeros((4, 4)), 1)


def test_bicubic_of_true_reference_beats_other_views():
    for index in range(3):
        scene, truth = generate_scene(SMALL, index=index)
        truth_ref = downsample_hr(scene.hr)
        up_true = bicubic_sisr(truth_ref, 3)
        others = [i for i in range(scene.n_views) if i != truth.true_ref_index]
        j = others[index % len(others)]
        m = scene.hr_mask
        assert masked_rmse(up_true, scene.hr, m) < masked_rmse(bicubic_sisr(scene.lrs[j], 3), scene.hr, m)


def test_identical_unshifted_views_reduce_to_bicubic():
    v = textured(np.random.default_rng(1), 32)
    lrs = np.stack([v] * 9)
    scene = Scene("same", "NIR", lrs, np.ones_like(lrs, bool))
    res = shift_and_add(scene, SrConfig(ref_method="fixed", fixed_index=0))
    np.testing.assert_allclose(res.image, bicubic_sisr(v, 3), atol=1e-6)
    assert not res.fallback


def test_constant_views_give_constant_output():
    lrs = np.full((9, 24, 24), 0.5)
    scene = Scene("flat", "NIR", lrs, np.ones_like(lrs, bool))
    res = shift_and_add(scene, SrConfig(ref_method="clearance"))
    assert np.all(res.image == 0.5)
    assert res.fallback and res.warnings


def test_constant_scene_with_clouds_and_shifts():
    rng = np.random.default_rng(4)
    lrs = np.full((9, 24, 24), 0.25)
    masks = rng.random((9, 24, 24)) > 0.2
    res = shift_and_add(Scene("flat2", "NIR", lrs, masks), SrConfig(ref_method="median"))
    assert np.all(res.image == 0.25)


def test_fixed_anchor_changes_output():
    scene, truth = generate_scene(SMALL, index=4)
    a = shift_and_add(scene, SrConfig(ref_method="fixed", fixed_index=0))
    b = shift_and_add(scene, SrConfig(ref_method="fixed", fixed_index=1))
    assert np.sqrt(np.mean((a.image - b.image) ** 2)) > 1e-3
    assert a.reference_index == 0 and b.reference_index == 1


def test_non_reference_order_invariance():
    scene, truth = generate_scene(SMALL, index=5)
    r = truth.true_ref_index
    a = shift_and_add(scene, SrConfig(ref_method="fixed", fixed_index=r))
    others = [i for i in range(scene.n_views) if i != r][::-1]
    order = [r] + others
    shuffled = Scene(scene.id, scene.band, scene.lrs[order], scene.masks[order], scene.hr, scene.hr_mask)
    b = shift_and_add(shuffled, SrConfig(ref_method="fixed", fixed_index=0))
    np.testing.assert_allclose(a.image, b.image, atol=1e-12)


def test_misr_gain_over_bicubic():
    wins = 0
    for index in range(5):
        scene, truth = generate_scene(SMALL, index=100 + index)
        r = truth.true_ref_index
        sa = shift_and_add(scene, SrConfig(ref_method="fixed", fixed_index=r)).image
        bi = bicubic_sisr(scene.lrs[r], 3)
        t = truth.shifts[r].scaled(3)
        hr_in_ref, valid = warp(scene.hr, t)
        m = valid & warp_mask(scene.hr_mask, t)
        m[:6] = m[-6:] = False
        m[:, :6] = m[:, -6:] = False
        wins += masked_rmse(sa, hr_in_ref, m) < masked_rmse(bi, hr_in_ref, m)
    assert wins >= 4


def test_config_parsing():
    cfg = SrConfig.from_method("fixed:3")
    assert cfg.ref_method == "fixed" and cfg.fixed_index == 3
    assert SrConfig.from_method("fixed(2)").fixed_index == 2
    with pytest.raises(InvalidArgumentError):
        SrConfig.from_method("best")
    with pytest.raises(InvalidArgumentError):
        SrConfig(ref_method="fixed")
    scene = Scene("s", "NIR", np.zeros((2, 8, 8)), np.ones((2, 8, 8), bool))
    with pytest.raises(InvalidArgumentError):
        shift_and_add(scene, SrConfig(ref_method="fixed", fixed_index=5))


def test_nearest_fill_option():
    v = textured(np.random.default_rng(2), 24)
    lrs = np.stack([v] * 9)
    res = shift_and_add(Scene("n", "NIR", lrs, np.ones_like(lrs, bool)),
                        SrConfig(ref_method="fixed", fixed_index=0, fill="nearest"))
    np.testing.assert_allclose(res.image, np.kron(v, np.ones((3, 3))), atol=1e-12)
