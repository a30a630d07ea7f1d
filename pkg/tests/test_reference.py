import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import textured
from misr_refkit.errors import NoValidViewError, PreconditionError
from misr_refkit.imaging import downsample_hr, downscale_mask
from misr_refkit.reference import (
    HeuristicWeights,
    Scene,
    clearance_fraction,
    clearance_reference,
    clearance_sum,
    find_true_reference,
    heuristic_reference,
    median_reference,
)
from misr_refkit.synthetic import SyntheticConfig, generate_scene

SMALL = SyntheticConfig(lr_size=48, n_views=12)


def test_clearance_counts():
    assert clearance_fraction(np.ones((128, 128), bool)) == 1.0
    assert clearance_sum(np.ones((128, 128), bool)) == 16384
    assert clearance_sum(np.zeros((5, 5), bool)) == 0
    m = np.zeros(16384, bool)
    m[:9830] = True
    assert clearance_fraction(m.reshape(128, 128)) == pytest.approx(9830 / 16384)
    assert clearance_fraction(m.reshape(128, 128)) < 0.60
    pattern = np.zeros((3, 3), bool)
    pattern[:2, :1] = True
    pattern[2, 2] = True
    assert clearance_sum(pattern) == 3


@settings(max_examples=50, deadline=None)
@given(h=st.integers(1, 40), w=st.integers(1, 40), seed=st.integers(0, 10_000))
def test_clearance_sum_equals_fraction_times_area(h, w, seed):
    m = np.random.default_rng(seed).random((h, w)) > 0.5
    # identity holds exactly in the integers; the float product agrees to round-off
    assert round(clearance_fraction(m) * w * h) == clearance_sum(m)
    assert clearance_fraction(m) * w * h == pytest.approx(clearance_sum(m), rel=1e-15, abs=0)


def test_single_view_scene():
    rng = np.random.default_rng(0)
    hr = textured(rng, 96)
    lr = downsample_hr(hr)[None]
    d = find_true_reference(Scene("one", "NIR", lr, np.ones_like(lr, bool), hr))
    assert d.chosen == 0 and len(d.scores) == 1


def test_missing_hr_is_precondition_error():
    lr = np.zeros((1, 8, 8))
    with pytest.raises(PreconditionError):
        find_true_reference(Scene("x", "NIR", lr, np.ones_like(lr, bool)))
    with pytest.raises(PreconditionError):
        heuristic_reference(Scene("x", "NIR", lr, np.ones_like(lr, bool)))


def test_all_degenerate_views():
    hr = np.full((48, 48), 0.4)
    lr = np.full((3, 16, 16), 0.4)
    with pytest.raises(NoValidViewError):
        find_true_reference(Scene("flat", "NIR", lr, np.ones_like(lr, bool), hr))


@pytest.mark.parametrize("index", range(4))
def test_planted_reference_is_recovered(index):
    scene, truth = generate_scene(SMALL, index=index)
    d = find_true_reference(scene)
    assert d.chosen == truth.true_ref_index
    assert d.chosen == int(np.argmin(d.scores))


def test_scores_ordered_by_perturbation_amplitude():
    rng = np.random.default_rng(5)
    hr = textured(rng, 96)
    base = downsample_hr(hr)
    g = textured(rng, 32) - 0.4
    amps = [0.0, 0.05, 0.1, 0.2, 0.3, 0.45]
    order = [3, 0, 5, 1, 4, 2]
    lrs = np.stack([base * (1 + amps[k] * g) for k in order])
    scene = Scene("sweep", "NIR", lrs, np.ones_like(lrs, bool), hr)
    d = find_true_reference(scene)
    # brute-force oracle: plain RMSE at zero shift over the registration-valid frame
    brute = [np.sqrt(np.mean((v - base) ** 2)) for v in lrs]
    assert np.argsort(d.scores).tolist() == np.argsort(brute).tolist()
    assert [amps[order[i]] for i in np.argsort(d.scores)] == sorted(amps)


def test_view_order_invariance():
    scene, truth = generate_scene(SMALL, index=7)
    d = find_true_reference(scene)
    perm = np.random.default_rng(1).permutation(scene.n_views)
    shuffled = Scene(scene.id, scene.band, scene.lrs[perm], scene.masks[perm], scene.hr, scene.hr_mask)
    d2 = find_true_reference(shuffled)
    assert perm[d2.chosen] == d.chosen
    np.testing.assert_allclose(np.array(d2.scores), np.array(d.scores)[perm], rtol=1e-9)


def test_global_bias_leaves_argmin_when_removed():
    scene, truth = generate_scene(SMALL, index=3)
    ref = find_true_reference(scene, remove_bias=True)
    shifted = Scene(scene.id, scene.band, scene.lrs + 0.05, scene.masks, scene.hr, scene.hr_mask)
    assert find_true_reference(shifted, remove_bias=True).chosen == ref.chosen


def _mask_scene():
    hr_mask = np.ones((24, 24), bool)
    hr_mask[0:9, 0:12] = False  # block-aligned so the downscaled mask is binary
    target = downscale_mask(hr_mask) == 1.0
    masks = np.ones((4, 8, 8), bool)
    masks[0, :4, :] = False
    masks[1] = target
    masks[2, :2, :2] = False
    masks[3, 5:, 5:] = False
    rng = np.random.default_rng(2)
    lrs = rng.random((4, 8, 8))
    return Scene("m", "NIR", lrs, masks, np.zeros((24, 24)), hr_mask)


def test_heuristic_pure_mask_term():
    scene = _mask_scene()
    d = heuristic_reference(scene, HeuristicWeights(0.0, 0.0))
    assert d.chosen == 1 and d.scores[1] == 0.0


def test_heuristic_ignores_pixels_with_zero_weights():
    scene = _mask_scene()
    other = Scene(scene.id, scene.band, np.random.default_rng(9).random(scene.lrs.shape),
                  scene.masks, None, scene.hr_mask)
    a = heuristic_reference(scene, HeuristicWeights(0.0, 0.0))
    b = heuristic_reference(other, HeuristicWeights(0.0, 0.0))
    assert a.chosen == b.chosen and a.scores == b.scores


def test_heuristic_terms_by_hand():
    scene = _mask_scene()
    w = HeuristicWeights(0.1, 0.3)
    d = heuristic_reference(scene, w)
    target = downscale_mask(scene.hr_mask)
    pooled = np.median(scene.lrs)
    for i in range(4):
        l1 = np.abs(scene.masks[i] - target).sum() / 64
        expect = l1 + 0.1 * abs(np.median(scene.lrs[i]) - pooled) + 0.3 * scene.masks[i].sum() / 64
        assert d.scores[i] == pytest.approx(expect, abs=1e-14)
    raw = heuristic_reference(scene, w, raw_terms=True)
    l1 = np.abs(scene.masks[0] - target).sum()
    assert raw.scores[0] == pytest.approx(l1 + 0.1 * abs(np.median(scene.lrs[0]) - pooled)
                                          + 0.3 * scene.masks[0].sum(), abs=1e-12)
    neg = heuristic_reference(scene, w, clearance_sign=-1.0)
    assert neg.scores[2] < d.scores[2]
    per_view = heuristic_reference(scene, w, median_mode="per_view")
    meds = [np.median(v) for v in scene.lrs]
    assert per_view.scores[0] == pytest.approx(
        np.abs(scene.masks[0] - target).sum() / 64 + 0.1 * abs(meds[0] - np.median(meds))
        + 0.3 * scene.masks[0].sum() / 64)


def test_heuristic_tie_breaks_low():
    scene = _mask_scene()
    lrs = np.stack([scene.lrs[1], scene.lrs[1]])
    masks = np.stack([scene.masks[1], scene.masks[1]])
    s = Scene("tie", "NIR", lrs, masks, None, scene.hr_mask)
    assert heuristic_reference(s).chosen == 0
    assert heuristic_reference(s).chosen == 0


def test_clearance_reference():
    masks = np.ones((4, 8, 8), bool)
    masks[0, :3] = False
    masks[2, :1] = False
    masks[3, :2] = False
    masks[1, 0, 0] = True
    s = Scene("c", "NIR", np.zeros((4, 8, 8)), masks)
    assert clearance_reference(s).chosen == 1
    eq = Scene("e", "NIR", np.zeros((3, 8, 8)), np.ones((3, 8, 8), bool))
    assert clearance_reference(eq).chosen == 0
    scene, _ = generate_scene(SMALL, index=11)
    counts = [int(m.sum()) for m in scene.masks]
    assert clearance_reference(scene).chosen == counts.index(max(counts))


def test_median_reference():
    v = np.random.default_rng(0).random((8, 8))
    s = Scene("i", "NIR", np.stack([v] * 9), np.ones((9, 8, 8), bool))
    d = median_reference(s)
    assert np.array_equal(d.composite, v)
    three = Scene("t", "NIR", np.stack([np.full((2, 2), x) for x in (0.1, 0.9, 0.2)]), np.ones((3, 2, 2), bool))
    assert np.all(median_reference(three).composite == 0.2)


def test_median_reference_brute_force():
    scene, _ = generate_scene(SMALL, index=2)
    d = median_reference(scene)
    clear = [m.sum() for m in scene.masks]
    chosen = sorted(range(scene.n_views), key=lambda i: (-clear[i], i))[:9]
    assert sorted(d.extra["members"]) == sorted(chosen)
    assert d.chosen == chosen[0]
    for y, x in [(0, 0), (10, 17), (47, 47), (23, 5)]:
        vals = sorted(scene.lrs[i, y, x] for i in chosen)
        assert d.composite[y, x] == vals[4]
