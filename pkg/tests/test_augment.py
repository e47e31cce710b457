import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from illumchart import LinearImage, Mask, SrgbImage
from illumchart.augment import (
    AugmentPolicy,
    JitterConfig,
    JitterFactors,
    apply_color_jitter,
    global_rgb_rescale,
    make_rng,
    mask_bbox,
    masked_color_jitter,
    random_crop,
    sample_jitter_factors,
    sample_rgb_rescale,
)
from illumchart.color import apply_white_balance, normalize_illuminant
from illumchart.errors import InvalidInputError


def checkerish_mask(h=64, w=64, y0=20, x0=24, mh=16, mw=24):
    mask = np.zeros((h, w), dtype=np.uint8)
    mask[y0:y0 + mh, x0:x0 + mw] = 1
    return Mask(mask)


@pytest.fixture
def srgb(rng):
    return SrgbImage(rng.uniform(0, 1, (64, 64, 3)))


class TestMaskedJitter:
    def test_empty_mask_returns_input_bitwise(self, srgb):
        out = masked_color_jitter(srgb, Mask(np.zeros((64, 64), np.uint8)), JitterConfig(rng_seed=1))
        assert np.array_equal(out.data, srgb.data)

    def test_identity_factors(self, srgb):
        out = apply_color_jitter(srgb, checkerish_mask(), JitterFactors(1.0, 1.0, 1.0))
        assert np.abs(out.data - srgb.data).max() < 1e-6

    def test_brightness_hand_arithmetic(self):
        data = np.full((4, 4, 3), 0.3)
        data[2:, :] = 0.7
        img = SrgbImage(data)
        mask = Mask(np.ones((4, 4), np.uint8))
        out = apply_color_jitter(img, mask, JitterFactors(brightness=2.0, contrast=1.0, saturation=1.0))
        assert np.allclose(out.data[0], 0.6, atol=1e-12)
        assert np.allclose(out.data[3], 1.0, atol=1e-12)  # 1.4 clamped

    def test_locality_bitwise_over_seeds(self, srgb):
        mask = checkerish_mask()
        outside = ~mask.bool_array
        for seed in range(100):
            out = masked_color_jitter(srgb, mask, JitterConfig(rng_seed=seed))
            assert np.array_equal(out.data[outside], srgb.data[outside])

    def test_determinism(self, srgb):
        mask = checkerish_mask()
        a = masked_color_jitter(srgb, mask, JitterConfig(rng_seed=77))
        b = masked_color_jitter(srgb, mask, JitterConfig(rng_seed=77))
        assert np.array_equal(a.data, b.data)

    def test_factor_draws_uniform_ks(self):
        cfg = JitterConfig()
        gen = make_rng(123)
        draws = [sample_jitter_factors(cfg, gen) for _ in range(10_000)]
        for name, (lo, hi) in (
            ("brightness", cfg.brightness_range),
            ("contrast", cfg.contrast_range),
            ("saturation", cfg.saturation_range),
        ):
            values = np.array([getattr(f, name) for f in draws])
            p = stats.kstest(values, "uniform", args=(lo, hi - lo)).pvalue
            assert p > 0.01, f"{name} draws not uniform (p={p})"

    def test_mask_dim_mismatch(self, srgb):
        with pytest.raises(InvalidInputError):
            apply_color_jitter(srgb, Mask(np.ones((8, 8), np.uint8)), JitterFactors(1, 1, 1))

    def test_shuffle_order_recorded(self):
        cfg = JitterConfig(shuffle_order=True)
        gen = make_rng(5)
        orders = {sample_jitter_factors(cfg, gen).order for _ in range(50)}
        assert len(orders) > 1
        for order in orders:
            assert sorted(order) == ["brightness", "contrast", "saturation"]

    @settings(max_examples=25)
    @given(st.integers(0, 10_000))
    def test_output_stays_in_gamut(self, seed):
        gen = np.random.default_rng(seed)
        img = SrgbImage(gen.uniform(0, 1, (16, 16, 3)))
        out = masked_color_jitter(img, Mask(np.ones((16, 16), np.uint8)), JitterConfig(rng_seed=seed))
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0


class TestRgbRescale:
    def test_identity(self, scene):
        out = global_rgb_rescale(scene, (1.0, 1.0, 1.0))
        assert np.array_equal(out.data, scene.data)

    def test_single_channel(self):
        img = LinearImage(np.array([[[1.0, 0.5, 0.5]]]))
        out = global_rgb_rescale(img, (0.6, 1.0, 1.0))
        assert np.allclose(out.data, [[[0.6, 0.5, 0.5]]], atol=1e-12)

    def test_inverse_of_white_balance(self, scene):
        factors = (0.7, 1.1, 0.9)
        tinted = global_rgb_rescale(scene, factors)
        balanced = apply_white_balance(tinted, normalize_illuminant(factors))
        # Green-anchored division leaves a global factor of f_g.
        assert np.abs(balanced.data / factors[1] - scene.data).max() < 1e-6

    def test_draw_within_range(self):
        policy = AugmentPolicy()
        gen = make_rng(9)
        for _ in range(100):
            f = sample_rgb_rescale(policy, gen)
            assert all(0.6 <= v <= 1.4 for v in f)

    def test_rejects_nonpositive(self, scene):
        with pytest.raises(InvalidInputError):
            global_rgb_rescale(scene, (0.0, 1.0, 1.0))


class TestRandomCrop:
    def test_scale_one_is_identity(self, srgb):
        policy = AugmentPolicy(p_crop=1.0, crop_scale_range=(1.0, 1.0))
        out_img, out_mask = random_crop(srgb, checkerish_mask(), policy, make_rng(0))
        assert np.array_equal(out_img.data, srgb.data)
        assert np.array_equal(out_mask.data, checkerish_mask().data)

    def test_mask_bbox_always_inside(self, srgb):
        policy = AugmentPolicy(crop_scale_range=(0.5, 1.0))
        mask = checkerish_mask()
        gen = make_rng(42)
        for _ in range(1000):
            _, out_mask = random_crop(srgb, mask, policy, gen)
            assert int(out_mask.data.sum()) == int(mask.data.sum())

    def test_seed_replay_exact(self, srgb):
        policy = AugmentPolicy(crop_scale_range=(0.5, 1.0))
        mask = checkerish_mask()
        a_img, a_mask = random_crop(srgb, mask, policy, make_rng(314))
        b_img, b_mask = random_crop(srgb, mask, policy, make_rng(314))
        assert np.array_equal(a_img.data, b_img.data)
        assert np.array_equal(a_mask.data, b_mask.data)

    def test_impossible_window_skips(self, srgb):
        # Mask spans nearly the whole frame; a 50% crop cannot contain it.
        mask = Mask(np.ones((64, 64), np.uint8))
        policy = AugmentPolicy(crop_scale_range=(0.5, 0.5))
        out_img, out_mask = random_crop(srgb, mask, policy, make_rng(7))
        assert out_img.data.shape == srgb.data.shape
        assert np.array_equal(out_img.data, srgb.data)

    def test_bbox_helper(self):
        assert mask_bbox(checkerish_mask()) == (20, 24, 36, 48)
        assert mask_bbox(Mask(np.zeros((4, 4), np.uint8))) is None
