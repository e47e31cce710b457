import numpy as np
import pytest

from illumchart import (
    CheckerLayout,
    CheckerPlacement,
    LinearImage,
    SrgbImage,
    composite_checker,
    estimate_illuminant_from_patches,
    gamma_decode,
    render_neutral_checker,
    sample_patches,
)
from illumchart.checker import centered_placement, placement_from_bbox
from illumchart.color import angular_error
from illumchart.errors import EstimationFailedError, InvalidInputError, PlacementError, SamplingError

LAYOUT = CheckerLayout()
PLACEMENT = CheckerPlacement(center=(128, 128), checker_width=120)


def blank_image(h=256, w=256, value=0.5):
    return SrgbImage(np.full((h, w, 3), value))


class TestRender:
    def test_mask_area_is_rect_area(self):
        raster, mask = render_neutral_checker(LAYOUT, PLACEMENT)
        _, _, w, h = PLACEMENT.rect(LAYOUT)
        assert raster.data.shape == (h, w, 3)
        assert int(mask.data.sum()) == w * h

    def test_achromatic_row_is_neutral(self):
        raster, _ = render_neutral_checker(LAYOUT, PLACEMENT)
        _, _, w, h = PLACEMENT.rect(LAYOUT)
        bottom = raster.data[int(h * 7 / 8)]  # center row of the bottom patches
        assert np.abs(bottom - bottom[:, :1]).max() == 0.0

    def test_patch_centers_on_lattice(self):
        # Closed-form grid oracle: patch (r, c) center at ((c+.5)/6, (r+.5)/4).
        raster, _ = render_neutral_checker(LAYOUT, PLACEMENT)
        _, _, w, h = PLACEMENT.rect(LAYOUT)
        palette = np.asarray(LAYOUT.patch_colors)
        for r in range(4):
            for c in range(6):
                y = int((r + 0.5) / 4 * h)
                x = int((c + 0.5) / 6 * w)
                assert np.allclose(raster.data[y, x], palette[r * 6 + c], atol=1e-12)

    def test_separators_black(self):
        layout = CheckerLayout(border_ratio=0.2)
        raster, _ = render_neutral_checker(layout, PLACEMENT)
        # Cell boundary pixels fall in the separator band.
        _, _, w, h = PLACEMENT.rect(layout)
        x_boundary = int(w / 6)
        assert (raster.data[:, x_boundary] == 0).all()


class TestComposite:
    def test_outside_mask_bitwise_unchanged(self):
        img = blank_image()
        out, mask = composite_checker(img, LAYOUT, PLACEMENT)
        outside = ~mask.bool_array
        assert np.array_equal(out.data[outside], img.data[outside])

    def test_idempotent(self):
        img = blank_image()
        once, _ = composite_checker(img, LAYOUT, PLACEMENT)
        twice, _ = composite_checker(once, LAYOUT, PLACEMENT)
        assert np.array_equal(once.data, twice.data)

    def test_placement_outside_rejected(self):
        img = blank_image(64, 64)
        with pytest.raises(PlacementError):
            composite_checker(img, LAYOUT, CheckerPlacement(center=(10, 10), checker_width=60))

    def test_roundtrip_through_sampling(self):
        img = blank_image()
        out, _ = composite_checker(img, LAYOUT, PLACEMENT)
        decoded = gamma_decode(out, 2.2)
        samples = sample_patches(decoded, LAYOUT, PLACEMENT)
        palette = np.asarray(LAYOUT.patch_colors)
        for idx in LAYOUT.achromatic_indices:
            expected = palette[idx] ** 2.2
            assert np.allclose(samples[idx].median_rgb, expected, atol=1e-6)


class TestSampling:
    def test_full_margin_no_border_exact_means(self):
        layout = CheckerLayout(border_ratio=0.0, sample_margin=1.0)
        img = blank_image()
        out, _ = composite_checker(img, layout, PLACEMENT)
        samples = sample_patches(out, layout, PLACEMENT)
        palette = np.asarray(layout.patch_colors)
        for s in samples:
            assert np.array_equal(np.asarray(s.mean_rgb), palette[s.patch_index])

    def test_median_robust_to_salt_and_pepper(self, rng):
        img = blank_image()
        out, mask = composite_checker(img, LAYOUT, PLACEMENT)
        data = out.data.copy()
        inside = np.nonzero(mask.data)
        n = inside[0].size
        pick = rng.choice(n, size=n // 10, replace=False)
        data[inside[0][pick], inside[1][pick]] = rng.choice([0.0, 1.0], size=(pick.size, 1))
        corrupted = SrgbImage(data)

        clean = sample_patches(out, LAYOUT, PLACEMENT)
        noisy = sample_patches(corrupted, LAYOUT, PLACEMENT)
        median_dev = max(
            float(np.abs(np.subtract(a.median_rgb, b.median_rgb)).max())
            for a, b in zip(clean, noisy)
        )
        mean_dev = max(
            float(np.abs(np.subtract(a.mean_rgb, b.mean_rgb)).max())
            for a, b in zip(clean, noisy)
        )
        assert median_dev <= 1e-3
        assert mean_dev > 1e-3

    def test_pixel_counts_positive(self):
        out, _ = composite_checker(blank_image(), LAYOUT, PLACEMENT)
        for s in sample_patches(out, LAYOUT, PLACEMENT):
            assert s.pixel_count > 0

    def test_tiny_checker_sampling_error(self):
        layout = CheckerLayout(sample_margin=0.05)
        placement = CheckerPlacement(center=(32, 32), checker_width=12)
        out, _ = composite_checker(blank_image(64, 64), layout, placement)
        with pytest.raises(SamplingError):
            sample_patches(out, layout, placement)

    def test_locality(self, rng):
        img = SrgbImage(rng.uniform(0, 1, (256, 256, 3)))
        before = sample_patches(img, LAYOUT, PLACEMENT)
        data = img.data.copy()
        x0, y0, w, h = PLACEMENT.rect(LAYOUT)
        data[:y0] = rng.uniform(0, 1, data[:y0].shape)          # above the rect
        data[:, :x0] = rng.uniform(0, 1, data[:, :x0].shape)    # left of the rect
        after = sample_patches(SrgbImage(data), LAYOUT, PLACEMENT)
        for a, b in zip(before, after):
            assert a == b


class TestEstimator:
    def _samples_for_tint(self, tint, clip=True):
        """Synthetic linear-domain checker under a tint, sampled back out."""
        img = blank_image()
        out, _ = composite_checker(img, LAYOUT, PLACEMENT)
        linear = gamma_decode(out, 2.2).data * np.asarray(tint)
        if clip:
            linear = np.clip(linear, 0.0, 1.0)
        return sample_patches(LinearImage(linear), LAYOUT, PLACEMENT)

    def test_neutral_gray_gives_equal_energy(self):
        samples = self._samples_for_tint((1.0, 1.0, 1.0))
        est = estimate_illuminant_from_patches(samples, LAYOUT)
        assert angular_error(est, (1, 1, 1)) < 1e-9

    def test_uniform_tint_recovered(self):
        tint = (0.5, 1.0, 0.75)
        est = estimate_illuminant_from_patches(self._samples_for_tint(tint), LAYOUT)
        assert angular_error(est, tint) < 1e-6

    def test_clipped_white_patch_excluded(self):
        # Tint pushes the white patch past 1.0 where it clips; the estimate
        # must come from the surviving darker patches only.
        tint = (1.4, 1.0, 0.8)
        est = estimate_illuminant_from_patches(self._samples_for_tint(tint), LAYOUT)
        assert angular_error(est, tint) < 0.01

    def test_all_discarded_raises(self):
        samples = self._samples_for_tint((0.001, 0.001, 0.001))
        with pytest.raises(EstimationFailedError):
            estimate_illuminant_from_patches(samples, LAYOUT)

    def test_exposure_invariance(self):
        tint = (0.6, 1.0, 0.8)
        base = estimate_illuminant_from_patches(self._samples_for_tint(tint), LAYOUT)
        scaled_tint = tuple(0.5 * t for t in tint)
        scaled = estimate_illuminant_from_patches(self._samples_for_tint(scaled_tint), LAYOUT)
        assert angular_error(base, scaled) < 1e-9

    def test_agrees_with_brute_force_region_average(self):
        # Brute force: average every pixel of the usable achromatic sample
        # regions directly, then normalize.
        tint = np.array([0.7, 1.0, 0.9])
        img = blank_image()
        out, _ = composite_checker(img, LAYOUT, PLACEMENT)
        linear = LinearImage(np.clip(gamma_decode(out, 2.2).data * tint, 0, 1))
        samples = sample_patches(linear, LAYOUT, PLACEMENT)
        est = estimate_illuminant_from_patches(samples, LAYOUT)

        x0, y0, w, h = PLACEMENT.rect(LAYOUT)
        cell_w, cell_h = w / 6, h / 4
        pixels = []
        for idx in LAYOUT.achromatic_indices:
            med = np.asarray(samples[idx].median_rgb)
            if (med >= 0.98).any() or (med <= 0.02).any():
                continue
            r, c = divmod(idx, 6)
            cx = x0 + (c + 0.5) * cell_w
            cy = y0 + (r + 0.5) * cell_h
            half_w, half_h = cell_w * 0.25, cell_h * 0.25
            region = linear.data[int(round(cy - half_h)):int(round(cy + half_h)),
                                 int(round(cx - half_w)):int(round(cx + half_w))]
            pixels.append(region.reshape(-1, 3))
        brute = np.concatenate(pixels).mean(axis=0)
        assert angular_error(est, brute) < 0.05


class TestPlacementHelpers:
    def test_centered_default_fraction(self):
        p = centered_placement(640, 480)
        assert p.checker_width == round(0.32 * 480)
        assert p.center == (320, 240)

    def test_bbox_fit(self):
        p = placement_from_bbox((10, 10, 130, 70))
        x0, y0, w, h = p.rect(LAYOUT)
        assert w <= 120 and h <= 60
        assert x0 >= 10 and y0 >= 10

    def test_layout_validation(self):
        with pytest.raises(InvalidInputError):
            CheckerLayout(sample_margin=0.0)
        bad_colors = list(LAYOUT.patch_colors)
        bad_colors[20] = (0.5, 0.4, 0.5)
        with pytest.raises(InvalidInputError):
            CheckerLayout(patch_colors=tuple(bad_colors))
