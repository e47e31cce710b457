import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import ndimage

from illumchart import PyramidConfig, downsample_avg2, gaussian_blur3, high_freq_extract, upsample2
from illumchart.errors import InvalidInputError
from illumchart.tensorfile import read_tensor, write_tensor

KERNEL_3X3 = np.outer([1, 2, 1], [1, 2, 1]) / 16.0


# ---------------------------------------------------------------- oracles
# Deliberately different machinery from the implementation: scipy full-kernel
# convolution, explicit Python loops for pooling and bilinear resampling.

def oracle_blur(plane):
    out = np.empty_like(plane, dtype=float)
    for c in range(plane.shape[2]):
        out[:, :, c] = ndimage.convolve(plane[:, :, c].astype(float), KERNEL_3X3, mode="nearest")
    return out


def oracle_downsample(plane):
    h, w, c = plane.shape
    src = plane
    if h % 2:
        src = np.concatenate([src, src[-1:]], axis=0)
    if w % 2:
        src = np.concatenate([src, src[:, -1:]], axis=1)
    hh, ww = src.shape[0] // 2, src.shape[1] // 2
    out = np.zeros((hh, ww, c))
    for i in range(hh):
        for j in range(ww):
            out[i, j] = src[2 * i:2 * i + 2, 2 * j:2 * j + 2].mean(axis=(0, 1))
    return out


def oracle_upsample(plane, th, tw):
    h, w, c = plane.shape
    out = np.zeros((th, tw, c))
    for i in range(th):
        y = 0.0 if th == 1 or h == 1 else i * (h - 1) / (th - 1)
        y0 = min(int(np.floor(y)), h - 2) if h > 1 else 0
        fy = y - y0
        for j in range(tw):
            x = 0.0 if tw == 1 or w == 1 else j * (w - 1) / (tw - 1)
            x0 = min(int(np.floor(x)), w - 2) if w > 1 else 0
            fx = x - x0
            tl = plane[y0, x0]
            tr = plane[y0, min(x0 + 1, w - 1)]
            bl = plane[min(y0 + 1, h - 1), x0]
            br = plane[min(y0 + 1, h - 1), min(x0 + 1, w - 1)]
            top = tl * (1 - fx) + tr * fx
            bottom = bl * (1 - fx) + br * fx
            out[i, j] = top * (1 - fy) + bottom * fy
    return out


def oracle_high_freq(plane, levels):
    h, w, channels = plane.shape
    result = np.zeros_like(plane, dtype=float)
    for c in range(channels):
        curr = plane[:, :, c:c + 1].astype(float)
        for level in range(levels):
            blurred = oracle_blur(curr)
            band = curr - blurred
            if level == 0:
                result[:, :, c:c + 1] = band
            else:
                result[:, :, c:c + 1] += oracle_upsample(band, h, w)
            curr = oracle_downsample(blurred)
    return result


# ------------------------------------------------------------------- blur

class TestBlur:
    def test_constant_plane_fixed_point(self):
        plane = np.full((9, 7, 2), 3.25)
        assert np.array_equal(gaussian_blur3(plane), plane)

    def test_impulse_center_weight(self):
        plane = np.zeros((9, 9))
        plane[4, 4] = 1.0
        out = gaussian_blur3(plane)
        # Direct convolution oracle: center tap of the 3x3 kernel is 4/16.
        assert out[4, 4] == pytest.approx(0.25, abs=1e-15)
        assert out[4, 3] == pytest.approx(2 / 16, abs=1e-15)
        assert out[3, 3] == pytest.approx(1 / 16, abs=1e-15)

    def test_matches_full_kernel_convolution(self, rng):
        plane = rng.normal(size=(17, 13, 3))
        assert np.abs(gaussian_blur3(plane) - oracle_blur(plane)).max() < 1e-12

    def test_linearity(self, rng):
        x = rng.normal(size=(12, 12, 2))
        y = rng.normal(size=(12, 12, 2))
        lhs = gaussian_blur3(2.5 * x - 1.25 * y)
        rhs = 2.5 * gaussian_blur3(x) - 1.25 * gaussian_blur3(y)
        assert np.abs(lhs - rhs).max() < 1e-6


class TestDownsample:
    def test_constant(self):
        out = downsample_avg2(np.full((8, 6), 2.5))
        assert out.shape == (4, 3)
        assert (out == 2.5).all()

    def test_block_mean(self):
        out = downsample_avg2(np.array([[0.0, 0.0], [4.0, 4.0]]))
        assert out.shape == (1, 1)
        assert out[0, 0] == 2.0

    def test_checkerboard_averages_to_half(self):
        board = np.indices((4, 4)).sum(axis=0) % 2
        assert (downsample_avg2(board.astype(float)) == 0.5).all()

    def test_odd_dims_replicate(self, rng):
        plane = rng.normal(size=(5, 7, 2))
        assert np.abs(downsample_avg2(plane) - oracle_downsample(plane)).max() < 1e-12

    def test_degenerate_rejected(self):
        with pytest.raises(InvalidInputError):
            downsample_avg2(np.ones((1, 1)))


class TestUpsample:
    def test_constant(self):
        out = upsample2(np.full((3, 3), 1.75), 7, 9)
        assert out.shape == (7, 9)
        assert (out == 1.75).all()

    def test_ramp_midpoints(self):
        ramp = np.arange(4.0).reshape(1, 4)
        out = upsample2(ramp, 1, 7)
        assert np.allclose(out[0], np.arange(7) * 0.5)

    def test_2x2_to_4x4_frozen_oracle(self):
        plane = np.array([[0.0, 1.0], [2.0, 3.0]])
        out = upsample2(plane, 4, 4)
        # Corner-aligned bilinear of f(y, x) = 2y + x over the unit square.
        thirds = np.arange(4) / 3.0
        expected = 2 * thirds[:, None] + thirds[None, :]
        assert np.abs(out - expected).max() < 1e-12

    def test_matches_loop_oracle(self, rng):
        plane = rng.normal(size=(5, 4, 3))
        out = upsample2(plane, 11, 9)
        assert np.abs(out - oracle_upsample(plane, 11, 9)).max() < 1e-12

    def test_shrinking_rejected(self):
        with pytest.raises(InvalidInputError):
            upsample2(np.ones((4, 4)), 2, 8)


class TestHighFreqExtract:
    @pytest.mark.parametrize("levels", [1, 2, 3])
    def test_constant_maps_to_zero(self, levels):
        plane = np.full((16, 16, 3), 0.8)
        out = high_freq_extract(plane, PyramidConfig(levels=levels))
        assert np.abs(out).max() <= 1e-6

    def test_single_level_is_unsharp_residual(self, rng):
        plane = rng.normal(size=(10, 14, 2))
        out = high_freq_extract(plane, PyramidConfig(levels=1))
        assert np.abs(out - (plane - gaussian_blur3(plane))).max() <= 1e-7

    @pytest.mark.parametrize("levels", [1, 2, 3])
    def test_matches_step_by_step_oracle(self, rng, levels):
        plane = rng.normal(size=(16, 16, 4))
        out = high_freq_extract(plane, PyramidConfig(levels=levels))
        assert out.shape == plane.shape
        assert np.abs(out - oracle_high_freq(plane, levels)).max() < 1e-6

    def test_linearity(self, rng):
        cfg = PyramidConfig(levels=2)
        x = rng.normal(size=(16, 16))
        y = rng.normal(size=(16, 16))
        lhs = high_freq_extract(1.5 * x + 0.25 * y, cfg)
        rhs = 1.5 * high_freq_extract(x, cfg) + 0.25 * high_freq_extract(y, cfg)
        assert np.abs(lhs - rhs).max() < 1e-6

    def test_mean_suppression_on_smooth_planes(self, rng):
        for _ in range(10):
            rough = rng.uniform(0.2, 1.0, (32, 32))
            smooth = rough
            for _ in range(4):
                smooth = gaussian_blur3(smooth)
            out = high_freq_extract(smooth, PyramidConfig(levels=2))
            assert abs(out.mean()) <= 0.02 * abs(smooth.mean()) + 1e-6

    def test_channel_independence(self, rng):
        cfg = PyramidConfig(levels=2)
        plane = rng.normal(size=(16, 16, 3))
        stacked = high_freq_extract(plane, cfg)
        for c in range(3):
            single = high_freq_extract(plane[:, :, c], cfg)
            assert np.array_equal(stacked[:, :, c], single)

    def test_too_small_rejected(self):
        with pytest.raises(InvalidInputError):
            high_freq_extract(np.ones((4, 4)), PyramidConfig(levels=3))

    def test_level_bounds(self):
        with pytest.raises(InvalidInputError):
            PyramidConfig(levels=0)
        with pytest.raises(InvalidInputError):
            PyramidConfig(levels=7)

    @settings(max_examples=20)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 3))
    def test_oracle_equality_property(self, seed, levels):
        gen = np.random.default_rng(seed)
        plane = gen.normal(size=(16, 16, 2))
        out = high_freq_extract(plane, PyramidConfig(levels=levels))
        assert np.abs(out - oracle_high_freq(plane, levels)).max() < 1e-6


class TestGoldenFiles:
    def test_committed_goldens_match_implementation(self):
        from pathlib import Path

        golden = Path(__file__).resolve().parent.parent / "golden"
        inputs = sorted(p for p in golden.glob("*.tnsr") if ".hfe_" not in p.name)
        assert inputs, "golden tensor inputs missing; run scripts/make_golden_tensors.py"
        for src in inputs:
            plane, levels = read_tensor(src)
            assert levels == 0
            for out_path in sorted(golden.glob(f"{src.stem}.hfe_l*.tnsr")):
                expected, lv = read_tensor(out_path)
                mine = high_freq_extract(plane.astype(np.float64), PyramidConfig(levels=lv))
                assert np.abs(mine - expected).max() <= 1e-5, out_path.name


class TestTensorFile:
    def test_roundtrip(self, rng, tmp_path):
        plane = rng.normal(size=(8, 6, 4)).astype(np.float32)
        path = tmp_path / "plane.tnsr"
        write_tensor(path, plane, levels=2)
        back, levels = read_tensor(path)
        assert levels == 2
        assert np.array_equal(back, plane)

    def test_truncated_rejected(self, rng, tmp_path):
        path = tmp_path / "plane.tnsr"
        write_tensor(path, rng.normal(size=(4, 4, 1)))
        data = path.read_bytes()
        path.write_bytes(data[:-3])
        from illumchart.errors import DataError

        with pytest.raises(DataError):
            read_tensor(path)
