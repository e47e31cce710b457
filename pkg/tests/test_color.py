import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from illumchart import (
    Illuminant,
    LinearImage,
    SrgbImage,
    angular_error,
    apply_white_balance,
    gamma_decode,
    gamma_encode,
    normalize_illuminant,
)
from illumchart.errors import InvalidInputError


def one_pixel(r, g, b):
    return LinearImage(np.array([[[r, g, b]]], dtype=float))


class TestGamma:
    def test_fixed_points(self):
        img = one_pixel(0.0, 1.0, 0.5)
        enc = gamma_encode(img, 2.2)
        assert enc.data[0, 0, 0] == 0.0
        assert enc.data[0, 0, 1] == 1.0
        # Independent oracle: exp(ln(0.5) / 2.2)
        assert enc.data[0, 0, 2] == pytest.approx(math.exp(math.log(0.5) / 2.2), abs=1e-12)
        assert enc.data[0, 0, 2] == pytest.approx(0.7297400528407231, abs=1e-12)

    def test_decode_inverse(self):
        enc = SrgbImage(np.array([[[0.0, 1.0, 0.7297400528407231]]]))
        dec = gamma_decode(enc, 2.2)
        assert dec.data[0, 0, 2] == pytest.approx(0.5, abs=1e-9)

    def test_roundtrip_dense(self):
        rng = np.random.default_rng(7)
        values = rng.uniform(0.0, 1.0, (100, 100, 3))
        img = LinearImage(values)
        back = gamma_decode(gamma_encode(img, 2.2), 2.2)
        assert np.abs(back.data - values).max() < 1e-6

    def test_super_unity_clamped_before_power(self):
        enc = gamma_encode(one_pixel(2.0, 3.0, 1.5), 2.2)
        assert (enc.data == 1.0).all()

    def test_invalid_gamma(self):
        with pytest.raises(InvalidInputError):
            gamma_encode(one_pixel(0.1, 0.1, 0.1), 0.0)
        with pytest.raises(InvalidInputError):
            gamma_decode(SrgbImage(np.zeros((1, 1, 3))), -1.0)

    def test_non_finite_pixels_rejected(self):
        with pytest.raises(InvalidInputError):
            LinearImage(np.array([[[np.nan, 0.0, 0.0]]]))
        with pytest.raises(InvalidInputError):
            SrgbImage(np.array([[[np.inf, 0.0, 0.0]]]))

    @given(st.floats(0.0, 1.0), st.floats(0.5, 4.0))
    def test_roundtrip_property(self, v, gamma):
        img = one_pixel(v, v, v)
        back = gamma_decode(gamma_encode(img, gamma), gamma)
        assert abs(back.data[0, 0, 0] - v) < 1e-6


class TestAngularError:
    def test_worked_cases(self):
        assert angular_error((1, 1, 1), (2, 2, 2)) == pytest.approx(0.0, abs=1e-9)
        assert angular_error((1, 0, 0), (0, 1, 0)) == pytest.approx(90.0, abs=1e-9)
        # cos(theta) = 1/2 by direct dot product: (1,1,0).(0,1,1) = 1, norms sqrt(2)
        assert angular_error((1, 1, 0), (0, 1, 1)) == pytest.approx(60.0, abs=1e-9)

    def test_zero_vector_rejected(self):
        with pytest.raises(InvalidInputError):
            angular_error((0, 0, 0), (1, 1, 1))
        with pytest.raises(InvalidInputError):
            angular_error((1, 1, 1), (0, 0, 0))

    @given(
        st.tuples(*[st.floats(0.01, 10)] * 3),
        st.tuples(*[st.floats(0.01, 10)] * 3),
        st.floats(0.01, 100),
        st.floats(0.01, 100),
    )
    def test_symmetry_and_scale_invariance(self, a, b, ka, kb):
        base = angular_error(a, b)
        assert angular_error(b, a) == pytest.approx(base, abs=1e-9)
        scaled = angular_error(np.array(a) * ka, np.array(b) * kb)
        assert scaled == pytest.approx(base, abs=1e-9)
        assert base >= 0

    @given(st.tuples(*[st.floats(0.01, 10)] * 3), st.floats(0.1, 10))
    def test_zero_iff_parallel(self, a, k):
        assert angular_error(a, np.array(a) * k) == pytest.approx(0.0, abs=1e-9)

    def test_arccos_clamp_absorbs_drift(self):
        v = (0.5773502691896258,) * 3
        assert angular_error(v, v) == 0.0


class TestNormalize:
    def test_direction_preserved(self):
        unit = normalize_illuminant((2, 0.0001, 0.0001))
        assert unit.r == pytest.approx(1.0, abs=1e-4)
        assert abs(unit.g) < 1e-4 and abs(unit.b) < 1e-4

    def test_345(self):
        unit = normalize_illuminant((3, 4, 0.0001))
        assert unit.r == pytest.approx(0.6, abs=1e-6)
        assert unit.g == pytest.approx(0.8, abs=1e-6)
        assert unit.b == pytest.approx(0.0, abs=1e-4)

    def test_symmetric(self):
        unit = normalize_illuminant((1, 1, 1))
        assert unit.r == unit.g == unit.b == pytest.approx(1 / math.sqrt(3))

    def test_rejects_zero_and_negative(self):
        with pytest.raises(InvalidInputError):
            normalize_illuminant((0, 0, 0))
        with pytest.raises(InvalidInputError):
            normalize_illuminant((1, -0.5, 1))

    def test_illuminant_must_be_unit(self):
        with pytest.raises(InvalidInputError):
            Illuminant(1.0, 1.0, 1.0)


class TestWhiteBalance:
    def test_self_correction_yields_neutral(self):
        illum = normalize_illuminant((0.5, 1.0, 2.0))
        img = one_pixel(0.5, 1.0, 2.0)
        out = apply_white_balance(img, illum)
        assert np.allclose(out.data, 1.0, atol=1e-9)

    def test_identity(self):
        illum = normalize_illuminant((1, 1, 1))
        rng = np.random.default_rng(3)
        img = LinearImage(rng.uniform(0, 1, (8, 8, 3)))
        out = apply_white_balance(img, illum)
        assert np.array_equal(out.data, img.data)

    def test_green_anchored_division(self):
        # Divide by (0.5, 1.0, 0.5): direct arithmetic oracle.
        illum = normalize_illuminant((0.6, 1.2, 0.6))
        out = apply_white_balance(one_pixel(0.3, 0.6, 0.3), illum)
        assert np.allclose(out.data, 0.6, atol=1e-12)

    def test_zero_component_rejected(self):
        illum = normalize_illuminant((1, 1, 0))
        with pytest.raises(InvalidInputError):
            apply_white_balance(one_pixel(0.1, 0.1, 0.1), illum)

    def test_neutral_patch_after_balance(self):
        rng = np.random.default_rng(11)
        tint = normalize_illuminant((0.8, 1.0, 0.6))
        base = rng.uniform(0.1, 0.5, (16, 16, 3))
        base[:4, :4] = 0.4  # a gray patch
        img = LinearImage(base * tint.as_array())
        out = apply_white_balance(img, tint)
        patch = out.data[:4, :4]
        assert np.abs(patch - patch[..., :1]).max() < 1e-6
