import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sempri.exceptions import DataError
from sempri.fusion import blend, compute_weights, final_rescale, fuse, minmax_normalize

unit_maps = arrays(np.float64, (6, 7), elements=st.floats(0, 1))


def test_constant_implicit():
    w = compute_weights(np.full((3, 3), 0.25))
    assert w.alpha == 0.25 and w.gamma == 0.75


def test_zero_implicit():
    explicit = np.random.default_rng(0).random((4, 4))
    mixed, w = blend(explicit, np.zeros((4, 4)))
    assert w.alpha == 0 and w.gamma == 1
    assert not mixed.any()


def test_alpha_matches_sum(rng):
    imp = rng.random((13, 17))
    assert compute_weights(imp).alpha == pytest.approx(imp.sum() / imp.size, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(unit_maps, unit_maps)
def test_blend_contract(explicit, implicit):
    mixed, w = blend(explicit, implicit)
    assert w.alpha + w.gamma == 1.0
    assert np.all(mixed >= np.minimum(explicit, implicit))
    assert np.all(mixed <= np.maximum(explicit, implicit))
    oracle = w.alpha * explicit + w.gamma * implicit
    np.testing.assert_allclose(mixed, oracle, rtol=0, atol=1e-12)


def test_half_blend():
    explicit = np.array([[1.0, 0.0]])
    implicit = np.array([[0.0, 1.0]])
    mixed, w = blend(explicit, implicit)
    assert w.alpha == 0.5 and mixed[0, 0] == 0.5


@settings(max_examples=30, deadline=None)
@given(unit_maps)
def test_identity_pair(m):
    np.testing.assert_array_equal(fuse(m, m), final_rescale(m))


class TestFinalRescale:
    def test_already_bright(self):
        s = np.linspace(0, 1, 100).reshape(10, 10)
        out = final_rescale(s * 0.5 + 0.2)
        np.testing.assert_allclose(out, s, atol=1e-12)

    def test_power_law_exponent(self):
        # 50 zeros, 49 pixels at 0.25 and one at 1.0: p90 is 0.25, 1% reach 0.5
        s = np.zeros(100)
        s[50:99] = 0.25
        s[99] = 1.0
        s = s.reshape(10, 10)
        out = final_rescale(s)
        g = math.log(0.5) / math.log(0.25)
        assert g == pytest.approx(0.5)
        assert out.ravel()[60] == pytest.approx(0.5)
        assert out.ravel()[0] == 0 and out.ravel()[99] == 1
        assert np.mean(out >= 0.5) >= 0.1

    def test_constant(self):
        assert not final_rescale(np.full((3, 3), 0.7)).any()

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, (8, 8), elements=st.floats(0, 1)))
    def test_monotone(self, s):
        out = final_rescale(s)
        assert out.min() >= 0 and out.max() <= 1
        order = np.argsort(s.ravel(), kind="stable")
        assert np.all(np.diff(out.ravel()[order]) >= 0)

    def test_any_finite_range(self):
        assert final_rescale(np.array([[1.5, 3.5, 2.5]])).tolist() == [[0, 1, 0.5]]
        with pytest.raises(DataError):
            final_rescale(np.array([[np.nan, 1.0]]))

    def test_blend_rejects_out_of_range(self):
        with pytest.raises(DataError):
            blend(np.array([[1.5]]), np.array([[0.5]]))


def test_minmax():
    assert minmax_normalize(np.array([2.0, 4.0, 3.0])).tolist() == [0, 1, 0.5]
    assert minmax_normalize(np.array([5.0, 5.0])).tolist() == [0, 0]
