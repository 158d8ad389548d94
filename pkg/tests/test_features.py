import numpy as np
import pytest

from oracles import interp_linear
from slipforge.features import (
    EDGE_DIM,
    EdgeInputError,
    EdgeVector,
    LOWER_TOP,
    UPPER_BOTTOM,
    extract_edge_vector,
    resample_profile,
    role_for_group,
)


def profile(n, seed=0, scale=1.0):
    return np.random.default_rng(seed).normal(0.0, scale, n)


class TestResample:
    @pytest.mark.parametrize("n", [2, 7, 63, 64, 65, 200])
    def test_matches_reference_interpolation(self, n):
        e = profile(n, seed=n)
        got = resample_profile(e, EDGE_DIM)
        want = interp_linear(e, EDGE_DIM)
        assert np.allclose(got, want, atol=1e-9, rtol=0)

    def test_native_length_is_exact_copy(self):
        e = profile(EDGE_DIM, seed=3)
        assert np.array_equal(resample_profile(e), e)

    def test_endpoints_preserved(self):
        e = profile(17, seed=4)
        out = resample_profile(e)
        assert out[0] == pytest.approx(e[0], abs=1e-12)
        assert out[-1] == pytest.approx(e[-1], abs=1e-12)

    def test_rejects_bad_profiles(self):
        with pytest.raises(EdgeInputError):
            resample_profile([1.0])
        with pytest.raises(EdgeInputError):
            resample_profile([1.0, float("nan"), 2.0])
        with pytest.raises(EdgeInputError):
            resample_profile(np.ones((3, 3)))


class TestExtract:
    def test_shape_and_centering(self):
        v = extract_edge_vector(profile(100, seed=5), LOWER_TOP)
        assert v.values.shape == (EDGE_DIM,)
        assert abs(v.values.mean()) <= 1e-9

    def test_centering_survives_large_offsets(self):
        e = profile(80, seed=6) + 1e6
        v = extract_edge_vector(e, UPPER_BOTTOM)
        assert abs(v.values.mean()) <= 1e-9

    def test_scale_is_preserved(self):
        # No scale normalization: doubling the relief doubles the vector.
        e = profile(EDGE_DIM, seed=7)
        small = extract_edge_vector(e, LOWER_TOP).values
        large = extract_edge_vector(2.0 * e, LOWER_TOP).values
        assert np.allclose(large, 2.0 * small, atol=1e-12)
        assert np.ptp(large) == pytest.approx(2.0 * np.ptp(small))

    def test_shift_invariance(self):
        # A constant height offset disappears with the mean.
        e = profile(50, seed=8)
        a = extract_edge_vector(e, LOWER_TOP).values
        b = extract_edge_vector(e + 42.0, LOWER_TOP).values
        assert np.allclose(a, b, atol=1e-9)

    def test_both_roles_share_coordinates(self):
        e = profile(90, seed=9)
        a = extract_edge_vector(e, UPPER_BOTTOM).values
        b = extract_edge_vector(e, LOWER_TOP).values
        assert np.array_equal(a, b)

    def test_metadata(self):
        v = extract_edge_vector(profile(64, seed=10), UPPER_BOTTOM, fragment_id="u7")
        assert v.source_fragment_id == "u7"
        assert v.edge_role == UPPER_BOTTOM

    def test_rejects_unknown_role(self):
        with pytest.raises(EdgeInputError):
            extract_edge_vector(profile(64), "sideways")


class TestEdgeVector:
    def test_rejects_wrong_shape(self):
        with pytest.raises(EdgeInputError):
            EdgeVector(values=np.zeros(10))

    def test_rejects_uncentered(self):
        with pytest.raises(EdgeInputError):
            EdgeVector(values=np.ones(EDGE_DIM))

    def test_rejects_nan(self):
        bad = np.zeros(EDGE_DIM)
        bad[0] = float("nan")
        with pytest.raises(EdgeInputError):
            EdgeVector(values=bad)


class TestRoles:
    def test_group_mapping(self):
        assert role_for_group("upper") == UPPER_BOTTOM
        assert role_for_group("lower") == LOWER_TOP

    def test_unknown_group(self):
        with pytest.raises(EdgeInputError):
            role_for_group("middle")
