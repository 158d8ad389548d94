import numpy as np
import pytest

from oracles import dtw_bruteforce
from slipforge.baselines import (
    ScorerInputError,
    cosine_similarity,
    dtw_distance,
    dtw_distance_batch,
    random_similarity,
)


class TestDTW:
    def test_hand_example(self):
        # a = [1, 2, 3], b = [2, 3].  Cost grid |a_i - b_j|:
        #   [[1, 2],
        #    [0, 1],
        #    [1, 0]]
        # Best alignment: (1,2) (2,2) (3,3) with cost 1 + 0 + 0 = 1.
        assert dtw_distance([1.0, 2.0, 3.0], [2.0, 3.0]) == 1.0

    def test_identical_sequences_zero(self):
        x = np.random.default_rng(0).normal(0, 2, 10)
        assert dtw_distance(x, x) == 0.0

    def test_single_elements(self):
        assert dtw_distance([0.0], [0.0]) == 0.0
        assert dtw_distance([0.0, 0.0], [1.0]) == 2.0

    def test_symmetric(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(0, 1, 6), rng.normal(0, 1, 4)
        assert dtw_distance(a, b) == dtw_distance(b, a)

    @pytest.mark.parametrize("case", range(40))
    def test_matches_exhaustive_enumeration(self, case):
        rng = np.random.default_rng(case)
        a = rng.normal(0.0, 1.0, int(rng.integers(1, 7)))
        b = rng.normal(0.0, 1.0, int(rng.integers(1, 7)))
        assert dtw_distance(a, b) == dtw_bruteforce(a, b)

    def test_batch_equals_scalar(self):
        rng = np.random.default_rng(2)
        t = rng.normal(0, 1, 12)
        pool = rng.normal(0, 1, (7, 9))
        batch = dtw_distance_batch(t, pool)
        for i in range(7):
            assert batch[i] == dtw_distance(t, pool[i])

    def test_rejects_bad_inputs(self):
        with pytest.raises(ScorerInputError):
            dtw_distance([], [1.0])
        with pytest.raises(ScorerInputError):
            dtw_distance([1.0], [float("nan")])
        with pytest.raises(ScorerInputError):
            dtw_distance_batch([1.0], np.zeros((0, 3)))


class TestCosine:
    def test_known_values(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0, abs=1e-15)
        assert cosine_similarity([1.0, 2.0], [2.0, 4.0]) == pytest.approx(1.0)
        assert cosine_similarity([1.0, 0.0], [-1.0, 0.0]) == pytest.approx(-1.0)
        assert cosine_similarity([1.0, 0.0], [1.0, 1.0]) == pytest.approx(
            1.0 / np.sqrt(2.0)
        )

    def test_bounded(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a, b = rng.normal(0, 1, 8), rng.normal(0, 1, 8)
            assert -1.0 <= cosine_similarity(a, b) <= 1.0

    def test_scale_invariant(self):
        rng = np.random.default_rng(4)
        a, b = rng.normal(0, 1, 8), rng.normal(0, 1, 8)
        assert cosine_similarity(a, b) == pytest.approx(
            cosine_similarity(3.0 * a, 0.5 * b), abs=1e-12
        )

    def test_zero_vector_rejected(self):
        with pytest.raises(ScorerInputError):
            cosine_similarity([0.0, 0.0], [1.0, 1.0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ScorerInputError):
            cosine_similarity([1.0, 2.0], [1.0, 2.0, 3.0])


class TestRandom:
    def test_range_and_determinism(self):
        rng = np.random.default_rng(5)
        values = [random_similarity(rng) for _ in range(100)]
        assert all(0.0 <= v < 1.0 for v in values)
        rng2 = np.random.default_rng(5)
        assert values[:10] == [random_similarity(rng2) for _ in range(10)]
