"""Ranking and Top-k behavior pinned on hand-constructed fragments.

Sinusoids at distinct integer frequencies over 64 samples give cosine
scores we can predict on paper: a profile against itself scores ~1,
against its negation ~-1, and against a different frequency ~0.
"""

import numpy as np
import pytest

from slipforge.datastore import DatasetManifest, Fragment, GroundTruthPair
from slipforge.evaluation import (
    CosineScorer,
    DTWScorer,
    EvaluationError,
    MatcherScorer,
    ProtocolError,
    RandomScorer,
    RankedEntry,
    RankedList,
    evaluate_topk,
    interference_sweep,
    make_scorer,
    rank_candidates,
    similarity_matrix,
)
from slipforge.matcher import init_model
from slipforge.physics import PhysicsParams, generate_dataset

N = 64


def wave(freq: int, scale: float = 1.0) -> list[float]:
    i = np.arange(N)
    return list(scale * np.sin(2.0 * np.pi * freq * i / N))


def frag(fid: str, group: str, heights) -> Fragment:
    return Fragment(fid, group, list(heights))


class TestRankCandidates:
    def test_order_and_scores(self):
        target = frag("u0", "upper", wave(1))
        mixed = list(np.asarray(wave(1, 0.5)) + np.asarray(wave(2)))
        pool = [
            frag("l_c", "lower", wave(1, -1.0)),
            frag("l_a", "lower", wave(1)),
            frag("l_b", "lower", mixed),
        ]
        ranked = rank_candidates(target, pool, CosineScorer(), true_id="l_c")
        assert [e.candidate_id for e in ranked.entries] == ["l_a", "l_b", "l_c"]
        assert ranked.entries[0].score == pytest.approx(1.0, abs=1e-12)
        # cos(s1, 0.5*s1 + s2) = 0.5*|s1|^2 / (|s1| * sqrt(1.25)*|s1|) = 1/sqrt(5)
        assert ranked.entries[1].score == pytest.approx(1.0 / np.sqrt(5.0), abs=1e-9)
        assert ranked.entries[2].score == pytest.approx(-1.0, abs=1e-12)
        assert ranked.rank_of_truth == 3
        ranked.validate()

    def test_ties_break_by_ascending_id(self):
        target = frag("u0", "upper", wave(1))
        pool = [frag("l9", "lower", wave(1)), frag("l1", "lower", wave(1))]
        ranked = rank_candidates(target, pool, CosineScorer(), true_id="l9")
        assert [e.candidate_id for e in ranked.entries] == ["l1", "l9"]
        assert ranked.entries[0].score == ranked.entries[1].score
        assert ranked.rank_of_truth == 2

    def test_unknown_truth_leaves_rank_none(self):
        target = frag("u0", "upper", wave(1))
        pool = [frag("l0", "lower", wave(2))]
        assert rank_candidates(target, pool, CosineScorer()).rank_of_truth is None

    def test_same_group_candidate_rejected(self):
        target = frag("u0", "upper", wave(1))
        pool = [frag("u1", "upper", wave(2))]
        with pytest.raises(ProtocolError):
            rank_candidates(target, pool, CosineScorer())

    def test_empty_pool_rejected(self):
        with pytest.raises(EvaluationError):
            rank_candidates(frag("u0", "upper", wave(1)), [], CosineScorer())

    def test_validate_flags_disorder(self):
        bad = RankedList(
            target_id="t",
            entries=[RankedEntry("a", 0.1), RankedEntry("b", 0.9)],
        )
        with pytest.raises(EvaluationError):
            bad.validate()
        tied_wrong = RankedList(
            target_id="t",
            entries=[RankedEntry("b", 0.5), RankedEntry("a", 0.5)],
        )
        with pytest.raises(EvaluationError):
            tied_wrong.validate()
        duplicated = RankedList(
            target_id="t",
            entries=[RankedEntry("a", 0.9), RankedEntry("a", 0.1)],
        )
        with pytest.raises(EvaluationError):
            duplicated.validate()

    def test_top_slices(self):
        ranked = RankedList(
            target_id="t",
            entries=[RankedEntry("a", 0.9), RankedEntry("b", 0.1)],
        )
        assert [e.candidate_id for e in ranked.top(1)] == ["a"]
        assert len(ranked.top(10)) == 2
        assert ranked.top(0) == []


def two_pair_manifest() -> DatasetManifest:
    """Pair A matches itself perfectly; pair B's halves anti-correlate, so
    the decoy (score ~0) outranks B's truth (score -1) in both directions."""
    return DatasetManifest(
        name="hand",
        fragments=[
            frag("u0", "upper", wave(1)),
            frag("l0", "lower", wave(1)),
            frag("u1", "upper", wave(2)),
            frag("l1", "lower", wave(2, -1.0)),
        ],
        ground_truth=[GroundTruthPair("u0", "l0"), GroundTruthPair("u1", "l1")],
    )


class TestEvaluateTopK:
    def test_hand_accuracies(self):
        report = evaluate_topk(two_pair_manifest(), CosineScorer(), ks=(1, 2))
        assert report.accuracy[1] == 50.0
        assert report.accuracy[2] == 100.0
        assert report.n_targets == 4
        assert report.pool_size == 2
        assert report.method == "cosine"

    def test_tie_rule_in_full_evaluation(self):
        # The interference fragment duplicates both pair members, forcing
        # bit-equal scores; its id sorts first, pushing truth to rank 2.
        ds = DatasetManifest(
            name="tied",
            fragments=[
                frag("u0", "upper", wave(1)),
                frag("l9", "lower", wave(1)),
                frag("l1", "lower", wave(1)),
            ],
            ground_truth=[GroundTruthPair("u0", "l9")],
        )
        report = evaluate_topk(ds, CosineScorer(), ks=(1, 2))
        assert report.accuracy[1] == 0.0
        assert report.accuracy[2] == 100.0

    def test_to_dict_serializable(self):
        report = evaluate_topk(two_pair_manifest(), CosineScorer(), ks=(1, 2))
        doc = report.to_dict()
        assert doc["accuracy"] == {"1": 50.0, "2": 100.0}
        assert doc["ks"] == [1, 2]

    def test_ks_validation(self):
        ds = two_pair_manifest()
        with pytest.raises(EvaluationError):
            evaluate_topk(ds, CosineScorer(), ks=())
        with pytest.raises(EvaluationError):
            evaluate_topk(ds, CosineScorer(), ks=(0, 5))

    def test_no_pairs_rejected(self):
        ds = DatasetManifest(
            name="empty",
            fragments=[frag("x0", "upper", wave(1))],
            ground_truth=[],
        )
        with pytest.raises(EvaluationError):
            evaluate_topk(ds, CosineScorer())


class TestInterference:
    @pytest.fixture()
    def dataset(self):
        return generate_dataset(PhysicsParams(), n_pairs=8, n_interference=6, seed=3)

    def test_rank_never_improves_with_larger_pool(self, dataset):
        scorer = CosineScorer()
        base = dataset.with_interference_count(0)
        for group in ("upper", "lower"):
            small_pool = base.candidate_pool(group)
            full_pool = dataset.candidate_pool(group)
            for target in dataset.paired_fragments(group):
                true_id = dataset.true_match(target.id)
                r_small = rank_candidates(target, small_pool, scorer, true_id)
                r_full = rank_candidates(target, full_pool, scorer, true_id)
                assert r_full.rank_of_truth >= r_small.rank_of_truth

    def test_sweep_reports(self, dataset):
        reports = interference_sweep(dataset, CosineScorer(), counts=(0, 6), ks=(1, 5))
        assert len(reports) == 2
        assert reports[0].dataset.endswith("+0x")
        assert reports[1].dataset.endswith("+6x")
        assert reports[0].pool_size == 8
        assert reports[1].pool_size == 14
        for k in (1, 5):
            assert reports[1].accuracy[k] <= reports[0].accuracy[k]

    def test_sweep_validation(self, dataset):
        with pytest.raises(EvaluationError):
            interference_sweep(dataset, CosineScorer(), counts=())
        with pytest.raises(EvaluationError):
            interference_sweep(dataset, CosineScorer(), counts=(6, 0))


class TestSimilarityMatrix:
    def test_hand_contrast(self):
        ds = DatasetManifest(
            name="diag",
            fragments=[
                frag("u0", "upper", wave(1)),
                frag("l0", "lower", wave(1)),
                frag("u1", "upper", wave(2)),
                frag("l1", "lower", wave(2)),
            ],
            ground_truth=[GroundTruthPair("u0", "l0"), GroundTruthPair("u1", "l1")],
        )
        sim = similarity_matrix(ds, CosineScorer())
        assert sim.upper_ids == ["u0", "u1"]
        assert sim.lower_ids == ["l0", "l1"]
        assert sim.scores.shape == (2, 2)
        assert sim.scores[0, 0] == pytest.approx(1.0, abs=1e-12)
        assert sim.scores[1, 1] == pytest.approx(1.0, abs=1e-12)
        assert abs(sim.scores[0, 1]) < 1e-12
        assert abs(sim.scores[1, 0]) < 1e-12
        assert sim.contrast == pytest.approx(1.0, abs=1e-12)
        doc = sim.to_dict()
        assert doc["contrast"] == sim.contrast
        assert len(doc["scores"]) == 2

    def test_single_pair_contrast_zero(self):
        ds = DatasetManifest(
            name="one",
            fragments=[frag("u0", "upper", wave(1)), frag("l0", "lower", wave(1))],
            ground_truth=[GroundTruthPair("u0", "l0")],
        )
        assert similarity_matrix(ds, CosineScorer()).contrast == 0.0


class TestScorers:
    def test_make_scorer_names(self):
        model = init_model(seed=0)
        assert make_scorer("wisepanda", model).name == "wisepanda"
        assert make_scorer("dtw").name == "dtw"
        assert make_scorer("cosine").name == "cosine"
        assert make_scorer("random").name == "random"

    def test_wisepanda_needs_model(self):
        with pytest.raises(EvaluationError):
            make_scorer("wisepanda")

    def test_unknown_method(self):
        with pytest.raises(EvaluationError):
            make_scorer("psychic")

    @pytest.mark.parametrize("method", ["dtw", "cosine"])
    def test_batch_matches_scalar(self, method):
        # Full ranked lists must agree whether scoring row-by-row or batched.
        ds = generate_dataset(PhysicsParams(), n_pairs=4, n_interference=2, seed=9)
        scorer = make_scorer(method)
        target = ds.paired_fragments("upper")[0]
        pool = ds.candidate_pool("upper")
        batched = rank_candidates(target, pool, scorer)

        class ScalarOnly(type(scorer)):
            def score_batch(self, tgt, pool_matrix):
                return super(type(scorer), self).score_batch(tgt, pool_matrix)

        row_wise = rank_candidates(target, pool, ScalarOnly())
        for a, b in zip(batched.entries, row_wise.entries):
            assert a.candidate_id == b.candidate_id
            assert a.score == pytest.approx(b.score, abs=1e-9)

    def test_matcher_batch_matches_scalar(self):
        ds = generate_dataset(PhysicsParams(), n_pairs=3, n_interference=0, seed=4)
        scorer = MatcherScorer(init_model(seed=1))
        target = ds.paired_fragments("upper")[0]
        pool = ds.candidate_pool("upper")
        ranked = rank_candidates(target, pool, scorer)
        from slipforge.evaluation import _fragment_vector

        tvec = _fragment_vector(target)
        by_id = {f.id: f for f in pool}
        for entry in ranked.entries:
            lone = scorer.score(tvec, _fragment_vector(by_id[entry.candidate_id]))
            assert entry.score == pytest.approx(lone, abs=1e-12)

    def test_matcher_confidence_range(self):
        ds = generate_dataset(PhysicsParams(), n_pairs=3, n_interference=0, seed=4)
        scorer = MatcherScorer(init_model(seed=1))
        target = ds.paired_fragments("upper")[0]
        ranked = rank_candidates(target, ds.candidate_pool("upper"), scorer)
        for entry in ranked.entries:
            assert 0.0 < entry.score <= 1.0

    def test_random_scorer_deterministic(self):
        matrix = np.random.default_rng(2).normal(size=(8, 64))
        target = np.zeros(64)
        a = RandomScorer(seed=5).score_batch(target, matrix)
        b = RandomScorer(seed=5).score_batch(target, matrix)
        c = RandomScorer(seed=6).score_batch(target, matrix)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_dtw_scorer_negates_distance(self):
        from slipforge.baselines import dtw_distance

        a = np.asarray(wave(1))
        b = np.asarray(wave(2))
        assert DTWScorer().score(a, b) == -dtw_distance(a, b)
