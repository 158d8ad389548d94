"""Matching evaluation: ranked candidates, Top-k accuracy, interference
sweeps and cross-pair similarity matrices.

Ranking is always target-against-pool with scores descending and ties
broken by ascending candidate id.  Top-k accuracy averages both matching
directions: every paired upper fragment seeks its lower counterpart and
vice versa, each against the full opposite-side pool (including every
interference fragment).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .baselines import cosine_similarity, dtw_distance, dtw_distance_batch
from .datastore import DatasetManifest, Fragment
from .features import EdgeVector, extract_edge_vector, role_for_group
from .matcher import EmbeddingModel, embed, embed_batch

DEFAULT_KS = (1, 5, 10, 20, 50, 100)

METHOD_NAMES = ("wisepanda", "dtw", "cosine", "random")


class EvaluationError(ValueError):
    """Raised for unusable evaluation inputs."""


class ProtocolError(EvaluationError):
    """Raised when a pool candidate shares the target's group."""


# --------------------------------------------------------------------------
# scorers


class Scorer:
    """Assigns a similarity (higher is better) to target/candidate vectors."""

    name = "scorer"

    def score(self, target: EdgeVector, candidate: EdgeVector) -> float:
        raise NotImplementedError

    def score_batch(self, target: EdgeVector, pool_matrix: np.ndarray) -> np.ndarray:
        """Scores against each pool row; default falls back to score()."""
        return np.asarray(
            [self.score(target, _wrap_row(row, target)) for row in pool_matrix]
        )


def _wrap_row(row: np.ndarray, like: EdgeVector) -> EdgeVector:
    role = "upper-bottom" if like.edge_role == "lower-top" else "lower-top"
    return EdgeVector(values=row - row.mean(), edge_role=role)


class MatcherScorer(Scorer):
    """Learned embedding matcher; confidence exp(-distance)."""

    name = "wisepanda"

    def __init__(self, model: EmbeddingModel):
        self.model = model

    def score(self, target, candidate) -> float:
        ea = embed(self.model, target)
        eb = embed(self.model, candidate)
        return float(np.exp(-np.linalg.norm(ea - eb)))

    def score_batch(self, target, pool_matrix) -> np.ndarray:
        et = embed(self.model, target)
        ep = embed_batch(self.model, pool_matrix)
        return np.exp(-np.linalg.norm(ep - et, axis=1))


class DTWScorer(Scorer):
    """Negated DTW distance, so larger still means more similar."""

    name = "dtw"

    def score(self, target, candidate) -> float:
        return -dtw_distance(target, candidate)

    def score_batch(self, target, pool_matrix) -> np.ndarray:
        return -dtw_distance_batch(target, pool_matrix)


class CosineScorer(Scorer):
    name = "cosine"

    def score(self, target, candidate) -> float:
        return cosine_similarity(target, candidate)

    def score_batch(self, target, pool_matrix) -> np.ndarray:
        t = target.values if isinstance(target, EdgeVector) else np.asarray(target, float)
        tn = float(np.linalg.norm(t))
        norms = np.linalg.norm(pool_matrix, axis=1)
        if tn == 0.0 or np.any(norms == 0.0):
            raise EvaluationError("cosine scoring hit a zero-length profile")
        return np.clip((pool_matrix @ t) / (norms * tn), -1.0, 1.0)


class RandomScorer(Scorer):
    """Seeded uniform scores; the chance floor every matcher must clear."""

    name = "random"

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def score(self, target, candidate) -> float:
        return float(self.rng.random())

    def score_batch(self, target, pool_matrix) -> np.ndarray:
        return self.rng.random(pool_matrix.shape[0])


def make_scorer(
    method: str, model: EmbeddingModel | None = None, seed: int = 0
) -> Scorer:
    if method == "wisepanda":
        if model is None:
            raise EvaluationError("the learned matcher needs a model")
        return MatcherScorer(model)
    if method == "dtw":
        return DTWScorer()
    if method == "cosine":
        return CosineScorer()
    if method == "random":
        return RandomScorer(seed)
    raise EvaluationError(f"unknown method {method!r}")


# --------------------------------------------------------------------------
# ranking


@dataclass
class RankedEntry:
    candidate_id: str
    score: float


@dataclass
class RankedList:
    """Candidates for one target, best first."""

    target_id: str
    entries: list[RankedEntry]
    rank_of_truth: int | None = None

    def validate(self) -> None:
        for prev, curr in zip(self.entries, self.entries[1:]):
            if curr.score > prev.score:
                raise EvaluationError("ranked scores must be non-increasing")
            if curr.score == prev.score and curr.candidate_id < prev.candidate_id:
                raise EvaluationError("ties must be ordered by ascending candidate id")
        ids = [e.candidate_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise EvaluationError("ranked list repeats a candidate")

    def top(self, k: int) -> list[RankedEntry]:
        return self.entries[: max(0, k)]


def _fragment_vector(frag: Fragment) -> EdgeVector:
    return extract_edge_vector(frag.heights, role_for_group(frag.group), frag.id)


def _sorted_entries(ids: list[str], scores: np.ndarray) -> list[RankedEntry]:
    order = sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))
    return [RankedEntry(candidate_id=ids[i], score=float(scores[i])) for i in order]


def rank_candidates(
    target: Fragment,
    pool: list[Fragment],
    scorer: Scorer,
    true_id: str | None = None,
) -> RankedList:
    """Rank a candidate pool for one target.

    Every pool fragment must carry the opposite group label; interference
    fragments enter pools relabeled to the candidate side (see
    :meth:`DatasetManifest.candidate_pool`).
    """
    if not pool:
        raise EvaluationError("candidate pool is empty")
    for frag in pool:
        if frag.group == target.group:
            raise ProtocolError(
                f"candidate {frag.id!r} shares the target's group {target.group!r}"
            )
    tvec = _fragment_vector(target)
    matrix = np.asarray([_fragment_vector(f).values for f in pool])
    scores = np.asarray(scorer.score_batch(tvec, matrix), dtype=np.float64)
    entries = _sorted_entries([f.id for f in pool], scores)
    rank = None
    if true_id is not None:
        for position, entry in enumerate(entries, start=1):
            if entry.candidate_id == true_id:
                rank = position
                break
    return RankedList(target_id=target.id, entries=entries, rank_of_truth=rank)


# --------------------------------------------------------------------------
# dataset-level evaluation


@dataclass
class TopKReport:
    method: str
    dataset: str
    ks: tuple[int, ...]
    accuracy: dict[int, float]
    n_targets: int
    pool_size: int

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "dataset": self.dataset,
            "ks": list(self.ks),
            "accuracy": {str(k): self.accuracy[k] for k in self.ks},
            "n_targets": self.n_targets,
            "pool_size": self.pool_size,
        }


def _truth_ranks(dataset: DatasetManifest, scorer: Scorer) -> tuple[list[int], int]:
    """Rank of the true counterpart for every paired fragment, both
    directions, computed against the full candidate pools."""
    ranks: list[int] = []
    pool_size = 0
    for group in ("upper", "lower"):
        targets = dataset.paired_fragments(group)
        pool = dataset.candidate_pool(group)
        pool_size = max(pool_size, len(pool))
        pool_ids = np.asarray([f.id for f in pool])
        matrix = np.asarray([_fragment_vector(f).values for f in pool])
        for target in targets:
            tvec = _fragment_vector(target)
            scores = np.asarray(scorer.score_batch(tvec, matrix), dtype=np.float64)
            true_id = dataset.true_match(target.id)
            where = np.nonzero(pool_ids == true_id)[0]
            if where.size != 1:
                raise EvaluationError(f"pool lacks the true match for {target.id!r}")
            s_true = scores[where[0]]
            better = scores > s_true
            tied_ahead = (scores == s_true) & (pool_ids < true_id)
            ranks.append(1 + int(better.sum()) + int(tied_ahead.sum()))
    return ranks, pool_size


def evaluate_topk(
    dataset: DatasetManifest,
    scorer: Scorer,
    ks: tuple[int, ...] = DEFAULT_KS,
) -> TopKReport:
    """Top-k accuracy (percent) over both matching directions."""
    if dataset.n_pairs == 0:
        raise EvaluationError("dataset has no ground-truth pairs")
    if not ks or any(k < 1 for k in ks):
        raise EvaluationError("ks must be positive")
    ranks, pool_size = _truth_ranks(dataset, scorer)
    arr = np.asarray(ranks)
    accuracy = {int(k): float(100.0 * np.mean(arr <= k)) for k in ks}
    return TopKReport(
        method=scorer.name,
        dataset=dataset.name,
        ks=tuple(int(k) for k in ks),
        accuracy=accuracy,
        n_targets=arr.size,
        pool_size=pool_size,
    )


def interference_sweep(
    dataset: DatasetManifest,
    scorer: Scorer,
    counts: tuple[int, ...],
    ks: tuple[int, ...] = DEFAULT_KS,
) -> list[TopKReport]:
    """Evaluate at increasing interference levels.

    ``counts`` must be non-decreasing; each entry keeps that many
    interference fragments (in id order) alongside all true pairs.
    """
    if not counts:
        raise EvaluationError("counts must be non-empty")
    if any(b < a for a, b in zip(counts, counts[1:])):
        raise EvaluationError("counts must be non-decreasing")
    reports = []
    for count in counts:
        sub = dataset.with_interference_count(count)
        reports.append(evaluate_topk(sub, scorer, ks))
    return reports


@dataclass
class SimilarityMatrix:
    """Upper-versus-lower score matrix over the true pairs, ground-truth
    matches on the diagonal."""

    upper_ids: list[str]
    lower_ids: list[str]
    scores: np.ndarray
    contrast: float

    def to_dict(self) -> dict:
        return {
            "upper_ids": self.upper_ids,
            "lower_ids": self.lower_ids,
            "scores": [[float(x) for x in row] for row in self.scores],
            "contrast": self.contrast,
        }


def similarity_matrix(dataset: DatasetManifest, scorer: Scorer) -> SimilarityMatrix:
    """Score every paired upper against every paired lower.

    Rows and columns follow ground-truth order, so entry (i, i) is a true
    pair.  Contrast is mean(diagonal) - mean(off-diagonal); a matcher that
    has learned anything pushes it above zero.
    """
    pairs = sorted(dataset.ground_truth, key=lambda p: p.upper_id)
    if not pairs:
        raise EvaluationError("dataset has no ground-truth pairs")
    uppers = [dataset.fragment(p.upper_id) for p in pairs]
    lowers = [dataset.fragment(p.lower_id) for p in pairs]
    lower_matrix = np.asarray([_fragment_vector(f).values for f in lowers])
    rows = []
    for frag in uppers:
        tvec = _fragment_vector(frag)
        rows.append(np.asarray(scorer.score_batch(tvec, lower_matrix), dtype=np.float64))
    scores = np.asarray(rows)
    n = scores.shape[0]
    diag = float(np.trace(scores) / n)
    if n > 1:
        off = float((scores.sum() - np.trace(scores)) / (n * n - n))
        contrast = diag - off
    else:
        contrast = 0.0
    return SimilarityMatrix(
        upper_ids=[f.id for f in uppers],
        lower_ids=[f.id for f in lowers],
        scores=scores,
        contrast=contrast,
    )
