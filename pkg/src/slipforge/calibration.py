"""Physics calibration: make simulated edges statistically indistinguishable
from a reference population.

A candidate parameter vector ("genome") is scored by generating a batch of
edges, pooling them with the reference edges, projecting the pool to 2-d
with PCA, and measuring the silhouette between the generated and reference
labels.  A silhouette near zero means the clouds interpenetrate, so the
genetic algorithm minimizes |silhouette|.

PCA is computed by power iteration with deflation and silhouette directly
from its definition; both are small enough here that doing them by hand
keeps the dependency surface flat and the arithmetic auditable.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .features import EDGE_DIM, EdgeVector, LOWER_TOP, UPPER_BOTTOM, extract_edge_vector
from .physics import PhysicsParams, corrode_edges, simulate_curves

# Calibrated genes and their search bounds.  Fiber count and width describe
# the artifact geometry, not the fracture process, so they stay fixed.
GENE_BOUNDS: tuple[tuple[str, float, float], ...] = (
    ("theta_max", 0.3, 1.4),
    ("sigma_theta", 0.05, 0.8),
    ("rho", 0.0, 0.95),
    ("beta", 0.0, 0.5),
    ("base_rate", 0.0, 0.05),
    ("exposure_rate", 0.0, 0.5),
    ("corrosion_steps", 0.0, 40.0),
)

N_GENES = len(GENE_BOUNDS)

_POWER_ITERS = 200
_POWER_TOL = 1e-9
_RANK_TOL = 1e-12


class CalibrationError(ValueError):
    """Raised for unusable calibration inputs or configuration."""


class DegenerateInputError(CalibrationError):
    """Raised when the point cloud has fewer than 2 informative directions."""


def gene_lower_bounds() -> np.ndarray:
    return np.asarray([lo for _, lo, _ in GENE_BOUNDS])


def gene_upper_bounds() -> np.ndarray:
    return np.asarray([hi for _, _, hi in GENE_BOUNDS])


def decode_genome(genome: np.ndarray, template: PhysicsParams | None = None) -> PhysicsParams:
    """Turn a bounded gene vector into physics parameters.

    ``corrosion_steps`` is a count, so its gene is rounded; geometry fields
    come from ``template`` (defaults if omitted).
    """
    g = np.asarray(genome, dtype=np.float64)
    if g.shape != (N_GENES,):
        raise CalibrationError(f"genome must have {N_GENES} genes, got shape {g.shape}")
    base = template or PhysicsParams()
    values = {}
    for (name, lo, hi), x in zip(GENE_BOUNDS, g):
        if not (lo - 1e-9 <= x <= hi + 1e-9):
            raise CalibrationError(f"gene {name}={x} outside [{lo}, {hi}]")
        values[name] = x
    values["corrosion_steps"] = int(round(values["corrosion_steps"]))
    params = dataclasses.replace(base, **values)
    params.validate()
    return params


def encode_params(params: PhysicsParams) -> np.ndarray:
    """Inverse of :func:`decode_genome` for the calibrated genes."""
    return np.asarray([float(getattr(params, name)) for name, _, _ in GENE_BOUNDS])


def clip_genome(genome: np.ndarray) -> np.ndarray:
    return np.clip(genome, gene_lower_bounds(), gene_upper_bounds())


@dataclass
class ReferenceSet:
    """The edge population a calibration run tries to imitate."""

    vectors: list[EdgeVector]

    def __post_init__(self) -> None:
        if len(self.vectors) < 3:
            raise CalibrationError("reference set needs at least 3 edge vectors")

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray([v.values for v in self.vectors])

    def __len__(self) -> int:
        return len(self.vectors)


def sample_edge_matrix(params: PhysicsParams, n_edges: int, seed: int) -> np.ndarray:
    """Simulate ``n_edges`` corroded edges and extract their edge vectors.

    One fracture per edge; rows alternate between the upper and lower
    fragment so both corrosion directions are represented.
    """
    if n_edges < 1:
        raise CalibrationError("n_edges must be positive")
    rng = np.random.default_rng(seed)
    heights, _ = simulate_curves(params, n_edges, rng)
    upper, lower = corrode_edges(heights, heights, params)
    rows = np.where((np.arange(n_edges) % 2 == 0)[:, None], upper, lower)
    roles = [UPPER_BOTTOM if i % 2 == 0 else LOWER_TOP for i in range(n_edges)]
    return np.asarray(
        [extract_edge_vector(rows[i], roles[i]).values for i in range(n_edges)]
    )


def make_reference(params: PhysicsParams, n_edges: int = 200, seed: int = 0) -> ReferenceSet:
    """Sample a reference population from known physics parameters."""
    rng = np.random.default_rng(seed)
    heights, _ = simulate_curves(params, n_edges, rng)
    upper, lower = corrode_edges(heights, heights, params)
    vectors = []
    for i in range(n_edges):
        if i % 2 == 0:
            vectors.append(extract_edge_vector(upper[i], UPPER_BOTTOM, f"ref-{i}"))
        else:
            vectors.append(extract_edge_vector(lower[i], LOWER_TOP, f"ref-{i}"))
    return ReferenceSet(vectors=vectors)


def _as_point_matrix(points) -> np.ndarray:
    if isinstance(points, ReferenceSet):
        return points.matrix
    if isinstance(points, np.ndarray):
        arr = np.asarray(points, dtype=np.float64)
    else:
        rows = [p.values if isinstance(p, EdgeVector) else np.asarray(p, float) for p in points]
        arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 3:
        raise CalibrationError("need a 2-d point matrix with at least 3 rows")
    if not np.all(np.isfinite(arr)):
        raise CalibrationError("points contain non-finite values")
    return arr


def pca_2d(points) -> np.ndarray:
    """Project points onto their top two principal directions.

    Power iteration with deflation on the covariance matrix: 200 iterations
    or a 1e-9 movement tolerance, seeded start vector, sign fixed so each
    component's largest-magnitude entry is positive.  Raises
    :class:`DegenerateInputError` when the cloud has rank below 2.
    """
    X = _as_point_matrix(points)
    Xc = X - X.mean(axis=0)
    n, d = Xc.shape
    if d < 2:
        raise DegenerateInputError("points have fewer than 2 dimensions")
    cov = (Xc.T @ Xc) / (n - 1)
    total = float(np.trace(cov))
    if total <= 0.0:
        raise DegenerateInputError("point cloud has no variance")

    start_rng = np.random.default_rng(0)
    components = []
    eigenvalues = []
    for _ in range(2):
        v = start_rng.standard_normal(d)
        v /= np.linalg.norm(v)
        for _ in range(_POWER_ITERS):
            w = cov @ v
            norm = float(np.linalg.norm(w))
            if norm <= _RANK_TOL * total:
                break
            w /= norm
            if float(np.linalg.norm(w - v)) < _POWER_TOL:
                v = w
                break
            v = w
        lam = float(v @ cov @ v)
        if lam <= _RANK_TOL * total:
            raise DegenerateInputError("point cloud has rank below 2")
        peak = int(np.argmax(np.abs(v)))
        if v[peak] < 0.0:
            v = -v
        components.append(v)
        eigenvalues.append(lam)
        cov = cov - lam * np.outer(v, v)
    return Xc @ np.column_stack(components)


def silhouette(points: np.ndarray, labels: Sequence[int]) -> float:
    """Mean silhouette coefficient for a binary labeling, Euclidean metric.

    For each point, a is its mean distance to its own cluster (excluding
    itself), b its mean distance to the other cluster, and the coefficient
    is (b - a) / max(a, b), taken as 0 when both means vanish.
    """
    P = np.asarray(points, dtype=np.float64)
    if P.ndim != 2:
        raise CalibrationError("points must form a 2-d matrix")
    y = np.asarray(labels)
    if y.shape != (P.shape[0],):
        raise CalibrationError("labels must align with points")
    uniq = np.unique(y)
    if uniq.size != 2:
        raise CalibrationError(f"silhouette needs exactly 2 labels, got {uniq.size}")
    mask_a = y == uniq[0]
    if mask_a.sum() < 2 or (~mask_a).sum() < 2:
        raise CalibrationError("each cluster needs at least 2 points")

    diff = P[:, None, :] - P[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    scores = np.empty(P.shape[0])
    for i in range(P.shape[0]):
        own = mask_a if mask_a[i] else ~mask_a
        other = ~own
        a = float(dist[i, own].sum() / (own.sum() - 1))
        b = float(dist[i, other].mean())
        top = max(a, b)
        scores[i] = 0.0 if top == 0.0 else (b - a) / top
    return float(scores.mean())


def fitness(
    genome: np.ndarray,
    reference: ReferenceSet,
    n_samples: int | None = None,
    seed: int = 0,
) -> float:
    """|silhouette| between generated and reference edges in PCA space.

    Lower is better; zero means the generated cloud is indistinguishable
    from the reference in the projected plane.
    """
    params = decode_genome(genome)
    m = n_samples if n_samples is not None else len(reference)
    generated = sample_edge_matrix(params, m, seed)
    ref = reference.matrix
    pooled = np.vstack([generated, ref])
    labels = np.concatenate([np.zeros(len(generated), int), np.ones(len(ref), int)])
    projected = pca_2d(pooled)
    return abs(silhouette(projected, labels))


@dataclass
class GAConfig:
    population_size: int = 24
    generations: int = 30
    crossover_rate: float = 0.9
    mutation_rate: float = 0.2
    mutation_sigma: float = 0.1
    tournament_k: int = 3
    elite_count: int = 1
    n_samples: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size < 4:
            raise CalibrationError("population_size must be at least 4")
        if self.generations < 1:
            raise CalibrationError("generations must be positive")
        for name in ("crossover_rate", "mutation_rate"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise CalibrationError(f"{name} must lie in [0, 1]")
        if self.mutation_sigma < 0.0:
            raise CalibrationError("mutation_sigma must be non-negative")
        if not (1 <= self.tournament_k <= self.population_size):
            raise CalibrationError("tournament_k must lie in 1..population_size")
        if not (0 <= self.elite_count < self.population_size):
            raise CalibrationError("elite_count must lie in 0..population_size-1")


def _tournament(objs: np.ndarray, k: int, rng: np.random.Generator) -> int:
    contestants = rng.choice(objs.size, size=k, replace=False)
    return int(contestants[np.argmin(objs[contestants])])


def _blx_crossover(p1: np.ndarray, p2: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    lo = np.minimum(p1, p2)
    hi = np.maximum(p1, p2)
    span = hi - lo
    return rng.uniform(lo - 0.5 * span, hi + 0.5 * span)


def calibrate(
    reference: ReferenceSet,
    config: GAConfig | None = None,
    initial_population: np.ndarray | None = None,
    progress: Callable[[int, float], None] | None = None,
) -> tuple[np.ndarray, list[float]]:
    """Search gene space for parameters that imitate the reference edges.

    Tournament selection, blend crossover, Gaussian mutation scaled to each
    gene's range, and single-elite carryover.  All candidates in one run are
    scored with one fixed evaluation seed, so the returned best-objective
    history (|silhouette|, starting with the initial population) is
    non-increasing.  Returns (best genome, history).
    """
    cfg = config or GAConfig()
    rng = np.random.default_rng(cfg.seed)
    eval_seed = int(rng.integers(0, 2**31 - 1))
    lo = gene_lower_bounds()
    hi = gene_upper_bounds()
    sigma = cfg.mutation_sigma * (hi - lo)

    if initial_population is not None:
        pop = np.asarray(initial_population, dtype=np.float64)
        if pop.ndim != 2 or pop.shape != (cfg.population_size, N_GENES):
            raise CalibrationError(
                f"initial population must have shape ({cfg.population_size}, {N_GENES})"
            )
        pop = clip_genome(pop)
    else:
        pop = rng.uniform(lo, hi, size=(cfg.population_size, N_GENES))

    def score(genome: np.ndarray) -> float:
        return fitness(genome, reference, cfg.n_samples, eval_seed)

    objs = np.asarray([score(g) for g in pop])
    history = [float(objs.min())]
    if progress is not None:
        progress(0, history[-1])

    for generation in range(1, cfg.generations + 1):
        elite_order = np.argsort(objs, kind="stable")[: cfg.elite_count]
        new_pop = [pop[i].copy() for i in elite_order]
        new_objs = [float(objs[i]) for i in elite_order]
        while len(new_pop) < cfg.population_size:
            p1 = pop[_tournament(objs, cfg.tournament_k, rng)]
            p2 = pop[_tournament(objs, cfg.tournament_k, rng)]
            if rng.random() < cfg.crossover_rate:
                child = _blx_crossover(p1, p2, rng)
            else:
                child = p1.copy()
            mask = rng.random(N_GENES) < cfg.mutation_rate
            child = child + mask * rng.standard_normal(N_GENES) * sigma
            child = clip_genome(child)
            new_pop.append(child)
            new_objs.append(score(child))
        pop = np.asarray(new_pop)
        objs = np.asarray(new_objs)
        history.append(float(objs.min()))
        if progress is not None:
            progress(generation, history[-1])

    best = int(np.argmin(objs))
    return pop[best].copy(), history
