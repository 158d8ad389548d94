"""Fracture and corrosion simulation for slip-shaped artifacts.

A slip is a row of ``n_fibers`` vertical fiber bundles of width
``fiber_width``.  A transverse fracture breaks the bundles left to right;
each bundle's break angle is drawn from a truncated normal whose mean pulls
toward the previous angle (stress persistence, ``rho``) and back toward the
original crack plane (``beta`` times the accumulated height offset).  The
break heights form a curve shared by both fresh fragments.

Corrosion then erodes each fragment's fracture edge independently for a
number of synchronous steps.  Material protruding past its neighbors is
extra exposed: exposure is the sum of positive height excesses over the two
adjacent fibers (one at the ends), and each step removes
``base_rate + exposure_rate * exposure`` from the edge.  The gap between
the two edges can only grow, never shrink.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .datastore import DatasetManifest, Fragment, GroundTruthPair

_TRUNC_ATTEMPTS = 64


class ParameterError(ValueError):
    """A physics parameter is outside its allowed domain."""


@dataclass(frozen=True)
class PhysicsParams:
    """Knobs of the fracture and corrosion processes.

    Defaults are the calibrated working point used for synthetic datasets;
    see :mod:`slipforge.calibration` for how such a point is found.
    """

    n_fibers: int = 64
    fiber_width: float = 1.0
    theta_max: float = 1.1
    sigma_theta: float = 0.3
    rho: float = 0.55
    beta: float = 0.12
    base_rate: float = 0.01
    exposure_rate: float = 0.25
    corrosion_steps: int = 18
    seed: int = 0

    def validate(self) -> None:
        if self.n_fibers < 2:
            raise ParameterError("n_fibers must be at least 2")
        if not (self.fiber_width > 0.0):
            raise ParameterError("fiber_width must be positive")
        if not (0.0 < self.theta_max < math.pi / 2):
            raise ParameterError("theta_max must lie in (0, pi/2)")
        if not (self.sigma_theta > 0.0):
            raise ParameterError("sigma_theta must be positive")
        if not (0.0 <= self.rho < 1.0):
            raise ParameterError("rho must lie in [0, 1)")
        if self.beta < 0.0:
            raise ParameterError("beta must be non-negative")
        if self.base_rate < 0.0:
            raise ParameterError("base_rate must be non-negative")
        if self.exposure_rate < 0.0:
            raise ParameterError("exposure_rate must be non-negative")
        if self.corrosion_steps < 0:
            raise ParameterError("corrosion_steps must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "PhysicsParams":
        try:
            params = cls(
                n_fibers=int(doc["n_fibers"]),
                fiber_width=float(doc["fiber_width"]),
                theta_max=float(doc["theta_max"]),
                sigma_theta=float(doc["sigma_theta"]),
                rho=float(doc["rho"]),
                beta=float(doc["beta"]),
                base_rate=float(doc["base_rate"]),
                exposure_rate=float(doc["exposure_rate"]),
                corrosion_steps=int(doc["corrosion_steps"]),
                seed=int(doc.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParameterError(f"malformed physics params: {exc}") from exc
        params.validate()
        return params


@dataclass
class FractureCurve:
    """Break heights and angles of one simulated fracture."""

    heights: np.ndarray
    angles: np.ndarray

    def __post_init__(self) -> None:
        self.heights = np.asarray(self.heights, dtype=np.float64)
        self.angles = np.asarray(self.angles, dtype=np.float64)


@dataclass
class FragmentPair:
    """The two fragments produced by one fracture, after any corrosion.

    ``upper_edge`` is the underside of the upper fragment and
    ``lower_edge`` the top of the lower fragment, both in the shared height
    coordinate.  Fresh pairs have identical edges; corrosion only widens
    the gap, so ``upper_edge >= lower_edge`` holds elementwise.
    """

    pair_id: str
    upper_edge: np.ndarray
    lower_edge: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.upper_edge = np.asarray(self.upper_edge, dtype=np.float64)
        self.lower_edge = np.asarray(self.lower_edge, dtype=np.float64)
        if self.upper_edge.shape != self.lower_edge.shape or self.upper_edge.ndim != 1:
            raise ValueError("pair edges must be 1-d arrays of equal length")
        if np.any(self.upper_edge - self.lower_edge < -1e-12):
            raise ValueError("upper edge dips below lower edge")

    @property
    def gap(self) -> np.ndarray:
        return self.upper_edge - self.lower_edge


def _truncated_normal(
    mu: np.ndarray, sigma: float, bound: float, rng: np.random.Generator
) -> np.ndarray:
    """Sample ~N(mu, sigma^2) conditioned on |x| <= bound.

    Rejection sampling, capped at 64 attempts per element; stragglers are
    clamped to the bound, which matters only when mu sits far outside it.
    """
    x = rng.normal(mu, sigma)
    bad = np.abs(x) > bound
    for _ in range(_TRUNC_ATTEMPTS - 1):
        if not bad.any():
            break
        x[bad] = rng.normal(mu[bad], sigma)
        bad = np.abs(x) > bound
    return np.clip(x, -bound, bound)


def simulate_curves(
    params: PhysicsParams, n_curves: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate ``n_curves`` independent fractures in one vectorized pass.

    Returns (heights, angles), each of shape (n_curves, n_fibers).  Heights
    start at 0 for the first fiber, and consecutive heights never differ by
    more than fiber_width * tan(theta_max).
    """
    params.validate()
    if n_curves < 1:
        raise ParameterError("n_curves must be positive")
    n = params.n_fibers
    heights = np.zeros((n_curves, n))
    angles = np.zeros((n_curves, n))
    theta = _truncated_normal(
        np.zeros(n_curves), params.sigma_theta, params.theta_max, rng
    )
    angles[:, 0] = theta
    h = np.zeros(n_curves)
    for i in range(1, n):
        mu = params.rho * theta - params.beta * h
        theta = _truncated_normal(mu, params.sigma_theta, params.theta_max, rng)
        h = h + params.fiber_width * np.tan(theta)
        angles[:, i] = theta
        heights[:, i] = h
    return heights, angles


def simulate_fracture(params: PhysicsParams, rng: np.random.Generator) -> FractureCurve:
    """Simulate a single fracture curve."""
    heights, angles = simulate_curves(params, 1, rng)
    return FractureCurve(heights=heights[0], angles=angles[0])


def _upward_exposure(edges: np.ndarray) -> np.ndarray:
    """Positive height excess of each fiber over its neighbors, rowwise.

    Boundary fibers have one neighbor and contribute a single term.
    """
    excess = np.zeros_like(edges)
    left = edges[:, 1:] - edges[:, :-1]
    right = edges[:, :-1] - edges[:, 1:]
    excess[:, 1:] += np.maximum(left, 0.0)
    excess[:, :-1] += np.maximum(right, 0.0)
    return excess


def corrode_edges(
    upper: np.ndarray, lower: np.ndarray, params: PhysicsParams
) -> tuple[np.ndarray, np.ndarray]:
    """Corrode batches of upper/lower edges (rows) for ``corrosion_steps``.

    Exposures are computed from the state at the start of each step and
    applied synchronously.  Lower edges lose protruding material downward;
    upper edges lose it upward, which in the shared coordinate means the
    edge value increases.
    """
    params.validate()
    up = np.array(upper, dtype=np.float64)
    lo = np.array(lower, dtype=np.float64)
    if up.ndim == 1:
        up = up[None, :]
    if lo.ndim == 1:
        lo = lo[None, :]
    for _ in range(params.corrosion_steps):
        lo_exposure = _upward_exposure(lo)
        up_exposure = _upward_exposure(-up)
        lo = lo - (params.base_rate + params.exposure_rate * lo_exposure)
        up = up + (params.base_rate + params.exposure_rate * up_exposure)
    return up, lo


def corrode_pair(pair: FragmentPair, params: PhysicsParams) -> FragmentPair:
    """Corrode both edges of a pair; the gap grows monotonically."""
    up, lo = corrode_edges(pair.upper_edge, pair.lower_edge, params)
    provenance = dict(pair.provenance)
    provenance["corrosion_steps"] = provenance.get("corrosion_steps", 0) + params.corrosion_steps
    return FragmentPair(
        pair_id=pair.pair_id,
        upper_edge=up[0],
        lower_edge=lo[0],
        provenance=provenance,
    )


def generate_pair(params: PhysicsParams, seed: int, pair_id: str | None = None) -> FragmentPair:
    """One fracture plus corrosion of both resulting fragments."""
    params.validate()
    rng = np.random.default_rng(seed)
    heights, _ = simulate_curves(params, 1, rng)
    up, lo = corrode_edges(heights, heights, params)
    return FragmentPair(
        pair_id=pair_id or f"pair-{seed}",
        upper_edge=up[0],
        lower_edge=lo[0],
        provenance={"seed": int(seed), "params": params.to_dict()},
    )


def generate_dataset(
    params: PhysicsParams,
    n_pairs: int,
    n_interference: int = 0,
    seed: int = 0,
    name: str | None = None,
) -> DatasetManifest:
    """Simulate a dataset of true pairs plus unpaired interference fragments.

    Every fracture gets its own child seed derived from ``seed``, so any
    fragment can be regenerated from its provenance alone.  Interference
    fractures keep one side only, alternating upper and lower, and join the
    manifest unpaired.
    """
    params.validate()
    if n_pairs < 1:
        raise ParameterError("n_pairs must be positive")
    if n_interference < 0:
        raise ParameterError("n_interference must be non-negative")

    total = n_pairs + n_interference
    child_seeds = [int(s) for s in np.random.SeedSequence(seed).generate_state(total, np.uint64)]
    width = max(4, len(str(total)))

    fragments: list[Fragment] = []
    ground_truth: list[GroundTruthPair] = []
    for i in range(n_pairs):
        pair = generate_pair(params, child_seeds[i], pair_id=f"p{i:0{width}d}")
        uid = f"u{i:0{width}d}"
        lid = f"l{i:0{width}d}"
        fragments.append(
            Fragment(uid, "upper", pair.upper_edge.tolist(), {"seed": child_seeds[i]})
        )
        fragments.append(
            Fragment(lid, "lower", pair.lower_edge.tolist(), {"seed": child_seeds[i]})
        )
        ground_truth.append(GroundTruthPair(upper_id=uid, lower_id=lid))
    for j in range(n_interference):
        child = child_seeds[n_pairs + j]
        pair = generate_pair(params, child, pair_id=f"x{j:0{width}d}")
        if j % 2 == 0:
            frag = Fragment(
                f"x{j:0{width}d}", "upper", pair.upper_edge.tolist(),
                {"seed": child, "kept_side": "upper"},
            )
        else:
            frag = Fragment(
                f"x{j:0{width}d}", "lower", pair.lower_edge.tolist(),
                {"seed": child, "kept_side": "lower"},
            )
        fragments.append(frag)

    return DatasetManifest(
        name=name or f"synthetic-{n_pairs}p-{n_interference}x",
        fragments=fragments,
        ground_truth=ground_truth,
        params=params.to_dict(),
        seed=int(seed),
    )
