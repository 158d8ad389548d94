"""Fixed-size feature vectors for fracture edges.

Every fragment edge, whatever its fiber count, is reduced to a 64-sample
profile: linear resampling onto a uniform grid followed by mean-centering.
Centering removes the arbitrary vertical placement of the break while
keeping the shape and its amplitude intact, so that corrosion damage shows
up as a real geometric difference rather than a normalization artifact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EDGE_DIM = 64

UPPER_BOTTOM = "upper-bottom"
LOWER_TOP = "lower-top"

_ROLES = (UPPER_BOTTOM, LOWER_TOP)

_GROUP_ROLES = {"upper": UPPER_BOTTOM, "lower": LOWER_TOP}


class EdgeInputError(ValueError):
    """Raised when an edge profile or role is unusable."""


@dataclass
class EdgeVector:
    """A mean-centered 64-sample edge profile.

    ``values`` keeps the original height units; only the mean is removed,
    never the scale, so deep fracture relief and shallow relief remain
    distinguishable downstream.
    """

    values: np.ndarray
    source_fragment_id: str | None = None
    edge_role: str = LOWER_TOP

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (EDGE_DIM,):
            raise EdgeInputError(
                f"edge vector must have shape ({EDGE_DIM},), got {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise EdgeInputError("edge vector contains non-finite values")
        if abs(float(self.values.mean())) > 1e-9:
            raise EdgeInputError("edge vector is not mean-centered")
        if self.edge_role not in _ROLES:
            raise EdgeInputError(f"unknown edge role {self.edge_role!r}")


def role_for_group(group: str) -> str:
    """Matching role of the edge a fragment exposes: the upper fragment's
    underside faces the lower fragment's top."""
    try:
        return _GROUP_ROLES[group]
    except KeyError:
        raise EdgeInputError(f"unknown fragment group {group!r}") from None


def resample_profile(edge: np.ndarray, n_out: int = EDGE_DIM) -> np.ndarray:
    """Linearly resample a height profile onto ``n_out`` uniform samples
    spanning the full extent of the original."""
    e = np.asarray(edge, dtype=np.float64)
    if e.ndim != 1 or e.size < 2:
        raise EdgeInputError("edge profile must be 1-d with at least 2 samples")
    if not np.all(np.isfinite(e)):
        raise EdgeInputError("edge profile contains non-finite values")
    if e.size == n_out:
        return e.copy()
    grid = np.linspace(0.0, e.size - 1.0, n_out)
    return np.interp(grid, np.arange(e.size, dtype=np.float64), e)


def extract_edge_vector(
    edge: "np.ndarray | list[float]",
    role: str,
    fragment_id: str | None = None,
) -> EdgeVector:
    """Resample ``edge`` to 64 samples and subtract its mean.

    Both roles are expressed in the same height coordinate, so a fragment
    and its true counterpart produce directly comparable vectors.
    """
    if role not in _ROLES:
        raise EdgeInputError(f"unknown edge role {role!r}")
    v = resample_profile(edge, EDGE_DIM)
    v -= v.mean()
    # One more centering pass keeps the invariant within 1e-9 even for
    # profiles with extreme magnitudes.
    v -= v.mean()
    return EdgeVector(values=v, source_fragment_id=fragment_id, edge_role=role)
