"""Spreading and mixing diagnostics on position distributions.

Distributions are plain float arrays in the geometry's slot order (see
:mod:`coinwalk.state`).  The total variation distance follows the unhalved
convention ``sum |P - Q|``, so it ranges over ``[0, 2]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .state import WalkGeometry

__all__ = [
    "NOT_MIXED",
    "ReferenceKind",
    "ReferenceDistribution",
    "MixingRecord",
    "std_dev",
    "tvd",
    "top_hat_reference",
    "top_hat_half_width",
    "uniform_cycle",
    "parity_uniform_cycle",
    "cycle_reference",
    "time_averaged",
    "running_time_average",
    "mixing_time",
]


class _NotMixed:
    """Sentinel: the series had not settled below the threshold by the horizon."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NOT_MIXED"

    def __reduce__(self):
        return (_NotMixed, ())


NOT_MIXED = _NotMixed()


class ReferenceKind(str, enum.Enum):
    TOP_HAT = "top_hat"
    UNIFORM_CYCLE = "uniform_cycle"
    PARITY_UNIFORM_CYCLE = "parity_uniform_cycle"


@dataclass(frozen=True)
class ReferenceDistribution:
    kind: ReferenceKind
    geometry: WalkGeometry
    weights: NDArray[np.float64] = field(repr=False)


def std_dev(P: NDArray[np.float64], geometry: WalkGeometry) -> float:
    """Standard deviation of a line distribution about its mean."""
    if not geometry.is_line:
        raise ValueError("std_dev is defined for line geometries only")
    x = geometry.positions.astype(float)
    mean = float(np.dot(x, P))
    var = float(np.dot(x * x, P)) - mean * mean
    return math.sqrt(max(var, 0.0))


def _weights(Q: ReferenceDistribution | NDArray) -> NDArray:
    return Q.weights if isinstance(Q, ReferenceDistribution) else np.asarray(Q, dtype=float)


def tvd(P: NDArray[np.float64], Q: ReferenceDistribution | NDArray[np.float64]) -> float:
    """Total variation distance ``sum_x |P(x) - Q(x)|`` (no factor 1/2)."""
    p = np.asarray(P, dtype=float)
    q = _weights(Q)
    if p.shape != q.shape:
        raise ValueError(f"domain mismatch: {p.shape} vs {q.shape}")
    return float(np.sum(np.abs(p - q)))


def top_hat_half_width(steps: int) -> int:
    """Largest integer not above ``steps / sqrt(2)`` with the same parity as ``steps``.

    For ``steps = 1`` no odd integer qualifies; the width is then 1 so the
    support ``{-1, 1}`` is not empty.
    """
    # exact integer test for w <= steps/sqrt(2), i.e. 2 w^2 <= steps^2
    w = math.isqrt(steps * steps // 2)
    if (w - steps) % 2:
        w -= 1
    return max(w, steps % 2)


def top_hat_reference(steps: int, geometry: WalkGeometry | None = None) -> ReferenceDistribution:
    """Uniform weight on ``|x| <= W`` restricted to the parity of ``steps``.

    ``geometry`` defaults to the line window of extent ``steps``; a wider
    line window may be passed when the walk is observed part-way.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if geometry is None:
        geometry = WalkGeometry.line(max(steps, 1))
    if not geometry.is_line or geometry.extent < steps:
        raise ValueError("top-hat reference needs a line window covering the walk")
    w = top_hat_half_width(steps)
    x = geometry.positions
    support = (np.abs(x) <= w) & ((x - steps) % 2 == 0)
    weights = support / np.count_nonzero(support)
    return ReferenceDistribution(ReferenceKind.TOP_HAT, geometry, weights)


def uniform_cycle(geometry: WalkGeometry) -> ReferenceDistribution:
    if geometry.is_line:
        raise ValueError("uniform reference requires a cycle")
    n = geometry.extent
    return ReferenceDistribution(ReferenceKind.UNIFORM_CYCLE, geometry, np.full(n, 1.0 / n))


def parity_uniform_cycle(geometry: WalkGeometry, parity: int) -> ReferenceDistribution:
    """Weight ``2/N`` on sites of the given parity of an even cycle."""
    if geometry.is_line or geometry.extent % 2:
        raise ValueError("parity-restricted uniform reference requires an even cycle")
    n = geometry.extent
    weights = np.where(np.arange(n) % 2 == parity % 2, 2.0 / n, 0.0)
    return ReferenceDistribution(ReferenceKind.PARITY_UNIFORM_CYCLE, geometry, weights)


def cycle_reference(geometry: WalkGeometry, t: int) -> ReferenceDistribution:
    """Instantaneous limiting distribution at step ``t`` for a walk started at site 0.

    Even cycles conserve the parity ``x = t (mod 2)``, so the reference is the
    uniform distribution on that sublattice; odd cycles use the full uniform.
    """
    if geometry.extent % 2:
        return uniform_cycle(geometry)
    return parity_uniform_cycle(geometry, t % 2)


def time_averaged(dists: Sequence[NDArray[np.float64]]) -> NDArray[np.float64]:
    """Mean of ``P(., t)`` over ``t = 0..T-1``."""
    if len(dists) == 0:
        raise ValueError("time average of an empty sequence")
    arr = np.asarray(dists, dtype=float)
    return arr.mean(axis=0)


def running_time_average(dists: NDArray[np.float64]) -> NDArray[np.float64]:
    """Row ``t`` is the average of rows ``0..t`` of ``dists``."""
    arr = np.asarray(dists, dtype=float)
    counts = np.arange(1, arr.shape[0] + 1, dtype=float)[:, None]
    return np.cumsum(arr, axis=0) / counts


@dataclass(frozen=True)
class MixingRecord:
    """TVD values for ``t = 0..horizon`` and the threshold they are tested against."""

    tvd_series: NDArray[np.float64]
    epsilon: float

    @property
    def horizon(self) -> int:
        return len(self.tvd_series) - 1


def mixing_time(record: MixingRecord) -> int | _NotMixed:
    """Smallest ``T`` with ``tvd(t) < epsilon`` for every ``t`` in ``(T, horizon]``.

    Returns :data:`NOT_MIXED` when the last recorded value is not below
    ``epsilon``.  The universal quantifier is truncated at the horizon.
    """
    if not record.epsilon > 0:
        raise ValueError("epsilon must be positive")
    series = np.asarray(record.tvd_series, dtype=float)
    if series.size == 0:
        raise ValueError("empty TVD series")
    above = np.flatnonzero(series >= record.epsilon)
    if above.size == 0:
        # below threshold for all t > -1; the earliest admissible T is 0
        return 0
    last = int(above[-1])
    if last == series.size - 1:
        return NOT_MIXED
    return last
