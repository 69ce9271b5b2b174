"""Density-operator simulation of decoherent coined quantum walks on the line and cycle."""

from .dynamics import DecoherenceSpec, DecoherenceTarget, apply_coin, apply_shift, decoherent_step, evolve
from .eigen import ConvergenceFailure, NonHermitianInput, hermitian_eigenvalues
from .entanglement import MissingDataPoint, negativity, partial_transpose_coin
from .observables import (
    NOT_MIXED,
    MixingRecord,
    mixing_time,
    std_dev,
    time_averaged,
    top_hat_reference,
    tvd,
    uniform_cycle,
)
from .state import CoinInitialState, DensityOperator, PureState, WalkGeometry, make_initial_state, position_marginal

__all__ = [
    "CoinInitialState",
    "ConvergenceFailure",
    "DecoherenceSpec",
    "DecoherenceTarget",
    "DensityOperator",
    "MissingDataPoint",
    "MixingRecord",
    "NOT_MIXED",
    "NonHermitianInput",
    "PureState",
    "WalkGeometry",
    "apply_coin",
    "apply_shift",
    "decoherent_step",
    "evolve",
    "hermitian_eigenvalues",
    "make_initial_state",
    "mixing_time",
    "negativity",
    "partial_transpose_coin",
    "position_marginal",
    "std_dev",
    "time_averaged",
    "top_hat_reference",
    "tvd",
    "uniform_cycle",
]
