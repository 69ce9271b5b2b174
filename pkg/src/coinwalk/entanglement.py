"""Coin-position negativity via the partial transpose."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .eigen import ConvergenceFailure, hermitian_eigenvalues
from .state import DensityOperator

__all__ = [
    "NEGATIVE_FLOOR",
    "MissingDataPoint",
    "NegativityValue",
    "partial_transpose_coin",
    "partial_transpose_position",
    "negativity",
]

# eigenvalues above -NEGATIVE_FLOOR count as numerical zero
NEGATIVE_FLOOR = 1e-12


class MissingDataPoint(ArithmeticError):
    """Negativity could not be evaluated because the eigensolver gave up."""


@dataclass(frozen=True)
class NegativityValue:
    value: float
    eigenvalue_residual: float

    def __float__(self) -> float:
        return self.value


def partial_transpose_coin(rho: DensityOperator | NDArray) -> NDArray[np.complex128]:
    """``rho'_{xc,yb} = rho_{xb,yc}``; the 2x2 coin block of every position pair is transposed."""
    m = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho)
    d = m.shape[0]
    n = d // 2
    return m.reshape(n, 2, n, 2).transpose(0, 3, 2, 1).reshape(d, d)


def partial_transpose_position(rho: DensityOperator | NDArray) -> NDArray[np.complex128]:
    """``rho'_{xc,yb} = rho_{yc,xb}``."""
    m = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho)
    d = m.shape[0]
    n = d // 2
    return m.reshape(n, 2, n, 2).transpose(2, 1, 0, 3).reshape(d, d)


def negativity(rho: DensityOperator | NDArray, side: str = "coin") -> NegativityValue:
    """Sum of the magnitudes of the negative partial-transpose eigenvalues.

    Raises :class:`MissingDataPoint` when the eigensolver fails to converge.
    """
    if side == "coin":
        pt = partial_transpose_coin(rho)
    elif side == "position":
        pt = partial_transpose_position(rho)
    else:
        raise ValueError(f"side must be 'coin' or 'position', got {side!r}")
    # identically zero rows (unreachable sites) only contribute zero eigenvalues
    live = np.flatnonzero(np.any(pt != 0, axis=1))
    pt = pt[np.ix_(live, live)]
    try:
        lam = hermitian_eigenvalues(pt)
    except ConvergenceFailure as exc:
        raise MissingDataPoint(str(exc)) from exc
    neg = lam[lam < -NEGATIVE_FLOOR]
    value = float(np.abs(neg).sum())
    residual = abs(float(lam.sum()) - 1.0)
    return NegativityValue(value, residual)
