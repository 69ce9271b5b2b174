"""Joint position-coin basis, index mapping and state containers.

Basis ordering is fixed globally: the coin is the fastest-varying index, so
the flat index of ``(x, c)`` is ``2 * slot(x) + coin_slot(c)``.  Coin label
``-1`` occupies slot 0 and ``+1`` occupies slot 1.  On the line, positions
``-T..T`` occupy slots ``0..2T``; on the cycle, site ``x`` occupies slot ``x``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "GeometryKind",
    "WalkGeometry",
    "CoinInitialState",
    "PureState",
    "DensityOperator",
    "coin_slot",
    "coin_label",
    "coin_vector",
    "make_initial_state",
    "position_marginal",
]

COIN_LABELS = (-1, +1)


class GeometryKind(str, enum.Enum):
    LINE = "line"
    CYCLE = "cycle"


@dataclass(frozen=True)
class WalkGeometry:
    """Position index set of the walk.

    For ``LINE`` the extent is the planned number of steps ``T`` and the window
    is ``[-T, T]``; for ``CYCLE`` it is the number of sites ``N``.
    """

    kind: GeometryKind
    extent: int

    def __post_init__(self) -> None:
        if int(self.extent) != self.extent or self.extent < 1:
            raise ValueError(f"extent must be a positive integer, got {self.extent!r}")
        object.__setattr__(self, "kind", GeometryKind(self.kind))

    @classmethod
    def line(cls, steps: int) -> "WalkGeometry":
        return cls(GeometryKind.LINE, steps)

    @classmethod
    def cycle(cls, size: int) -> "WalkGeometry":
        return cls(GeometryKind.CYCLE, size)

    @property
    def is_line(self) -> bool:
        return self.kind is GeometryKind.LINE

    @property
    def position_count(self) -> int:
        return 2 * self.extent + 1 if self.is_line else self.extent

    @property
    def dim(self) -> int:
        return 2 * self.position_count

    @property
    def positions(self) -> NDArray[np.int64]:
        """Position labels in slot order."""
        if self.is_line:
            return np.arange(-self.extent, self.extent + 1)
        return np.arange(self.extent)

    def position_slot(self, x: int) -> int:
        if self.is_line:
            if abs(x) > self.extent:
                raise IndexError(f"position {x} outside window [-{self.extent}, {self.extent}]")
            return x + self.extent
        return x % self.extent

    def position_label(self, slot: int) -> int:
        if not 0 <= slot < self.position_count:
            raise IndexError(f"position slot {slot} out of range")
        return slot - self.extent if self.is_line else slot

    def flatten(self, x: int, c: int) -> int:
        return 2 * self.position_slot(x) + coin_slot(c)

    def unflatten(self, flat: int) -> tuple[int, int]:
        if not 0 <= flat < self.dim:
            raise IndexError(f"flat index {flat} out of range [0, {self.dim})")
        slot, cs = divmod(flat, 2)
        return self.position_label(slot), coin_label(cs)


def coin_slot(c: int) -> int:
    if c == -1:
        return 0
    if c == 1:
        return 1
    raise ValueError(f"coin label must be -1 or +1, got {c!r}")


def coin_label(slot: int) -> int:
    return COIN_LABELS[slot]


class CoinInitialState(str, enum.Enum):
    """Initial coin states.

    ``PHASE`` is (|-1> + i|+1>)/sqrt(2), ``ANGLE`` is
    cos(pi/8)|-1> + sin(pi/8)|+1>; both give symmetric line distributions.
    """

    PHASE = "phase"
    ANGLE = "angle"
    MINUS = "minus"
    PLUS = "plus"


def coin_vector(coin_init: CoinInitialState | str) -> NDArray[np.complex128]:
    """Coin amplitudes in slot order ``(-1, +1)``."""
    coin_init = CoinInitialState(coin_init)
    if coin_init is CoinInitialState.PHASE:
        return np.array([1.0, 1.0j]) / np.sqrt(2.0)
    if coin_init is CoinInitialState.ANGLE:
        return np.array([np.cos(np.pi / 8), np.sin(np.pi / 8)], dtype=np.complex128)
    if coin_init is CoinInitialState.MINUS:
        return np.array([1.0, 0.0], dtype=np.complex128)
    return np.array([0.0, 1.0], dtype=np.complex128)


@dataclass
class PureState:
    geometry: WalkGeometry
    amplitudes: NDArray[np.complex128]

    def __post_init__(self) -> None:
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (self.geometry.dim,):
            raise ValueError(
                f"amplitude vector has shape {self.amplitudes.shape}, expected ({self.geometry.dim},)"
            )

    @classmethod
    def from_terms(cls, geometry: WalkGeometry, terms: dict[tuple[int, int], complex]) -> "PureState":
        """Build a state from ``{(x, c): amplitude}``, normalising the result."""
        amps = np.zeros(geometry.dim, dtype=np.complex128)
        for (x, c), a in terms.items():
            amps[geometry.flatten(x, c)] += a
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("zero state cannot be normalised")
        return cls(geometry, amps / norm)

    def norm_error(self) -> float:
        return abs(float(np.vdot(self.amplitudes, self.amplitudes).real) - 1.0)

    def density(self) -> "DensityOperator":
        return DensityOperator(self.geometry, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass
class DensityOperator:
    """Density matrix over the flat joint basis.

    ``tensor`` exposes the same memory as a ``(P, 2, P, 2)`` array indexed
    ``[x_slot, c_slot, y_slot, b_slot]``.
    """

    geometry: WalkGeometry
    matrix: NDArray[np.complex128]

    def __post_init__(self) -> None:
        self.matrix = np.ascontiguousarray(self.matrix, dtype=np.complex128)
        d = self.geometry.dim
        if self.matrix.shape != (d, d):
            raise ValueError(f"density matrix has shape {self.matrix.shape}, expected ({d}, {d})")

    @property
    def tensor(self) -> NDArray[np.complex128]:
        n = self.geometry.position_count
        return self.matrix.reshape(n, 2, n, 2)

    @classmethod
    def from_tensor(cls, geometry: WalkGeometry, tensor: NDArray[np.complex128]) -> "DensityOperator":
        return cls(geometry, tensor.reshape(geometry.dim, geometry.dim))

    def copy(self) -> "DensityOperator":
        return DensityOperator(self.geometry, self.matrix.copy())

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def purity(self) -> float:
        # Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
        return float(np.sum(np.abs(self.matrix) ** 2))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def trace_error(self) -> float:
        return abs(self.trace() - 1.0)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])


def make_initial_state(geometry: WalkGeometry, coin_init: CoinInitialState | str) -> DensityOperator:
    """Walker at the origin with the given coin state, as a pure density operator."""
    if geometry.position_count < 2:
        raise ValueError("geometry must have at least two positions")
    chi = coin_vector(coin_init)
    amps = np.zeros(geometry.dim, dtype=np.complex128)
    origin = 2 * geometry.position_slot(0)
    amps[origin : origin + 2] = chi
    return PureState(geometry, amps).density()


def position_marginal(rho: DensityOperator) -> NDArray[np.float64]:
    """Position distribution P(x) = sum_c rho_{xc,xc}, in slot order."""
    diag = np.real(np.diagonal(rho.matrix)).reshape(-1, 2).sum(axis=1)
    return np.where(diag < 0.0, 0.0, diag)
