"""Coin toss, shift, and the decoherent walk step.

One time step applies the unitary ``S C`` and then, with probability ``p``,
a projective dephasing event.  The ensemble average is evaluated exactly:

    rho <- (1 - p) * U rho U^dag + p * Mask(U rho U^dag)

where ``Mask`` zeroes the off-diagonal entries of the chosen channel.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from numpy.typing import NDArray

from .state import DensityOperator, PureState, WalkGeometry

__all__ = [
    "COIN_MATRIX",
    "DecoherenceTarget",
    "DecoherenceSpec",
    "ObserverError",
    "apply_coin",
    "apply_shift",
    "apply_step",
    "dephase",
    "decoherent_step",
    "evolve",
]

_R2 = np.sqrt(0.5)

# Slot order (-1, +1): C|-1> = (|+1> - |-1>)/sqrt(2), C|+1> = (|-1> + |+1>)/sqrt(2)
COIN_MATRIX = np.array([[-_R2, _R2], [_R2, _R2]])

SHIFTS = (-1, +1)


class DecoherenceTarget(str, enum.Enum):
    NONE = "none"
    COIN = "coin"
    POSITION = "position"
    BOTH = "both"


@dataclass(frozen=True)
class DecoherenceSpec:
    target: DecoherenceTarget = DecoherenceTarget.NONE
    rate: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "target", DecoherenceTarget(self.target))
        rate = float(self.rate)
        if not 0.0 <= rate <= 1.0:
            raise ValueError(f"decoherence rate must lie in [0, 1], got {self.rate!r}")
        object.__setattr__(self, "rate", rate)

    @property
    def effective_rate(self) -> float:
        return 0.0 if self.target is DecoherenceTarget.NONE else self.rate


class ObserverError(RuntimeError):
    """An observer callback raised during :func:`evolve`."""


def _coin_tensor(t: NDArray) -> NDArray:
    # left factor C on the row coin index
    u = np.empty_like(t)
    np.subtract(t[:, 1], t[:, 0], out=u[:, 0])
    np.add(t[:, 0], t[:, 1], out=u[:, 1])
    # right factor C^dag = C on the column coin index; both 1/sqrt(2) factors folded into 0.5
    out = np.empty_like(t)
    np.subtract(u[..., 1], u[..., 0], out=out[..., 0])
    np.add(u[..., 0], u[..., 1], out=out[..., 1])
    out *= 0.5
    return out


def _shift_tensor(t: NDArray, geometry: WalkGeometry) -> NDArray:
    if geometry.is_line:
        # every reachable amplitude lies strictly inside the window
        assert not (np.any(t[0]) or np.any(t[-1])), "walk reached the edge of the line window"
    out = np.empty_like(t)
    for c, sc in enumerate(SHIFTS):
        for b, sb in enumerate(SHIFTS):
            out[:, c, :, b] = np.roll(t[:, c, :, b], (sc, sb), axis=(0, 1))
    return out


def _shift_vector(v: NDArray, geometry: WalkGeometry) -> NDArray:
    if geometry.is_line:
        assert not (np.any(v[0]) or np.any(v[-1])), "walk reached the edge of the line window"
    out = np.empty_like(v)
    for c, sc in enumerate(SHIFTS):
        out[:, c] = np.roll(v[:, c], sc)
    return out


def apply_coin(state: PureState | DensityOperator) -> PureState | DensityOperator:
    """Apply the coin toss to every position (conjugation for density operators)."""
    g = state.geometry
    if isinstance(state, PureState):
        v = state.amplitudes.reshape(g.position_count, 2)
        return PureState(g, (v @ COIN_MATRIX.T).reshape(-1))
    return DensityOperator.from_tensor(g, _coin_tensor(state.tensor))


def apply_shift(state: PureState | DensityOperator) -> PureState | DensityOperator:
    """Move amplitude at ``(x, c)`` to ``(x + c, c)``, wrapping on the cycle."""
    g = state.geometry
    if isinstance(state, PureState):
        v = state.amplitudes.reshape(g.position_count, 2)
        return PureState(g, _shift_vector(v, g).reshape(-1))
    return DensityOperator.from_tensor(g, _shift_tensor(state.tensor, g))


def apply_step(state: PureState | DensityOperator) -> PureState | DensityOperator:
    return apply_shift(apply_coin(state))


def dephase(tensor: NDArray, target: DecoherenceTarget | str) -> NDArray:
    """Return a copy of ``tensor`` with the channel's off-diagonal entries zeroed."""
    target = DecoherenceTarget(target)
    n = tensor.shape[0]
    out = np.zeros_like(tensor)
    if target is DecoherenceTarget.NONE:
        return tensor.copy()
    if target is DecoherenceTarget.COIN:
        out[:, 0, :, 0] = tensor[:, 0, :, 0]
        out[:, 1, :, 1] = tensor[:, 1, :, 1]
        return out
    idx = np.arange(n)
    if target is DecoherenceTarget.POSITION:
        out[idx, :, idx, :] = tensor[idx, :, idx, :]
        return out
    for c in range(2):
        out[idx, c, idx, c] = tensor[idx, c, idx, c]
    return out


@functools.lru_cache(maxsize=64)
def _channel_weights(n: int, target: DecoherenceTarget, p: float) -> NDArray:
    # (1 - p) rho + p Mask(rho) == rho * W, with W = 1 where Mask keeps an
    # entry and 1 - p where it zeroes one
    keep = dephase(np.ones((n, 2, n, 2)), target)
    w = np.where(keep == 1.0, 1.0, 1.0 - p).reshape(2 * n, 2 * n)
    w.setflags(write=False)
    return w


@functools.lru_cache(maxsize=64)
def _step_gather(geometry: WalkGeometry) -> tuple[NDArray, ...]:
    """Row ``j = (x, c)`` of ``S C`` is ``C[c, 0] e_(x-c, -1) + C[c, 1] e_(x-c, +1)``."""
    n = geometry.position_count
    slots = np.arange(n)
    k0 = np.empty(2 * n, dtype=np.intp)
    for c, sc in enumerate(SHIFTS):
        k0[c::2] = 2 * ((slots - sc) % n)
    k1 = k0 + 1
    a = np.tile(COIN_MATRIX[:, 0], n)
    b = np.tile(COIN_MATRIX[:, 1], n)
    for arr in (k0, k1, a, b):
        arr.setflags(write=False)
    return k0, k1, a, b


def _step_matrix(m: NDArray, geometry: WalkGeometry, spec: DecoherenceSpec) -> NDArray:
    if geometry.is_line:
        n = geometry.position_count
        assert not (np.any(m[:2]) or np.any(m[2 * n - 2 :])), "walk reached the edge of the line window"
    k0, k1, a, b = _step_gather(geometry)
    left = m.take(k0, axis=0)
    left *= a[:, None]
    tmp = m.take(k1, axis=0)
    tmp *= b[:, None]
    left += tmp
    out = left.take(k0, axis=1)
    out *= a
    tmp = left.take(k1, axis=1)
    tmp *= b
    out += tmp
    p = spec.effective_rate
    if p != 0.0:
        out *= _channel_weights(geometry.position_count, spec.target, p)
    return out


def decoherent_step(rho: DensityOperator, spec: DecoherenceSpec) -> DensityOperator:
    """Advance ``rho`` by one unitary step followed by the averaged dephasing event."""
    if not isinstance(spec, DecoherenceSpec):
        raise TypeError("spec must be a DecoherenceSpec")
    g = rho.geometry
    return DensityOperator(g, _step_matrix(rho.matrix, g, spec))


Observer = Callable[[int, DensityOperator], None]


def evolve(
    rho0: DensityOperator,
    spec: DecoherenceSpec,
    steps: int,
    observers: Iterable[Observer] = (),
) -> DensityOperator:
    """Apply ``steps`` decoherent steps, calling each observer with ``(t, rho(t))``.

    Observers see ``t = 0`` before any step and every subsequent step.  They
    receive the live state and must not modify it.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    g = rho0.geometry
    if g.is_line and steps > g.extent:
        raise ValueError(f"{steps} steps exceed the line window of extent {g.extent}")
    observers = list(observers)

    def notify(t: int, rho: DensityOperator) -> None:
        for obs in observers:
            try:
                obs(t, rho)
            except Exception as exc:
                raise ObserverError(f"observer {obs!r} failed at step {t}: {exc}") from exc

    rho = rho0
    notify(0, rho)
    m = rho0.matrix
    for t in range(1, steps + 1):
        m = _step_matrix(m, g, spec)
        rho = DensityOperator(g, m)
        notify(t, rho)
    return rho
