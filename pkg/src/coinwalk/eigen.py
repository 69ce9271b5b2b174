"""Eigenvalues of dense Hermitian matrices.

The matrix is reduced to Hermitian tridiagonal form by complex Householder
reflections; a diagonal phase similarity then makes the off-diagonal real,
and the real symmetric tridiagonal spectrum is found by QL iteration with
implicit Wilkinson-type shifts.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "EigenError",
    "NonHermitianInput",
    "ConvergenceFailure",
    "tridiagonalize",
    "tridiagonal_eigenvalues",
    "hermitian_eigenvalues",
]

MAX_SWEEPS = 64
HERMITIAN_TOL = 1e-8


class EigenError(ArithmeticError):
    pass


class NonHermitianInput(EigenError, ValueError):
    pass


class ConvergenceFailure(EigenError):
    def __init__(self, index: int, max_iterations: int):
        super().__init__(
            f"QL iteration did not converge for eigenvalue {index} within {max_iterations} sweeps"
        )
        self.index = index
        self.max_iterations = max_iterations


def tridiagonalize(M: NDArray[np.complexfloating]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Return the diagonal and (nonnegative) off-diagonal of a real tridiagonal
    matrix unitarily similar to the Hermitian ``M``."""
    A = np.array(M, dtype=np.complex128, copy=True)
    n = A.shape[0]
    off = np.zeros(max(n - 1, 0), dtype=np.complex128)
    for k in range(n - 2):
        x = A[k + 1 :, k]
        if not np.any(x[1:]):
            # column already reduced
            off[k] = x[0]
            continue
        xnorm = float(np.linalg.norm(x))
        x0 = x[0]
        phase = x0 / abs(x0) if x0 != 0 else 1.0
        alpha = -phase * xnorm
        v = x.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)
        sub = A[k + 1 :, k + 1 :]
        p = sub @ v
        kappa = np.vdot(v, p).real
        w = p - kappa * v
        sub -= 2.0 * (np.outer(v, w.conj()) + np.outer(w, v.conj()))
        off[k] = alpha
    if n >= 2:
        off[n - 2] = A[n - 1, n - 2]
    return np.real(np.diagonal(A)).copy(), np.abs(off)


def tridiagonal_eigenvalues(
    diag: NDArray[np.float64], offdiag: NDArray[np.float64], max_sweeps: int = MAX_SWEEPS
) -> NDArray[np.float64]:
    """Eigenvalues of the symmetric tridiagonal matrix, ascending."""
    d = [float(v) for v in diag]
    n = len(d)
    e = [float(v) for v in offdiag] + [0.0]
    if len(e) != n:
        raise ValueError("off-diagonal must have length len(diag) - 1")
    eps = np.finfo(float).eps
    # absolute deflation floor: clusters of near-zero entries otherwise stall
    # the purely relative test
    floor = eps * max((abs(v) for v in d + e), default=0.0)
    hypot = math.hypot
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd or abs(e[m]) <= floor:
                    break
                m += 1
            if m == l:
                break
            if it == max_sweeps:
                raise ConvergenceFailure(l, max_sweeps)
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return np.sort(np.array(d))


def hermitian_eigenvalues(M: NDArray[np.complexfloating], max_sweeps: int = MAX_SWEEPS) -> NDArray[np.float64]:
    """All eigenvalues of a Hermitian matrix in ascending order.

    Raises
    ------
    NonHermitianInput
        If ``max|M - M^dag|`` exceeds 1e-8.
    ConvergenceFailure
        If the QL iteration exhausts ``max_sweeps`` for some eigenvalue.
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NonHermitianInput(f"expected a square matrix, got shape {M.shape}")
    if M.size and np.max(np.abs(M - M.conj().T)) > HERMITIAN_TOL:
        raise NonHermitianInput("matrix is not Hermitian within 1e-8")
    if M.shape[0] == 0:
        return np.zeros(0)
    d, e = tridiagonalize(M)
    return tridiagonal_eigenvalues(d, e, max_sweeps)
