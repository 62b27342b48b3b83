"""Dense linear-algebra substrate: block vectors, norms, spectral radius.

Everything here is sized for desk-scale experiments (matrices up to a few
dozen rows), so the only eigen machinery is deterministic power iteration.
Closed-form cross-checks for tiny matrices live in the test suite.
"""
from __future__ import annotations

import math
import warnings
from enum import Enum

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor
from scipy.linalg import lu_solve as _scipy_lu_solve

from .errors import (
    ConvergenceFailure,
    DimensionError,
    InvalidWeightError,
    SingularMatrixError,
)

POWER_TOL = 1e-10          # spectral radius estimate, relative
SPECTRAL_NORM_TOL = 1e-12  # Gram-matrix power iteration, relative
POWER_MAX_ITER = 10_000
PIVOT_REL_TOL = 1e-14      # pivot below this times max |entry| means singular


class NormKind(Enum):
    """Which operator norm drives an analysis.

    SPECTRAL is the default everywhere: it is the sharper choice for the
    symmetric step matrices produced by the diffusion models.
    """

    INFINITY = "infinity"
    SPECTRAL = "spectral"


def as_matrix(m) -> np.ndarray:
    """Coerce to a 2-D float array, rejecting NaN/Inf entries."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def _square(m) -> np.ndarray:
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    return a


class BlockVector:
    """Stack of equally sized value blocks, one per interface point.

    Block ``i`` is the state carried at the i-th subinterval boundary; all
    blocks share one dimension, so the storage is a plain (n_blocks, dim)
    array.
    """

    __slots__ = ("data",)

    def __init__(self, data):
        a = np.asarray(data, dtype=float)
        if a.ndim != 2:
            raise DimensionError(
                f"block vector needs a (n_blocks, dim) array, got ndim={a.ndim}"
            )
        if not np.all(np.isfinite(a)):
            raise ValueError("block entries must be finite")
        self.data = a

    @classmethod
    def from_blocks(cls, blocks) -> "BlockVector":
        return cls(np.stack([np.asarray(b, dtype=float) for b in blocks]))

    @property
    def n_blocks(self) -> int:
        return self.data.shape[0]

    @property
    def block_dim(self) -> int:
        return self.data.shape[1]

    @property
    def flat(self) -> np.ndarray:
        """Row-major flattening, block 0 first."""
        return self.data.reshape(-1)

    @classmethod
    def from_flat(cls, vec, n_blocks: int) -> "BlockVector":
        v = np.asarray(vec, dtype=float)
        if v.ndim != 1 or v.size % n_blocks:
            raise DimensionError("flat vector length not divisible by block count")
        return cls(v.reshape(n_blocks, -1))

    def __getitem__(self, i: int) -> np.ndarray:
        return self.data[i]

    def __sub__(self, other: "BlockVector") -> "BlockVector":
        if self.data.shape != other.data.shape:
            raise DimensionError("block vectors differ in shape")
        return BlockVector(self.data - other.data)

    def copy(self) -> "BlockVector":
        return BlockVector(self.data.copy())

    def max_abs(self) -> float:
        """Unweighted infinity norm over every entry of every block."""
        if self.data.size == 0:
            return 0.0
        return float(np.max(np.abs(self.data)))

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"BlockVector(n_blocks={self.n_blocks}, dim={self.block_dim})"


def weighted_max_norm(x: BlockVector, weights) -> float:
    """max_i ||x_i||_inf / w_i with strictly positive weights."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.shape[0] != x.n_blocks:
        raise DimensionError(
            f"weight count {w.shape} does not match {x.n_blocks} blocks"
        )
    if np.any(w <= 0.0) or not np.all(np.isfinite(w)):
        raise InvalidWeightError("weights must be finite and strictly positive")
    per_block = np.max(np.abs(x.data), axis=1) if x.block_dim else np.zeros(x.n_blocks)
    return float(np.max(per_block / w))


def max_block_norm(x: BlockVector, kind: NormKind = NormKind.SPECTRAL) -> float:
    """Largest per-block vector norm, inner norm matched to ``kind``.

    SPECTRAL pairs with the Euclidean block norm, INFINITY with max-abs,
    so operator-norm bounds apply blockwise without mixing norms.
    """
    if x.data.size == 0:
        return 0.0
    if kind is NormKind.INFINITY:
        return float(np.max(np.abs(x.data)))
    return float(np.max(np.linalg.norm(x.data, axis=1)))


def abs_matrix(m) -> np.ndarray:
    """Entrywise absolute value (comparison matrix of a linear map)."""
    return np.abs(as_matrix(m))


def operator_norm(m, kind: NormKind = NormKind.SPECTRAL) -> float:
    """Induced operator norm of a square matrix.

    INFINITY is the exact max row sum. SPECTRAL is the largest singular
    value, estimated by power iteration on the Gram matrix.
    """
    a = _square(m)
    if a.size == 0:
        return 0.0
    if kind is NormKind.INFINITY:
        return float(np.max(np.sum(np.abs(a), axis=1)))
    gram = a.T @ a
    est, converged = _dominant_magnitude(gram, SPECTRAL_NORM_TOL)
    value = math.sqrt(max(est, 0.0))
    if not converged:
        raise ConvergenceFailure(
            f"spectral norm power iteration did not settle within "
            f"{POWER_MAX_ITER} iterations (estimate {value:.6e})",
            estimate=value,
        )
    return value


def spectral_radius(m) -> float:
    """Largest eigenvalue magnitude, via deterministic power iteration.

    The magnitude estimate is the two-step geometric mean of iterate growth,
    which also settles for dominant complex-conjugate or opposite-sign pairs.
    Genuinely stagnating cases abort with a ConvergenceFailure carrying the
    last estimate. Known-nilpotent inputs are better served by a direct
    matrix-power test; here they simply collapse the Krylov vector to zero.
    """
    a = _square(m)
    if a.size == 0:
        return 0.0
    est, converged = _dominant_magnitude(a, POWER_TOL)
    if not converged:
        raise ConvergenceFailure(
            f"spectral radius power iteration did not settle within "
            f"{POWER_MAX_ITER} iterations (estimate {est:.6e})",
            estimate=est,
        )
    return est


def _dominant_magnitude(a: np.ndarray, tol: float) -> tuple[float, bool]:
    """Run power iteration from two fixed start vectors, keep the best.

    The all-ones start can be (near) orthogonal to the dominant eigenspace;
    the alternating-sign restart covers that case deterministically.
    """
    n = a.shape[0]
    starts = [np.ones(n)]
    if n > 1:
        starts.append(np.array([(-1.0) ** i for i in range(n)]))
    best_ok = -1.0
    best_any = -1.0
    any_converged = False
    for start in starts:
        est, ok = _power_sequence(a, start, tol)
        best_any = max(best_any, est)
        if ok:
            any_converged = True
            best_ok = max(best_ok, est)
    return (best_ok, True) if any_converged else (best_any, False)


def _power_sequence(a: np.ndarray, start: np.ndarray, tol: float) -> tuple[float, bool]:
    x = start / np.linalg.norm(start)
    growth_prev = None
    est_prev = None
    for _ in range(POWER_MAX_ITER):
        y = a @ x
        growth = float(np.linalg.norm(y))
        if growth == 0.0:
            # Krylov vector annihilated: the reachable part is nilpotent.
            return 0.0, True
        if growth_prev is not None:
            est = math.sqrt(growth * growth_prev)
            if est_prev is not None and abs(est - est_prev) <= tol * max(est, 1e-30):
                return est, True
            est_prev = est
        growth_prev = growth
        x = y / growth
    return (est_prev if est_prev is not None else growth_prev), False


def lu_solve(a, b) -> np.ndarray:
    """Solve a X = b by dense LU with partial pivoting.

    Singularity is detected from the factored pivots: any |U_ii| below
    PIVOT_REL_TOL times the largest entry of ``a`` raises SingularMatrixError
    carrying the offending pivot.
    """
    mat = _square(a)
    rhs = np.asarray(b, dtype=float)
    if rhs.shape[0] != mat.shape[0]:
        raise DimensionError(
            f"rhs has {rhs.shape[0]} rows, matrix has {mat.shape[0]}"
        )
    scale = float(np.max(np.abs(mat))) if mat.size else 0.0
    with warnings.catch_warnings():
        # scipy warns on exactly-zero pivots; the pivot check below governs.
        warnings.simplefilter("ignore", LinAlgWarning)
        factors, piv = lu_factor(mat, check_finite=False)
    pivots = np.abs(np.diag(factors))
    smallest = float(np.min(pivots)) if pivots.size else 0.0
    if scale == 0.0 or smallest < PIVOT_REL_TOL * scale:
        raise SingularMatrixError(
            f"matrix numerically singular (pivot {smallest:.3e}, scale {scale:.3e})",
            pivot=smallest,
        )
    return _scipy_lu_solve((factors, piv), rhs, check_finite=False)
