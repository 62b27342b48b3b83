"""Synchronous coarse/fine interface iteration and its block-matrix form.

The iteration refines interface states lambda_0..lambda_p jointly: each
sweep replaces lambda_i by the coarse prediction from the freshly updated
predecessor plus the fine-minus-coarse correction evaluated at the previous
sweep's predecessor. After k sweeps the first k interface states agree with
the purely sequential fine solution, so p sweeps terminate exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .linalg import BlockVector
from .model import AffinePropagator

STOP_THRESHOLD = "threshold"
STOP_KMAX = "k_max"
STOP_EXACT = "exact"


def parareal_update(coarse: AffinePropagator, fine: AffinePropagator,
                    fresh_prev: np.ndarray, old_prev: np.ndarray) -> np.ndarray:
    """One interface-state correction from two predecessor readings.

    Computes coarse(fresh_prev) + fine(old_prev) - coarse(old_prev). When the
    two readings coincide bitwise, the coarse terms cancel algebraically and
    the fine application is returned directly; that keeps already-converged
    states bitwise stable instead of accumulating rounding noise.
    """
    if np.array_equal(fresh_prev, old_prev):
        return fine.apply(old_prev)
    return (coarse.apply(fresh_prev) + fine.apply(old_prev)) - coarse.apply(old_prev)


def sequential_fine_solve(fine: AffinePropagator, u0, p: int) -> BlockVector:
    """Propagate u0 across all p subintervals with the fine map only.

    This is the reference solution every parallel variant must reproduce.
    """
    if p < 1:
        raise ValueError(f"need p >= 1 subintervals, got {p}")
    state = np.asarray(u0, dtype=float).reshape(-1)
    rows = [state]
    for _ in range(p):
        state = fine.apply(state)
        rows.append(state)
    return BlockVector(np.stack(rows))


def coarse_init(coarse: AffinePropagator, u0, p: int) -> BlockVector:
    """Initial interface states from a sequential coarse pass."""
    if p < 1:
        raise ValueError(f"need p >= 1 subintervals, got {p}")
    state = np.asarray(u0, dtype=float).reshape(-1)
    rows = [state]
    for _ in range(p):
        state = coarse.apply(state)
        rows.append(state)
    return BlockVector(np.stack(rows))


def parareal_iterate(coarse: AffinePropagator, fine: AffinePropagator,
                     lam: BlockVector) -> BlockVector:
    """One full sweep over all interface states, ascending in i.

    The coarse term of component i uses the predecessor already updated in
    this sweep; component 0 is pinned to its current value.
    """
    new = lam.copy()
    for i in range(1, lam.n_blocks):
        new.data[i] = parareal_update(coarse, fine, new.data[i - 1], lam.data[i - 1])
    return new


@dataclass
class SyncTrace:
    """Record of a synchronous run: all iterates plus stop bookkeeping."""

    iterates: list[BlockVector]
    k_final: int
    stop_reason: str
    deltas: list[float]

    def to_json(self, include_iterates: bool = False) -> str:
        doc = {
            "k_final": self.k_final,
            "stop_reason": self.stop_reason,
            "deltas": list(self.deltas),
        }
        if include_iterates:
            doc["iterates"] = [it.data.tolist() for it in self.iterates]
        return json.dumps(doc, sort_keys=True)


def run_parareal(coarse: AffinePropagator, fine: AffinePropagator, u0, p: int,
                 epsilon: float, k_max: int | None = None) -> SyncTrace:
    """Iterate from the coarse initialization until a stop condition fires.

    Stops when the sweep-to-sweep change drops strictly below epsilon
    ("threshold"), when k reaches p ("exact": the iterate now equals the
    sequential fine solution), or at an explicit smaller budget ("k_max").
    Component i is frozen once i < k: by then it carries its exact value, so
    recomputing it would only waste the corresponding processor.
    """
    if epsilon < 0.0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    cap = p if k_max is None else min(int(k_max), p)
    if cap < 1:
        raise ValueError(f"iteration budget must allow k >= 1, got k_max={k_max}")
    lam = coarse_init(coarse, u0, p)
    iterates = [lam]
    deltas: list[float] = []
    stop_reason = STOP_KMAX
    k = 0
    while k < cap:
        prev = iterates[-1]
        k += 1
        new = prev.copy()
        # Components below k are already exact; Algorithm-style freeze.
        for i in range(k, p + 1):
            new.data[i] = parareal_update(coarse, fine, new.data[i - 1], prev.data[i - 1])
        delta = (new - prev).max_abs()
        iterates.append(new)
        deltas.append(delta)
        if delta < epsilon:
            stop_reason = STOP_THRESHOLD
            break
        if k == p:
            stop_reason = STOP_EXACT
            break
        if k == cap:
            stop_reason = STOP_KMAX
            break
    return SyncTrace(iterates=iterates, k_final=k, stop_reason=stop_reason, deltas=deltas)


@dataclass(eq=False)
class BlockSystem:
    """All-at-once form of the interface conditions.

    a_block has identity diagonal blocks and minus-the-fine-map subdiagonal
    blocks; m_block is the coarse preconditioner with the same shape. The
    right-hand side stacks the initial state followed by p copies of the fine
    map's offset. The iteration is exactly preconditioned Richardson:
    lam_next = (I - M^{-1} A) lam + M^{-1} b.
    """

    a_block: np.ndarray
    m_block: np.ndarray
    rhs: np.ndarray
    p: int
    dim: int

    @property
    def coarse_matrix(self) -> np.ndarray:
        d = self.dim
        return -self.m_block[d : 2 * d, 0:d]

    def solve_preconditioner(self, rhs: np.ndarray) -> np.ndarray:
        """Solve m_block @ y = rhs by forward block substitution.

        m_block is unit lower block bidiagonal, so p substitution passes
        suffice; no explicit inverse is ever formed.
        """
        r = np.asarray(rhs, dtype=float)
        if r.shape[0] != (self.p + 1) * self.dim:
            raise DimensionError("rhs size does not match the block system")
        vec_in = r.ndim == 1
        mat = r[:, None] if vec_in else r
        d = self.dim
        g = self.coarse_matrix
        out = np.empty_like(mat)
        out[0:d] = mat[0:d]
        for i in range(1, self.p + 1):
            lo = i * d
            out[lo : lo + d] = mat[lo : lo + d] + g @ out[lo - d : lo]
        return out[:, 0] if vec_in else out

    def iteration_matrix(self) -> np.ndarray:
        """I - M^{-1} A, assembled via forward block substitutions."""
        n = (self.p + 1) * self.dim
        return np.eye(n) - self.solve_preconditioner(self.a_block)

    def richardson_step(self, lam: BlockVector) -> BlockVector:
        """Apply lam -> (I - M^{-1} A) lam + M^{-1} b without forming I - M^{-1}A."""
        flat = lam.flat
        residual = self.rhs - self.a_block @ flat
        updated = flat + self.solve_preconditioner(residual)
        return BlockVector.from_flat(updated, self.p + 1)


def build_parareal_system(coarse: AffinePropagator, fine: AffinePropagator,
                          u0, p: int) -> BlockSystem:
    """Assemble the all-at-once system whose fixed point is the fine solution."""
    if p < 1:
        raise ValueError(f"need p >= 1 subintervals, got {p}")
    if coarse.dim != fine.dim:
        raise DimensionError("coarse and fine propagators differ in dimension")
    d = fine.dim
    start = np.asarray(u0, dtype=float).reshape(-1)
    if start.shape[0] != d:
        raise DimensionError(f"initial state has dim {start.shape[0]}, expected {d}")
    n = (p + 1) * d
    a_block = np.eye(n)
    m_block = np.eye(n)
    rhs = np.zeros(n)
    rhs[0:d] = start
    for i in range(1, p + 1):
        lo = i * d
        a_block[lo : lo + d, lo - d : lo] = -fine.matrix
        m_block[lo : lo + d, lo - d : lo] = -coarse.matrix
        rhs[lo : lo + d] = fine.offset
    return BlockSystem(a_block=a_block, m_block=m_block, rhs=rhs, p=p, dim=d)
