"""Linear initial value problems and one-step integrators as affine maps.

A propagator over a subinterval is materialized once as ``state -> matrix @
state + offset`` so repeated application during the iteration costs a single
matvec. Costs are tracked in solve units: one implicit solve per step.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateProblemError,
    DimensionError,
    SingularMatrixError,
    SingularSystemError,
)
from .linalg import as_matrix, lu_solve

UNIT_STEP_COST = 1.0  # cost units charged per implicit solve


@dataclass
class LinearIVP:
    """u'(t) = A u(t) + c on [0, T] with u(0) = u0."""

    a_mat: np.ndarray
    forcing: np.ndarray
    u0: np.ndarray
    t_final: float
    label: str = "ivp"

    def __post_init__(self):
        self.a_mat = as_matrix(self.a_mat)
        if self.a_mat.shape[0] != self.a_mat.shape[1]:
            raise DimensionError(f"system matrix must be square, got {self.a_mat.shape}")
        self.forcing = np.asarray(self.forcing, dtype=float).reshape(-1)
        self.u0 = np.asarray(self.u0, dtype=float).reshape(-1)
        n = self.a_mat.shape[0]
        if self.forcing.shape[0] != n or self.u0.shape[0] != n:
            raise DimensionError("forcing and initial state must match the matrix size")
        self.t_final = float(self.t_final)
        if not self.t_final > 0.0:
            raise ValueError(f"final time must be positive, got {self.t_final}")

    @property
    def dim(self) -> int:
        return self.a_mat.shape[0]

    def to_dict(self) -> dict:
        return {
            "A": self.a_mat.tolist(),
            "c": self.forcing.tolist(),
            "u0": self.u0.tolist(),
            "T": self.t_final,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LinearIVP":
        return cls(doc["A"], doc["c"], doc["u0"], doc["T"], doc.get("label", "ivp"))


@dataclass
class TimeDecomposition:
    """Uniform split of [0, T] into p subintervals of width coarse_dt.

    fine_dt must divide coarse_dt exactly; the implied per-subinterval fine
    step count is available as ``fine_steps``.
    """

    p: int
    coarse_dt: float
    fine_dt: float

    def __post_init__(self):
        self.p = int(self.p)
        self.coarse_dt = float(self.coarse_dt)
        self.fine_dt = float(self.fine_dt)
        if self.p < 1:
            raise ValueError(f"need at least one subinterval, got p={self.p}")
        if not self.coarse_dt > 0.0 or not self.fine_dt > 0.0:
            raise ValueError("step widths must be positive")
        steps = self.coarse_dt / self.fine_dt
        if abs(round(steps) - steps) > 1e-9 * max(steps, 1.0) or round(steps) < 1:
            raise ValueError(
                f"fine step {self.fine_dt} does not divide subinterval {self.coarse_dt}"
            )

    @property
    def fine_steps(self) -> int:
        return int(round(self.coarse_dt / self.fine_dt))

    @property
    def t_final(self) -> float:
        return self.p * self.coarse_dt

    @property
    def boundaries(self) -> np.ndarray:
        return np.arange(self.p + 1) * self.coarse_dt

    def to_dict(self) -> dict:
        return {"p": self.p, "coarse_dt": self.coarse_dt, "fine_dt": self.fine_dt}

    @classmethod
    def from_dict(cls, doc: dict) -> "TimeDecomposition":
        return cls(doc["p"], doc["coarse_dt"], doc["fine_dt"])


@dataclass(frozen=True, eq=False)
class AffinePropagator:
    """Exact affine action of an integrator over a fixed span.

    cost_units counts the implicit solves folded into the map; applying the
    map never re-incurs them.
    """

    matrix: np.ndarray
    offset: np.ndarray
    cost_units: float

    def apply(self, state) -> np.ndarray:
        s = np.asarray(state, dtype=float).reshape(-1)
        if s.shape[0] != self.matrix.shape[0]:
            raise DimensionError(
                f"state has dim {s.shape[0]}, propagator expects {self.matrix.shape[0]}"
            )
        return self.matrix @ s + self.offset

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def compose(second: AffinePropagator, first: AffinePropagator) -> AffinePropagator:
    """Affine map applying ``first`` then ``second``; costs add."""
    if second.dim != first.dim:
        raise DimensionError("cannot compose propagators of different dimension")
    return AffinePropagator(
        matrix=second.matrix @ first.matrix,
        offset=second.matrix @ first.offset + second.offset,
        cost_units=second.cost_units + first.cost_units,
    )


def fine_from_onestep(onestep: AffinePropagator, count: int) -> AffinePropagator:
    """Fold ``count`` applications of a one-step map into a single map."""
    if count < 1:
        raise ValueError(f"step count must be >= 1, got {count}")
    folded = onestep
    for _ in range(count - 1):
        folded = compose(onestep, folded)
    return folded


def _onestep(ivp: LinearIVP, dt: float, lhs: np.ndarray, rhs_mat: np.ndarray,
             rhs_off: np.ndarray) -> AffinePropagator:
    try:
        solved = lu_solve(lhs, np.hstack([rhs_mat, rhs_off[:, None]]))
    except SingularMatrixError as err:
        raise SingularSystemError(
            f"implicit step with dt={dt} is singular (pivot {err.pivot:.3e})",
            dt=dt,
            pivot=err.pivot,
        ) from err
    return AffinePropagator(
        matrix=solved[:, :-1], offset=solved[:, -1], cost_units=UNIT_STEP_COST
    )


def backward_euler_propagator(ivp: LinearIVP, span: float, steps: int) -> AffinePropagator:
    """Backward Euler over ``span`` in ``steps`` equal implicit steps.

    One step maps u to (I - dt A)^{-1} (u + dt c).
    """
    if steps < 1:
        raise ValueError(f"step count must be >= 1, got {steps}")
    if not span > 0.0:
        raise ValueError(f"span must be positive, got {span}")
    dt = span / steps
    eye = np.eye(ivp.dim)
    step = _onestep(ivp, dt, eye - dt * ivp.a_mat, eye, dt * ivp.forcing)
    return fine_from_onestep(step, steps)


def trapezoidal_propagator(ivp: LinearIVP, span: float, steps: int) -> AffinePropagator:
    """Trapezoidal rule over ``span`` in ``steps`` equal implicit steps.

    One step maps u to (I - dt/2 A)^{-1} ((I + dt/2 A) u + dt c).
    """
    if steps < 1:
        raise ValueError(f"step count must be >= 1, got {steps}")
    if not span > 0.0:
        raise ValueError(f"span must be positive, got {span}")
    dt = span / steps
    eye = np.eye(ivp.dim)
    half = 0.5 * dt * ivp.a_mat
    step = _onestep(ivp, dt, eye - half, eye + half, dt * ivp.forcing)
    return fine_from_onestep(step, steps)


PROPAGATOR_RULES = {
    "backward-euler": backward_euler_propagator,
    "trapezoidal": trapezoidal_propagator,
}


def heat1d_system(n_interior: int, length: float, boundary_left: float,
                  boundary_right: float, initial_temp: float,
                  t_final: float) -> LinearIVP:
    """Method-of-lines 1-D heat equation with Dirichlet boundary temperatures.

    Second-order central differences on n_interior equispaced nodes give
    A = (1/h^2) tridiag(1, -2, 1) with h = length / (n_interior + 1); the
    boundary temperatures enter the forcing at the end nodes.
    """
    if n_interior < 1:
        raise DegenerateProblemError(
            f"need at least one interior node, got {n_interior}"
        )
    if not length > 0.0:
        raise ValueError(f"rod length must be positive, got {length}")
    h = length / (n_interior + 1)
    inv_h2 = 1.0 / (h * h)
    a_mat = inv_h2 * (
        np.diag(np.full(n_interior, -2.0))
        + np.diag(np.ones(n_interior - 1), 1)
        + np.diag(np.ones(n_interior - 1), -1)
    )
    forcing = np.zeros(n_interior)
    forcing[0] += boundary_left * inv_h2
    forcing[-1] += boundary_right * inv_h2
    u0 = np.full(n_interior, float(initial_temp))
    return LinearIVP(a_mat, forcing, u0, t_final, label=f"heat1d-n{n_interior}")


def scalar_decay_system(rate: float = 1.0, initial: float = 1.0,
                        t_final: float = 1.0) -> LinearIVP:
    """u' = -rate * u, the one-dimensional smoke-test problem."""
    if not rate > 0.0:
        raise ValueError(f"decay rate must be positive, got {rate}")
    return LinearIVP([[-rate]], [0.0], [initial], t_final, label="scalar-decay")
