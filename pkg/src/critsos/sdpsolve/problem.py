"""Data containers for block-diagonal semidefinite programs.

The problem is always stated in maximisation form::

    maximise    sum_b <C_b, X_b> + c . u
    subject to  sum_b <A_{i,b}, X_b> + (F u)_i = b_i     i = 1..m
                X_b PSD,  u free
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITERATIONS = "max_iterations"
    NUMERICAL_FAILURE = "numerical_failure"

    def __str__(self) -> str:
        return self.value


@dataclass
class SdpProblem:
    block_labels: list
    block_dims: list
    free_labels: list
    A: list  # per block: (m, dim, dim) symmetric slices
    F: np.ndarray  # (m, nfree)
    b: np.ndarray  # (m,)
    c: np.ndarray  # (nfree,)
    C: list | None = None  # per block objective matrices; None means zero
    row_labels: list = field(default_factory=list)

    def __post_init__(self):
        self.block_dims = [int(d) for d in self.block_dims]
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        m = self.b.shape[0]
        self.F = np.asarray(self.F, dtype=float).reshape(m, -1) if m else \
            np.zeros((0, len(self.free_labels)))
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        self.A = [np.asarray(a, dtype=float).reshape(m, d, d) for a, d in zip(self.A, self.block_dims)]
        if self.C is None:
            self.C = [np.zeros((d, d)) for d in self.block_dims]
        else:
            self.C = [np.asarray(cb, dtype=float).reshape(d, d) for cb, d in zip(self.C, self.block_dims)]
        if not self.row_labels:
            self.row_labels = [f"row{i + 1}" for i in range(m)]
        self.validate()

    def validate(self) -> None:
        m = self.num_rows
        nb = len(self.block_dims)
        if len(self.block_labels) != nb or len(self.A) != nb or len(self.C) != nb:
            raise ValueError("block metadata lengths disagree")
        if any(d <= 0 for d in self.block_dims):
            raise ValueError("block dimensions must be positive")
        k = len(self.free_labels)
        if self.F.shape != (m, k) or self.c.shape != (k,):
            raise ValueError("free-variable data has inconsistent shape")
        if len(self.row_labels) != m:
            raise ValueError("one label per equality row is required")
        for a in self.A:
            if not np.array_equal(a, np.swapaxes(a, 1, 2)):
                raise ValueError("constraint matrices must be symmetric")
        for cb in self.C:
            if not np.array_equal(cb, cb.T):
                raise ValueError("objective matrices must be symmetric")

    @property
    def num_rows(self) -> int:
        return int(self.b.shape[0])

    @property
    def num_free(self) -> int:
        return len(self.free_labels)

    def apply(self, X: list, u: np.ndarray) -> np.ndarray:
        """Left-hand side of every equality at (X, u)."""
        out = self.F @ u if self.num_free else np.zeros(self.num_rows)
        for a, x in zip(self.A, X):
            out = out + np.tensordot(a, x, axes=([1, 2], [0, 1]))
        return out

    def objective(self, X: list, u: np.ndarray) -> float:
        val = float(self.c @ u) if self.num_free else 0.0
        for cb, x in zip(self.C, X):
            val += float(np.sum(cb * x))
        return val


@dataclass
class SolverSettings:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    eig_tol: float = 1e-7
    max_iterations: int = 200
    verbosity: int = 0
    regularization: float = 1e-8  # trace penalty for the fallback solve; 0 disables it

    def __post_init__(self):
        for name in ("feas_tol", "gap_tol", "eig_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.regularization < 0:
            raise ValueError("regularization must be non-negative")
        if self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")


@dataclass
class SdpSolution:
    status: Status
    objective: float
    block_values: list
    free_values: np.ndarray
    primal_residual: float
    dual_residual: float
    duality_gap: float
    iterations: int = 0
    dual_objective: float = float("nan")
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL
