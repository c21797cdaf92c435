"""Linear equality constraints on the coefficient vector.

The estimator restricts coefficients to the null space of C^T for a
full-column-rank p x r matrix C. The compositional case is C = 1_p,
forcing the coefficients to sum to zero so the fit is invariant to the
unknown per-sample scaling of the covariates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_matrix, check_vector, freeze_array

_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class ConstraintSpec:
    """Constraint C^T beta = 0 with a cached orthonormal basis of col(C).

    basis: p x r with orthonormal columns spanning col(C). Projection onto
    the feasible set is I - basis @ basis.T.
    """

    matrix: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        mat = check_matrix(self.matrix, "constraint matrix")
        p, r = mat.shape
        if not 1 <= r < p:
            raise ValueError(f"constraint matrix must be p x r with 1 <= r < p, got {p} x {r}")
        q, rr = np.linalg.qr(mat)
        diag = np.abs(np.diag(rr))
        if diag.min() <= _RANK_RTOL * max(diag.max(), 1.0):
            raise ValueError("constraint matrix does not have full column rank")
        object.__setattr__(self, "matrix", freeze_array(mat))
        object.__setattr__(self, "basis", freeze_array(q))

    @classmethod
    def from_matrix(cls, matrix) -> "ConstraintSpec":
        mat = check_matrix(matrix, "constraint matrix")
        q, _ = np.linalg.qr(mat)
        return cls(matrix=mat, basis=q)

    @classmethod
    def sum_zero(cls, p: int) -> "ConstraintSpec":
        """The compositional constraint sum(beta) = 0 on p coefficients."""
        if p < 2:
            raise ValueError(f"need p >= 2 coefficients, got {p}")
        return cls.from_matrix(np.ones((p, 1)))

    @property
    def p(self) -> int:
        return self.matrix.shape[0]

    @property
    def r(self) -> int:
        return self.matrix.shape[1]

    def residual(self, beta) -> np.ndarray:
        """C^T beta, zero when beta is feasible."""
        beta = check_vector(beta, length=self.p, name="beta")
        return self.matrix.T @ beta

    def project(self, beta) -> np.ndarray:
        """Euclidean projection of beta onto the feasible subspace."""
        beta = check_vector(beta, length=self.p, name="beta")
        return beta - self.basis @ (self.basis.T @ beta)


def projector_null_space(constraint: ConstraintSpec) -> np.ndarray:
    """The p x p orthogonal projector onto {beta : C^T beta = 0}."""
    q = constraint.basis
    return np.eye(constraint.p) - q @ q.T


def center_design(design, constraint: ConstraintSpec) -> np.ndarray:
    """Project the design rows onto the feasible subspace.

    Predictions B beta for feasible beta are unchanged, so the fit may be
    computed on the centered design. With C = 1_p this subtracts the row
    mean, removing the per-sample scale of the raw covariates.
    """
    b = check_matrix(design, "design")
    if b.shape[1] != constraint.p:
        raise ValueError(
            f"design has {b.shape[1]} columns but constraint expects {constraint.p}"
        )
    q = constraint.basis
    return b - (b @ q) @ q.T


@dataclass(frozen=True)
class RegressionData:
    """A response paired with a design and the constraint it is fit under."""

    design: np.ndarray
    response: np.ndarray
    constraint: ConstraintSpec

    def __post_init__(self):
        design = check_matrix(self.design, "design")
        response = check_vector(self.response, length=design.shape[0], name="response")
        if design.shape[1] != self.constraint.p:
            raise ValueError(
                f"design has {design.shape[1]} columns but constraint expects {self.constraint.p}"
            )
        object.__setattr__(self, "design", freeze_array(design))
        object.__setattr__(self, "response", freeze_array(response))

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]
