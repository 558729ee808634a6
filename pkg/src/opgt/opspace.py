"""Operator spaces as based subspaces of matrix algebras.

An :class:`OperatorSpace` is a span of linearly independent matrices inside
M_N together with an exactness-bound parameter (1 for a full matrix algebra,
user-supplied otherwise; computing it in general is out of reach).

A :class:`TensorRep` holds an element ``w = sum_i a_i (x) b_i`` of a tensor
product of two such spaces as paired matrix lists, with optional positive
weights used by the balanced representations of the Haagerup-norm module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    DimensionError,
    adjoint,
    as_matrix,
    kron,
    matrix_from_json,
    matrix_to_json,
    op_norm,
)

INDEPENDENCE_TOL = 1e-8


@dataclass(frozen=True)
class OperatorSpace:
    """A subspace of M_N given by a linearly independent matrix basis."""

    basis: tuple
    exactness_bound: float = 1.0

    def __post_init__(self):
        basis = tuple(as_matrix(b) for b in self.basis)
        object.__setattr__(self, "basis", basis)
        if not basis:
            raise DimensionError("operator space needs a nonempty basis")
        shape = basis[0].shape
        if shape[0] != shape[1]:
            raise DimensionError("basis matrices must be square")
        if any(b.shape != shape for b in basis):
            raise DimensionError("basis matrices must share one ambient algebra")
        if self.exactness_bound < 1.0:
            raise ValueError("exactness_bound must be >= 1")
        # Linear independence via conditioning of the vectorized stack.
        stack = np.stack([b.ravel() for b in basis])
        svals = np.linalg.svd(stack, compute_uv=False)
        if svals[-1] <= INDEPENDENCE_TOL * svals[0]:
            raise ValueError("basis is not linearly independent at tolerance "
                             f"{INDEPENDENCE_TOL:.1e}")

    @property
    def ambient_dim(self) -> int:
        return self.basis[0].shape[0]

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def is_full(self) -> bool:
        return self.dim == self.ambient_dim ** 2

    @classmethod
    def full_matrix_space(cls, n: int, exactness_bound: float = 1.0) -> "OperatorSpace":
        """M_n with its matrix-unit basis e_00, e_01, ..., in row-major order."""
        basis = []
        for i in range(n):
            for j in range(n):
                m = np.zeros((n, n), dtype=complex)
                m[i, j] = 1.0
                basis.append(m)
        return cls(tuple(basis), exactness_bound)

    def element(self, coeffs) -> np.ndarray:
        c = np.asarray(coeffs, dtype=complex)
        if c.shape != (self.dim,):
            raise DimensionError(f"expected {self.dim} coefficients, got {c.shape}")
        return np.tensordot(c, np.stack(self.basis), axes=1)

    def coeffs(self, x, tol: float = 1e-8) -> np.ndarray:
        """Expand ``x`` in the basis; raises if x is outside the span."""
        m = as_matrix(x)
        if m.shape != self.basis[0].shape:
            raise DimensionError("ambient dimension mismatch")
        stack = np.stack([b.ravel() for b in self.basis]).T      # N^2 x dim
        c, *_ = np.linalg.lstsq(stack, m.ravel(), rcond=None)
        resid = np.linalg.norm(stack @ c - m.ravel())
        scale = max(np.linalg.norm(m.ravel()), 1e-300)
        if resid > tol * scale:
            raise ValueError(f"matrix lies outside the span (residual {resid:.3e})")
        return c

    def conjugate_space(self) -> "OperatorSpace":
        """The entrywise-conjugated subspace, with conjugated basis."""
        return OperatorSpace(tuple(np.conj(b) for b in self.basis),
                             self.exactness_bound)

    def to_json(self) -> dict:
        return {
            "ambient_dim": self.ambient_dim,
            "basis": [matrix_to_json(b) for b in self.basis],
            "exactness_bound": float(self.exactness_bound),
        }

    @classmethod
    def from_json(cls, d: dict) -> "OperatorSpace":
        basis = tuple(matrix_from_json(b) for b in d["basis"])
        space = cls(basis, float(d.get("exactness_bound", 1.0)))
        if "ambient_dim" in d and int(d["ambient_dim"]) != space.ambient_dim:
            raise DimensionError("ambient_dim field disagrees with basis shapes")
        return space


@dataclass(frozen=True)
class TensorRep:
    """w = sum_i a_i (x) b_i, optionally with positive weights lambda_i."""

    left: tuple
    right: tuple
    weights: np.ndarray | None = field(default=None)

    def __post_init__(self):
        left = tuple(as_matrix(m) for m in self.left)
        right = tuple(as_matrix(m) for m in self.right)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        if len(left) != len(right) or not left:
            raise DimensionError("left and right families must have equal length >= 1")
        if any(m.shape != left[0].shape for m in left):
            raise DimensionError("left family must live in one matrix algebra")
        if any(m.shape != right[0].shape for m in right):
            raise DimensionError("right family must live in one matrix algebra")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            object.__setattr__(self, "weights", w)
            if w.shape != (len(left),):
                raise DimensionError("weights length must match the families")
            if np.any(w <= 0):
                raise ValueError("weights must be strictly positive")

    @property
    def rank_bound(self) -> int:
        return len(self.left)

    def flip(self) -> "TensorRep":
        """Swap tensor legs: represents the transposed tensor."""
        return TensorRep(self.right, self.left, self.weights)

    def dense(self) -> np.ndarray:
        """The element realized as sum_i kron(a_i, b_i)."""
        return sum(kron(a, b) for a, b in zip(self.left, self.right))

    def coefficient_tensor(self) -> np.ndarray:
        """Coefficients against entry bases: T[p, q] with p over left entries."""
        acc = 0
        for a, b in zip(self.left, self.right):
            acc = acc + np.outer(a.ravel(), b.ravel())
        return acc

    def to_json(self) -> dict:
        out = {
            "left": [matrix_to_json(m) for m in self.left],
            "right": [matrix_to_json(m) for m in self.right],
        }
        if self.weights is not None:
            out["weights"] = self.weights.tolist()
        return out

    @classmethod
    def from_json(cls, d: dict) -> "TensorRep":
        w = d.get("weights")
        return cls(tuple(matrix_from_json(m) for m in d["left"]),
                   tuple(matrix_from_json(m) for m in d["right"]),
                   None if w is None else np.asarray(w, dtype=float))


def min_norm(t: TensorRep) -> float:
    """Operator norm of the Kronecker realization sum_i kron(a_i, b_i)."""
    return op_norm(t.dense())


def row_quantity(ms) -> float:
    """|| sum_i m_i m_i* ||^{1/2}."""
    ms = [as_matrix(m) for m in ms]
    if not ms:
        raise DimensionError("empty family")
    return float(np.sqrt(op_norm(sum(m @ adjoint(m) for m in ms))))


def col_quantity(ms) -> float:
    """|| sum_i m_i* m_i ||^{1/2}."""
    ms = [as_matrix(m) for m in ms]
    if not ms:
        raise DimensionError("empty family")
    return float(np.sqrt(op_norm(sum(adjoint(m) @ m for m in ms))))


def weighted_quantity(ms, weights, side: str) -> float:
    """|| sum_i w_i m_i* m_i ||^{1/2} (col) or || sum_i w_i m_i m_i* ||^{1/2} (row)."""
    ms = [as_matrix(m) for m in ms]
    w = np.asarray(weights, dtype=float)
    if not ms:
        raise DimensionError("empty family")
    if w.shape != (len(ms),):
        raise DimensionError("weights length must match the family")
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive")
    if side == "col":
        return float(np.sqrt(op_norm(sum(wi * (adjoint(m) @ m) for wi, m in zip(w, ms)))))
    if side == "row":
        return float(np.sqrt(op_norm(sum(wi * (m @ adjoint(m)) for wi, m in zip(w, ms)))))
    raise ValueError("side must be 'row' or 'col'")
