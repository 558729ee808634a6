"""Haagerup tensor norm, its transpose, and balanced representations.

The norm of ``w = sum_i a_i (x) b_i`` is the infimum of
``||sum a_i a_i*||^{1/2} ||sum b_i* b_i||^{1/2}`` over all representations of
``w``.  After reducing to ``r = rank(w)`` terms with linearly independent
stacks, every representation of length r is reached from a fixed one by an
invertible r x r matrix ``gamma``; the row sum then depends only on
``X = gamma* gamma > 0`` and the column sum only on ``X^{-1}``:

    sum a'_k a'_k* = Phi(X)     with  Phi(X)  = sum_{j,l} X[l,j] a_j a_l*
    sum b'_k* b'_k = Psi(X^-1)  with  Psi(Y)  = sum_{j,l} Y[l,j] b_j* b_l

Both maps are positive and monotone, so with the Schur-complement coupling
``[[Y, I], [I, X]] >= 0`` (equivalent to ``Y >= X^{-1}``) the norm is the
value of the convex program

    minimize t   s.t.   Phi(X) <= t I,  Psi(Y) <= t I,  [[Y, I], [I, X]] >= 0,

where the scaling freedom X -> cX equalizes the two factors at the optimum.
The optimizer X is the certificate; the achieving representation is recovered
from any square root gamma of X.

A dense grid + local descent oracle over positive definite X (rank <= 2 only)
is provided as an independent cross-check of the convex solver.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import cvxpy as cp
import numpy as np
from scipy.optimize import minimize

from .linalg import adjoint, op_norm, unvec
from .opspace import TensorRep, col_quantity, row_quantity

RANK_CUTOFF = 1e-10
SOLVER_TOL = 1e-6
MAX_ITERS = 200


@dataclass
class HNormResult:
    """Norm value, an achieving representation, and the optimizing matrix."""

    value: float
    representation: TensorRep
    certificate: np.ndarray | None
    solver_value: float
    status: str

    def to_json(self) -> dict:
        from .linalg import matrix_to_json

        return {
            "value": self.value,
            "representation": self.representation.to_json(),
            "certificate": None if self.certificate is None
            else matrix_to_json(self.certificate),
            "solver_value": self.solver_value,
            "status": self.status,
        }


def rank_reduce(t: TensorRep, cutoff: float = RANK_CUTOFF) -> TensorRep:
    """Rewrite ``t`` with linearly independent stacks of length rank(w).

    Works on the coefficient tensor of w; singular values below
    ``cutoff * sigma_max`` are dropped.  A numerically zero tensor collapses
    to the single pair (0, 0).
    """
    left_shape = t.left[0].shape
    right_shape = t.right[0].shape
    T = t.coefficient_tensor()
    uu, ss, vh = np.linalg.svd(T, full_matrices=False)
    if ss.size == 0 or ss[0] <= 0:
        keep = 0
    else:
        keep = int(np.sum(ss > cutoff * ss[0]))
    if keep == 0:
        return TensorRep((np.zeros(left_shape, dtype=complex),),
                         (np.zeros(right_shape, dtype=complex),))
    # T = sum_s s_s outer(U[:, s], Vh[s, :]), so the right stack takes the
    # Vh rows as they are.
    left = tuple(unvec(np.sqrt(ss[k]) * uu[:, k], left_shape) for k in range(keep))
    right = tuple(unvec(np.sqrt(ss[k]) * vh[k, :], right_shape) for k in range(keep))
    return TensorRep(left, right)


def _phi_row(X, mats):
    """sum_{j,l} X[l,j] m_j m_l* as a cvxpy expression or ndarray."""
    r = len(mats)
    acc = 0
    for j in range(r):
        for l in range(r):
            acc = acc + X[l, j] * (mats[j] @ adjoint(mats[l]))
    return acc


def _psi_col(Y, mats):
    """sum_{j,l} Y[l,j] m_j* m_l as a cvxpy expression or ndarray."""
    r = len(mats)
    acc = 0
    for j in range(r):
        for l in range(r):
            acc = acc + Y[l, j] * (adjoint(mats[j]) @ mats[l])
    return acc


def _solve_sdp(left, right, solver_tol: float, max_iters: int):
    r = len(left)
    n = left[0].shape[0]
    m = right[0].shape[0]
    X = cp.Variable((r, r), hermitian=True)
    Y = cp.Variable((r, r), hermitian=True)
    t = cp.Variable(nonneg=True)
    eye_r = np.eye(r)
    cons = [
        t * np.eye(n) - _phi_row(X, left) >> 0,
        t * np.eye(m) - _psi_col(Y, right) >> 0,
        cp.bmat([[Y, eye_r], [eye_r, X]]) >> 0,
    ]
    prob = cp.Problem(cp.Minimize(t), cons)
    status = _robust_solve(prob, solver_tol, max_iters)
    return float(t.value), np.asarray(X.value), status


def _robust_solve(prob: cp.Problem, solver_tol: float, max_iters: int) -> str:
    """Interior-point solve, first-order fallback; returns the final status."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            prob.solve(solver=cp.CLARABEL,
                       tol_gap_abs=solver_tol * 1e-2,
                       tol_gap_rel=solver_tol * 1e-2,
                       tol_feas=solver_tol * 1e-2,
                       max_iter=max_iters)
        except cp.SolverError:
            prob.solve(solver=cp.SCS, eps=solver_tol * 1e-2, max_iters=200_000)
        if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            prob.solve(solver=cp.SCS, eps=solver_tol * 1e-2, max_iters=200_000)
    return str(prob.status)


def _recover_representation(reduced: TensorRep, X: np.ndarray) -> TensorRep:
    """Representation whose row/col sums realize Phi(X) and Psi(X^{-1}).

    gamma is the Hermitian square root of X (eigenvalues floored to keep it
    invertible); a'_k = sum_j gamma[k,j] a_j and b'_k = sum_j inv(gamma)[j,k]
    b_j resum to w exactly for any invertible gamma.
    """
    r = len(reduced.left)
    Xh = (X + adjoint(X)) / 2
    w, v = np.linalg.eigh(Xh)
    floor = max(w.max(), 1e-300) * 1e-14
    w = np.maximum(w, floor)
    gamma = (v * np.sqrt(w)) @ adjoint(v)
    gamma_inv = (v / np.sqrt(w)) @ adjoint(v)
    left = tuple(sum(gamma[k, j] * reduced.left[j] for j in range(r))
                 for k in range(r))
    right = tuple(sum(gamma_inv[j, k] * reduced.right[j] for j in range(r))
                  for k in range(r))
    return TensorRep(left, right)


def haagerup_norm(t: TensorRep, solver_tol: float = SOLVER_TOL,
                  max_iters: int = MAX_ITERS) -> HNormResult:
    """Haagerup norm with an achieving representation and certificate X.

    The reported value is the row*col product of the recovered
    representation, hence always a valid upper bound on the infimum; the raw
    convex objective is kept in ``solver_value``.
    """
    reduced = rank_reduce(t)
    if op_norm(reduced.left[0]) == 0.0 and len(reduced.left) == 1:
        return HNormResult(0.0, reduced, None, 0.0, "zero")
    if len(reduced.left) == 1:
        # One-term representations are optimal at rank one.
        a, b = reduced.left[0], reduced.right[0]
        value = op_norm(a) * op_norm(b)
        return HNormResult(value, reduced, np.array([[1.0 + 0.0j]]), value, "rank_one")
    tval, X, status = _solve_sdp(list(reduced.left), list(reduced.right),
                                 solver_tol, max_iters)
    rep = _recover_representation(reduced, X)
    achieved = row_quantity(rep.left) * col_quantity(rep.right)
    return HNormResult(float(achieved), rep, X, tval, status)


def transposed_haagerup_norm(t: TensorRep, solver_tol: float = SOLVER_TOL,
                             max_iters: int = MAX_ITERS) -> HNormResult:
    """Haagerup norm of the flipped tensor sum_i b_i (x) a_i."""
    return haagerup_norm(t.flip(), solver_tol=solver_tol, max_iters=max_iters)


def _objective_on_X(X, left, right) -> float:
    """sqrt(||Phi(X)|| * ||Psi(X^{-1})||), the quantity the infimum runs over."""
    try:
        Xi = np.linalg.inv(X)
    except np.linalg.LinAlgError:
        return np.inf
    rowq = op_norm(_phi_row(X, left))
    colq = op_norm(_psi_col(Xi, right))
    return float(np.sqrt(rowq * colq))


def grid_descent_oracle(t: TensorRep, grid_size: int = 9,
                        log_range: float = 2.0) -> float:
    """Independent Haagerup-norm oracle: dense grid + Nelder-Mead descent.

    Parametrizes 2 x 2 positive definite X (determinant normalized away by
    scaling invariance) on a dense grid, evaluates the representation value
    directly, and polishes the best grid point by local descent.  Only
    supports reduced rank <= 2; deliberately shares no code path with the
    convex solver.
    """
    reduced = rank_reduce(t)
    left, right = list(reduced.left), list(reduced.right)
    r = len(left)
    if r == 1:
        if op_norm(left[0]) == 0.0:
            return 0.0
        return op_norm(left[0]) * op_norm(right[0])
    if r > 2:
        raise ValueError("oracle supports rank <= 2 only")

    def from_params(p):
        # X = [[exp(s), z], [conj(z), exp(-s)]] + ridge to keep X > 0.
        s, zr, zi = p
        s = np.clip(s, -log_range * 3, log_range * 3)
        x11, x22 = np.exp(s), np.exp(-s)
        cap = 0.999 * np.sqrt(x11 * x22)
        z = zr + 1j * zi
        if abs(z) > cap:
            z *= cap / abs(z)
        return np.array([[x11, z], [np.conj(z), x22]])

    best_val, best_p = np.inf, None
    ss = np.linspace(-log_range, log_range, grid_size)
    off = np.linspace(-0.95, 0.95, grid_size)
    for s in ss:
        cap = 0.999  # |z| < sqrt(x11 x22) = 1 on the det-normalized slice
        for zr in off * cap:
            for zi in off * cap:
                p = (s, zr, zi)
                val = _objective_on_X(from_params(p), left, right)
                if val < best_val:
                    best_val, best_p = val, p
    res = minimize(lambda p: _objective_on_X(from_params(p), left, right),
                   np.asarray(best_p), method="Nelder-Mead",
                   options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 4000})
    return float(min(best_val, res.fun))


def balance_representation(w: TensorRep, h_opt: HNormResult,
                           t_opt: HNormResult, tol: float = 1e-8) -> TensorRep:
    """Single weighted representation realizing both norms at once.

    Given near-optimal representations for the norm of ``w`` (families
    ``a, b``) and of its transpose (families for the flipped tensor), solve
    ``a1 = gamma a`` and ``b1 = b delta`` through the vectorized stacks,
    check ``delta gamma = I``, split ``gamma = g1 D g2`` by SVD and transform
    by the unitary ``g2``.  The output carries weights ``lambda_i = D_ii^2``:

        row(a_hat) * col(b_hat)                      = ||w||_h
        col(a_hat; lambda) * row(b_hat; 1/lambda)    = ||transpose w||_h

    both within the tolerance the two inputs were solved to.
    """
    A = list(h_opt.representation.left)
    B = list(h_opt.representation.right)
    # t_opt represents the flipped tensor: its left family is the b-side.
    A1 = list(t_opt.representation.right)
    B1 = list(t_opt.representation.left)
    r = len(A)
    if len(A1) != r:
        raise ValueError("the two optimal representations have different ranks")

    Va = np.stack([m.ravel() for m in A])        # r x N^2
    Va1 = np.stack([m.ravel() for m in A1])
    Vb = np.stack([m.ravel() for m in B])
    Vb1 = np.stack([m.ravel() for m in B1])
    # a1_k = sum_j gamma[k, j] a_j  =>  Va1 = gamma @ Va
    gamma = Va1 @ np.linalg.pinv(Va)
    # b1_i = sum_j delta[j, i] b_j  =>  Vb1 = delta^T @ Vb
    delta = (Vb1 @ np.linalg.pinv(Vb)).T
    resid = op_norm(delta @ gamma - np.eye(r))
    if resid > tol:
        raise ValueError(
            f"inconsistent optimal representations: ||delta gamma - I|| = {resid:.3e}")

    g1, d, g2h = np.linalg.svd(gamma)
    g2 = g2h                      # gamma = g1 @ diag(d) @ g2
    a_hat = tuple(sum(g2[k, j] * A[j] for j in range(r)) for k in range(r))
    g2_inv = adjoint(g2)
    b_hat = tuple(sum(g2_inv[j, k] * B[j] for j in range(r)) for k in range(r))
    lam = d ** 2
    return TensorRep(a_hat, b_hat, lam)
