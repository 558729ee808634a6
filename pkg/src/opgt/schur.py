"""Schur multipliers from compact operators to trace class, at finite size.

The multiplier of a k x k coefficient matrix phi pairs as
``<M_phi a, b> = sum_ij phi_ij a_ij b_ij``.  Boundedness into trace class is
characterized by a split ``phi = a + b`` with finite cost
``sum_i sup_j |a_ij| + sum_j sup_i |b_ij|`` (solved optimally by linear
programming); complete boundedness by a rank-one domination
``|phi_ij| <= C x_i y_j`` (solved in log coordinates, where the constraint
set is affine and the objective convex).  Both optimizers work on |phi|;
phases reattach to the output pieces without changing any of the costs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .gtforms import BilinearForm
from .linalg import adjoint, as_matrix, random_complex
from .opspace import OperatorSpace


@dataclass
class BoundedSplit:
    a: np.ndarray
    b: np.ndarray
    cost: float
    dual_cost: float | None = None

    def recomputed_cost(self) -> float:
        return float(np.abs(self.a).max(axis=1).sum()
                     + np.abs(self.b).max(axis=0).sum())

    def to_json(self) -> dict:
        from .linalg import matrix_to_json
        return {"a": matrix_to_json(self.a), "b": matrix_to_json(self.b),
                "cost": self.cost, "dual_cost": self.dual_cost}


@dataclass
class RankOneDominator:
    x: np.ndarray
    y: np.ndarray
    C: float

    def domination_margin(self, phi) -> float:
        """min over entries of C x_i y_j - |phi_ij| (>= -tol when valid)."""
        phi = as_matrix(phi)
        return float((self.C * np.outer(self.x, self.y) - np.abs(phi)).min())

    def to_json(self) -> dict:
        return {"x": self.x.tolist(), "y": self.y.tolist(), "C": self.C}


def bounded_split_optimal(phi) -> BoundedSplit:
    """Cost-optimal split phi = a + b by linear programming.

    Variables: entries alpha_ij in [0, |phi_ij|] plus row caps s_i and
    column caps t_j with alpha_ij <= s_i and |phi_ij| - alpha_ij <= t_j;
    minimize sum s + sum t.  The dual objective recovered from the solver
    marginals certifies optimality.
    """
    phi = as_matrix(phi)
    k, kk = phi.shape
    absphi = np.abs(phi)
    n_a = k * kk
    n_var = n_a + k + kk
    cost = np.concatenate([np.zeros(n_a), np.ones(k), np.ones(kk)])
    rows, cols, vals, b_ub = [], [], [], []
    rr = 0
    for i in range(k):
        for j in range(kk):
            # alpha_ij - s_i <= 0
            rows += [rr, rr]
            cols += [i * kk + j, n_a + i]
            vals += [1.0, -1.0]
            b_ub.append(0.0)
            rr += 1
            # -alpha_ij - t_j <= -|phi_ij|
            rows += [rr, rr]
            cols += [i * kk + j, n_a + k + j]
            vals += [-1.0, -1.0]
            b_ub.append(-absphi[i, j])
            rr += 1
    from scipy.sparse import csr_matrix
    A_ub = csr_matrix((vals, (rows, cols)), shape=(rr, n_var))
    bounds = [(0.0, float(absphi[i, j])) for i in range(k) for j in range(kk)]
    bounds += [(0.0, None)] * (k + kk)
    res = linprog(cost, A_ub=A_ub, b_ub=np.asarray(b_ub), bounds=bounds,
                  method="highs")
    if not res.success:
        raise RuntimeError(f"linear program failed: {res.message}")
    alpha = res.x[:n_a].reshape(k, kk)
    phases = np.where(absphi > 0, phi / np.where(absphi > 0, absphi, 1.0), 1.0)
    a = alpha * phases
    b = phi - a
    # dual objective: y^T b_ub plus bound multipliers against their bounds
    dual = float(res.ineqlin.marginals @ np.asarray(b_ub))
    upper = np.array([ub if ub is not None else 0.0 for _, ub in bounds])
    dual += float(res.upper.marginals @ upper)
    return BoundedSplit(a, b, float(res.fun), dual)


def constructive_split(phi, x, y, K: float) -> BoundedSplit:
    """Index-sorted split valid under |phi_ij| <= K (x_i y_j)^{1/2}.

    After sorting so x and y are nondecreasing, entries with i <= j go to
    the column-capped piece and entries with i > j to the row-capped piece;
    Cauchy-Schwarz gives both partial costs <= K.
    """
    phi = as_matrix(phi)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k, kk = phi.shape
    if x.shape != (k,) or y.shape != (kk,):
        raise ValueError("x, y must match the matrix shape")
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("x, y must be nonnegative")
    bound = K * np.sqrt(np.outer(x, y))
    worst = (np.abs(phi) - bound).max()
    if worst > 1e-9 * max(K, 1.0):
        raise ValueError(f"precondition |phi| <= K sqrt(x y) fails by {worst:.3e}")
    pi = np.argsort(x, kind="stable")
    pj = np.argsort(y, kind="stable")
    alpha = np.zeros_like(phi)
    beta = np.zeros_like(phi)
    for si, i in enumerate(pi):
        for sj, j in enumerate(pj):
            if si <= sj:
                alpha[i, j] = phi[i, j]
            else:
                beta[i, j] = phi[i, j]
    # alpha is column-capped (sum_j sup_i), beta row-capped (sum_i sup_j)
    split = BoundedSplit(beta, alpha, 0.0)
    split.cost = split.recomputed_cost()
    return split


def rank_one_dominator(phi, iters: int = 400, tol: float = 1e-12) -> RankOneDominator:
    """Minimal C with |phi_ij| <= C x_i y_j, ||x|| = ||y|| = 1, x, y > 0.

    Alternating componentwise-minimal updates (x_i = max_j |phi_ij| / y_j
    and back) with geometric-mean rebalancing; in log coordinates each
    update is the exact block minimizer of the convex objective
    log||x|| + log||y||, so the iteration descends to the optimum.
    Zero rows and columns are dropped and reinserted with zero entries.
    """
    phi = as_matrix(phi)
    absphi = np.abs(phi)
    k, kk = absphi.shape
    row_live = absphi.max(axis=1) > 0
    col_live = absphi.max(axis=0) > 0
    if not row_live.any():
        x = np.ones(k) / np.sqrt(k)
        y = np.ones(kk) / np.sqrt(kk)
        return RankOneDominator(x, y, 0.0)
    sub = absphi[np.ix_(row_live, col_live)]
    y = np.ones(sub.shape[1])
    best = np.inf
    x = sub.max(axis=1)
    for _ in range(iters):
        x = (sub / y[None, :]).max(axis=1)
        y = (sub / x[:, None]).max(axis=0)
        # geometric-mean rebalancing keeps the iterates well scaled
        s = np.sqrt(np.linalg.norm(y) / np.linalg.norm(x))
        x, y = x * s, y / s
        val = np.linalg.norm(x) * np.linalg.norm(y)
        if best - val < tol * max(best, 1.0):
            best = min(best, val)
            break
        best = min(best, val)
    C = float(np.linalg.norm(x) * np.linalg.norm(y))
    xf = np.zeros(k)
    yf = np.zeros(kk)
    xf[row_live] = x / np.linalg.norm(x)
    yf[col_live] = y / np.linalg.norm(y)
    return RankOneDominator(xf, yf, C)


def trace_class_dominator_to_vectors(T):
    """Entrywise dominating vectors from the singular decomposition.

    With T = sum_k s_k u^k (v^k)*, the vectors
    X_i = (sum_k s_k |u^k_i|^2)^{1/2} and Y_j = (sum_k s_k |v^k_j|^2)^{1/2}
    satisfy |T_ij| <= X_i Y_j and ||X|| ||Y|| equals the trace norm.
    """
    T = as_matrix(T)
    uu, ss, vh = np.linalg.svd(T)
    X = np.sqrt(np.einsum("k,ik->i", ss, np.abs(uu[:, :ss.size]) ** 2))
    Y = np.sqrt(np.einsum("k,kj->j", ss, np.abs(vh[:ss.size, :]) ** 2))
    return X, Y


def geometric_mean_form(a, b) -> np.ndarray:
    """Entrywise geometric mean sqrt(a_ij b_ij) of nonnegative matrices."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("entries must be nonnegative")
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    return np.sqrt(a * b)


def multiplier_form(phi) -> BilinearForm:
    """The bilinear form (a, b) -> sum_ij phi_ij a_ij b_ij on M_k x M_k."""
    phi = as_matrix(phi)
    k, kk = phi.shape
    if k != kk:
        raise ValueError("square multiplier required for the form view")
    E = OperatorSpace.full_matrix_space(k)
    coeffs = np.zeros((k * k, k * k), dtype=complex)
    for i in range(k):
        for j in range(k):
            idx = i * k + j
            coeffs[idx, idx] = phi[i, j]
    return BilinearForm(E, E, coeffs)


def averaging_projection(form: BilinearForm) -> np.ndarray:
    """Diagonal-unitary average of a form on M_k x M_k as a Schur matrix.

    Conjugating by random diagonal phases kills every coefficient except the
    matched matrix-unit pairs, so the average has the closed form
    psi_ij = U(e_ij, e_ij).
    """
    E = form.left_space
    F = form.right_space
    if E.ambient_dim != F.ambient_dim:
        raise ValueError("both domains must sit in the same matrix size")
    k = E.ambient_dim
    units = OperatorSpace.full_matrix_space(k).basis
    psi = np.array([[form.evaluate(units[i * k + j], units[i * k + j])
                     for j in range(k)] for i in range(k)])
    return psi


def multiplier_trace_pairing_norm(phi, restarts: int = 32, seed: int = 0,
                                  steps: int = 200) -> float:
    """sup over unit-operator-norm a, b of |sum phi_ij a_ij b_ij| by ascent.

    Lower-bound estimator used for the easy direction of the boundedness
    characterization (the split cost dominates this value).  Each leg is
    linear in turn: |tr(S a)| over the operator-norm ball is maximized at
    a = V U* from the singular decomposition S = U Sigma V*.
    """
    phi = as_matrix(phi)
    k, kk = phi.shape

    def leg_max(S):
        uu, _, vh = np.linalg.svd(S, full_matrices=False)
        return adjoint(uu @ vh)

    best = 0.0
    for ridx in range(restarts):
        rng = np.random.default_rng([seed, ridx])
        a = random_complex(rng, (k, kk))
        a /= np.linalg.norm(a, 2)
        b = random_complex(rng, (k, kk))
        b /= np.linalg.norm(b, 2)
        val = 0.0
        for _ in range(steps):
            a = leg_max((phi * b).T)      # value = tr((phi . b)^T a)
            b = leg_max((phi * a).T)
            new = abs(np.sum(phi * a * b))
            if new <= val * (1 + 1e-12):
                val = max(val, new)
                break
            val = new
        best = max(best, val)
    return float(best)
