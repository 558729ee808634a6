"""Truncated full Fock space and generalized circular operators.

Words of length <= D over a 2m-letter alphabet index the basis; letters
0..m-1 are the unprimed e_i, letters m..2m-1 the primed e'_i.  Creation
operators prepend (left) or append (right) a letter and annihilate words of
top degree D (truncation convention).  The generalized circular operators

    c_i(lam) = lam^{1/2} l_i   + lam^{-1/2} l'_i*
    d_i(lam) = lam^{1/2} r'_i  + lam^{-1/2} r_i*

double commute up to truncation effects confined to the top two degrees, and
pair to the identity matrix at the vacuum.  All verifications restrict to
subspaces where truncation is invisible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import as_matrix, op_norm
from .opspace import weighted_quantity

DENSE_NORM_LIMIT = 700


@dataclass(frozen=True)
class FockSpace:
    """Words of length <= cutoff over {e_1..e_m, e'_1..e'_m}."""

    letters: int            # m
    cutoff: int             # D

    words: tuple = field(init=False, repr=False)
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        if self.letters < 1 or self.cutoff < 0:
            raise ValueError("need m >= 1 letters and cutoff D >= 0")
        L = 2 * self.letters
        words = [()]
        layer = [()]
        for _ in range(self.cutoff):
            layer = [w + (a,) for w in layer for a in range(L)]
            words.extend(layer)
        object.__setattr__(self, "words", tuple(words))
        object.__setattr__(self, "index", {w: i for i, w in enumerate(words)})

    @property
    def alphabet_size(self) -> int:
        return 2 * self.letters

    @property
    def dim(self) -> int:
        return len(self.words)

    @property
    def vacuum_index(self) -> int:
        return 0

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.vacuum_index] = 1.0
        return v

    def primed(self, i: int) -> int:
        """Alphabet index of e'_i (i is 0-based)."""
        if not 0 <= i < self.letters:
            raise ValueError(f"letter index {i} out of range")
        return self.letters + i

    def unprimed(self, i: int) -> int:
        if not 0 <= i < self.letters:
            raise ValueError(f"letter index {i} out of range")
        return i

    def degree_projector(self, max_degree: int) -> sp.csr_matrix:
        """Orthogonal projection onto words of length <= max_degree."""
        diag = np.array([1.0 if len(w) <= max_degree else 0.0 for w in self.words])
        return sp.diags(diag).tocsr()


@dataclass(frozen=True)
class FockOperator:
    """Sparse operator on a Fock space, tagged by its construction."""

    space: FockSpace
    matrix: sp.csr_matrix
    tag: str

    def adjoint(self) -> "FockOperator":
        return FockOperator(self.space, self.matrix.conj().T.tocsr(),
                            f"adj({self.tag})")

    def __matmul__(self, other: "FockOperator") -> "FockOperator":
        return FockOperator(self.space, (self.matrix @ other.matrix).tocsr(),
                            f"{self.tag}*{other.tag}")

    def __add__(self, other: "FockOperator") -> "FockOperator":
        return FockOperator(self.space, (self.matrix + other.matrix).tocsr(),
                            f"{self.tag}+{other.tag}")

    def __mul__(self, scalar) -> "FockOperator":
        return FockOperator(self.space, (scalar * self.matrix).tocsr(),
                            f"{scalar}*{self.tag}")

    __rmul__ = __mul__

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    def norm(self) -> float:
        return sparse_op_norm(self.matrix)


def sparse_op_norm(m: sp.spmatrix) -> float:
    """Largest singular value; dense below a size threshold, else svds."""
    if min(m.shape) <= DENSE_NORM_LIMIT:
        return op_norm(np.asarray(m.todense()))
    try:
        s = sp.linalg.svds(m.tocsc().astype(complex), k=1,
                           return_singular_vectors=False, maxiter=5000)
        return float(s[0])
    except Exception:
        return op_norm(np.asarray(m.todense()))


def _creation_matrix(fs: FockSpace, letter: int, side: str) -> sp.csr_matrix:
    if not 0 <= letter < fs.alphabet_size:
        raise ValueError(f"unknown letter {letter}")
    rows, cols = [], []
    for j, w in enumerate(fs.words):
        if len(w) < fs.cutoff:
            nw = (letter,) + w if side == "left" else w + (letter,)
            rows.append(fs.index[nw])
            cols.append(j)
    data = np.ones(len(rows), dtype=complex)
    return sp.csr_matrix((data, (rows, cols)), shape=(fs.dim, fs.dim))


def left_creation(fs: FockSpace, letter: int) -> FockOperator:
    """Prepends the letter; words of degree D map to zero."""
    return FockOperator(fs, _creation_matrix(fs, letter, "left"), f"l({letter})")


def right_creation(fs: FockSpace, letter: int) -> FockOperator:
    """Appends the letter; words of degree D map to zero."""
    return FockOperator(fs, _creation_matrix(fs, letter, "right"), f"r({letter})")


def circular(fs: FockSpace, i: int, lam: float) -> FockOperator:
    """c_i(lam) = lam^{1/2} l(e_i) + lam^{-1/2} l(e'_i)*."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    li = _creation_matrix(fs, fs.unprimed(i), "left")
    lpi = _creation_matrix(fs, fs.primed(i), "left")
    mat = np.sqrt(lam) * li + (1 / np.sqrt(lam)) * lpi.conj().T
    return FockOperator(fs, mat.tocsr(), f"c_{i}({lam})")


def dual_circular(fs: FockSpace, i: int, lam: float) -> FockOperator:
    """d_i(lam) = lam^{1/2} r(e'_i) + lam^{-1/2} r(e_i)*."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    ri = _creation_matrix(fs, fs.unprimed(i), "right")
    rpi = _creation_matrix(fs, fs.primed(i), "right")
    mat = np.sqrt(lam) * rpi + (1 / np.sqrt(lam)) * ri.conj().T
    return FockOperator(fs, mat.tocsr(), f"d_{i}({lam})")


def check_double_commutation(fs: FockSpace, lams) -> dict:
    """Max commutator residuals of the two circular families.

    Both [x_i, y_j] and [x_i*, y_j] vanish on words of degree <= D - 2;
    without that projection the truncation boundary contributes, which is
    reported separately.
    """
    if fs.cutoff < 2:
        raise ValueError("cutoff D >= 2 required")
    lams = np.asarray(lams, dtype=float)
    if lams.shape != (fs.letters,):
        raise ValueError("need one lambda per letter index")
    P = fs.degree_projector(fs.cutoff - 2)
    worst = 0.0
    worst_raw = 0.0
    for i in range(fs.letters):
        x = circular(fs, i, lams[i]).matrix
        for j in range(fs.letters):
            y = dual_circular(fs, j, lams[j]).matrix
            for xx in (x, x.conj().T):
                comm = xx @ y - y @ xx
                proj = comm @ P
                if proj.nnz:
                    worst = max(worst, float(np.abs(proj.data).max()))
                if comm.nnz:
                    worst_raw = max(worst_raw, float(np.abs(comm.data).max()))
    return {"residual": worst, "residual_without_projection": worst_raw}


def vacuum_pairing(fs: FockSpace, i: int, j: int, lams) -> complex:
    """<x_i y_j vacuum, vacuum>; the identity matrix delta_ij for all lam > 0."""
    if fs.cutoff < 2:
        raise ValueError("cutoff D >= 2 required")
    lams = np.asarray(lams, dtype=float)
    x = circular(fs, i, lams[i])
    y = dual_circular(fs, j, lams[j])
    om = fs.vacuum()
    return complex(np.vdot(om, x.apply(y.apply(om))))


def circular_sum_bound(fs: FockSpace, mats, lams, side: str = "left"):
    """(lhs, rhs): truncated norm of sum_i a_i (x) op_i vs the weighted bound.

    lhs compresses the untruncated operator, so lhs <= rhs always; rhs is
    ||sum lam_i a_i* a_i||^{1/2} + ||sum lam_i^{-1} a_i a_i*||^{1/2}.
    """
    mats = [as_matrix(m) for m in mats]
    lams = np.asarray(lams, dtype=float)
    if len(mats) != lams.size:
        raise ValueError("one lambda per matrix required")
    if np.any(lams <= 0):
        raise ValueError("lams must be positive")
    if len(mats) > fs.letters:
        raise ValueError("family longer than the letter index set")
    ops = [circular(fs, i, lams[i]) if side == "left" else dual_circular(fs, i, lams[i])
           for i in range(len(mats))]
    total = sum(sp.kron(sp.csr_matrix(a), o.matrix) for a, o in zip(mats, ops))
    lhs = sparse_op_norm(total.tocsr())
    rhs = (weighted_quantity(mats, lams, "col")
           + weighted_quantity(mats, 1.0 / lams, "row"))
    return float(lhs), float(rhs)


def verify_evaluation_chain(form, pairs, lams, fs: FockSpace,
                            jcb_bound: float = 1.0) -> dict:
    """Numerical reproduction of the inequality chain behind the sequence bound.

    Steps, for pairs (a_i, b_i) and x_i, y_i the two circular families:

    1. sum_i U(a_i, b_i) equals sum_{ij} U(a_i, b_j) <x_i y_j vac, vac>
       exactly (the pairing is the identity matrix);
    2. that value is dominated by the truncated norm of
       T = sum_{ij} U(a_i, b_j) x_i y_j;
    3. ||T|| is dominated by C * jcb_bound * prod of the weighted bracket
       bounds for the two legs, which is the final sequence inequality.

    Returns the equality residual and the three domination ratios (all
    expected <= 1 up to tolerance when jcb_bound dominates the jcb norm).
    """
    if fs.cutoff < 2:
        raise ValueError("cutoff D >= 2 required")
    a_list = [as_matrix(a) for a, _ in pairs]
    b_list = [as_matrix(b) for _, b in pairs]
    r = len(pairs)
    lams = np.asarray(lams, dtype=float)
    if lams.shape != (r,):
        raise ValueError("one lambda per pair required")
    if r > fs.letters:
        raise ValueError("more pairs than letter indices")
    C = form.left_space.exactness_bound * form.right_space.exactness_bound

    xs = [circular(fs, i, lams[i]) for i in range(r)]
    ys = [dual_circular(fs, i, lams[i]) for i in range(r)]
    om = fs.vacuum()

    lhs = sum(form.evaluate(a_list[i], b_list[i]) for i in range(r))
    vac = sum(form.evaluate(a_list[i], b_list[j])
              * np.vdot(om, xs[i].apply(ys[j].apply(om)))
              for i in range(r) for j in range(r))
    scale = max(abs(lhs), abs(vac), 1e-300)
    step1_residual = abs(lhs - vac) / scale

    T = sum(form.evaluate(a_list[i], b_list[j]) * (xs[i].matrix @ ys[j].matrix)
            for i in range(r) for j in range(r))
    # Compress to degrees <= D - 2, where products of the truncated operators
    # agree with the untruncated ones; the vacuum expectation is unchanged.
    P = fs.degree_projector(fs.cutoff - 2)
    norm_T = sparse_op_norm(sp.csr_matrix(P @ T @ P))
    step2_ratio = abs(vac) / norm_T if norm_T > 1e-300 else 0.0

    bracket_a = (weighted_quantity(a_list, lams, "col")
                 + weighted_quantity(a_list, 1.0 / lams, "row"))
    bracket_b = (weighted_quantity(b_list, lams, "col")
                 + weighted_quantity(b_list, 1.0 / lams, "row"))
    rhs_final = C * jcb_bound * bracket_a * bracket_b
    step3_ratio = norm_T / rhs_final if rhs_final > 1e-300 else 0.0
    final_ratio = abs(lhs) / rhs_final if rhs_final > 1e-300 else 0.0

    # Observed legs of the middle inequality, for the report.
    na = sparse_op_norm(sum(sp.kron(sp.csr_matrix(a), x.matrix)
                            for a, x in zip(a_list, xs)).tocsr())
    nb = sparse_op_norm(sum(sp.kron(sp.csr_matrix(b), y.matrix)
                            for b, y in zip(b_list, ys)).tocsr())
    return {
        "step1_residual": float(step1_residual),
        "step2_ratio": float(step2_ratio),
        "step3_ratio": float(step3_ratio),
        "final_ratio": float(final_ratio),
        "leg_norm_left": float(na),
        "leg_norm_right": float(nb),
        "leg_bracket_left": float(bracket_a),
        "leg_bracket_right": float(bracket_b),
        "fock_dim": fs.dim,
    }
