"""Dense complex linear algebra substrate.

Everything downstream (tensor norms, state searches, Fock operators) runs on
plain ``numpy`` complex matrices.  All norms are computed by full SVD or
Hermitian eigendecomposition: matrices here are desk-scale (a few thousand
rows at most) and exactness beats speed.

Matrices interchange as JSON objects ``{"rows": r, "cols": c, "re": [...],
"im": [...]}`` with entries in row-major order; these field names are fixed
and shared with the CLI.
"""

from __future__ import annotations

import numpy as np

# Default tolerances: structural identities vs. optimization outputs.
STRUCTURAL_TOL = 1e-10
OPT_TOL = 1e-6


class DimensionError(ValueError):
    """Raised when a matrix is empty or shapes are incompatible."""


def as_matrix(x) -> np.ndarray:
    """Coerce to a 2-d complex ndarray, rejecting empty or ragged input."""
    m = np.asarray(x, dtype=complex)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got ndim={m.ndim}")
    if m.size == 0:
        raise DimensionError("empty matrix")
    return m


def adjoint(x: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return np.conj(np.swapaxes(x, -1, -2))


def op_norm(x) -> float:
    """Operator norm (largest singular value)."""
    m = as_matrix(x)
    return float(np.linalg.norm(m, 2))


def kron(x, y) -> np.ndarray:
    """Kronecker product; multiplicative for the operator norm."""
    return np.kron(as_matrix(x), as_matrix(y))


def is_hermitian(x, tol: float = 1e-12) -> bool:
    m = as_matrix(x)
    if m.shape[0] != m.shape[1]:
        return False
    scale = max(op_norm(m), 1e-300)
    return op_norm(m - adjoint(m)) <= tol * scale


def hermitian_part(x) -> np.ndarray:
    m = as_matrix(x)
    return (m + adjoint(m)) / 2


def require_hermitian(x, tol: float = 1e-12) -> np.ndarray:
    """Validate Hermitianity up to ``tol * ||x||`` and return the Hermitian part.

    The symmetrized result has exactly real eigenvalues, which downstream
    eigendecompositions rely on.
    """
    m = as_matrix(x)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"Hermitian matrix must be square, got {m.shape}")
    scale = max(op_norm(m), 1e-300)
    defect = op_norm(m - adjoint(m))
    if defect > tol * scale:
        raise ValueError(f"matrix is not Hermitian: ||X - X*|| = {defect:.3e} "
                         f"exceeds {tol:.1e} * ||X||")
    return hermitian_part(m)


def eigh(x, tol: float = 1e-12):
    """Eigendecomposition of a Hermitian matrix: (eigenvalues, eigenvectors)."""
    m = require_hermitian(x, tol=tol)
    return np.linalg.eigh(m)


def psd_check(x, tol: float = STRUCTURAL_TOL) -> bool:
    """True iff the Hermitian matrix has min eigenvalue >= -tol."""
    w, _ = eigh(x)
    return bool(w.min() >= -tol)


def psd_sqrt(x, floor: float = 0.0) -> np.ndarray:
    """Hermitian square root, clipping tiny negative eigenvalues at ``floor``."""
    w, v = eigh(x)
    w = np.maximum(w, floor)
    return (v * np.sqrt(w)) @ adjoint(v)


def top_singular_triple(x):
    """(sigma_max, u, v) with x @ v = sigma * u and unit u, v."""
    m = as_matrix(x)
    uu, ss, vh = np.linalg.svd(m)
    return float(ss[0]), uu[:, 0], np.conj(vh[0, :])


def vec(x) -> np.ndarray:
    """Row-major flattening."""
    return as_matrix(x).ravel()


def unvec(v, shape) -> np.ndarray:
    return np.asarray(v, dtype=complex).reshape(shape)


def frob_inner(x, y) -> complex:
    """Frobenius inner product tr(y* x)."""
    return complex(np.vdot(np.asarray(y, dtype=complex), np.asarray(x, dtype=complex)))


def state_apply(f, x) -> float:
    """Evaluate the state with density matrix ``f`` on ``x``: Re tr(f x).

    For Hermitian x the trace is already real; the real part only strips
    roundoff.
    """
    return float(np.trace(np.asarray(f) @ np.asarray(x)).real)


def matrix_to_json(x) -> dict:
    m = as_matrix(x)
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "re": m.real.ravel().tolist(),
        "im": m.imag.ravel().tolist(),
    }


def matrix_from_json(d: dict) -> np.ndarray:
    rows, cols = int(d["rows"]), int(d["cols"])
    re = np.asarray(d["re"], dtype=float)
    im = np.asarray(d["im"], dtype=float)
    if re.size != rows * cols or im.size != rows * cols:
        raise DimensionError("re/im length does not match rows*cols")
    return (re + 1j * im).reshape(rows, cols)


def random_complex(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard complex Gaussian matrix."""
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def random_unit(rng: np.random.Generator, shape) -> np.ndarray:
    """Complex Gaussian matrix normalized to operator norm one."""
    m = random_complex(rng, shape)
    return m / op_norm(m)


def random_density(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random density matrix (normalized Wishart)."""
    g = random_complex(rng, (n, n))
    rho = g @ adjoint(g)
    return rho / np.trace(rho).real
