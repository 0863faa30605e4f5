"""Direct sparse solves and the small dense generalized eigenproblem.

Thin, checked wrappers around scipy: sparse LU (with its deterministic
COLAMD fill-reducing ordering) for SPD and symmetric-indefinite systems,
dense ``eigh`` for the coupling-stability eigenproblem.  Every solve
re-checks its residual and raises :class:`SingularSystemError` when the
result is unusable, so callers can trust what they get back.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla
from scipy.linalg import cholesky, eigh

from .errors import SingularSystemError

__all__ = [
    "check_symmetric",
    "factor",
    "factor_solve_spd",
    "factor_solve_sym_indefinite",
    "gen_eig_sym",
    "write_triplets",
    "read_triplets",
]

_RESIDUAL_TOL = 1e-10


def check_symmetric(A, hermitian=True, tol=1e-12):
    """True when ``max|A - A^H|  <  tol * max|A|`` (entrywise, sparse-aware)."""
    A = sps.csr_matrix(A)
    D = (A - (A.conj().T if hermitian else A.T)).tocoo()
    if D.nnz == 0:
        return True
    scale = max(np.abs(A.data).max(), 1e-300)
    return np.abs(D.data).max() < tol * scale


def factor(A):
    """LU-factor a sparse matrix; returns a solve callable."""
    A = sps.csc_matrix(A)
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError("matrix must be square")
    empty_rows = np.diff(sps.csr_matrix(A).indptr) == 0
    if np.any(empty_rows):
        raise SingularSystemError(f"matrix has an empty row (first: {np.argmax(empty_rows)})")
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SingularSystemError(f"sparse factorization failed: {exc}") from exc

    def solve(b):
        b = np.asarray(b)
        x = lu.solve(b.astype(A.dtype, copy=False))
        r = A @ x - b
        scale = np.linalg.norm(b)
        if scale > 0 and np.linalg.norm(r) > _RESIDUAL_TOL * scale:
            raise SingularSystemError(
                f"solve residual {np.linalg.norm(r) / scale:.3e} exceeds tolerance"
            )
        return x

    return solve


def factor_solve_spd(A, b):
    """Solve ``A x = b`` for symmetric positive definite sparse ``A``."""
    if not check_symmetric(A):
        raise SingularSystemError("matrix is not symmetric")
    return factor(A)(b)


def factor_solve_sym_indefinite(A, b):
    """Solve ``A x = b`` for symmetric (or hermitian) nonsingular sparse ``A``."""
    if not check_symmetric(A):
        raise SingularSystemError("matrix is not symmetric/hermitian")
    return factor(A)(b)


def gen_eig_sym(A, M, vectors=False):
    """Ascending eigenvalues of ``A x = lam M x`` for hermitian A, PD M.

    Dense path: the coupling eigenproblem is only a handful of harmonics
    wide.  Raises when ``M`` is not positive definite.
    """
    A = np.asarray(A)
    M = np.asarray(M)
    if A.shape != M.shape or A.shape[0] != A.shape[1]:
        raise ValueError("A and M must be square and of equal size")
    try:
        cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("mass matrix is not positive definite") from exc
    w, v = eigh(A, M)
    resid = sum(
        np.linalg.norm(A @ v[:, k] - w[k] * (M @ v[:, k])) for k in range(len(w))
    )
    if resid > 1e-8 * max(1.0, np.abs(w).max()) * len(w):
        raise SingularSystemError("generalized eigensolve residual too large")
    return (w, v) if vectors else w


def write_triplets(path, A):
    """Dump a sparse matrix as ``row col value`` text lines (debug exchange)."""
    A = sps.coo_matrix(A)
    order = np.lexsort((A.col, A.row))
    with open(path, "w") as fh:
        fh.write(f"# {A.shape[0]} {A.shape[1]}\n")
        for k in order:
            fh.write(f"{A.row[k]} {A.col[k]} {A.data[k]!r}\n")


def read_triplets(path):
    """Inverse of :func:`write_triplets`."""
    with open(path) as fh:
        header = fh.readline().split()
        shape = (int(header[1]), int(header[2]))
        rows, cols, vals = [], [], []
        for line in fh:
            r, c, v = line.split()
            rows.append(int(r))
            cols.append(int(c))
            vals.append(complex(v) if "j" in v else float(v))
    return sps.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
