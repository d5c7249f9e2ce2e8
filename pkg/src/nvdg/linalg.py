"""Sparse CSR matrices, BiCGSTAB with ILU(0)/Jacobi preconditioning, and
small dense solves for the local mass systems.

The factorization and triangular-solve kernels are JIT compiled with numba;
everything else is plain numpy/scipy.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit


class CsrMatrix:
    """Square sparse matrix in CSR form with sorted, unique column indices."""

    def __init__(self, indptr, indices, data, n):
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.data = np.asarray(data, dtype=float)
        self.n = int(n)
        if len(self.indptr) != self.n + 1:
            raise ValueError("indptr length must be n + 1")
        self._sp = sp.csr_matrix((self.data, self.indices, self.indptr), shape=(self.n, self.n))

    @classmethod
    def from_coo(cls, n, rows, cols, vals):
        """Build from triplets; duplicate entries are summed."""
        m = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.indptr, m.indices, m.data, n)

    @property
    def nnz(self) -> int:
        return len(self.data)

    def matvec(self, x):
        return self._sp @ x

    def to_dense(self):
        return self._sp.toarray()

    def transpose(self):
        t = self._sp.T.tocsr()
        t.sort_indices()
        return CsrMatrix(t.indptr, t.indices, t.data, self.n)

    def permuted(self, perm):
        """Symmetric row/column permutation; perm maps new index -> old index."""
        m = self._sp[perm][:, perm].tocsr()
        m.sort_indices()
        return CsrMatrix(m.indptr, m.indices, m.data, self.n)


@dataclass
class SolverReport:
    iterations: int
    relative_residual: float
    converged: bool


# ---------------------------------------------------------------------------
# preconditioners

@njit(cache=True)
def _ilu0_factor_kernel(n, indptr, indices, data, diag):
    for i in range(n):
        row_end = indptr[i + 1]
        for pp in range(indptr[i], row_end):
            k = indices[pp]
            if k >= i:
                break
            pivot = data[diag[k]]
            if pivot == 0.0:
                return k
            lik = data[pp] / pivot
            data[pp] = lik
            q = pp + 1
            for uu in range(diag[k] + 1, indptr[k + 1]):
                j = indices[uu]
                while q < row_end and indices[q] < j:
                    q += 1
                if q == row_end:
                    break
                if indices[q] == j:
                    data[q] -= lik * data[uu]
        if data[diag[i]] == 0.0:
            return i
    return -1


@njit(cache=True)
def _ilu0_solve_kernel(n, indptr, indices, data, diag, b, out):
    for i in range(n):
        s = b[i]
        for pp in range(indptr[i], diag[i]):
            s -= data[pp] * out[indices[pp]]
        out[i] = s
    for i in range(n - 1, -1, -1):
        s = out[i]
        for pp in range(diag[i] + 1, indptr[i + 1]):
            s -= data[pp] * out[indices[pp]]
        out[i] = s / data[diag[i]]


class Ilu0:
    """Incomplete LU with zero fill: L and U share the matrix's sparsity pattern."""

    def __init__(self, indptr, indices, data, diag):
        self.indptr, self.indices, self.data, self.diag = indptr, indices, data, diag
        self.n = len(indptr) - 1

    def solve(self, r):
        out = np.empty_like(r)
        _ilu0_solve_kernel(self.n, self.indptr, self.indices, self.data, self.diag, r, out)
        return out


class Jacobi:
    def __init__(self, inv_diag):
        self.inv_diag = inv_diag

    def solve(self, r):
        return r * self.inv_diag


class Identity:
    def solve(self, r):
        return r


def _diag_positions(matrix):
    diag = np.full(matrix.n, -1, dtype=np.int64)
    for i in range(matrix.n):
        lo, hi = matrix.indptr[i], matrix.indptr[i + 1]
        pos = lo + np.searchsorted(matrix.indices[lo:hi], i)
        if pos < hi and matrix.indices[pos] == i:
            diag[i] = pos
    return diag


def jacobi_precond(matrix) -> Jacobi:
    d = matrix._sp.diagonal()
    if np.any(d == 0.0):
        raise ValueError("Jacobi preconditioner requires a nonzero diagonal")
    return Jacobi(1.0 / d)


def ilu0_factor(matrix):
    """ILU(0) factorization of a CsrMatrix.

    Requires every diagonal entry to be present in the sparsity pattern.
    On a zero pivot the factorization is abandoned and a Jacobi
    preconditioner is returned instead, with a warning.
    """
    diag = _diag_positions(matrix)
    if np.any(diag < 0):
        raise ValueError("ILU(0) requires diagonal entries in the sparsity pattern")
    data = matrix.data.copy()
    bad = _ilu0_factor_kernel(matrix.n, matrix.indptr, matrix.indices, data, diag)
    if bad >= 0:
        warnings.warn(f"ILU(0) hit a zero pivot in row {bad}; falling back to Jacobi")
        return jacobi_precond(matrix)
    return Ilu0(matrix.indptr, matrix.indices, data, diag)


def make_preconditioner(matrix, kind):
    if kind is None or kind == "none":
        return Identity()
    if kind == "jacobi":
        return jacobi_precond(matrix)
    if kind == "ilu0":
        return ilu0_factor(matrix)
    if hasattr(kind, "solve"):
        return kind
    raise ValueError(f"unknown preconditioner {kind!r}")


# ---------------------------------------------------------------------------
# Krylov solver

def bicgstab(matrix, b, precond="ilu0", tol=1e-12, max_iter=None, x0=None):
    """Preconditioned BiCGSTAB for Kx = b.

    Convergence means the true relative residual ||b - Kx|| / ||b|| is at
    or below ``tol``; the recursive residual is re-verified against the
    true one, and the iteration restarts from the true residual whenever
    they disagree or the recursion breaks down (vanishing rho or omega).
    The report always carries the recomputed final residual.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = matrix.n
    if len(b) != n:
        raise ValueError("right-hand side dimension mismatch")
    if max_iter is None:
        max_iter = 10 * n
    M = make_preconditioner(matrix, precond)

    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolverReport(0, 0.0, True)
    target = tol * bnorm

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - matrix.matvec(x)
    iterations = 0
    rel_at_restart = np.inf

    while iterations < max_iter:
        rhat = r.copy()
        rho = alpha = omega = 1.0
        v = np.zeros(n)
        p = np.zeros(n)
        first = True

        while iterations < max_iter:
            iterations += 1
            rho_new = rhat @ r
            if abs(rho_new) < 1e-300 or (not first and omega == 0.0):
                break
            if first:
                p = r.copy()
                first = False
            else:
                beta = (rho_new / rho) * (alpha / omega)
                p = r + beta * (p - omega * v)
            rho = rho_new

            phat = M.solve(p)
            v = matrix.matvec(phat)
            rv = rhat @ v
            if rv == 0.0:
                break
            alpha = rho / rv
            s = r - alpha * v
            if np.linalg.norm(s) <= target:
                x = x + alpha * phat
                break

            shat = M.solve(s)
            t = matrix.matvec(shat)
            tt = t @ t
            if tt == 0.0:
                break
            omega = (t @ s) / tt
            x = x + alpha * phat + omega * shat
            r = s - omega * t
            if np.linalg.norm(r) <= target:
                break

        r = b - matrix.matvec(x)
        true_norm = np.linalg.norm(r)
        if true_norm <= target:
            break
        if true_norm >= 0.5 * rel_at_restart:
            break                      # restarting no longer makes progress
        rel_at_restart = true_norm

    rel = np.linalg.norm(b - matrix.matvec(x)) / bnorm
    return x, SolverReport(iterations, float(rel), bool(rel <= tol))


def dense_solve(m, b):
    """Partial-pivoted dense solve for the small local systems (size <= 16)."""
    m = np.asarray(m, dtype=float)
    if m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    if m.shape[0] > 16:
        raise ValueError("dense_solve is restricted to systems of size <= 16")
    return np.linalg.solve(m, b)


# ---------------------------------------------------------------------------
# MatrixMarket I/O

def save_matrix_market(matrix, path):
    """Write a CsrMatrix in MatrixMarket coordinate format.

    Values are printed with 17 significant digits so a read-back
    reproduces them exactly.
    """
    coo = matrix._sp.tocoo()
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{matrix.n} {matrix.n} {matrix.nnz}\n")
        table = np.column_stack([coo.row + 1.0, coo.col + 1.0, coo.data])
        np.savetxt(fh, table, fmt="%d %d %.17g")


def load_matrix_market(path) -> CsrMatrix:
    with open(path) as fh:
        banner = fh.readline()
        if "matrix coordinate real" not in banner:
            raise ValueError(f"unsupported MatrixMarket header in {path}: {banner.strip()}")
        line = fh.readline()
        while line.startswith("%"):
            line = fh.readline()
        nrows, ncols, nnz = (int(tok) for tok in line.split())
        if nrows != ncols:
            raise ValueError("only square matrices are supported")
        body = np.loadtxt(fh, ndmin=2) if nnz else np.empty((0, 3))
    if body.shape[0] != nnz:
        raise ValueError(f"expected {nnz} entries in {path}, found {body.shape[0]}")
    rows = body[:, 0].astype(np.int64) - 1
    cols = body[:, 1].astype(np.int64) - 1
    return CsrMatrix.from_coo(nrows, rows, cols, body[:, 2])
