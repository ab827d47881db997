"""Complex sparse matrices and preconditioned Krylov solves."""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 2000
DEFAULT_RESTART = 60


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    method: str = "gmres"


class SolverError(RuntimeError):
    def __init__(self, message, report):
        super().__init__(f"{message} (iterations={report.iterations}, residual={report.residual:.3e})")
        self.report = report


def from_triplets(n, rows, cols, vals):
    """CSR matrix of size ``n x n``; duplicate entries are summed."""
    A = sp.coo_matrix((np.asarray(vals), (np.asarray(rows, dtype=np.int64),
                                          np.asarray(cols, dtype=np.int64))), shape=(n, n))
    A = A.tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def linear_combination(coeffs, mats):
    shapes = {m.shape for m in mats}
    if len(shapes) != 1:
        raise ValueError(f"matrix shapes differ: {shapes}")
    out = None
    for c, m in zip(coeffs, mats):
        if c == 0:
            continue
        term = m * c
        out = term if out is None else out + term
    if out is None:
        out = sp.csr_matrix(mats[0].shape, dtype=complex)
    out = sp.csr_matrix(out, dtype=complex)
    out.sum_duplicates()
    out.sort_indices()
    return out


def diagonal_blocks(A, block_size):
    """Dense diagonal blocks, shape (n / block_size, block_size, block_size)."""
    n = A.shape[0]
    nblk = n // block_size
    C = A.tocoo()
    r, c = C.row, C.col
    keep = (r // block_size) == (c // block_size)
    blocks = np.zeros((nblk, block_size, block_size), dtype=A.dtype)
    np.add.at(blocks, (r[keep] // block_size, r[keep] % block_size, c[keep] % block_size),
              C.data[keep])
    return blocks


def block_jacobi(A, block_size, blocks=None):
    """Preconditioner applying the inverse of the per-cell diagonal blocks."""
    if blocks is None:
        blocks = diagonal_blocks(A, block_size)
    inv = np.linalg.inv(blocks)
    n = A.shape[0]
    nblk = len(inv)

    def apply(x):
        x = np.asarray(x).reshape(nblk, block_size)
        return np.einsum("bij,bj->bi", inv, x).reshape(-1)

    dtype = np.result_type(A.dtype, inv.dtype)
    return spla.LinearOperator((n, n), matvec=apply, dtype=dtype)


def _relative_residual(A, x, b, bnorm):
    return float(np.linalg.norm(A @ x - b) / bnorm)


def solve(A, b, tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS, restart=DEFAULT_RESTART,
          x0=None, block_size=None, blocks=None):
    """Restarted GMRES with block-Jacobi preconditioning.

    The returned residual is recomputed from ``A @ x - b``. Raises
    :class:`SolverError` if it exceeds ``tol`` after ``max_iters`` inner
    iterations.
    """
    b = np.asarray(b)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise ValueError("dimension mismatch")
    dtype = np.result_type(A.dtype, b.dtype)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n, dtype=dtype), SolveReport(0, 0.0, True)
    M = block_jacobi(A, block_size, blocks) if block_size else None
    x = np.zeros(n, dtype=dtype) if x0 is None else np.asarray(x0, dtype=dtype).copy()
    iters = 0
    count = [0]

    def cb(_):
        count[0] += 1

    # scipy's internal stopping test may differ from the true residual, so
    # solve for corrections until the recomputed residual is below tol
    for _ in range(4):
        r = b - A @ x
        rnorm = float(np.linalg.norm(r))
        if rnorm <= tol * bnorm or iters >= max_iters:
            break
        cycles = max(1, -(-(max_iters - iters) // restart))
        count[0] = 0
        dx, _ = spla.gmres(A, r, rtol=min(0.5, 0.5 * tol * bnorm / rnorm), atol=0.0,
                           restart=restart, maxiter=cycles, M=M, callback=cb,
                           callback_type="pr_norm")
        x = x + dx
        iters += count[0]
    res = _relative_residual(A, x, b, bnorm)
    report = SolveReport(iters, res, res <= tol)
    if not report.converged:
        raise SolverError("GMRES did not converge", report)
    return x, report


def solve_spd(A, b, tol=DEFAULT_TOL, max_iters=20000, x0=None, block_size=None):
    """Block-Jacobi preconditioned conjugate gradients for Hermitian positive definite ``A``."""
    b = np.asarray(b)
    n = A.shape[0]
    dtype = np.result_type(A.dtype, b.dtype)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n, dtype=dtype), SolveReport(0, 0.0, True, "cg")
    M = block_jacobi(A, block_size) if block_size else None
    count = [0]

    def cb(_):
        count[0] += 1

    x, _ = spla.cg(A, b, x0=x0, rtol=tol, atol=0.0, maxiter=max_iters, M=M, callback=cb)
    res = _relative_residual(A, x, b, bnorm)
    if res > tol:
        x, _ = spla.cg(A, b, x0=x, rtol=0.1 * tol, atol=0.0, maxiter=max_iters, M=M, callback=cb)
        res = _relative_residual(A, x, b, bnorm)
    report = SolveReport(count[0], res, res <= tol, "cg")
    if not report.converged:
        raise SolverError("CG did not converge", report)
    return x, report


def export_triplets(A, path):
    """Write ``row col (re,im)`` lines, one per stored entry."""
    C = sp.coo_matrix(A)
    with open(path, "w") as fh:
        fh.write(f"% {A.shape[0]} {A.shape[1]} {C.nnz}\n")
        for r, c, v in zip(C.row, C.col, C.data):
            v = complex(v)
            fh.write(f"{r} {c} ({v.real!r},{v.imag!r})\n")


def read_triplets(path):
    rows, cols, vals = [], [], []
    with open(path) as fh:
        header = fh.readline().split()
        n = int(header[1])
        for line in fh:
            r, c, z = line.split()
            re, im = z.strip("()").split(",")
            rows.append(int(r))
            cols.append(int(c))
            vals.append(complex(float(re), float(im)))
    return from_triplets(n, rows, cols, np.array(vals, dtype=complex))
