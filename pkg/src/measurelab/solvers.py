"""SPD solves for the grid Laplacian and its diagonal shifts."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

RTOL = 1e-10
DIRECT_LIMIT = 20_000


class SolverError(RuntimeError):
    pass


_factor_cache: dict[int, tuple[sp.spmatrix, object]] = {}


def _use_direct(A, dim: int) -> bool:
    # sparse LU fill-in makes 3D factorisations far slower than CG
    return A.shape[0] <= DIRECT_LIMIT and dim <= 2


def _factor(A):
    key = id(A)
    hit = _factor_cache.get(key)
    if hit is not None and hit[0] is A:
        return hit[1]
    lu = spla.splu(A.tocsc())
    if len(_factor_cache) > 32:
        _factor_cache.clear()
    _factor_cache[key] = (A, lu)
    return lu


def spd_solve(A, b, dim: int, x0=None, rtol: float = RTOL, maxiter: int | None = None,
              cache: bool = False) -> np.ndarray:
    """Solve ``A x = b`` for a symmetric positive definite sparse ``A``.

    Small 1D/2D systems use a sparse LU factorisation (cached per matrix object
    when ``cache`` is set); everything else uses conjugate gradients with a
    Jacobi preconditioner and relative residual ``rtol``.
    """
    b = np.asarray(b, dtype=float)
    if not np.any(b):
        return np.zeros_like(b)
    if _use_direct(A, dim):
        lu = _factor(A) if cache else spla.splu(A.tocsc())
        return lu.solve(b)
    n = A.shape[0]
    dinv = 1.0 / A.diagonal()
    M = spla.LinearOperator((n, n), matvec=lambda r: dinv * r)
    x, info = spla.cg(A, b, x0=x0, rtol=rtol, atol=0.0, maxiter=maxiter or 20 * n, M=M)
    if info != 0:
        r = np.linalg.norm(b - A @ x) / np.linalg.norm(b)
        if r > 10 * rtol:
            raise SolverError(f"conjugate gradients stalled at relative residual {r:.3e}")
    return x


def shifted(A, diag) -> sp.csr_matrix:
    return (A + sp.diags(np.asarray(diag, dtype=float))).tocsr()
