"""Sparse symmetric solves and per-cell static condensation."""
from __future__ import annotations


import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import reverse_cuthill_mckee

__all__ = ["NotSPDError", "SingularBlockError", "SPDFactor", "solve_spd", "pcg",
           "condense", "solve_saddle", "DIRECT_LIMIT"]


DIRECT_LIMIT = 200_000


class NotSPDError(np.linalg.LinAlgError):
    """Matrix expected to be symmetric positive definite is not."""


class SingularBlockError(np.linalg.LinAlgError):
    """A local block in static condensation could not be inverted."""


class SPDFactor:
    """Symmetric-pivot sparse LU of an SPD matrix.

    With diagonal pivoting and symmetric mode SuperLU performs the same
    elimination as a Cholesky factorization; a nonpositive pivot means the
    matrix is not positive definite.
    """

    def __init__(self, A, ordering="MMD_AT_PLUS_A", name="matrix"):
        A = sp.csc_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"{name} is not square: {A.shape}")
        asym = abs(A - A.T).max() if A.nnz else 0.0
        scale = abs(A).max() if A.nnz else 1.0
        if asym > 1e-10 * max(scale, 1e-300):
            raise NotSPDError(f"{name} is not symmetric (max asymmetry {asym:.3e})")
        if ordering == "RCM":
            perm = reverse_cuthill_mckee(A.tocsr(), symmetric_mode=True)
            self._perm = perm
            A = A[perm][:, perm].tocsc()
            colperm = "NATURAL"
        else:
            self._perm = None
            colperm = ordering
        try:
            self._lu = spla.splu(A, permc_spec=colperm, diag_pivot_thresh=0.0,
                                 options={"SymmetricMode": True})
        except RuntimeError as exc:
            raise NotSPDError(f"{name} is singular: {exc}") from exc
        d = self._lu.U.diagonal()
        if np.any(~(d > 0)) or np.any(self._lu.perm_r != self._lu.perm_c):
            raise NotSPDError(f"{name} is not positive definite (pivot {d.min():.3e})")
        self.A = A
        self.name = name

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if self._perm is None:
            return self._lu.solve(b)
        x = np.empty_like(b)
        x[self._perm] = self._lu.solve(b[self._perm])
        return x


def pcg(A, b, tol=1e-12, max_iter=None, x0=None, name="matrix"):
    """Jacobi-preconditioned conjugate gradients with breakdown detection."""
    A = sp.csr_matrix(A)
    n = A.shape[0]
    max_iter = max_iter or 10 * n
    d = A.diagonal()
    if np.any(d <= 0):
        raise NotSPDError(f"{name} has a nonpositive diagonal entry")
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)
    z = r / d
    p = z.copy()
    rz = r @ z
    for _ in range(max_iter):
        if np.linalg.norm(r) <= tol * bnorm:
            return x
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise NotSPDError(f"CG breakdown on {name}: p^T A p = {pAp:.3e}")
        a = rz / pAp
        x += a * p
        r -= a * Ap
        z = r / d
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    if np.linalg.norm(r) <= tol * bnorm:
        return x
    raise RuntimeError(f"CG did not reach tol {tol:g} on {name} in {max_iter} iterations")


def solve_spd(A, b, tol=1e-12, max_iter=None, method="auto", ordering="MMD_AT_PLUS_A", name="matrix"):
    """Solve ``A x = b`` for SPD ``A`` so that ``|A x - b| <= tol |b|`` when attainable.

    ``method`` is ``"direct"``, ``"cg"`` or ``"auto"`` (direct up to
    ``DIRECT_LIMIT`` unknowns).  The direct path adds a few steps of
    iterative refinement.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if method == "auto":
        method = "direct" if n <= DIRECT_LIMIT else "cg"
    if method == "cg":
        return pcg(A, b, tol, max_iter, name=name)
    if method != "direct":
        raise ValueError(f"unknown solve method {method!r}")
    F = SPDFactor(A, ordering, name)
    x = F.solve(b)
    bnorm = np.linalg.norm(b)
    for _ in range(max_iter or 3):
        r = b - A @ x
        if np.linalg.norm(r) <= tol * bnorm:
            break
        x += F.solve(r)
    return x


def _block_inverse(blocks, name):
    try:
        inv = np.linalg.inv(blocks)
    except np.linalg.LinAlgError as exc:
        raise SingularBlockError(f"singular local block in {name}") from exc
    if not np.all(np.isfinite(inv)):
        raise SingularBlockError(f"singular local block in {name}")
    return inv


def condense(K, rhs, interior, name="system"):
    """Eliminate disjoint local blocks of unknowns.

    Parameters
    ----------
    K : sparse (n, n)
        Full matrix.  It need not be symmetric, but local blocks must be invertible.
    rhs : (n,) array
    interior : (nb, k) int array
        Each row lists unknowns eliminated together.  Interior blocks must not
        couple to each other.

    Returns
    -------
    S, s, recover
        The Schur complement on the remaining unknowns, its right-hand side,
        and a closure mapping a solution of ``S y = s`` to the full solution.
    """
    K = sp.csr_matrix(K)
    n = K.shape[0]
    interior = np.asarray(interior, dtype=np.int64)
    nb, k = interior.shape
    I = interior.ravel()
    mask = np.ones(n, dtype=bool)
    mask[I] = False
    gidx = np.flatnonzero(mask)

    coo = K[I][:, I].tocoo()
    bi, bj = coo.row // k, coo.col // k
    if np.any(bi != bj):
        raise ValueError("interior blocks are coupled to each other")
    blocks = np.zeros((nb, k, k))
    np.add.at(blocks, (bi, coo.row % k, coo.col % k), coo.data)
    inv = _block_inverse(blocks, name)
    rr = np.repeat(np.arange(nb * k).reshape(nb, k), k, axis=1).ravel()
    cc = np.tile(np.arange(nb * k).reshape(nb, k), (1, k)).ravel()
    Kinv = sp.csr_matrix((inv.ravel(), (rr, cc)), shape=(nb * k, nb * k))

    KIg = K[I][:, gidx]
    KgI = K[gidx][:, I]
    Kgg = K[gidx][:, gidx]
    S = (Kgg - KgI @ (Kinv @ KIg)).tocsr()
    S.sort_indices()
    rI = rhs[I]
    s = rhs[gidx] - KgI @ (Kinv @ rI)

    def recover(y):
        x = np.empty(n)
        x[gidx] = y
        x[I] = Kinv @ (rI - KIg @ y)
        return x

    recover.global_index = gidx
    return S, s, recover


def solve_saddle(K, rhs):
    """Sparse LU solve of a general (indefinite) system."""
    K = sp.csc_matrix(K)
    return spla.splu(K).solve(np.asarray(rhs, dtype=float))
