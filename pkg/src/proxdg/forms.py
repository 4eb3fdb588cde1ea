"""Bilinear forms, coupling operator and load vectors.

Four discretizations of the Dirichlet form are provided:

* symmetric interior penalty (IPDG) on broken P1,
* enriched Galerkin (EG), the same form on continuous P1 plus cell constants,
* hybridizable interior penalty (H-IP) on broken P1 times facet P1,
* hybrid high-order (HHO) with cell degree ``l`` and facet degree ``r``.

Boundary data enter through Nitsche terms for the cell-only methods and
through fixed facet unknowns for the hybrid ones.  Every assembly returns an
:class:`AssembledSystem` whose matrix acts on free unknowns only.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .quadrature import facet_rule, legendre, triangle_rule
from .spaces import (DofSpace, Field, P1_MASS_REF, _cell_moments, cell_dg_space,
                     eg_space, hybrid_space, project_facet)

__all__ = [
    "Method", "AssembledSystem", "make_space", "assemble",
    "assemble_ipdg", "assemble_hip", "assemble_hho", "assemble_coupling_and_load",
    "hho_local_operators", "monomial_exponents", "eval_monomials", "grad_monomials",
    "DEFAULT_SIGMA",
]

DEFAULT_SIGMA = 10.0
_FACET_POINTS = 4
_HHO_PAIRS = ((0, 0), (0, 1), (1, 1))


@dataclass(frozen=True)
class Method:
    """Discretization choice.

    ``kind`` is one of ``ipdg``, ``eg``, ``hip``, ``hho``.  ``sigma`` is the
    penalty of the first three; HHO takes ``(cell_degree, facet_degree)``.
    """

    kind: str
    sigma: float | None = None
    cell_degree: int = 1
    facet_degree: int = 1

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind not in ("ipdg", "eg", "hip", "hho"):
            raise ValueError(f"unknown method {self.kind!r}")
        if kind == "hho":
            if self.sigma is not None:
                raise ValueError("HHO takes no penalty parameter")
            if (self.cell_degree, self.facet_degree) not in _HHO_PAIRS:
                raise ValueError(f"unsupported HHO degrees (l, r) = ({self.cell_degree}, {self.facet_degree})")
        else:
            if (self.cell_degree, self.facet_degree) != (1, 1):
                raise ValueError(f"{kind} uses cell degree 1" + (" and facet degree 1" if kind == "hip" else ""))
            if self.sigma is None:
                object.__setattr__(self, "sigma", DEFAULT_SIGMA)
            if not self.sigma > 0:
                raise ValueError(f"penalty sigma must be positive, got {self.sigma}")

    @property
    def is_hybrid(self):
        return self.kind in ("hip", "hho")

    @property
    def label(self):
        if self.kind == "hho":
            return f"hho({self.cell_degree},{self.facet_degree})"
        return self.kind

    def to_dict(self):
        return {"kind": self.kind, "sigma": self.sigma,
                "cell_degree": self.cell_degree, "facet_degree": self.facet_degree}


def make_space(mesh, method) -> DofSpace:
    if method.kind == "ipdg":
        return cell_dg_space(mesh, 1)
    if method.kind == "eg":
        return eg_space(mesh)
    return hybrid_space(mesh, method.cell_degree, method.facet_degree)


@dataclass
class AssembledSystem:
    """Discrete system on the free unknowns.

    ``A`` is the stiffness matrix, ``b`` the right-hand side including the
    boundary-data contributions, ``M`` the ``(nc, n_dofs)`` coupling with
    ``(M v)_T = int_T p(v)`` and ``load`` the pure source part ``(f, p(v))``.
    Fixed boundary data contribute ``mean_offset`` to the cell integrals of
    ``p(u)``, so ``int_T p(u) = (M u)_T + mean_offset_T``.
    """

    method: Method
    space: DofSpace
    A: sp.csr_matrix
    b: np.ndarray
    M: sp.csr_matrix
    load: np.ndarray
    A_full: sp.csr_matrix
    fixed: np.ndarray
    energy_shift: float = 0.0
    mean_offset: np.ndarray = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mean_offset is None:
            self.mean_offset = np.zeros(self.space.mesh.n_cells)

    @property
    def mesh(self):
        return self.space.mesh

    @property
    def n_dofs(self):
        return self.space.n_dofs

    def energy(self, u):
        """``1/2 a_h(u, u) - (f, p(u))`` including boundary-data terms."""
        u = np.asarray(u)
        return float(0.5 * u @ (self.A @ u) - self.b @ u + self.energy_shift)

    def field(self, u) -> Field:
        return Field(self.space, np.asarray(u, dtype=float).copy(), self.fixed.copy())

    def cell_integrals(self, u):
        """``int_T p(u)`` for every cell, including fixed boundary data."""
        return self.M @ np.asarray(u) + self.mean_offset

    def form(self, z, v):
        """``a_h(z, v)`` for two free-coefficient vectors."""
        return float(np.asarray(v) @ (self.A @ np.asarray(z)))


# ----------------------------------------------------------------------
# helpers

def _sym(K):
    return 0.5 * (K + np.swapaxes(K, -1, -2))


def _scatter(dofs, blocks, n):
    """Sum local ``blocks`` (nb, k, k) into an ``n x n`` CSR matrix."""
    rows = np.broadcast_to(dofs[:, :, None], blocks.shape).ravel()
    cols = np.broadcast_to(dofs[:, None, :], blocks.shape).ravel()
    A = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def _scatter_vec(dofs, vals, n):
    return np.bincount(dofs.ravel(), weights=vals.ravel(), minlength=n)


def _nitsche_block(J, N, w, length, pen):
    """Consistency, adjoint consistency and penalty of one facet term.

    ``J`` (nb, nq, k): values of the jump-like trace of each local basis
    function; ``N`` (nb, k): its normal-derivative partner (constant on the
    facet).  Returns ``-(N, J)^T - (J, N) + pen (J, J)`` integrated over the facet.
    """
    m = length[:, None] * np.einsum("bqk,q->bk", J, w)
    cons = -(m[:, :, None] * N[:, None, :] + N[:, :, None] * m[:, None, :])
    penalty = (pen * length)[:, None, None] * np.einsum("bqi,q,bqj->bij", J, w, J)
    return cons + penalty


def _trace_p1(t, ia, ib):
    """Values of the three nodal P1 functions at facet parameters ``t``; ``(nb, nq, 3)``."""
    nb, nq = len(ia), len(t)
    out = np.zeros((nb, nq, 3))
    rows = np.arange(nb)
    out[rows, :, ia] = 1.0 - t[None, :]
    out[rows, :, ib] = t[None, :]
    return out


def _transform_matrix(space):
    """Sparse map from all unknowns (free, then fixed) to broken nodal P1 values (3 per cell)."""
    nc, k = space.cell_dofs.shape
    rows = np.repeat(np.arange(3 * nc), k)
    cols = np.repeat(space.cell_dofs, 3, axis=0).ravel()
    vals = np.tile(space.cell_transform, (nc, 1)).ravel()
    keep = vals != 0.0
    return sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(3 * nc, space.n_total))


def assemble_coupling_and_load(space, f, quad_degree=6):
    """Return ``(M, b_f)`` with ``(M v)_T = int_T p(v)`` and ``b_f . v = (f, p(v))``.

    Rows of ``M`` index cells; columns of facet unknowns are zero.  Only free
    unknowns are included.
    """
    M, load = _coupling_and_load_full(space, f, quad_degree)
    nd = space.n_dofs
    return M[:, :nd].tocsr(), load[:nd]


def _coupling_and_load_full(space, f, quad_degree):
    mesh = space.mesh
    nc = mesh.n_cells
    E = _transform_matrix(space)
    Mdg = sp.csr_matrix((np.repeat(mesh.cell_areas / 3.0, 3),
                         (np.repeat(np.arange(nc), 3), np.arange(3 * nc))), shape=(nc, 3 * nc))
    M = (Mdg @ E).tocsr()
    M.sort_indices()
    mom = _cell_moments(f if f is not None else _zero, mesh, quad_degree)
    load = E.T @ mom.ravel()
    return M, np.asarray(load)


def _reduce(space, method, A_full, b_full, fixed, f, quad_degree, extras=None):
    """Restrict a system on all unknowns to the free ones, moving fixed data to the right-hand side."""
    nd = space.n_dofs
    A_full = (0.5 * (A_full + A_full.T)).tocsr()
    A_full.sort_indices()
    A = A_full[:nd, :nd].tocsr()
    A.sort_indices()
    Afg = A_full[:nd, nd:]
    Mf, load_full = _coupling_and_load_full(space, f, quad_degree)
    b_full = b_full + load_full
    b = b_full[:nd] - Afg @ fixed
    shift = 0.5 * float(fixed @ (A_full[nd:, nd:] @ fixed)) - float(b_full[nd:] @ fixed)
    M = Mf[:, :nd].tocsr()
    offset = Mf[:, nd:] @ fixed
    return AssembledSystem(method, space, A, b, M, load_full[:nd], A_full, fixed, shift,
                           np.asarray(offset, dtype=float), extras or {})


# ----------------------------------------------------------------------
# IPDG and EG

def _ipdg_nodal(mesh, sigma, g):
    """IPDG matrix and Nitsche right-hand side on broken nodal P1 (3 unknowns per cell)."""
    nc = mesh.n_cells
    G = mesh.gradients()
    vol = mesh.cell_areas[:, None, None] * np.einsum("cid,cjd->cij", G, G)
    dofs = np.arange(3 * nc).reshape(nc, 3)
    t, w = facet_rule(_FACET_POINTS)

    blocks, idx = [vol], [dofs]
    inner, bnd = mesh.interior_facets, mesh.boundary_facets
    nF = mesh.facet_normals
    hF = mesh.facet_lengths
    ends_m, ends_p = mesh.facet_in_cell(0), mesh.facet_in_cell(1)
    tm, tp = mesh.facet_cells[:, 0], mesh.facet_cells[:, 1]

    if len(inner):
        f = inner
        trm = _trace_p1(t, ends_m[f, 0], ends_m[f, 1])
        trp = _trace_p1(t, ends_p[f, 0], ends_p[f, 1])
        J = np.concatenate([trm, -trp], axis=2)
        N = 0.5 * np.concatenate([np.einsum("bid,bd->bi", G[tm[f]], nF[f]),
                                  np.einsum("bid,bd->bi", G[tp[f]], nF[f])], axis=1)
        blocks.append(_nitsche_block(J, N, w, hF[f], sigma / hF[f]))
        idx.append(np.hstack([dofs[tm[f]], dofs[tp[f]]]))

    f = bnd
    J = _trace_p1(t, ends_m[f, 0], ends_m[f, 1])
    N = np.einsum("bid,bd->bi", G[tm[f]], nF[f])
    bblock = _nitsche_block(J, N, w, hF[f], sigma / hF[f])

    n = 3 * nc
    A = _scatter(dofs, _sym(vol), n)
    if len(inner):
        A = A + _scatter(idx[1], _sym(blocks[1]), n)
    A = A + _scatter(dofs[tm[f]], _sym(bblock), n)

    rhs = np.zeros(n)
    if g is not None:
        x = mesh.facet_points(t)[f]
        gv = np.broadcast_to(np.asarray(g(x[..., 0], x[..., 1]), dtype=float), x.shape[:2])
        gint = hF[f] * (gv @ w)
        pen_int = (sigma / hF[f] * hF[f])[:, None] * np.einsum("bq,q,bqk->bk", gv, w, J)
        contrib = -gint[:, None] * N + pen_int
        rhs = _scatter_vec(dofs[tm[f]], contrib, n)
    A = A.tocsr()
    A.sort_indices()
    return A, rhs


def assemble_ipdg(mesh, sigma=DEFAULT_SIGMA, g=None, f=None, space=None, quad_degree=6):
    """Symmetric interior penalty assembly on broken P1 or on the enriched space.

    Pass ``space=eg_space(mesh)`` for EG; the same facet kernels are applied
    to the enriched basis through its nodal transform.
    """
    if not sigma > 0:
        raise ValueError(f"penalty sigma must be positive, got {sigma}")
    if space is None:
        space = cell_dg_space(mesh, 1)
    Adg, rdg = _ipdg_nodal(mesh, sigma, g)
    E = _transform_matrix(space)
    A_full = (E.T @ Adg @ E).tocsr()
    fixed = np.zeros(space.n_fixed)
    if space.n_fixed and g is not None:
        xb = mesh.vertices[space.fixed_vertices]
        fixed = np.asarray(g(xb[:, 0], xb[:, 1]), dtype=float)
    method = Method("eg" if space.kind == "eg" else "ipdg", sigma)
    return _reduce(space, method, A_full, np.asarray(E.T @ rdg), fixed, f, quad_degree)


def _zero(x, y):
    return np.zeros_like(x)


# ----------------------------------------------------------------------
# hybrid methods

def _hybrid_finish(space, method, K_ext, g, f, quad_degree, extras=None):
    """Reduce extended local matrices to the space, scatter, and fold in boundary data."""
    mesh = space.mesh
    nr = space.facet_degree + 1
    P = space.cell_transform
    nl = P.shape[1]
    Tloc = np.zeros((3 + 3 * nr, nl + 3 * nr))
    Tloc[:3, :nl] = P
    Tloc[3:, nl:] = np.eye(3 * nr)
    K = _sym(np.einsum("ai,cab,bj->cij", Tloc, K_ext, Tloc))
    dofs = space.local_dofs()
    n = space.n_total
    A_full = _scatter(dofs, K, n)

    fixed = np.zeros(space.n_fixed)
    if g is not None:
        proj = project_facet(g, space.facet_degree, mesh, _FACET_POINTS)
        fixed = proj[mesh.boundary_facets].ravel()
    ex = {"local_matrices": K, "local_transform": Tloc}
    ex.update(extras or {})
    return _reduce(space, method, A_full, np.zeros(n), fixed, f, quad_degree, ex)


def assemble_hip(mesh, sigma=DEFAULT_SIGMA, g=None, f=None, quad_degree=6):
    """Hybridizable interior penalty on broken P1 times facet P1."""
    if not sigma > 0:
        raise ValueError(f"penalty sigma must be positive, got {sigma}")
    space = hybrid_space(mesh, 1, 1)
    nc = mesh.n_cells
    nr = 2
    next_ = 3 + 3 * nr
    G = mesh.gradients()
    K = np.zeros((nc, next_, next_))
    K[:, :3, :3] = mesh.cell_areas[:, None, None] * np.einsum("cid,cjd->cij", G, G)
    t, w = facet_rule(_FACET_POINTS)
    L = legendre(1, t)
    ends = mesh.cell_facet_endpoints()
    pen = sigma / mesh.cell_diameters
    for i in range(3):
        J = np.zeros((nc, len(t), next_))
        J[:, :, :3] = _trace_p1(t, ends[:, i, 0], ends[:, i, 1])
        J[:, :, 3 + i * nr: 3 + (i + 1) * nr] = -L[None]
        N = np.zeros((nc, next_))
        N[:, :3] = np.einsum("cid,cd->ci", G, mesh.cell_normals[:, i])
        K += _nitsche_block(J, N, w, mesh.cell_facet_lengths[:, i], pen)
    return _hybrid_finish(space, Method("hip", sigma), K, g, f, quad_degree)


def monomial_exponents(k):
    return [(a - b, b) for a in range(k + 1) for b in range(a + 1)]


def eval_monomials(k, xi):
    """Scaled monomials of total degree <= k at local coordinates ``xi`` (..., 2) -> (..., nm)."""
    return np.stack([xi[..., 0] ** a * xi[..., 1] ** b for a, b in monomial_exponents(k)], axis=-1)


def grad_monomials(k, xi, h):
    """Physical gradients of the scaled monomials, (..., nm, 2); ``h`` broadcasts against ``xi[..., 0]``."""
    out = []
    for a, b in monomial_exponents(k):
        dx = a * xi[..., 0] ** max(a - 1, 0) * xi[..., 1] ** b if a else np.zeros_like(xi[..., 0])
        dy = b * xi[..., 0] ** a * xi[..., 1] ** max(b - 1, 0) if b else np.zeros_like(xi[..., 0])
        out.append(np.stack([dx / h, dy / h], axis=-1))
    return np.stack(out, axis=-2)


def hho_local_operators(mesh, cell_degree, facet_degree):
    """Reconstruction and stabilization matrices for every cell.

    Local unknowns are in the extended layout: three nodal P1 values for the
    cell part, then ``r + 1`` Legendre coefficients for local facets 0, 1, 2.
    For a cell degree of 0 only constant nodal vectors are meaningful.

    Returns a dict with

    * ``R`` (nc, nm, n_ext): scaled-monomial coefficients of the
      reconstruction, about the centroid with scale ``h_T``;
    * ``S`` (nc, 3, r + 1, n_ext): Legendre coefficients of the
      stabilization trace on each local facet;
    * ``A`` (nc, n_ext, n_ext): the local form ``(grad R, grad R) + h_T^-1 (S, S)``;
    * ``K``, ``B``: the reconstruction stiffness and right-hand side
      on the non-constant modes.
    """
    if (cell_degree, facet_degree) not in _HHO_PAIRS:
        raise ValueError(f"unsupported HHO degrees ({cell_degree}, {facet_degree})")
    k = facet_degree + 1
    nr = facet_degree + 1
    nc = mesh.n_cells
    n_ext = 3 + 3 * nr
    nm = len(monomial_exponents(k))
    hT = mesh.cell_diameters
    xc = mesh.cell_centroids
    area = mesh.cell_areas
    G = mesh.gradients()

    bary, wq = triangle_rule(5)
    xq = mesh.cell_points(bary)
    xi = (xq - xc[:, None, :]) / hT[:, None, None]
    Q = eval_monomials(k, xi)                       # (nc, nq, nm)
    dQ = grad_monomials(k, xi, hT[:, None])         # (nc, nq, nm, 2)

    K = area[:, None, None] * np.einsum("q,cqid,cqjd->cij", wq, dQ[:, :, 1:], dQ[:, :, 1:])
    B = np.zeros((nc, nm - 1, n_ext))
    B[:, :, :3] = area[:, None, None] * np.einsum("q,cqid,cjd->cij", wq, dQ[:, :, 1:], G)

    t, wf = facet_rule(3)
    L = legendre(facet_degree, t)
    ends = mesh.cell_facet_endpoints()
    X = mesh.vertices[mesh.cells]                   # (nc, 3, 2)
    rows = np.arange(nc)
    facet_data = []
    for i in range(3):
        ia, ib = ends[:, i, 0], ends[:, i, 1]
        xa, xb = X[rows, ia], X[rows, ib]
        xf = xa[:, None, :] + t[None, :, None] * (xb - xa)[:, None, :]
        xif = (xf - xc[:, None, :]) / hT[:, None, None]
        gq = grad_monomials(k, xif, hT[:, None])   # (nc, nqf, nm, 2)
        dn = np.einsum("cqid,cd->cqi", gq, mesh.cell_normals[:, i])
        tr = _trace_p1(t, ia, ib)                   # (nc, nqf, 3)
        hF = mesh.cell_facet_lengths[:, i]
        B[:, :, 3 + i * nr: 3 + (i + 1) * nr] += hF[:, None, None] * np.einsum("q,cqi,qk->cik", wf, dn[:, :, 1:], L)
        B[:, :, :3] -= hF[:, None, None] * np.einsum("q,cqi,cqj->cij", wf, dn[:, :, 1:], tr)
        facet_data.append((i, xif, tr, hF))

    Rnc = np.linalg.solve(K, B)                     # (nc, nm-1, n_ext)
    qmean = np.einsum("q,cqi->ci", wq, Q)           # cell means of the monomials
    R = np.zeros((nc, nm, n_ext))
    R[:, 1:] = Rnc
    R[:, 0, :3] = 1.0 / 3.0
    R[:, 0] -= np.einsum("ci,cin->cn", qmean[:, 1:], Rnc)
    A_rec = np.einsum("cin,cim->cnm", B, Rnc)

    # cellwise projection of the reconstruction onto P^l, as nodal values
    if cell_degree == 1:
        mom = np.einsum("q,cqi,qj->cji", wq, Q, bary)    # (nc, 3, nm) / |T|
        proj_q = np.einsum("ab,cbi->cai", np.linalg.inv(P1_MASS_REF), mom)
    else:
        proj_q = np.repeat(qmean[:, None, :], 3, axis=1)
    proj_R = np.einsum("cai,cin->can", proj_q, R)       # (nc, 3, n_ext)

    S = np.zeros((nc, 3, nr, n_ext))
    A_stab = np.zeros((nc, n_ext, n_ext))
    scale = 2.0 * np.arange(nr) + 1.0
    for i, xif, tr, hF in facet_data:
        Qf = eval_monomials(k, xif)                     # (nc, nqf, nm)
        W = np.einsum("cqi,cin->cqn", Qf, R)
        W -= np.einsum("cqa,can->cqn", tr, proj_R)
        W[:, :, :3] += tr
        W[:, :, 3 + i * nr: 3 + (i + 1) * nr] -= L[None]
        Si = scale[None, :, None] * np.einsum("q,qk,cqn->ckn", wf, L, W)
        S[:, i] = Si
        A_stab += (hF / hT)[:, None, None] * np.einsum("ckn,k,ckm->cnm", Si, 1.0 / scale, Si)
    return {"R": R, "S": S, "A": _sym(A_rec + A_stab), "K": K, "B": B, "A_recon": A_rec}


def assemble_hho(mesh, cell_degree=1, facet_degree=1, g=None, f=None, quad_degree=6):
    """Hybrid high-order assembly with degrees ``(l, r)``."""
    space = hybrid_space(mesh, cell_degree, facet_degree)
    ops = hho_local_operators(mesh, cell_degree, facet_degree)
    return _hybrid_finish(space, Method("hho", None, cell_degree, facet_degree), ops["A"], g, f,
                          quad_degree, {"reconstruction": ops["R"]})


def assemble(mesh, method, g=None, f=None, quad_degree=6):
    """Dispatch on ``method.kind``."""
    if method.kind == "ipdg":
        return assemble_ipdg(mesh, method.sigma, g, f, quad_degree=quad_degree)
    if method.kind == "eg":
        return assemble_ipdg(mesh, method.sigma, g, f, space=eg_space(mesh), quad_degree=quad_degree)
    if method.kind == "hip":
        return assemble_hip(mesh, method.sigma, g, f, quad_degree)
    return assemble_hho(mesh, method.cell_degree, method.facet_degree, g, f, quad_degree)
