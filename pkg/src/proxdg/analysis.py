"""Error norms, convergence orders and runtime diagnostics."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import optimize

from .forms import eval_monomials, grad_monomials, monomial_exponents
from .quadrature import facet_rule, triangle_rule
from .spaces import P1_MASS_REF

__all__ = [
    "error_norms", "eoc", "ErrorReport", "ERROR_COLUMNS",
    "hho_reconstruct_solution", "evaluate_reconstruction",
    "feasibility_report", "energy_violation",
    "SmootherWeights", "compute_weights", "clement_smooth", "obstacle_smooth",
    "clement_feasibility", "p1_l2_norm",
]

ERROR_COLUMNS = ("eL2_u", "eH1_u", "eDG_u", "eL2_lambda", "eL2_o", "eL2_recon", "eH1_recon")


def _cell_quadrature(mesh, degree):
    bary, w = triangle_rule(degree)
    return bary, w, mesh.cell_points(bary)


def _integrate(mesh, w, vals):
    """Sum over cells of ``|T| sum_q w_q vals``."""
    return float(np.sum(mesh.cell_areas * (vals @ w)))


def error_norms(problem, field_, lam=None, gap=None, quad_degree=6, reconstruction=None):
    """Errors of a discrete solution against the exact data of ``problem``.

    Parameters
    ----------
    problem : ProblemSpec
        Needs ``exact_u`` and ``exact_grad``; ``exact_lambda`` for the
        multiplier column.
    field_ : Field
        Discrete solution; its cell component is measured.
    lam, gap : (nc,) arrays, optional
        Cell multiplier and entropy gap ``F(psi)``; the observable is
        ``phi(x) + gap_T``.
    reconstruction : (nc, nm) array, optional
        Scaled-monomial coefficients from :func:`hho_reconstruct_solution`.

    Returns a dict keyed by :data:`ERROR_COLUMNS`; absent quantities are ``None``.
    """
    mesh = field_.space.mesh
    bary, w, xq = _cell_quadrature(mesh, quad_degree)
    X, Y = xq[..., 0], xq[..., 1]
    nodal = field_.cell_nodal()
    uh = nodal @ bary.T
    G = mesh.gradients()
    guh = np.einsum("ci,cid->cd", nodal, G)
    u = problem.exact_u(X, Y)
    gu = problem.exact_grad(X, Y)

    l2 = math.sqrt(_integrate(mesh, w, (u - uh) ** 2))
    h1sq = _integrate(mesh, w, np.sum((gu - guh[:, None, :]) ** 2, axis=-1))

    # jumps of u - u_h; the exact solution is continuous and equals g on the boundary
    t, wf = facet_rule(4)
    jump_sq = 0.0
    ends_m, ends_p = mesh.facet_in_cell(0), mesh.facet_in_cell(1)
    tm, tp = mesh.facet_cells[:, 0], mesh.facet_cells[:, 1]

    def trace(cells, ends, f):
        v = nodal[cells[f]]
        r = np.arange(len(f))
        return (v[r, ends[f, 0]][:, None] * (1.0 - t)[None, :]
                + v[r, ends[f, 1]][:, None] * t[None, :])

    inner, bnd = mesh.interior_facets, mesh.boundary_facets
    if len(inner):
        jmp = trace(tm, ends_m, inner) - trace(tp, ends_p, inner)
        jump_sq += float(np.sum((jmp ** 2 @ wf)))  # |F| / h_F = 1
    xb = mesh.facet_points(t)[bnd]
    jmp = trace(tm, ends_m, bnd) - problem.dirichlet(xb[..., 0], xb[..., 1])
    jump_sq += float(np.sum(jmp ** 2 @ wf))

    out = {"eL2_u": l2, "eH1_u": math.sqrt(h1sq), "eDG_u": math.sqrt(h1sq + jump_sq)}
    out["eL2_lambda"] = None
    if lam is not None and problem.exact_lambda is not None:
        lex = problem.exact_lambda(X, Y)
        out["eL2_lambda"] = math.sqrt(_integrate(mesh, w, (lex - np.asarray(lam)[:, None]) ** 2))
    out["eL2_o"] = None
    if gap is not None:
        oh = problem.obstacle(X, Y) + np.asarray(gap)[:, None]
        out["eL2_o"] = math.sqrt(_integrate(mesh, w, (u - oh) ** 2))
    out["eL2_recon"] = out["eH1_recon"] = None
    if reconstruction is not None:
        rv, rg = evaluate_reconstruction(mesh, reconstruction, xq)
        out["eL2_recon"] = math.sqrt(_integrate(mesh, w, (u - rv) ** 2))
        out["eH1_recon"] = math.sqrt(_integrate(mesh, w, np.sum((gu - rg) ** 2, axis=-1)))
    return out


def hho_reconstruct_solution(system, u):
    """Apply the local reconstruction to a hybrid solution; ``(nc, nm)`` monomial coefficients."""
    R = system.extras.get("reconstruction")
    if R is None:
        raise ValueError(f"{system.method.label} has no reconstruction operator")
    fld = system.field(u)
    loc = fld.extended()[system.space.local_dofs()]
    Tloc = system.extras["local_transform"]
    return np.einsum("cmn,nj,cj->cm", R, Tloc, loc)


def evaluate_reconstruction(mesh, coeffs, points):
    """Values and gradients of cellwise scaled-monomial fields at ``points`` (nc, nq, 2)."""
    nm = coeffs.shape[1]
    k = {len(monomial_exponents(d)): d for d in range(4)}[nm]
    hT = mesh.cell_diameters
    xi = (points - mesh.cell_centroids[:, None, :]) / hT[:, None, None]
    vals = np.einsum("cqm,cm->cq", eval_monomials(k, xi), coeffs)
    grads = np.einsum("cqmd,cm->cqd", grad_monomials(k, xi, hT[:, None]), coeffs)
    return vals, grads


def eoc(errors, hs):
    """Orders ``log(e_i / e_{i+1}) / log(h_i / h_{i+1})`` between consecutive levels."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(hs, dtype=float)
    if e.shape != h.shape or len(e) < 2:
        raise ValueError("need matching error and mesh-size lists of length >= 2")
    if np.any(~(e > 0)):
        raise ValueError("errors must be positive to compute orders")
    return list(np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:]))


@dataclass
class ErrorReport:
    """Per-level errors and the orders between consecutive levels."""

    label: str
    rows: list = field(default_factory=list)   # dicts with n, h and ERROR_COLUMNS
    failed: bool = False

    def add(self, n, h, errors):
        if self.rows and not h < self.rows[-1]["h"]:
            raise ValueError("levels must have strictly decreasing h")
        self.rows.append({"n": int(n), "h": float(h), **{c: errors.get(c) for c in ERROR_COLUMNS}})

    def orders(self):
        out = []
        for a, b in zip(self.rows[:-1], self.rows[1:]):
            r = {"n": b["n"], "h": b["h"]}
            for c in ERROR_COLUMNS:
                ea, eb = a[c], b[c]
                r[c] = (eoc([ea, eb], [a["h"], b["h"]])[0]
                        if ea is not None and eb is not None and ea > 0 and eb > 0 else None)
            out.append(r)
        return out

    def final_order(self, column):
        return self.orders()[-1][column]

    def to_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(("row", "n", "h") + ERROR_COLUMNS)

        def fmt(v):
            return "" if v is None else f"{v:.6e}"

        orders = self.orders()
        for i, r in enumerate(self.rows):
            wr.writerow(["level", r["n"], fmt(r["h"])] + [fmt(r[c]) for c in ERROR_COLUMNS])
            if i < len(orders):
                o = orders[i]
                wr.writerow(["eoc", o["n"], fmt(o["h"])]
                            + ["" if o[c] is None else f"{o[c]:.4f}" for c in ERROR_COLUMNS])
        return buf.getvalue()

    def to_dict(self):
        return {"label": self.label, "failed": self.failed, "levels": self.rows, "eoc": self.orders()}


# ----------------------------------------------------------------------
# monitors

def feasibility_report(system, u, phibar):
    """Per-cell margins ``int_T (p(u) - phi)`` and their minimum."""
    margins = system.cell_integrals(u) - system.mesh.cell_areas * np.asarray(phibar)
    return margins, float(margins.min())


def energy_violation(energies, rel=1e-10):
    """Largest increase ``E_k - E_{k-1} - rel max(1, |E_k|)``; nonpositive means dissipative."""
    E = np.asarray(energies, dtype=float)
    if len(E) < 2:
        return -np.inf
    slack = rel * np.maximum(1.0, np.abs(E[1:]))
    return float(np.max(E[1:] - E[:-1] - slack))


# ----------------------------------------------------------------------
# constraint-aware Clement smoother

@dataclass
class SmootherWeights:
    """Nonnegative convex weights ``alpha_{z,T}`` with ``sum alpha s_T = z`` per interior vertex."""

    vertices: np.ndarray
    patches: list
    weights: list
    residuals: np.ndarray

    def matrix(self, n_vertices, n_cells):
        """Sparse ``(nv, nc)`` operator from cell values to nodal values (boundary rows zero)."""
        rows = np.concatenate([np.full(len(p), z) for z, p in zip(self.vertices, self.patches)])
        cols = np.concatenate(self.patches)
        vals = np.concatenate(self.weights)
        return sp.csr_matrix((vals, (rows, cols)), shape=(n_vertices, n_cells))


def compute_weights(mesh, tol=1e-12):
    """Nonnegative least-squares weights for every interior vertex.

    Constraints are scaled by the patch size so the residual is relative.
    """
    patches = mesh.vertex_patches()
    verts, plist, wlist, res = [], [], [], []
    for z in mesh.interior_vertices:
        cells = patches[z]
        s = mesh.cell_centroids[cells]
        x = mesh.vertices[z]
        scale = mesh.cell_diameters[cells].max()
        C = np.vstack([(s - x).T / scale, np.ones(len(cells))])
        rhs = np.array([0.0, 0.0, 1.0])
        a, _ = optimize.nnls(C, rhs)
        r = float(np.linalg.norm(C @ a - rhs))
        if r > tol:
            raise ValueError(f"vertex {z} is not in the convex hull of its patch centroids (residual {r:.2e})")
        verts.append(int(z))
        plist.append(np.asarray(cells))
        wlist.append(a)
        res.append(r)
    return SmootherWeights(np.array(verts, dtype=np.int64), plist, wlist, np.array(res))


def clement_smooth(cell_values, mesh, weights):
    """Nodal values of the smoothed continuous P1 field; boundary vertices are 0."""
    v = np.asarray(cell_values, dtype=float)
    out = np.zeros(mesh.n_vertices)
    for z, cells, a in zip(weights.vertices, weights.patches, weights.weights):
        out[z] = a @ v[cells]
    return out


def obstacle_smooth(obstacle, phibar, mesh, weights):
    """Smoothed obstacle: weighted cell means inside, exact values on the boundary."""
    out = clement_smooth(phibar, mesh, weights)
    b = ~np.zeros(mesh.n_vertices, dtype=bool)
    b[weights.vertices] = False
    xb = mesh.vertices[b]
    out[b] = obstacle(xb[:, 0], xb[:, 1])
    return out


def clement_feasibility(system, u, phibar, obstacle, weights=None):
    """Minimum over interior nodes of ``C_h p(u) - C~_h phi``."""
    mesh = system.mesh
    weights = weights or compute_weights(mesh)
    means = system.cell_integrals(u) / mesh.cell_areas
    cu = clement_smooth(means, mesh, weights)
    cphi = obstacle_smooth(obstacle, phibar, mesh, weights)
    return float(np.min((cu - cphi)[weights.vertices]))


def p1_l2_norm(mesh, nodal_values):
    """L2 norm of a continuous P1 field given by vertex values."""
    v = np.asarray(nodal_values)[mesh.cells]
    return float(np.sqrt(np.sum(mesh.cell_areas * np.einsum("ci,ij,cj->c", v, P1_MASS_REF, v))))
