"""Degree-of-freedom layouts, local bases and L2 projections.

Every space stores its cell component through nodal P1 values: a fixed
``(3, n_cell_loc)`` matrix maps the local cell coefficients of a cell to the
values at its three vertices.  That covers broken P1 (identity), broken P0
(a column of ones) and the enriched space (vertex hats plus a constant).

Facet unknowns use Legendre polynomials in ``s = 2t - 1`` where ``t`` runs
from the lower-index endpoint to the higher one.  Boundary facets carry no
free unknowns; their values live in ``Field.fixed``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quadrature import facet_rule, legendre, triangle_rule

__all__ = [
    "DofSpace", "Field", "cell_dg_space", "eg_space", "hybrid_space",
    "project_cell", "project_facet", "interpolate", "evaluate",
    "P1_MASS_REF", "facet_mass",
]

# local P1 mass matrix divided by |T|
P1_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
_P1_MASS_INV_REF = np.array([[9.0, -3.0, -3.0], [-3.0, 9.0, -3.0], [-3.0, -3.0, 9.0]])


def facet_mass(r):
    """Legendre mass matrix on a facet divided by ``|F|``."""
    return np.diag(1.0 / (2.0 * np.arange(r + 1) + 1.0))


class DofSpace:
    """Layout of one discrete space on a mesh.

    Parameters are set by the factory functions :func:`cell_dg_space`,
    :func:`eg_space` and :func:`hybrid_space`.

    Attributes
    ----------
    kind : str
        ``"dg"``, ``"eg"`` or ``"hybrid"``.
    n_dofs : int
        Number of free unknowns.
    n_fixed : int
        Number of boundary-data slots.
    cell_dofs : (nc, n_cell_loc) int array
        Global indices of the cell coefficients.  Free dofs come first,
        fixed slots follow at ``n_dofs + j``.
    cell_transform : (3, n_cell_loc) array
        Local cell coefficients to nodal P1 values.
    facet_dofs : (nf, r + 1) int array or None
        Global indices of facet coefficients (hybrid spaces).
    """

    def __init__(self, mesh, kind, cell_degree, facet_degree, cell_dofs, cell_transform,
                 n_dofs, n_fixed=0, facet_dofs=None):
        self.mesh = mesh
        self.kind = kind
        self.cell_degree = cell_degree
        self.facet_degree = facet_degree
        self.cell_dofs = cell_dofs
        self.cell_transform = cell_transform
        self.n_dofs = int(n_dofs)
        self.n_fixed = int(n_fixed)
        self.facet_dofs = facet_dofs
        for a in (cell_dofs, cell_transform, facet_dofs):
            if a is not None:
                a.setflags(write=False)

    @property
    def n_total(self):
        return self.n_dofs + self.n_fixed

    @property
    def is_hybrid(self):
        return self.kind == "hybrid"

    @property
    def n_cell_local(self):
        return self.cell_dofs.shape[1]

    @property
    def n_facet_local(self):
        return 0 if self.facet_dofs is None else self.facet_dofs.shape[1]

    def local_dofs(self):
        """Global indices of all local unknowns per cell: cell part, then facets 0, 1, 2."""
        if not self.is_hybrid:
            return self.cell_dofs
        fd = self.facet_dofs[self.mesh.cell_facets].reshape(self.mesh.n_cells, -1)
        return np.hstack([self.cell_dofs, fd])

    def zero(self):
        return Field(self, np.zeros(self.n_dofs), np.zeros(self.n_fixed))

    def __repr__(self):
        extra = f", r={self.facet_degree}" if self.is_hybrid else ""
        return f"DofSpace({self.kind}, l={self.cell_degree}{extra}, n_dofs={self.n_dofs})"


@dataclass
class Field:
    """Coefficients on a :class:`DofSpace` plus fixed boundary data."""

    space: DofSpace
    coeffs: np.ndarray
    fixed: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        self.fixed = np.asarray(self.fixed, dtype=float)
        if self.coeffs.shape != (self.space.n_dofs,):
            raise ValueError(f"expected {self.space.n_dofs} coefficients, got {self.coeffs.shape}")
        if self.fixed.shape != (self.space.n_fixed,):
            raise ValueError(f"expected {self.space.n_fixed} fixed values, got {self.fixed.shape}")

    def extended(self):
        """Free coefficients followed by fixed values, indexable by global dof."""
        return np.concatenate([self.coeffs, self.fixed])

    def cell_local(self):
        return self.extended()[self.space.cell_dofs]

    def cell_nodal(self):
        """Nodal P1 values of the cell component, ``(nc, 3)``."""
        return self.cell_local() @ self.space.cell_transform.T

    def cell_means(self):
        return self.cell_nodal().mean(axis=1)

    def facet_coeffs(self):
        if self.space.facet_dofs is None:
            raise ValueError("space has no facet component")
        return self.extended()[self.space.facet_dofs]

    def copy(self):
        return Field(self.space, self.coeffs.copy(), self.fixed.copy())


# ----------------------------------------------------------------------
# factories

def cell_dg_space(mesh, degree=1):
    """Broken polynomials of degree 0 or 1."""
    if degree not in (0, 1):
        raise ValueError(f"cell degree must be 0 or 1, got {degree}")
    nc = mesh.n_cells
    if degree == 1:
        dofs = np.arange(3 * nc).reshape(nc, 3)
        P = np.eye(3)
    else:
        dofs = np.arange(nc).reshape(nc, 1)
        P = np.ones((3, 1))
    return DofSpace(mesh, "dg", degree, None, dofs, P, dofs.size)


def eg_space(mesh):
    """Continuous P1 hats plus one constant per cell.

    Free unknowns: hats at interior vertices (in vertex order), then cell
    constants.  Hats at boundary vertices are not free; they sit in fixed
    slots that carry nodal Dirichlet data, so the free part is a direct sum.
    """
    nv, nc = mesh.n_vertices, mesh.n_cells
    interior = mesh.interior_vertices
    boundary = np.flatnonzero(mesh.is_boundary_vertex)
    nvi = len(interior)
    vnum = np.empty(nv, dtype=np.int64)
    vnum[interior] = np.arange(nvi)
    vnum[boundary] = nvi + nc + np.arange(len(boundary))
    dofs = np.column_stack([vnum[mesh.cells], nvi + np.arange(nc)])
    P = np.hstack([np.eye(3), np.ones((3, 1))])
    space = DofSpace(mesh, "eg", 1, None, dofs, P, nvi + nc, len(boundary))
    space.fixed_vertices = boundary
    return space


def hybrid_space(mesh, cell_degree, facet_degree):
    """Cell polynomials of degree ``cell_degree`` times facet polynomials of degree ``facet_degree``."""
    if cell_degree not in (0, 1) or facet_degree not in (0, 1):
        raise ValueError(f"unsupported degrees (l, r) = ({cell_degree}, {facet_degree})")
    nc, nf = mesh.n_cells, mesh.n_facets
    nl = 3 if cell_degree == 1 else 1
    P = np.eye(3) if cell_degree == 1 else np.ones((3, 1))
    cell_dofs = np.arange(nc * nl).reshape(nc, nl)
    nr = facet_degree + 1
    fnum = np.empty(nf, dtype=np.int64)
    inner, bnd = mesh.interior_facets, mesh.boundary_facets
    n_free = nc * nl + nr * len(inner)
    fnum[inner] = nc * nl + nr * np.arange(len(inner))
    fnum[bnd] = n_free + nr * np.arange(len(bnd))
    facet_dofs = fnum[:, None] + np.arange(nr)[None, :]
    return DofSpace(mesh, "hybrid", cell_degree, facet_degree, cell_dofs, P,
                    n_free, nr * len(bnd), facet_dofs)


# ----------------------------------------------------------------------
# projections

def _cell_moments(f, mesh, quad_degree):
    bary, w = triangle_rule(quad_degree)
    vals = np.asarray(f(*np.moveaxis(mesh.cell_points(bary), -1, 0)), dtype=float)
    vals = np.broadcast_to(vals, (mesh.n_cells, len(w)))
    # integrals against the barycentric coordinates
    return mesh.cell_areas[:, None] * np.einsum("cq,q,qi->ci", vals, w, bary)


def project_cell(f, degree, mesh, quad_degree=6):
    """Cellwise L2 projection of ``f(x, y)``.

    Degree 0 returns cell means with shape ``(nc, 1)``; degree 1 returns nodal
    P1 values with shape ``(nc, 3)``.
    """
    mom = _cell_moments(f, mesh, quad_degree)
    if degree == 0:
        return (mom.sum(axis=1) / mesh.cell_areas)[:, None]
    if degree == 1:
        return mom @ _P1_MASS_INV_REF / mesh.cell_areas[:, None]
    raise ValueError(f"cell degree must be 0 or 1, got {degree}")


def project_facet(g, degree, mesh, npts=4):
    """Facetwise L2 projection of ``g(x, y)`` onto Legendre polynomials, ``(nf, degree + 1)``."""
    if degree < 0:
        raise ValueError("facet degree must be nonnegative")
    t, w = facet_rule(max(npts, degree + 1))
    x = mesh.facet_points(t)
    vals = np.broadcast_to(np.asarray(g(x[..., 0], x[..., 1]), dtype=float), x.shape[:2])
    L = legendre(degree, t)
    return np.einsum("fq,q,qk->fk", vals, w, L) * (2.0 * np.arange(degree + 1) + 1.0)


def interpolate(space, v, quad_degree=6, facet_points=4):
    """Canonical interpolant of ``v(x, y)`` into ``space``.

    Broken spaces use the cellwise L2 projection.  Hybrid spaces use the
    cellwise projection for the cell part and the facetwise projection of the
    trace for the facet part (``v`` is assumed continuous, so the average
    trace is the trace).  The enriched space takes nodal values at the
    vertices and fixes each cell constant so that cell means are preserved.
    """
    mesh = space.mesh
    out = space.zero()
    if space.kind == "eg":
        interior = mesh.interior_vertices
        nvi = len(interior)
        x = mesh.vertices
        conf = np.asarray(v(x[:, 0], x[:, 1]), dtype=float)
        means = project_cell(v, 0, mesh, quad_degree)[:, 0]
        out.coeffs[:nvi] = conf[interior]
        out.coeffs[nvi:] = means - conf[mesh.cells].mean(axis=1)
        out.fixed[:] = conf[space.fixed_vertices]
        return out
    cell = project_cell(v, space.cell_degree, mesh, quad_degree)
    full = out.extended()
    full[space.cell_dofs] = cell
    if space.is_hybrid:
        full[space.facet_dofs] = project_facet(v, space.facet_degree, mesh, facet_points)
    out.coeffs[:] = full[:space.n_dofs]
    out.fixed[:] = full[space.n_dofs:space.n_total]
    return out


def evaluate(field, cell, bary):
    """Value of the cell component of ``field`` at barycentric point ``bary`` of ``cell``."""
    bary = np.asarray(bary, dtype=float)
    if bary.shape != (3,):
        raise ValueError("barycentric point must have three coordinates")
    if np.any(bary < -1e-12) or abs(bary.sum() - 1.0) > 1e-12:
        raise ValueError(f"point {bary.tolist()} lies outside the cell")
    nodal = field.cell_local()[cell] @ field.space.cell_transform.T
    return float(nodal @ bary)
