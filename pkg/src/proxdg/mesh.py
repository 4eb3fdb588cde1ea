"""Conforming triangulations with oriented facet connectivity.

Every facet carries a fixed unit normal ``n_F`` together with an owner cell
``T_-`` and a neighbour ``T_+`` such that ``n_F`` points from ``T_-`` into
``T_+``.  Jumps and averages of broken fields are evaluated in that frame::

    [v] = v|T_- - v|T_+        {v} = (v|T_- + v|T_+) / 2

On boundary facets ``T_+`` is absent, ``n_F`` points out of the domain and
both operators reduce to the trace of ``v|T_-``.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = ["Mesh", "generate_structured", "jump", "average"]


def _frozen(a, dtype=None):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


class Mesh:
    """Immutable 2D simplicial mesh.

    Parameters
    ----------
    vertices : (nv, 2) array_like
        Vertex coordinates.
    cells : (nc, 3) array_like of int
        Vertex indices per triangle.  Clockwise triangles are reoriented.

    Attributes
    ----------
    facets : (nf, 2) int array
        Vertex pairs, ascending index order.
    facet_cells : (nf, 2) int array
        ``[T_-, T_+]`` per facet, ``T_+ = -1`` on the boundary.
    facet_local : (nf, 2) int array
        Local facet index of the facet inside ``T_-`` and ``T_+``.
    facet_normals : (nf, 2) float array
        The fixed unit normal ``n_F``.
    cell_facets : (nc, 3) int array
        Facet opposite to local vertex ``i``.
    cell_normals : (nc, 3, 2) float array
        Outward unit normal of cell ``T`` on its local facet ``i``.
    """

    def __init__(self, vertices, cells, *, _orientation=None):
        vertices = np.asarray(vertices, dtype=float)
        cells = np.array(cells, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise ValueError("vertices must have shape (nv, 2)")
        if cells.ndim != 2 or cells.shape[1] != 3 or len(cells) == 0:
            raise ValueError("cells must have shape (nc, 3) with nc >= 1")
        if cells.min() < 0 or cells.max() >= len(vertices):
            raise ValueError("cell references a vertex index out of range")

        p = vertices[cells]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        signed = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        if np.any(np.abs(signed) <= 1e-14 * max(1.0, np.abs(vertices).max() ** 2)):
            raise ValueError("degenerate cell with (near) zero area")
        cw = signed < 0
        cells[cw] = cells[cw][:, [0, 2, 1]]

        self.vertices = _frozen(vertices)
        self.cells = _frozen(cells)
        self._build_connectivity(_orientation)

    # ------------------------------------------------------------------
    def _build_connectivity(self, orientation):
        x, c = self.vertices, self.cells
        nc = len(c)
        loc = np.array([[1, 2], [2, 0], [0, 1]])
        edges = c[:, loc]  # (nc, 3, 2), local facet i opposite vertex i
        sorted_edges = np.sort(edges, axis=2).reshape(-1, 2)
        facets, inverse = np.unique(sorted_edges, axis=0, return_inverse=True)
        inverse = inverse.reshape(nc, 3)
        nf = len(facets)

        # outward normals: clockwise rotation of the counterclockwise edge tangent
        t = x[edges[:, :, 1]] - x[edges[:, :, 0]]
        lengths = np.linalg.norm(t, axis=2)
        cell_normals = np.stack([t[..., 1], -t[..., 0]], axis=-1) / lengths[..., None]

        counts = np.bincount(inverse.ravel(), minlength=nf)
        if counts.max() > 2:
            raise ValueError("non-manifold mesh: a facet is shared by more than two cells")

        owner = -np.ones((nf, 2), dtype=np.int64)
        local = -np.ones((nf, 2), dtype=np.int64)
        flat_f = inverse.ravel()
        flat_t = np.repeat(np.arange(nc), 3)
        flat_i = np.tile(np.arange(3), nc)
        order = np.argsort(flat_f, kind="stable")
        ff, tt, ii = flat_f[order], flat_t[order], flat_i[order]
        first = np.ones(len(ff), dtype=bool)
        first[1:] = ff[1:] != ff[:-1]
        owner[ff[first], 0], local[ff[first], 0] = tt[first], ii[first]
        owner[ff[~first], 1], local[ff[~first], 1] = tt[~first], ii[~first]

        # n_F: clockwise rotation of the tangent oriented by ascending vertex index
        tf = x[facets[:, 1]] - x[facets[:, 0]]
        hF = np.linalg.norm(tf, axis=1)
        nF = np.stack([tf[:, 1], -tf[:, 0]], axis=1) / hF[:, None]

        n0 = cell_normals[owner[:, 0], local[:, 0]]
        boundary = owner[:, 1] < 0
        # T_- is the cell out of which n_F points
        swap = (np.einsum("ij,ij->i", nF, n0) < 0) & ~boundary
        owner[swap] = owner[swap][:, ::-1]
        local[swap] = local[swap][:, ::-1]
        flip_b = boundary & (np.einsum("ij,ij->i", nF, n0) < 0)
        nF[flip_b] *= -1.0

        if orientation is not None:
            rev = np.asarray(orientation, dtype=bool) & ~boundary
            owner[rev] = owner[rev][:, ::-1]
            local[rev] = local[rev][:, ::-1]
            nF[rev] *= -1.0

        p = x[c]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

        self.facets = _frozen(facets)
        self.facet_cells = _frozen(owner)
        self.facet_local = _frozen(local)
        self.facet_normals = _frozen(nF)
        self.facet_lengths = _frozen(hF)
        self.boundary_facets = _frozen(np.flatnonzero(boundary))
        self.interior_facets = _frozen(np.flatnonzero(~boundary))
        self.is_boundary_facet = _frozen(boundary)
        self.cell_facets = _frozen(inverse)
        self.cell_normals = _frozen(cell_normals)
        self.cell_facet_lengths = _frozen(lengths)
        self.cell_areas = _frozen(area)
        self.cell_diameters = _frozen(lengths.max(axis=1))
        self.cell_centroids = _frozen(p.mean(axis=1))
        self.h = float(self.cell_diameters.max())

        bverts = np.unique(facets[boundary].ravel())
        is_bv = np.zeros(len(x), dtype=bool)
        is_bv[bverts] = True
        self.is_boundary_vertex = _frozen(is_bv)
        self.interior_vertices = _frozen(np.flatnonzero(~is_bv))

    # ------------------------------------------------------------------
    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_facets(self):
        return len(self.facets)

    @property
    def area(self):
        return float(self.cell_areas.sum())

    def inradii(self):
        return 2.0 * self.cell_areas / self.cell_facet_lengths.sum(axis=1)

    def cell_points(self, bary):
        """Physical coordinates of barycentric points in every cell, ``(nc, nq, 2)``."""
        return np.einsum("qi,cid->cqd", np.asarray(bary), self.vertices[self.cells])

    def facet_points(self, t):
        """Points at parameters ``t`` along every facet, from lower to higher vertex index."""
        t = np.asarray(t, dtype=float)
        a = self.vertices[self.facets[:, 0]]
        b = self.vertices[self.facets[:, 1]]
        return a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]

    def gradients(self):
        """Gradients of the three barycentric coordinates per cell, ``(nc, 3, 2)``."""
        scale = -self.cell_facet_lengths / (2.0 * self.cell_areas[:, None])
        return self.cell_normals * scale[..., None]

    def facet_in_cell(self, side=0):
        """Local vertex indices ``(i_a, i_b)`` of each facet's endpoints inside ``T_-`` (side 0) or ``T_+``.

        Boundary facets get ``-1`` for ``side=1``.
        """
        cells = self.facet_cells[:, side]
        valid = cells >= 0
        out = -np.ones((self.n_facets, 2), dtype=np.int64)
        c = self.cells[cells[valid]]
        for k in range(2):
            out[valid, k] = np.argmax(c == self.facets[valid, k][:, None], axis=1)
        return out

    def cell_facet_endpoints(self):
        """Local vertex indices ``(i_a, i_b)`` of every cell's local facets, ``(nc, 3, 2)``.

        ``i_a`` is the endpoint with the lower global index, so facet
        parameters agree with :meth:`facet_points`.
        """
        p = np.array([1, 2, 0])
        q = np.array([2, 0, 1])
        lower = self.cells[:, p] < self.cells[:, q]
        ia = np.where(lower, p, q)
        ib = np.where(lower, q, p)
        return np.stack([ia, ib], axis=-1)

    def jump_average_frame(self, facet):
        """Return ``(T_-, T_+ or None, n_F)`` for ``facet``."""
        if not 0 <= facet < self.n_facets:
            raise IndexError(f"facet index {facet} out of range [0, {self.n_facets})")
        tm, tp = self.facet_cells[facet]
        return int(tm), (None if tp < 0 else int(tp)), self.facet_normals[facet].copy()

    def vertex_patches(self):
        """List of cell indices incident to each vertex."""
        order = np.argsort(self.cells.ravel(), kind="stable")
        verts = self.cells.ravel()[order]
        cells = order // 3
        splits = np.searchsorted(verts, np.arange(1, self.n_vertices))
        return np.split(cells, splits)

    def with_reversed_facets(self, mask):
        """Copy of the mesh with the stored orientation of selected interior facets reversed.

        ``T_-``/``T_+`` are swapped and ``n_F`` negated together, so every jump
        changes sign along with the normal.
        """
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (self.n_facets,):
            raise ValueError("mask must have one entry per facet")
        m = Mesh.__new__(Mesh)
        m.vertices, m.cells = self.vertices, self.cells
        m._build_connectivity(mask)
        return m

    # ------------------------------------------------------------------
    def to_json(self, path=None):
        data = {"vertices": self.vertices.tolist(), "cells": self.cells.tolist()}
        text = json.dumps(data)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, source):
        """Load ``{"vertices": [[x, y], ...], "cells": [[i, j, k], ...]}``.

        ``source`` is a path or a JSON string.  Connectivity is always rebuilt.
        """
        if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
            source = Path(source).read_text()
        data = json.loads(source)
        return cls(data["vertices"], data["cells"])

    def __repr__(self):
        return (f"Mesh(n_vertices={self.n_vertices}, n_cells={self.n_cells}, "
                f"n_facets={self.n_facets}, h={self.h:.4g})")


def generate_structured(n, bounds=(-1.0, 1.0, -1.0, 1.0)):
    """Uniform triangulation of a rectangle.

    Each of the ``n x n`` grid squares is split along its bottom-left to
    top-right diagonal.

    Parameters
    ----------
    n : int
        Subdivisions per axis, ``n >= 1``.
    bounds : tuple
        ``(x0, x1, y0, y1)``.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"need n >= 1 subdivisions, got {n!r}")
    n = int(n)
    x0, x1, y0, y1 = map(float, bounds)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate rectangle {bounds!r}")
    xs, ys = np.linspace(x0, x1, n + 1), np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    j, i = np.divmod(np.arange(n * n), n)
    v00 = j * (n + 1) + i
    v10, v01 = v00 + 1, v00 + n + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    cells = np.empty((2 * n * n, 3), dtype=np.int64)
    cells[0::2], cells[1::2] = lower, upper
    return Mesh(vertices, cells)


def jump(mesh, facet, value_minus, value_plus=None):
    """``[v]`` on ``facet`` given the two one-sided traces."""
    if mesh.is_boundary_facet[facet]:
        return value_minus
    return value_minus - value_plus


def average(mesh, facet, value_minus, value_plus=None):
    """``{v}`` on ``facet`` given the two one-sided traces."""
    if mesh.is_boundary_facet[facet]:
        return value_minus
    return 0.5 * (value_minus + value_plus)
