import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from proxdg.mesh import Mesh, generate_structured
from proxdg.problems import benchmark_problem
from proxdg.quadrature import triangle_rule
from proxdg.spaces import (Field, cell_dg_space, eg_space, evaluate, hybrid_space, interpolate,
                           project_cell, project_facet)

REF = Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])


def test_project_cell_constant():
    mesh = generate_structured(3)
    np.testing.assert_allclose(project_cell(lambda x, y: 3.0 + 0 * x, 0, mesh), 3.0, atol=1e-14)


def test_project_cell_affine_exact():
    mesh = generate_structured(3)
    nodal = project_cell(lambda x, y: x, 1, mesh)
    np.testing.assert_allclose(nodal, mesh.vertices[mesh.cells][..., 0], atol=1e-12)


def test_project_cell_x_squared_reference():
    assert project_cell(lambda x, y: x * x, 0, REF)[0, 0] == pytest.approx(1.0 / 6.0, abs=1e-14)


def test_project_cell_rejects_degree():
    with pytest.raises(ValueError):
        project_cell(lambda x, y: x, 2, REF)


def test_project_facet_examples():
    mesh = generate_structured(2, (0, 2, 0, 2))
    np.testing.assert_allclose(project_facet(lambda x, y: 1.0 + 0 * x, 0, mesh), 1.0, atol=1e-14)
    c = project_facet(lambda x, y: 2 * x - y + 1, 1, mesh)
    xa = mesh.vertices[mesh.facets[:, 0]]
    xb = mesh.vertices[mesh.facets[:, 1]]
    val = lambda p: 2 * p[:, 0] - p[:, 1] + 1
    # Legendre in s = 2t - 1: endpoint values are c0 -/+ c1
    np.testing.assert_allclose(c[:, 0] - c[:, 1], val(xa), atol=1e-13)
    np.testing.assert_allclose(c[:, 0] + c[:, 1], val(xb), atol=1e-13)
    # unit-length facet along the x axis: mean of s^2 is 1/3
    unit = Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    f = int(np.flatnonzero((unit.facets == [0, 1]).all(axis=1))[0])
    assert project_facet(lambda x, y: x * x, 0, unit)[f, 0] == pytest.approx(1 / 3, abs=1e-14)


@settings(max_examples=20, deadline=None)
@given(coef=st.lists(st.floats(-3, 3), min_size=4, max_size=4), degree=st.sampled_from([0, 1]))
def test_projection_orthogonal(coef, degree):
    mesh = generate_structured(2)
    a, b, c, d = coef

    def f(x, y):
        return np.sin(a * x + b) * np.cos(c * y) + d * x * y

    P = project_cell(f, degree, mesh, quad_degree=10)
    bary, w = triangle_rule(10)
    xq = mesh.cell_points(bary)
    fq = f(xq[..., 0], xq[..., 1])
    Pq = P @ (bary.T if degree == 1 else np.ones((1, len(w))))
    tests = bary.T if degree == 1 else np.ones((1, len(w)))
    res = mesh.cell_areas[:, None] * np.einsum("cq,q,iq->ci", fq - Pq, w, tests)
    assert np.abs(res).max() <= 1e-12


@pytest.mark.parametrize("make", [
    lambda m: cell_dg_space(m, 0), lambda m: cell_dg_space(m, 1), eg_space,
    lambda m: hybrid_space(m, 0, 0), lambda m: hybrid_space(m, 0, 1), lambda m: hybrid_space(m, 1, 1),
], ids=["dg0", "dg1", "eg", "h00", "h01", "h11"])
def test_interpolant_preserves_cell_means(make):
    mesh = generate_structured(4)
    space = make(mesh)

    def v(x, y):
        return np.exp(0.5 * x) * np.cos(y) + x * y

    fld = interpolate(space, v)
    means = project_cell(v, 0, mesh)[:, 0]
    np.testing.assert_allclose(fld.cell_means(), means, atol=1e-12)
    zero = interpolate(space, lambda x, y: 0 * x)
    assert not zero.coeffs.any() and not zero.fixed.any()


def test_dof_counts():
    mesh = generate_structured(4)
    nc, nvi, nfi = mesh.n_cells, len(mesh.interior_vertices), len(mesh.interior_facets)
    assert cell_dg_space(mesh, 0).n_dofs == nc
    assert cell_dg_space(mesh, 1).n_dofs == 3 * nc
    assert eg_space(mesh).n_dofs == nvi + nc
    assert hybrid_space(mesh, 1, 1).n_dofs == 3 * nc + 2 * nfi
    assert hybrid_space(mesh, 0, 1).n_dofs == nc + 2 * nfi
    assert hybrid_space(mesh, 0, 0).n_dofs == nc + nfi
    assert hybrid_space(mesh, 1, 1).n_fixed == 2 * len(mesh.boundary_facets)
    with pytest.raises(ValueError):
        hybrid_space(mesh, 1, 2)


def test_eg_gram_nonsingular():
    for n in (1, 2, 4):
        mesh = generate_structured(n)
        space = eg_space(mesh)
        bary, w = triangle_rule(2)
        G = np.zeros((space.n_dofs, space.n_dofs))
        for j in range(space.n_dofs):
            ej = np.zeros(space.n_dofs)
            ej[j] = 1.0
            vj = Field(space, ej, np.zeros(space.n_fixed)).cell_nodal() @ bary.T
            for i in range(j, space.n_dofs):
                ei = np.zeros(space.n_dofs)
                ei[i] = 1.0
                vi = Field(space, ei, np.zeros(space.n_fixed)).cell_nodal() @ bary.T
                G[i, j] = G[j, i] = np.sum(mesh.cell_areas * ((vi * vj) @ w))
        assert np.linalg.eigvalsh(G).min() > 1e-8


def test_interpolation_error_second_order():
    p = benchmark_problem()
    errs = []
    for n in (8, 16):
        mesh = generate_structured(n)
        fld = interpolate(cell_dg_space(mesh, 1), p.exact_u)
        bary, w = triangle_rule(6)
        xq = mesh.cell_points(bary)
        diff = p.exact_u(xq[..., 0], xq[..., 1]) - fld.cell_nodal() @ bary.T
        errs.append(np.sqrt(np.sum(mesh.cell_areas * (diff ** 2 @ w))))
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_evaluate_examples():
    mesh = generate_structured(2)
    dg = cell_dg_space(mesh, 1)
    const = interpolate(dg, lambda x, y: 0 * x + 2.5)
    assert evaluate(const, 3, [0.2, 0.3, 0.5]) == pytest.approx(2.5)
    e = np.zeros(dg.n_dofs)
    e[dg.cell_dofs[1, 2]] = 1.0
    basis = Field(dg, e, np.zeros(0))
    assert evaluate(basis, 1, [0, 0, 1]) == pytest.approx(1.0)
    assert evaluate(basis, 1, [1, 0, 0]) == pytest.approx(0.0)
    # EG: interior hat plus a cell constant, evaluated at the centroid
    eg = eg_space(mesh)
    coeffs = np.zeros(eg.n_dofs)
    z = int(mesh.interior_vertices[0])
    cell = int(np.flatnonzero((mesh.cells == z).any(axis=1))[0])
    coeffs[0] = 1.0                    # hat of the single interior vertex
    nvi = len(mesh.interior_vertices)
    coeffs[nvi + cell] = 0.75
    fld = Field(eg, coeffs, np.zeros(eg.n_fixed))
    assert evaluate(fld, cell, [1 / 3, 1 / 3, 1 / 3]) == pytest.approx(1 / 3 + 0.75)
    with pytest.raises(ValueError):
        evaluate(fld, cell, [1.2, -0.1, -0.1])
    with pytest.raises(ValueError):
        evaluate(fld, cell, [0.5, 0.5])


def test_field_validates_lengths():
    space = cell_dg_space(generate_structured(1), 1)
    with pytest.raises(ValueError):
        Field(space, np.zeros(5), np.zeros(0))
    with pytest.raises(ValueError):
        Field(space, np.zeros(6), np.zeros(1))
