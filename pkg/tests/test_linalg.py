import numpy as np
import pytest
import scipy.sparse as sp

from proxdg.forms import Method, assemble
from proxdg.linalg import NotSPDError, SingularBlockError, SPDFactor, condense, pcg, solve_saddle, solve_spd
from proxdg.mesh import generate_structured
from proxdg.solver import newton_linearize


def _random_spd(rng, n, density=0.1):
    B = sp.random(n, n, density=density, random_state=np.random.RandomState(int(rng.integers(1 << 30))))
    return (B @ B.T + n * sp.identity(n)).tocsr()


@pytest.mark.parametrize("method", ["auto", "direct", "cg"])
def test_identity_and_hand_solve(method):
    b = np.array([1.0, -2.0, 3.0])
    np.testing.assert_allclose(solve_spd(sp.identity(3), b, method=method), b)
    A = sp.csr_matrix([[2.0, 1.0], [1.0, 2.0]])
    np.testing.assert_allclose(solve_spd(A, [3.0, 3.0], method=method), [1.0, 1.0], atol=1e-12)


@pytest.mark.parametrize("ordering", ["MMD_AT_PLUS_A", "RCM", "COLAMD"])
def test_random_spd_against_dense(ordering, rng):
    A = _random_spd(rng, 50)
    b = rng.standard_normal(50)
    x = solve_spd(A, b, ordering=ordering)
    ref = np.linalg.solve(A.toarray(), b)
    np.testing.assert_allclose(x, ref, atol=1e-10)
    assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b)


def test_cg_and_direct_agree(rng):
    A = _random_spd(rng, 80, 0.05)
    b = rng.standard_normal(80)
    np.testing.assert_allclose(solve_spd(A, b, method="cg"), solve_spd(A, b, method="direct"), atol=1e-8)


def test_indefinite_detected_and_named():
    A = sp.csr_matrix(np.diag([1.0, -1.0, 2.0]))
    with pytest.raises(NotSPDError, match="my stiffness"):
        SPDFactor(A, name="my stiffness")
    with pytest.raises(NotSPDError, match="my stiffness"):
        pcg(A, np.ones(3), name="my stiffness")
    # positive diagonal, indefinite: CG breakdown
    B = sp.csr_matrix([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(NotSPDError):
        solve_spd(B, np.array([1.0, 0.0]), method="direct")
    with pytest.raises(NotSPDError):
        pcg(B, np.array([1.0, -1.0]))
    with pytest.raises(NotSPDError):
        SPDFactor(sp.csr_matrix([[1.0, 0.5], [0.0, 1.0]]))


def test_unknown_solve_method():
    with pytest.raises(ValueError):
        solve_spd(sp.identity(2), np.ones(2), method="qr")


def test_condense_single_cell_dimension(rng):
    # 3 interior + 6 "facet" unknowns
    A = _random_spd(rng, 9, 0.5).toarray()
    S, s, recover = condense(sp.csr_matrix(A), np.ones(9), np.array([[0, 1, 2]]))
    assert S.shape == (6, 6)
    x = recover(np.linalg.solve(S.toarray(), s))
    np.testing.assert_allclose(x, np.linalg.solve(A, np.ones(9)), atol=1e-12)


def test_condense_singular_block():
    K = sp.csr_matrix(np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 1.0, 3.0]]))
    with pytest.raises(SingularBlockError):
        condense(K, np.ones(3), np.array([[0, 1]]))


def test_condense_rejects_coupled_blocks():
    K = sp.csr_matrix(np.array([[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 1.0]]))
    with pytest.raises(ValueError):
        condense(K, np.ones(3), np.array([[0], [1]]))


@pytest.mark.parametrize("lr", [(0, 1), (0, 0), (1, 1)])
def test_condensed_newton_matches_full(lr, rng):
    mesh = generate_structured(2)
    s = assemble(mesh, Method("hho", None, *lr))
    nc = mesh.n_cells
    ns = newton_linearize(s, rng.standard_normal(nc), 2.0, rng.standard_normal(nc))
    ns.rhs = rng.standard_normal(s.n_dofs + nc)
    K = ns.jacobian()
    blocks = ns.interior_blocks()
    S, sv, recover = condense(K, ns.rhs, blocks)
    assert abs(S - S.T).max() <= 1e-12 * abs(S).max()
    assert np.linalg.eigvalsh(S.toarray()).min() > 0
    x = recover(solve_spd((0.5 * (S + S.T)).tocsr(), sv))
    np.testing.assert_allclose(x, solve_saddle(K, ns.rhs), atol=1e-10)
    # condensed unknowns are exactly the interior facet dofs
    assert S.shape[0] == s.n_dofs - s.space.cell_dofs.size
