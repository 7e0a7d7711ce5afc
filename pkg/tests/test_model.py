import numpy as np
import pytest

from conftest import dfe_params, endemic_params, path_graph, random_connected_graph
from netepi.errors import DimensionMismatch, ParameterError
from netepi.graph import build_laplacian
from netepi.model import PackedRHS, StateField, SvirsParams, rhs_full, rhs_reduced


def random_state(rng, n, N=1e4):
    parts = rng.dirichlet(np.ones(4), size=n).T * N
    return StateField(*parts)


def test_param_ranges():
    dfe_params()
    for bad in (dict(N=0), dict(r=0), dict(r=1), dict(p=1.5), dict(sigma=-0.1),
                dict(epsilon=0), dict(epsilon=1.2), dict(beta=-1), dict(eta=-0.1),
                dict(mu=0, gamma=0), dict(mu=0, p=0, xi=0), dict(gamma=float("nan"))):
        with pytest.raises(ParameterError):
            dfe_params(**bad)
    assert dfe_params(mu=0).mu == 0
    assert dfe_params().beta_over_N == pytest.approx(0.095)


def test_single_node_hand_computed():
    m = SvirsParams(N=100, r=0.5, mu=0.1, p=0.2, beta=0.01, xi=0.3, eta=0.4,
                    sigma=0.5, gamma=0.6, epsilon=1.0)
    L = build_laplacian(path_graph(1))
    d = rhs_full(m, L, StateField([40.0], [30.0], [20.0], [10.0]))
    # dS = 5 - 0.3*40 - 0.01*40*20 + 0.3*30 + 0.4*10
    assert d.dS[0] == pytest.approx(5 - 12 - 8 + 9 + 4)
    # dV = 5 + 0.2*40 - 0.005*30*20 - 0.4*30
    assert d.dV[0] == pytest.approx(5 + 8 - 3 - 12)
    assert d.dI[0] == pytest.approx(8 + 3 - 0.7 * 20)
    assert d.dR[0] == pytest.approx(0.6 * 20 - 0.5 * 10)


def test_diffusion_term_on_pair():
    m = dfe_params(beta=0.0, mu=0.0, p=0.0, xi=0.5, eta=0.0, gamma=0.1, epsilon=0.5)
    L = build_laplacian(path_graph(2, w=2.0))
    d = rhs_full(m, L, StateField([6.0, 2.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]))
    assert np.allclose(d.dS, [0.5 * 2.0 * (2 - 6), 0.5 * 2.0 * (6 - 2)])


def test_totals_follow_linear_law(rng):
    m = endemic_params(eta=0.03)
    L = build_laplacian(random_connected_graph(rng, 15))
    st = random_state(rng, 15)
    d = rhs_full(m, L, st)
    total = d.dS + d.dV + d.dI + d.dR
    expected = m.epsilon * (L.matrix @ st.totals()) + m.mu * (m.N - st.totals())
    assert np.allclose(total, expected, atol=1e-9)
    # at per-node total N the totals are stationary
    assert np.max(np.abs(total)) < 1e-9 * m.N


def test_infection_free_subspace_invariant(rng):
    m = endemic_params()
    L = build_laplacian(random_connected_graph(rng, 8))
    st = random_state(rng, 8)
    st.I[:] = 0
    assert np.all(rhs_full(m, L, st).dI == 0)


def test_boundary_inward(rng):
    m = endemic_params(eta=0.05)
    L = build_laplacian(random_connected_graph(rng, 10))
    for comp in ("S", "V", "I", "R"):
        st = random_state(rng, 10)
        getattr(st, comp)[3] = 0.0
        d = rhs_full(m, L, st)
        assert getattr(d, "d" + comp)[3] >= 0


def test_reduced_agrees_with_full(rng):
    m = endemic_params(eta=0.05)
    L = build_laplacian(random_connected_graph(rng, 12))
    st = random_state(rng, 12)
    full = rhs_full(m, L, st)
    red = rhs_reduced(m, L, st.S, st.V, st.I)
    for a, b in zip(red, full[:3]):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-9)


def test_packed_agrees_with_full(rng):
    m = endemic_params(eta=0.05, sigma=0.3)
    L = build_laplacian(random_connected_graph(rng, 20))
    st = random_state(rng, 20)
    packed = PackedRHS(m, L)(st.as_array())
    assert np.allclose(packed, np.array(rhs_full(m, L, st)), rtol=1e-13, atol=1e-10)


def test_dimension_mismatch(rng):
    L = build_laplacian(path_graph(3))
    with pytest.raises(DimensionMismatch):
        rhs_full(dfe_params(), L, StateField.uniform(4, 1, 1, 1, 1))
    with pytest.raises(DimensionMismatch):
        StateField(np.ones(3), np.ones(2), np.ones(3), np.ones(3))


def test_state_admissible():
    st = StateField.uniform(3, 9000, 900, 50, 50)
    assert st.is_admissible(1e4)
    st.S[0] -= 1
    assert not st.is_admissible(1e4)
    assert np.array_equal(StateField.from_array(st.as_array()).S, st.S)
