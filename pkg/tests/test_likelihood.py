import math

import numpy as np
import pytest

from sbbm.likelihood import Objective, gradient, nll, nll_of_params
from sbbm.model import Membership, NodeParams, SignedAdjacency, build_theta
from sbbm.projection import gauge_fix_k2

from conftest import random_adjacency, random_membership, random_params


def _fd_gradient(adjacency, params, membership, h=1e-5):
    x = params.to_vector()
    g = np.empty_like(x)
    for k in range(x.size):
        up, down = x.copy(), x.copy()
        up[k] += h
        down[k] -= h
        g[k] = (nll_of_params(adjacency, NodeParams.from_vector(up), membership).value
                - nll_of_params(adjacency, NodeParams.from_vector(down), membership).value) / (2 * h)
    return g


class TestNll:
    def test_zero_theta_is_log3(self, rng):
        adj = random_adjacency(rng, 7)
        z = np.zeros((7, 7))
        assert nll(adj, (z, z)).value == pytest.approx(math.log(3.0), abs=1e-14)

    def test_single_self_pair(self):
        adj = SignedAdjacency(np.array([[1]]), "include")
        value = nll(adj, (np.array([[1.0]]), np.array([[0.0]]))).value
        assert value == pytest.approx(-1 + math.log(2 + math.e), abs=1e-14)
        assert value == pytest.approx(0.5514447, abs=1e-7)

    def test_limit_all_positive(self):
        n = 4
        a = np.ones((n, n), dtype=int) - np.eye(n, dtype=int)
        adj = SignedAdjacency(a)
        values = [nll(adj, (np.full((n, n), t), np.zeros((n, n)))).value for t in (1.0, 5.0, 10.0, 30.0)]
        assert all(x > y for x, y in zip(values, values[1:]))
        assert values[-1] <= 1e-12

    def test_pair_count_follows_policy(self):
        a = np.zeros((3, 3), dtype=int)
        z = np.zeros((3, 3))
        assert nll(SignedAdjacency(a), (z, z)).pair_count == 3
        assert nll(SignedAdjacency(a, "include"), (z, z)).pair_count == 6

    def test_rejects_non_finite(self, rng):
        adj = random_adjacency(rng, 3)
        tp = np.zeros((3, 3))
        tp[0, 1] = tp[1, 0] = np.inf
        with pytest.raises(ValueError):
            nll(adj, (tp, np.zeros((3, 3))))

    def test_rejects_shape_mismatch(self, rng):
        adj = random_adjacency(rng, 3)
        with pytest.raises(ValueError):
            nll(adj, (np.zeros((4, 4)), np.zeros((4, 4))))

    def test_stable_for_large_theta(self, rng):
        adj = random_adjacency(rng, 5)
        big = np.full((5, 5), 800.0)
        assert np.isfinite(nll(adj, (big, -big)).value)


class TestNllOfParams:
    def test_zero_params(self, rng):
        adj = random_adjacency(rng, 6)
        m = random_membership(rng, 6, 2)
        assert nll_of_params(adj, NodeParams.zeros(6), m).value == pytest.approx(math.log(3.0), abs=1e-14)

    def test_composition_exact(self, rng):
        for _ in range(10):
            adj = random_adjacency(rng, 9)
            m = random_membership(rng, 9, 3)
            p = random_params(rng, 9)
            assert nll_of_params(adj, p, m).value == nll(adj, build_theta(p, m)).value

    def test_gauge_invariant(self, rng):
        adj = random_adjacency(rng, 10)
        m = random_membership(rng, 10, 2)
        p = random_params(rng, 10)
        before = nll_of_params(adj, p, m).value
        after = nll_of_params(adj, gauge_fix_k2(p, m), m).value
        assert after == pytest.approx(before, abs=1e-14)


class TestGradient:
    def test_single_node_hand_value(self):
        adj = SignedAdjacency(np.array([[0]]), "include")
        g = gradient(adj, NodeParams.zeros(1), Membership(np.array([0]), 1))
        assert g.gamma_plus[0] == pytest.approx(2 / 3, abs=1e-15)
        assert g.eta_plus[0] == pytest.approx(2 / 3, abs=1e-15)

    def test_finite_differences_k3(self, rng):
        adj = random_adjacency(rng, 10)
        m = random_membership(rng, 10, 3)
        p = random_params(rng, 10)
        g = gradient(adj, p, m).to_vector()
        fd = _fd_gradient(adj, p, m)
        assert np.linalg.norm(g - fd) / np.linalg.norm(fd) <= 1e-6

    def test_sign_swap_symmetry(self, rng):
        adj = random_adjacency(rng, 8)
        m = random_membership(rng, 8, 2)
        p = random_params(rng, 8)
        g = gradient(adj, p, m)
        swapped_adj = SignedAdjacency(-adj.entries)
        swapped_p = NodeParams(p.gamma_minus, p.eta_minus, p.gamma_plus, p.eta_plus)
        h = gradient(swapped_adj, swapped_p, m)
        np.testing.assert_array_equal(g.gamma_plus, h.gamma_minus)
        np.testing.assert_array_equal(g.eta_plus, h.eta_minus)
        np.testing.assert_array_equal(g.gamma_minus, h.gamma_plus)
        np.testing.assert_array_equal(g.eta_minus, h.eta_plus)

    @pytest.mark.parametrize("policy", ["exclude", "include"])
    def test_compiled_objective_matches_dense(self, rng, policy):
        for K in (1, 2, 4):
            adj = random_adjacency(rng, 15, diagonal_policy=policy)
            m = random_membership(rng, 15, K)
            p = random_params(rng, 15)
            value, g = Objective(adj, m).value_and_grad(p.to_vector())
            assert value == pytest.approx(nll_of_params(adj, p, m).value, rel=1e-13)
            assert Objective(adj, m).value(p.to_vector()) == pytest.approx(value, rel=1e-13)
            np.testing.assert_allclose(g, gradient(adj, p, m).to_vector(), rtol=1e-11, atol=1e-15)


class TestConvexity:
    def test_midpoint_inequality(self, rng):
        adj = random_adjacency(rng, 10)
        m = random_membership(rng, 10, 3)
        for _ in range(50):
            x, y = random_params(rng, 10, 2.0).to_vector(), random_params(rng, 10, 2.0).to_vector()
            t = rng.uniform()
            f = lambda v: nll_of_params(adj, NodeParams.from_vector(v), m).value
            assert f(t * x + (1 - t) * y) <= t * f(x) + (1 - t) * f(y) + 1e-10

    def test_decreases_toward_observed_sign(self, rng):
        adj = random_adjacency(rng, 6, density=0.9)
        i, j = np.argwhere(np.triu(adj.entries == 1, 1))[0]
        tp, tm = np.zeros((6, 6)), np.zeros((6, 6))
        base = nll(adj, (tp, tm)).value
        tp[i, j] = tp[j, i] = 3.0
        assert nll(adj, (tp, tm)).value < base
