"""Seeded synthetic signed networks: a generic model sampler and the three
simulation designs (two-type logistic, and heterogeneous weak-balance
designs with varying K or node-parameter spread).

Randomness comes from counter-based Philox streams keyed by
``(seed, purpose)``. Node-level draws are taken in node order and pair
draws in order of the larger endpoint, so growing ``n`` extends the raw
draws of a smaller network rather than reshuffling them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from sbbm.model import Membership, NodeParams, SignedAdjacency, population_probabilities

_PURPOSES = {
    "edges": 0,
    "diagonal": 1,
    "labels": 2,
    "beta_minus": 3,
    "gamma_minus": 4,
    "delta": 5,
    "types": 6,
    "alpha": 7,
}


def stream(seed: int, purpose: str) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(_PURPOSES[purpose],))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class SampleOutput:
    adjacency: SignedAdjacency
    membership: Membership
    p_plus: np.ndarray
    p_minus: np.ndarray
    params: Optional[NodeParams] = None
    extras: dict = field(default_factory=dict)


def draw_signs(p_plus: np.ndarray, p_minus: np.ndarray, seed: int, diagonal_policy: str = "exclude") -> SignedAdjacency:
    """Independent multinomial draw of every pair from its sign probabilities."""
    n = p_plus.shape[0]
    hi, lo = np.tril_indices(n, -1)  # pairs (lo, hi), ordered by hi
    u = stream(seed, "edges").random(hi.size)
    pp, pm = p_plus[lo, hi], p_minus[lo, hi]
    vals = np.where(u < pp, 1, np.where(u < pp + pm, -1, 0)).astype(np.int8)
    a = np.zeros((n, n), dtype=np.int8)
    a[lo, hi] = vals
    a[hi, lo] = vals
    if diagonal_policy == "include":
        u = stream(seed, "diagonal").random(n)
        dp, dm = np.diag(p_plus), np.diag(p_minus)
        a[np.arange(n), np.arange(n)] = np.where(u < dp, 1, np.where(u < dp + dm, -1, 0))
    return SignedAdjacency(a, diagonal_policy)


def sample_sbbm(params: NodeParams, membership: Membership, seed: int = 0,
                diagonal_policy: str = "exclude") -> SampleOutput:
    """Draw a signed network from the block beta-model."""
    if not params.is_feasible(0.0, atol=0.0):
        raise ValueError("parameters violate the balance constraints")
    p_plus, p_minus = population_probabilities(params, membership)
    adjacency = draw_signs(p_plus, p_minus, seed, diagonal_policy)
    return SampleOutput(adjacency, membership, p_plus, p_minus, params)


@dataclass(frozen=True)
class Example1Config:
    n: int
    mu: float = -2.5
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def gen_example1(cfg: Example1Config, diagonal_policy: str = "exclude") -> SampleOutput:
    """Two-type logistic design with degree heterogeneity.

    Edge presence is ``sigmoid(mu + a_i + a_j - 2 mean(a) + x_i . x_j)`` with
    column-centered one-hot types ``x``; given an edge, it is positive with
    probability ``sigmoid(v_i v_j)`` where ``v = (x_1 - x_2) / sqrt(2)``.
    """
    n = cfg.n
    types = (stream(cfg.seed, "types").random(n) >= 0.5).astype(np.int64)
    x = np.eye(2)[types]
    xc = x - x.mean(axis=0)
    alpha = stream(cfg.seed, "alpha").uniform(1.0, 3.0, size=n)
    v = (xc[:, 0] - xc[:, 1]) / np.sqrt(2.0)
    p_edge = _sigmoid(cfg.mu + alpha[:, None] + alpha[None, :] - 2.0 * alpha.mean() + xc @ xc.T)
    p_pos = _sigmoid(np.outer(v, v))
    p_plus = p_edge * p_pos
    p_minus = p_edge * (1.0 - p_pos)
    adjacency = draw_signs(p_plus, p_minus, cfg.seed, diagonal_policy)
    return SampleOutput(adjacency, Membership(types, 2), p_plus, p_minus,
                        extras={"alpha": alpha, "v": v, "p_edge": p_edge})


@dataclass(frozen=True)
class Example23Config:
    """Heterogeneous weak-balance design.

    ``beta-`` and ``gamma-`` are iid normal with the given mean and
    variance; ``beta+ = beta- + delta`` and ``gamma+ = gamma- - delta`` with
    ``delta ~ U(delta_range)``; labels uniform over K.
    """

    n: int
    K: int = 4
    mean_beta: float = -3.5
    var_beta: float = 9.0
    delta_range: tuple = (0.0, 2.0)
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.K <= self.n:
            raise ValueError(f"need 1 <= K <= n, got K={self.K}, n={self.n}")
        if not self.var_beta > 0:
            raise ValueError("var_beta must be positive")
        lo, hi = self.delta_range
        if not 0 <= lo < hi:
            raise ValueError("delta_range must satisfy 0 <= low < high")


def draw_example23(cfg: Example23Config) -> tuple[NodeParams, Membership, np.ndarray]:
    """Node parameters, labels and ``delta`` for the weak-balance design."""
    n, sd = cfg.n, np.sqrt(cfg.var_beta)
    beta_minus = stream(cfg.seed, "beta_minus").normal(cfg.mean_beta, sd, size=n)
    gamma_minus = stream(cfg.seed, "gamma_minus").normal(cfg.mean_beta, sd, size=n)
    lo, hi = cfg.delta_range
    delta = stream(cfg.seed, "delta").uniform(lo, hi, size=n)
    if lo == 0.0:
        # U(0, hi) can return exactly 0; the constraints are strict
        delta = np.where(delta > 0, delta, np.nextafter(0.0, 1.0))
    labels = stream(cfg.seed, "labels").integers(0, cfg.K, size=n)
    params = NodeParams.from_beta_gamma(beta_minus + delta, beta_minus, gamma_minus - delta, gamma_minus)
    return params, Membership(labels, cfg.K), delta


def gen_example23(cfg: Example23Config, diagonal_policy: str = "exclude") -> SampleOutput:
    params, membership, delta = draw_example23(cfg)
    out = sample_sbbm(params, membership, cfg.seed, diagonal_policy)
    out.extras["delta"] = delta
    return out


def gen_example2(n: int, K: int = 4, seed: int = 0, diagonal_policy: str = "exclude") -> SampleOutput:
    """Weak-balance design with ``N(-3.5, 9)`` node parameters."""
    return gen_example23(Example23Config(n=n, K=K, mean_beta=-3.5, var_beta=9.0, seed=seed), diagonal_policy)


def gen_example3(n: int, var_beta: float = 1.0, seed: int = 0, diagonal_policy: str = "exclude") -> SampleOutput:
    """K = 4 weak-balance design with ``N(-3, var_beta)`` node parameters."""
    return gen_example23(Example23Config(n=n, K=4, mean_beta=-3.0, var_beta=var_beta, seed=seed), diagonal_policy)
