"""Domain types and the maps from node parameters + membership to log-odds
and edge-sign probabilities."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

DIAGONAL_POLICIES = ("include", "exclude")


@dataclass
class SignedAdjacency:
    """Symmetric signed adjacency matrix with entries in {+1, -1, 0}.

    Parameters
    ----------
    entries : array_like of shape (n, n)
        Signed adjacency. Stored as ``int8``.
    diagonal_policy : {"exclude", "include"}
        Whether self-pairs ``(i, i)`` enter likelihood sums. Under
        ``"exclude"`` the diagonal must be zero.
    node_ids : sequence of str, optional
        External node identifiers, aligned with rows.
    """

    entries: np.ndarray
    diagonal_policy: str = "exclude"
    node_ids: Optional[list] = None

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {a.shape}")
        if a.shape[0] < 1:
            raise ValueError("adjacency must have at least one node")
        if not np.isin(a, (-1, 0, 1)).all():
            raise ValueError("adjacency entries must be in {+1, -1, 0}")
        a = a.astype(np.int8)
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency must be symmetric")
        if self.diagonal_policy not in DIAGONAL_POLICIES:
            raise ValueError(f"diagonal_policy must be one of {DIAGONAL_POLICIES}")
        if self.diagonal_policy == "exclude" and np.any(np.diag(a) != 0):
            raise ValueError("diagonal must be zero under diagonal_policy='exclude'")
        if self.node_ids is not None and len(self.node_ids) != a.shape[0]:
            raise ValueError("node_ids length does not match adjacency")
        self.entries = a

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def include_diagonal(self) -> bool:
        return self.diagonal_policy == "include"

    @property
    def pair_count(self) -> int:
        n = self.n
        return n * (n + 1) // 2 if self.include_diagonal else n * (n - 1) // 2

    @property
    def positive(self) -> np.ndarray:
        return (self.entries == 1).astype(float)

    @property
    def negative(self) -> np.ndarray:
        return (self.entries == -1).astype(float)

    def edge_counts(self) -> tuple[int, int]:
        """Number of positive and negative edges (unordered, self-pairs once)."""
        up = np.triu(self.entries)
        return int((up == 1).sum()), int((up == -1).sum())


@dataclass
class Membership:
    """Community assignment of ``n`` nodes into ``K`` communities.

    Labels are 0-based: ``labels[i]`` in ``range(K)``.
    """

    labels: np.ndarray
    K: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.round(labels)):
                raise ValueError("labels must be integers")
        labels = labels.astype(np.int64)
        if labels.size and (labels.min() < 0 or labels.max() >= self.K):
            raise ValueError(f"labels must lie in [0, {self.K - 1}]")
        self.labels = labels
        self.K = int(self.K)

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.K)

    def indicator(self) -> np.ndarray:
        """The n x K membership matrix Z."""
        z = np.zeros((self.n, self.K))
        z[np.arange(self.n), self.labels] = 1.0
        return z

    def same_block(self) -> np.ndarray:
        """Boolean n x n matrix of co-membership, i.e. ZZ^T."""
        return self.labels[:, None] == self.labels[None, :]


@dataclass
class NodeParams:
    """Per-node log-odds parameters.

    ``gamma_*`` are the cross-community log-odds contributions and
    ``eta_*`` the within-minus-cross gaps, so that ``beta = gamma + eta``.
    """

    gamma_plus: np.ndarray
    eta_plus: np.ndarray
    gamma_minus: np.ndarray
    eta_minus: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(v, dtype=float) for v in self.as_tuple()]
        if any(v.ndim != 1 for v in arrays) or len({v.size for v in arrays}) != 1:
            raise ValueError("all parameter vectors must be 1-d with equal length")
        if not all(np.isfinite(v).all() for v in arrays):
            raise ValueError("parameters must be finite")
        self.gamma_plus, self.eta_plus, self.gamma_minus, self.eta_minus = arrays

    def as_tuple(self):
        return (self.gamma_plus, self.eta_plus, self.gamma_minus, self.eta_minus)

    @property
    def n(self) -> int:
        return self.gamma_plus.size

    @property
    def beta_plus(self) -> np.ndarray:
        return self.gamma_plus + self.eta_plus

    @property
    def beta_minus(self) -> np.ndarray:
        return self.gamma_minus + self.eta_minus

    @classmethod
    def zeros(cls, n: int) -> "NodeParams":
        return cls(*(np.zeros(n) for _ in range(4)))

    @classmethod
    def from_beta_gamma(cls, beta_plus, beta_minus, gamma_plus, gamma_minus) -> "NodeParams":
        bp, bm, gp, gm = (np.asarray(v, dtype=float) for v in (beta_plus, beta_minus, gamma_plus, gamma_minus))
        return cls(gp, bp - gp, gm, bm - gm)

    def to_vector(self) -> np.ndarray:
        return np.concatenate(self.as_tuple())

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "NodeParams":
        x = np.asarray(x, dtype=float)
        if x.size % 4:
            raise ValueError("parameter vector length must be a multiple of 4")
        return cls(*np.split(x.copy(), 4))

    def margins(self) -> tuple[np.ndarray, np.ndarray]:
        """Slack of the two per-node constraints: ``gamma_minus - gamma_plus``
        and ``beta_plus - beta_minus``. Both must be >= epsilon."""
        return self.gamma_minus - self.gamma_plus, self.beta_plus - self.beta_minus

    def is_feasible(self, epsilon: float = 0.0, atol: float = 1e-12) -> bool:
        m1, m2 = self.margins()
        return bool(np.all(m1 >= epsilon - atol) and np.all(m2 >= epsilon - atol))


class ThetaPair(NamedTuple):
    theta_plus: np.ndarray
    theta_minus: np.ndarray


class ProbTriple(NamedTuple):
    p_plus: float
    p_minus: float
    p_zero: float


def _pair_logodds(gamma, eta, same):
    theta = gamma[:, None] + gamma[None, :]
    theta += np.where(same, eta[:, None] + eta[None, :], 0.0)
    return theta


def build_theta(params: NodeParams, membership: Membership) -> ThetaPair:
    """Log-odds matrices ``theta[i, j] = g_i + g_j + (e_i + e_j) * [psi_i == psi_j]``
    for both signs."""
    if params.n != membership.n:
        raise ValueError(f"params have n={params.n} but membership has n={membership.n}")
    same = membership.same_block()
    return ThetaPair(
        _pair_logodds(params.gamma_plus, params.eta_plus, same),
        _pair_logodds(params.gamma_minus, params.eta_minus, same),
    )


def _softmax3(theta_plus, theta_minus):
    m = np.maximum(np.maximum(theta_plus, theta_minus), 0.0)
    e_plus = np.exp(theta_plus - m)
    e_minus = np.exp(theta_minus - m)
    e_zero = np.exp(-m)
    denom = e_plus + e_minus + e_zero
    return e_plus / denom, e_minus / denom, e_zero / denom


def prob_triple(theta_plus: float, theta_minus: float) -> ProbTriple:
    """Probabilities of a +1, -1 and 0 entry given the two log-odds."""
    if not (math.isfinite(theta_plus) and math.isfinite(theta_minus)):
        raise ValueError("log-odds must be finite")
    p, q, r = _softmax3(np.float64(theta_plus), np.float64(theta_minus))
    return ProbTriple(float(p), float(q), float(r))


def prob_matrices(theta: ThetaPair) -> tuple[np.ndarray, np.ndarray]:
    tp, tm = (np.asarray(t, dtype=float) for t in theta)
    if tp.shape != tm.shape:
        raise ValueError("theta matrices differ in shape")
    if not (np.isfinite(tp).all() and np.isfinite(tm).all()):
        raise ValueError("log-odds must be finite")
    p_plus, p_minus, _ = _softmax3(tp, tm)
    return p_plus, p_minus


def population_probabilities(params: NodeParams, membership: Membership):
    """Shorthand for ``prob_matrices(build_theta(params, membership))``."""
    return prob_matrices(build_theta(params, membership))
