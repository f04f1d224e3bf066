"""Partition and probability error metrics, signed modularity, triad census
and population-level balance checks."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from sbbm.model import Membership, SignedAdjacency


def _labels(x):
    if isinstance(x, Membership):
        return x.labels
    return np.asarray(x)


def clustering_error(psi_hat, psi_star) -> float:
    """Fraction of node pairs on which two partitions disagree about whether
    the pair shares a community."""
    a, b = _labels(psi_hat), _labels(psi_star)
    if a.shape != b.shape:
        raise ValueError("label vectors differ in length")
    n = a.size
    if n < 2:
        raise ValueError("need at least two nodes")
    same_a = a[:, None] == a[None, :]
    same_b = b[:, None] == b[None, :]
    disagree = np.triu(same_a != same_b, k=1).sum()
    return float(2.0 * disagree / (n * (n - 1)))


def membership_error(z_hat, z_star) -> float:
    """``min_Pi ||Z_hat Pi - Z_star||_F^2 / n`` over K x K permutations.

    Accepts indicator matrices or label vectors (with ``K`` taken as the
    larger label count). Solved as a linear assignment on the overlap
    matrix, since ``||Z_hat Pi - Z*||^2 = 2n - 2 tr(Pi^T Z_hat^T Z*)``.
    """
    zh, zs = np.asarray(z_hat), np.asarray(z_star)
    if zh.ndim == 1 or zs.ndim == 1:
        if zh.ndim != 1 or zs.ndim != 1:
            raise ValueError("pass two label vectors or two indicator matrices")
        if zh.size != zs.size:
            raise ValueError("label vectors differ in length")
        K = int(max(zh.max(), zs.max())) + 1
        zh = np.eye(K)[zh]
        zs = np.eye(K)[zs]
    if zh.shape != zs.shape:
        raise ValueError(f"membership matrices differ in shape: {zh.shape} vs {zs.shape}")
    n = zh.shape[0]
    overlap = zh.T @ zs
    rows, cols = linear_sum_assignment(overlap, maximize=True)
    matched = overlap[rows, cols].sum()
    return float(zh.sum() + zs.sum() - 2.0 * matched) / n


def prob_error(p_hat, p_star) -> float:
    """Relative squared Frobenius error ``||P_hat - P*||^2 / ||P*||^2``."""
    p_hat, p_star = np.asarray(p_hat, dtype=float), np.asarray(p_star, dtype=float)
    if p_hat.shape != p_star.shape:
        raise ValueError("probability matrices differ in shape")
    denom = float((p_star ** 2).sum())
    if denom == 0:
        raise ValueError("truth matrix has zero norm")
    return float(((p_hat - p_star) ** 2).sum()) / denom


def signed_modularity(adjacency: SignedAdjacency, psi) -> float:
    """Positive-subgraph modularity minus negative-subgraph modularity.

    A sign class with no edges contributes 0.
    """
    labels = _labels(psi)
    if labels.size != adjacency.n:
        raise ValueError("labels do not match adjacency size")
    same = (labels[:, None] == labels[None, :]).astype(float)
    q = 0.0
    a_plus, a_minus = adjacency.positive, adjacency.negative
    if not (a_plus.any() or a_minus.any()):
        raise ValueError("signed modularity needs at least one edge")
    for a, sign in ((a_plus, 1.0), (a_minus, -1.0)):
        k = a.sum(axis=1)
        two_m = k.sum()
        if two_m == 0:
            continue
        q += sign * float(((a - np.outer(k, k) / two_m) * same).sum()) / float(two_m)
    return float(q)


@dataclass(frozen=True)
class TriadCensus:
    """Counts of fully connected triples by number of positive edges."""

    type_a: int = 0  # +++
    type_b: int = 0  # ++-
    type_c: int = 0  # +--
    type_d: int = 0  # ---

    @property
    def strong_balanced(self) -> int:
        return self.type_a + self.type_c

    @property
    def weak_only(self) -> int:
        return self.type_d

    @property
    def unbalanced(self) -> int:
        return self.type_b

    @property
    def total(self) -> int:
        return self.type_a + self.type_b + self.type_c + self.type_d

    def as_dict(self) -> dict:
        return {
            "type_A": self.type_a,
            "type_B": self.type_b,
            "type_C": self.type_c,
            "type_D": self.type_d,
            "strong_balanced": self.strong_balanced,
            "weak_only": self.weak_only,
            "unbalanced": self.unbalanced,
            "total": self.total,
        }


def _census_from_positive_counts(counts) -> TriadCensus:
    c = np.bincount(np.asarray(counts, dtype=np.int64), minlength=4)
    return TriadCensus(type_a=int(c[3]), type_b=int(c[2]), type_c=int(c[1]), type_d=int(c[0]))


def triad_census(adjacency: SignedAdjacency) -> TriadCensus:
    """Census of closed triangles via neighbor-set intersection.

    Each triangle ``i < j < k`` is found once from its lowest edge.
    """
    a = adjacency.entries
    n = adjacency.n
    higher = [set(int(j) for j in np.flatnonzero(a[i]) if j > i) for i in range(n)]
    counts = [0, 0, 0, 0]
    for i in range(n):
        for j in higher[i]:
            common = higher[i] & higher[j]
            if not common:
                continue
            pos_ij = a[i, j] > 0
            for k in common:
                counts[int(pos_ij) + int(a[i, k] > 0) + int(a[j, k] > 0)] += 1
    return TriadCensus(type_a=counts[3], type_b=counts[2], type_c=counts[1], type_d=counts[0])


def triad_census_bruteforce(adjacency: SignedAdjacency) -> TriadCensus:
    a = adjacency.entries
    pos = []
    for i, j, k in combinations(range(adjacency.n), 3):
        if a[i, j] and a[j, k] and a[i, k]:
            pos.append(int(a[i, j] > 0) + int(a[j, k] > 0) + int(a[i, k] > 0))
    return _census_from_positive_counts(pos)


@dataclass(frozen=True)
class BalanceVerdict:
    """Outcome of a population balance check.

    ``verdict`` is ``"strong"`` (at most two blocks), ``"weak"`` (three or
    more blocks) or ``"unbalanced"``. ``partition`` holds block labels when
    balanced; ``witness`` a violating triple or a tied pair otherwise.
    """

    verdict: str
    partition: Optional[np.ndarray] = None
    witness: Optional[tuple] = None

    @property
    def n_blocks(self) -> int:
        return 0 if self.partition is None else int(self.partition.max()) + 1


def check_balance_population(p_plus, p_minus, tol: float = 1e-12) -> BalanceVerdict:
    """Decide strong/weak balance from population sign probabilities.

    Nodes ``i != j`` are related when ``p+_ij - p-_ij > tol``. The network is
    balanced iff every connected component of that relation is a clique
    (so the relation is an equivalence with blocks as communities) and no
    off-diagonal pair is tied within ``tol``.
    """
    p_plus, p_minus = np.asarray(p_plus, dtype=float), np.asarray(p_minus, dtype=float)
    if p_plus.shape != p_minus.shape or p_plus.ndim != 2 or p_plus.shape[0] != p_plus.shape[1]:
        raise ValueError("probability matrices must be square and equally shaped")
    if not (np.array_equal(p_plus, p_plus.T) and np.array_equal(p_minus, p_minus.T)):
        raise ValueError("probability matrices must be symmetric")
    n = p_plus.shape[0]
    diff = p_plus - p_minus
    off = ~np.eye(n, dtype=bool)
    ties = np.argwhere(np.triu(off & (np.abs(diff) <= tol)))
    if ties.size:
        i, j = ties[0]
        return BalanceVerdict("unbalanced", witness=(int(i), int(j)))

    related = (diff > tol) & off
    labels = -np.ones(n, dtype=np.int64)
    block = 0
    for start in range(n):
        if labels[start] >= 0:
            continue
        stack = [start]
        labels[start] = block
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(related[u] & (labels < 0)):
                labels[v] = block
                stack.append(v)
        block += 1

    # a component that is not a clique contains an induced path j - k - l
    for k in range(n):
        nb = np.flatnonzero(related[k])
        if nb.size < 2:
            continue
        sub = related[np.ix_(nb, nb)] | np.eye(nb.size, dtype=bool)
        bad = np.argwhere(~sub)
        if bad.size:
            j, l = nb[bad[0][0]], nb[bad[0][1]]
            return BalanceVerdict("unbalanced", witness=tuple(sorted((int(j), int(k), int(l)))))

    verdict = "strong" if block <= 2 else "weak"
    return BalanceVerdict(verdict, partition=labels)


def check_balance_local(p_plus, p_minus):
    """Triple-wise balance conditions.

    Returns ``(strong, weak)``: ``strong`` holds when every triple has a
    positive product of sign gaps; ``weak`` additionally admits triples whose
    three gaps are all negative.
    """
    sign = np.sign(np.asarray(p_plus, dtype=float) - np.asarray(p_minus, dtype=float))
    strong = weak = True
    for i, j, k in combinations(range(sign.shape[0]), 3):
        a, b, c = sign[i, j], sign[j, k], sign[k, i]
        if a * b * c > 0:
            continue
        strong = False
        if not (a < 0 and b < 0 and c < 0):
            return False, False
    return strong, weak


def slp_baseline(adjacency: SignedAdjacency, K: int, seed: int = 0, n_restarts: int = 10) -> Membership:
    """Signed-Laplacian spectral clustering baseline."""
    from sbbm.fitter import spectral_init

    return spectral_init(adjacency, K, seed=seed, n_restarts=n_restarts, method="signed")
