"""Normalized negative log-likelihood of the signed block beta-model and its
gradient with respect to the node parameters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sbbm import _kernels
from sbbm.model import Membership, NodeParams, SignedAdjacency, ThetaPair, build_theta

# exp() overflows just above 709; below this the direct form is exact enough.
_DIRECT_LIMIT = 700.0


@dataclass(frozen=True)
class NllValue:
    value: float
    pair_count: int

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class Gradient:
    gamma_plus: np.ndarray
    eta_plus: np.ndarray
    gamma_minus: np.ndarray
    eta_minus: np.ndarray

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.gamma_plus, self.eta_plus, self.gamma_minus, self.eta_minus])


def log_partition(theta_plus, theta_minus, with_probs=False):
    """Elementwise ``log(1 + exp(tp) + exp(tm))``, optionally with the
    probabilities of the +1 and -1 outcomes."""
    top = max(float(np.max(theta_plus, initial=-np.inf)), float(np.max(theta_minus, initial=-np.inf)))
    if top <= _DIRECT_LIMIT:
        e_plus = np.exp(theta_plus)
        e_minus = np.exp(theta_minus)
        s = e_plus + e_minus
        lse = np.log1p(s)
        if not with_probs:
            return lse
        s += 1.0
        return lse, e_plus / s, e_minus / s
    m = np.maximum(np.maximum(theta_plus, theta_minus), 0.0)
    e_plus = np.exp(theta_plus - m)
    e_minus = np.exp(theta_minus - m)
    s = e_plus + e_minus + np.exp(-m)
    lse = m + np.log(s)
    if not with_probs:
        return lse
    return lse, e_plus / s, e_minus / s


def pair_sum(mat: np.ndarray, include_diagonal: bool) -> float:
    """Sum of a symmetric matrix over unordered pairs ``i < j`` plus, when
    requested, the diagonal."""
    tr = float(np.trace(mat))
    total = (float(mat.sum()) - tr) / 2.0
    return total + tr if include_diagonal else total


def pair_normalizer(n: int, include_diagonal: bool) -> int:
    return n * (n + 1) // 2 if include_diagonal else n * (n - 1) // 2


def pair_losses(a_plus, a_minus, theta_plus, theta_minus):
    """Per-pair negative log-likelihood ``-a+ t+ - a- t- + log(1 + e^t+ + e^t-)``."""
    return log_partition(theta_plus, theta_minus) - a_plus * theta_plus - a_minus * theta_minus


def _check_theta(adjacency, theta):
    tp, tm = theta
    if tp.shape != (adjacency.n, adjacency.n) or tm.shape != tp.shape:
        raise ValueError("theta shape does not match adjacency")
    if not (np.isfinite(tp).all() and np.isfinite(tm).all()):
        raise ValueError("theta must be finite")


def nll(adjacency: SignedAdjacency, theta: ThetaPair) -> NllValue:
    """Average negative log-likelihood over the pairs selected by the
    adjacency's diagonal policy."""
    _check_theta(adjacency, theta)
    count = adjacency.pair_count
    if count == 0:
        raise ValueError("no pairs to sum over")
    losses = pair_losses(adjacency.positive, adjacency.negative, *theta)
    return NllValue(pair_sum(losses, adjacency.include_diagonal) / count, count)


def nll_of_params(adjacency: SignedAdjacency, params: NodeParams, membership: Membership) -> NllValue:
    return nll(adjacency, build_theta(params, membership))


class Objective:
    """Objective and gradient for a fixed adjacency and membership, evaluated
    on the flat parameter vector ``[gamma+, eta+, gamma-, eta-]``.

    Backed by a compiled single pass over pairs; :func:`nll` and
    :func:`gradient` are the dense numpy counterparts.
    """

    def __init__(self, adjacency: SignedAdjacency, membership: Membership):
        if adjacency.n != membership.n:
            raise ValueError(f"adjacency has n={adjacency.n} but membership has n={membership.n}")
        self.n = adjacency.n
        self.include_diagonal = adjacency.include_diagonal
        self.count = adjacency.pair_count
        if self.count == 0:
            raise ValueError("no pairs to sum over")
        self.scale = 1.0 / self.count
        self.entries = np.ascontiguousarray(adjacency.entries)
        self.labels = np.ascontiguousarray(membership.labels)
        self._grad = np.empty(4 * self.n)

    def _split(self, x):
        n = self.n
        x = np.ascontiguousarray(x, dtype=float)
        return x[:n], x[n:2 * n], x[2 * n:3 * n], x[3 * n:]

    def value(self, x) -> float:
        total = _kernels.value_only(*self._split(x), self.labels, self.entries, self.include_diagonal)
        return total * self.scale

    def value_and_grad(self, x):
        total = _kernels.value_grad(*self._split(x), self.labels, self.entries, self.include_diagonal, self._grad)
        return total * self.scale, self._grad * self.scale


def _dense_value_and_grad(adjacency, params, membership):
    tp, tm = build_theta(params, membership)
    lse, p_plus, p_minus = log_partition(tp, tm, with_probs=True)
    a_plus, a_minus = adjacency.positive, adjacency.negative
    value = pair_sum(lse - a_plus * tp - a_minus * tm, adjacency.include_diagonal) / adjacency.pair_count
    same = membership.same_block()
    diag_weight = 2.0 if adjacency.include_diagonal else 0.0

    def row_score(r):
        # off-diagonal pairs count once per endpoint; a self-pair carries 2x
        d = np.diagonal(r)
        return (r.sum(axis=1) - d + diag_weight * d) / adjacency.pair_count

    r_plus = p_plus - a_plus
    r_minus = p_minus - a_minus
    grads = [row_score(r_plus), row_score(np.where(same, r_plus, 0.0)),
             row_score(r_minus), row_score(np.where(same, r_minus, 0.0))]
    return value, grads


def gradient(adjacency: SignedAdjacency, params: NodeParams, membership: Membership) -> Gradient:
    if params.n != adjacency.n:
        raise ValueError(f"params have n={params.n} but adjacency has n={adjacency.n}")
    if params.n != membership.n:
        raise ValueError(f"params have n={params.n} but membership has n={membership.n}")
    _, grads = _dense_value_and_grad(adjacency, params, membership)
    return Gradient(*grads)
