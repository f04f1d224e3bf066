"""Euclidean projection onto the balance-constrained parameter set and the
two-community gauge transform.

Per node the feasible set is the intersection of two half-spaces in
``q = (gamma+, eta+, gamma-, eta-)``::

    n1 . q <= -eps   with n1 = (1, 0, -1, 0)     (gamma+ <= gamma- - eps)
    n2 . q >= +eps   with n2 = (1, 1, -1, -1)    (beta+ >= beta- + eps)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from sbbm.model import Membership, NodeParams

log = logging.getLogger(__name__)

_N1 = np.array([1.0, 0.0, -1.0, 0.0])
_N2 = np.array([1.0, 1.0, -1.0, -1.0])
# Gram matrix of (n1, n2) is [[2, 2], [2, 4]]; its inverse:
_GRAM_INV = np.array([[1.0, -0.5], [-0.5, 0.5]])


@dataclass(frozen=True)
class FeasibleSpec:
    epsilon: float = 1e-6
    gauge_k2: bool = True

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be non-negative")


def _project_rows(q: np.ndarray, epsilon: float) -> np.ndarray:
    """Vectorized exact projection of each row of ``q`` (shape (m, 4))."""
    s1 = q @ _N1 + epsilon  # > 0 means constraint 1 violated
    s2 = epsilon - q @ _N2  # > 0 means constraint 2 violated
    out = q.copy()

    viol1 = s1 > 0
    viol2 = s2 > 0
    todo = viol1 | viol2
    if not todo.any():
        return out

    # single half-space candidates
    c1 = q - np.maximum(s1, 0.0)[:, None] * _N1 / 2.0
    c2 = q + np.maximum(s2, 0.0)[:, None] * _N2 / 4.0
    ok1 = viol1 & (epsilon - c1 @ _N2 <= 0)
    ok2 = viol2 & (c2 @ _N1 + epsilon <= 0)

    # both boundaries active: q - N^T lam with G lam = N q - b
    rhs = np.stack([q @ _N1 + epsilon, q @ _N2 - epsilon], axis=1)
    lam = rhs @ _GRAM_INV.T
    c12 = q - lam[:, :1] * _N1 - lam[:, 1:] * _N2

    d1 = np.where(ok1, ((c1 - q) ** 2).sum(axis=1), np.inf)
    d2 = np.where(ok2, ((c2 - q) ** 2).sum(axis=1), np.inf)
    use1 = todo & ok1 & (d1 <= d2)
    use2 = todo & ok2 & ~use1
    use12 = todo & ~use1 & ~use2
    out[use1] = c1[use1]
    out[use2] = c2[use2]
    out[use12] = c12[use12]
    return out


def project_node(q, epsilon: float = 0.0) -> np.ndarray:
    """Closest point to ``q = (gamma+, eta+, gamma-, eta-)`` satisfying both
    node constraints with margin ``epsilon``."""
    q = np.asarray(q, dtype=float)
    if q.shape != (4,):
        raise ValueError("q must be a 4-vector")
    if not np.isfinite(q).all():
        raise ValueError("q must be finite")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    return _project_rows(q[None, :], epsilon)[0]


def project_vector(x: np.ndarray, epsilon: float) -> np.ndarray:
    """Projection of a flat ``[gamma+, eta+, gamma-, eta-]`` vector."""
    n = x.size // 4
    q = x.reshape(4, n).T
    return _project_rows(q, epsilon).T.reshape(-1)


def project_all(params: NodeParams, spec: FeasibleSpec | None = None) -> NodeParams:
    spec = spec or FeasibleSpec()
    return NodeParams.from_vector(project_vector(params.to_vector(), spec.epsilon))


def gauge_fix_k2(params: NodeParams, membership: Membership) -> NodeParams:
    """Shift ``eta`` and ``gamma`` in opposite directions on the two
    communities so that ``eta+_0 = eta-_0 = 0`` without changing theta.

    Within the community of node 0 eta moves by ``-c`` and gamma by ``+c``;
    in the other community the signs flip. ``c`` is node 0's current eta,
    taken separately for each sign.
    """
    if membership.K != 2:
        raise ValueError(f"gauge fixing is defined for K=2 only, got K={membership.K}")
    if params.n != membership.n:
        raise ValueError("params and membership differ in n")
    in_first = membership.labels == membership.labels[0]
    sign = np.where(in_first, 1.0, -1.0)
    out = []
    for gamma, eta in ((params.gamma_plus, params.eta_plus), (params.gamma_minus, params.eta_minus)):
        c = eta[0]
        new_eta = eta - sign * c
        new_eta[0] = 0.0
        out.extend([gamma + sign * c, new_eta])
    return NodeParams(*out)
