"""Alternating maximum-likelihood fit of the signed block beta-model.

The continuous step minimizes the (convex, for fixed labels) objective with a
spectral projected gradient method; the discrete step reassigns each node to
the community that minimizes the objective given everyone else.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import eigh
from sklearn.cluster import KMeans

from sbbm.likelihood import Objective, pair_losses
from sbbm.model import Membership, NodeParams, SignedAdjacency
from sbbm.projection import gauge_fix_k2, project_vector

log = logging.getLogger(__name__)

# Per-node cost comparisons are on unnormalized pair-loss sums; a move must
# beat the current label by more than this to count.
LABEL_TOL = 1e-10
SPECTRAL_GAP_TOL = 1e-8


@dataclass(frozen=True)
class SPGOptions:
    max_inner_iters: int = 30
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    step_min: float = 1e-10
    step_max: float = 1e10
    inner_tol: float = 1e-8
    memory: int = 10

    def __post_init__(self):
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not 0 < self.step_min <= self.step_max:
            raise ValueError("need 0 < step_min <= step_max")
        if self.max_inner_iters < 1 or self.memory < 1:
            raise ValueError("max_inner_iters and memory must be positive")


@dataclass(frozen=True)
class FitConfig:
    """Settings for :func:`fit`.

    ``alpha`` is the relative change in the objective between outer
    iterations below which the alternating scheme stops; ``t_max`` caps the
    number of outer iterations.
    """

    K: int = 2
    alpha: float = 1e-6
    t_max: int = 100
    spg: SPGOptions = field(default_factory=SPGOptions)
    epsilon: float = 1e-6
    seed: int = 0
    diagonal_policy: Optional[str] = None
    n_restarts: int = 10

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.t_max < 1:
            raise ValueError("t_max must be at least 1")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be non-negative")


@dataclass
class SPGResult:
    x: np.ndarray
    value: float
    iterations: int
    converged: bool


@dataclass
class FitReport:
    params: NodeParams
    membership: Membership
    nll: float
    nll_trace: list
    checkpoints: list
    outer_iters: int
    converged: bool
    seed: int
    inner_iters: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    @property
    def K(self) -> int:
        return self.membership.K

    def canonical_params(self) -> NodeParams:
        """Parameters in the representative with ``eta+_0 = eta-_0 = 0`` when
        K = 2 (same theta); the fitted parameters otherwise."""
        if self.membership.K == 2:
            return gauge_fix_k2(self.params, self.membership)
        return self.params


def _relabel_by_first_appearance(labels: np.ndarray) -> np.ndarray:
    uniq, first = np.unique(labels, return_index=True)
    rank = np.zeros(uniq.max() + 1, dtype=np.int64)
    rank[uniq[np.argsort(first)]] = np.arange(uniq.size)
    return rank[labels]


def _normalized(adjacency: SignedAdjacency):
    a = adjacency.entries.astype(float)
    deg = np.abs(a).sum(axis=1)
    inv_sqrt = np.zeros(adjacency.n)
    np.divide(1.0, np.sqrt(deg), out=inv_sqrt, where=deg > 0)
    return inv_sqrt[:, None] * a * inv_sqrt[None, :]


def _spectrum(adjacency: SignedAdjacency, K: int, method: str):
    n = adjacency.n
    norm = _normalized(adjacency)
    m = min(K + 1, n)
    if method == "signed":
        vals, vecs = eigh(np.eye(n) - norm, subset_by_index=[0, m - 1])
        gap = vals[K] - vals[K - 1] if m > K else np.inf
        return vecs[:, :K], gap
    if method == "unsigned":
        vals, vecs = eigh(np.abs(norm), subset_by_index=[n - m, n - 1])
        gap = vals[-K] - vals[-K - 1] if m > K else np.inf
        return vecs[:, -K:], gap
    raise ValueError(f"unknown spectral method {method!r}")


def spectral_embedding(adjacency: SignedAdjacency, K: int, method: str = "signed") -> np.ndarray:
    """Spectral node coordinates.

    ``"signed"``: eigenvectors of the ``K`` smallest eigenvalues of the
    symmetrically normalized signed Laplacian ``I - Dbar^{-1/2} A Dbar^{-1/2}``
    with ``Dbar = diag(sum_j |a_ij|)``. ``"unsigned"``: the ``K`` leading
    eigenvectors of the normalized unsigned adjacency
    ``Dbar^{-1/2} |A| Dbar^{-1/2}``, which sees communities that show up in
    edge density rather than sign. Isolated nodes get zero rows.
    """
    return _spectrum(adjacency, K, method)[0]


def _kmeans(coords, K, seed, n_restarts):
    km = KMeans(n_clusters=K, n_init=n_restarts, random_state=seed).fit(coords)
    total = float(((coords - coords.mean(axis=0)) ** 2).sum())
    separation = 1.0 - km.inertia_ / total if total > 0 else 0.0
    return km.labels_, separation


def spectral_init(adjacency: SignedAdjacency, K: int, seed: int = 0, n_restarts: int = 10,
                  method: str = "auto") -> Membership:
    """Spectral clustering of the adjacency with k-means on
    :func:`spectral_embedding` coordinates.

    ``method="auto"`` clusters both the signed and the unsigned embedding
    and keeps the partition whose k-means explains the larger share of its
    embedding's variance. The unsigned candidate is skipped when its ``K``-th
    and ``(K+1)``-th eigenvalues coincide, since the embedding is then not
    determined by the graph. Labels are renumbered by first appearance;
    ``K = 1`` or an edgeless graph gives a single community.
    """
    n = adjacency.n
    if K < 1:
        raise ValueError("K must be at least 1")
    if K > n:
        raise ValueError(f"K={K} exceeds the number of nodes n={n}")
    if method not in ("auto", "signed", "unsigned"):
        raise ValueError(f"unknown spectral method {method!r}")
    if K == 1 or not adjacency.entries.any():
        return Membership(np.zeros(n, dtype=np.int64), K)
    if method != "auto":
        labels, _ = _kmeans(spectral_embedding(adjacency, K, method), K, seed, n_restarts)
        return Membership(_relabel_by_first_appearance(labels), K)
    best_labels, best_sep = None, -np.inf
    for m in ("signed", "unsigned"):
        coords, gap = _spectrum(adjacency, K, m)
        if m == "unsigned" and gap <= SPECTRAL_GAP_TOL:
            # degenerate eigenspace: the coordinates are an arbitrary basis
            continue
        labels, sep = _kmeans(coords, K, seed, n_restarts)
        if sep > best_sep:
            best_labels, best_sep = labels, sep
    return Membership(_relabel_by_first_appearance(best_labels), K)


def _spg(objective: Objective, x0: np.ndarray, epsilon: float, opts: SPGOptions) -> SPGResult:
    x = project_vector(x0, epsilon)
    f, g = objective.value_and_grad(x)
    if not math.isfinite(f):
        raise FloatingPointError("non-finite objective at the starting point")
    best_x, best_f = x, f
    history = deque([f], maxlen=opts.memory)
    step = 1.0
    converged = False
    it = 0
    for it in range(1, opts.max_inner_iters + 1):
        if np.max(np.abs(project_vector(x - g, epsilon) - x)) <= opts.inner_tol:
            converged = True
            it -= 1
            break
        d = project_vector(x - step * g, epsilon) - x
        slope = float(g @ d)
        f_ref = max(history)
        t = 1.0
        while True:
            x_new = x + t * d
            f_new, g_new = objective.value_and_grad(x_new)
            if not math.isfinite(f_new):
                raise FloatingPointError(
                    f"non-finite objective after {it} SPG iterations (step {step:.3g}); check data scaling"
                )
            if f_new <= f_ref + opts.armijo_c * t * slope:
                break
            t *= opts.backtrack_factor
            if t * np.max(np.abs(d)) < 1e-300:
                break
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        step = opts.step_max if sy <= 0 else min(max(float(s @ s) / sy, opts.step_min), opts.step_max)
        x, f, g = x_new, f_new, g_new
        history.append(f)
        if f < best_f:
            best_x, best_f = x, f
    return SPGResult(best_x, best_f, it, converged)


def _resolve(adjacency: SignedAdjacency, config: FitConfig) -> SignedAdjacency:
    policy = config.diagonal_policy
    if policy is None or policy == adjacency.diagonal_policy:
        return adjacency
    return SignedAdjacency(adjacency.entries, policy, adjacency.node_ids)


def spg_solve(adjacency: SignedAdjacency, params0: NodeParams, membership: Membership,
              config: FitConfig | None = None) -> NodeParams:
    """Minimize the objective over feasible node parameters with labels held
    fixed. Returns feasible parameters no worse than ``params0``."""
    config = config or FitConfig(K=membership.K)
    adjacency = _resolve(adjacency, config)
    result = _spg(Objective(adjacency, membership), params0.to_vector(), config.epsilon, config.spg)
    return NodeParams.from_vector(result.x)


def label_costs(adjacency: SignedAdjacency, params: NodeParams) -> np.ndarray:
    """Matrix ``D`` with ``D[i, j]`` the change in pair loss when ``(i, j)``
    goes from a cross-community pair to a within-community pair. Diagonal is
    zero since a node always shares its own community."""
    gp, ep, gm, em = params.as_tuple()
    a_plus, a_minus = adjacency.positive, adjacency.negative
    cross_p = gp[:, None] + gp[None, :]
    cross_m = gm[:, None] + gm[None, :]
    same = pair_losses(a_plus, a_minus, cross_p + (ep[:, None] + ep[None, :]), cross_m + (em[:, None] + em[None, :]))
    cross = pair_losses(a_plus, a_minus, cross_p, cross_m)
    d = same - cross
    np.fill_diagonal(d, 0.0)
    return d


def _pick(costs: np.ndarray, current: int) -> int:
    best = int(np.argmin(costs))
    if costs[current] <= costs[best] + LABEL_TOL:
        return current
    return best


def label_update_batch(adjacency: SignedAdjacency, params: NodeParams, membership: Membership,
                       costs: np.ndarray | None = None) -> Membership:
    """Reassign every node to its best community against the previous labels
    of all other nodes, simultaneously."""
    d = label_costs(adjacency, params) if costs is None else costs
    per_label = d @ membership.indicator()
    labels = membership.labels
    new = np.argmin(per_label, axis=1)
    keep = per_label[np.arange(labels.size), labels] <= per_label[np.arange(labels.size), new] + LABEL_TOL
    new = np.where(keep, labels, new)
    return Membership(new, membership.K)


def label_update_sequential(adjacency: SignedAdjacency, params: NodeParams, membership: Membership,
                            costs: np.ndarray | None = None, max_sweeps: int = 100) -> Membership:
    """Sweep nodes in order, moving each to its best community given the
    current labels of all others. Sweeps repeat until a full pass moves no
    node, so the result is stable under any single relabel."""
    d = label_costs(adjacency, params) if costs is None else costs
    labels = membership.labels.copy()
    per_label = d @ membership.indicator()
    for _ in range(max_sweeps):
        moved = False
        for i in range(labels.size):
            cur = labels[i]
            new = _pick(per_label[i], cur)
            if new != cur:
                per_label[:, cur] -= d[:, i]
                per_label[:, new] += d[:, i]
                labels[i] = new
                moved = True
        if not moved:
            break
    else:
        log.warning("sequential label update hit max_sweeps=%d", max_sweeps)
    return Membership(labels, membership.K)


def fit(adjacency: SignedAdjacency, config: FitConfig | None = None,
        init: Membership | None = None) -> FitReport:
    """Alternate continuous SPG solves and label updates until the relative
    change in the objective drops below ``config.alpha`` or ``config.t_max``
    outer iterations have run.

    ``init`` overrides the spectral starting partition.
    """
    config = config or FitConfig()
    adjacency = _resolve(adjacency, config)
    K = config.K
    if init is None:
        membership = spectral_init(adjacency, K, seed=config.seed, n_restarts=config.n_restarts)
    else:
        if init.n != adjacency.n or init.K != K:
            raise ValueError("init membership does not match adjacency size or K")
        membership = init
    objective = Objective(adjacency, membership)
    x = project_vector(np.zeros(4 * adjacency.n), config.epsilon)
    f_prev = objective.value(x)
    trace = [f_prev]
    checkpoints = [f_prev]
    inner = []
    diagnostics = []
    converged = False

    if K == 1:
        res = _spg(objective, x, config.epsilon, config.spg)
        params = NodeParams.from_vector(res.x)
        checkpoints.append(res.value)
        trace.append(res.value)
        return FitReport(params, membership, res.value, trace, checkpoints, 1, res.converged,
                         config.seed, [res.iterations], diagnostics)

    t = 0
    for t in range(1, config.t_max + 1):
        res = _spg(objective, x, config.epsilon, config.spg)
        x = res.x
        inner.append(res.iterations)
        checkpoints.append(res.value)
        params = NodeParams.from_vector(x)

        d = label_costs(adjacency, params)
        candidate = label_update_batch(adjacency, params, membership, costs=d)
        cand_obj = Objective(adjacency, candidate)
        f_new = cand_obj.value(x)
        if not f_new < res.value:
            candidate = label_update_sequential(adjacency, params, membership, costs=d)
            cand_obj = Objective(adjacency, candidate)
            f_new = cand_obj.value(x)
        if np.array_equal(candidate.labels, membership.labels):
            f_new = res.value
        else:
            membership, objective = candidate, cand_obj
            if (sizes := membership.sizes).min() == 0:
                diagnostics.append(f"iteration {t}: community {int(np.argmin(sizes))} is empty")
        checkpoints.append(f_new)
        trace.append(f_new)
        rel = abs(f_new - f_prev) / abs(f_prev) if f_prev != 0 else abs(f_new)
        f_prev = f_new
        if rel < config.alpha:
            converged = True
            break

    params = NodeParams.from_vector(x)
    final = label_update_sequential(adjacency, params, membership)
    if not np.array_equal(final.labels, membership.labels):
        membership = final
        f_prev = Objective(adjacency, membership).value(x)
        checkpoints.append(f_prev)
        trace[-1] = f_prev
        diagnostics.append("final sequential sweep relabeled nodes")
    if not converged:
        diagnostics.append(f"stopped at t_max={config.t_max} without meeting alpha={config.alpha}")
    return FitReport(params, membership, f_prev, trace, checkpoints, t, converged, config.seed, inner, diagnostics)


def bic_value(nll_value: float, n: int, K: int, pair_count: int) -> float:
    """``2 * pairs * L + d_K * log(pairs)`` with ``d_K = 4n - 2 [K = 2]``."""
    dof = 4 * n - (2 if K == 2 else 0)
    return 2.0 * pair_count * nll_value + dof * math.log(pair_count)


@dataclass
class BICEntry:
    K: int
    bic: Optional[float]
    report: Optional[FitReport]
    error: Optional[str] = None


def select_k_bic(adjacency: SignedAdjacency, k_candidates: Sequence[int], config: FitConfig | None = None):
    """Fit each candidate K and return ``(best_K, {K: BICEntry})``.

    Fits that raise are recorded with their error and skipped; ties go to
    the smaller K.
    """
    if not k_candidates:
        raise ValueError("k_candidates must be nonempty")
    config = config or FitConfig()
    adjacency = _resolve(adjacency, config)
    entries = {}
    for K in sorted(set(int(k) for k in k_candidates)):
        try:
            report = fit(adjacency, replace(config, K=K))
        except (ValueError, FloatingPointError) as exc:
            log.warning("fit failed for K=%d: %s", K, exc)
            entries[K] = BICEntry(K, None, None, str(exc))
            continue
        entries[K] = BICEntry(K, bic_value(report.nll, adjacency.n, K, adjacency.pair_count), report)
    ok = [e for e in entries.values() if e.bic is not None]
    if not ok:
        raise RuntimeError("every candidate K failed to fit")
    best = min(ok, key=lambda e: (e.bic, e.K))
    return best.K, entries
