"""Acceptance criteria, one test per criterion.

Each test prints a ``CRITERION k: PASS|FAIL`` line with the measured
values; the lines are repeated in the terminal summary. Criteria 12 (real
data part) and 13 need the public trade and sanctions tables, passed via
``SBBM_TRADE_TABLE`` and ``SBBM_SANCTIONS_TABLE``.

The simulation criteria run 10 replications per scenario and take tens of
minutes on one core; ``SBBM_WORKERS`` sets the number of processes.
"""

import os
from itertools import product

import numpy as np
import pytest
from scipy.optimize import minimize

from sbbm import io
from sbbm.bench import Scenario, run_scenario
from sbbm.evaluation import (check_balance_local, check_balance_population, clustering_error, signed_modularity,
                             slp_baseline, triad_census, triad_census_bruteforce)
from sbbm.fitter import FitConfig, fit, select_k_bic
from sbbm.generators import gen_example2, sample_sbbm
from sbbm.likelihood import Objective, gradient, nll_of_params
from sbbm.model import Membership, NodeParams, SignedAdjacency, build_theta
from sbbm.projection import gauge_fix_k2, project_node

from conftest import random_adjacency, random_membership, random_params
from test_evaluation import local_verdict, random_population
from test_io import TRADE, edge_set, ingest_fixture

RESULTS = {}
REPS = 10
WORKERS = int(os.environ.get("SBBM_WORKERS", os.cpu_count() or 1))


@pytest.fixture
def report(capsys):
    def _report(k, passed, detail):
        line = f"CRITERION {k:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        RESULTS[k] = line
        with capsys.disabled():
            print("\n" + line)
        assert passed, line

    return _report


_runs = {}


def scenario_results(example, n, param):
    key = (example, n, param)
    if key not in _runs:
        _runs[key] = run_scenario(Scenario(example, n, float(param)), reps=REPS, seed=0, workers=WORKERS)
    return _runs[key]


def means(results):
    return {name: float(np.mean([getattr(r, name) for r in results]))
            for name in ("sbbm_error", "slp_error", "p_plus_error", "p_minus_error")}


def test_criterion_01_example1_clustering(report):
    m = means(scenario_results(1, 500, -2.5))
    ok = m["sbbm_error"] <= 0.02 and m["sbbm_error"] < m["slp_error"]
    report(1, ok, f"Example 1 n=500 mu=-2.5: SBBM {m['sbbm_error']:.4f} (<= 0.02), SLP {m['slp_error']:.4f}")


def test_criterion_02_example2_clustering(report):
    m = means(scenario_results(2, 500, 4))
    ok = m["sbbm_error"] <= 0.06 and 0.25 <= m["slp_error"] <= 0.40
    report(2, ok, f"Example 2 n=500 K=4: SBBM {m['sbbm_error']:.4f} (<= 0.06), SLP {m['slp_error']:.4f} (in [0.25, 0.40])")


def test_criterion_03_example2_probabilities(report):
    m = means(scenario_results(2, 500, 4))
    ok = m["p_plus_error"] <= 0.35 and m["p_minus_error"] <= 0.30
    report(3, ok, f"Example 2 n=500 K=4: Err(P+) {m['p_plus_error']:.4f} (<= 0.35), "
                  f"Err(P-) {m['p_minus_error']:.4f} (<= 0.30)")


def test_criterion_04_consistency_trend(report):
    rows = [means(scenario_results(2, n, 4)) for n in (200, 400, 800)]
    ok = all(all(b[k] < a[k] for a, b in zip(rows, rows[1:])) for k in ("sbbm_error", "p_plus_error", "p_minus_error"))
    detail = "; ".join(f"n={n}: err {r['sbbm_error']:.4f} P+ {r['p_plus_error']:.4f} P- {r['p_minus_error']:.4f}"
                       for n, r in zip((200, 400, 800), rows))
    report(4, ok, detail)


def test_criterion_05_gradient(report):
    rng = np.random.default_rng(5)
    worst = 0.0
    h = 1e-5
    for k in range(100):
        K = (1, 2, 3)[k % 3]
        policy = ("exclude", "include")[(k // 3) % 2]
        adj = random_adjacency(rng, 10, density=0.6, diagonal_policy=policy)
        membership = random_membership(rng, 10, K)
        x = random_params(rng, 10).to_vector()
        f = lambda v: nll_of_params(adj, NodeParams.from_vector(v), membership).value
        fd = np.array([(f(x + h * e) - f(x - h * e)) / (2 * h) for e in np.eye(x.size)])
        dense = gradient(adj, NodeParams.from_vector(x), membership).to_vector()
        compiled = Objective(adj, membership).value_and_grad(x)[1]
        for g in (dense, compiled):
            worst = max(worst, np.linalg.norm(g - fd) / np.linalg.norm(fd))
    report(5, worst <= 1e-5, f"max relative error vs central differences over 100 instances: {worst:.2e} (<= 1e-5)")


def test_criterion_06_checkpoint_monotonicity(report):
    rng = np.random.default_rng(6)
    worst = -np.inf
    for k in range(50):
        if k % 2:
            n, K = int(rng.integers(10, 40)), int(rng.integers(2, 5))
            adj = random_adjacency(rng, n, density=float(rng.uniform(0.2, 0.8)))
        else:
            n, K = int(rng.integers(40, 120)), int(rng.integers(2, 5))
            adj = gen_example2(n, K, seed=k).adjacency
        rep = fit(adj, FitConfig(K=K, seed=k))
        worst = max(worst, float(np.max(np.diff(rep.checkpoints))))
    report(6, worst <= 1e-10, f"largest checkpoint increase over 50 fits: {worst:.3e} (<= 1e-10)")


def test_criterion_07_gauge(report):
    rng = np.random.default_rng(7)
    worst, zeroed = 0.0, True
    for _ in range(100):
        n = int(rng.integers(2, 30))
        membership = random_membership(rng, n, 2)
        params = random_params(rng, n, scale=2.0)
        fixed = gauge_fix_k2(params, membership)
        for a, b in zip(build_theta(params, membership), build_theta(fixed, membership)):
            worst = max(worst, float(np.max(np.abs(a - b))))
        zeroed &= fixed.eta_plus[0] == 0.0 and fixed.eta_minus[0] == 0.0
    report(7, worst <= 1e-12 and zeroed, f"max theta change {worst:.2e} (<= 1e-12); eta_0 exactly zero: {zeroed}")


def test_criterion_08_projection(report):
    rng = np.random.default_rng(8)
    cons = np.array([[-1.0, 0.0, 1.0, 0.0], [1.0, 1.0, -1.0, -1.0]])
    worst = idem = 0.0
    doubles = 0
    for k in range(1000):
        eps = (0.0, 1e-6, 0.3)[k % 3]
        q = rng.normal(scale=3.0, size=4)
        doubles += bool(np.all(cons @ q < eps))
        res = minimize(lambda x: 0.5 * np.sum((x - q) ** 2), np.zeros(4), jac=lambda x: x - q, method="SLSQP",
                       constraints=[{"type": "ineq", "fun": lambda x: cons @ x - eps, "jac": lambda x: cons}],
                       options={"ftol": 1e-16, "maxiter": 500})
        p = project_node(q, eps)
        worst = max(worst, float(np.max(np.abs(p - res.x))))
        idem = max(idem, float(np.max(np.abs(project_node(p, eps) - p))))
    ok = worst <= 1e-8 and idem <= 1e-12 and doubles > 0
    report(8, ok, f"max deviation from QP oracle {worst:.2e} (<= 1e-8), idempotence {idem:.2e} (<= 1e-12), "
                  f"{doubles} double-violation points")


def test_criterion_09_balance_equivalence(report):
    rng = np.random.default_rng(9)
    agree = 0
    verdicts = {"strong": 0, "weak": 0, "unbalanced": 0}
    for _ in range(1000):
        n = int(rng.integers(3, 8))
        p_plus, p_minus, diff = random_population(rng, n)
        v = check_balance_population(p_plus, p_minus).verdict
        strong, weak = check_balance_local(p_plus, p_minus)
        verdicts[v] += 1
        agree += v == local_verdict(diff) and strong == (v == "strong") and weak == (v != "unbalanced")
    report(9, agree == 1000 and all(verdicts.values()), f"{agree}/1000 agree; verdict counts {verdicts}")


def test_criterion_10_label_optimality(report):
    rng = np.random.default_rng(10)
    optimal = stable = 0
    total = 200
    for k in range(total):
        n = int(rng.integers(4, 9))
        labels = rng.integers(0, 2, size=n)
        labels[:2] = (0, 1)
        bm, gm, d = rng.normal(-0.5, 1.0, n), rng.normal(-0.5, 1.0, n), rng.uniform(0.0, 2.0, n)
        params = NodeParams.from_beta_gamma(bm + d, bm, gm - d, gm)
        adj = sample_sbbm(params, Membership(labels, 2), seed=k).adjacency
        rep = fit(adj, FitConfig(K=2, seed=k))
        values = {z: nll_of_params(adj, rep.params, Membership(np.array(z), 2)).value
                  for z in product(range(2), repeat=n)}
        mine = values[tuple(rep.membership.labels)]
        optimal += mine <= min(values.values()) + 1e-10
        flips = (tuple(np.where(np.arange(n) == i, 1 - rep.membership.labels, rep.membership.labels))
                 for i in range(n))
        stable += all(values[z] >= mine - 1e-12 for z in flips)
    ok = optimal >= 0.95 * total and stable == total
    report(10, ok, f"global optimum in {optimal}/{total} (>= 95%), 1-swap stable in {stable}/{total}")


def test_criterion_11_metric_oracles(report):
    ce = clustering_error(np.array([1, 1, 2, 2]), np.array([1, 2, 1, 2]))
    a = np.zeros((4, 4), dtype=int)
    for i, j, s in [(0, 1, 1), (2, 3, 1), (0, 2, -1), (1, 3, -1)]:
        a[i, j] = a[j, i] = s
    q = signed_modularity(SignedAdjacency(a), np.array([0, 0, 1, 1]))
    rng = np.random.default_rng(11)
    census_ok = all(triad_census(adj) == triad_census_bruteforce(adj)
                    for adj in (random_adjacency(rng, n, density=0.6) for n in range(3, 31)))
    ok = ce == 2 / 3 and q == 1.0 and census_ok
    report(11, ok, f"clustering error {ce!r} (2/3), Q_signed {q!r} (1.0), census equals brute force n=3..30: {census_ok}")


REAL = (os.environ.get("SBBM_TRADE_TABLE"), os.environ.get("SBBM_SANCTIONS_TABLE"))


def real_network():
    return io.build_real_network(io.IngestSpec(REAL[0], REAL[1]))


def test_criterion_12_ingestion(report, tmp_path):
    result = io.build_real_network(ingest_fixture(tmp_path, [("B", "A", 2014, 2017)]))
    fixture_ok = edge_set(result.adjacency) == {("A", "B", -1), ("C", "D", 1)}
    detail = f"fixture edges {sorted(edge_set(result.adjacency))}"
    if not all(REAL):
        report(12, fixture_ok, f"{detail}; real tables not provided, that part skipped")
        return
    counts = real_network().counts
    targets = {"nodes": 164, "positive_edges": 580, "negative_edges": 589}
    real_ok = all(abs(counts[k] - v) <= 0.05 * v for k, v in targets.items())
    report(12, fixture_ok and real_ok, f"{detail}; real network {counts} vs 164/580/589 within 5%")


@pytest.mark.skipif(not all(REAL), reason="real trade and sanctions tables not provided")
def test_criterion_13_real_modularity(report):
    adj = real_network().adjacency
    K, entries = select_k_bic(adj, range(2, 9), FitConfig(K=2))
    q_sbbm = signed_modularity(adj, entries[K].report.membership.labels)
    q_slp = signed_modularity(adj, slp_baseline(adj, K).labels)
    report(13, q_sbbm > q_slp, f"K={K} by BIC: Q_signed SBBM {q_sbbm:.4f} vs SLP {q_slp:.4f}")


def test_criterion_13_placeholder():
    if not all(REAL):
        RESULTS[13] = "CRITERION 13: SKIP  real trade and sanctions tables not provided"
