"""Replication harness for the simulation tables.

Each table is a grid of scenarios (n by a design parameter). A scenario is
run for ``reps`` replications; replication ``r`` draws its network with a
seed derived from ``(seed, table grid cell, r)``, so results do not depend
on the order or process in which replications run.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from sbbm.evaluation import clustering_error, prob_error, slp_baseline
from sbbm.fitter import FitConfig, fit
from sbbm.generators import Example1Config, gen_example1, gen_example2, gen_example3
from sbbm.model import population_probabilities

# Published means (standard errors) over 50 replications, keyed by
# (n, design parameter) and method/metric.
PUBLISHED_VALUES = {
    1: {
        (500, -3.5): {"SBBM": (0.0910, 0.0122), "SLP": (0.4172, 0.0069), "SPONGE": (0.3950, 0.0106), "JIM": (0.2073, 0.0242)},
        (500, -3.0): {"SBBM": (0.0271, 0.0014), "SLP": (0.2822, 0.0059), "SPONGE": (0.2164, 0.0049), "JIM": (0.1060, 0.0189)},
        (500, -2.5): {"SBBM": (0.0078, 0.0007), "SLP": (0.1715, 0.0050), "SPONGE": (0.1169, 0.0034), "JIM": (0.0361, 0.0106)},
        (1000, -3.5): {"SBBM": (0.0133, 0.0007), "SLP": (0.2016, 0.0029), "SPONGE": (0.1515, 0.0029), "JIM": (0.0723, 0.0162)},
        (1000, -3.0): {"SBBM": (0.0025, 0.0003), "SLP": (0.1070, 0.0023), "SPONGE": (0.0711, 0.0018), "JIM": (0.0230, 0.0058)},
        (1000, -2.5): {"SBBM": (0.0004, 0.0001), "SLP": (0.0440, 0.0012), "SPONGE": (0.0257, 0.0009), "JIM": (0.0161, 0.0100)},
    },
    2: {
        (500, -3.5): {"SBBM_P+": (0.6085, 0.1521), "SBBM_P-": (0.8727, 0.2557), "JIM_P+": (0.5546, 0.0126), "JIM_P-": (0.4829, 0.0106)},
        (500, -3.0): {"SBBM_P+": (0.3136, 0.0014), "SBBM_P-": (0.3964, 0.0017), "JIM_P+": (0.4163, 0.0091), "JIM_P-": (0.3848, 0.0094)},
        (500, -2.5): {"SBBM_P+": (0.2582, 0.0012), "SBBM_P-": (0.3199, 0.0011), "JIM_P+": (0.3187, 0.0067), "JIM_P-": (0.3033, 0.0079)},
        (1000, -3.5): {"SBBM_P+": (0.2789, 0.0008), "SBBM_P-": (0.3527, 0.0010), "JIM_P+": (0.3726, 0.0063), "JIM_P-": (0.3528, 0.0069)},
        (1000, -3.0): {"SBBM_P+": (0.2277, 0.0007), "SBBM_P-": (0.2850, 0.0007), "JIM_P+": (0.2819, 0.0032), "JIM_P-": (0.2805, 0.0067)},
        (1000, -2.5): {"SBBM_P+": (0.1888, 0.0005), "SBBM_P-": (0.2350, 0.0005), "JIM_P+": (0.2170, 0.0048), "JIM_P-": (0.2140, 0.0065)},
    },
    3: {
        (500, 4): {"SBBM": (0.0310, 0.0041), "SLP": (0.3201, 0.0063), "SPONGE": (0.2276, 0.0073)},
        (500, 6): {"SBBM": (0.0425, 0.0036), "SLP": (0.3621, 0.0049), "SPONGE": (0.2692, 0.0050)},
        (500, 8): {"SBBM": (0.0508, 0.0039), "SLP": (0.3800, 0.0056), "SPONGE": (0.2886, 0.0051)},
        (1000, 4): {"SBBM": (0.0091, 0.0006), "SLP": (0.3128, 0.0050), "SPONGE": (0.2141, 0.0060)},
        (1000, 6): {"SBBM": (0.0123, 0.0011), "SLP": (0.3497, 0.0037), "SPONGE": (0.2600, 0.0038)},
        (1000, 8): {"SBBM": (0.0152, 0.0012), "SLP": (0.3632, 0.0031), "SPONGE": (0.2736, 0.0032)},
    },
    4: {
        (500, 4): {"SBBM_P+": (0.2265, 0.0083), "SBBM_P-": (0.1945, 0.0049), "JIM_P+": (1.0216, 0.0093), "JIM_P-": (0.8595, 0.0035)},
        (500, 6): {"SBBM_P+": (0.2841, 0.0119), "SBBM_P-": (0.1826, 0.0038), "JIM_P+": (1.1016, 0.0123), "JIM_P-": (0.8305, 0.0033)},
        (500, 8): {"SBBM_P+": (0.3409, 0.0128), "SBBM_P-": (0.1819, 0.0044), "JIM_P+": (1.1649, 0.0149), "JIM_P-": (0.8164, 0.0033)},
        (1000, 4): {"SBBM_P+": (0.1546, 0.0035), "SBBM_P-": (0.1344, 0.0024), "JIM_P+": (1.0343, 0.0096), "JIM_P-": (0.8587, 0.0026)},
        (1000, 6): {"SBBM_P+": (0.1788, 0.0049), "SBBM_P-": (0.1225, 0.0020), "JIM_P+": (1.1188, 0.0130), "JIM_P-": (0.8290, 0.0025)},
        (1000, 8): {"SBBM_P+": (0.1993, 0.0053), "SBBM_P-": (0.1168, 0.0016), "JIM_P+": (1.1869, 0.0159), "JIM_P-": (0.8151, 0.0024)},
    },
    5: {
        (500, 1): {"SBBM": (0.1858, 0.0063), "SLP": (0.2355, 0.0071), "SPONGE": (0.2603, 0.0229)},
        (500, 2): {"SBBM": (0.1418, 0.0082), "SLP": (0.2802, 0.0073), "SPONGE": (0.1675, 0.0089)},
        (500, 3): {"SBBM": (0.0784, 0.0073), "SLP": (0.2951, 0.0051), "SPONGE": (0.1662, 0.0080)},
        (1000, 1): {"SBBM": (0.0845, 0.0032), "SLP": (0.1855, 0.0074), "SPONGE": (0.0970, 0.0077)},
        (1000, 2): {"SBBM": (0.0465, 0.0015), "SLP": (0.2640, 0.0044), "SPONGE": (0.0882, 0.0049)},
        (1000, 3): {"SBBM": (0.0226, 0.0010), "SLP": (0.2749, 0.0044), "SPONGE": (0.1208, 0.0080)},
    },
    6: {
        (500, 1): {"SBBM_P+": (0.4052, 0.0063), "SBBM_P-": (0.8484, 0.0184), "JIM_P+": (1.6358, 0.0486), "JIM_P-": (3.8576, 0.0938)},
        (500, 2): {"SBBM_P+": (0.3283, 0.0089), "SBBM_P-": (0.4778, 0.0203), "JIM_P+": (1.2363, 0.0253), "JIM_P-": (1.5960, 0.0327)},
        (500, 3): {"SBBM_P+": (0.2717, 0.0092), "SBBM_P-": (0.3165, 0.0103), "JIM_P+": (1.1129, 0.0168), "JIM_P-": (1.1200, 0.0138)},
        (1000, 1): {"SBBM_P+": (0.2725, 0.0026), "SBBM_P-": (0.5233, 0.0055), "JIM_P+": (1.6849, 0.0516), "JIM_P-": (3.7927, 0.0585)},
        (1000, 2): {"SBBM_P+": (0.2084, 0.0021), "SBBM_P-": (0.2893, 0.0035), "JIM_P+": (1.2639, 0.0263), "JIM_P-": (1.5614, 0.0211)},
        (1000, 3): {"SBBM_P+": (0.1751, 0.0021), "SBBM_P-": (0.2085, 0.0024), "JIM_P+": (1.1328, 0.0175), "JIM_P-": (1.1076, 0.0092)},
    },
}

# table -> (example, design parameter name, quantity)
TABLES = {
    1: (1, "mu", "clustering"),
    2: (1, "mu", "probability"),
    3: (2, "K", "clustering"),
    4: (2, "K", "probability"),
    5: (3, "sigma2", "clustering"),
    6: (3, "sigma2", "probability"),
}


@dataclass(frozen=True)
class Scenario:
    example: int
    n: int
    param: float


@dataclass(frozen=True)
class RepResult:
    sbbm_error: float
    slp_error: float
    p_plus_error: float
    p_minus_error: float
    converged: bool


def rep_seed(seed: int, scenario: Scenario, rep: int) -> int:
    """Replication seed, a pure function of its coordinates."""
    key = (scenario.example, scenario.n, int(round(scenario.param * 1000)) & 0xFFFFFFFF, rep)
    return int(np.random.SeedSequence(entropy=int(seed), spawn_key=key).generate_state(1)[0])


def generate(scenario: Scenario, seed: int):
    if scenario.example == 1:
        return gen_example1(Example1Config(n=scenario.n, mu=scenario.param, seed=seed))
    if scenario.example == 2:
        return gen_example2(scenario.n, K=int(scenario.param), seed=seed)
    if scenario.example == 3:
        return gen_example3(scenario.n, var_beta=scenario.param, seed=seed)
    raise ValueError(f"unknown example {scenario.example}")


def run_replication(scenario: Scenario, seed: int, config: FitConfig | None = None) -> RepResult:
    sample = generate(scenario, seed)
    K = sample.membership.K
    base = config or FitConfig()
    cfg = FitConfig(K=K, alpha=base.alpha, t_max=base.t_max, spg=base.spg, epsilon=base.epsilon,
                    seed=seed, diagonal_policy=base.diagonal_policy, n_restarts=base.n_restarts)
    report = fit(sample.adjacency, cfg)
    p_plus, p_minus = population_probabilities(report.params, report.membership)
    slp = slp_baseline(sample.adjacency, K, seed=seed)
    return RepResult(
        sbbm_error=clustering_error(report.membership, sample.membership),
        slp_error=clustering_error(slp, sample.membership),
        p_plus_error=prob_error(p_plus, sample.p_plus),
        p_minus_error=prob_error(p_minus, sample.p_minus),
        converged=report.converged,
    )


def _run_job(job):
    scenario, seed, config = job
    return run_replication(scenario, seed, config)


def run_scenario(scenario: Scenario, reps: int = 10, seed: int = 0, config: FitConfig | None = None,
                 workers: int = 1) -> list[RepResult]:
    jobs = [(scenario, rep_seed(seed, scenario, r), config) for r in range(reps)]
    if workers <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, jobs))


def _mean_se(values):
    v = np.asarray(values, dtype=float)
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else float("nan")
    return float(v.mean()), se


def run_table(table: int, reps: int = 10, seed: int = 0, n_values=None, config: FitConfig | None = None,
              workers: int = 1, progress=None) -> list[dict]:
    """Rerun a table's scenario grid; one output row per (cell, method,
    metric) with the replication mean, its standard error and the
    published value."""
    if table not in TABLES:
        raise ValueError(f"table must be one of {sorted(TABLES)}")
    example, param_name, quantity = TABLES[table]
    cells = PUBLISHED_VALUES[table]
    rows = []
    for (n, param) in cells:
        if n_values is not None and n not in n_values:
            continue
        scenario = Scenario(example, n, float(param))
        results = run_scenario(scenario, reps, seed, config, workers)
        if progress is not None:
            progress(scenario, results)
        published = cells[(n, param)]
        if quantity == "clustering":
            metrics = [("SBBM", "clustering_error", [r.sbbm_error for r in results]),
                       ("SLP", "clustering_error", [r.slp_error for r in results])]
            keys = ["SBBM", "SLP"]
        else:
            metrics = [("SBBM", "prob_error_plus", [r.p_plus_error for r in results]),
                       ("SBBM", "prob_error_minus", [r.p_minus_error for r in results])]
            keys = ["SBBM_P+", "SBBM_P-"]
        for (method, metric, values), key in zip(metrics, keys):
            mean, se = _mean_se(values)
            ref = published.get(key, (float("nan"), float("nan")))
            rows.append({
                "table": table, "example": example, "n": n, param_name: param, "method": method,
                "metric": metric, "mean": mean, "stderr": se, "reps": reps,
                "converged": sum(r.converged for r in results),
                "published_mean": ref[0], "published_stderr": ref[1],
            })
    return rows
