"""Signed block beta-model: joint community detection and node heterogeneity
estimation for signed networks."""

from sbbm.model import (
    Membership,
    NodeParams,
    ProbTriple,
    SignedAdjacency,
    ThetaPair,
    build_theta,
    prob_matrices,
    prob_triple,
)
from sbbm.likelihood import Gradient, NllValue, gradient, nll, nll_of_params
from sbbm.projection import FeasibleSpec, gauge_fix_k2, project_all, project_node
from sbbm.fitter import (
    FitConfig,
    FitReport,
    SPGOptions,
    fit,
    label_update_batch,
    label_update_sequential,
    select_k_bic,
    spectral_init,
    spg_solve,
)
from sbbm.evaluation import (
    BalanceVerdict,
    TriadCensus,
    check_balance_population,
    clustering_error,
    membership_error,
    prob_error,
    signed_modularity,
    slp_baseline,
    triad_census,
)

__version__ = "0.1.0"

__all__ = [
    "BalanceVerdict",
    "FeasibleSpec",
    "FitConfig",
    "FitReport",
    "Gradient",
    "Membership",
    "NllValue",
    "NodeParams",
    "ProbTriple",
    "SPGOptions",
    "SignedAdjacency",
    "ThetaPair",
    "TriadCensus",
    "build_theta",
    "check_balance_population",
    "clustering_error",
    "fit",
    "gauge_fix_k2",
    "gradient",
    "label_update_batch",
    "label_update_sequential",
    "membership_error",
    "nll",
    "nll_of_params",
    "prob_error",
    "prob_matrices",
    "prob_triple",
    "project_all",
    "project_node",
    "select_k_bic",
    "signed_modularity",
    "slp_baseline",
    "spectral_init",
    "spg_solve",
    "triad_census",
]
