"""
Sous-package evt : loi de Pareto généralisée et détecteur peaks-over-threshold.
"""
from .gpd import (
    GpdParams,
    LemmaCheck,
    gpd_cdf,
    gpd_ppf,
    gpd_sample,
    gpd_fit_moments,
    gpd_fit_lme,
    gpd_fit,
    lemma_moment_check,
)
from .pot import Verdict, PotState, pot_quantile, pot_init, pot_step

__all__ = [
    "GpdParams",
    "LemmaCheck",
    "gpd_cdf",
    "gpd_ppf",
    "gpd_sample",
    "gpd_fit_moments",
    "gpd_fit_lme",
    "gpd_fit",
    "lemma_moment_check",
    "Verdict",
    "PotState",
    "pot_quantile",
    "pot_init",
    "pot_step",
]
