"""Distances and diagnostics between sets of paths.

Weak metrics (sliced Wasserstein, Gaussian and signature MMD) compare paths
as unordered point clouds.  Adapted metrics (causal/bicausal Wasserstein,
nested distance on quantized trees, sliced adapted Wasserstein) respect the
flow of information in time.  Stylized statistics summarize return series.
"""

from .adapted import AdaptedTree, adapted_empirical, aw1_nested, kmeans_1step, sliced_aw1
from .discrete import (
    DiscreteMeasure,
    cw1_aw1_bruteforce,
    discrete_ot,
    kl_divergence,
    lemma_chain_check,
    total_variation,
)
from .mmd import gaussian_mmd, median_bandwidth, signature_mmd
from .report import MetricReport
from .signatures import signature, signature_dim, signatures
from .stylized import StylizedReport, autocorrelation, hill_estimator, stylized_stats
from .wasserstein import sliced_w1, w1_1d

__all__ = [
    "AdaptedTree",
    "DiscreteMeasure",
    "MetricReport",
    "StylizedReport",
    "adapted_empirical",
    "autocorrelation",
    "aw1_nested",
    "cw1_aw1_bruteforce",
    "discrete_ot",
    "gaussian_mmd",
    "hill_estimator",
    "kl_divergence",
    "kmeans_1step",
    "lemma_chain_check",
    "median_bandwidth",
    "signature",
    "signature_dim",
    "signature_mmd",
    "signatures",
    "sliced_aw1",
    "sliced_w1",
    "stylized_stats",
    "total_variation",
    "w1_1d",
]
