"""Plug-in estimators of optimal transport maps."""

import json

from ._otmap import (
    OtmapError,
    bandwidth,
    barycentric_projection,
    gaussian_copula_sample,
    indep_test,
    kernel,
    kernel_moments,
    plugin_barycenter,
    solve_ot,
    stability_sweep,
    w2_squared,
)
from . import _otmap

__all__ = [
    "OtmapError",
    "Problem",
    "bandwidth",
    "barycentric_projection",
    "gaussian_copula_sample",
    "indep_test",
    "kernel",
    "kernel_moments",
    "plugin_barycenter",
    "rate_experiment",
    "run_estimator",
    "solve_ot",
    "stability_sweep",
    "w2_squared",
]


class Problem(_otmap._Problem):
    """Synthetic transport problem built from the same JSON description the CLI reads."""

    def __init__(self, spec):
        super().__init__(spec if isinstance(spec, str) else json.dumps(spec))


def run_estimator(problem, m, n, seed, estimator=None):
    return _otmap._run_estimator(problem, json.dumps(estimator or {}), m, n, seed)


def rate_experiment(problem, n_grid, reps=20, seed=1, estimator=None, threads=0):
    """Summary of a Monte-Carlo rate experiment as a dict."""
    return _otmap._run_rates(problem, json.dumps(estimator or {}), list(n_grid), reps, seed, threads)
