"""
One-call estimation: fitted propensity model in, estimate with interval out.
"""
import typing
from dataclasses import dataclass

import numpy as np

from . import settings
from .estimator import MatchSummary, check_m, match_summary
from .models import AteEstimate, Dataset, PropensityFit, TuningRule, VarianceComponents
from .propensity import LOGISTIC, LinkFunction, discretize, propensity_scores
from .variance import confidence_interval, variance_components

THETA_SOURCES = ("mle", "discretized", "true")


def select_theta(fit: PropensityFit, theta_source: str = "mle", d: typing.Optional[float] = None,
                 theta_star=None) -> np.ndarray:
    """
    The parameter the point estimate matches on: the raw MLE, its lattice
    discretization with spacing d, or a known true value.
    """
    if theta_source == "mle":
        return fit.theta_hat
    if theta_source == "discretized":
        if d is None and (d := settings.DISCRETIZE_D) is None:
            raise ValueError("theta_source 'discretized' requires a lattice spacing d")
        return discretize(fit.theta_hat, d, fit.n)
    if theta_source == "true":
        if theta_star is None:
            raise ValueError("theta_source 'true' requires the true parameter")
        return np.asarray(theta_star, dtype=float)
    raise ValueError(f"unknown theta_source: {theta_source}")


@dataclass(frozen=True)
class EstimateResult:
    estimate: AteEstimate
    components: VarianceComponents
    summary: MatchSummary
    tuning: TuningRule
    theta: np.ndarray
    unadjusted_ci: tuple[float, float]


def estimate_ate(ds: Dataset, fit: PropensityFit, tuning: TuningRule = TuningRule(),
                 theta_source: str = "mle", d: typing.Optional[float] = None, theta_star=None,
                 link: LinkFunction = LOGISTIC) -> EstimateResult:
    """
    Point estimate, adjusted variance and a confidence interval at tuning.alpha.

    An explicit tuning.m larger than the smaller arm is refused, never clamped.
    With theta_source 'true' the interval uses the unadjusted variance, since
    the score was not estimated.
    """
    if tuning.m is not None:
        check_m(ds, tuning.m)
    tuning = tuning.resolve(ds.n, ds.n0, ds.n1)

    theta = select_theta(fit, theta_source, d, theta_star)
    summary = match_summary(ds, propensity_scores(ds, theta, link), tuning.m)
    components = variance_components(ds, fit.theta_hat, tuning, summary, link=link)

    variance = components.sigma2_hat if theta_source == "true" else components.adjusted
    low, high = confidence_interval(summary.tau_hat, variance, ds.n, tuning.alpha)
    unadjusted = confidence_interval(summary.tau_hat, components.sigma2_hat, ds.n, tuning.alpha)

    estimate = AteEstimate(tau_hat=summary.tau_hat, m=tuning.m, variance=variance, ci_low=low, ci_high=high,
                           n=ds.n, alpha=tuning.alpha)
    return EstimateResult(estimate=estimate, components=components, summary=summary, tuning=tuning,
                          theta=theta, unadjusted_ci=unadjusted)
