"""
Generalized linear propensity model p(x; theta) = F(x'theta).

Only the logistic link ships. Every operation takes the link as an argument,
so another link only has to provide the four functions of LinkFunction.
"""
import logging
import math
import typing
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import expit, log_expit

from . import settings
from .errors import RankDeficiencyError, SeparationError, ShapeError
from .models import Dataset, PropensityFit

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinkFunction:
    """
    A cdf F mapping the linear predictor into (0, 1) and its density f.
    ``log_cdf`` and ``log_sf`` return log F and log(1 - F) without overflow.
    """
    name: str
    cdf: typing.Callable[[np.ndarray], np.ndarray]
    density: typing.Callable[[np.ndarray], np.ndarray]
    log_cdf: typing.Callable[[np.ndarray], np.ndarray]
    log_sf: typing.Callable[[np.ndarray], np.ndarray]


def _logistic_density(eta):
    p = expit(eta)
    return p * (1.0 - p)


LOGISTIC = LinkFunction(
    name="logistic",
    cdf=expit,
    density=_logistic_density,
    log_cdf=log_expit,
    log_sf=lambda eta: log_expit(-np.asarray(eta, dtype=float)),
)


def _theta(ds: Dataset, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != ds.k:
        raise ShapeError(f"theta has {theta.shape[0]} components, dataset has {ds.k} covariates")
    return theta


def log_likelihood(ds: Dataset, theta, link: LinkFunction = LOGISTIC) -> float:
    eta = ds.x @ _theta(ds, theta)
    terms = np.where(ds.w == 1, link.log_cdf(eta), link.log_sf(eta))
    return math.fsum(terms)


def _score_weights(ds: Dataset, eta: np.ndarray, link: LinkFunction) -> np.ndarray:
    p = link.cdf(eta)
    if link is LOGISTIC:
        return ds.w - p
    return (ds.w - p) * link.density(eta) / (p * (1.0 - p))


def score_gradient(ds: Dataset, theta, link: LinkFunction = LOGISTIC) -> np.ndarray:
    """
    Gradient of the log-likelihood: sum_i X_i (W_i - p_i) f_i / (p_i (1 - p_i)),
    which is sum_i X_i (W_i - p_i) for the logistic link.
    """
    eta = ds.x @ _theta(ds, theta)
    return ds.x.T @ _score_weights(ds, eta, link)


def fisher_information(ds: Dataset, theta, link: LinkFunction = LOGISTIC) -> np.ndarray:
    """
    Empirical Fisher information (1/N) sum_i f_i^2 / (p_i (1 - p_i)) X_i X_i'.
    """
    eta = ds.x @ _theta(ds, theta)
    if link is LOGISTIC:
        weights = _logistic_density(eta)
    else:
        p = link.cdf(eta)
        weights = link.density(eta) ** 2 / (p * (1.0 - p))
    info = (ds.x * weights[:, None]).T @ ds.x / ds.n
    return (info + info.T) / 2.0


def propensity_scores(ds: Dataset, theta, link: LinkFunction = LOGISTIC) -> np.ndarray:
    return link.cdf(ds.x @ _theta(ds, theta))


def _separates(ds: Dataset, theta: np.ndarray) -> bool:
    """
    True when x'theta weakly splits the arms (treated >= 0, controls <= 0,
    not all zero). The likelihood then keeps rising along theta and has no
    maximizer.
    """
    eta = ds.x @ theta
    weak = np.where(ds.w == 1, eta >= 0.0, eta <= 0.0)
    return bool(np.all(weak) and np.any(eta != 0.0))


def fit_mle(ds: Dataset, tolerance: typing.Optional[float] = None,
            max_iterations: typing.Optional[int] = None, link: LinkFunction = LOGISTIC) -> PropensityFit:
    """
    Maximum likelihood estimate of theta by Newton-Raphson from theta = 0.

    Each step solves (N I(theta)) s = g and halves s until the log-likelihood
    does not decrease. For the logistic link N I(theta) is exactly the negative
    Hessian; for other links this is Fisher scoring.

    Raises RankDeficiencyError for collinear covariates and SeparationError when
    the likelihood has no maximizer because a hyperplane splits the arms.
    """
    tolerance = settings.MLE_TOLERANCE if tolerance is None else tolerance
    max_iterations = settings.MLE_MAX_ITERATIONS if max_iterations is None else max_iterations

    if ds.n < ds.k + 1:
        raise RankDeficiencyError(f"need at least k + 1 = {ds.k + 1} observations, got {ds.n}")
    if np.linalg.matrix_rank(ds.x) < ds.k:
        raise RankDeficiencyError("covariate columns are collinear")

    theta = np.zeros(ds.k)
    loglik = log_likelihood(ds, theta, link)
    gradient = score_gradient(ds, theta, link)
    converged = False
    iterations = 0

    while iterations < max_iterations:
        if np.max(np.abs(gradient)) < tolerance:
            converged = True
            break
        iterations += 1

        hessian = ds.n * fisher_information(ds, theta, link)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", linalg.LinAlgWarning)
                step = linalg.solve(hessian, gradient, assume_a="pos")
        except (linalg.LinAlgError, linalg.LinAlgWarning) as err:
            raise RankDeficiencyError(f"singular information matrix at iteration {iterations}: {err}")

        # Near the optimum a full step moves the log-likelihood by less than its rounding error.
        slack = 64.0 * np.finfo(float).eps * max(1.0, abs(loglik))
        scale = 1.0
        while True:
            candidate = theta + scale * step
            candidate_loglik = log_likelihood(ds, candidate, link)
            if candidate_loglik >= loglik - slack or scale < 1e-12:
                break
            scale /= 2.0
            logger.debug("Step halved to %g at iteration %d", scale, iterations)

        theta, loglik = candidate, candidate_loglik
        gradient = score_gradient(ds, theta, link)
        logger.debug("Iteration %d: loglik=%.12g max|grad|=%.3g", iterations, loglik, np.max(np.abs(gradient)))

        if np.max(np.abs(theta)) > settings.SEPARATION_BOUND:
            raise SeparationError(f"|theta| exceeded {settings.SEPARATION_BOUND:g} at iteration {iterations}; "
                                  f"treatment is perfectly separated by the covariates")
    else:
        converged = bool(np.max(np.abs(gradient)) < tolerance)

    if _separates(ds, theta):
        raise SeparationError("treatment is separated by the covariates; the MLE does not exist")
    if not converged:
        logger.warning("Newton-Raphson stopped after %d iterations without converging (max|grad|=%.3g)",
                       iterations, np.max(np.abs(gradient)))

    return PropensityFit(
        theta_hat=theta,
        loglik=loglik,
        fisher_info=fisher_information(ds, theta, link),
        converged=converged,
        iterations=iterations,
        n=ds.n,
        gradient=gradient,
    )


def discretize(theta_hat, d: float, n: int) -> np.ndarray:
    """
    Round theta_hat to the lattice (d / sqrt(n)) Z^k, ties away from zero.
    """
    if not d > 0:
        raise ValueError(f"d must be positive, got {d}")
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    theta_hat = np.asarray(theta_hat, dtype=float)
    root = math.sqrt(n)
    coords = root * theta_hat / d
    magnitude = np.abs(coords)
    # Values a few ulps under a half are representation error, not a real tie.
    slack = 16.0 * np.finfo(float).eps * np.maximum(1.0, magnitude)
    rounded = np.floor(magnitude + 0.5 + slack)
    return np.sign(coords) * rounded * d / root
