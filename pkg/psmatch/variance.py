"""
Large-sample variance of the matching estimator with an estimated propensity
score, and normal confidence intervals.

The estimator is sigma2_hat - c_hat' I_hat^{-1} c_hat, where

    sigma2_hat  combines the spread of the matched contrasts with local
                outcome variances over same-arm windows H_Q(i),
    c_hat       averages local covariances of X with Y over H_L(i) and J_L(i),
                weighted by 1/p, 1/(1-p) and the link density,
    I_hat       is the empirical Fisher information at theta_hat.

All windows are built from p(X; theta_hat).
"""
import logging
import math
import typing
import warnings

import numpy as np
from scipy import linalg
from scipy.special import ndtri

from . import settings
from .errors import BoundError, RankDeficiencyError
from .estimator import MatchSummary, match_summary
from .matching import ScoreIndex, build_index, match_set_opposite, match_set_same, opposite_matrix, same_matrix
from .models import Dataset, TuningRule, VarianceComponents
from .propensity import LOGISTIC, LinkFunction, fisher_information, propensity_scores

logger = logging.getLogger(__name__)

OWN_ARM = "own"
OPPOSITE_ARM = "opposite"


def _check_window(name: str, size: int):
    if size < 2:
        raise BoundError(f"{name} must be at least 2, got {size}")


def _window(idx: ScoreIndex, i: int, size: int, side: str) -> np.ndarray:
    if side == OWN_ARM:
        return match_set_same(idx, i, size)
    if side == OPPOSITE_ARM:
        return match_set_opposite(idx, i, size)
    raise ValueError(f"side must be '{OWN_ARM}' or '{OPPOSITE_ARM}', got '{side}'")


def _windows(idx: ScoreIndex, size: int, side: str) -> np.ndarray:
    if side == OWN_ARM:
        return same_matrix(idx, size)
    if side == OPPOSITE_ARM:
        return opposite_matrix(idx, size)
    raise ValueError(f"side must be '{OWN_ARM}' or '{OPPOSITE_ARM}', got '{side}'")


def cond_variance_hat(idx: ScoreIndex, y, i: int, q: int) -> float:
    """
    Sample variance (divisor q - 1) of the outcomes over H_Q(i), the q
    same-arm units nearest to i, i included.
    """
    _check_window("q", q)
    y = np.asarray(y, dtype=float)
    return float(np.var(y[_window(idx, i, q, OWN_ARM)], ddof=1))


def cond_cov_hat(idx: ScoreIndex, x, y, i: int, l: int, side: str) -> np.ndarray:
    """
    Componentwise sample covariance (divisor l - 1) of covariates with outcomes
    over H_L(i) (side='own') or J_L(i) (side='opposite').
    """
    _check_window("l", l)
    x = np.asarray(x, dtype=float).reshape(len(y), -1)
    y = np.asarray(y, dtype=float)
    window = _window(idx, i, l, side)
    xw, yw = x[window], y[window]
    return ((xw - xw.mean(axis=0)) * (yw - yw.mean())[:, None]).sum(axis=0) / (l - 1)


def window_variances(idx: ScoreIndex, y, q: int) -> np.ndarray:
    """
    cond_variance_hat for every unit at once.
    """
    _check_window("q", q)
    return np.var(np.asarray(y, dtype=float)[same_matrix(idx, q)], axis=1, ddof=1)


def window_covariances(idx: ScoreIndex, x, y, l: int, side: str) -> np.ndarray:
    """
    cond_cov_hat for every unit at once, as an (n, k) array.
    """
    _check_window("l", l)
    windows = _windows(idx, l, side)
    xw = np.asarray(x, dtype=float)[windows]
    yw = np.asarray(y, dtype=float)[windows]
    xc = xw - xw.mean(axis=1, keepdims=True)
    yc = yw - yw.mean(axis=1, keepdims=True)
    return (xc * yc[:, :, None]).sum(axis=1) / (l - 1)


def _column_fsum(values: np.ndarray) -> np.ndarray:
    return np.array([math.fsum(values[:, j]) for j in range(values.shape[1])])


def sigma2_hat(ds: Dataset, scores, theta_hat, m: int, q: int, summary: typing.Optional[MatchSummary] = None,
               window_index: typing.Optional[ScoreIndex] = None, link: LinkFunction = LOGISTIC,
               local: typing.Optional[np.ndarray] = None) -> float:
    """
    (1/N) sum_i (contrast_i - tau_hat)^2
      + (1/N) sum_i ((K_i/M)^2 + ((2M - 1)/M)(K_i/M)) sigma_bar2_hat(i)

    ``scores`` are p(X; theta_hat), computed from theta_hat when None. Contrasts
    and K come from ``summary`` (the point estimator's own match sets) when
    given; the local variances always use windows on ``window_index``, which
    defaults to the summary's index. Callers sweeping over m can pass the
    precomputed ``local`` = window_variances(window_index, y, q).
    """
    if scores is None:
        scores = propensity_scores(ds, theta_hat, link)
    if summary is None:
        summary = match_summary(ds, scores, m)
    elif summary.m != m:
        raise ValueError(f"summary was computed with m={summary.m}, not {m}")
    if window_index is None:
        window_index = summary.index

    if local is None:
        local = window_variances(window_index, ds.y, q)
    spread = math.fsum((summary.contrasts - summary.tau_hat) ** 2) / ds.n
    ratio = summary.counts / m
    weights = ratio ** 2 + ((2.0 * m - 1.0) / m) * ratio
    return spread + math.fsum(weights * local) / ds.n


def c_hat(ds: Dataset, scores, theta_hat, l: int, index: typing.Optional[ScoreIndex] = None,
          link: LinkFunction = LOGISTIC) -> np.ndarray:
    """
    (1/N) sum_i (Cov1_i / p_i + Cov0_i / (1 - p_i)) f(X_i' theta_hat), where
    Cov_w is taken over the unit's own arm when w = W_i and over the opposite
    arm otherwise.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    if scores is None:
        scores = propensity_scores(ds, theta_hat, link)
    scores = np.asarray(scores, dtype=float)
    if index is None:
        index = build_index(scores, ds.w)

    own = window_covariances(index, ds.x, ds.y, l, OWN_ARM)
    opposite = window_covariances(index, ds.x, ds.y, l, OPPOSITE_ARM)
    treated = (ds.w == 1)[:, None]
    cov1 = np.where(treated, own, opposite)
    cov0 = np.where(treated, opposite, own)
    density = link.density(ds.x @ theta_hat)
    terms = (cov1 / scores[:, None] + cov0 / (1.0 - scores)[:, None]) * density[:, None]
    return _column_fsum(terms) / ds.n


def adjusted_variance(sigma2_hat: float, c_hat, info_hat, m: int = 0, q: int = 0, l: int = 0) -> VarianceComponents:
    """
    sigma2_hat - c_hat' I_hat^{-1} c_hat, floored at VARIANCE_FLOOR * sigma2_hat
    when finite-sample noise drives it below that.
    """
    c_hat = np.atleast_1d(np.asarray(c_hat, dtype=float))
    info_hat = np.atleast_2d(np.asarray(info_hat, dtype=float))
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", linalg.LinAlgWarning)
            z = linalg.solve(info_hat, c_hat, assume_a="sym")
    except (linalg.LinAlgError, linalg.LinAlgWarning) as err:
        raise RankDeficiencyError(f"information matrix is singular: {err}")

    adjusted = sigma2_hat - float(c_hat @ z)
    floor = settings.VARIANCE_FLOOR * sigma2_hat
    floored = False
    if adjusted < floor:
        logger.warning("Adjusted variance %.6g is below the floor; using %.6g", adjusted, floor)
        adjusted, floored = floor, True

    return VarianceComponents(sigma2_hat=sigma2_hat, c_hat=c_hat, info_hat=info_hat, adjusted=adjusted,
                              q_used=q, l_used=l, m_used=m, floored=floored)


def normal_quantile(p: float) -> float:
    return float(ndtri(p))


def confidence_interval(tau_hat: float, adjusted: float, n: int, alpha: float) -> tuple[float, float]:
    """
    tau_hat -/+ z_{1 - alpha/2} sqrt(adjusted / n).
    """
    if adjusted < 0:
        raise ValueError(f"variance must be nonnegative, got {adjusted}")
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    half = normal_quantile(1.0 - alpha / 2.0) * math.sqrt(adjusted / n)
    return tau_hat - half, tau_hat + half


def variance_components(ds: Dataset, theta_hat, tuning: TuningRule, summary: MatchSummary,
                        link: LinkFunction = LOGISTIC) -> VarianceComponents:
    """
    Every component at once for a resolved tuning rule. ``summary`` supplies the
    match sets and counts of the point estimate; windows use theta_hat.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    scores = propensity_scores(ds, theta_hat, link)
    if np.array_equal(scores, summary.index.scores):
        index = summary.index
    else:
        index = build_index(scores, ds.w)

    s2 = sigma2_hat(ds, scores, theta_hat, tuning.m, tuning.q, summary=summary, window_index=index, link=link)
    c = c_hat(ds, scores, theta_hat, tuning.l, index=index, link=link)
    info = fisher_information(ds, theta_hat, link)
    return adjusted_variance(s2, c, info, m=tuning.m, q=tuning.q, l=tuning.l)
