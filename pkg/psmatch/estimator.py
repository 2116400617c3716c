"""
The M-nearest-neighbor propensity score matching estimator of the ATE.
"""
import logging
import math
import typing
from dataclasses import dataclass

import numpy as np

from . import settings
from .errors import BoundError, DualFormError, ShapeError
from .matching import ScoreIndex, build_index, match_counts, opposite_matrix
from .models import Dataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MatchSummary:
    """
    Everything the point estimate was computed from. The variance estimator
    reuses these exact match sets and counts.
    """
    index: ScoreIndex
    m: int
    matches: np.ndarray
    counts: np.ndarray
    contrasts: np.ndarray
    tau_hat: float
    tau_hat_k: float

    @property
    def n(self) -> int:
        return self.index.n


def check_m(ds: Dataset, m: int):
    if m < 1 or m > min(ds.n0, ds.n1):
        raise BoundError(f"m must lie in 1..min(n0, n1) = {min(ds.n0, ds.n1)}, got {m}")


def match_summary(ds: Dataset, scores, m: int, index: typing.Optional[ScoreIndex] = None,
                  strict: typing.Optional[bool] = None) -> MatchSummary:
    """
    Compute tau_hat in both forms:

        J form: (1/N) sum_i (2W_i - 1)(Y_i - (1/M) sum_{j in J(i)} Y_j)
        K form: (1/N) sum_i (2W_i - 1)(1 + K(i)/M) Y_i

    The J form is returned as ``tau_hat``. The forms are algebraically equal
    given exactly-M match sets; a disagreement beyond DUAL_FORM_TOLERANCE
    raises in strict mode and is logged otherwise.
    """
    check_m(ds, m)
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (ds.n,):
        raise ShapeError(f"expected {ds.n} scores, got shape {scores.shape}")
    if index is None:
        index = build_index(scores, ds.w)

    matches = opposite_matrix(index, m)
    counts = match_counts(index, m, matches)
    sign = 2.0 * ds.w - 1.0

    contrasts = sign * (ds.y - ds.y[matches].mean(axis=1))
    tau_hat = math.fsum(contrasts) / ds.n
    tau_hat_k = math.fsum(sign * (1.0 + counts / m) * ds.y) / ds.n

    strict = settings.DUAL_FORM_STRICT if strict is None else strict
    if abs(tau_hat - tau_hat_k) > settings.DUAL_FORM_TOLERANCE * (1.0 + abs(tau_hat)):
        message = f"J-form {tau_hat!r} and K-form {tau_hat_k!r} of the estimator disagree"
        if strict:
            raise DualFormError(message)
        logger.warning(message)

    return MatchSummary(index=index, m=m, matches=matches, counts=counts, contrasts=contrasts,
                        tau_hat=tau_hat, tau_hat_k=tau_hat_k)


def ate_matching(ds: Dataset, scores, m: int) -> float:
    return match_summary(ds, scores, m).tau_hat

