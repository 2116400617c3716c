"""
Data model shared by every stage of the pipeline.

Arrays held by these objects are marked read-only on construction, so a
Dataset or a fit can be handed to worker processes and concurrent readers
without copying.
"""
import math
import typing
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateArmError, DomainError, ShapeError


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Observation:
    x: tuple[float, ...]
    w: int
    y: float


class Dataset:
    """
    N observations of (X, W, Y) with X in R^k, W in {0, 1} and Y real.

    Construction validates everything the estimators rely on: finite values,
    binary treatment, at least two rows and at least one unit per arm.
    """

    def __init__(self, x, w, y):
        x = np.array(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        w_raw = np.asarray(w, dtype=float)
        y = np.array(y, dtype=float)

        if x.ndim != 2 or w_raw.ndim != 1 or y.ndim != 1:
            raise ShapeError("x must be n-by-k, w and y must be length n")
        if not (x.shape[0] == w_raw.shape[0] == y.shape[0]):
            raise ShapeError(f"row counts disagree: x has {x.shape[0]}, w has {w_raw.shape[0]}, y has {y.shape[0]}")
        if x.shape[1] < 1:
            raise ShapeError("at least one covariate column is required")

        if (bad := np.flatnonzero(~np.all(np.isfinite(x), axis=1))).size:
            raise DomainError("covariates must be finite", row=int(bad[0]) + 1)
        if (bad := np.flatnonzero(~np.isfinite(y))).size:
            raise DomainError("outcome must be finite", row=int(bad[0]) + 1)
        if (bad := np.flatnonzero((w_raw != 0.0) & (w_raw != 1.0))).size:
            raise DomainError(f"treatment must be 0 or 1, got {w_raw[bad[0]]:g}", row=int(bad[0]) + 1)

        if x.shape[0] < 2:
            raise ShapeError(f"at least two observations are required, got {x.shape[0]}")

        self.x = _frozen(x)
        self.w = _frozen(w_raw.astype(np.int8))
        self.y = _frozen(y)

        if self.n1 == 0 or self.n0 == 0:
            raise DegenerateArmError(f"both treatment arms must be nonempty (n0={self.n0}, n1={self.n1})")

    @classmethod
    def from_observations(cls, observations: typing.Iterable[Observation]) -> "Dataset":
        observations = list(observations)
        if not observations:
            raise ShapeError("at least two observations are required, got 0")
        k = len(observations[0].x)
        for row, obs in enumerate(observations, start=1):
            if len(obs.x) != k:
                raise ShapeError(f"row {row}: expected {k} covariates, got {len(obs.x)}")
        return cls([o.x for o in observations], [o.w for o in observations], [o.y for o in observations])

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def k(self) -> int:
        return int(self.x.shape[1])

    @property
    def n1(self) -> int:
        return int(np.count_nonzero(self.w))

    @property
    def n0(self) -> int:
        return self.n - self.n1

    @property
    def observations(self) -> list[Observation]:
        return [Observation(tuple(float(v) for v in self.x[i]), int(self.w[i]), float(self.y[i]))
                for i in range(self.n)]

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (np.array_equal(self.x, other.x) and np.array_equal(self.w, other.w)
                and np.array_equal(self.y, other.y))

    def __repr__(self):
        return f"<Dataset n={self.n} k={self.k} n1={self.n1} n0={self.n0}>"

    def serialize(self):
        return {"n": self.n, "k": self.k, "n1": self.n1, "n0": self.n0}


@dataclass(frozen=True)
class ValidationReport:
    min_score: dict[int, float]
    max_score: dict[int, float]
    warnings: tuple[int, ...]
    low: float
    high: float

    def serialize(self):
        return {
            "score_min_arm0": self.min_score[0],
            "score_max_arm0": self.max_score[0],
            "score_min_arm1": self.min_score[1],
            "score_max_arm1": self.max_score[1],
            "overlap_low": self.low,
            "overlap_high": self.high,
            "overlap_warnings": len(self.warnings),
            "overlap_warning_units": ",".join(str(i) for i in self.warnings),
        }

    def to_lines(self) -> list[str]:
        return [f"{key}={value}" for key, value in self.serialize().items()]

    def __str__(self):
        lines = [
            f"Arm 0 scores: [{self.min_score[0]:.4f}, {self.max_score[0]:.4f}]",
            f"Arm 1 scores: [{self.min_score[1]:.4f}, {self.max_score[1]:.4f}]",
        ]
        if self.warnings:
            lines.append(f"{len(self.warnings)} unit(s) outside [{self.low}, {self.high}]: "
                          + ", ".join(str(i) for i in self.warnings))
        else:
            lines.append(f"No scores outside [{self.low}, {self.high}].")
        return "\n".join(lines)


@dataclass(frozen=True)
class PropensityFit:
    theta_hat: np.ndarray
    loglik: float
    fisher_info: np.ndarray
    converged: bool
    iterations: int
    n: int
    gradient: np.ndarray = field(repr=False, default=None)

    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.diag(np.linalg.inv(self.fisher_info)) / self.n)

    def serialize(self):
        return {
            "theta_hat": ",".join(f"{v:.10g}" for v in self.theta_hat),
            "loglik": f"{self.loglik:.10g}",
            "converged": self.converged,
            "iterations": self.iterations,
        }


@dataclass(frozen=True)
class TuningRule:
    """
    Match count and window sizes. ``None`` for m or q means the automatic
    choice for the realized sample; see ``resolve``.
    """
    m: typing.Optional[int] = None
    q: typing.Optional[int] = None
    l: int = 4
    alpha: float = 0.05

    def __post_init__(self):
        if self.m is not None and self.m < 1:
            raise ValueError(f"m must be at least 1, got {self.m}")
        if self.q is not None and self.q < 2:
            raise ValueError(f"q must be at least 2, got {self.q}")
        if self.l < 2:
            raise ValueError(f"l must be at least 2, got {self.l}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

    def resolve(self, n: int, n0: int, n1: int) -> "TuningRule":
        """
        Fill in automatic values for a sample of size n with arm sizes n0, n1.

        m defaults to the largest power of two not above sqrt(n) (and not above
        the smaller arm). q defaults to the integer nearest n^(1/3). q and l are
        clamped to [2, smaller arm]; an explicit m is never clamped.
        """
        arm = min(n0, n1)
        m = self.m if self.m is not None else default_m(n, arm)
        q = self.q if self.q is not None else nearest_integer(n ** (1.0 / 3.0))
        return TuningRule(m=m, q=_clamp(q, arm), l=_clamp(self.l, arm), alpha=self.alpha)


def nearest_integer(value: float) -> int:
    return int(math.floor(abs(value) + 0.5)) * (1 if value >= 0 else -1)


def default_m(n: int, arm: typing.Optional[int] = None) -> int:
    m = 1 << ((n.bit_length() - 1) // 2)
    if arm is not None:
        while m > max(arm, 1):
            m >>= 1
    return m


def _clamp(value: int, arm: int) -> int:
    return max(2, min(value, arm))


@dataclass(frozen=True)
class VarianceComponents:
    sigma2_hat: float
    c_hat: np.ndarray
    info_hat: np.ndarray
    adjusted: float
    q_used: int
    l_used: int
    m_used: int
    floored: bool = False

    def serialize(self):
        return {
            "sigma2_hat": f"{self.sigma2_hat:.10g}",
            "c_hat": ",".join(f"{v:.10g}" for v in self.c_hat),
            "info_hat": ";".join(",".join(f"{v:.10g}" for v in row) for row in self.info_hat),
            "adjusted": f"{self.adjusted:.10g}",
            "floored": self.floored,
            "m": self.m_used,
            "q": self.q_used,
            "l": self.l_used,
        }


@dataclass(frozen=True)
class AteEstimate:
    tau_hat: float
    m: int
    variance: float
    ci_low: float
    ci_high: float
    n: int
    alpha: float = 0.05

    def serialize(self):
        return {
            "tau_hat": f"{self.tau_hat:.10g}",
            "variance": f"{self.variance:.10g}",
            "ci": f"{self.ci_low:.10g},{self.ci_high:.10g}",
            "alpha": self.alpha,
            "m": self.m,
            "n": self.n,
        }
