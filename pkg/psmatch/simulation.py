"""
Monte Carlo designs and the replication driver.

Two designs ship. Both draw X1, X2 independently from Uniform[-1/2, 1/2],
assign W ~ Bernoulli(F(X1 + 2 X2)) with the logistic F, and set
Y = W Y(1) + (1 - W) Y(0) with

    design 1:  Y(0) = 3 X1 - 3 X2 + U0       Y(1) = 5 + 5 X1 + X2 + U1
    design 2:  Y(0) = 2 X1 + 4 X2 + U0       Y(1) = 5 - X1 - 2 X2 + U1

where U0, U1 are independent standard normals. The true ATE is 5 in both.

Replication r of a run uses the counter-based stream Philox(base_seed + r),
so any replication can be recomputed alone and results do not depend on how
replications are spread over worker processes.
"""
import configparser
import logging
import math
import typing
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from rich.table import Table
from scipy.special import expit, ndtri

from . import __version__
from .errors import DegenerateArmError, DomainError, RankDeficiencyError, SeparationError, ShapeError
from .estimator import match_summary
from .matching import build_index
from .models import Dataset, TuningRule
from .pipeline import select_theta
from .propensity import fisher_information, fit_mle, propensity_scores
from .variance import adjusted_variance, c_hat, confidence_interval, sigma2_hat, window_variances

logger = logging.getLogger(__name__)

# Smallest uniform fed to the normal quantile; keeps draws finite.
_TINY_UNIFORM = 2.0 ** -54


@dataclass(frozen=True)
class DesignSpec:
    """
    Linear potential outcome means mu_w(x) = c + a1 x1 + a2 x2, stored as
    (c, a1, a2) per arm.
    """
    design_id: str
    mu0: tuple[float, float, float]
    mu1: tuple[float, float, float]
    theta_star: tuple[float, float] = (1.0, 2.0)

    @property
    def true_tau(self) -> float:
        # Covariates are centered, so the slopes average out.
        return self.mu1[0] - self.mu0[0]

    def mean(self, w: int, x: np.ndarray) -> np.ndarray:
        c, a1, a2 = self.mu1 if w == 1 else self.mu0
        return c + a1 * x[..., 0] + a2 * x[..., 1]

    def serialize(self):
        return {
            "design": self.design_id,
            "mu0": ",".join(f"{v:g}" for v in self.mu0),
            "mu1": ",".join(f"{v:g}" for v in self.mu1),
            "theta_star": ",".join(f"{v:g}" for v in self.theta_star),
        }


DESIGNS = {
    "1": DesignSpec("1", mu0=(0.0, 3.0, -3.0), mu1=(5.0, 5.0, 1.0)),
    "2": DesignSpec("2", mu0=(0.0, 2.0, 4.0), mu1=(5.0, -1.0, -2.0)),
}


def _coefficients(name: str, key: str, raw: str, count: int = 3) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in raw.replace(",", " ").split())
    except ValueError:
        raise DomainError(f"design '{name}': {key} must be numbers, got '{raw}'")
    if len(values) != count:
        raise DomainError(f"design '{name}': {key} needs {count} coefficients, got {len(values)}")
    return values


def parse_design_sections(parser: configparser.ConfigParser) -> dict[str, DesignSpec]:
    """
    User designs from config sections of the form

        [design:<name>]
        mu0 = c0, a1, a2
        mu1 = c1, b1, b2
        theta = t1, t2      (optional, default 1, 2)
    """
    out = dict()
    for section in parser.sections():
        if not section.lower().startswith("design:"):
            continue
        if not (name := section.split(":", 1)[1].strip().lower()):
            raise DomainError(f"config section [{section}] needs a design name")
        if name in DESIGNS:
            raise DomainError(f"design '{name}' is built in and cannot be redefined")
        values = parser[section]
        for key in ("mu0", "mu1"):
            if key not in values:
                raise DomainError(f"design '{name}' is missing '{key}'")
        theta = (1.0, 2.0)
        if "theta" in values:
            theta = _coefficients(name, "theta", values["theta"], count=2)
        out[name] = DesignSpec(name, mu0=_coefficients(name, "mu0", values["mu0"]),
                               mu1=_coefficients(name, "mu1", values["mu1"]), theta_star=theta)
    return out


def get_design(design_id, custom: typing.Optional[dict[str, DesignSpec]] = None) -> DesignSpec:
    key = str(design_id).strip().lower()
    if spec := DESIGNS.get(key):
        return spec
    if custom and (spec := custom.get(key)):
        return spec
    choices = ", ".join(list(DESIGNS) + list(custom or ()))
    raise DomainError(f"unknown design '{design_id}'; choices: {choices}")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def generate_design(spec: DesignSpec, n: int, rng: np.random.Generator) -> Dataset:
    """
    Draw n observations. Draw order is fixed (X, then W, then U0 and U1), and
    normals come from the inverse normal cdf of uniforms.
    """
    if n < 2:
        raise ShapeError(f"n must be at least 2, got {n}")
    x = rng.random((n, 2)) - 0.5
    w = (rng.random(n) < expit(x @ np.asarray(spec.theta_star))).astype(np.int8)
    noise = ndtri(np.maximum(rng.random((n, 2)), _TINY_UNIFORM))
    y0 = spec.mean(0, x) + noise[:, 0]
    y1 = spec.mean(1, x) + noise[:, 1]
    return Dataset(x, w, np.where(w == 1, y1, y0))


def simulation_grid(n: int) -> list[int]:
    """
    M = 2^j for 0 <= j <= floor(log2(n) / 2).
    """
    return [1 << j for j in range((n.bit_length() - 1) // 2 + 1)]


@dataclass(frozen=True)
class ReplicationEstimate:
    m: int
    tau_hat: float = math.nan
    variance: float = math.nan
    ci95: tuple[float, float] = (math.nan, math.nan)
    ci90: tuple[float, float] = (math.nan, math.nan)
    skipped: bool = False


@dataclass(frozen=True)
class ReplicationRecord:
    seed: int
    n: int
    estimates: tuple[ReplicationEstimate, ...] = ()
    failure: typing.Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.failure is not None

    def for_m(self, m: int) -> typing.Optional[ReplicationEstimate]:
        for estimate in self.estimates:
            if estimate.m == m:
                return estimate
        return None


def run_replication(spec: DesignSpec, n: int, m_grid: typing.Sequence[int], tuning: TuningRule, seed: int,
                    theta_source: str = "mle", d: typing.Optional[float] = None) -> ReplicationRecord:
    """
    One dataset, one MLE fit, one score index; then for each m the estimate,
    its adjusted variance and intervals at alpha = 0.05 and 0.10.

    An m larger than the smaller realized arm is recorded as skipped.
    """
    try:
        ds = generate_design(spec, n, make_rng(seed))
        fit = fit_mle(ds)
    except (DegenerateArmError, RankDeficiencyError, SeparationError) as err:
        return ReplicationRecord(seed=seed, n=n, failure=f"{err.__class__.__name__}: {err}")

    if min(ds.n0, ds.n1) < 2:
        return ReplicationRecord(seed=seed, n=n, failure=f"an arm has fewer than 2 units (n0={ds.n0}, n1={ds.n1})")
    rule = tuning.resolve(ds.n, ds.n0, ds.n1)
    hat_scores = propensity_scores(ds, fit.theta_hat)
    hat_index = build_index(hat_scores, ds.w)
    if theta_source == "mle":
        scores, index = hat_scores, hat_index
    else:
        scores = propensity_scores(ds, select_theta(fit, theta_source, d, spec.theta_star))
        index = build_index(scores, ds.w)

    local = window_variances(hat_index, ds.y, rule.q)
    c = c_hat(ds, hat_scores, fit.theta_hat, rule.l, index=hat_index)
    info = fisher_information(ds, fit.theta_hat)
    smaller_arm = min(ds.n0, ds.n1)

    estimates = list()
    for m in m_grid:
        if m > smaller_arm:
            estimates.append(ReplicationEstimate(m=m, skipped=True))
            continue
        summary = match_summary(ds, scores, m, index=index)
        s2 = sigma2_hat(ds, hat_scores, fit.theta_hat, m, rule.q, summary=summary, window_index=hat_index,
                        local=local)
        components = adjusted_variance(s2, c, info, m=m, q=rule.q, l=rule.l)
        variance = components.sigma2_hat if theta_source == "true" else components.adjusted
        estimates.append(ReplicationEstimate(
            m=m,
            tau_hat=summary.tau_hat,
            variance=variance,
            ci95=confidence_interval(summary.tau_hat, variance, ds.n, 0.05),
            ci90=confidence_interval(summary.tau_hat, variance, ds.n, 0.10),
        ))
    return ReplicationRecord(seed=seed, n=n, estimates=tuple(estimates))


class Metrics(typing.NamedTuple):
    rmse: float
    mae: float
    cover95: float
    cover90: float
    nsd: float


def metrics(estimates, ci95s, ci90s, true_tau: float, n: int) -> Metrics:
    """
    RMSE, MAE, the share of each interval list covering true_tau, and
    sqrt(n) times the sample standard deviation (divisor reps - 1) of the
    estimates. NSD is NaN for a single estimate.
    """
    estimates = np.asarray(estimates, dtype=float).reshape(-1)
    ci95s = np.asarray(ci95s, dtype=float).reshape(-1, 2)
    ci90s = np.asarray(ci90s, dtype=float).reshape(-1, 2)
    if estimates.shape[0] == 0:
        raise ShapeError("metrics need at least one estimate")
    if not (estimates.shape[0] == ci95s.shape[0] == ci90s.shape[0]):
        raise ShapeError(f"got {estimates.shape[0]} estimates, {ci95s.shape[0]} 95% intervals "
                         f"and {ci90s.shape[0]} 90% intervals")

    reps = estimates.shape[0]
    errors = estimates - true_tau
    rmse = math.sqrt(math.fsum(errors ** 2) / reps)
    mae = math.fsum(np.abs(errors)) / reps
    cover95 = float(np.count_nonzero((ci95s[:, 0] <= true_tau) & (true_tau <= ci95s[:, 1]))) / reps
    cover90 = float(np.count_nonzero((ci90s[:, 0] <= true_tau) & (true_tau <= ci90s[:, 1]))) / reps
    if reps > 1:
        mean = math.fsum(estimates) / reps
        nsd = math.sqrt(n) * math.sqrt(math.fsum((estimates - mean) ** 2) / (reps - 1))
    else:
        nsd = math.nan
    return Metrics(rmse=rmse, mae=mae, cover95=cover95, cover90=cover90, nsd=nsd)


@dataclass(frozen=True)
class MonteCarloRow:
    n: int
    m: int
    rmse: float
    mae: float
    cover95: float
    cover90: float
    nsd: float
    failed_reps: int
    bias: float

    def csv(self) -> str:
        return ",".join([str(self.n), str(self.m)]
                        + [f"{v:.6f}" for v in (self.rmse, self.mae, self.cover95, self.cover90, self.nsd)]
                        + [str(self.failed_reps), f"{self.bias:.6f}"])


CSV_HEADER = "n,m,rmse,mae,cover95,cover90,nsd,failed_reps,bias"
TABLE_COLUMNS = ("N", "M", "RMSE", "MAE", "Cover95", "Cover90", "NSD", "Failed", "Bias")


@dataclass(frozen=True)
class MonteCarloConfig:
    design: DesignSpec
    n_list: tuple[int, ...]
    reps: int
    base_seed: int = 0
    tuning: TuningRule = TuningRule()
    theta_source: str = "mle"
    d: typing.Optional[float] = None

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError(f"reps must be at least 1, got {self.reps}")
        if not self.n_list:
            raise ValueError("n_list must name at least one sample size")

    def provenance(self) -> str:
        q = "auto" if self.tuning.q is None else self.tuning.q
        parts = [
            f"psmatch {__version__}",
            f"design={self.design.design_id}",
            f"n={','.join(str(n) for n in self.n_list)}",
            f"reps={self.reps}",
            f"base_seed={self.base_seed}",
            f"q={q}",
            f"l={self.tuning.l}",
            f"theta_source={self.theta_source}",
        ]
        if self.theta_source == "discretized":
            parts.append(f"d={self.d}")
        if self.design.design_id not in DESIGNS:
            parts.append(" ".join(f"{k}={v}" for k, v in self.design.serialize().items() if k != "design"))
        return "# " + " ".join(parts)


@dataclass(frozen=True)
class MonteCarloTable:
    rows: tuple[MonteCarloRow, ...]
    reps: int
    base_seed: int
    config: MonteCarloConfig = field(repr=False, default=None)

    def to_csv(self) -> str:
        lines = list()
        if self.config is not None:
            lines.append(self.config.provenance())
        lines.append(CSV_HEADER)
        lines.extend(row.csv() for row in self.rows)
        return "\n".join(lines) + "\n"

    def title(self) -> str:
        design = self.config.design.design_id if self.config is not None else "?"
        return f"Design {design}, {self.reps} replications, base seed {self.base_seed}"

    def render_table(self, t: Table, sigma_eff: typing.Optional[float] = None) -> Table:
        """
        Fill t, whose columns are TABLE_COLUMNS, with one row per (N, M) and a
        section per sample size. sigma_eff, when known, goes in the caption so
        the nsd column can be read against it.
        """
        if sigma_eff is not None:
            t.caption = f"sigma_eff = {sigma_eff:.4f}"
        previous = None
        for row in self.rows:
            if previous is not None and row.n != previous:
                t.add_section()
            t.add_row(str(row.n) if row.n != previous else "", str(row.m),
                      *(f"{v:.3f}" for v in (row.rmse, row.mae, row.cover95, row.cover90, row.nsd)),
                      str(row.failed_reps), f"{row.bias:.3f}")
            previous = row.n
        return t


def _replicate(args) -> ReplicationRecord:
    spec, n, grid, tuning, seed, theta_source, d = args
    return run_replication(spec, n, grid, tuning, seed, theta_source=theta_source, d=d)


def run_monte_carlo(config: MonteCarloConfig, threads: typing.Optional[int] = 1,
                    progress: typing.Optional[typing.Callable[[ReplicationRecord], None]] = None) -> MonteCarloTable:
    """
    Run every replication for every n and aggregate per (n, m).

    ``threads`` is the joblib worker count; None uses every core and 1 runs
    in-process. Replications are aggregated in replication order, so the table
    is identical for any worker count.
    """
    tasks = list()
    for n in config.n_list:
        grid = simulation_grid(n)
        if config.tuning.m is not None:
            grid = [config.tuning.m]
        for r in range(config.reps):
            tasks.append((config.design, n, grid, config.tuning, config.base_seed + r, config.theta_source, config.d))

    records = list()
    if threads == 1:
        for task in tasks:
            records.append(record := _replicate(task))
            if progress:
                progress(record)
    else:
        # Generator output keeps task order, so aggregation sees replications in sequence.
        parallel = Parallel(n_jobs=-1 if threads is None else threads, return_as="generator",
                            batch_size=max(1, len(tasks) // 256))
        for record in parallel(delayed(_replicate)(task) for task in tasks):
            records.append(record)
            if progress:
                progress(record)

    rows = list()
    for n in config.n_list:
        grid = [config.tuning.m] if config.tuning.m is not None else simulation_grid(n)
        cell_records = [rec for rec in records if rec.n == n]
        failures = sum(1 for rec in cell_records if rec.failed)
        if failures:
            logger.warning("n=%d: %d of %d replications failed", n, failures, config.reps)
        for m in grid:
            used = [est for rec in cell_records if not rec.failed
                    if (est := rec.for_m(m)) is not None and not est.skipped]
            failed_reps = config.reps - len(used)
            if not used:
                logger.warning("n=%d m=%d: no usable replications", n, m)
                rows.append(MonteCarloRow(n=n, m=m, rmse=math.nan, mae=math.nan, cover95=math.nan,
                                          cover90=math.nan, nsd=math.nan, failed_reps=failed_reps, bias=math.nan))
                continue
            if failed_reps:
                logger.warning("n=%d m=%d: %d replications failed or skipped", n, m, failed_reps)
            values = [est.tau_hat for est in used]
            result = metrics(values, [est.ci95 for est in used], [est.ci90 for est in used],
                             config.design.true_tau, n)
            bias = math.fsum(values) / len(values) - config.design.true_tau
            rows.append(MonteCarloRow(n=n, m=m, failed_reps=failed_reps, bias=bias, **result._asdict()))

    return MonteCarloTable(rows=tuple(rows), reps=config.reps, base_seed=config.base_seed, config=config)
