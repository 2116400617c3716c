import logging
import os
import tempfile
from pathlib import Path

from . import settings
from .data import load_dataset, validate
from .errors import MissingFileError
from .models import TuningRule
from .operation import Operation
from .oracle import efficiency_bound
from .pipeline import estimate_ate
from .propensity import fit_mle, propensity_scores
from .simulation import DESIGNS, MonteCarloConfig, get_design, run_monte_carlo

logger = logging.getLogger(__name__)


def write_atomic(path: Path, text: str):
    """
    Write text to path through a temporary file in the same directory, so the
    target is either absent or complete.
    """
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    if not directory.is_dir():
        raise MissingFileError(f"output directory does not exist: {directory}")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class DesignManager:

    def __init__(self, custom_designs: dict = None):
        self.custom_designs = custom_designs or dict()

    def find_design(self, operation: Operation, key: str = "design"):
        if (design := operation.kwargs.get(key, None)) is None:
            operation.status = operation.st.USAGE
            raise operation.ex("You must provide a design.")
        return get_design(design, self.custom_designs)

    def _tuning(self, operation: Operation) -> TuningRule:
        try:
            return TuningRule(
                m=operation.kwargs.get("m", None),
                q=operation.kwargs.get("q", None),
                l=operation.kwargs.get("l", settings.DEFAULT_L),
                alpha=operation.kwargs.get("alpha", settings.DEFAULT_ALPHA),
            )
        except ValueError as err:
            operation.status = operation.st.USAGE
            raise operation.ex(str(err))

    def _theta_source(self, operation: Operation, allow_true: bool = True):
        theta_source = operation.kwargs.get("theta_source", "mle")
        d = operation.kwargs.get("d", None)
        if theta_source == "true" and not allow_true:
            operation.status = operation.st.USAGE
            raise operation.ex("theta_source 'true' needs a known design; use mle or discretized.")
        if theta_source == "discretized" and d is None and (d := settings.DISCRETIZE_D) is None:
            operation.status = operation.st.USAGE
            raise operation.ex("theta_source 'discretized' needs a lattice spacing (--d).")
        return theta_source, d


class SimulationManager(DesignManager):

    def op_simulate(self, operation: Operation):
        design = self.find_design(operation)
        if not (output := operation.kwargs.get("output", None)):
            operation.status = operation.st.USAGE
            raise operation.ex("You must provide an output file (--output).")

        tuning = self._tuning(operation)
        theta_source, d = self._theta_source(operation)
        try:
            config = MonteCarloConfig(
                design=design,
                n_list=tuple(operation.kwargs.get("n", settings.DEFAULT_N_LIST)),
                reps=operation.kwargs.get("reps", settings.DEFAULT_REPS),
                base_seed=operation.kwargs.get("seed", settings.DEFAULT_SEED),
                tuning=tuning,
                theta_source=theta_source,
                d=d,
            )
        except ValueError as err:
            operation.status = operation.st.USAGE
            raise operation.ex(str(err))

        logger.info("Simulating design %s: n=%s reps=%d base_seed=%d", design.design_id,
                    ",".join(str(n) for n in config.n_list), config.reps, config.base_seed)
        table = run_monte_carlo(config, threads=operation.kwargs.get("threads", None),
                                progress=operation.kwargs.get("progress", None))
        try:
            write_atomic(output, table.to_csv())
        except OSError as err:
            operation.status = operation.st.WRITE_FAILED
            raise operation.ex(f"Could not write {output}: {err}")

        sigma_eff = None
        if design.design_id in DESIGNS:
            sigma_eff = efficiency_bound(design.design_id).sigma_eff

        message = f"Wrote {len(table.rows)} rows for design {design.design_id} to {output}."
        operation.results = {"success": True, "table": table, "design": design, "path": output,
                             "sigma_eff": sigma_eff, "message": message}


class BoundManager(DesignManager):

    def op_bound(self, operation: Operation):
        design = self.find_design(operation)
        closed = efficiency_bound(design.design_id, method="closed-form")
        quadrature = efficiency_bound(design.design_id, method="quadrature")
        delta = abs(closed.sigma2_eff - quadrature.sigma2_eff)
        operation.results = {
            "success": True,
            "design": design,
            "closed": closed,
            "quadrature": quadrature,
            "delta": delta,
            "message": f"Design {design.design_id}: sigma_eff = {closed.sigma_eff:.4f}",
        }


class EstimateManager(DesignManager):

    def op_estimate(self, operation: Operation):
        if not (path := operation.kwargs.get("input", None)):
            operation.status = operation.st.USAGE
            raise operation.ex("You must provide an input file (--input).")

        tuning = self._tuning(operation)
        theta_source, d = self._theta_source(operation, allow_true=False)

        ds = load_dataset(path)
        if tuning.m is not None and tuning.m > (smaller := min(ds.n0, ds.n1)):
            operation.status = operation.st.BOUND
            raise operation.ex(f"m={tuning.m} exceeds the smaller treatment arm (n0={ds.n0}, n1={ds.n1}); "
                               f"choose m <= {smaller}.")

        fit = fit_mle(ds)
        logger.debug("Propensity fit: %s", fit.serialize())
        result = estimate_ate(ds, fit, tuning, theta_source=theta_source, d=d)
        report = validate(ds, propensity_scores(ds, fit.theta_hat))

        message = f"tau_hat = {result.estimate.tau_hat:.6g} using m={result.tuning.m} on {ds.n} observations."
        operation.results = {
            "success": True,
            "dataset": ds,
            "fit": fit,
            "result": result,
            "report": report,
            "theta_source": theta_source,
            "message": message,
        }
