import typing

from rich import box
from rich.console import Console
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table

from .managers import BoundManager, EstimateManager, SimulationManager, write_atomic
from .operation import Operation
from .simulation import TABLE_COLUMNS


class PsmatchCommand:
    """
    Base for the subcommands. ``args`` holds resolved option values keyed by
    option name; ``options`` lists which of them the command reads.
    """
    key = ""
    options: tuple[str, ...] = tuple()

    def __init__(self, args: dict, custom_designs: typing.Optional[dict] = None,
                 console: typing.Optional[Console] = None, err_console: typing.Optional[Console] = None,
                 quiet: bool = False):
        self.args = args
        self.custom_designs = custom_designs or dict()
        self.console = console or Console(soft_wrap=True)
        self.err_console = err_console or Console(stderr=True, soft_wrap=True)
        self.quiet = quiet
        self.buffer = list()
        self.status = Operation.st.OK

    def msg(self, text):
        self.console.print(text, markup=False, highlight=False)

    def msg_err(self, text):
        self.err_console.print(text, markup=False, highlight=False)

    def rich_table(self, *args, **kwargs) -> Table:
        options = {"box": box.ASCII2, "border_style": "magenta"}
        options.update(kwargs)
        return Table(*args, **options)

    def operation(self, target, operation: str, kwargs: typing.Optional[dict] = None) -> Operation:
        return Operation(target=target, operation=operation, kwargs=kwargs)

    def op_message(self, op: Operation):
        self.status = op.status
        if op.success:
            if not self.quiet:
                self.msg_err(op.results.get("message"))
        else:
            self.msg_err(f"psmatch {self.key}: {op.results.get('message')}")

    def kwargs(self) -> dict:
        return {key: self.args[key] for key in self.options if key in self.args}

    def func(self):
        raise NotImplementedError

    def execute(self) -> int:
        self.func()
        for entry in self.buffer:
            if isinstance(entry, str):
                self.msg(entry)
            else:
                self.console.print(entry)
        return int(self.status)


class CmdSimulate(PsmatchCommand):
    """
    Run the Monte Carlo study for a design.

    Syntax:
        psmatch simulate --design <id> --output <file> [--n N ...] [--reps R] [--seed S]
                         [--m M] [--q Q] [--l L] [--theta-source mle|discretized|true] [--d D]
                         [--threads T]

    Writes one row per (N, M) with rmse, mae, cover95, cover90, nsd, the number
    of failed replications and the bias. Without --m, every power of two up to
    sqrt(N) is reported. Replication r uses seed + r, so the file does not
    depend on --threads.
    """
    key = "simulate"
    options = ("design", "n", "reps", "seed", "m", "q", "l", "threads", "theta_source", "d", "output")

    def func(self):
        kwargs = self.kwargs()
        manager = SimulationManager(self.custom_designs)

        if self.quiet:
            op = self.operation(target=manager, operation="simulate", kwargs=kwargs)
            op.execute()
            self.op_message(op)
            return

        columns = (TextColumn("[progress.description]{task.description}"), BarColumn(), MofNCompleteColumn(),
                   TimeElapsedColumn())
        with Progress(*columns, console=self.err_console, transient=True) as progress:
            total = len(kwargs.get("n") or ()) * kwargs.get("reps", 0)
            task = progress.add_task(f"design {kwargs.get('design')}", total=total or None)
            kwargs["progress"] = lambda record: progress.advance(task)
            op = self.operation(target=manager, operation="simulate", kwargs=kwargs)
            op.execute()
        self.op_message(op)

        if op.success:
            table = op.results["table"]
            self.buffer.append(table.render_table(self.rich_table(*TABLE_COLUMNS, title=table.title()),
                                                  op.results.get("sigma_eff")))


class CmdEstimate(PsmatchCommand):
    """
    Estimate the average treatment effect of a dataset.

    Syntax:
        psmatch estimate --input <file> [--m M] [--q Q] [--l L] [--alpha A]
                         [--theta-source mle|discretized] [--d D] [--output <file>]

    The input is comma-delimited with a header naming y, w and x1..xk. The
    report is key=value lines: the propensity fit, the point estimate, the
    variance components, both intervals and the overlap diagnostics. With
    --output the report is written there instead of to standard output.
    """
    key = "estimate"
    options = ("input", "m", "q", "l", "alpha", "theta_source", "d", "output")

    def report_lines(self, results: dict) -> list[str]:
        fit = results["fit"]
        result = results["result"]
        pairs = {"n": results["dataset"].n, "n0": results["dataset"].n0, "n1": results["dataset"].n1}
        pairs.update(fit.serialize())
        pairs["theta_se"] = ",".join(f"{v:.10g}" for v in fit.standard_errors())
        pairs["theta_source"] = results["theta_source"]
        if results["theta_source"] != "mle":
            pairs["theta_used"] = ",".join(f"{v:.10g}" for v in result.theta)
        estimate = result.estimate.serialize()
        pairs["tau_hat"] = estimate.pop("tau_hat")
        components = result.components.serialize()
        for key in ("m", "q", "l"):
            pairs[key] = components.pop(key)
        pairs.update(components)
        pairs["variance"] = estimate["variance"]
        pairs["alpha"] = estimate["alpha"]
        pairs["ci_low"] = f"{result.estimate.ci_low:.10g}"
        pairs["ci_high"] = f"{result.estimate.ci_high:.10g}"
        pairs["ci"] = f"{pairs['ci_low']},{pairs['ci_high']}"
        pairs["unadjusted_ci_low"] = f"{result.unadjusted_ci[0]:.10g}"
        pairs["unadjusted_ci_high"] = f"{result.unadjusted_ci[1]:.10g}"
        lines = [f"{key}={value}" for key, value in pairs.items()]
        lines.extend(results["report"].to_lines())
        return lines

    def func(self):
        kwargs = self.kwargs()
        op = self.operation(target=EstimateManager(self.custom_designs), operation="estimate", kwargs=kwargs)
        op.execute()
        if not op.success:
            self.op_message(op)
            return

        lines = self.report_lines(op.results)
        if output := kwargs.get("output", None):
            write_atomic(output, "\n".join(lines) + "\n")
        else:
            self.buffer.extend(lines)
        self.op_message(op)
        if not self.quiet:
            self.msg_err(str(op.results["report"]))


class CmdBound(PsmatchCommand):
    """
    Print the semiparametric efficiency bound of a shipped design.

    Syntax:
        psmatch bound --design <1|2>

    Reports the closed form, the 64 x 64 Gauss-Legendre value and their
    difference. User-defined designs have no bound.
    """
    key = "bound"
    options = ("design",)

    def func(self):
        op = self.operation(target=BoundManager(self.custom_designs), operation="bound", kwargs=self.kwargs())
        op.execute()
        if not op.success:
            self.op_message(op)
            return

        closed = op.results["closed"]
        quadrature = op.results["quadrature"]
        self.buffer.extend([
            f"design={closed.design_id}",
            f"sigma2_eff={closed.sigma2_eff:.10f}",
            f"sigma_eff={closed.sigma_eff:.6f}",
            f"quadrature_sigma2_eff={quadrature.sigma2_eff:.10f}",
            f"delta={op.results['delta']:.3e}",
        ])
        self.status = op.status


COMMANDS = {cmd.key: cmd for cmd in (CmdSimulate, CmdEstimate, CmdBound)}
