import typing

from .errors import ExitStatus, PsmatchError


class OperationError(PsmatchError):
    exit_code = ExitStatus.USAGE


class Operation:
    """
    A named request against a manager object. ``execute`` calls
    ``target.op_<operation>(self)``; the manager reads ``kwargs`` and fills in
    ``results``. A manager that rejects its input sets ``status`` and raises
    ``operation.ex``; any other PsmatchError from the library below is caught
    here and its exit code becomes the status.
    """
    st = ExitStatus
    ex = OperationError

    def __init__(self, target, operation: str, kwargs: typing.Optional[dict] = None):
        self.target = target
        self.operation = operation
        self.kwargs = kwargs or dict()
        self.status = ExitStatus.OK
        self.results = dict()

    def execute(self) -> "Operation":
        if (method := getattr(self.target, f"op_{self.operation}", None)) is None:
            raise ValueError(f"{self.target.__class__.__name__} has no operation '{self.operation}'")
        try:
            method(self)
        except OperationError as err:
            if self.status == ExitStatus.OK:
                self.status = err.exit_code
            self.results = {"success": False, "message": str(err)}
        except PsmatchError as err:
            self.status = err.exit_code
            self.results = {"success": False, "message": str(err)}
        return self

    @property
    def success(self) -> bool:
        return bool(self.results.get("success", False))
