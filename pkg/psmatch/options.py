"""
Typed option classes for command line and config file values.

Every option string, whether it came from a flag or from a config file, goes
through ``validate`` before use. ``display`` is what --help and reports show.
"""
import typing
from pathlib import Path as _Path

from . import settings


class BaseOption:

    def __init__(self, key: str, description: str, default_value=None):
        self.key = key
        self.description = description
        self.default_value = default_value
        self.value_storage = None

    @property
    def value(self):
        if self.value_storage is None:
            return self.default()
        return self.value_storage

    def set(self, raw):
        self.value_storage = self.validate(raw)
        return self

    def validate(self, value, **kwargs):
        return value

    def default(self):
        if isinstance(self.default_value, str):
            return self.validate(self.default_value)
        return self.default_value

    def display(self, **kwargs):
        if (value := self.value) is None:
            return "auto"
        return str(value)

    def fail(self, message: str):
        raise ValueError(f"{self.key}: {message}")


class PositiveInteger(BaseOption):

    def validate(self, value, **kwargs):
        try:
            number = int(str(value).strip())
        except ValueError:
            self.fail(f"expected a positive integer, got '{value}'")
        if number < 1:
            self.fail(f"expected a positive integer, got {number}")
        return number


class NonNegativeInteger(BaseOption):

    def validate(self, value, **kwargs):
        try:
            number = int(str(value).strip())
        except ValueError:
            self.fail(f"expected a non-negative integer, got '{value}'")
        if number < 0:
            self.fail(f"expected a non-negative integer, got {number}")
        return number


class OptionalInteger(PositiveInteger):

    def validate(self, value, **kwargs):
        if value is None or str(value).strip().lower() in ("", "auto"):
            return None
        return super().validate(value)


class OptionalFloat(BaseOption):

    def validate(self, value, **kwargs):
        if value is None or str(value).strip().lower() in ("", "auto", "none"):
            return None
        try:
            number = float(str(value).strip())
        except ValueError:
            self.fail(f"expected a number, got '{value}'")
        if not number > 0:
            self.fail(f"expected a positive number, got {number}")
        return number


class IntegerList(BaseOption):

    def validate(self, value, **kwargs):
        if isinstance(value, (list, tuple)):
            parts = [str(v) for v in value]
        else:
            parts = [v for val in str(value).replace(",", " ").split() if (v := val.strip())]
        if not parts:
            self.fail("expected at least one integer")
        out = list()
        for part in parts:
            try:
                number = int(part)
            except ValueError:
                self.fail(f"expected integers, got '{part}'")
            if number < 2:
                self.fail(f"sample sizes must be at least 2, got {number}")
            out.append(number)
        return out

    def display(self, **kwargs):
        return ",".join(str(v) for v in self.value)


class Probability(BaseOption):

    def validate(self, value, **kwargs):
        try:
            number = float(str(value).strip())
        except ValueError:
            self.fail(f"expected a number in (0, 1), got '{value}'")
        if not 0.0 < number < 1.0:
            self.fail(f"expected a number in (0, 1), got {number}")
        return number


class DesignId(BaseOption):

    def validate(self, value, **kwargs):
        if not (name := str(value).strip().lower()):
            self.fail("a design id is required")
        return name


class ThetaSource(BaseOption):
    choices = ("mle", "discretized", "true")

    def validate(self, value, **kwargs):
        if (choice := str(value).strip().lower()) not in self.choices:
            self.fail(f"expected one of {', '.join(self.choices)}, got '{value}'")
        return choice


class Path(BaseOption):

    def validate(self, value, **kwargs):
        if value is None or not str(value).strip():
            return None
        return _Path(str(value).strip())

    def display(self, **kwargs):
        if (value := self.value) is None:
            return "none"
        return str(value)


OPTION_CLASSES = {
    cls.__name__: cls
    for cls in (PositiveInteger, NonNegativeInteger, OptionalInteger, OptionalFloat, IntegerList,
                Probability, DesignId, ThetaSource, Path)
}


def build_options(options_dict: typing.Optional[dict] = None) -> dict[str, BaseOption]:
    """
    Instantiate one option object per entry of settings.CLI_OPTIONS (or the
    given dict), keyed by option name.
    """
    if options_dict is None:
        options_dict = settings.CLI_OPTIONS
    out = dict()
    for key, (description, class_name, default) in options_dict.items():
        out[key] = OPTION_CLASSES[class_name](key, description, default)
    return out
