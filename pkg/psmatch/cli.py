"""
Command line entry point: ``psmatch simulate|estimate|bound``.

Values come from three places, in increasing priority: the defaults in
settings.CLI_OPTIONS, the [psmatch] section of an optional --config file,
and explicit flags.
"""
import argparse
import configparser
import logging
import sys
import typing

from rich.console import Console
from rich.logging import RichHandler

from . import __version__
from .commands import COMMANDS
from .errors import ExitStatus, MissingFileError, PsmatchError, UsageError
from .options import build_options
from .simulation import parse_design_sections

logger = logging.getLogger(__name__)

CONFIG_SECTION = "psmatch"


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    options = build_options()

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="INI file with a [psmatch] section; flags override it.")
    common.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level on stderr.")
    common.add_argument("--quiet", action="store_true", help="No progress bar or summaries on stderr.")

    parser = argparse.ArgumentParser(prog="psmatch", description="Propensity score matching estimation of "
                                                                 "average treatment effects.")
    parser.add_argument("--version", action="version", version=f"psmatch {__version__}")
    subparsers = parser.add_subparsers(dest="command", metavar="command", required=True)

    for key, cmd in COMMANDS.items():
        sub = subparsers.add_parser(key, parents=[common], help=cmd.__doc__.strip().splitlines()[0],
                                    description=cmd.__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
        for name in cmd.options:
            opt = options[name]
            kwargs = {"dest": name, "default": None, "help": f"{opt.description} (default: {opt.display()})"}
            if name == "n":
                kwargs["nargs"] = "+"
            sub.add_argument(_flag(name), **kwargs)
    return parser


def read_config(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as f:
            parser.read_file(f)
    except FileNotFoundError:
        raise MissingFileError(f"config file not found: {path}")
    except OSError as err:
        raise MissingFileError(f"cannot read config file {path}: {err.strerror or err}")
    except configparser.Error as err:
        raise UsageError(f"config file {path}: {err}".splitlines()[0])
    return parser


def resolve_options(command: str, namespace: argparse.Namespace,
                    config: typing.Optional[configparser.ConfigParser] = None) -> dict:
    """
    Typed values for every option the command reads: flag, else config file,
    else default.
    """
    cmd = COMMANDS[command]
    options = build_options()
    section = dict()
    if config is not None and config.has_section(CONFIG_SECTION):
        section = dict(config[CONFIG_SECTION])
        if unknown := sorted(set(section) - set(options)):
            raise UsageError(f"unknown config key(s) in [{CONFIG_SECTION}]: {', '.join(unknown)}")

    out = dict()
    for name in cmd.options:
        opt = options[name]
        try:
            if (raw := getattr(namespace, name, None)) is not None:
                opt.set(raw)
            elif name in section:
                opt.set(section[name])
        except ValueError as err:
            raise UsageError(str(err))
        out[name] = opt.value
    return out


def setup_logging(verbose: bool = False):
    handler = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=True)
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING, format="%(message)s",
                        datefmt="[%X]", handlers=[handler], force=True)


def run(argv: typing.Optional[typing.Sequence[str]] = None) -> int:
    try:
        namespace = build_parser().parse_args(argv)
    except SystemExit as err:
        return ExitStatus.OK if not err.code else ExitStatus.USAGE

    setup_logging(namespace.verbose)
    err_console = Console(stderr=True, soft_wrap=True)
    try:
        config = read_config(namespace.config) if namespace.config else None
        custom = parse_design_sections(config) if config is not None else dict()
        args = resolve_options(namespace.command, namespace, config)
        logger.debug("%s options: %s", namespace.command, args)
        cmd = COMMANDS[namespace.command](args, custom_designs=custom, console=Console(soft_wrap=True),
                                          err_console=err_console, quiet=namespace.quiet)
        return cmd.execute()
    except PsmatchError as err:
        err_console.print(f"psmatch {namespace.command}: {err}", markup=False, highlight=False)
        return int(err.exit_code)
    except configparser.Error as err:
        message = str(err).splitlines()[0]
        err_console.print(f"psmatch {namespace.command}: config file: {message}", markup=False, highlight=False)
        return int(ExitStatus.USAGE)
    except OSError as err:
        err_console.print(f"psmatch {namespace.command}: {err}", markup=False, highlight=False)
        return int(ExitStatus.WRITE_FAILED)


def main():
    sys.exit(run())
