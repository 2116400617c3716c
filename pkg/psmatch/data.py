"""
Dataset ingestion from comma-delimited files and overlap diagnostics.

Columns are matched by name, never by position: one outcome column, one
treatment column and covariates named <prefix>1 .. <prefix>k.
"""
import logging
import re
import typing
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from . import settings
from .errors import DomainError, MissingFileError, ParseError, ShapeError
from .models import Dataset, ValidationReport

logger = logging.getLogger(__name__)

_BAD_LINE = re.compile(r"Expected (\d+) fields in line (\d+), saw (\d+)")


@dataclass(frozen=True)
class ColumnLayout:
    outcome: str = "y"
    treatment: str = "w"
    covariate_prefix: str = "x"

    def covariate_columns(self, header: typing.Sequence[str]) -> list[str]:
        pattern = re.compile(rf"^{re.escape(self.covariate_prefix)}(\d+)$")
        found = dict()
        for name in header:
            if match := pattern.match(name):
                found[int(match.group(1))] = name
        if not found:
            raise ShapeError(f"no covariate columns named {self.covariate_prefix}1..{self.covariate_prefix}k")
        k = max(found)
        if missing := [j for j in range(1, k + 1) if j not in found]:
            raise ShapeError(f"covariate columns are not contiguous; missing "
                             + ", ".join(f"{self.covariate_prefix}{j}" for j in missing))
        return [found[j] for j in range(1, k + 1)]


DEFAULT_LAYOUT = ColumnLayout()


def _numeric_column(frame: pd.DataFrame, column: str) -> np.ndarray:
    raw = frame[column].str.strip()
    values = pd.to_numeric(raw, errors="coerce")
    if (bad := np.flatnonzero(values.isna().to_numpy())).size:
        row = int(bad[0])
        cell = raw.iloc[row]
        problem = "missing value" if pd.isna(cell) or cell == "" else f"not a number: '{cell}'"
        raise ParseError(problem, row=row + 1, column=column)
    return values.to_numpy(dtype=float)


def load_dataset(path: typing.Union[str, Path], layout: ColumnLayout = DEFAULT_LAYOUT) -> Dataset:
    """
    Read a comma-delimited file with a header row into a Dataset.

    Rows keep file order; row numbers in errors count data rows from 1.
    Missing cells are rejected rather than imputed.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"no such file: {path}")

    # No header inference: a row wider than the header must fail, not become an index.
    try:
        raw = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.ParserError as err:
        message = str(err).strip().splitlines()[-1]
        if match := _BAD_LINE.search(message):
            raise ParseError(f"expected {match.group(1)} fields, saw {match.group(3)}", row=int(match.group(2)) - 1)
        raise ParseError(f"{path}: {message}")
    except pd.errors.EmptyDataError:
        raise ParseError(f"{path}: file is empty")
    except OSError as err:
        raise MissingFileError(f"cannot read {path}: {err.strerror or err}")

    frame = raw.iloc[1:].reset_index(drop=True)
    frame.columns = [str(c).strip() for c in raw.iloc[0]]
    if (duplicated := frame.columns[frame.columns.duplicated()]).size:
        raise ShapeError(f"{path}: duplicate column(s) " + ", ".join(sorted(set(duplicated))))
    for required in (layout.outcome, layout.treatment):
        if required not in frame.columns:
            raise ShapeError(f"{path}: missing column '{required}'")
    covariates = layout.covariate_columns(frame.columns)

    y = _numeric_column(frame, layout.outcome)
    w = _numeric_column(frame, layout.treatment)
    x = np.column_stack([_numeric_column(frame, c) for c in covariates])

    if (bad := np.flatnonzero((w != 0.0) & (w != 1.0))).size:
        row = int(bad[0])
        raise DomainError(f"treatment must be 0 or 1, got {w[row]:g}", row=row + 1, column=layout.treatment)

    ds = Dataset(x, w, y)
    logger.debug("Loaded %s: n=%d k=%d n1=%d n0=%d", path, ds.n, ds.k, ds.n1, ds.n0)
    return ds


def validate(ds: Dataset, scores, low: typing.Optional[float] = None,
             high: typing.Optional[float] = None) -> ValidationReport:
    """
    Overlap diagnostic: per-arm score ranges plus every unit whose score falls
    below ``low`` or above ``high``. Warnings are never fatal; a score outside
    the open unit interval is.
    """
    low = settings.OVERLAP_LOW if low is None else low
    high = settings.OVERLAP_HIGH if high is None else high
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (ds.n,):
        raise ShapeError(f"expected {ds.n} scores, got {scores.shape[0] if scores.ndim else 0}")
    if (bad := np.flatnonzero(~((scores > 0.0) & (scores < 1.0)))).size:
        row = int(bad[0])
        raise DomainError(f"propensity score must lie in (0, 1), got {scores[row]!r}", row=row + 1)

    min_score, max_score = dict(), dict()
    for arm in (0, 1):
        arm_scores = scores[ds.w == arm]
        min_score[arm] = float(arm_scores.min())
        max_score[arm] = float(arm_scores.max())

    warnings = tuple(int(i) for i in np.flatnonzero((scores < low) | (scores > high)))
    if warnings:
        logger.info("%d unit(s) have propensity scores outside [%s, %s]", len(warnings), low, high)
    return ValidationReport(min_score=min_score, max_score=max_score, warnings=warnings, low=low, high=high)
