"""Movie-table ingestion, filtering, transforms, and splitting.

The input is a delimited text file with a header of schema short names
(see :mod:`moviegross.schema`).  Cells that do not parse under the schema
are recorded as missing rather than raising; missingness is then a
filtering concern.  All operations return new objects, so datasets can be
shared freely.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from . import schema
from .errors import DomainError, SchemaError, ShapeError

MISSING = ""


@dataclass(frozen=True)
class Dataset:
    """An ordered movie table plus a note of which columns are in log form."""

    frame: pd.DataFrame
    transform_log: frozenset = frozenset()

    @property
    def column_labels(self) -> tuple:
        return tuple(self.frame.columns)

    @property
    def n(self) -> int:
        return len(self.frame)

    def records(self):
        """Materialize rows as MovieRecord values (missing -> None)."""
        out = []
        for _, row in self.frame.iterrows():
            out.append(schema.MovieRecord(
                name=_opt(row.get("Movie.Name")),
                year=_opt_int(row.get("Year")),
                month=_opt(row.get("Month")),
                sequel=_opt_int(row.get("Sequel")),
                budget=_opt_float(row.get("Budget")),
                runtime=_opt_float(row.get("Runtime")),
                mpaa=_opt(row.get("MPAA")),
                vote=_opt_float(row.get("Vote")),
                rating=_opt_float(row.get("Ratings")),
                opening_week=_opt_float(row.get("Opening.Week")),
                screens=_opt_float(row.get("Screens")),
                genres={g: _opt_float(row.get(g))
                        for g in schema.GENRE_COLUMNS if g in row.index},
                gross=_opt_float(row.get("Gross.Revenue")),
            ))
        return out

    def genre_columns(self) -> tuple:
        return tuple(c for c in self.column_labels if c in schema.GENRE_COLUMNS)

    def write(self, stream, delimiter: str = ",") -> None:
        frame = self.frame.copy()
        frame.to_csv(stream, sep=delimiter, index=False, na_rep=MISSING,
                     lineterminator="\n")


def _opt(value):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return None
    return value


def _opt_float(value):
    value = _opt(value)
    return None if value is None else float(value)


def _opt_int(value):
    value = _opt(value)
    return None if value is None else int(value)


@dataclass(frozen=True)
class FilterConfig:
    """Inclusion rules applied after parsing, before modeling."""

    year_range: tuple = (2010, 2015)
    min_gross: float = 1_000_000.0
    gross_cap: float = 6.0e8
    required_mpaa: frozenset = frozenset({"PG", "PG-13", "R"})
    drop_missing: bool = True

    def __post_init__(self):
        if not self.min_gross < self.gross_cap:
            raise DomainError(
                f"min_gross ({self.min_gross}) must be below gross_cap "
                f"({self.gross_cap})"
            )


@dataclass(frozen=True)
class SplitResult:
    """Disjoint train/validation/test partition of a dataset."""

    train: Dataset
    validation: Dataset
    test: Dataset
    seed: int
    ratios: tuple


def parse_dataset(source, delimiter: str = ",") -> Dataset:
    """Parse a delimited movie table into a Dataset.

    ``source`` may be a path, a text stream, or bytes.  Cells that do not
    parse under the column's schema become missing values.  A missing or
    duplicated header column is a schema error.
    """
    text = _as_text(source)
    header = next(csv.reader(io.StringIO(text), delimiter=delimiter), None)
    if not header or all(not c.strip() for c in header):
        raise SchemaError("input has no header row")
    seen = set()
    for name in header:
        if name in seen:
            raise SchemaError(f"duplicate column name in header: {name!r}")
        seen.add(name)
    missing_cols = [c for c in schema.ALL_COLUMNS if c not in seen]
    if missing_cols:
        raise SchemaError(f"header is missing required columns: {missing_cols}")

    frame = pd.read_csv(
        io.StringIO(text), sep=delimiter, dtype=str, keep_default_na=False,
        na_values=[MISSING], skipinitialspace=False,
    )
    frame = frame[list(schema.ALL_COLUMNS)]
    return Dataset(frame=_coerce(frame))


def _as_text(source) -> str:
    if hasattr(source, "read"):
        data = source.read()
        return data.decode("utf-8") if isinstance(data, bytes) else data
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str) and "\n" not in source:
        with open(source, "r", encoding="utf-8") as handle:
            return handle.read()
    return source


def _coerce(frame: pd.DataFrame) -> pd.DataFrame:
    out = pd.DataFrame(index=frame.index)
    out["Movie.Name"] = frame["Movie.Name"].where(
        frame["Movie.Name"].notna() & (frame["Movie.Name"].str.strip() != ""),
        np.nan,
    )
    out["Year"] = pd.to_numeric(frame["Year"], errors="coerce").round()
    out["Month"] = frame["Month"].where(frame["Month"].isin(schema.MONTHS), np.nan)
    out["MPAA"] = frame["MPAA"].where(frame["MPAA"].isin(schema.MPAA_LEVELS), np.nan)
    for column in schema.BINARY_COLUMNS:
        numeric = pd.to_numeric(frame[column], errors="coerce")
        out[column] = numeric.where(numeric.isin([0.0, 1.0]), np.nan)
    for column in schema.NUMERIC_COLUMNS:
        numeric = pd.to_numeric(frame[column], errors="coerce")
        out[column] = numeric.where(numeric >= 0.0, np.nan)
    return out[list(schema.ALL_COLUMNS)].reset_index(drop=True)


def apply_filters(d: Dataset, f: FilterConfig):
    """Apply the inclusion rules; returns (dataset, removal counts).

    Rules run in a fixed order (year, MPAA, gross floor, gross cap,
    missingness) and each count reports rows removed by that rule after
    the earlier ones.  Filtering preserves record order and is idempotent.
    """
    frame = d.frame
    counts = {"input": len(frame)}

    year = frame["Year"]
    keep = year.notna() & (year >= f.year_range[0]) & (year <= f.year_range[1])
    counts["removed_year"] = int((~keep).sum())
    frame = frame[keep]

    keep = frame["MPAA"].isin(sorted(f.required_mpaa))
    counts["removed_mpaa"] = int((~keep).sum())
    frame = frame[keep]

    min_gross, gross_cap = f.min_gross, f.gross_cap
    if "Gross.Revenue" in d.transform_log:
        min_gross, gross_cap = math.log(min_gross), math.log(gross_cap)
    gross = frame["Gross.Revenue"]
    keep = gross.notna() & (gross >= min_gross)
    counts["removed_min_gross"] = int((~keep).sum())
    frame = frame[keep]

    keep = frame["Gross.Revenue"] <= gross_cap
    counts["removed_gross_cap"] = int((~keep).sum())
    frame = frame[keep]

    if f.drop_missing:
        keep = frame.notna().all(axis=1)
        counts["removed_missing"] = int((~keep).sum())
        frame = frame[keep]
    else:
        counts["removed_missing"] = 0

    counts["output"] = len(frame)
    return Dataset(frame=frame.reset_index(drop=True),
                   transform_log=d.transform_log), counts


def log_transform(d: Dataset, columns) -> Dataset:
    """Replace the named columns by their natural logs.

    Missing values pass through; a nonpositive value is a domain error that
    names the offending record.
    """
    frame = d.frame.copy()
    for column in columns:
        if column not in frame.columns:
            raise ShapeError(f"no such column: {column!r}")
        values = frame[column]
        bad = values.notna() & (values <= 0.0)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            name = frame["Movie.Name"].iloc[row] if "Movie.Name" in frame else row
            raise DomainError(
                f"cannot log-transform {column!r}: nonpositive value for "
                f"record {name!r} (row {row})"
            )
        frame[column] = np.log(values)
    return Dataset(frame=frame,
                   transform_log=d.transform_log | frozenset(columns))


def drop_empty_genres(d: Dataset):
    """Remove genre columns that are zero for every record.

    Returns (dataset, dropped column names); retained columns are untouched.
    """
    frame = d.frame
    dropped = []
    for column in d.genre_columns():
        values = frame[column]
        if values.notna().all() and (values == 0.0).all():
            dropped.append(column)
        elif values.isna().all():
            dropped.append(column)
    return Dataset(frame=frame.drop(columns=dropped),
                   transform_log=d.transform_log), dropped


def split(d: Dataset, ratios=(0.6, 0.2, 0.2), seed: int = 0) -> SplitResult:
    """Seeded random partition into train/validation/test.

    Sizes are floor(n*r1) and floor(n*r2), remainder to test.  Row order
    inside each bucket follows the original table.  The shuffle is a
    permutation from numpy's PCG64 generator seeded with ``seed``, so the
    assignment is reproducible.
    """
    r1, r2, r3 = ratios
    if abs(r1 + r2 + r3 - 1.0) > 1e-12 or min(r1, r2, r3) <= 0:
        raise DomainError(f"ratios must be positive and sum to 1, got {ratios}")
    n = d.n
    if n < 3:
        raise DomainError(f"need at least 3 records to split, got {n}")
    n1 = math.floor(n * r1)
    n2 = math.floor(n * r2)
    perm = np.random.default_rng(seed).permutation(n)
    buckets = (np.sort(perm[:n1]), np.sort(perm[n1:n1 + n2]),
               np.sort(perm[n1 + n2:]))
    parts = [
        Dataset(frame=d.frame.iloc[idx].reset_index(drop=True),
                transform_log=d.transform_log)
        for idx in buckets
    ]
    return SplitResult(train=parts[0], validation=parts[1], test=parts[2],
                       seed=seed, ratios=tuple(ratios))


def write_filter_report(counts: dict, stream) -> None:
    """Stage-by-stage removal counts in a flat key = value form."""
    for key, value in counts.items():
        stream.write(f"{key} = {value}\n")
