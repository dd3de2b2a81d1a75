"""Column schema of the movie table: names, types, and categorical levels.

The ingestion format is a delimited text file whose header uses the short
column names below.  Binary genre flags are 0/1; financial columns are in
USD; an empty cell means the value is missing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

MONTHS = (
    "Jan", "Feb", "Mar", "Apr", "May", "Jun",
    "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
)

MPAA_LEVELS = ("G", "PG", "PG-13", "R", "NC-17")

#: Genre flags in table order.  Short, Adult and Film.Noir are part of the
#: input schema even though they are typically empty and get dropped.
GENRE_COLUMNS = (
    "Short", "Drama", "Comedy", "Documentary", "Adult", "Action",
    "Thriller", "Romance", "Animation", "Family", "Horror", "Crime",
    "Adventure", "Fantasy", "Sci.Fi", "Mystery", "Biography", "History",
    "Sport", "Musical", "War", "Western", "Film.Noir",
)

NAME_COLUMN = "Movie.Name"

CATEGORICAL_COLUMNS = ("Year", "Month", "MPAA")

#: Continuous / count columns, in the order of the pairwise-correlation report.
CONTINUOUS_COLUMNS = (
    "Runtime", "Vote", "Ratings", "Screens", "Opening.Week", "Budget",
    "Gross.Revenue",
)

BINARY_COLUMNS = ("Sequel",) + GENRE_COLUMNS

#: Columns that get a natural-log transform during ingestion.
LOG_COLUMNS = ("Budget", "Opening.Week", "Gross.Revenue")

ALL_COLUMNS = (
    (NAME_COLUMN, "Year", "Month", "Sequel", "Budget", "Runtime", "MPAA",
     "Vote", "Ratings", "Opening.Week", "Screens")
    + GENRE_COLUMNS
    + ("Gross.Revenue",)
)

#: Columns that must parse as nonnegative numbers.
NUMERIC_COLUMNS = (
    "Budget", "Runtime", "Vote", "Ratings", "Opening.Week", "Screens",
    "Gross.Revenue",
)


@dataclass(frozen=True)
class MovieRecord:
    """One film, with missing values represented as None."""

    name: str
    year: Optional[int]
    month: Optional[str]
    sequel: Optional[int]
    budget: Optional[float]
    runtime: Optional[float]
    mpaa: Optional[str]
    vote: Optional[float]
    rating: Optional[float]
    opening_week: Optional[float]
    screens: Optional[float]
    genres: dict
    gross: Optional[float]


def categorical_levels(column: str) -> tuple:
    """Canonical level order for a categorical column (used for dummy coding)."""
    if column == "Month":
        return MONTHS
    if column == "MPAA":
        return MPAA_LEVELS
    if column == "Year":
        return tuple(str(y) for y in range(1900, 2101))
    raise KeyError(column)
