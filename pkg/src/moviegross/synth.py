"""Seeded synthetic movie corpus.

The original film table is not distributed, so golden tests and the CLI
demo run on a generated stand-in with the same shape: 771 rows, 23 genre
flags of which Short/Adult/Film.Noir are empty, two deliberate gross
outliers above the default cap, and a known latent structure: genre flags
are dichotomized loadings on 8 latent factors, and log gross carries a
linear signal from budget, runtime, sequel, MPAA, the latent factors, and
noise.

The frozen copy lives in ``moviegross/data/synthetic_movies.csv``; the
generator reproduces it byte for byte for the default arguments.
"""

from __future__ import annotations

import importlib.resources

import numpy as np
import pandas as pd

from . import schema

DEFAULT_SEED = 20160516
DEFAULT_ROWS = 771
CORPUS_RESOURCE = "synthetic_movies.csv"

#: Latent one-factor-per-genre-group pattern: genre -> (factor index, loading).
_GENRE_FACTOR = {
    "Drama": (0, -0.75), "Comedy": (0, 0.7), "Romance": (0, 0.6),
    "Musical": (0, 0.55),
    "Biography": (1, 0.8), "History": (1, 0.85), "War": (1, 0.6),
    "Documentary": (1, 0.5),
    "Action": (2, 0.8), "Adventure": (2, 0.7), "Sci.Fi": (2, 0.75),
    "Fantasy": (2, 0.55),
    "Thriller": (3, 0.75), "Horror": (3, 0.7), "Mystery": (3, 0.65),
    "Crime": (4, 0.8),
    "Animation": (5, 0.85), "Family": (5, 0.8),
    "Sport": (6, 0.8),
    "Western": (7, 0.8),
}

#: Target marginal prevalence of each active genre.
_GENRE_PREVALENCE = {
    "Drama": 0.45, "Comedy": 0.35, "Romance": 0.2, "Musical": 0.06,
    "Biography": 0.09, "History": 0.06, "War": 0.05, "Documentary": 0.07,
    "Action": 0.3, "Adventure": 0.22, "Sci.Fi": 0.14, "Fantasy": 0.12,
    "Thriller": 0.28, "Horror": 0.12, "Mystery": 0.12, "Crime": 0.18,
    "Animation": 0.08, "Family": 0.1, "Sport": 0.05, "Western": 0.03,
}

#: Regression weight of each latent factor in log gross.
_FACTOR_SIGNAL = np.array([0.35, -0.25, 0.2, 0.15, -0.12, 0.3, 0.1, 0.08])

_MPAA_EFFECT = {"PG": 0.0, "PG-13": 0.15, "R": -0.1}


def generate(seed: int = DEFAULT_SEED, n: int = DEFAULT_ROWS) -> pd.DataFrame:
    """Generate the synthetic movie table (raw dollars, no transforms)."""
    rng = np.random.default_rng(seed)
    factors = rng.standard_normal((n, 8))

    frame = pd.DataFrame()
    frame["Movie.Name"] = [f"Synthetic Film {i + 1:04d}" for i in range(n)]
    frame["Year"] = rng.integers(2010, 2016, size=n)
    frame["Month"] = rng.choice(schema.MONTHS, size=n)
    frame["Sequel"] = (rng.random(n) < 0.11).astype(int)
    log_budget = rng.normal(17.0, 1.1, size=n)
    frame["Budget"] = np.round(np.exp(log_budget)).astype(int)
    runtime = np.clip(np.round(rng.normal(107.0, 16.0, size=n)), 70, 210)
    frame["Runtime"] = runtime.astype(int)
    frame["MPAA"] = rng.choice(["PG", "PG-13", "R"], size=n, p=[0.2, 0.38, 0.42])

    for genre in schema.GENRE_COLUMNS:
        if genre in _GENRE_FACTOR:
            j, loading = _GENRE_FACTOR[genre]
            latent = (loading * factors[:, j]
                      + np.sqrt(1.0 - loading ** 2) * rng.standard_normal(n))
            # dichotomize at the quantile giving the target prevalence
            cut = np.quantile(latent, 1.0 - _GENRE_PREVALENCE[genre])
            frame[genre] = (latent > cut).astype(int)
        else:
            frame[genre] = 0

    mpaa_effect = frame["MPAA"].map(_MPAA_EFFECT).to_numpy()
    log_gross = (
        4.2
        + 0.55 * log_budget
        + 0.012 * runtime
        + 0.35 * frame["Sequel"].to_numpy()
        + mpaa_effect
        + factors @ _FACTOR_SIGNAL
        + rng.normal(0.0, 0.9, size=n)
    )
    # keep every regular film inside the (1e6, 6e8) inclusion window
    gross = np.clip(np.exp(log_gross), 1.2e6, 5.5e8)

    log_open = np.log(gross) + rng.normal(-1.45, 0.35, size=n)
    frame["Opening.Week"] = np.round(np.exp(log_open)).astype(int)
    frame["Screens"] = np.round(
        np.clip(np.exp(0.72 * log_open - 1.5 + rng.normal(0, 0.25, n)), 40, 4500)
    ).astype(int)
    rating = np.clip(
        np.round(3.0 + 0.22 * (log_gross - log_gross.mean())
                 + rng.normal(3.3, 0.8, size=n), 1),
        1.0, 10.0,
    )
    frame["Ratings"] = rating
    frame["Vote"] = np.round(
        np.exp(1.1 * (rating - 3.0) + 0.45 * np.log(gross) + rng.normal(0, 0.5, n))
    ).astype(int)

    # two designated outliers above the default gross cap
    outliers = rng.choice(n, size=2, replace=False)
    gross[outliers[0]] = 6.9e8
    gross[outliers[1]] = 7.4e8
    frame["Gross.Revenue"] = np.round(gross).astype(int)

    return frame[list(schema.ALL_COLUMNS)]


def write_corpus(path, seed: int = DEFAULT_SEED, n: int = DEFAULT_ROWS) -> None:
    """Write the generated table as the canonical CSV."""
    frame = generate(seed=seed, n=n)
    frame.to_csv(path, index=False, lineterminator="\n")


def frozen_corpus_text() -> str:
    """The shipped frozen corpus, as CSV text."""
    return (
        importlib.resources.files("moviegross.data")
        .joinpath(CORPUS_RESOURCE)
        .read_text(encoding="utf-8")
    )
