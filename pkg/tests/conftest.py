"""Shared fixtures and independent oracles for the test suite."""

import math

import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid
from scipy.special import ndtr, ndtri

from moviegross.correlation import ContingencyTable


def grid_search_tetrachoric(table: ContingencyTable, step: float = 1e-4):
    """Independent dense-grid maximizer of the 2x2 latent-normal likelihood.

    Cell probabilities over the whole rho grid come from the identity
    d/d_rho P(X<=h, Y<=k) = bivariate normal density at (h, k), integrated
    cumulatively from rho = 0 by the trapezoid rule.  This shares no code
    with the estimator under test (different quadrature, no optimizer).
    """
    t = table.continuity_corrected() if table.has_zero_cell else table
    n = t.total
    h = float(ndtri((t.n00 + t.n01) / n))
    k = float(ndtri((t.n00 + t.n10) / n))
    grid = np.round(np.arange(-0.999, 0.999 + step / 2, step), 10)
    full = np.unique(np.concatenate([grid, [0.0]]))
    density = np.exp(
        -(h * h - 2.0 * full * h * k + k * k) / (2.0 * (1.0 - full ** 2))
    ) / (2.0 * math.pi * np.sqrt(1.0 - full ** 2))
    integral = cumulative_trapezoid(density, full, initial=0.0)
    origin = np.searchsorted(full, 0.0)
    p00 = ndtr(h) * ndtr(k) + (integral - integral[origin])
    px, py = float(ndtr(h)), float(ndtr(k))
    probs = np.clip(
        np.stack([p00, px - p00, py - p00, 1.0 - px - py + p00]), 1e-12, 1.0
    )
    counts = np.array([t.n00, t.n01, t.n10, t.n11], dtype=float)
    loglik = counts @ np.log(probs)
    keep = np.isin(full, grid)
    return float(full[keep][np.argmax(loglik[keep])])


def normal_equations_ols(x, y):
    """Textbook normal-equations OLS oracle with mpmath distribution tails.

    Returns a dict of the same statistics the package computes, derived
    entirely from (X'X)^-1 and high-precision incomplete-beta functions.
    """
    import mpmath

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, n_coef = x.shape
    p = n_coef - 1
    xtx_inv = np.linalg.inv(x.T @ x)
    b = xtx_inv @ (x.T @ y)
    resid = y - x @ b
    rss = float(resid @ resid)
    dof = n - n_coef
    s2 = rss / dof
    se = np.sqrt(s2 * np.diag(xtx_inv))

    def t_tail(t_abs):
        z = dof / (dof + t_abs * t_abs)
        return float(mpmath.betainc(dof / 2, mpmath.mpf(1) / 2, 0, z,
                                    regularized=True))

    t = b / se
    pvals = np.array([t_tail(abs(tj)) for tj in t])
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - rss / sst
    adj = 1.0 - (1.0 - r2) * (n - 1) / dof
    f = (r2 / p) / ((1.0 - r2) / dof)
    z = p * f / (p * f + dof)
    f_p = 1.0 - float(mpmath.betainc(p / 2, dof / 2, 0, z, regularized=True))
    return {
        "coefficients": b, "std_errors": se, "t_values": t, "p_values": pvals,
        "r_squared": r2, "adj_r_squared": adj, "f_statistic": f,
        "f_p_value": f_p, "s": math.sqrt(s2), "dof": dof,
    }


@pytest.fixture(scope="session")
def corpus_path():
    import importlib.resources

    return str(
        importlib.resources.files("moviegross.data") / "synthetic_movies.csv"
    )
