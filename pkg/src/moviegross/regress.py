"""Linear modeling of log revenue with full inference statistics.

The response is modeled on the natural-log scale; dollar predictions add
half the residual variance before exponentiating, which removes the
retransformation bias of the naive exponential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import betainc
from sklearn.base import BaseEstimator, RegressorMixin

from . import schema
from .dataset import Dataset, SplitResult
from .errors import (
    CollinearityError,
    DegenerateInputError,
    DomainError,
    EncodingError,
    ShapeError,
)

_COND_LIMIT = 1e12


def t_cdf(t: float, dof: float) -> float:
    """CDF of Student's t via the regularized incomplete beta function."""
    if dof <= 0:
        raise DomainError(f"degrees of freedom must be positive, got {dof}")
    if t == 0.0:
        return 0.5
    x = dof / (dof + t * t)
    tail = 0.5 * float(betainc(dof / 2.0, 0.5, x))
    return 1.0 - tail if t > 0 else tail


def f_cdf(f: float, d1: float, d2: float) -> float:
    """CDF of the F distribution via the regularized incomplete beta function."""
    if d1 <= 0 or d2 <= 0:
        raise DomainError(f"degrees of freedom must be positive, got ({d1}, {d2})")
    if f < 0:
        raise DomainError(f"F statistic must be nonnegative, got {f}")
    return float(betainc(d1 / 2.0, d2 / 2.0, d1 * f / (d1 * f + d2)))


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of one regression model.

    ``categorical_terms`` maps each categorical column to its baseline
    level (omitted from the dummy coding).  ``factor_terms`` name factor
    score columns already attached to the dataset.
    """

    name: str
    response: str
    numeric_terms: tuple = ()
    categorical_terms: dict = field(default_factory=dict)
    factor_terms: tuple = ()

    def __post_init__(self):
        terms = (tuple(self.numeric_terms) + tuple(self.categorical_terms)
                 + tuple(self.factor_terms))
        if len(set(terms)) != len(terms):
            raise DomainError(f"model {self.name!r} has duplicate terms")
        if self.response in terms:
            raise DomainError(
                f"model {self.name!r} uses the response as a predictor"
            )
        object.__setattr__(self, "numeric_terms", tuple(self.numeric_terms))
        object.__setattr__(self, "factor_terms", tuple(self.factor_terms))


@dataclass(frozen=True)
class DesignMatrix:
    """Numeric design with intercept first, plus its response vector.

    ``categories`` records, per categorical term, the baseline and the
    non-baseline levels that became indicator columns, so a later design
    for prediction can reuse exactly the same encoding.
    """

    column_labels: tuple
    values: np.ndarray
    response: np.ndarray
    categories: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def n_slopes(self) -> int:
        return self.values.shape[1] - 1


def _level_string(term, value):
    if term == "Year":
        return str(int(value))
    return str(value)


def build_design(d: Dataset, spec: ModelSpec, scores=None,
                 categories: dict | None = None,
                 require_response: bool = True) -> DesignMatrix:
    """Construct the design matrix for a model spec on a dataset.

    Each categorical with L observed levels expands to L-1 indicators named
    ``<term><level>`` with the declared baseline omitted.  When
    ``categories`` (from a previous design) is supplied, the same columns
    are produced and an unseen level raises an encoding error.  Factor
    columns come from ``scores`` (an n x k array, columns Factor1..k) when
    given, else from same-named dataset columns.
    """
    frame = d.frame
    n = len(frame)
    labels = ["(Intercept)"]
    columns = [np.ones(n)]
    used_categories = {}

    for term in spec.numeric_terms:
        if term not in frame.columns:
            raise ShapeError(f"model {spec.name!r}: missing column {term!r}")
        columns.append(frame[term].to_numpy(dtype=float))
        labels.append(term)

    for term, baseline in spec.categorical_terms.items():
        if term not in frame.columns:
            raise ShapeError(f"model {spec.name!r}: missing column {term!r}")
        observed = [_level_string(term, v) for v in frame[term]]
        if categories is not None and term in categories:
            base, levels = categories[term]
            known = set(levels) | {base}
            unseen = sorted(set(observed) - known)
            if unseen:
                raise EncodingError(
                    f"model {spec.name!r}: level(s) {unseen} of {term!r} "
                    f"were not present when the design was built"
                )
        else:
            base = _level_string(term, baseline)
            present = set(observed)
            if base not in present:
                raise DomainError(
                    f"model {spec.name!r}: baseline {base!r} of {term!r} "
                    f"not observed in the data"
                )
            try:
                canonical = [_level_string(term, l)
                             for l in schema.categorical_levels(term)]
                levels = tuple(l for l in canonical
                               if l in present and l != base)
            except KeyError:
                levels = tuple(sorted(present - {base}))
        for level in levels:
            indicator = np.array([1.0 if v == level else 0.0 for v in observed])
            columns.append(indicator)
            labels.append(f"{term}{level}")
        used_categories[term] = (base, tuple(levels))

    if spec.factor_terms:
        if scores is not None:
            scores = np.asarray(scores, dtype=float)
            score_labels = [f"Factor{j + 1}" for j in range(scores.shape[1])]
            if scores.shape[0] != n:
                raise ShapeError("score matrix row count does not match dataset")
            lookup = dict(zip(score_labels, scores.T))
        else:
            lookup = {c: frame[c] for c in frame.columns}
        for term in spec.factor_terms:
            if term not in lookup:
                raise ShapeError(f"model {spec.name!r}: missing factor {term!r}")
            columns.append(np.asarray(lookup[term], dtype=float))
            labels.append(term)

    if spec.response in frame.columns:
        response = frame[spec.response].to_numpy(dtype=float)
    elif require_response:
        raise ShapeError(f"model {spec.name!r}: missing response {spec.response!r}")
    else:
        response = np.full(n, np.nan)
    values = np.column_stack(columns)
    if np.isnan(values).any() or (require_response and np.isnan(response).any()):
        raise DomainError(
            f"model {spec.name!r}: design contains missing values; "
            "filter with drop_missing first"
        )
    return DesignMatrix(column_labels=tuple(labels), values=values,
                        response=response, categories=used_categories)


@dataclass(frozen=True)
class RegressionFit:
    """OLS estimates and inference statistics for one design."""

    column_labels: tuple
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    r_squared: float
    adj_r_squared: float
    f_statistic: float
    f_dof: tuple
    f_p_value: float
    residual_std_error: float
    residual_dof: int
    n: int
    p: int
    categories: dict = field(default_factory=dict)

    @property
    def s_squared(self) -> float:
        return self.residual_std_error ** 2


def ols_fit(x: DesignMatrix) -> RegressionFit:
    """Fit ordinary least squares by QR decomposition with full inference.

    The residual variance uses divisor n minus the number of estimated
    coefficients (intercept included); standard errors come from the
    R-factor back-substitution rather than an explicit normal-equations
    inverse.
    """
    values, y = x.values, x.response
    n, n_coef = values.shape
    p = n_coef - 1
    if n <= n_coef:
        raise DomainError(
            f"need more observations ({n}) than coefficients ({n_coef})"
        )
    q, r = np.linalg.qr(values)
    diag = np.abs(np.diag(r))
    scale = diag.max() if diag.size else 0.0
    if scale == 0.0 or diag.min() == 0.0 or scale / diag.min() > _COND_LIMIT:
        suspects = [x.column_labels[j] for j in np.flatnonzero(
            diag <= scale / _COND_LIMIT
        )]
        raise CollinearityError(
            f"design matrix is rank deficient; dependent columns: {suspects}",
            columns=suspects,
        )
    coefficients = solve_triangular(r, q.T @ y)
    residuals = y - values @ coefficients
    rss = float(residuals @ residuals)
    dof = n - n_coef
    s_squared = rss / dof
    r_inv = solve_triangular(r, np.eye(n_coef))
    xtx_inv = r_inv @ r_inv.T
    variances = s_squared * np.diag(xtx_inv)
    std_errors = np.sqrt(np.clip(variances, 0.0, None))

    t_values = np.empty(n_coef)
    p_values = np.empty(n_coef)
    for j in range(n_coef):
        if std_errors[j] > 0.0:
            t_values[j] = coefficients[j] / std_errors[j]
            p_values[j] = 2.0 * (1.0 - t_cdf(abs(t_values[j]), dof))
        else:
            # zero-variance fit: a nonzero coefficient is infinitely precise
            t_values[j] = math.inf * coefficients[j] if coefficients[j] else 0.0
            p_values[j] = 0.0 if coefficients[j] else 1.0

    sst = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - rss / sst if sst > 0.0 else 0.0
    r_squared = min(max(r_squared, 0.0), 1.0)
    adj_r_squared = 1.0 - (1.0 - r_squared) * (n - 1) / dof if p >= 1 else r_squared
    if p >= 1 and r_squared < 1.0:
        f_statistic = (r_squared / p) / ((1.0 - r_squared) / dof)
        f_p_value = 1.0 - f_cdf(f_statistic, p, dof)
    elif p >= 1:
        f_statistic = math.inf
        f_p_value = 0.0
    else:
        f_statistic = math.nan
        f_p_value = math.nan

    return RegressionFit(
        column_labels=x.column_labels,
        coefficients=coefficients,
        std_errors=std_errors,
        t_values=t_values,
        p_values=p_values,
        r_squared=r_squared,
        adj_r_squared=adj_r_squared,
        f_statistic=f_statistic,
        f_dof=(p, dof),
        f_p_value=f_p_value,
        residual_std_error=math.sqrt(s_squared),
        residual_dof=dof,
        n=n,
        p=p,
        categories=dict(x.categories),
    )


def predict_log(fit: RegressionFit, x: DesignMatrix) -> np.ndarray:
    """Linear predictions on the log scale."""
    if x.column_labels != fit.column_labels:
        raise ShapeError(
            f"design columns {x.column_labels} do not match the fit's "
            f"{fit.column_labels}"
        )
    return x.values @ fit.coefficients


def predict_dollars(fit: RegressionFit, x: DesignMatrix) -> np.ndarray:
    """Bias-corrected dollar predictions: exp(log prediction + s^2 / 2)."""
    return np.exp(predict_log(fit, x) + fit.s_squared / 2.0)


def r2_out_of_sample(actual_log, predicted_log) -> float:
    """1 - SSE/SST on held-out data; can be negative for bad models."""
    actual = np.asarray(actual_log, dtype=float)
    predicted = np.asarray(predicted_log, dtype=float)
    if actual.shape != predicted.shape or actual.ndim != 1 or actual.size < 2:
        raise ShapeError("actual and predicted must be equal-length vectors (>= 2)")
    sst = float(np.sum((actual - actual.mean()) ** 2))
    if sst == 0.0:
        raise DegenerateInputError("actual values are constant; R2 undefined")
    sse = float(np.sum((actual - predicted) ** 2))
    return 1.0 - sse / sst


@dataclass(frozen=True)
class EvaluationRow:
    """One line of the model-comparison table."""

    name: str
    fit: RegressionFit
    train_r2: float
    validation_r2: float
    test_r2: float | None = None
    full_fit: RegressionFit | None = None


def evaluate(spec: ModelSpec, split: SplitResult, selected: bool = False,
             full_dataset: Dataset | None = None) -> EvaluationRow:
    """Fit on train, score on validation (and on test when selected).

    Factor score columns must already be attached to the datasets.  When
    ``selected`` a full-data refit is included (the model that would be
    shipped).
    """
    train_design = build_design(split.train, spec)
    fit = ols_fit(train_design)

    def oos(part):
        design = build_design(part, spec, categories=train_design.categories)
        return r2_out_of_sample(design.response, predict_log(fit, design))

    validation_r2 = oos(split.validation)
    test_r2 = oos(split.test) if selected else None
    full_fit = None
    if selected and full_dataset is not None:
        full_fit = ols_fit(build_design(full_dataset, spec))
    return EvaluationRow(name=spec.name, fit=fit, train_r2=fit.r_squared,
                         validation_r2=validation_r2, test_r2=test_r2,
                         full_fit=full_fit)


def format_p_value(p: float) -> str:
    """Human-report convention: very small p-values print as an inequality."""
    return "< 2.2e-16" if p < 2.2e-16 else f"{p:.6g}"


def write_fit_report(fit: RegressionFit, stream, delimiter: str = "\t",
                     human: bool = False) -> None:
    """Two-block report: summary statistics, then the coefficient table."""
    w = stream.write
    w(delimiter.join(("Item", "Value", "DoF")) + "\n")
    w(delimiter.join(("Residual standard error",
                      f"{fit.residual_std_error:.6g}",
                      str(fit.residual_dof))) + "\n")
    w(delimiter.join(("Multiple R-squared", f"{fit.r_squared:.6g}", "")) + "\n")
    w(delimiter.join(("Adjusted R-squared", f"{fit.adj_r_squared:.6g}", "")) + "\n")
    w(delimiter.join(("F-statistic", f"{fit.f_statistic:.6g}",
                      f"{fit.f_dof[0]} and {fit.f_dof[1]}")) + "\n")
    p_text = format_p_value(fit.f_p_value) if human else f"{fit.f_p_value:.6g}"
    w(delimiter.join(("p-Value", p_text, "")) + "\n")
    w("\n")
    w(delimiter.join(("Coefficients:", "Estimate", "Std. Error", "t-Value",
                      "Pr(>|t|)")) + "\n")
    for j, label in enumerate(fit.column_labels):
        p_cell = (format_p_value(fit.p_values[j]) if human
                  else f"{fit.p_values[j]:.6g}")
        w(delimiter.join((label,
                          f"{fit.coefficients[j]:.6g}",
                          f"{fit.std_errors[j]:.6g}",
                          f"{fit.t_values[j]:.6g}",
                          p_cell)) + "\n")


class LogLinearRegressor(BaseEstimator, RegressorMixin):
    """OLS on a log-scale response behind a fit/predict API.

    ``predict`` returns log-scale values; ``predict_dollars`` applies the
    half-variance correction and exponentiates.  Input is a plain numeric
    matrix (no intercept column; one is added internally).
    """

    def __init__(self):
        pass

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ShapeError("X must be 2-D and aligned with 1-D y")
        labels = ("(Intercept)",) + tuple(f"x{j + 1}" for j in range(X.shape[1]))
        design = DesignMatrix(
            column_labels=labels,
            values=np.column_stack([np.ones(X.shape[0]), X]),
            response=y,
        )
        self.fit_ = ols_fit(design)
        return self

    def _design(self, X):
        X = np.asarray(X, dtype=float)
        return DesignMatrix(
            column_labels=self.fit_.column_labels,
            values=np.column_stack([np.ones(X.shape[0]), X]),
            response=np.zeros(X.shape[0]),
        )

    def predict(self, X):
        return predict_log(self.fit_, self._design(X))

    def predict_dollars(self, X):
        return predict_dollars(self.fit_, self._design(X))
