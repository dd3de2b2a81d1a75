"""Exploratory factor analysis on a correlation matrix.

Extraction is the minimum-residual (unweighted least squares) method,
implemented by iterating on communalities: the current communalities are
placed on the diagonal of R, the top-k eigenpairs of the reduced matrix
give the loadings, and the loadings give the next communalities.  The
method never inverts R and tolerates indefinite matrices, which pairwise
tetrachoric matrices frequently are.

Rotation is varimax by pairwise planar sweeps, with optional Kaiser
normalization (on by default).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .correlation import CorrelationMatrix, tetrachoric_matrix
from .errors import DegenerateInputError, DomainError, ShapeError


def eigen_symmetric(m):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Returns (eigenvalues, eigenvectors) with orthonormal eigenvectors in
    columns.  Each eigenvector's sign is fixed so its largest-magnitude
    component is positive, making the output deterministic.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {m.shape}")
    if not np.allclose(m, m.T, atol=1e-10):
        raise ShapeError("matrix is not symmetric within 1e-10")
    eigenvalues, eigenvectors = np.linalg.eigh((m + m.T) / 2.0)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = eigenvalues[order]
    eigenvectors = eigenvectors[:, order]
    for j in range(eigenvectors.shape[1]):
        pivot = np.argmax(np.abs(eigenvectors[:, j]))
        if eigenvectors[pivot, j] < 0:
            eigenvectors[:, j] = -eigenvectors[:, j]
    return eigenvalues, eigenvectors


def count_kaiser(eigenvalues) -> int:
    """Number of eigenvalues strictly greater than one."""
    return int(np.sum(np.asarray(eigenvalues, dtype=float) > 1.0))


@dataclass(frozen=True)
class FactorModel:
    """Loadings and bookkeeping of one extraction (optionally rotated).

    ``rotation`` maps the unrotated loadings to ``loadings``; it is the
    identity for an unrotated model.  ``sweep_criteria`` records the
    varimax criterion after each full sweep (empty when unrotated).
    """

    labels: tuple
    loadings: np.ndarray          # p x k
    communalities: np.ndarray     # p
    rotation: np.ndarray          # k x k orthogonal
    proportion_var: np.ndarray    # k
    cumulative_var: np.ndarray    # k
    objective: float
    converged: bool = True
    iterations: int = 0
    heywood: tuple = ()
    sweep_criteria: tuple = ()

    @property
    def n_factors(self) -> int:
        return self.loadings.shape[1]

    @property
    def n_variables(self) -> int:
        return self.loadings.shape[0]


def minres_objective(r_values, loadings) -> float:
    """Sum of squared off-diagonal residuals of R minus the common part."""
    residual = r_values - loadings @ loadings.T
    off = residual[~np.eye(residual.shape[0], dtype=bool)]
    return float(np.sum(off ** 2))


def _initial_communalities(r_values):
    """Squared multiple correlations when R is invertible, else 0.5."""
    p = r_values.shape[0]
    try:
        inverse = np.linalg.inv(r_values)
        diag = np.diag(inverse)
        if np.any(diag <= 0) or np.linalg.cond(r_values) > 1e10:
            raise np.linalg.LinAlgError
        smc = 1.0 - 1.0 / diag
        return np.clip(smc, 0.0, 1.0)
    except np.linalg.LinAlgError:
        return np.full(p, 0.5)


def _loadings_from_communalities(r_values, communalities, k):
    reduced = r_values.copy()
    np.fill_diagonal(reduced, communalities)
    eigenvalues, eigenvectors = eigen_symmetric(reduced)
    lam = eigenvectors[:, :k] * np.sqrt(np.clip(eigenvalues[:k], 0.0, None))
    return lam


def canonicalize(loadings):
    """Apply the deterministic sign/order convention.

    Factors are ordered by descending sum of squared loadings and each
    column is flipped so its largest-magnitude entry is positive.  Returns
    (loadings, transform) with transform the signed permutation applied on
    the right.
    """
    loadings = np.asarray(loadings, dtype=float)
    k = loadings.shape[1]
    ssq = np.sum(loadings ** 2, axis=0)
    order = np.argsort(-ssq, kind="stable")
    transform = np.zeros((k, k))
    for new_j, old_j in enumerate(order):
        column = loadings[:, old_j]
        sign = 1.0 if column[np.argmax(np.abs(column))] >= 0 else -1.0
        transform[old_j, new_j] = sign
    return loadings @ transform, transform


def variance_explained(loadings, p):
    """Per-factor proportion of total variance and its running sum."""
    loadings = np.asarray(loadings, dtype=float)
    proportion = np.sum(loadings ** 2, axis=0) / p
    return proportion, np.cumsum(proportion)


def minres_extract(r: CorrelationMatrix, k: int,
                   tol: float = 1e-6, max_iter: int = 1000) -> FactorModel:
    """Extract k factors from a correlation matrix by minimum residuals.

    The returned loadings follow the canonical sign/order convention;
    communalities above 1 are clipped and the variable flagged (Heywood
    case) rather than aborting.
    """
    values = r.values
    p = r.size
    if not 1 <= k < p:
        raise DomainError(f"factor count must satisfy 1 <= k < {p}, got {k}")
    if not np.all(np.diag(values) == 1.0):
        raise DomainError("correlation matrix must have a unit diagonal")

    communalities = _initial_communalities(values)
    lam = _loadings_from_communalities(values, communalities, k)
    best = (minres_objective(values, lam), lam, communalities)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        lam = _loadings_from_communalities(values, communalities, k)
        new_comm = np.clip(np.sum(lam ** 2, axis=1), 0.0, 1.0)
        objective = minres_objective(values, lam)
        if objective < best[0]:
            best = (objective, lam, new_comm)
        if np.max(np.abs(new_comm - communalities)) < tol:
            communalities = new_comm
            converged = True
            break
        communalities = new_comm

    objective, lam, communalities = best
    heywood = tuple(
        r.labels[i] for i in np.flatnonzero(np.sum(lam ** 2, axis=1) > 1.0 + 1e-10)
    )
    lam, _ = canonicalize(lam)
    proportion, cumulative = variance_explained(lam, p)
    return FactorModel(
        labels=r.labels,
        loadings=lam,
        communalities=np.clip(np.sum(lam ** 2, axis=1), 0.0, 1.0),
        rotation=np.eye(k),
        proportion_var=proportion,
        cumulative_var=cumulative,
        objective=objective,
        converged=converged,
        iterations=iterations,
        heywood=heywood,
    )


def varimax_criterion(loadings) -> float:
    """Sum over factors of the variance of the squared loadings."""
    squared = np.asarray(loadings, dtype=float) ** 2
    return float(np.sum(np.var(squared, axis=0)))


def varimax(model: FactorModel, kaiser_normalize: bool = True,
            tol: float = 1e-8, max_sweeps: int = 50) -> FactorModel:
    """Rotate a factor model to the varimax criterion by pairwise sweeps.

    Communalities (row sums of squared loadings) are invariant under the
    orthogonal rotation; a one-factor model is returned unchanged.
    """
    if model.n_factors < 2:
        return model
    p, k = model.loadings.shape
    weights = np.sqrt(np.clip(model.communalities, 0.0, None))
    if kaiser_normalize:
        safe = np.where(weights > 1e-12, weights, 1.0)
    else:
        safe = np.ones(p)
    working = model.loadings / safe[:, None]
    rotation = np.eye(k)
    sweep_criteria = [varimax_criterion(working)]

    for _ in range(max_sweeps):
        for a in range(k - 1):
            for b in range(a + 1, k):
                x = working[:, a]
                y = working[:, b]
                u = x ** 2 - y ** 2
                v = 2.0 * x * y
                big_a = np.sum(u)
                big_b = np.sum(v)
                big_c = np.sum(u ** 2 - v ** 2)
                big_d = 2.0 * np.sum(u * v)
                numerator = big_d - 2.0 * big_a * big_b / p
                denominator = big_c - (big_a ** 2 - big_b ** 2) / p
                angle = 0.25 * np.arctan2(numerator, denominator)
                if abs(angle) < 1e-12:
                    continue
                c, s = np.cos(angle), np.sin(angle)
                givens = np.array([[c, -s], [s, c]])
                working[:, [a, b]] = working[:, [a, b]] @ givens
                rotation[:, [a, b]] = rotation[:, [a, b]] @ givens
        sweep_criteria.append(varimax_criterion(working))
        if sweep_criteria[-1] - sweep_criteria[-2] < tol:
            break

    rotated = (working * safe[:, None])
    rotated, transform = canonicalize(rotated)
    rotation = model.rotation @ rotation @ transform
    proportion, cumulative = variance_explained(rotated, p)
    return replace(
        model,
        loadings=rotated,
        rotation=rotation,
        proportion_var=proportion,
        cumulative_var=cumulative,
        sweep_criteria=tuple(sweep_criteria),
    )


def factor_score_weights(r: CorrelationMatrix, model: FactorModel,
                         ridge_grid=(0.0, 1e-8, 1e-6, 1e-4, 1e-2)):
    """Regression (Thurstone) scoring weights W = (R + eps*I)^-1 Lambda.

    eps is the smallest ridge from ``ridge_grid`` that makes the matrix
    invertible with condition number below 1e12.
    """
    if model.n_variables != r.size:
        raise ShapeError("factor model and correlation matrix disagree on p")
    values = r.values
    for eps in ridge_grid:
        stabilized = values + eps * np.eye(r.size)
        if np.linalg.cond(stabilized) < 1e12:
            return np.linalg.solve(stabilized, model.loadings)
    raise DegenerateInputError(
        "correlation matrix not invertible even with the largest ridge"
    )


def factor_scores(z, r: CorrelationMatrix, model: FactorModel,
                  ridge_grid=(0.0, 1e-8, 1e-6, 1e-4, 1e-2)):
    """Factor scores z @ W for standardized indicator rows z."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 2 or z.shape[1] != r.size:
        raise ShapeError(
            f"indicator matrix has {z.shape[1] if z.ndim == 2 else '?'} columns, "
            f"expected {r.size}"
        )
    return z @ factor_score_weights(r, model, ridge_grid)


def write_factor_model(model: FactorModel, stream, delimiter: str = ",",
                       display_threshold: float | None = None) -> None:
    """Serialize loadings plus the two variance rows.

    With a display threshold, loadings of smaller magnitude print as empty
    cells (human-readable report); without one every value is written.
    """
    k = model.n_factors
    header = ["LOADINGS"] + [f"Factor{j + 1}" for j in range(k)]
    stream.write(delimiter.join(header) + "\n")
    for label, row in zip(model.labels, model.loadings):
        cells = [label]
        for value in row:
            if display_threshold is not None and abs(value) < display_threshold:
                cells.append("")
            else:
                cells.append(f"{value:.6f}")
        stream.write(delimiter.join(cells) + "\n")
    for name, values in (("Proportion Var", model.proportion_var),
                         ("Cumulative Var", model.cumulative_var)):
        cells = [name] + [f"{v:.6f}" for v in values]
        stream.write(delimiter.join(cells) + "\n")


def write_edges(model: FactorModel, stream, delimiter: str = ",",
                threshold: float = 0.1) -> None:
    """Edge list (variable, factor, loading, sign) for loadings above threshold."""
    stream.write(delimiter.join(("variable", "factor", "loading", "sign")) + "\n")
    for i, label in enumerate(model.labels):
        for j in range(model.n_factors):
            value = model.loadings[i, j]
            if abs(value) >= threshold:
                sign = "positive" if value >= 0 else "negative"
                stream.write(
                    delimiter.join(
                        (label, f"Factor{j + 1}", f"{value:.6f}", sign)
                    ) + "\n"
                )


class GenreFactorAnalysis(BaseEstimator, TransformerMixin):
    """Factor analysis of binary indicator columns behind a fit/transform API.

    ``fit`` estimates the tetrachoric correlation matrix of the binary
    inputs and extracts ``n_factors`` minres factors (varimax-rotated by
    default); ``transform`` returns per-row regression factor scores.

    Parameters
    ----------
    n_factors : int
        Number of factors to extract.
    rotate : bool
        Apply varimax rotation after extraction.
    kaiser_normalize : bool
        Normalize rows by communalities during rotation.
    """

    def __init__(self, n_factors=8, rotate=True, kaiser_normalize=True):
        self.n_factors = n_factors
        self.rotate = rotate
        self.kaiser_normalize = kaiser_normalize

    def fit(self, X, y=None):
        X, labels = _as_binary_matrix(X)
        self.labels_ = labels
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        if np.any(std == 0.0):
            dead = [labels[i] for i in np.flatnonzero(std == 0.0)]
            raise DegenerateInputError(f"constant binary columns: {dead}")
        self.std_ = std
        self.correlation_ = tetrachoric_matrix(
            [X[:, j] for j in range(X.shape[1])], labels
        )
        self.eigenvalues_, _ = eigen_symmetric(self.correlation_.values)
        self.kaiser_count_ = count_kaiser(self.eigenvalues_)
        model = minres_extract(self.correlation_, self.n_factors)
        if self.rotate and self.n_factors >= 2:
            model = varimax(model, kaiser_normalize=self.kaiser_normalize)
        self.model_ = model
        self.loadings_ = model.loadings
        return self

    def transform(self, X):
        if not hasattr(self, "model_"):
            raise RuntimeError("fit must be called before transform")
        X, _ = _as_binary_matrix(X, expected_labels=self.labels_)
        z = (X - self.mean_) / self.std_
        return factor_scores(z, self.correlation_, self.model_)


def _as_binary_matrix(X, expected_labels=None):
    """Coerce a DataFrame or array of 0/1 flags to a float matrix."""
    labels = None
    if hasattr(X, "columns"):
        labels = tuple(str(c) for c in X.columns)
        X = X.to_numpy()
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ShapeError("binary indicator input must be 2-D")
    if labels is None:
        labels = tuple(f"V{j + 1}" for j in range(X.shape[1]))
    if expected_labels is not None:
        if len(labels) != len(expected_labels):
            raise ShapeError(
                f"expected {len(expected_labels)} columns, got {len(labels)}"
            )
    if not np.isin(X, (0.0, 1.0)).all():
        raise DomainError("indicator values must be exactly 0 or 1")
    return X, labels
