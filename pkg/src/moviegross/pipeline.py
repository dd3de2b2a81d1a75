"""File-based orchestration of the analysis pipeline.

Each command reads its inputs from the output directory of the previous
stage and writes delimited artifacts plus a JSON run manifest, so stages
can be rerun independently.  Apart from the manifests (which carry
timestamps), every artifact is byte-reproducible for a fixed config,
input, and seed.
"""

from __future__ import annotations

import datetime
import io
import json
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import schema
from .dataset import (
    Dataset,
    FilterConfig,
    apply_filters,
    drop_empty_genres,
    log_transform,
    parse_dataset,
    split,
    write_filter_report,
)
from .correlation import pearson_matrix, tetrachoric_matrix
from .efa import (
    GenreFactorAnalysis,
    count_kaiser,
    eigen_symmetric,
    factor_score_weights,
    write_edges,
    write_factor_model,
)
from .errors import DegenerateInputError, DomainError, MovieGrossError
from .regress import (
    ModelSpec,
    build_design,
    evaluate,
    ols_fit,
    predict_dollars,
    predict_log,
    r2_out_of_sample,
    write_fit_report,
)

EXIT_OK = 0
EXIT_ERROR = 1


@dataclass(frozen=True)
class PipelineConfig:
    """Flat configuration; every field maps to a ``key = value`` config line
    and to a same-named CLI flag."""

    input: str = ""
    delimiter: str = ","
    output_dir: str = "out"
    seed: int = 2016
    ratio_train: float = 0.6
    ratio_validation: float = 0.2
    ratio_test: float = 0.2
    year_min: int = 2010
    year_max: int = 2015
    min_gross: float = 1_000_000.0
    gross_cap: float = 6.0e8
    required_mpaa: str = "PG,PG-13,R"
    drop_missing: bool = True
    n_factors: int = 8
    varimax: bool = True
    kaiser_normalize: bool = True
    display_threshold: float = 0.1
    post_release_factors: str = "1,2,3,4"
    format: str = "delimited"

    def __post_init__(self):
        if self.n_factors < 1:
            raise DomainError("n_factors must be >= 1")
        total = self.ratio_train + self.ratio_validation + self.ratio_test
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"split ratios must sum to 1, got {total}")

    @property
    def ratios(self):
        return (self.ratio_train, self.ratio_validation, self.ratio_test)

    def filter_config(self) -> FilterConfig:
        return FilterConfig(
            year_range=(self.year_min, self.year_max),
            min_gross=self.min_gross,
            gross_cap=self.gross_cap,
            required_mpaa=frozenset(
                s.strip() for s in self.required_mpaa.split(",") if s.strip()
            ),
            drop_missing=self.drop_missing,
        )

    def post_factor_terms(self):
        indices = [int(s) for s in self.post_release_factors.split(",") if s.strip()]
        return tuple(f"Factor{i}" for i in indices)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_BOOL_KEYS = {"drop_missing", "varimax", "kaiser_normalize"}
_INT_KEYS = {"seed", "year_min", "year_max", "n_factors"}
_FLOAT_KEYS = {"ratio_train", "ratio_validation", "ratio_test", "min_gross",
               "gross_cap", "display_threshold"}


def parse_config_text(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    """Parse ``key = value`` lines ('#' starts a comment) over a base config."""
    values = {}
    known = {f.name for f in fields(PipelineConfig)}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"config line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in known:
            raise DomainError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _coerce_config_value(key, value)
    return replace(base or PipelineConfig(), **values)


def _coerce_config_value(key, value):
    if key in _BOOL_KEYS:
        lowered = value.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise DomainError(f"config key {key!r}: expected a boolean, got {value!r}")
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    return value


def load_config(path, overrides: dict | None = None) -> PipelineConfig:
    config = PipelineConfig()
    if path:
        config = parse_config_text(Path(path).read_text(encoding="utf-8"), config)
    if overrides:
        config = replace(config, **overrides)
    return config


CONTINUOUS_REPORT_COLUMNS = (
    "Runtime", "Vote", "Ratings", "Screens", "Opening.Week", "Budget",
    "Gross.Revenue",
)


class Pipeline:
    """Runs the pipeline commands against one output directory."""

    def __init__(self, config: PipelineConfig, stderr=None):
        self.config = config
        self.out = Path(config.output_dir)
        self.stderr = stderr if stderr is not None else sys.stderr

    # ---------------------------------------------------------------- util

    def warn(self, message: str) -> None:
        self.stderr.write(f"warning: {message}\n")

    def _path(self, name: str) -> Path:
        return self.out / name

    def _write_text(self, name: str, producer) -> Path:
        path = self._path(name)
        buffer = io.StringIO()
        producer(buffer)
        path.write_text(buffer.getvalue(), encoding="utf-8")
        return path

    def _manifest(self, command: str, artifacts, counts=None,
                  started=None) -> Path:
        manifest = {
            "command": command,
            "config": self.config.to_dict(),
            "seed": self.config.seed,
            "counts": counts or {},
            "artifacts": sorted(str(Path(a).name) for a in artifacts),
            "started": started,
            "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        }
        for name in manifest["artifacts"]:
            if not self._path(name).exists():
                raise MovieGrossError(f"manifest lists missing artifact {name}")
        path = self._path(f"manifest_{command}.json")
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
        return path

    def _now(self):
        return datetime.datetime.now(datetime.timezone.utc).isoformat()

    def _load_filtered(self) -> Dataset:
        path = self._path("filtered.csv")
        if not path.exists():
            raise MovieGrossError(
                f"{path} not found; run the ingest command first"
            )
        frame = pd.read_csv(path, sep=self.config.delimiter)
        return Dataset(frame=frame, transform_log=frozenset(schema.LOG_COLUMNS))

    # ------------------------------------------------------------ commands

    def cmd_ingest(self) -> int:
        started = self._now()
        self.out.mkdir(parents=True, exist_ok=True)
        d = parse_dataset(self.config.input, delimiter=self.config.delimiter)
        d, counts = apply_filters(d, self.config.filter_config())
        d, dropped = drop_empty_genres(d)
        counts["dropped_genre_columns"] = len(dropped)
        if d.n > 0:
            d = log_transform(d, [c for c in schema.LOG_COLUMNS
                                  if c in d.column_labels])
        artifacts = [
            self._write_text("filtered.csv",
                             lambda s: d.write(s, self.config.delimiter)),
            self._write_text("filter_report.txt", lambda s: (
                write_filter_report(counts, s),
                s.write(f"dropped_genres = {','.join(dropped)}\n"),
            )),
        ]
        self._manifest("ingest", artifacts, counts, started)
        if d.n == 0:
            self.warn("no records survived filtering; outputs are empty")
        return EXIT_OK

    def cmd_explore(self) -> int:
        started = self._now()
        d = self._load_filtered()
        delimiter = self.config.delimiter
        artifacts = []

        usable = []
        for column in CONTINUOUS_REPORT_COLUMNS:
            values = d.frame[column].to_numpy(dtype=float)
            if np.std(values) == 0.0:
                self.warn(f"column {column!r} is constant; "
                          "excluded from the Pearson matrix")
            else:
                usable.append(column)
        pearson = pearson_matrix(
            [d.frame[c].to_numpy(dtype=float) for c in usable], usable
        )
        artifacts.append(self._write_text(
            "pearson.csv", lambda s: pearson.write(s, delimiter)))

        d, dropped = drop_empty_genres(d)
        for column in dropped:
            self.warn(f"genre {column!r} is empty; dropped")
        genres = d.genre_columns()
        tetra = tetrachoric_matrix(
            [d.frame[c].to_numpy(dtype=float) for c in genres], genres
        )
        artifacts.append(self._write_text(
            "tetrachoric.csv", lambda s: tetra.write(s, delimiter)))

        eigenvalues, _ = eigen_symmetric(tetra.values)
        kaiser = count_kaiser(eigenvalues)

        def write_eigen(s):
            s.write(delimiter.join(("index", "value")) + "\n")
            for i, value in enumerate(eigenvalues, start=1):
                s.write(delimiter.join((str(i), f"{value:.6f}")) + "\n")
            s.write(f"# kaiser_count = {kaiser}\n")

        artifacts.append(self._write_text("eigenvalues.csv", write_eigen))
        self._manifest("explore", artifacts,
                       {"kaiser_count": kaiser, "genres": len(genres)}, started)
        return EXIT_OK

    def cmd_efa(self) -> int:
        started = self._now()
        d = self._load_filtered()
        d, _ = drop_empty_genres(d)
        genres = d.genre_columns()
        delimiter = self.config.delimiter
        analysis = GenreFactorAnalysis(
            n_factors=self.config.n_factors,
            rotate=self.config.varimax,
            kaiser_normalize=self.config.kaiser_normalize,
        )
        genre_frame = d.frame[list(genres)].astype(float)
        analysis.fit(genre_frame)
        if not analysis.model_.converged:
            raise MovieGrossError(
                "factor extraction did not converge within "
                f"{analysis.model_.iterations} iterations"
            )
        scores = analysis.transform(genre_frame)

        model = analysis.model_
        artifacts = [
            self._write_text("loadings.csv",
                             lambda s: write_factor_model(model, s, delimiter)),
            self._write_text("loadings_report.txt", lambda s: write_factor_model(
                model, s, delimiter,
                display_threshold=self.config.display_threshold)),
            self._write_text("edges.csv", lambda s: write_edges(
                model, s, delimiter,
                threshold=self.config.display_threshold)),
        ]

        def write_scores(s):
            header = ["Movie.Name"] + [f"Factor{j + 1}"
                                       for j in range(scores.shape[1])]
            s.write(delimiter.join(header) + "\n")
            for name, row in zip(d.frame["Movie.Name"], scores):
                s.write(delimiter.join(
                    [str(name)] + [f"{v:.10g}" for v in row]) + "\n")

        artifacts.append(self._write_text("scores.csv", write_scores))

        weights = factor_score_weights(analysis.correlation_, analysis.model_)
        scoring = {
            "genre_labels": list(genres),
            "mean": [repr(float(v)) for v in analysis.mean_],
            "std": [repr(float(v)) for v in analysis.std_],
            "weights": [[repr(float(v)) for v in row] for row in weights],
        }
        scoring_path = self._path("scoring.json")
        scoring_path.write_text(
            json.dumps(scoring, indent=2, sort_keys=True) + "\n",
            encoding="utf-8")
        artifacts.append(scoring_path)
        self._manifest("efa", artifacts,
                       {"n_factors": model.n_factors,
                        "heywood": len(model.heywood)}, started)
        return EXIT_OK

    # ------------------------------------------------------------- models

    def _with_scores(self, d: Dataset) -> Dataset:
        path = self._path("scores.csv")
        if not path.exists():
            raise MovieGrossError(f"{path} not found; run the efa command first")
        scores = pd.read_csv(path, sep=self.config.delimiter)
        if len(scores) != d.n:
            raise MovieGrossError(
                "scores.csv row count does not match filtered.csv; rerun efa"
            )
        frame = d.frame.copy()
        for column in scores.columns:
            if column.startswith("Factor"):
                frame[column] = scores[column].to_numpy(dtype=float)
        return Dataset(frame=frame, transform_log=d.transform_log)

    def stage_specs(self, stage: str, d: Dataset) -> list:
        """Built-in model specs for a pipeline stage."""
        factor_terms = tuple(f"Factor{j + 1}"
                             for j in range(self.config.n_factors))
        if stage == "pre-production":
            genres = d.genre_columns()
            m1 = ModelSpec(
                name="M1",
                response="Gross.Revenue",
                numeric_terms=("Sequel", "Budget", "Runtime") + genres,
                categorical_terms={"Year": self.config.year_min,
                                   "Month": "Jan", "MPAA": "PG"},
            )
            m_factor = ModelSpec(
                name="M.Factor",
                response="Gross.Revenue",
                numeric_terms=("Sequel", "Budget", "Runtime"),
                categorical_terms={"MPAA": "PG"},
                factor_terms=factor_terms,
            )
            return [m1, m_factor]
        if stage == "post-release":
            return [ModelSpec(
                name="Mpost.Factor",
                response="Gross.Revenue",
                numeric_terms=("Budget", "Sequel", "Opening.Week", "Ratings"),
                factor_terms=self.config.post_factor_terms(),
            )]
        raise DomainError(f"unknown stage {stage!r}")

    def _selected_name(self, stage: str) -> str:
        return "M.Factor" if stage == "pre-production" else "Mpost.Factor"

    def cmd_fit(self, stage: str) -> int:
        started = self._now()
        d = self._with_scores(self._load_filtered())
        delimiter = self.config.delimiter
        parts = split(d, self.config.ratios, self.config.seed)
        specs = self.stage_specs(stage, d)
        selected_name = self._selected_name(stage)
        rows = []
        artifacts = []
        for spec in specs:
            try:
                row = evaluate(spec, parts, selected=spec.name == selected_name,
                               full_dataset=d)
            except MovieGrossError as exc:
                raise type(exc)(f"model {spec.name!r}: {exc}") from exc
            rows.append(row)
            artifacts.append(self._write_text(
                f"fit_{stage}_{spec.name}.txt",
                lambda s, fit=row.fit: write_fit_report(
                    fit, s, delimiter, human=self.config.format != "delimited")))
            if row.full_fit is not None:
                artifacts.append(self._write_model_artifact(spec, row.full_fit))

        def write_comparison(s):
            s.write(delimiter.join(
                ("model", "slopes", "train_r2", "validation_r2", "test_r2"))
                + "\n")
            for row in rows:
                test = "" if row.test_r2 is None else f"{row.test_r2:.6f}"
                s.write(delimiter.join((
                    row.name, str(row.fit.p), f"{row.train_r2:.6f}",
                    f"{row.validation_r2:.6f}", test)) + "\n")

        artifacts.append(self._write_text(f"comparison_{stage}.csv",
                                          write_comparison))
        counts = {row.name: row.fit.p for row in rows}
        self._manifest(f"fit_{stage.replace('-', '_')}", artifacts, counts,
                       started)
        return EXIT_OK

    def _write_model_artifact(self, spec: ModelSpec, fit) -> Path:
        """Self-describing model file; prediction needs no retraining."""
        artifact = {
            "name": spec.name,
            "response": spec.response,
            "numeric_terms": list(spec.numeric_terms),
            "categorical_terms": {k: str(v)
                                  for k, v in spec.categorical_terms.items()},
            "factor_terms": list(spec.factor_terms),
            "column_labels": list(fit.column_labels),
            "coefficients": [repr(float(c)) for c in fit.coefficients],
            "s_squared": repr(float(fit.s_squared)),
            "residual_dof": fit.residual_dof,
            "n": fit.n,
            "categories": {term: [base, list(levels)]
                           for term, (base, levels) in fit.categories.items()},
            "log_columns": list(schema.LOG_COLUMNS),
        }
        if spec.factor_terms:
            scoring_path = self._path("scoring.json")
            if not scoring_path.exists():
                raise MovieGrossError(
                    f"{scoring_path} not found; run the efa command first"
                )
            artifact["scoring"] = json.loads(
                scoring_path.read_text(encoding="utf-8"))
        path = self._path(f"model_{spec.name}.json")
        path.write_text(json.dumps(artifact, indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
        return path

    def cmd_predict(self, model_path, records_path) -> int:
        started = self._now()
        self.out.mkdir(parents=True, exist_ok=True)
        artifact = json.loads(Path(model_path).read_text(encoding="utf-8"))
        d = parse_dataset(records_path, delimiter=self.config.delimiter)
        response = artifact["response"]
        predict_logs = [c for c in artifact["log_columns"]
                        if c in d.column_labels and c != response]
        d = log_transform(d, predict_logs)

        frame = d.frame.copy()
        if artifact["factor_terms"]:
            scoring = artifact["scoring"]
            genre_labels = scoring["genre_labels"]
            x = frame[genre_labels].to_numpy(dtype=float)
            if np.isnan(x).any():
                raise DomainError("prediction records have missing genre flags")
            mean = np.array([float(v) for v in scoring["mean"]])
            std = np.array([float(v) for v in scoring["std"]])
            weights = np.array([[float(v) for v in row]
                                for row in scoring["weights"]])
            scores = ((x - mean) / std) @ weights
            for j in range(scores.shape[1]):
                frame[f"Factor{j + 1}"] = scores[:, j]
        d = Dataset(frame=frame, transform_log=d.transform_log)

        spec = ModelSpec(
            name=artifact["name"],
            response=response,
            numeric_terms=tuple(artifact["numeric_terms"]),
            categorical_terms=dict(artifact["categorical_terms"]),
            factor_terms=tuple(artifact["factor_terms"]),
        )
        categories = {term: (base, tuple(levels))
                      for term, (base, levels) in artifact["categories"].items()}
        design = build_design(d, spec, categories=categories,
                              require_response=False)
        if tuple(design.column_labels) != tuple(artifact["column_labels"]):
            raise MovieGrossError(
                "rebuilt design columns do not match the model artifact"
            )
        coefficients = np.array([float(c) for c in artifact["coefficients"]])
        s_squared = float(artifact["s_squared"])
        predicted_log = design.values @ coefficients
        predicted_dollars = np.exp(predicted_log + s_squared / 2.0)

        actual_log = frame[response].to_numpy(dtype=float) \
            if response in frame.columns else np.full(d.n, np.nan)
        if response not in d.transform_log:
            with np.errstate(invalid="ignore", divide="ignore"):
                actual_log = np.where(actual_log > 0.0, np.log(actual_log),
                                      np.nan)

        delimiter = self.config.delimiter

        def write_predictions(s):
            s.write(delimiter.join(("Movie.Name", "predicted_log",
                                    "predicted_dollars", "actual_dollars"))
                    + "\n")
            for name, plog, pdollar, alog in zip(
                    frame["Movie.Name"], predicted_log, predicted_dollars,
                    actual_log):
                actual = "" if np.isnan(alog) else f"{np.exp(alog):.2f}"
                s.write(delimiter.join((str(name), f"{plog:.10g}",
                                        f"{pdollar:.2f}", actual)) + "\n")

        artifacts = [self._write_text("predictions.csv", write_predictions)]

        def write_summary(s):
            known = ~np.isnan(actual_log)
            s.write(f"records = {d.n}\n")
            s.write(f"records_with_actuals = {int(known.sum())}\n")
            if known.sum() >= 2 and np.std(actual_log[known]) > 0:
                r2 = r2_out_of_sample(actual_log[known], predicted_log[known])
                mae = float(np.mean(np.abs(
                    np.exp(actual_log[known]) - predicted_dollars[known])))
                s.write(f"r2_log = {r2:.6f}\n")
                s.write(f"mae_dollars = {mae:.2f}\n")

        artifacts.append(self._write_text("prediction_summary.txt",
                                          write_summary))
        self._manifest("predict", artifacts, {"records": d.n}, started)
        return EXIT_OK

    def cmd_all(self) -> int:
        for step in (self.cmd_ingest, self.cmd_explore, self.cmd_efa):
            code = step()
            if code != EXIT_OK:
                return code
        for stage in ("pre-production", "post-release"):
            code = self.cmd_fit(stage)
            if code != EXIT_OK:
                return code
        return self.cmd_predict(self._path("model_Mpost.Factor.json"),
                                self.config.input)
