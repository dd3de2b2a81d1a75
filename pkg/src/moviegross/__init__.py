"""Movie gross-revenue modeling toolkit.

Genre structure is summarized by factor analysis of tetrachoric
correlations; revenue is modeled by OLS on log dollars with a
bias-corrected back-transform to dollars.
"""

from .correlation import (
    ContingencyTable,
    CorrelationMatrix,
    TetrachoricEstimate,
    bivariate_normal_cdf,
    contingency_2x2,
    pearson_matrix,
    std_normal_quantile,
    tetrachoric,
    tetrachoric_matrix,
)
from .dataset import (
    Dataset,
    FilterConfig,
    SplitResult,
    apply_filters,
    drop_empty_genres,
    log_transform,
    parse_dataset,
    split,
)
from .efa import (
    FactorModel,
    GenreFactorAnalysis,
    count_kaiser,
    eigen_symmetric,
    factor_scores,
    minres_extract,
    variance_explained,
    varimax,
)
from .errors import (
    CollinearityError,
    ConvergenceError,
    DegenerateInputError,
    DomainError,
    EncodingError,
    MovieGrossError,
    SchemaError,
    ShapeError,
)
from .pipeline import Pipeline, PipelineConfig, load_config
from .regress import (
    DesignMatrix,
    LogLinearRegressor,
    ModelSpec,
    RegressionFit,
    build_design,
    evaluate,
    f_cdf,
    ols_fit,
    predict_dollars,
    predict_log,
    r2_out_of_sample,
    t_cdf,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
