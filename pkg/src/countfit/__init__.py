"""countfit: count-data regression with rootogram and residual diagnostics.

Fit Poisson, negative binomial, hurdle, zero-truncated, and finite-mixture
count regressions by maximum likelihood, then judge them with weighted
rootograms, randomized quantile residuals, Pearson residuals, and parametric
bootstrap bands.
"""

from .datasets import load_crabs, load_dataset, load_nmes1988, load_takeover_bids
from .diagnostics import (
    BootstrapBand,
    DiagnosticSeries,
    QQCoordinates,
    bootstrap_band,
    pearson_residuals,
    qq_coordinates,
    quantile_residuals,
    warning_limits,
)
from .families import (
    DomainError,
    FamilySpec,
    count_cdf,
    count_pmf,
    count_sample,
    family_mean,
    family_variance,
    zt_pmf,
)
from .fitting import (
    ConvergenceError,
    DesignMatrix,
    FitError,
    FittedModel,
    HurdleDistribution,
    HurdleFit,
    RankDeficientError,
    SeparationError,
    fit_glm,
    fit_hurdle,
    fit_zerotrunc,
    information_criteria,
    model_covariance,
    predict_distribution,
    predict_mean,
)
from .formula import (
    DataTable,
    FormulaAst,
    ParseError,
    TableError,
    build_design,
    parse_formula,
    read_table,
)
from .mixture import DegenerateComponentError, MixtureFit, fit_mixture
from .rootogram import (
    BreakSpec,
    FrequencyTable,
    RootogramCoords,
    expected_frequencies,
    frequency_table,
    layout_rootogram,
    observed_frequencies,
)
from .svg import render_pearson_svg, render_qq_svg, render_rootogram_svg, render_svg

__version__ = "0.1.0"

__all__ = [
    "BootstrapBand",
    "BreakSpec",
    "ConvergenceError",
    "DataTable",
    "DegenerateComponentError",
    "DesignMatrix",
    "DiagnosticSeries",
    "DomainError",
    "FamilySpec",
    "FitError",
    "FittedModel",
    "FormulaAst",
    "FrequencyTable",
    "HurdleDistribution",
    "HurdleFit",
    "MixtureFit",
    "ParseError",
    "QQCoordinates",
    "RankDeficientError",
    "RootogramCoords",
    "SeparationError",
    "TableError",
    "bootstrap_band",
    "build_design",
    "count_cdf",
    "count_pmf",
    "count_sample",
    "expected_frequencies",
    "family_mean",
    "family_variance",
    "fit_glm",
    "fit_hurdle",
    "fit_mixture",
    "fit_zerotrunc",
    "frequency_table",
    "information_criteria",
    "layout_rootogram",
    "load_crabs",
    "load_dataset",
    "load_nmes1988",
    "load_takeover_bids",
    "model_covariance",
    "observed_frequencies",
    "parse_formula",
    "pearson_residuals",
    "predict_distribution",
    "predict_mean",
    "qq_coordinates",
    "quantile_residuals",
    "read_table",
    "render_pearson_svg",
    "render_qq_svg",
    "render_rootogram_svg",
    "render_svg",
    "warning_limits",
    "zt_pmf",
]
