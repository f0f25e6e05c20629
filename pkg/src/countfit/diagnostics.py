"""Residual diagnostics and rootogram uncertainty calibration.

Randomized quantile residuals map each count through a uniform draw between
consecutive cdf values and then through the standard normal quantile
function; under a correctly specified model they are exactly standard
normal, which makes the Q-Q plot (with its randomization envelope) an honest
goodness-of-fit display for discrete responses.

The bootstrap band quantifies how far hanging-rootogram deviations
``sqrt(exp_j) - sqrt(obs_j)`` wander when the fitted model is true: simulate
responses from the fitted model, recompute the deviations per replication,
and take pointwise quantiles.  By default the fitted expected frequencies
are held fixed and only the observed side is resampled, which reproduces the
classical +/-1 warning limits; ``refit=True`` additionally refits the model
to every replication and recomputes both sides.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .families import DomainError, family_mean, family_variance, log_zero_prob
from .fitting import FitError, HurdleFit
from .rootogram import BreakSpec, expected_frequencies, observed_frequencies


@dataclass(frozen=True)
class DiagnosticSeries:
    """A residual vector plus the fitted means it was computed against.

    Quantile residuals also keep the per-observation cdf bounds and a
    reference to the model they came from, which is what the Q-Q
    randomization envelope needs.
    """

    kind: str
    values: np.ndarray
    fitted_means: np.ndarray
    seed: int | None = None
    cdf_lower: np.ndarray | None = None
    cdf_upper: np.ndarray | None = None
    model: object | None = None


@dataclass(frozen=True)
class QQCoordinates:
    theoretical: np.ndarray
    sample: np.ndarray
    envelope_lower: np.ndarray
    envelope_upper: np.ndarray
    envelope_draws: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "schema": "countfit.qq/1",
            "theoretical": self.theoretical.tolist(),
            "sample": self.sample.tolist(),
            "envelope_lower": self.envelope_lower.tolist(),
            "envelope_upper": self.envelope_upper.tolist(),
            "envelope_draws": self.envelope_draws,
            "seed": self.seed,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


@dataclass(frozen=True)
class BootstrapBand:
    """Pointwise quantile band for hanging-rootogram deviations."""

    bins: BreakSpec
    lower: np.ndarray
    upper: np.ndarray
    levels: tuple[float, float]
    replications: int
    seed: int
    failures: int = 0

    def to_dict(self) -> dict:
        return {
            "schema": "countfit.band/1",
            "bin_centers": self.bins.centers.tolist(),
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "levels": list(self.levels),
            "replications": self.replications,
            "seed": self.seed,
            "failures": self.failures,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def warning_limits() -> tuple[float, float]:
    """The constant +/-1 reference limits for square-root-scale deviations."""
    return (-1.0, 1.0)


def quantile_residuals(model, seed: int = 0) -> DiagnosticSeries:
    """Randomized quantile residuals of a fitted model on its own data.

    For each observation draws u ~ Uniform(F(y-1), F(y)) and returns the
    standard normal quantile of u; deterministic given ``seed``.
    """
    y = np.asarray(model.response, dtype=float)
    n = y.size
    j_max = int(y.max())
    grid = np.arange(-1, j_max + 1)
    F = model.cdf_matrix(grid)  # column c holds F(grid[c])
    yi = y.astype(int)
    rows = np.arange(n)
    upper = F[rows, yi + 1]
    lower = F[rows, yi]
    gap = upper - lower
    if np.any(gap <= 0):
        bad = int(np.argmax(gap <= 0))
        raise FitError(
            f"degenerate cdf interval at observation {bad}: "
            f"F({yi[bad]}) - F({yi[bad] - 1}) = {gap[bad]:.3g}"
        )
    rng = np.random.default_rng(seed)
    u = rng.uniform(lower, upper)
    means = _fitted_means(model)
    return DiagnosticSeries(
        kind="quantile",
        values=ndtri(u),
        fitted_means=means,
        seed=seed,
        cdf_lower=lower,
        cdf_upper=upper,
        model=model,
    )


def _fitted_means(model):
    if isinstance(model, HurdleFit):
        p0 = model.zero_probabilities()
        mu_c = model.count_mu()
        base = "poisson" if model.count_part.family == "zt_poisson" else "negbin"
        f0 = np.exp(log_zero_prob(base, mu_c, model.count_part.theta))
        return (1.0 - p0) * mu_c / (1.0 - f0)
    if hasattr(model, "mixing_weights"):
        return model.component_mu() @ model.mixing_weights
    return np.asarray(model.fitted_mu, dtype=float)


def qq_coordinates(residuals: DiagnosticSeries, envelope_draws: int = 1000,
                   seed: int = 0) -> QQCoordinates:
    """Sorted sample-vs-theoretical pairs plus a pointwise 5%/95% envelope.

    The envelope is the null band of the randomized residual distribution
    with the fitted model held fixed: each draw simulates a fresh response
    vector from the model, recomputes randomized quantile residuals, and
    sorts them; the band is the pointwise 5% and 95% quantiles of each order
    statistic.  (Misfit then shows up as observed points escaping the band.)
    For a bare series with no model attached, only the uniforms between the
    stored cdf bounds are redrawn.
    """
    values = np.asarray(residuals.values, dtype=float)
    n = values.size
    if n < 2:
        raise DomainError("need at least two residuals for a Q-Q plot")
    theoretical = ndtri((np.arange(1, n + 1) - 0.5) / n)
    sample = np.sort(values)
    if residuals.cdf_lower is None or residuals.cdf_upper is None:
        raise DomainError("randomization envelope needs quantile residuals")
    draws = np.empty((envelope_draws, n))
    model = residuals.model
    if model is None:
        rng = np.random.default_rng(seed)
        for b in range(envelope_draws):
            u = rng.uniform(residuals.cdf_lower, residuals.cdf_upper)
            draws[b] = np.sort(ndtri(u))
    else:
        for b in range(envelope_draws):
            rng = np.random.default_rng(np.random.SeedSequence(entropy=[seed, b]))
            y_b = np.asarray(model.simulate(rng), dtype=float)
            grid = np.arange(-1, int(y_b.max()) + 1)
            F = model.cdf_matrix(grid)
            rows = np.arange(n)
            yi = y_b.astype(int)
            u = rng.uniform(F[rows, yi], F[rows, yi + 1])
            draws[b] = np.sort(ndtri(np.clip(u, 1e-15, 1 - 1e-15)))
    lower, upper = np.quantile(draws, [0.05, 0.95], axis=0)
    return QQCoordinates(
        theoretical=theoretical,
        sample=sample,
        envelope_lower=lower,
        envelope_upper=upper,
        envelope_draws=envelope_draws,
        seed=seed,
    )


def pearson_residuals(model) -> DiagnosticSeries:
    """(y - m) / sqrt(v) with model-implied means and variances.

    Hurdle moments are computed from the composite mass function by
    summation until the tail mass drops below 1e-10.
    """
    y = np.asarray(model.response, dtype=float)
    if isinstance(model, HurdleFit):
        n = y.size
        m = np.empty(n)
        v = np.empty(n)
        for i in range(n):
            m[i], v[i] = model.distribution(i).moments_by_summation(tail=1e-10)
    elif hasattr(model, "mixing_weights"):
        mu = model.component_mu()
        m = mu @ model.mixing_weights
        second = 0.0
        for k, comp in enumerate(model.components):
            var_k = mu[:, k] + mu[:, k] ** 2 / comp.theta
            second = second + model.mixing_weights[k] * (var_k + mu[:, k] ** 2)
        v = second - m**2
    else:
        m = np.empty(y.size)
        v = np.empty(y.size)
        for i in range(y.size):
            spec = model.distribution(i)
            m[i] = family_mean(spec)
            v[i] = family_variance(spec)
    if np.any(v <= 0):
        bad = int(np.argmax(v <= 0))
        raise FitError(f"nonpositive variance at observation {bad}")
    return DiagnosticSeries(
        kind="pearson",
        values=(y - m) / np.sqrt(v),
        fitted_means=_fitted_means(model),
    )


def bootstrap_band(model, breaks: BreakSpec, B: int = 10000,
                   levels: tuple[float, float] = (0.025, 0.975),
                   seed: int = 0, refit: bool = False,
                   max_failure_rate: float = 0.01) -> BootstrapBand:
    """Parametric bootstrap band for hanging-rootogram deviations.

    Per replication: simulate a response vector from the fitted model, bin
    it, and record ``sqrt(exp_j) - sqrt(obs_j*)``.  With ``refit=True`` the
    model is refit to each simulated response (warm started from the
    original fit) and the expected side is recomputed from the refit;
    replications whose refit fails to converge are dropped and counted, and
    more than ``max_failure_rate`` of them is an error.  Band quantiles use
    the type-7 (linear interpolation) convention.
    """
    if B < 1:
        raise DomainError("B must be at least 1")
    if not (0.0 < levels[0] < levels[1] < 1.0):
        raise DomainError("levels must be increasing probabilities in (0, 1)")
    if refit and not hasattr(model, "refit"):
        raise FitError(f"{type(model).__name__} is not refittable")
    exp_fixed = expected_frequencies(model, breaks)
    devs = np.empty((B, breaks.n_bins))
    failures = 0
    kept = 0
    for b in range(B):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=[seed, b]))
        y_star = model.simulate(rng)
        if refit:
            try:
                model_b = model.refit(y_star, warm=True)
            except FitError:
                failures += 1
                continue
            exp_b = expected_frequencies(model_b, breaks)
        else:
            exp_b = exp_fixed
        obs_b, _ = observed_frequencies(y_star, None, breaks)
        devs[kept] = np.sqrt(exp_b) - np.sqrt(obs_b)
        kept += 1
    if failures > max_failure_rate * B:
        raise FitError(
            f"{failures} of {B} bootstrap refits failed to converge"
        )
    devs = devs[:kept]
    lower, upper = np.quantile(devs, levels, axis=0)
    return BootstrapBand(
        bins=breaks,
        lower=lower,
        upper=upper,
        levels=(float(levels[0]), float(levels[1])),
        replications=B,
        seed=seed,
        failures=failures,
    )
