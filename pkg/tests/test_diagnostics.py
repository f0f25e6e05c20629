import numpy as np
import pytest
from scipy import stats

from countfit import (
    BreakSpec,
    DesignMatrix,
    DiagnosticSeries,
    DomainError,
    FitError,
    bootstrap_band,
    fit_glm,
    pearson_residuals,
    qq_coordinates,
    quantile_residuals,
    warning_limits,
)
from countfit.fitting import FittedModel


def intercept_fit(y, family="poisson"):
    X = DesignMatrix(np.ones((len(y), 1)), ("(Intercept)",))
    return fit_glm(X, np.asarray(y), family=family)


def test_warning_limits_constant():
    assert warning_limits() == (-1.0, 1.0)


def test_quantile_residuals_zero_count_bounds():
    fit = intercept_fit([0, 1, 2, 3, 0, 2])
    res = quantile_residuals(fit, seed=5)
    zero_rows = np.flatnonzero(fit.response == 0)
    # for y = 0 the uniform lives on (0, F(0)): lower bound stored as 0
    assert np.allclose(res.cdf_lower[zero_rows], 0.0)
    assert np.all(res.values[zero_rows] <= stats.norm.ppf(res.cdf_upper[zero_rows]))


def test_quantile_residuals_deterministic():
    fit = intercept_fit([1, 2, 3, 4, 2])
    a = quantile_residuals(fit, seed=9).values
    b = quantile_residuals(fit, seed=9).values
    assert np.array_equal(a, b)
    c = quantile_residuals(fit, seed=10).values
    assert not np.array_equal(a, c)


def test_quantile_residuals_calibrated_under_truth():
    rng = np.random.default_rng(77)
    y = rng.poisson(3.0, size=5000)
    fit = intercept_fit(y)
    res = quantile_residuals(fit, seed=1).values
    assert abs(res.mean()) < 0.06
    assert 0.95 < res.std() < 1.05


def test_qq_identity_case_within_envelope():
    n = 200
    z = stats.norm.ppf((np.arange(1, n + 1) - 0.5) / n)
    u = stats.norm.cdf(z)
    series = DiagnosticSeries(
        kind="quantile", values=z, fitted_means=np.ones(n), seed=0,
        cdf_lower=np.clip(u - 1e-4, 0, 1), cdf_upper=np.clip(u + 1e-4, 0, 1),
    )
    qq = qq_coordinates(series, envelope_draws=200, seed=3)
    assert np.max(np.abs(qq.sample - qq.theoretical)) < 0.1
    assert np.all(qq.sample <= qq.envelope_upper + 1e-6)
    assert np.all(qq.sample >= qq.envelope_lower - 1e-6)


def test_qq_envelope_narrows_with_sample_size():
    def width(n, seed):
        rng = np.random.default_rng(seed)
        y = rng.poisson(3.0, size=n)
        fit = intercept_fit(y)
        res = quantile_residuals(fit, seed=seed)
        qq = qq_coordinates(res, envelope_draws=300, seed=seed)
        mid = len(qq.theoretical) // 2
        return qq.envelope_upper[mid] - qq.envelope_lower[mid]

    assert width(1000, 2) < width(10, 2)


def test_qq_requires_two_points():
    fit = intercept_fit([2, 3])
    res = quantile_residuals(fit, seed=0)
    one = DiagnosticSeries("quantile", res.values[:1], res.fitted_means[:1], 0,
                           res.cdf_lower[:1], res.cdf_upper[:1])
    with pytest.raises(DomainError):
        qq_coordinates(one, envelope_draws=10, seed=0)


def test_crab_poisson_qq_escapes_envelope(crab_poisson):
    res = quantile_residuals(crab_poisson, seed=20160906)
    qq = qq_coordinates(res, envelope_draws=500, seed=20160906)
    upper_tail = qq.sample[-10:]
    assert np.any(upper_tail > qq.envelope_upper[-10:])


def test_crab_hurdle_qq_mostly_inside(crab_hurdle_simple):
    res = quantile_residuals(crab_hurdle_simple, seed=20160906)
    qq = qq_coordinates(res, envelope_draws=500, seed=20160906)
    inside = np.mean(
        (qq.sample >= qq.envelope_lower) & (qq.sample <= qq.envelope_upper)
    )
    assert inside >= 0.95


def make_model(mu, theta, y):
    """Hand-built NB fit object for residual arithmetic checks."""
    n = len(y)
    return FittedModel(
        family="negbin", link="log",
        coefficients=np.array([np.log(mu)]), log_dispersion=float(np.log(theta)),
        loglik=0.0, df=2, n_obs=float(n),
        design=DesignMatrix(np.ones((n, 1)), ("(Intercept)",)),
        response=np.asarray(y, dtype=float), weights=np.ones(n),
        fitted_mu=np.full(n, float(mu)),
        parameter_names=("(Intercept)", "Log(theta)"),
    )


def test_pearson_zero_at_mean():
    model = make_model(3.0, 2.0, [3])
    assert pearson_residuals(model).values[0] == pytest.approx(0.0)


def test_pearson_negbin_denominator():
    model = make_model(3.0, 2.0, [4])
    assert pearson_residuals(model).values[0] == pytest.approx(1.0 / np.sqrt(7.5))


def test_pearson_poisson_score_identity(crab_poisson):
    res = pearson_residuals(crab_poisson)
    m = crab_poisson.fitted_mu
    assert abs(np.sum(res.values * np.sqrt(m))) < 1e-6


def test_pearson_hurdle_moments_match_closed_form(crab_hurdle_simple):
    # summation-based moments against the truncated closed forms
    from countfit import family_mean, family_variance

    res = pearson_residuals(crab_hurdle_simple)
    dist = crab_hurdle_simple.distribution(3)
    m_sum, v_sum = dist.moments_by_summation(tail=1e-10)
    keep = 1.0 - dist.p_zero
    m_closed = keep * family_mean(dist.count)
    v_closed = (
        keep * (family_variance(dist.count) + family_mean(dist.count) ** 2)
        - m_closed**2
    )
    assert m_sum == pytest.approx(m_closed, abs=1e-8)
    assert v_sum == pytest.approx(v_closed, abs=1e-8)
    y3 = crab_hurdle_simple.response[3]
    assert res.values[3] == pytest.approx((y3 - m_sum) / np.sqrt(v_sum), abs=1e-6)


def test_bootstrap_single_replication_degenerate(crab_poisson):
    band = bootstrap_band(crab_poisson, BreakSpec.integer_bins(15), B=1, seed=5)
    assert np.allclose(band.lower, band.upper)


def test_bootstrap_determinism(crab_poisson):
    a = bootstrap_band(crab_poisson, BreakSpec.integer_bins(10), B=50, seed=7)
    b = bootstrap_band(crab_poisson, BreakSpec.integer_bins(10), B=50, seed=7)
    assert np.array_equal(a.lower, b.lower)
    assert np.array_equal(a.upper, b.upper)


def test_bootstrap_levels_nest(crab_poisson):
    breaks = BreakSpec.integer_bins(10)
    narrow = bootstrap_band(crab_poisson, breaks, B=400, seed=3)
    wide = bootstrap_band(crab_poisson, breaks, B=400, seed=3, levels=(0.01, 0.99))
    assert np.all(wide.lower <= narrow.lower + 1e-12)
    assert np.all(wide.upper >= narrow.upper - 1e-12)


def test_bootstrap_band_bounds_ordered(crab_negbin):
    band = bootstrap_band(crab_negbin, BreakSpec.integer_bins(12), B=200, seed=11)
    assert np.all(band.lower <= band.upper)


def test_bootstrap_refit_pins_hurdle_zero_bin(crab_hurdle_simple):
    # with refitting, the hurdle zero bin is matched exactly in every
    # replication, so the band collapses to zero width there
    band = bootstrap_band(
        crab_hurdle_simple, BreakSpec.integer_bins(15), B=30, seed=2, refit=True
    )
    assert band.failures == 0
    assert abs(band.lower[0]) < 1e-6 and abs(band.upper[0]) < 1e-6
    assert band.upper[1] > 0.1  # other bins keep real width


def test_bootstrap_zero_line_coverage_meta(crab_hurdle_simple):
    # nested simulation: under a true model the zero line should sit inside
    # the 95% band for nearly every bin, in most meta replications
    breaks = BreakSpec.integer_bins(15)
    hits = 0
    meta = 20
    for r in range(meta):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=[321, r]))
        y_true = crab_hurdle_simple.simulate(rng)
        if not (y_true == 0).any() or (y_true == 0).all():
            continue
        model_r = crab_hurdle_simple.refit(y_true)
        band = bootstrap_band(model_r, breaks, B=500, seed=r)
        covered = np.sum((band.lower <= 0.0) & (0.0 <= band.upper))
        hits += covered >= 14
    assert hits >= 0.9 * meta


def test_bootstrap_validates_config(crab_poisson):
    with pytest.raises(DomainError):
        bootstrap_band(crab_poisson, BreakSpec.integer_bins(5), B=0, seed=1)
    with pytest.raises(DomainError):
        bootstrap_band(crab_poisson, BreakSpec.integer_bins(5), B=10, seed=1,
                       levels=(0.9, 0.1))
