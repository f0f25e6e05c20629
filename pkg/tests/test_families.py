import numpy as np
import pytest
from scipy import stats

from countfit import (
    DomainError,
    FamilySpec,
    count_cdf,
    count_pmf,
    count_sample,
    family_mean,
    family_variance,
    zt_pmf,
)
from countfit.families import cdf_grid, pmf_grid


def test_poisson_pmf_closed_form():
    assert count_pmf(FamilySpec("poisson", 3.0), 0) == pytest.approx(np.exp(-3.0))


def test_negbin_pmf_closed_form_at_zero():
    # (theta / (theta + mu)) ** theta
    assert count_pmf(FamilySpec("negbin", 3.0, 2.0), 0) == pytest.approx(0.16)


def test_negbin_large_theta_is_poisson():
    nb = FamilySpec("negbin", 3.0, 1e8)
    po = FamilySpec("poisson", 3.0)
    j = np.arange(21)
    assert np.max(np.abs(count_pmf(nb, j) - count_pmf(po, j))) < 1e-6


def test_invalid_parameters_raise():
    with pytest.raises(DomainError):
        FamilySpec("poisson", -1.0)
    with pytest.raises(DomainError):
        FamilySpec("negbin", 3.0, 0.0)
    with pytest.raises(DomainError):
        FamilySpec("negbin", 3.0)  # theta missing
    with pytest.raises(DomainError):
        FamilySpec("poisson", 3.0, 2.0)  # spurious theta
    with pytest.raises(DomainError):
        FamilySpec("binomial_logit", 1.5)


def test_cdf_below_support_is_zero():
    assert count_cdf(FamilySpec("poisson", 3.0), -1) == 0.0


def test_cdf_at_zero_equals_pmf():
    fam = FamilySpec("poisson", 3.0)
    assert count_cdf(fam, 0) == pytest.approx(count_pmf(fam, 0))


def test_cdf_matches_partial_sums():
    fam = FamilySpec("negbin", 3.0, 2.0)
    brute = sum(count_pmf(fam, k) for k in range(11))
    assert count_cdf(fam, 10) == pytest.approx(brute, abs=1e-12)


@pytest.mark.parametrize("mu", [0.1, 1.0, 3.0, 10.0])
@pytest.mark.parametrize(
    "kind,theta",
    [("poisson", None)]
    + [("negbin", t) for t in (0.5, 2.0, 100.0)]
    + [("zt_poisson", None)]
    + [("zt_negbin", t) for t in (0.5, 2.0, 100.0)],
)
def test_pmf_cdf_consistency_grid(kind, mu, theta):
    fam = FamilySpec(kind, mu, theta)
    j = np.arange(0, 60)
    pmf = count_pmf(fam, j)
    cdf = count_cdf(fam, j)
    assert np.all(pmf >= 0)
    assert np.all(np.diff(cdf) >= -1e-15)
    assert np.max(np.abs(np.diff(cdf) - pmf[1:])) < 1e-12
    assert count_cdf(fam, 10_000) == pytest.approx(1.0, abs=1e-9)


def test_pmf_sums_to_one():
    fam = FamilySpec("negbin", 3.0, 2.0)
    assert np.sum(count_pmf(fam, np.arange(0, 2000))) == pytest.approx(1.0, abs=1e-9)


def test_nb_analytic_mean():
    fam = FamilySpec("negbin", 3.0, 0.5)
    j = np.arange(0, 5000)
    pmf = count_pmf(fam, j)
    assert 1.0 - pmf.sum() < 1e-12  # tail is negligible at this range
    assert float(np.sum(j * pmf)) == pytest.approx(3.0, abs=1e-8)


def test_pmf_against_scipy():
    j = np.arange(0, 30)
    assert np.allclose(
        count_pmf(FamilySpec("poisson", 2.5), j), stats.poisson.pmf(j, 2.5), atol=1e-13
    )
    mu, theta = 3.0, 2.0
    p = theta / (theta + mu)
    assert np.allclose(
        count_pmf(FamilySpec("negbin", mu, theta), j),
        stats.nbinom.pmf(j, theta, p),
        atol=1e-13,
    )


def test_binomial_logit_pmf_cdf():
    fam = FamilySpec("binomial_logit", 0.3)
    assert count_pmf(fam, 1) == pytest.approx(0.3)
    assert count_pmf(fam, 0) == pytest.approx(0.7)
    assert count_pmf(fam, 2) == 0.0
    assert count_cdf(fam, 0) == pytest.approx(0.7)
    assert count_cdf(fam, 5) == 1.0


# --- zero truncation ---------------------------------------------------------

def test_zt_poisson_closed_form():
    fam = FamilySpec("zt_poisson", 1.0)
    expected = np.exp(-1.0) / (1.0 - np.exp(-1.0))
    assert zt_pmf(fam, 1) == pytest.approx(expected, abs=1e-6)


def test_zt_negbin_normalizes():
    fam = FamilySpec("zt_negbin", 3.0, 2.0)
    total = np.sum(zt_pmf(fam, np.arange(1, 501)))
    assert total == pytest.approx(1.0, abs=1e-9)


def test_zt_excludes_zero():
    with pytest.raises(DomainError):
        zt_pmf(FamilySpec("zt_poisson", 2.0), 0)


def test_zt_moments_match_summation():
    fam = FamilySpec("zt_negbin", 3.0, 2.0)
    j = np.arange(1, 3000)
    pmf = zt_pmf(fam, j)
    m = float(np.sum(j * pmf))
    v = float(np.sum(j * j * pmf)) - m * m
    assert family_mean(fam) == pytest.approx(m, rel=1e-9)
    assert family_variance(fam) == pytest.approx(v, rel=1e-8)


def test_negbin_variance_formula():
    assert family_variance(FamilySpec("negbin", 3.0, 2.0)) == pytest.approx(7.5)


# --- sampling ----------------------------------------------------------------

def test_sample_poisson_mean():
    rng = np.random.default_rng(1)
    draws = count_sample(FamilySpec("poisson", 3.0), rng, size=100_000)
    assert abs(draws.mean() - 3.0) < 0.05


def test_sample_negbin_variance():
    rng = np.random.default_rng(2)
    draws = count_sample(FamilySpec("negbin", 3.0, 2.0), rng, size=100_000)
    assert abs(draws.var() - 7.5) < 0.3


def test_sample_determinism():
    a = count_sample(FamilySpec("negbin", 3.0, 2.0), np.random.default_rng(42), size=1000)
    b = count_sample(FamilySpec("negbin", 3.0, 2.0), np.random.default_rng(42), size=1000)
    assert np.array_equal(a, b)


def test_zt_sample_support():
    rng = np.random.default_rng(3)
    draws = count_sample(FamilySpec("zt_poisson", 0.5), rng, size=5000)
    assert draws.min() >= 1
    m = 0.5 / (1 - np.exp(-0.5))
    assert abs(draws.mean() - m) < 0.05


@pytest.mark.parametrize(
    "kind,mu,theta",
    [("poisson", 3.0, None), ("negbin", 3.0, 2.0), ("poisson", 10.0, None)],
)
def test_empirical_pmf_matches_analytic(kind, mu, theta):
    fam = FamilySpec(kind, mu, theta)
    rng = np.random.default_rng(7)
    draws = count_sample(fam, rng, size=1_000_000)
    support = np.arange(0, draws.max() + 1)
    emp = np.bincount(draws) / draws.size
    assert np.max(np.abs(emp - count_pmf(fam, support))) < 0.005


# --- vectorized grids --------------------------------------------------------

def test_pmf_grid_matches_scalar():
    mu = np.array([0.5, 2.0, 7.0])
    grid = pmf_grid("negbin", mu, 2.0, 12)
    for i, m in enumerate(mu):
        expected = count_pmf(FamilySpec("negbin", float(m), 2.0), np.arange(13))
        assert np.allclose(grid[i], expected, atol=1e-14)


def test_cdf_grid_handles_negatives_and_inf():
    grid = cdf_grid("poisson", np.array([2.0]), None, np.array([-1.0, 0.0, np.inf]))
    assert grid[0, 0] == 0.0
    assert grid[0, 1] == pytest.approx(np.exp(-2.0))
    assert grid[0, 2] == 1.0
