import numpy as np
import pytest

from countfit import (
    build_design,
    fit_glm,
    fit_hurdle,
    load_crabs,
    load_nmes1988,
    load_takeover_bids,
    parse_formula,
)


@pytest.fixture(scope="session")
def crabs():
    return load_crabs()


@pytest.fixture(scope="session")
def bids():
    return load_takeover_bids()


@pytest.fixture(scope="session")
def nmes():
    return load_nmes1988()


@pytest.fixture(scope="session")
def crab_design(crabs):
    y, design = build_design(parse_formula("satellites ~ width + color"), crabs)
    return y, design


@pytest.fixture(scope="session")
def crab_poisson(crab_design):
    y, design = crab_design
    return fit_glm(design, y, family="poisson")


@pytest.fixture(scope="session")
def crab_negbin(crab_design):
    y, design = crab_design
    return fit_glm(design, y, family="negbin")


@pytest.fixture(scope="session")
def crab_hurdle_full(crab_design):
    y, design = crab_design
    return fit_hurdle(design, design, y, count_family="negbin")


@pytest.fixture(scope="session")
def crab_hurdle_simple(crabs):
    y, count_design, zero_design = build_design(
        parse_formula("satellites ~ 1 | width + color"), crabs
    )
    return fit_hurdle(count_design, zero_design, y, count_family="negbin")


@pytest.fixture(scope="session")
def nmes_design(nmes):
    formula = "visits ~ health + chronic + gender + school + insurance + medicaid"
    y, design = build_design(parse_formula(formula), nmes)
    return y, design


def toy_poisson_data(seed=11, n=10):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    y = rng.poisson(np.exp(0.4 + 0.6 * x))
    return x, y
