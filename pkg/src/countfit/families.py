"""Probability kernels for the count families used throughout the package.

Supported families: Poisson, negative binomial (NB2, gamma-mixed Poisson
with shape ``theta``; variance ``mu + mu**2 / theta``), Bernoulli with a
logit-scale mean (the binary hurdle part), and the zero-truncated versions
of the two count families.

All probability mass evaluations go through log space (``gammaln``) so that
large counts and large dispersions do not overflow.  Cumulative
probabilities are forward partial sums of the mass function, which is exact
and cheap for the small counts these models are used on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

COUNT_KINDS = ("poisson", "negbin", "zt_poisson", "zt_negbin")
FAMILY_KINDS = COUNT_KINDS + ("binomial_logit",)

# Dispersion at or above this is treated as "effectively Poisson": the NB
# likelihood is flat in theta there and the exact NB pmf loses precision in
# the gammaln differences.
THETA_POISSON_LIMIT = 1e8


class DomainError(ValueError):
    """Invalid distribution parameters or support arguments."""

    code = "E_DOMAIN"


@dataclass(frozen=True)
class FamilySpec:
    """A fully parameterized distribution: kind, mean, optional dispersion.

    ``mu`` is the expected count for the count families and the success
    probability for ``binomial_logit``.  ``theta`` must be present exactly
    when the kind involves a negative binomial.
    """

    kind: str
    mu: float
    theta: float | None = None

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise DomainError(f"unknown family kind {self.kind!r}")
        if self.kind == "binomial_logit":
            if not 0.0 < self.mu < 1.0:
                raise DomainError(f"binomial_logit requires mu in (0, 1), got {self.mu}")
            if self.theta is not None:
                raise DomainError("binomial_logit takes no dispersion")
            return
        if not self.mu > 0.0 or not np.isfinite(self.mu):
            raise DomainError(f"{self.kind} requires mu > 0, got {self.mu}")
        needs_theta = self.kind in ("negbin", "zt_negbin")
        if needs_theta:
            if self.theta is None or not self.theta > 0.0:
                raise DomainError(f"{self.kind} requires theta > 0, got {self.theta}")
        elif self.theta is not None:
            raise DomainError(f"{self.kind} takes no dispersion")

    @property
    def base_kind(self) -> str:
        """Untruncated counterpart of a zero-truncated kind."""
        return self.kind[3:] if self.kind.startswith("zt_") else self.kind


def _poisson_logpmf(j, mu):
    j = np.asarray(j, dtype=float)
    return j * np.log(mu) - mu - gammaln(j + 1.0)


def _negbin_logpmf(j, mu, theta):
    if theta >= THETA_POISSON_LIMIT:
        return _poisson_logpmf(j, mu)
    j = np.asarray(j, dtype=float)
    return (
        gammaln(j + theta)
        - gammaln(theta)
        - gammaln(j + 1.0)
        + theta * (np.log(theta) - np.log(theta + mu))
        + j * (np.log(mu) - np.log(theta + mu))
    )


def log_zero_prob(kind: str, mu, theta=None):
    """log f(0) of an untruncated count family, vectorized over ``mu``."""
    mu = np.asarray(mu, dtype=float)
    if kind == "poisson":
        return -mu
    if kind == "negbin":
        if theta >= THETA_POISSON_LIMIT:
            return -mu
        return theta * (np.log(theta) - np.log(theta + mu))
    raise DomainError(f"no zero probability for kind {kind!r}")


def count_pmf(family: FamilySpec, j):
    """Probability mass of ``family`` at the integer point(s) ``j``.

    ``j`` may be a scalar or array; points outside the support get mass 0.
    Zero-truncated kinds are handled (mass 0 at j = 0); use :func:`zt_pmf`
    for the strict positive-support interface.
    """
    j = np.asarray(j)
    if np.any(j != np.floor(np.asarray(j, dtype=float))):
        raise DomainError("pmf defined on integers only")
    jf = np.asarray(j, dtype=float)
    if family.kind == "binomial_logit":
        out = np.where(jf == 1.0, family.mu, np.where(jf == 0.0, 1.0 - family.mu, 0.0))
        return out if out.ndim else float(out)

    base = family.base_kind
    if base == "poisson":
        logp = _poisson_logpmf(np.maximum(jf, 0.0), family.mu)
    else:
        logp = _negbin_logpmf(np.maximum(jf, 0.0), family.mu, family.theta)
    pmf = np.exp(logp)
    pmf = np.where(jf < 0, 0.0, pmf)
    if family.kind.startswith("zt_"):
        p0 = np.exp(log_zero_prob(base, family.mu, family.theta))
        pmf = np.where(jf < 1, 0.0, pmf / (1.0 - p0))
    return pmf if pmf.ndim else float(pmf)


def zt_pmf(family: FamilySpec, j):
    """Zero-truncated mass f(j) / (1 - f(0)); the support is j >= 1."""
    if not family.kind.startswith("zt_"):
        raise DomainError(f"zt_pmf requires a zero-truncated kind, got {family.kind!r}")
    if np.any(np.asarray(j) < 1):
        raise DomainError("zero-truncated support excludes j < 1")
    return count_pmf(family, j)


def count_cdf(family: FamilySpec, j):
    """F(j) = sum of the mass function on {0, ..., j}; zero below the support."""
    j = np.asarray(j)
    jf = np.floor(np.asarray(j, dtype=float))
    if family.kind == "binomial_logit":
        out = np.where(jf < 0, 0.0, np.where(jf < 1, 1.0 - family.mu, 1.0))
        return out if out.ndim else float(out)
    hi = int(max(np.max(jf), 0))
    grid = np.arange(hi + 1)
    partial = np.cumsum(count_pmf(family, grid))
    idx = np.clip(jf, -1, hi).astype(int)
    out = np.where(idx < 0, 0.0, partial[np.maximum(idx, 0)])
    return out if out.ndim else float(out)


def family_mean(family: FamilySpec) -> float:
    """Expected value; closed form for every supported kind."""
    if family.kind in ("poisson", "negbin"):
        return family.mu
    if family.kind == "binomial_logit":
        return family.mu
    p0 = float(np.exp(log_zero_prob(family.base_kind, family.mu, family.theta)))
    return family.mu / (1.0 - p0)


def family_variance(family: FamilySpec) -> float:
    """Variance; NB uses mu + mu^2/theta, truncated kinds the renormalized moments."""
    mu = family.mu
    if family.kind == "poisson":
        return mu
    if family.kind == "negbin":
        return mu + mu * mu / family.theta
    if family.kind == "binomial_logit":
        return mu * (1.0 - mu)
    # Zero truncation rescales raw moments by 1/(1 - f(0)); the zero class
    # contributes nothing to either moment.
    p0 = float(np.exp(log_zero_prob(family.base_kind, mu, family.theta)))
    if family.base_kind == "poisson":
        ey2 = (mu + mu * mu) / (1.0 - p0)
    else:
        ey2 = (mu + mu * mu * (1.0 + 1.0 / family.theta)) / (1.0 - p0)
    m = mu / (1.0 - p0)
    return ey2 - m * m


def count_sample(family: FamilySpec, rng: np.random.Generator, size=None):
    """Draw from ``family`` using ``rng``; same seed, same sequence.

    NB draws use the gamma-Poisson mixture; zero-truncated kinds use exact
    rejection (redraw zeros), which is cheap whenever f(0) is not close
    to one.
    """
    kind = family.kind
    if kind == "poisson":
        return rng.poisson(family.mu, size=size)
    if kind == "negbin":
        if family.theta >= THETA_POISSON_LIMIT:
            return rng.poisson(family.mu, size=size)
        lam = rng.gamma(family.theta, family.mu / family.theta, size=size)
        return rng.poisson(lam)
    if kind == "binomial_logit":
        draw = (rng.random(size=size) < family.mu).astype(np.int64)
        return draw if size is not None else int(draw)
    # zero truncated: rejection on the untruncated family
    base = FamilySpec(family.base_kind, family.mu, family.theta)
    out = np.atleast_1d(np.asarray(count_sample(base, rng, size=size if size is not None else 1)))
    zero = out == 0
    while zero.any():
        out[zero] = np.atleast_1d(count_sample(base, rng, size=int(zero.sum())))
        zero = out == 0
    if size is None:
        return int(out[0])
    return out


# ---------------------------------------------------------------------------
# Vectorized grids: mass/cdf for n observation-specific means over a common
# integer support 0..j_max.  These are what the rootogram and the residual
# machinery call in bulk.
# ---------------------------------------------------------------------------

def pmf_grid(kind: str, mu, theta, j_max: int) -> np.ndarray:
    """(n, j_max+1) matrix of f(j; mu_i) for j = 0..j_max."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    j = np.arange(j_max + 1, dtype=float)
    if kind == "poisson" or (kind == "negbin" and theta >= THETA_POISSON_LIMIT):
        logp = j * np.log(mu)[:, None] - mu[:, None] - gammaln(j + 1.0)
        return np.exp(logp)
    if kind == "negbin":
        th = float(theta)
        logp = (
            gammaln(j + th)
            - gammaln(th)
            - gammaln(j + 1.0)
            + th * (np.log(th) - np.log(th + mu))[:, None]
            + j * (np.log(mu) - np.log(th + mu))[:, None]
        )
        return np.exp(logp)
    if kind in ("zt_poisson", "zt_negbin"):
        base = pmf_grid(kind[3:], mu, theta, j_max)
        p0 = base[:, 0].copy()
        base[:, 0] = 0.0
        return base / (1.0 - p0)[:, None]
    raise DomainError(f"no pmf grid for kind {kind!r}")


def cdf_grid(kind: str, mu, theta, j_values) -> np.ndarray:
    """(n, len(j_values)) matrix of F(j; mu_i) at integer points ``j_values``.

    Entries for j < 0 are 0; np.inf is allowed and yields 1.
    """
    j_values = np.asarray(j_values, dtype=float)
    finite = np.isfinite(j_values)
    j_hi = int(np.max(j_values[finite], initial=0))
    grid = np.cumsum(pmf_grid(kind, mu, theta, j_hi), axis=1)
    idx = np.clip(np.floor(j_values), -1, j_hi).astype(int)
    n = grid.shape[0]
    out = np.empty((n, j_values.size))
    for col, (jv, i) in enumerate(zip(j_values, idx)):
        if not np.isfinite(jv):
            out[:, col] = 1.0
        elif i < 0:
            out[:, col] = 0.0
        else:
            out[:, col] = grid[:, i]
    return out
