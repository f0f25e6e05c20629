"""Maximum-likelihood fitters for count regressions.

Poisson and binomial-logit models are fit by iteratively reweighted least
squares (Newton's method under the canonical links, with step halving).
Negative binomial models and the zero-truncated families are fit by a damped
Newton iteration on the packed parameter vector ``(beta, log theta)`` with
analytic gradients and a finite-difference Hessian, warm started from the
Poisson solution.  Convergence always means: relative log-likelihood change
below 1e-10 *and* score max-norm below 1e-6.

Covariances are inverses of the observed information, obtained by central
differencing of the analytic score at the optimum, so standard errors are
reported on the same scale as the parameters (log scale for the dispersion).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma, expit, gammaln, log_expit

from .families import (
    THETA_POISSON_LIMIT,
    DomainError,
    FamilySpec,
    cdf_grid,
    count_pmf,
    family_mean,
    family_variance,
    log_zero_prob,
    pmf_grid,
)

MAX_ITER = 200
LOGLIK_RTOL = 1e-10
SCORE_TOL = 1e-6
ETA_CLIP = 200.0  # linear predictors beyond this are line-search overshoot


class FitError(RuntimeError):
    code = "E_FIT"


class RankDeficientError(FitError):
    code = "E_RANK"


class ConvergenceError(FitError):
    """Carries the last iterate and its score norm."""

    code = "E_CONVERGENCE"

    def __init__(self, message, params=None, score_norm=None):
        super().__init__(message)
        self.params = params
        self.score_norm = score_norm


class SeparationError(FitError):
    code = "E_SEPARATION"


@dataclass(frozen=True)
class DesignMatrix:
    """A dense regression design with stable column names."""

    values: np.ndarray
    column_names: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DomainError("design must be a 2-d matrix")
        if not np.all(np.isfinite(values)):
            raise DomainError("design contains non-finite entries")
        if len(self.column_names) != values.shape[1]:
            raise DomainError("column_names length must match design columns")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_names", tuple(self.column_names))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def subset(self, mask) -> "DesignMatrix":
        return DesignMatrix(self.values[mask], self.column_names)


# ---------------------------------------------------------------------------
# Weighted log-likelihoods and scores on the packed parameter vector.
# The packing is [beta_1..beta_p] for fixed-dispersion families and
# [beta_1..beta_p, log theta] for the NB families.
# ---------------------------------------------------------------------------

def _eta(X, beta):
    return np.clip(X @ beta, -ETA_CLIP, ETA_CLIP)


def _poisson_ll_grad(params, X, y, w):
    eta = _eta(X, params)
    mu = np.exp(eta)
    ll = float(np.sum(w * (y * eta - mu - gammaln(y + 1.0))))
    grad = X.T @ (w * (y - mu))
    return ll, grad


def _logit_ll_grad(params, X, y, w):
    eta = _eta(X, params)
    ll = float(np.sum(w * (y * log_expit(eta) + (1.0 - y) * log_expit(-eta))))
    grad = X.T @ (w * (y - expit(eta)))
    return ll, grad


LOG_THETA_CAP = float(np.log(THETA_POISSON_LIMIT))


def _negbin_ll_grad(params, X, y, w):
    beta, logtheta = params[:-1], params[-1]
    if logtheta >= LOG_THETA_CAP:
        # Effectively Poisson: the exact NB gammaln differences lose precision
        # here and the likelihood is flat in theta, so use the limit law.
        ll, g_beta = _poisson_ll_grad(beta, X, y, w)
        return ll, np.concatenate([g_beta, [0.0]])
    theta = np.exp(logtheta)
    eta = _eta(X, beta)
    mu = np.exp(eta)
    ll_i = (
        gammaln(y + theta)
        - gammaln(theta)
        - gammaln(y + 1.0)
        + theta * (np.log(theta) - np.log(theta + mu))
        + y * (eta - np.log(theta + mu))
    )
    ll = float(np.sum(w * ll_i))
    g_beta = X.T @ (w * (y - mu) * theta / (mu + theta))
    dtheta = (
        digamma(y + theta)
        - digamma(theta)
        + np.log(theta)
        + 1.0
        - np.log(mu + theta)
        - (y + theta) / (mu + theta)
    )
    g_logtheta = theta * float(np.sum(w * dtheta))
    return ll, np.concatenate([g_beta, [g_logtheta]])


def _zt_poisson_ll_grad(params, X, y, w):
    eta = _eta(X, params)
    mu = np.exp(eta)
    one_minus_f0 = -np.expm1(-mu)
    ll = float(np.sum(w * (y * eta - mu - gammaln(y + 1.0) - np.log(one_minus_f0))))
    grad = X.T @ (w * (y - mu / one_minus_f0))
    return ll, grad


def _zt_negbin_ll_grad(params, X, y, w):
    beta, logtheta = params[:-1], params[-1]
    if logtheta >= LOG_THETA_CAP:
        ll, g_beta = _zt_poisson_ll_grad(beta, X, y, w)
        return ll, np.concatenate([g_beta, [0.0]])
    theta = np.exp(logtheta)
    eta = _eta(X, beta)
    mu = np.exp(eta)
    log_f0 = theta * (np.log(theta) - np.log(theta + mu))
    one_minus_f0 = -np.expm1(log_f0)
    f0_ratio = np.exp(log_f0) / one_minus_f0
    ll_i = (
        gammaln(y + theta)
        - gammaln(theta)
        - gammaln(y + 1.0)
        + theta * (np.log(theta) - np.log(theta + mu))
        + y * (eta - np.log(theta + mu))
        - np.log(one_minus_f0)
    )
    ll = float(np.sum(w * ll_i))
    g_eta = (y - mu * (y + theta) / (mu + theta)) - f0_ratio * theta * mu / (mu + theta)
    g_beta = X.T @ (w * g_eta)
    dlog_f0 = np.log(theta) + 1.0 - np.log(mu + theta) - theta / (mu + theta)
    dtheta = (
        digamma(y + theta)
        - digamma(theta)
        + np.log(theta)
        + 1.0
        - np.log(mu + theta)
        - (y + theta) / (mu + theta)
    )
    g_logtheta = theta * float(np.sum(w * (dtheta + f0_ratio * dlog_f0)))
    return ll, np.concatenate([g_beta, [g_logtheta]])


def _negbin_hessian(params, X, y, w):
    """Analytic Hessian of the NB log-likelihood on (beta, log theta)."""
    from scipy.special import polygamma

    beta, logtheta = params[:-1], params[-1]
    p = beta.size
    if logtheta >= LOG_THETA_CAP:
        # Poisson limit: curvature in log theta is zero; give the capped
        # coordinate a unit negative curvature so Newton solves stay regular.
        eta = _eta(X, beta)
        mu = np.exp(eta)
        H = np.zeros((p + 1, p + 1))
        H[:p, :p] = -(X.T * (w * mu)) @ X
        H[p, p] = -1.0
        return H
    theta = np.exp(logtheta)
    eta = _eta(X, beta)
    mu = np.exp(eta)
    denom = (mu + theta) ** 2
    h_bb = -(X.T * (w * theta * mu * (y + theta) / denom)) @ X
    h_bt = X.T @ (w * theta * mu * (y - mu) / denom)
    s = (
        digamma(y + theta)
        - digamma(theta)
        + np.log(theta)
        + 1.0
        - np.log(mu + theta)
        - (y + theta) / (mu + theta)
    )
    s_prime = (
        polygamma(1, y + theta)
        - polygamma(1, theta)
        + 1.0 / theta
        - 2.0 / (mu + theta)
        + (y + theta) / denom
    )
    h_tt = theta * (float(np.sum(w * s)) + theta * float(np.sum(w * s_prime)))
    H = np.empty((p + 1, p + 1))
    H[:p, :p] = h_bb
    H[:p, p] = h_bt
    H[p, :p] = h_bt
    H[p, p] = h_tt
    return H


_LL_GRAD = {
    "poisson": _poisson_ll_grad,
    "binomial_logit": _logit_ll_grad,
    "negbin": _negbin_ll_grad,
    "zt_poisson": _zt_poisson_ll_grad,
    "zt_negbin": _zt_negbin_ll_grad,
}


def loglik_and_score(family: str, params, X, y, w):
    """Weighted log-likelihood and score for ``family`` at packed ``params``."""
    return _LL_GRAD[family](np.asarray(params, dtype=float), X, y, w)


# ---------------------------------------------------------------------------
# Fitted-model containers
# ---------------------------------------------------------------------------

@dataclass
class FittedModel:
    """A converged single-family regression fit.

    ``coefficients`` live on the link scale; ``log_dispersion`` is present
    for the NB families and counts toward ``df``.  ``n_obs`` is the
    effective sample size (the sum of the weights).
    """

    family: str
    link: str
    coefficients: np.ndarray
    log_dispersion: float | None
    loglik: float
    df: int
    n_obs: float
    design: DesignMatrix
    response: np.ndarray
    weights: np.ndarray
    fitted_mu: np.ndarray
    parameter_names: tuple[str, ...]
    _cov: np.ndarray | None = field(default=None, repr=False)

    @property
    def theta(self) -> float | None:
        return None if self.log_dispersion is None else float(np.exp(self.log_dispersion))

    @property
    def packed_params(self) -> np.ndarray:
        if self.log_dispersion is None:
            return np.asarray(self.coefficients, dtype=float)
        return np.concatenate([self.coefficients, [self.log_dispersion]])

    @property
    def covariance(self) -> np.ndarray:
        if self._cov is None:
            self._cov = model_covariance(self)
        return self._cov

    @property
    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))

    def distribution(self, i: int) -> FamilySpec:
        return FamilySpec(self.family, float(self.fitted_mu[i]), self.theta)

    def predict_mu(self, rows) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.shape[1] != self.design.p:
            raise DomainError(
                f"expected {self.design.p} covariate columns, got {rows.shape[1]}"
            )
        eta = rows @ self.coefficients
        return expit(eta) if self.link == "logit" else np.exp(eta)

    def cdf_matrix(self, j_values) -> np.ndarray:
        """Per-observation F(j) over integer points; rows follow the design."""
        return cdf_grid(self.family, self.fitted_mu, self.theta, j_values)

    def pmf_matrix(self, j_max: int) -> np.ndarray:
        return pmf_grid(self.family, self.fitted_mu, self.theta, j_max)

    def simulate(self, rng: np.random.Generator) -> np.ndarray:
        return _simulate_counts(self.family, self.fitted_mu, self.theta, rng)

    def refit(self, response, warm: bool = True) -> "FittedModel":
        if self.family in ("zt_poisson", "zt_negbin"):
            return fit_zerotrunc(
                self.design, response,
                family="poisson" if self.family == "zt_poisson" else "negbin",
                weights=self.weights,
                start=self.packed_params if warm else None,
            )
        return fit_glm(
            self.design, response, family=self.family, weights=self.weights,
            start=self.packed_params if warm else None,
        )


@dataclass
class HurdleFit:
    """Two-part hurdle fit: logit zero hurdle plus zero-truncated counts."""

    zero_part: FittedModel
    count_part: FittedModel
    loglik: float
    df: int
    n_obs: float
    count_family: str
    response: np.ndarray = field(default=None, repr=False)
    _count_design_full: DesignMatrix = field(default=None, repr=False)

    @property
    def zero_design(self) -> DesignMatrix:
        return self.zero_part.design

    @property
    def count_design_full(self) -> DesignMatrix:
        return self._count_design_full

    def zero_probabilities(self) -> np.ndarray:
        """P(Y = 0) per observation, from the logit part."""
        return 1.0 - self.zero_part.fitted_mu

    def count_mu(self) -> np.ndarray:
        """Untruncated count-part mean per observation (all rows)."""
        return self.count_part.predict_mu(self._count_design_full.values)

    def distribution(self, i: int) -> "HurdleDistribution":
        mu = float(self.count_mu()[i])
        return HurdleDistribution(
            p_zero=float(self.zero_probabilities()[i]),
            count=FamilySpec(self.count_part.family, mu, self.count_part.theta),
        )

    def cdf_matrix(self, j_values) -> np.ndarray:
        j_values = np.asarray(j_values, dtype=float)
        p0 = self.zero_probabilities()
        mu = self.count_mu()
        theta = self.count_part.theta
        base_kind = "poisson" if self.count_part.family == "zt_poisson" else "negbin"
        base = cdf_grid(base_kind, mu, theta, j_values)
        f0 = np.exp(log_zero_prob(base_kind, mu, theta))
        zt = np.clip(base - f0[:, None], 0.0, None) / (1.0 - f0)[:, None]
        out = p0[:, None] + (1.0 - p0)[:, None] * zt
        out[:, np.floor(j_values) < 0] = 0.0
        return out

    def pmf_matrix(self, j_max: int) -> np.ndarray:
        p0 = self.zero_probabilities()
        mu = self.count_mu()
        zt = pmf_grid(self.count_part.family, mu, self.count_part.theta, j_max)
        out = (1.0 - p0)[:, None] * zt
        out[:, 0] = p0
        return out

    def simulate(self, rng: np.random.Generator) -> np.ndarray:
        positive = rng.random(self.zero_part.design.n) < self.zero_part.fitted_mu
        y = np.zeros(self.zero_part.design.n, dtype=np.int64)
        if positive.any():
            mu = self.count_mu()[positive]
            base_kind = "poisson" if self.count_part.family == "zt_poisson" else "negbin"
            draws = _simulate_counts(base_kind, mu, self.count_part.theta, rng)
            # exact zero-truncation: redraw the zeros
            zero = draws == 0
            while zero.any():
                draws[zero] = _simulate_counts(
                    base_kind, mu[zero], self.count_part.theta, rng
                )
                zero = draws == 0
            y[positive] = draws
        return y

    def refit(self, response, warm: bool = True) -> "HurdleFit":
        return fit_hurdle(
            self._count_design_full,
            self.zero_part.design,
            response,
            count_family=self.count_family,
            start_zero=self.zero_part.packed_params if warm else None,
            start_count=self.count_part.packed_params if warm else None,
        )


@dataclass(frozen=True)
class HurdleDistribution:
    """Composite hurdle law: P(0) plus a zero-truncated count family."""

    p_zero: float
    count: FamilySpec

    def pmf(self, j):
        j = np.asarray(j, dtype=float)
        zt = count_pmf(self.count, np.maximum(j, 0))
        out = np.where(j == 0, self.p_zero, (1.0 - self.p_zero) * zt)
        out = np.where(j < 0, 0.0, out)
        return out if out.ndim else float(out)

    def cdf(self, j):
        j = np.floor(np.asarray(j, dtype=float))
        from .families import count_cdf

        zt = count_cdf(self.count, np.maximum(j, 0))
        out = np.where(j < 0, 0.0, self.p_zero + (1.0 - self.p_zero) * zt)
        return out if out.ndim else float(out)

    def mean(self) -> float:
        return (1.0 - self.p_zero) * family_mean(self.count)

    def variance(self) -> float:
        m_count = family_mean(self.count)
        v_count = family_variance(self.count)
        keep = 1.0 - self.p_zero
        return keep * (v_count + m_count * m_count) - (keep * m_count) ** 2

    def moments_by_summation(self, tail: float = 1e-10) -> tuple[float, float]:
        """(mean, variance) by direct pmf summation until tail mass < ``tail``.

        Summation continues past the mass threshold until the remaining tail
        cannot move the second moment at the 1e-9 level.
        """
        total = self.p_zero
        m1 = 0.0
        m2 = 0.0
        j = 0
        while (1.0 - total > tail or (1.0 - total) * (j + 1) ** 2 > 1e-9) and j < 100_000:
            j += 1
            p = float(self.pmf(j))
            total += p
            m1 += j * p
            m2 += j * j * p
        return m1, m2 - m1 * m1


def _simulate_counts(family, mu, theta, rng):
    mu = np.asarray(mu, dtype=float)
    if family == "poisson" or (family == "negbin" and theta >= THETA_POISSON_LIMIT):
        return rng.poisson(mu)
    if family == "negbin":
        lam = rng.gamma(theta, mu / theta)
        return rng.poisson(lam)
    if family == "binomial_logit":
        return (rng.random(mu.shape) < mu).astype(np.int64)
    raise DomainError(f"cannot simulate family {family!r}")


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------

def _check_inputs(design, response, weights, family):
    X = design.values
    y = np.asarray(response, dtype=float)
    if y.shape != (X.shape[0],):
        raise DomainError("response length must match design rows")
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != y.shape:
        raise DomainError("weights length must match design rows")
    if np.any(w < 0):
        raise DomainError("weights must be nonnegative")
    if not np.any(w > 0):
        raise DomainError("weights must not be all zero")
    if X.shape[0] < X.shape[1]:
        raise RankDeficientError("fewer observations than design columns")
    active = w > 0
    if np.linalg.matrix_rank(X[active]) < X.shape[1]:
        raise RankDeficientError("design matrix is rank deficient")
    if family == "binomial_logit":
        if not np.all((y == 0) | (y == 1)):
            raise DomainError("logit response must be 0/1")
    else:
        if np.any(y < 0) or np.any(y != np.floor(y)):
            raise DomainError("count response must be nonnegative integers")
        if float(np.sum(w * y)) == 0.0:
            raise DomainError(
                "all-zero response: count likelihood is unbounded as mu -> 0"
            )
    return X, y, w


def _wls_solve(X, z, wls_w):
    root = np.sqrt(wls_w)
    beta, *_ = np.linalg.lstsq(X * root[:, None], z * root, rcond=None)
    return beta


def _irls(X, y, w, family):
    """Newton iterations via reweighted least squares for the canonical links."""
    n, p = X.shape
    if family == "poisson":
        mu = np.clip((y + np.average(y, weights=w)) / 2.0, 1e-8, None)
        eta = np.log(mu)
    else:
        mu = np.clip((w * y).sum() / w.sum(), 1e-3, 1 - 1e-3) * np.ones(n)
        eta = np.log(mu / (1 - mu))
    beta = _wls_solve(X, eta, np.maximum(w, 1e-12))
    ll_fn = _LL_GRAD[family]
    ll, grad = ll_fn(beta, X, y, w)
    for _ in range(MAX_ITER):
        eta = _eta(X, beta)
        if family == "poisson":
            mu = np.exp(eta)
            wls_w = w * mu
            resid = (y - mu) / np.maximum(mu, 1e-300)
        else:
            mu = expit(eta)
            var = np.maximum(mu * (1 - mu), 1e-12)
            wls_w = w * var
            resid = (y - mu) / var
        z = eta + resid
        beta_new = _wls_solve(X, z, np.maximum(wls_w, 1e-12))
        step = beta_new - beta
        ll_new, grad_new = ll_fn(beta_new, X, y, w)
        halvings = 0
        while (not np.isfinite(ll_new) or ll_new < ll) and halvings < 60:
            step = step / 2.0
            beta_new = beta + step
            ll_new, grad_new = ll_fn(beta_new, X, y, w)
            halvings += 1
        rel_change = abs(ll_new - ll) / (1.0 + abs(ll_new))
        beta, ll, grad = beta_new, ll_new, grad_new
        if rel_change < LOGLIK_RTOL and np.max(np.abs(grad)) < SCORE_TOL:
            if family == "binomial_logit" and np.max(np.abs(_eta(X, beta))) > 25.0:
                # the score vanishes under saturation, but that is divergence,
                # not a maximum
                raise SeparationError(
                    "logit fit saturated (|linear predictor| > 25): complete "
                    "or quasi-complete separation"
                )
            return beta, ll
    if family == "binomial_logit" and np.max(np.abs(_eta(X, beta))) > 25.0:
        raise SeparationError(
            "logit fit did not converge and the linear predictor diverged: "
            "complete or quasi-complete separation"
        )
    raise ConvergenceError(
        f"{family} IRLS did not converge in {MAX_ITER} iterations "
        f"(score max-norm {np.max(np.abs(grad)):.3g})",
        params=beta,
        score_norm=float(np.max(np.abs(grad))),
    )


def _fd_score_jacobian(ll_fn, params, X, y, w, step_scale=1e-6):
    """Central finite differences of the analytic score."""
    k = params.size
    H = np.empty((k, k))
    for j in range(k):
        h = step_scale * (1.0 + abs(params[j]))
        up = params.copy()
        up[j] += h
        dn = params.copy()
        dn[j] -= h
        H[:, j] = (ll_fn(up, X, y, w)[1] - ll_fn(dn, X, y, w)[1]) / (2.0 * h)
    return (H + H.T) / 2.0


def _damped_newton(ll_fn, params, X, y, w, max_iter=MAX_ITER, upper=None,
                   hess_fn=None):
    """Maximize a smooth log-likelihood: Newton steps with ridge and halving.

    ``upper`` optionally box-constrains coordinates from above (used for the
    log-dispersion cap); convergence is judged on the projected score.  The
    Hessian comes from ``hess_fn`` when given, else from central differences
    of the analytic score.
    """
    params = np.asarray(params, dtype=float)
    if upper is not None:
        params = np.minimum(params, upper)

    def projected(g, x):
        if upper is None:
            return g
        g = g.copy()
        at_cap = x >= upper - 1e-12
        g[at_cap & (g > 0)] = 0.0
        return g

    ll, grad = ll_fn(params, X, y, w)
    if not np.isfinite(ll):
        raise ConvergenceError("log-likelihood not finite at the starting point")
    for _ in range(max_iter):
        if hess_fn is not None:
            H = hess_fn(params, X, y, w)
        else:
            H = _fd_score_jacobian(ll_fn, params, X, y, w)
        g_eff = projected(grad, params)
        ridge = 0.0
        step = None
        for _ in range(12):
            try:
                step = np.linalg.solve(-(H - ridge * np.eye(H.shape[0])), g_eff)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and float(step @ g_eff) > 0:
                break
            ridge = 1e-8 if ridge == 0.0 else ridge * 100.0
        if step is None or float(step @ g_eff) <= 0:
            step = g_eff  # steepest ascent fallback
        new = params + step
        if upper is not None:
            new = np.minimum(new, upper)
        ll_new, grad_new = ll_fn(new, X, y, w)
        halvings = 0
        # Allow steps within float resolution of the current value: near the
        # optimum the likelihood plateaus at machine precision while the
        # score can still be polished by full Newton steps.
        slack = 64.0 * np.finfo(float).eps * (1.0 + abs(ll))
        while (not np.isfinite(ll_new) or ll_new < ll - slack) and halvings < 60:
            step = step / 2.0
            new = params + step
            if upper is not None:
                new = np.minimum(new, upper)
            ll_new, grad_new = ll_fn(new, X, y, w)
            halvings += 1
        rel_change = abs(ll_new - ll) / (1.0 + abs(ll_new))
        params, ll, grad = new, ll_new, grad_new
        if rel_change < LOGLIK_RTOL:
            if np.max(np.abs(projected(grad, params))) < SCORE_TOL:
                return params, ll
            if upper is not None:
                # Progress stalled against a flat, noise-limited profile while
                # a capped coordinate still wants to grow (dispersion heading
                # to infinity): jump it to the cap, where the limiting
                # likelihood is evaluated exactly, and keep polishing there.
                capped = np.isfinite(upper) & (grad > 0) & (params < upper - 1e-12)
                if capped.any():
                    jump = params.copy()
                    jump[capped] = upper[capped]
                    ll_jump, grad_jump = ll_fn(jump, X, y, w)
                    if np.isfinite(ll_jump) and ll_jump >= ll - 1e-7 * (1.0 + abs(ll)):
                        params, ll, grad = jump, ll_jump, grad_jump
                        continue
    raise ConvergenceError(
        f"optimizer did not converge in {max_iter} iterations "
        f"(score max-norm {np.max(np.abs(grad)):.3g})",
        params=params,
        score_norm=float(np.max(np.abs(grad))),
    )


def _moment_log_theta(y, w, mu):
    """Method-of-moments dispersion start on the Poisson residual scale."""
    mean = float(np.average(y, weights=w))
    var = float(np.average((y - mu) ** 2, weights=w))
    theta = max(0.1, mean * mean / max(var - mean, 1e-4))
    return float(np.log(min(theta, THETA_POISSON_LIMIT)))


# ---------------------------------------------------------------------------
# Public fitters
# ---------------------------------------------------------------------------

def fit_glm(design: DesignMatrix, response, family: str, weights=None,
            start=None) -> FittedModel:
    """Fit a weighted GLM: ``poisson`` or ``negbin`` (log link) or
    ``binomial_logit`` (logit link).

    Returns a :class:`FittedModel` whose score max-norm is below 1e-6.
    Raises :class:`RankDeficientError`, :class:`ConvergenceError`, or
    :class:`SeparationError` accordingly.
    """
    if family not in ("poisson", "negbin", "binomial_logit"):
        raise DomainError(f"fit_glm does not handle family {family!r}")
    X, y, w = _check_inputs(design, response, weights, family)

    if family in ("poisson", "binomial_logit"):
        if start is not None:
            params, ll = _damped_newton(_LL_GRAD[family], start, X, y, w)
        else:
            params, ll = _irls(X, y, w, family)
        log_disp = None
        names = tuple(design.column_names)
    else:
        if start is not None:
            start = np.asarray(start, dtype=float)
            beta0, logtheta0 = start[:-1], float(start[-1])
        else:
            beta0, _ = _irls(X, y, w, "poisson")
            logtheta0 = _moment_log_theta(y, w, np.exp(_eta(X, beta0)))
        cap = np.r_[np.full(len(beta0), np.inf), LOG_THETA_CAP]
        params, ll = _damped_newton(
            _negbin_ll_grad, np.concatenate([beta0, [logtheta0]]), X, y, w,
            upper=cap, hess_fn=_negbin_hessian,
        )
        log_disp = float(params[-1])
        params_beta = params[:-1]
        names = tuple(design.column_names) + ("Log(theta)",)
        params = np.concatenate([params_beta, [log_disp]])

    beta = params if log_disp is None else params[:-1]
    eta = _eta(X, beta)
    mu = expit(eta) if family == "binomial_logit" else np.exp(eta)
    return FittedModel(
        family=family,
        link="logit" if family == "binomial_logit" else "log",
        coefficients=np.asarray(beta, dtype=float),
        log_dispersion=log_disp,
        loglik=float(ll),
        df=len(beta) + (0 if log_disp is None else 1),
        n_obs=float(np.sum(w)),
        design=design,
        response=y,
        weights=w,
        fitted_mu=mu,
        parameter_names=names,
    )


def fit_zerotrunc(design: DesignMatrix, response, family: str, weights=None,
                  start=None) -> FittedModel:
    """Fit a zero-truncated Poisson or NB regression on strictly positive counts."""
    if family not in ("poisson", "negbin"):
        raise DomainError(f"fit_zerotrunc does not handle family {family!r}")
    X, y, w = _check_inputs(design, response, weights, "poisson")
    if np.any(y[w > 0] == 0):
        raise DomainError("zero-truncated response must be strictly positive")

    kind = "zt_poisson" if family == "poisson" else "zt_negbin"
    if start is None:
        beta0, _ = _irls(X, y, w, "poisson")
        if family == "poisson":
            start = beta0
        else:
            logtheta0 = _moment_log_theta(y, w, np.exp(_eta(X, beta0)))
            start = np.concatenate([beta0, [logtheta0]])
    start = np.asarray(start, dtype=float)
    if family == "poisson":
        params, ll = _damped_newton(_zt_poisson_ll_grad, start, X, y, w)
    else:
        cap = np.r_[np.full(start.size - 1, np.inf), LOG_THETA_CAP]
        params, ll = _damped_newton(_zt_negbin_ll_grad, start, X, y, w, upper=cap)

    log_disp = float(params[-1]) if family == "negbin" else None
    beta = params[:-1] if family == "negbin" else params
    names = tuple(design.column_names) + (("Log(theta)",) if log_disp is not None else ())
    return FittedModel(
        family=kind,
        link="log",
        coefficients=np.asarray(beta, dtype=float),
        log_dispersion=log_disp,
        loglik=float(ll),
        df=len(beta) + (0 if log_disp is None else 1),
        n_obs=float(np.sum(w)),
        design=design,
        response=y,
        weights=w,
        fitted_mu=np.exp(_eta(X, beta)),
        parameter_names=names,
    )


def fit_hurdle(count_design: DesignMatrix, zero_design: DesignMatrix, response,
               count_family: str = "negbin", weights=None,
               start_zero=None, start_count=None) -> HurdleFit:
    """Fit a hurdle model: binomial-logit on I(y > 0), zero-truncated counts
    on the positive subset.  The log-likelihood and df add across parts."""
    y = np.asarray(response, dtype=float)
    if count_design.n != zero_design.n or count_design.n != y.size:
        raise DomainError("hurdle parts must cover the same observations")
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    positive = y > 0
    if not positive.any() or positive.all():
        raise DomainError("hurdle model needs both zero and positive responses")

    zero_part = fit_glm(
        zero_design, positive.astype(float), family="binomial_logit",
        weights=w, start=start_zero,
    )
    count_part = fit_zerotrunc(
        count_design.subset(positive), y[positive], family=count_family,
        weights=w[positive], start=start_count,
    )
    return HurdleFit(
        zero_part=zero_part,
        count_part=count_part,
        loglik=zero_part.loglik + count_part.loglik,
        df=zero_part.df + count_part.df,
        n_obs=zero_part.n_obs,
        count_family=count_family,
        response=y,
        _count_design_full=count_design,
    )


def information_criteria(loglik: float, df: int, n: float) -> dict:
    """AIC and BIC from a log-likelihood, parameter count, and sample size."""
    if not n > 0:
        raise DomainError("sample size must be positive")
    return {
        "aic": -2.0 * loglik + 2.0 * df,
        "bic": -2.0 * loglik + df * np.log(n),
    }


def model_covariance(model: FittedModel) -> np.ndarray:
    """Observed-information inverse at the MLE.

    The information is the central finite difference of the analytic score
    with step 1e-5 * (1 + |param|), on the packed ``(beta, log theta)``
    scale, so the dispersion SE comes out on the log scale.
    """
    ll_fn = _LL_GRAD[model.family]
    X, y, w = model.design.values, model.response, model.weights
    H = _fd_score_jacobian(ll_fn, model.packed_params, X, y, w, step_scale=1e-5)
    info = -H
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise FitError(f"singular observed information: {exc}") from exc
    if not np.all(np.isfinite(cov)) or np.any(np.diag(cov) <= 0):
        raise FitError("observed information is not positive definite")
    return (cov + cov.T) / 2.0


def predict_distribution(model, rows):
    """Per-row fitted distribution: a :class:`FamilySpec` for a plain GLM, a
    :class:`HurdleDistribution` for a hurdle fit.  ``rows`` is one covariate
    vector or a matrix; hurdle fits take ``(count_row, zero_row)`` pairs or a
    single matrix used for both parts when the designs share columns."""
    if isinstance(model, FittedModel):
        mu = model.predict_mu(rows)
        specs = [FamilySpec(model.family, float(m), model.theta) for m in mu]
        return specs[0] if np.asarray(rows).ndim == 1 else specs
    if isinstance(model, HurdleFit):
        if isinstance(rows, tuple):
            count_rows, zero_rows = rows
        else:
            count_rows = zero_rows = rows
        p_pos = model.zero_part.predict_mu(zero_rows)
        mu_c = model.count_part.predict_mu(count_rows)
        out = [
            HurdleDistribution(
                p_zero=float(1.0 - pp),
                count=FamilySpec(model.count_part.family, float(mc), model.count_part.theta),
            )
            for pp, mc in zip(p_pos, mu_c)
        ]
        single = (np.asarray(count_rows).ndim == 1)
        return out[0] if single else out
    raise DomainError(f"cannot predict from {type(model).__name__}")


def predict_mean(model, rows):
    """Expected count per row; hurdle uses (1 - p0) * truncated mean."""
    if isinstance(model, FittedModel):
        mu = model.predict_mu(rows)
        if model.family in ("zt_poisson", "zt_negbin"):
            base = "poisson" if model.family == "zt_poisson" else "negbin"
            f0 = np.exp(log_zero_prob(base, mu, model.theta))
            mu = mu / (1.0 - f0)
        return mu[0] if np.asarray(rows).ndim == 1 else mu
    if isinstance(model, HurdleFit):
        if isinstance(rows, tuple):
            count_rows, zero_rows = rows
        else:
            count_rows = zero_rows = rows
        p_pos = model.zero_part.predict_mu(zero_rows)
        mu_c = model.count_part.predict_mu(count_rows)
        base = "poisson" if model.count_part.family == "zt_poisson" else "negbin"
        f0 = np.exp(log_zero_prob(base, mu_c, model.count_part.theta))
        out = p_pos * mu_c / (1.0 - f0)
        return out[0] if np.asarray(count_rows).ndim == 1 else out
    raise DomainError(f"cannot predict from {type(model).__name__}")
