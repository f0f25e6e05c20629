"""Finite mixtures of negative binomial regressions, estimated by EM.

Each component has its own coefficient vector and dispersion; the E-step
computes posterior membership probabilities, the M-step refits every
component by a posterior-weighted NB regression (warm started from the
previous iterate, so late M-steps cost a couple of Newton polishes).

Restarts fight local optima: restart 0 splits the sample at the response
median, later restarts draw random posterior matrices from a child stream
of the master seed, and the best final log-likelihood wins (ties go to the
lowest restart index).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .families import DomainError, cdf_grid, pmf_grid
from .fitting import (
    ConvergenceError,
    DesignMatrix,
    FitError,
    FittedModel,
    fit_glm,
)

EM_MAX_ITER = 500
# NB mixtures converge onto long, nearly flat ridges: posterior masses keep
# drifting for thousands of iterations while the log-likelihood gains less
# than 1e-2 in total.  The classical reported fits for this model family
# stop on a relative change of 1e-6, and so do we by default; a tighter
# tolerance yields a marginally higher log-likelihood but materially
# different (and less interpretable) component masses.
EM_RTOL = 1e-6
EM_MONOTONE_SLACK = 1e-8
MIN_MIXING_WEIGHT = 1e-6


class DegenerateComponentError(FitError):
    code = "E_DEGENERATE"


@dataclass
class MixtureFit:
    """A converged K-component NB mixture regression."""

    K: int
    components: tuple[FittedModel, ...]
    mixing_weights: np.ndarray
    posteriors: np.ndarray
    loglik: float
    df: int
    n_obs: float
    posterior_sums: np.ndarray
    restart_logliks: tuple[float, ...]
    n_iter: int
    _cov: np.ndarray = None

    @property
    def design(self) -> DesignMatrix:
        return self.components[0].design

    @property
    def response(self) -> np.ndarray:
        return self.components[0].response

    @property
    def covariance(self) -> np.ndarray:
        """Joint observed-information inverse over all mixture parameters
        (component coefficients, log dispersions, mixing logits); unlike the
        per-component conditional Hessians this carries the class-membership
        uncertainty, which is what makes mixture standard errors large."""
        if self._cov is None:
            self._cov = mixture_covariance(self)
        return self._cov

    def component_standard_errors(self, k: int) -> np.ndarray:
        """SEs for component k's (coefficients, log dispersion) from the
        joint mixture covariance."""
        p = self.design.p
        base = k * (p + 1)
        idx = np.arange(base, base + p + 1)
        return np.sqrt(np.diag(self.covariance)[idx])

    def component_mu(self) -> np.ndarray:
        """(n, K) matrix of per-component fitted means."""
        return np.column_stack([c.fitted_mu for c in self.components])

    def cdf_matrix(self, j_values) -> np.ndarray:
        out = 0.0
        for pi_k, comp in zip(self.mixing_weights, self.components):
            out = out + pi_k * cdf_grid("negbin", comp.fitted_mu, comp.theta, j_values)
        return out

    def pmf_matrix(self, j_max: int) -> np.ndarray:
        out = 0.0
        for pi_k, comp in zip(self.mixing_weights, self.components):
            out = out + pi_k * pmf_grid("negbin", comp.fitted_mu, comp.theta, j_max)
        return out

    def simulate(self, rng: np.random.Generator) -> np.ndarray:
        n = self.design.n
        z = rng.choice(self.K, size=n, p=self.mixing_weights)
        y = np.empty(n, dtype=np.int64)
        for k, comp in enumerate(self.components):
            rows = z == k
            if rows.any():
                lam = rng.gamma(comp.theta, comp.fitted_mu[rows] / comp.theta)
                y[rows] = rng.poisson(lam)
        return y


def _nb_log_density(y, mu, theta):
    from scipy.special import gammaln

    return (
        gammaln(y + theta)
        - gammaln(theta)
        - gammaln(y + 1.0)
        + theta * (np.log(theta) - np.log(theta + mu))
        + y * (np.log(mu) - np.log(theta + mu))
    )


def _initial_posteriors(y, K, restart, rng):
    n = y.size
    if restart == 0:
        # split at the response quantiles: low counts lean on the first
        # component, high counts on the last, soft enough that every
        # component sees every observation
        edges = np.quantile(y, np.linspace(0, 1, K + 1)[1:-1]) if K > 1 else []
        group = np.searchsorted(np.asarray(edges), y, side="right")
    else:
        # random hard assignment, softened the same way
        group = rng.integers(0, K, size=n)
    post = np.full((n, K), 0.1 / max(K - 1, 1))
    post[np.arange(n), group] = 0.9
    return post / post.sum(axis=1, keepdims=True)


def _em_run(design, y, K, post, max_iter=EM_MAX_ITER, tol=EM_RTOL):
    """One EM run from an initial posterior matrix; returns a MixtureFit-shaped
    tuple (components, pi, posteriors, loglik, n_iter)."""
    components = None
    ll = -np.inf
    for it in range(1, max_iter + 1):
        pi = post.mean(axis=0)
        bad = np.flatnonzero(pi < MIN_MIXING_WEIGHT)
        if bad.size:
            raise DegenerateComponentError(
                f"mixture component {bad[0]} collapsed (weight {pi[bad[0]]:.2e})"
            )
        new_components = []
        for k in range(K):
            start = components[k].packed_params if components is not None else None
            new_components.append(
                fit_glm(design, y, family="negbin", weights=post[:, k], start=start)
            )
        components = new_components

        log_f = np.column_stack(
            [_nb_log_density(y, c.fitted_mu, c.theta) for c in components]
        )
        log_joint = np.log(pi)[None, :] + log_f
        norm = logsumexp(log_joint, axis=1)
        post = np.exp(log_joint - norm[:, None])
        ll_new = float(np.sum(norm))
        if ll_new < ll - EM_MONOTONE_SLACK:
            raise ConvergenceError(
                f"EM log-likelihood decreased at iteration {it}: {ll} -> {ll_new}"
            )
        done = abs(ll_new - ll) / (1.0 + abs(ll_new)) < tol
        ll = ll_new
        if done:
            break
    # pin the invariant pi_k = mean posterior column at the returned iterate
    return components, post.mean(axis=0), post, ll, it


def _component_order_key(component: FittedModel) -> float:
    """Labeling key: the intercept-implied mean when there is an intercept
    column, the average fitted mean otherwise."""
    X = component.design.values
    if X.shape[1] and np.all(X[:, 0] == 1.0):
        return float(component.coefficients[0])
    return float(np.mean(component.fitted_mu))


def fit_mixture(design: DesignMatrix, response, K: int, restarts: int = 5,
                seed: int = 0, tol: float = EM_RTOL,
                max_iter: int = EM_MAX_ITER) -> MixtureFit:
    """Fit a K-component NB mixture regression by EM with restarts.

    ``restarts`` counts the total number of EM runs; the best final
    log-likelihood wins, ties going to the lowest restart index.  Components
    come back sorted by their intercept-implied mean (ascending), which pins
    down the labeling.
    """
    y = np.asarray(response, dtype=float)
    if K < 1:
        raise DomainError("K must be at least 1")
    if restarts < 1:
        raise DomainError("restarts must be at least 1")
    p = design.p
    if y.size <= K * (p + 1):
        raise DomainError(
            f"mixture needs n > K(p+1) = {K * (p + 1)}, got n = {y.size}"
        )

    best = None
    logliks = []
    for r in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=[seed, r]))
        post0 = _initial_posteriors(y, K, r, rng)
        try:
            run = _em_run(design, y, K, post0, max_iter=max_iter, tol=tol)
        except (FitError, DomainError):
            logliks.append(float("-inf"))
            continue
        logliks.append(run[3])
        if best is None or run[3] > best[3]:
            best = run
    if best is None:
        raise ConvergenceError("every EM restart failed")

    components, pi, post, ll, n_iter = best
    order = np.argsort([_component_order_key(c) for c in components])
    components = tuple(components[k] for k in order)
    pi = pi[order]
    post = post[:, order]

    return MixtureFit(
        K=K,
        components=components,
        mixing_weights=pi,
        posteriors=post,
        loglik=ll,
        df=K * (p + 1) + (K - 1),
        n_obs=float(y.size),
        posterior_sums=post.sum(axis=0),
        restart_logliks=tuple(logliks),
        n_iter=n_iter,
    )


# ---------------------------------------------------------------------------
# Joint covariance of the mixture likelihood
# ---------------------------------------------------------------------------

def _mixture_score(packed, X, y, K, p):
    """Observed-data mixture score at the packed parameter vector.

    Packing: (beta_k, log theta_k) for k = 0..K-1, then the K-1 mixing
    logits relative to the last component.  The component scores follow
    Fisher's identity: posterior-weighted complete-data scores.
    """
    from .fitting import _negbin_ll_grad

    comps = packed[: K * (p + 1)].reshape(K, p + 1)
    lam = packed[K * (p + 1):]
    logits = np.concatenate([lam, [0.0]])
    pi = np.exp(logits - logsumexp(logits))

    log_f = np.column_stack(
        [
            _nb_log_density(y, np.exp(np.clip(X @ comps[k, :p], -200, 200)),
                            np.exp(comps[k, p]))
            for k in range(K)
        ]
    )
    log_joint = np.log(pi)[None, :] + log_f
    norm = logsumexp(log_joint, axis=1)
    post = np.exp(log_joint - norm[:, None])
    ll = float(np.sum(norm))

    parts = [
        _negbin_ll_grad(comps[k], X, y, post[:, k])[1]
        for k in range(K)
    ]
    g_mix = post.sum(axis=0)[:-1] - y.size * pi[:-1]
    return ll, np.concatenate(parts + [g_mix])


def mixture_covariance(fit: MixtureFit) -> np.ndarray:
    """Inverse of the numerically differenced joint mixture information."""
    X = fit.design.values
    y = np.asarray(fit.components[0].response, dtype=float)
    K, p = fit.K, fit.design.p
    packed = np.concatenate(
        [c.packed_params for c in fit.components]
        + [np.log(fit.mixing_weights[:-1] / fit.mixing_weights[-1])]
    )
    m = packed.size
    info = np.empty((m, m))
    for j in range(m):
        h = 1e-5 * (1.0 + abs(packed[j]))
        up = packed.copy()
        up[j] += h
        dn = packed.copy()
        dn[j] -= h
        info[:, j] = -(
            _mixture_score(up, X, y, K, p)[1] - _mixture_score(dn, X, y, K, p)[1]
        ) / (2.0 * h)
    info = (info + info.T) / 2.0
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise FitError(f"singular mixture information: {exc}") from exc
    return (cov + cov.T) / 2.0
