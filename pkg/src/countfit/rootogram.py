"""Weighted observed/expected frequency tables and rootogram geometry.

Frequencies are computed over half-open bins ``(b_j, b_{j+1}]``.  Observed
mass is a weighted indicator sum; expected mass differences the fitted
per-observation cdf between bin edges snapped down to integers, so the
default half-integer breaks make bin j carry exactly the mass of count j.

The layout step turns a frequency table into drawable bar geometry in one
of three styles, all on the square-root scale by default:

* ``standing``  - bars from 0 up to sqrt(obs), curve at sqrt(exp);
* ``hanging``   - bars hang from the curve: top sqrt(exp), bottom
  sqrt(exp) - sqrt(obs), so deviations line up on the zero line;
* ``suspended`` - bars show the deviations sqrt(exp) - sqrt(obs) directly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .families import DomainError

STYLES = ("hanging", "standing", "suspended")
SCALES = ("sqrt", "raw")


@dataclass(frozen=True)
class BreakSpec:
    """Strictly increasing bin edges; ``open_tail`` folds (b_last, inf) into
    the final bin."""

    breaks: np.ndarray
    open_tail: bool = False

    def __post_init__(self):
        edges = np.asarray(self.breaks, dtype=float)
        if edges.ndim != 1 or edges.size < 2:
            raise DomainError("need at least two break points")
        if not np.all(np.diff(edges) > 0):
            raise DomainError("breaks must be strictly increasing")
        object.__setattr__(self, "breaks", edges)

    @classmethod
    def integer_bins(cls, max_count: int, open_tail: bool = False) -> "BreakSpec":
        """Half-integer edges so bin j is exactly the integer count j."""
        if max_count < 0:
            raise DomainError("max_count must be nonnegative")
        return cls(np.arange(max_count + 2) - 0.5, open_tail=open_tail)

    @property
    def n_bins(self) -> int:
        return self.breaks.size - 1

    @property
    def centers(self) -> np.ndarray:
        return (self.breaks[:-1] + self.breaks[1:]) / 2.0

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breaks)


@dataclass(frozen=True)
class FrequencyTable:
    """Per-bin weighted observed and expected frequencies."""

    bins: BreakSpec
    obs: np.ndarray
    exp: np.ndarray
    total_weight: float
    obs_overflow: float = 0.0  # observed weight outside every bin

    def __post_init__(self):
        obs = np.asarray(self.obs, dtype=float)
        exp = np.asarray(self.exp, dtype=float)
        if obs.shape != (self.bins.n_bins,) or exp.shape != (self.bins.n_bins,):
            raise DomainError("obs/exp length must equal the number of bins")
        object.__setattr__(self, "obs", obs)
        object.__setattr__(self, "exp", exp)


def observed_frequencies(y, weights, breaks: BreakSpec):
    """Weighted counts per bin: obs_j = sum of w_i over y_i in (b_j, b_{j+1}].

    Returns ``(obs, overflow)`` where overflow is the weight falling outside
    every bin (none when the breaks span the data or the tail is open).
    """
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != y.shape:
        raise DomainError("weights length must match observations")
    if np.any(w < 0):
        raise DomainError("weights must be nonnegative")
    edges = breaks.breaks
    idx = np.searchsorted(edges, y, side="left") - 1
    m = breaks.n_bins
    if breaks.open_tail:
        idx = np.where(y > edges[-1], m - 1, idx)
    inside = (y > edges[0]) & (idx >= 0) & (idx < m)
    obs = np.bincount(idx[inside], weights=w[inside], minlength=m)
    overflow = float(w[~inside].sum())
    return obs, overflow


def expected_frequencies(model, breaks: BreakSpec, weights=None, n_obs=None):
    """Model-implied weighted frequencies per bin.

    ``model`` is any fit exposing ``cdf_matrix(j_values)`` over its own
    observations (single-family, hurdle, or mixture fits all do).  Bin edges
    are floored to integers before the cdf is differenced, so half-integer
    breaks recover the exact per-count masses.
    """
    n = model.cdf_matrix(np.array([0.0])).shape[0] if n_obs is None else n_obs
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise DomainError("weights length must match the model's observations")
    if np.any(w < 0):
        raise DomainError("weights must be nonnegative")
    edges = np.floor(breaks.breaks)
    if breaks.open_tail:
        edges = edges.copy()
        edges[-1] = np.inf
    F = model.cdf_matrix(edges)
    return (F[:, 1:] - F[:, :-1]).T @ w


def frequency_table(model, breaks: BreakSpec, response=None, weights=None) -> FrequencyTable:
    """Observed and expected frequencies for a fitted model over ``breaks``.

    ``response`` defaults to the responses the model was fit on.
    """
    if response is None:
        response = getattr(model, "response", None)
        if response is None:
            raise DomainError("pass the response explicitly for this model type")
    y = np.asarray(response, dtype=float)
    if hasattr(model, "zero_part"):
        # the logit part holds the 0/1 indicator, not the counts
        n = model.zero_part.design.n
    else:
        n = model.design.n
    if y.shape != (n,):
        raise DomainError("response length must match the fitted model")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    obs, overflow = observed_frequencies(y, w, breaks)
    exp = expected_frequencies(model, breaks, weights=w, n_obs=n)
    return FrequencyTable(
        bins=breaks, obs=obs, exp=exp, total_weight=float(w.sum()),
        obs_overflow=overflow,
    )


@dataclass(frozen=True)
class RootogramCoords:
    """Style-resolved plotting geometry for one rootogram."""

    style: str
    scale: str
    bin_centers: np.ndarray
    bar_bottom: np.ndarray
    bar_top: np.ndarray
    expected_curve: np.ndarray
    bar_width: float
    reference_line: float = 0.0

    def to_dict(self) -> dict:
        return {
            "schema": "countfit.rootogram/1",
            "style": self.style,
            "scale": self.scale,
            "bin_centers": self.bin_centers.tolist(),
            "bar_bottom": self.bar_bottom.tolist(),
            "bar_top": self.bar_top.tolist(),
            "expected_curve": self.expected_curve.tolist(),
            "bar_width": self.bar_width,
            "reference_line": self.reference_line,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def layout_rootogram(freqs: FrequencyTable, style: str = "hanging",
                     scale: str = "sqrt") -> RootogramCoords:
    """Resolve a frequency table into bar geometry for the chosen style."""
    if style not in STYLES:
        raise DomainError(f"style must be one of {STYLES}, got {style!r}")
    if scale not in SCALES:
        raise DomainError(f"scale must be one of {SCALES}, got {scale!r}")
    t = np.sqrt if scale == "sqrt" else np.asarray
    obs_t = t(freqs.obs)
    exp_t = t(freqs.exp)
    if style == "standing":
        bottom = np.zeros_like(obs_t)
        top = obs_t
    elif style == "hanging":
        top = exp_t
        bottom = exp_t - obs_t
    else:  # suspended: deviations drawn from the reference line
        dev = exp_t - obs_t
        bottom = np.minimum(dev, 0.0)
        top = np.maximum(dev, 0.0)
    return RootogramCoords(
        style=style,
        scale=scale,
        bin_centers=freqs.bins.centers,
        bar_bottom=bottom,
        bar_top=top,
        expected_curve=exp_t,
        bar_width=0.9 * float(np.min(freqs.bins.widths)),
    )
