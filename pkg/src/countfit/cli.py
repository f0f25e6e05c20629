"""Command-line front end.

Subcommands::

    fit        fit a model and print a coefficient table (text or JSON)
    rootogram  fitted-vs-observed rootogram (svg, json, or text)
    qq         Q-Q plot of randomized quantile residuals with envelope
    pearson    Pearson residuals vs fitted means
    bootstrap  rootogram with +/-1 warning limits and bootstrap band
    compare    fit several families and rank them by BIC
    simulate   write synthetic counts to CSV

Every stochastic command takes ``--seed`` (default 20160906) and is fully
reproducible from its flags; repeated runs emit byte-identical output.
Errors print to stderr as ``countfit: <CODE>: <message>`` with exit code 1.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

import numpy as np

from .diagnostics import (
    bootstrap_band,
    pearson_residuals,
    qq_coordinates,
    quantile_residuals,
    warning_limits,
)
from .families import DomainError, FamilySpec, count_sample
from .fitting import (
    FitError,
    HurdleFit,
    FittedModel,
    fit_glm,
    fit_hurdle,
    information_criteria,
)
from .formula import ParseError, TableError, build_design, parse_formula, read_table
from .mixture import MixtureFit, fit_mixture
from .rootogram import BreakSpec, frequency_table, layout_rootogram
from .svg import render_pearson_svg, render_qq_svg, render_rootogram_svg

DEFAULT_SEED = 20160906
FAMILIES = ("poisson", "negbin", "hurdle-poisson", "hurdle-negbin", "mixture-negbin")


class ConfigError(ValueError):
    code = "E_CONFIG"


@dataclass
class RunConfig:
    command: str
    data_path: str | None = None
    formula: str | None = None
    families: tuple[str, ...] = ()
    style: str = "hanging"
    scale: str = "sqrt"
    max_count: int | None = None
    weights: str | None = None
    K: int = 2
    restarts: int = 5
    B: int | None = None
    seed: int = DEFAULT_SEED
    out: str | None = None
    fmt: str | None = None
    n: int | None = None
    mu: float | None = None
    theta: float | None = None

    @property
    def family(self) -> str:
        if len(self.families) != 1:
            raise ConfigError("exactly one --family is required here")
        return self.families[0]


def _load(config: RunConfig):
    if not config.data_path:
        raise ConfigError("--data is required")
    if not config.formula:
        raise ConfigError("--formula is required")
    table = read_table(config.data_path)
    ast = parse_formula(config.formula)
    built = build_design(ast, table)
    return table, ast, built


def _fit_weights(config: RunConfig, table):
    if config.weights is None or config.weights.startswith("posterior:"):
        return None
    return table.numeric(config.weights)


def _fit_family(config: RunConfig, family: str, table, built):
    weights = _fit_weights(config, table)
    if family in ("poisson", "negbin"):
        y, design = built[0], built[1]
        return fit_glm(design, y, family=family, weights=weights)
    if family in ("hurdle-poisson", "hurdle-negbin"):
        y = built[0]
        count_design = built[1]
        zero_design = built[2] if len(built) == 3 else built[1]
        return fit_hurdle(
            count_design, zero_design, y,
            count_family=family.split("-")[1], weights=weights,
        )
    if family == "mixture-negbin":
        if len(built) == 3:
            raise ConfigError("mixture models take a single-part formula")
        if weights is not None:
            raise ConfigError("mixture models do not take observation weights")
        y, design = built[0], built[1]
        return fit_mixture(design, y, K=config.K, restarts=config.restarts,
                           seed=config.seed)
    raise ConfigError(f"unknown family {family!r}; choose from {FAMILIES}")


def _rootogram_weights_and_model(config: RunConfig, table, model):
    """Resolve --weights for rootogram-style commands.

    ``posterior:k`` (1-based) plots component k of a mixture against its
    posterior weights; a plain column name supplies per-row weights.
    """
    if config.weights is None:
        return model, None
    if config.weights.startswith("posterior:"):
        if not isinstance(model, MixtureFit):
            raise ConfigError("posterior weights need --family mixture-negbin")
        k = int(config.weights.split(":", 1)[1])
        if not 1 <= k <= model.K:
            raise ConfigError(f"posterior component must be in 1..{model.K}")
        return model.components[k - 1], model.posteriors[:, k - 1]
    return model, table.numeric(config.weights)


def _emit(config: RunConfig, payload: str) -> None:
    if config.out:
        with open(config.out, "w") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)


def _report_parts(model):
    """(part name -> [(param, estimate, se)]) for the fit report."""
    if isinstance(model, HurdleFit):
        return {
            "count": list(zip(model.count_part.parameter_names,
                              model.count_part.packed_params,
                              model.count_part.standard_errors)),
            "zero": list(zip(model.zero_part.parameter_names,
                             model.zero_part.packed_params,
                             model.zero_part.standard_errors)),
        }
    if isinstance(model, MixtureFit):
        out = {}
        for k, comp in enumerate(model.components, start=1):
            out[f"component {k}"] = list(zip(comp.parameter_names,
                                             comp.packed_params,
                                             model.component_standard_errors(k - 1)))
        return out
    return {
        "model": list(zip(model.parameter_names, model.packed_params,
                          model.standard_errors)),
    }


def _text_report(config: RunConfig, family: str, model) -> str:
    ic = information_criteria(model.loglik, model.df, model.n_obs)
    parts = _report_parts(model)
    names: list[str] = []
    for rows in parts.values():
        for name, _, _ in rows:
            if name not in names:
                names.append(name)
    width = max(len(n) for n in names) + 2
    colw = 20
    lines = [
        f"family: {family}   formula: {config.formula}",
        f"N {model.n_obs:g}   log-likelihood {model.loglik:.2f}   df {model.df}   "
        f"AIC {ic['aic']:.2f}   BIC {ic['bic']:.2f}",
        "",
        " " * width + "".join(p.ljust(colw) for p in parts),
    ]
    for name in names:
        row = name.ljust(width)
        for rows in parts.values():
            cell = ""
            for pname, est, se in rows:
                if pname == name:
                    cell = f"{est:8.3f} ({se:.3f})"
                    break
            row += cell.ljust(colw)
        lines.append(row.rstrip())
    if isinstance(model, MixtureFit):
        lines.append("")
        lines.append("mixing weights: " +
                     ", ".join(f"{p:.3f}" for p in model.mixing_weights))
        lines.append("posterior sums (N): " +
                     ", ".join(f"{s:.1f}" for s in model.posterior_sums))
    return "\n".join(lines) + "\n"


def _json_report(config: RunConfig, family: str, model) -> str:
    ic = information_criteria(model.loglik, model.df, model.n_obs)
    doc = {
        "schema": "countfit.fit/1",
        "family": family,
        "formula": config.formula,
        "n": model.n_obs,
        "loglik": model.loglik,
        "df": model.df,
        "aic": ic["aic"],
        "bic": ic["bic"],
        "parts": {
            part: [
                {"name": n, "estimate": float(e), "se": float(s)}
                for n, e, s in rows
            ]
            for part, rows in _report_parts(model).items()
        },
    }
    if isinstance(model, MixtureFit):
        doc["mixing_weights"] = model.mixing_weights.tolist()
        doc["posterior_sums"] = model.posterior_sums.tolist()
    return json.dumps(doc, indent=2) + "\n"


def cmd_fit(config: RunConfig) -> None:
    table, _, built = _load(config)
    model = _fit_family(config, config.family, table, built)
    fmt = config.fmt or "text"
    if fmt == "json":
        _emit(config, _json_report(config, config.family, model))
    elif fmt == "text":
        _emit(config, _text_report(config, config.family, model))
    else:
        raise ConfigError(f"fit cannot write format {fmt!r}")


def _make_rootogram(config: RunConfig, table, model, weights):
    y = np.asarray(model.response, dtype=float)
    max_count = config.max_count if config.max_count is not None else int(y.max())
    breaks = BreakSpec.integer_bins(max_count)
    freqs = frequency_table(model, breaks, weights=weights)
    return layout_rootogram(freqs, style=config.style, scale=config.scale)


def cmd_rootogram(config: RunConfig) -> None:
    table, _, built = _load(config)
    model = _fit_family(config, config.family, table, built)
    model, weights = _rootogram_weights_and_model(config, table, model)
    coords = _make_rootogram(config, table, model, weights)
    fmt = config.fmt or "svg"
    if fmt == "json":
        _emit(config, coords.to_json(indent=2) + "\n")
    elif fmt == "svg":
        _emit(config, render_rootogram_svg(
            coords, title=f"{config.family}: {config.formula}"))
    elif fmt == "text":
        lines = ["count  observed-bar [bottom, top]  expected"]
        for c, b, t, e in zip(coords.bin_centers, coords.bar_bottom,
                              coords.bar_top, coords.expected_curve):
            lines.append(f"{c:5g}  [{b:8.3f}, {t:8.3f}]  {e:8.3f}")
        _emit(config, "\n".join(lines) + "\n")
    else:
        raise ConfigError(f"rootogram cannot write format {fmt!r}")


def cmd_qq(config: RunConfig) -> None:
    table, _, built = _load(config)
    model = _fit_family(config, config.family, table, built)
    model, weights = _rootogram_weights_and_model(config, table, model)
    if weights is not None:
        raise ConfigError("qq does not take weights")
    if np.asarray(model.response).size < 2:
        raise ConfigError("need at least two observations for a Q-Q plot")
    residuals = quantile_residuals(model, seed=config.seed)
    qq = qq_coordinates(residuals, envelope_draws=config.B or 1000,
                        seed=config.seed)
    fmt = config.fmt or "svg"
    if fmt == "json":
        _emit(config, qq.to_json(indent=2) + "\n")
    elif fmt == "svg":
        _emit(config, render_qq_svg(qq, title=f"{config.family}: Q-Q"))
    else:
        raise ConfigError(f"qq cannot write format {fmt!r}")


def cmd_pearson(config: RunConfig) -> None:
    table, _, built = _load(config)
    model = _fit_family(config, config.family, table, built)
    series = pearson_residuals(model)
    fmt = config.fmt or "svg"
    if fmt == "json":
        doc = {
            "schema": "countfit.pearson/1",
            "fitted_means": series.fitted_means.tolist(),
            "residuals": series.values.tolist(),
        }
        _emit(config, json.dumps(doc, indent=2) + "\n")
    elif fmt == "svg":
        _emit(config, render_pearson_svg(
            series, title=f"{config.family}: Pearson residuals"))
    else:
        raise ConfigError(f"pearson cannot write format {fmt!r}")


def cmd_bootstrap(config: RunConfig) -> None:
    if config.B is not None and config.B < 1:
        raise ConfigError("--B must be at least 1")
    table, _, built = _load(config)
    model = _fit_family(config, config.family, table, built)
    model, weights = _rootogram_weights_and_model(config, table, model)
    coords = _make_rootogram(config, table, model, weights)
    y = np.asarray(model.response, dtype=float)
    max_count = config.max_count if config.max_count is not None else int(y.max())
    band = bootstrap_band(model, BreakSpec.integer_bins(max_count),
                          B=config.B or 10000, seed=config.seed)
    fmt = config.fmt or "svg"
    if fmt == "json":
        doc = {
            "schema": "countfit.bootstrap/1",
            "rootogram": coords.to_dict(),
            "band": band.to_dict(),
            "warning_limits": list(warning_limits()),
        }
        _emit(config, json.dumps(doc, indent=2) + "\n")
    elif fmt == "svg":
        _emit(config, render_rootogram_svg(
            coords, band=band, show_warning_limits=True,
            title=f"{config.family}: bootstrap band ({band.failures} failures)"))
    else:
        raise ConfigError(f"bootstrap cannot write format {fmt!r}")


def cmd_compare(config: RunConfig) -> None:
    if len(config.families) < 2:
        raise ConfigError("compare needs at least two --family values")
    table, _, built = _load(config)
    rows = []
    for family in config.families:
        model = _fit_family(config, family, table, built)
        ic = information_criteria(model.loglik, model.df, model.n_obs)
        rows.append(
            {"family": family, "df": model.df, "loglik": model.loglik,
             "aic": ic["aic"], "bic": ic["bic"]}
        )
    rows.sort(key=lambda r: (r["bic"], r["family"]))
    fmt = config.fmt or "text"
    if fmt == "json":
        _emit(config, json.dumps(
            {"schema": "countfit.compare/1", "models": rows}, indent=2) + "\n")
    elif fmt == "text":
        lines = [f"{'model':<16}{'df':>4}{'loglik':>12}{'AIC':>10}{'BIC':>10}"]
        for r in rows:
            lines.append(
                f"{r['family']:<16}{r['df']:>4}{r['loglik']:>12.2f}"
                f"{r['aic']:>10.2f}{r['bic']:>10.2f}"
            )
        _emit(config, "\n".join(lines) + "\n")
    else:
        raise ConfigError(f"compare cannot write format {fmt!r}")


def cmd_simulate(config: RunConfig) -> None:
    if config.n is None or config.n < 1:
        raise ConfigError("--n must be a positive integer")
    if config.mu is None:
        raise ConfigError("--mu is required")
    family = config.family
    if family not in ("poisson", "negbin"):
        raise ConfigError("simulate supports --family poisson or negbin")
    if family == "negbin" and config.theta is None:
        raise ConfigError("--theta is required for negbin")
    spec = FamilySpec(family, config.mu,
                      config.theta if family == "negbin" else None)
    rng = np.random.default_rng(config.seed)
    draws = count_sample(spec, rng, size=config.n)
    _emit(config, "y\n" + "\n".join(str(int(v)) for v in draws) + "\n")


_COMMANDS = {
    "fit": cmd_fit,
    "rootogram": cmd_rootogram,
    "qq": cmd_qq,
    "pearson": cmd_pearson,
    "bootstrap": cmd_bootstrap,
    "compare": cmd_compare,
    "simulate": cmd_simulate,
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="countfit",
        description="Count regression models with rootogram diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--data", dest="data_path")
        p.add_argument("--formula")
        p.add_argument("--family", action="append", default=None,
                       help="model family; repeat for `compare`")
        p.add_argument("--style", default="hanging",
                       choices=("hanging", "standing", "suspended"))
        p.add_argument("--scale", default="sqrt", choices=("sqrt", "raw"))
        p.add_argument("--max-count", type=int, dest="max_count")
        p.add_argument("--weights",
                       help="weight column, or posterior:k for mixtures")
        p.add_argument("--K", type=int, default=2)
        p.add_argument("--restarts", type=int, default=5)
        p.add_argument("--B", type=int)
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--out")
        p.add_argument("--format", dest="fmt", choices=("text", "json", "svg"))
        if name == "simulate":
            p.add_argument("--n", type=int)
            p.add_argument("--mu", type=float)
            p.add_argument("--theta", type=float)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    families = []
    for item in args.family or []:
        families.extend(f.strip() for f in item.split(",") if f.strip())
    config = RunConfig(
        command=args.command,
        data_path=args.data_path,
        formula=args.formula,
        families=tuple(families),
        style=args.style,
        scale=args.scale,
        max_count=args.max_count,
        weights=args.weights,
        K=args.K,
        restarts=args.restarts,
        B=args.B,
        seed=args.seed,
        out=args.out,
        fmt=args.fmt,
        n=getattr(args, "n", None),
        mu=getattr(args, "mu", None),
        theta=getattr(args, "theta", None),
    )
    try:
        for family in config.families:
            if family not in FAMILIES:
                raise ConfigError(
                    f"unknown family {family!r}; choose from {FAMILIES}")
        _COMMANDS[config.command](config)
    except (ConfigError, DomainError, FitError, ParseError, TableError,
            OSError) as exc:
        code = getattr(exc, "code", "E_IO")
        print(f"countfit: {code}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
