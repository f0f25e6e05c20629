import json

import numpy as np
import pytest

from countfit.cli import main
from countfit.datasets import dataset_path

CRABS = str(dataset_path("crabs"))
BIDS = str(dataset_path("takeover_bids"))


def run(capsys, *args):
    code = main(list(args))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_compare_bic_ladder(capsys):
    code, out, err = run(
        capsys, "compare", "--data", CRABS,
        "--formula", "satellites ~ width + color",
        "--family", "poisson", "--family", "negbin",
        "--family", "hurdle-poisson", "--family", "hurdle-negbin",
    )
    assert code == 0
    lines = out.strip().splitlines()
    order = [line.split()[0] for line in lines[1:]]
    assert order == ["hurdle-negbin", "hurdle-poisson", "negbin", "poisson"]
    bics = [float(line.split()[-1]) for line in lines[1:]]
    for got, want in zip(bics, (736.8, 755.1, 769.5, 931.0)):
        assert got == pytest.approx(want, abs=0.15)


def test_compare_needs_two_models(capsys):
    code, _, err = run(
        capsys, "compare", "--data", CRABS,
        "--formula", "satellites ~ width + color", "--family", "poisson",
    )
    assert code == 1
    assert "E_CONFIG" in err


def test_compare_identical_specs_stable(capsys):
    code, out, _ = run(
        capsys, "compare", "--data", CRABS,
        "--formula", "satellites ~ width + color",
        "--family", "poisson,poisson",
    )
    assert code == 0
    rows = out.strip().splitlines()[1:]
    assert len(rows) == 2
    assert rows[0] == rows[1]


def test_fit_hurdle_zero_part_values(capsys):
    code, out, _ = run(
        capsys, "fit", "--data", CRABS,
        "--formula", "satellites ~ 1 | width + color",
        "--family", "hurdle-negbin", "--format", "json",
    )
    assert code == 0
    doc = json.loads(out)
    zero = {row["name"]: row for row in doc["parts"]["zero"]}
    assert zero["(Intercept)"]["estimate"] == pytest.approx(-10.07, abs=0.02)
    assert zero["(Intercept)"]["se"] == pytest.approx(2.81, abs=0.02)
    assert zero["width"]["estimate"] == pytest.approx(0.46, abs=0.02)
    assert zero["width"]["se"] == pytest.approx(0.10, abs=0.02)
    assert zero["color"]["estimate"] == pytest.approx(-0.51, abs=0.02)
    assert zero["color"]["se"] == pytest.approx(0.22, abs=0.02)


def test_fit_bids_size_coefficient(capsys):
    code, out, _ = run(
        capsys, "fit", "--data", BIDS,
        "--formula",
        "bids ~ legalrest + realrest + finrest + whiteknight + bidpremium"
        " + insthold + regulation + size + size^2",
        "--family", "poisson", "--format", "json",
    )
    assert code == 0
    doc = json.loads(out)
    params = {row["name"]: row for row in doc["parts"]["model"]}
    assert params["size"]["estimate"] == pytest.approx(0.18, abs=0.01)
    assert params["size"]["se"] == pytest.approx(0.06, abs=0.01)


def test_fit_empty_data_file(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    code, _, err = run(
        capsys, "fit", "--data", str(empty), "--formula", "y ~ x",
        "--family", "poisson",
    )
    assert code == 1
    assert "E_TABLE" in err


def test_rootogram_json_16_bins_and_signs(capsys):
    code, out, _ = run(
        capsys, "rootogram", "--data", CRABS,
        "--formula", "satellites ~ width + color",
        "--family", "poisson", "--max-count", "15", "--format", "json",
    )
    assert code == 0
    doc = json.loads(out)
    assert len(doc["bin_centers"]) == 16
    exp = np.array(doc["expected_curve"]) ** 2
    obs = (np.array(doc["bar_top"]) - np.array(doc["bar_bottom"])) ** 2
    assert obs[0] > exp[0]  # zero bin underfitted
    assert np.all(exp[1:5] > obs[1:5])  # counts 1..4 overfitted


def test_rootogram_hurdle_zero_bar_rests_on_reference(capsys):
    code, out, _ = run(
        capsys, "rootogram", "--data", CRABS,
        "--formula", "satellites ~ 1 | width + color",
        "--family", "hurdle-negbin", "--format", "json",
    )
    doc = json.loads(out)
    assert abs(doc["bar_bottom"][0]) < 1e-6


def test_rootogram_standing_bottoms_zero(capsys):
    code, out, _ = run(
        capsys, "rootogram", "--data", CRABS,
        "--formula", "satellites ~ width + color",
        "--family", "negbin", "--style", "standing", "--format", "json",
    )
    doc = json.loads(out)
    assert np.allclose(doc["bar_bottom"], 0.0)


def test_rootogram_svg_structure(tmp_path, capsys):
    out_path = tmp_path / "r.svg"
    code, _, _ = run(
        capsys, "rootogram", "--data", CRABS,
        "--formula", "satellites ~ width + color",
        "--family", "poisson", "--max-count", "15",
        "--out", str(out_path),
    )
    assert code == 0
    svg = out_path.read_text()
    assert svg.count("<rect") == 16
    assert svg.count("<polyline") == 1


def test_svg_byte_determinism(tmp_path, capsys):
    paths = []
    for name in ("a.svg", "b.svg"):
        out_path = tmp_path / name
        run(
            capsys, "rootogram", "--data", CRABS,
            "--formula", "satellites ~ width + color",
            "--family", "negbin", "--out", str(out_path),
        )
        paths.append(out_path.read_bytes())
    assert paths[0] == paths[1]


def test_qq_inside_envelope_fraction(capsys):
    code, out, _ = run(
        capsys, "qq", "--data", CRABS,
        "--formula", "satellites ~ 1 | width + color",
        "--family", "hurdle-negbin", "--B", "300", "--format", "json",
    )
    assert code == 0
    doc = json.loads(out)
    sample = np.array(doc["sample"])
    inside = np.mean(
        (sample >= np.array(doc["envelope_lower"]))
        & (sample <= np.array(doc["envelope_upper"]))
    )
    assert inside >= 0.95


def test_qq_poisson_escapes_above(capsys):
    code, out, _ = run(
        capsys, "qq", "--data", CRABS,
        "--formula", "satellites ~ width + color",
        "--family", "poisson", "--B", "300", "--format", "json",
    )
    doc = json.loads(out)
    sample = np.array(doc["sample"])
    upper = np.array(doc["envelope_upper"])
    assert np.any(sample[-20:] > upper[-20:])


def test_qq_single_observation_errors(tmp_path, capsys):
    f = tmp_path / "one.csv"
    f.write_text("y,x\n3,1.0\n4,2.0\n")
    # two rows fit, but a single-row table must fail cleanly
    g = tmp_path / "single.csv"
    g.write_text("y,x\n3,1.0\n")
    code, _, err = run(
        capsys, "qq", "--data", str(g), "--formula", "y ~ 1",
        "--family", "poisson",
    )
    assert code == 1


def test_pearson_json(capsys):
    code, out, _ = run(
        capsys, "pearson", "--data", CRABS,
        "--formula", "satellites ~ width + color",
        "--family", "negbin", "--format", "json",
    )
    assert code == 0
    doc = json.loads(out)
    assert len(doc["residuals"]) == 173
    assert len(doc["fitted_means"]) == 173


def test_bootstrap_json_deterministic_and_complete(capsys):
    args = (
        "bootstrap", "--data", CRABS,
        "--formula", "satellites ~ 1 | width + color",
        "--family", "hurdle-negbin", "--B", "200", "--max-count", "15",
        "--format", "json",
    )
    code, out1, _ = run(capsys, *args)
    assert code == 0
    code, out2, _ = run(capsys, *args)
    assert out1 == out2
    doc = json.loads(out1)
    assert doc["band"]["replications"] == 200
    assert doc["band"]["failures"] == 0
    assert doc["warning_limits"] == [-1.0, 1.0]


def test_bootstrap_svg_has_band_and_limits(tmp_path, capsys):
    out_path = tmp_path / "boot.svg"
    code, _, _ = run(
        capsys, "bootstrap", "--data", CRABS,
        "--formula", "satellites ~ 1 | width + color",
        "--family", "hurdle-negbin", "--B", "50", "--max-count", "15",
        "--out", str(out_path),
    )
    assert code == 0
    svg = out_path.read_text()
    assert svg.count("stroke-dasharray") >= 2  # two dashed warning limits
    assert svg.count("<polyline") == 3  # band lower, band upper, expected curve


def test_bootstrap_rejects_zero_replications(capsys):
    code, _, err = run(
        capsys, "bootstrap", "--data", CRABS,
        "--formula", "satellites ~ width + color",
        "--family", "poisson", "--B", "0",
    )
    assert code == 1
    assert "E_CONFIG" in err


def test_simulate_poisson_mean(tmp_path, capsys):
    out_path = tmp_path / "sim.csv"
    code, _, _ = run(
        capsys, "simulate", "--family", "poisson", "--n", "100", "--mu", "3",
        "--out", str(out_path),
    )
    assert code == 0
    values = np.loadtxt(out_path, skiprows=1)
    assert values.size == 100
    assert abs(values.mean() - 3.0) < 0.6


def test_simulate_negbin_overdispersed(capsys):
    over = 0
    runs = 200
    for seed in range(runs):
        code, out, _ = run(
            capsys, "simulate", "--family", "negbin", "--n", "100",
            "--mu", "3", "--theta", "2", "--seed", str(seed),
        )
        values = np.array([int(v) for v in out.split()[1:]])
        over += values.var() > values.mean()
    assert over >= 0.95 * runs


def test_simulate_rejects_bad_n(capsys):
    code, _, err = run(capsys, "simulate", "--family", "poisson", "--mu", "3",
                       "--n", "0")
    assert code == 1
    assert "E_CONFIG" in err


def test_unknown_family_rejected(capsys):
    code, _, err = run(
        capsys, "fit", "--data", CRABS, "--formula", "satellites ~ width",
        "--family", "gaussian",
    )
    assert code == 1
    assert "E_CONFIG" in err


def test_parse_error_code_surfaces(capsys):
    code, _, err = run(
        capsys, "fit", "--data", CRABS, "--formula", "satellites width",
        "--family", "poisson",
    )
    assert code == 1
    assert "E_PARSE" in err


def test_mixture_posterior_weighted_rootogram(capsys):
    # posterior:k weights on a small synthetic mixture keep runtime low
    import countfit

    rng = np.random.default_rng(4)
    comp = rng.random(300) < 0.5
    lam = np.where(comp, rng.gamma(2, 0.5, 300), rng.gamma(5, 1.6, 300))
    y = rng.poisson(lam)
    import csv, tempfile, os

    fd, path = tempfile.mkstemp(suffix=".csv")
    with os.fdopen(fd, "w") as fh:
        fh.write("y\n" + "\n".join(str(v) for v in y) + "\n")
    try:
        code, out, err = run(
            capsys, "rootogram", "--data", path, "--formula", "y ~ 1",
            "--family", "mixture-negbin", "--K", "2", "--restarts", "2",
            "--weights", "posterior:1", "--format", "json",
        )
        assert code == 0, err
        doc = json.loads(out)
        # weighted frequencies are far below the full sample size
        total_obs = float(np.sum((np.array(doc["bar_top"]) -
                                  np.array(doc["bar_bottom"])) ** 2))
        assert 0 < total_obs < 300
    finally:
        os.unlink(path)
