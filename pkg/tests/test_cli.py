"""
Tests for the command-line interface functionality in main.py
"""
import json
import sys

import pandas as pd
import pytest

import main
from exactmeta import univariate
from exactmeta.errors import FitError


def _run(monkeypatch, *args):
    monkeypatch.setattr(sys, "argv", ["main.py", *args])
    return main.main()


def test_cli_uni_json(monkeypatch, tmp_path, uni_csv_path):
    """Test the univariate MC interval written as JSON"""
    out = tmp_path / "result.json"

    # Call main() and check the return code
    exit_code = _run(monkeypatch, "uni", "--input", uni_csv_path, "--B", "50", "--out", str(out))
    assert exit_code == 0

    # Verify results
    result = json.loads(out.read_text())
    for key in ("estimate", "lower", "upper", "tau2", "ess", "mc_se", "n_degenerate", "converged"):
        assert key in result
    assert result["method"] == "mc"
    assert result["lower"] < result["estimate"] < result["upper"]
    assert result["meta"]["k"] == 4


def test_cli_uni_is_deterministic(monkeypatch, tmp_path, uni_csv_path):
    """Test two runs with the same seed write identical output"""
    first, second = tmp_path / "a.json", tmp_path / "b.json"

    assert _run(monkeypatch, "uni", "--input", uni_csv_path, "--B", "40", "--seed", "3",
                "--null", "0", "--out", str(first)) == 0
    assert _run(monkeypatch, "uni", "--input", uni_csv_path, "--B", "40", "--seed", "3",
                "--null", "0", "--out", str(second)) == 0

    assert first.read_text() == second.read_text()
    assert "p_value_at_null" in json.loads(first.read_text())


def test_cli_uni_comparators_csv(monkeypatch, capsys, uni_csv_path):
    """Test all methods as CSV on stdout"""
    exit_code = _run(monkeypatch, "uni", "--input", uni_csv_path, "--method", "all", "--B", "40",
                     "--format", "csv")

    assert exit_code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 6
    assert "lower" in lines[0].split(",")


def test_cli_missing_file(monkeypatch):
    """Test a missing input file exits with code 2"""
    exit_code = _run(monkeypatch, "uni", "--input", "nonexistent_file.csv")

    assert exit_code == 2


def test_cli_method_not_applicable(monkeypatch, uni_csv_path):
    """Test argparse rejects a method of another model"""
    with pytest.raises(SystemExit) as excinfo:
        _run(monkeypatch, "uni", "--input", uni_csv_path, "--method", "acr")

    assert excinfo.value.code == 2


@pytest.mark.parametrize("method", ["dl", "knha", "acr"])
def test_cli_nma_rejects_univariate_methods(monkeypatch, nma_csv_path, method):
    """Test nma offers only the network methods"""
    with pytest.raises(SystemExit) as excinfo:
        _run(monkeypatch, "nma", "--input", nma_csv_path, "--augment", "--method", method)

    assert excinfo.value.code == 2


def test_cli_numerical_failure(monkeypatch, uni_csv_path):
    """Test a numerical failure exits with code 3"""
    def failing_ci(*args, **kwargs):
        raise FitError("did not converge")

    monkeypatch.setattr(univariate, "ci_mu", failing_ci)

    exit_code = _run(monkeypatch, "uni", "--input", uni_csv_path)

    assert exit_code == 3


def test_cli_unexpected_error(monkeypatch, uni_csv_path):
    """Test an unexpected exception exits with code 3"""
    def broken(*args, **kwargs):
        raise RuntimeError("boom")

    monkeypatch.setattr(univariate, "fit_ml", broken)

    assert _run(monkeypatch, "uni", "--input", uni_csv_path) == 3


def test_cli_nma_reml_table(monkeypatch, tmp_path, nma_csv_path):
    """Test the per-treatment table with odds ratio columns"""
    out = tmp_path / "nma.json"

    exit_code = _run(monkeypatch, "nma", "--input", nma_csv_path, "--augment", "--method", "reml",
                     "--exp", "--out", str(out))

    assert exit_code == 0
    result = json.loads(out.read_text())
    assert result["reference"] == "A"
    assert [row["treatment"] for row in result["rows"]] == ["B", "C"]
    assert "exp_lower" in result["rows"][0]


def test_cli_nma_without_augmentation(monkeypatch, nma_csv_path):
    """Test a study lacking the reference arm is an input error"""
    assert _run(monkeypatch, "nma", "--input", nma_csv_path) == 2


def test_cli_nma_contrast_null(monkeypatch, tmp_path, nma_csv_path):
    """Test a contrast interval with a p-value at the null"""
    out = tmp_path / "contrast.json"

    exit_code = _run(monkeypatch, "nma", "--input", nma_csv_path, "--augment", "--method", "lr",
                     "--contrast", "1,-1", "--null", "0", "--B", "20", "--out", str(out))

    assert exit_code == 0
    result = json.loads(out.read_text())
    assert result["contrast"] == [1.0, -1.0]
    assert 0.0 <= result["p_value_at_null"] <= 1.0


def test_cli_nma_contrast_wrong_length(monkeypatch, nma_csv_path):
    """Test --contrast must have one value per non-reference treatment"""
    exit_code = _run(monkeypatch, "nma", "--input", nma_csv_path, "--augment", "--method", "reml",
                     "--contrast", "1,0,0")

    assert exit_code == 2


def test_cli_dta_acr_region_csv(monkeypatch, tmp_path, dta_csv_path):
    """Test the approximate region boundary written as CSV"""
    out = tmp_path / "region.csv"

    exit_code = _run(monkeypatch, "dta", "--input", dta_csv_path, "--method", "acr", "--region",
                     "--M", "16", "--format", "csv", "--out", str(out))

    assert exit_code == 0
    df = pd.read_csv(out)
    assert list(df.columns) == ["method", "t", "muA", "muB", "sens", "fpr"]
    assert len(df) == 16
    assert set(df["method"]) == {"acr"}


def test_cli_dta_bad_null(monkeypatch, dta_csv_path):
    """Test --null for dta needs two values"""
    assert _run(monkeypatch, "dta", "--input", dta_csv_path, "--null", "1.0") == 2


def test_cli_simulate_cell(monkeypatch, tmp_path):
    """Test a small coverage experiment for one cell"""
    out = tmp_path / "sim.json"

    exit_code = _run(monkeypatch, "simulate", "--experiment", "table1", "--cell", "k=3,tau2=0.10",
                     "--R", "3", "--method", "dl", "--out", str(out))

    assert exit_code == 0
    report = json.loads(out.read_text())["reports"][0]
    assert report["cell"] == {"k": 3, "tau2": 0.1}
    assert report["rows"][0]["method"] == "dl"
    assert report["rows"][0]["n_ok"] == 3


def test_cli_simulate_bad_cell(monkeypatch):
    """Test an unknown cell key is an input error"""
    assert _run(monkeypatch, "simulate", "--experiment", "table1", "--cell", "rho=0.4") == 2


def test_cli_requires_subcommand(monkeypatch):
    """Test argparse rejects a missing subcommand"""
    with pytest.raises(SystemExit) as excinfo:
        _run(monkeypatch)

    assert excinfo.value.code == 2
