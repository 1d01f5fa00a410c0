import json
import subprocess
import sys

import pytest
from click.testing import CliRunner

from steadystein import __version__
from steadystein.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def test_table_csv_schema(runner):
    res = runner.invoke(main, ["table", "tab1"])
    assert res.exit_code == 0
    lines = res.output.splitlines()
    meta = [ln for ln in lines if ln.startswith("#")]
    assert "# exact=true" in meta and f"# version={__version__}" in meta
    body = [ln for ln in lines if not ln.startswith("#")]
    assert body[0] == "n,R,mean_exact,mean_approx,error,bound,bound_ok"
    assert len(body) == 11
    assert "\r" not in res.output


def test_table_is_byte_identical_across_runs(tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"run{i}.csv"
        subprocess.run([sys.executable, "-m", "steadystein.cli", "table", "ph", "--n", "15",
                        "--steps", "2000", "--reps", "2", "--burnin", "1", "--seed", "5",
                        "--out", str(path)], check=True)
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    assert b"# seed=5" in outs[0] and b"stderr_constant" in outs[0]


def test_job_count_does_not_change_output(runner):
    one = runner.invoke(main, ["table", "pmf", "--jobs", "1"]).output
    two = runner.invoke(main, ["table", "pmf", "--jobs", "2"]).output
    assert one == two


def test_unknown_table_is_usage_error(runner):
    assert runner.invoke(main, ["table", "tab9"]).exit_code == 2


def test_md_curve_threshold_precondition(runner):
    res = runner.invoke(main, ["md-curve", "--n", "100", "--rho", "0.9", "--z-min", "0.0"])
    assert res.exit_code == 2
    ok = runner.invoke(main, ["md-curve", "--z-max", "3"])
    assert ok.exit_code == 0 and "ordering_holds=true" in ok.output


def test_verify_reports_json_lines(runner):
    res = runner.invoke(main, ["verify", "bar"])
    assert res.exit_code == 0
    rows = [json.loads(ln) for ln in res.stdout.splitlines()]
    assert rows[-1]["passed"] is True
    assert all(r["suite"] == "bar" for r in rows)


def test_md_table_flags(runner):
    res = runner.invoke(main, ["table", "md", "--n", "100", "--rho", "0.6"])
    body = [ln for ln in res.output.splitlines() if not ln.startswith("#")]
    assert len(body) == 2 and body[1].startswith("100,0.6,2.4,")
