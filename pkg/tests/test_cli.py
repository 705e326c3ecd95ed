import csv
import io
import json
import subprocess
import sys

import pytest
from scipy.special import ndtri

from judgment_rule.cli import main, parse_grid, parse_rules
from judgment_rule.judgment_core import Judgment


def run(argv, stdin=None):
    """Run the CLI in a subprocess; returns (code, stdout, stderr)."""
    proc = subprocess.run([sys.executable, "-m", "judgment_rule", *argv], input=stdin,
                          capture_output=True, text=True)
    return proc.returncode, proc.stdout, proc.stderr


def call(argv):
    out = io.StringIO()
    code = main(argv, out=out)
    return code, out.getvalue()


def text_fields(output):
    return dict(line.split(None, 1) for line in output.splitlines()
                if line and not line.startswith("#"))


class TestGrid:
    def test_default(self):
        g = parse_grid("-3:3:0.25")
        assert len(g) == 25 and g[0] == -3.0 and g[-1] == 3.0 and 0.0 in g

    @pytest.mark.parametrize("spec", ["3:1:0.5", "0:1:0", "a:b:c", "1:2"])
    def test_invalid(self, spec):
        with pytest.raises(ValueError):
            parse_grid(spec)


class TestRules:
    def test_parse(self):
        rules = parse_rules("judgment,ml,bayes,fixed:0,judgment:1:0.5,bayes:1:2",
                            Judgment(0.0, 0.01))
        assert [r.label for r in rules] == [
            "judgment_0_0.01", "ml", "bayes", "fixed_0", "judgment_1_0.5", "bayes_1_2"]

    @pytest.mark.parametrize("spec", ["", "kelly", "fixed", "judgment:1", "bayes:0:-1"])
    def test_invalid(self, spec):
        with pytest.raises(ValueError):
            parse_rules(spec, Judgment(0.0, 0.05))


class TestDecide:
    def test_reject(self):
        code, out = call(["decide", "--x", "3", "--judgment", "0", "--alpha", "0.05"])
        f = text_fields(out)
        assert code == 0
        assert f["action"] == "1.040036" and f["rejected"] == "true"

    def test_keep(self):
        code, out = call(["decide", "--x", "1", "--judgment", "0", "--alpha", "0.05"])
        f = text_fields(out)
        assert f["action"] == "0.000000" and f["rejected"] == "false"

    def test_ml_limit(self):
        code, out = call(["decide", "--x", "9", "--judgment", "4", "--alpha", "1", "--json"])
        assert json.loads(out)["action"] == 9.0

    def test_text_and_json_agree(self):
        argv = ["decide", "--x", "-2.3", "--judgment", "0.4", "--alpha", "0.1"]
        text = text_fields(call(argv)[1])
        data = json.loads(call(argv + ["--json"])[1])
        for key in ("action", "ci_lower", "ci_upper", "gradient_at_judgment", "displacement"):
            assert text[key] == f"{data[key]:.6f}"
        assert text["branch"] == data["branch"]

    def test_quartic(self):
        code, out = call(["decide", "--x", "3", "--loss", "quartic", "--json"])
        assert json.loads(out)["action"] == pytest.approx(1.0131711, abs=1e-6)

    def test_banner(self):
        out = call(["decide", "--x", "3"])[1]
        assert out.startswith("# judgment-rule 0.1.0\n# command: decide\n")
        assert "alpha=0.05" in out and "judgment=0.0" in out

    def test_usage_errors(self):
        assert call(["decide"])[0] == 2
        assert call(["decide", "--x", "1", "--alpha", "1.5"])[0] == 2
        assert call([])[0] == 2

    def test_subprocess(self):
        code, out, err = run(["decide", "--x", "3", "--json"])
        assert code == 0 and err == ""
        assert json.loads(out)["rejected"] is True


class TestRisk:
    def test_default_sweep_passes(self, tmp_path):
        code, out = call(["risk", "--alpha", "0.05", "--draws", "200000", "--out", str(tmp_path)])
        assert code == 0
        assert "verdict              PASS" in out
        rows = list(csv.DictReader((tmp_path / "risk.csv").open()))
        assert len(rows) == 25
        assert list(rows[0]) == ["theta", "mean_loss", "se_loss", "prob_worse", "se_prob",
                                 "reject_rate"]

    def test_alpha_zero(self, tmp_path):
        code, _ = call(["risk", "--alpha", "0", "--draws", "5000", "--out", str(tmp_path)])
        rows = list(csv.DictReader((tmp_path / "risk.csv").open()))
        assert code == 0 and all(float(r["prob_worse"]) == 0.0 for r in rows)

    def test_empty_grid(self):
        code, out, err = run(["risk", "--grid", "3:1:0.5"])
        assert code == 2 and "empty" in err

    def test_csv_to_stdout(self):
        code, out, err = run(["risk", "--grid", "0:1:0.5", "--draws", "1000"])
        assert code == 0
        assert out.splitlines()[0].startswith("theta,")
        assert "verdict" in err

    def test_bound_violation_exit_code(self, monkeypatch):
        import judgment_rule.cli as cli
        monkeypatch.setattr(cli, "bound_violations", lambda reports, alpha: [0.0])
        assert call(["risk", "--grid", "0:0:1", "--draws", "100"])[0] == 1

    def test_reruns_byte_identical(self, tmp_path):
        argv = ["risk", "--grid=-1:1:0.5", "--draws", "20000", "--seed", "5",
                "--out", str(tmp_path)]
        call(argv)
        first = (tmp_path / "risk.csv").read_bytes(), (tmp_path / "risk_report.txt").read_bytes()
        call(argv + ["--workers", "1"])
        call(argv)
        assert (tmp_path / "risk.csv").read_bytes() == first[0]
        assert (tmp_path / "risk_report.txt").read_bytes() == first[1]

    def test_workers_do_not_change_numbers(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        call(["risk", "--grid", "0:1:0.5", "--draws", "300000", "--out", str(a)])
        call(["risk", "--grid", "0:1:0.5", "--draws", "300000", "--workers", "3", "--out", str(b)])
        assert (a / "risk.csv").read_bytes() == (b / "risk.csv").read_bytes()


class TestSynthBacktest:
    def test_synth_then_backtest(self, tmp_path):
        code, out = call(["synth", "--seed", "7", "--out", str(tmp_path)])
        assert code == 0 and "std     0.055700" in out
        prices = tmp_path / "prices.csv"
        code, out = call(["backtest", "--prices", str(prices), "--alpha", "0.0001",
                          "--judgment", "0", "--rules", "judgment", "--out", str(tmp_path)])
        assert code == 0
        rows = list(csv.DictReader((tmp_path / "backtest.csv").open()))
        assert float(rows[-1]["value_judgment_0_0.0001"]) == 100.0

    def test_alpha_one_matches_ml(self, tmp_path):
        code, _ = call(["backtest", "--seed", "3", "--rules", "judgment:0:1,ml",
                        "--out", str(tmp_path)])
        rows = list(csv.DictReader((tmp_path / "backtest.csv").open()))
        assert code == 0
        assert all(r["value_judgment_0_1"] == r["value_ml"] for r in rows)
        assert all(r["action_judgment_0_1"] == r["action_ml"] for r in rows)

    def test_backtest_outputs_and_determinism(self, tmp_path):
        argv = ["backtest", "--seed", "7", "--svg", "--out", str(tmp_path)]
        assert call(argv)[0] == 0
        names = sorted(p.name for p in tmp_path.iterdir())
        assert names == ["backtest.csv", "backtest.svg", "backtest_summary.txt"]
        snapshot = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
        call(argv)
        assert snapshot == {p.name: p.read_bytes() for p in tmp_path.iterdir()}
        summary = snapshot["backtest_summary.txt"].decode()
        assert summary.startswith("# judgment-rule") and "# seed: 7" in summary

    def test_missing_prices_file(self, tmp_path):
        code, _, err = run(["backtest", "--prices", str(tmp_path / "nope.csv"),
                            "--out", str(tmp_path)])
        assert code == 3

    def test_bad_prices_file(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("date,close\n2000-01-01,100\n2000-02-01,-5\n")
        code, _, err = run(["backtest", "--prices", str(bad), "--out", str(tmp_path)])
        assert code == 3 and "row 3" in err

    def test_short_series(self, tmp_path):
        code, _ = call(["backtest", "--months", "50", "--out", str(tmp_path)])
        assert code == 2


class TestElicit:
    def test_piped(self):
        code, out, _ = run(["elicit"], stdin="5\n")
        assert code == 0 and out.splitlines()[-1] == "alpha 0.05"

    def test_then_decide(self):
        code, out, _ = run(["elicit", "--x", "3", "--judgment", "0"], stdin="1\n")
        fields = text_fields(out.split("alpha 0.01\n", 1)[1])
        expected = text_fields(call(["decide", "--x", "3", "--alpha", "0.01"])[1])
        assert code == 0 and fields == expected

    def test_exhausted(self):
        code, _, err = run(["elicit"], stdin="101\n101\n101\n")
        assert code == 2 and "no valid bet" in err


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nalpha = 0.2\njudgment = 1.0\n")
    code, out = call(["--config", str(cfg), "decide", "--x", "3", "--json"])
    data = json.loads(out)
    assert code == 0
    assert data["action"] == pytest.approx(3.0 + ndtri(0.1), abs=1e-12)
    # explicit flags win over the file
    code, out = call(["--config", str(cfg), "decide", "--x", "3", "--alpha", "0", "--json"])
    assert json.loads(out)["action"] == 1.0


def test_bad_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("alpha 0.2\n")
    assert call(["--config", str(cfg), "decide", "--x", "3"])[0] == 2
