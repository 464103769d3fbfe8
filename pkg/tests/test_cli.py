import os
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from servicediff.cli import main
from servicediff.cli.figures import FIGURES
from servicediff.cli.output import read_csv
from servicediff.cli.scenario import ScenarioError, load_scenario, parse_scenario
from servicediff.exceptions import AssumptionViolation

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")

WORKED_MENU = """\
# two-class worked example
[quality]
model = linear

[regime]
capacity = 0.5

[menu]
prices = 0.5, 0.2
congestion = 0.2, 0.6
"""


def write(tmp_path, text, name="scenario.ini"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_defaults():
    sc = load_scenario()
    assert (sc.alpha, sc.quality, sc.regime, sc.capacity, sc.payg) == (1.0, "canonical", "fixed",
                                                                      0.1, False)
    assert sc.numerics.grid == 512


def test_full_scenario_parses():
    sc = parse_scenario("""
[distribution]
kind = power
alpha = 2     # comment after a value
[quality]
model = inverse
[regime]
kind = variable
cost = linear
price = 0.3
[pricing]
mode = payg
[numerics]
grid = 128
quad_tol = 1e-9
[outputs]
artifacts = summary, surplus
[sweep]
parameter = alpha
values = 0.5, 1, 2
[menu]
classes = 2
resolution = 16
""")
    assert sc.alpha == 2.0 and sc.quality == "inverse" and sc.payg
    assert sc.regime == "variable" and sc.cost == "linear" and sc.price == 0.3
    assert sc.numerics.grid == 128 and sc.numerics.quad_tol == 1e-9
    assert sc.artifacts == ("summary", "surplus") and sc.sweep_values == (0.5, 1.0, 2.0)
    assert (sc.classes, sc.resolution) == (2, 16)


@pytest.mark.parametrize("text, line, fragment", [
    ("[regime]\ncapacity = -1\n", 2, "positive"),
    ("[regime]\n\n# x\ncapcity = 1\n", 4, "unknown key"),
    ("[regim]\n", 1, "unknown section"),
    ("capacity = 1\n", 1, "outside"),
    ("[regime\n", 1, "malformed"),
    ("[regime]\ncapacity 1\n", 2, "key = value"),
    ("[regime]\ncapacity = 1\ncapacity = 2\n", 3, "duplicate"),
    ("[menu]\nprices = 0.5, 0.2\ncongestion = 0.2\n", 3, "same length"),
    ("[menu]\nclasses = 9\n", 2, "between 1 and 8"),
    ("[sweep]\nparameter = t\n", 2, "variable"),
])
def test_parse_errors_name_the_line(text, line, fragment):
    with pytest.raises(ScenarioError) as err:
        parse_scenario(text, "s.ini")
    assert err.value.line == line
    assert f"s.ini:{line}:" in str(err.value) and fragment in str(err.value)


def test_numerics_validation():
    with pytest.raises(ScenarioError, match="grid"):
        parse_scenario("[numerics]\ngrid = 8\n")


def test_overrides():
    sc = parse_scenario("[regime]\ncapacity = 0.1\n", overrides=["regime.capacity=0.3"])
    assert sc.capacity == 0.3
    with pytest.raises(ScenarioError):
        parse_scenario("", overrides=["regime.capcity=0.3"])
    with pytest.raises(ScenarioError):
        parse_scenario("", overrides=["capacity"])


def test_solve_fixed_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["solve-fixed", "--capacity", "0.1", "--out", str(out), "--svg"]) == 0
    text = capsys.readouterr().out
    for key in ("regime", "mu", "theta_hat", "theta_bar", "J", "s", "W_total"):
        assert any(line.split()[0] == key for line in text.splitlines())
    raw = (out / "schedule.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    header, rows = read_csv(out / "schedule.csv")
    assert header == ["theta", "q", "price", "V", "W"] and len(rows) == 512
    assert max(len(x.replace("-", "").replace(".", "").split("e")[0].lstrip("0"))
               for r in rows for x in r) <= 12
    ET.parse(out / "prices.svg")
    summary = dict(read_csv(out / "summary.csv")[1])
    assert float(summary["theta_hat"]) == pytest.approx(0.5, abs=1e-6)


def test_outputs_are_deterministic(tmp_path):
    for run in ("a", "b"):
        assert main(["solve-fixed", "--capacity", "0.2", "--out", str(tmp_path / run)]) == 0
    for name in ("schedule.csv", "prices.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_variable_with_benchmark(tmp_path, capsys):
    path = write(tmp_path, "[regime]\nkind = variable\nt = 1e9\n[outputs]\n"
                           "artifacts = summary, benchmark, surplus, capacity\n")
    assert main(["solve-variable", "--scenario", path, "--out", str(tmp_path / "o")]) == 0
    summary = dict(read_csv(tmp_path / "o" / "summary.csv")[1])
    assert float(summary["W_total"]) == pytest.approx(0.1, abs=1e-4)
    assert "single_J" in summary
    assert (tmp_path / "o" / "surplus.csv").exists() and (tmp_path / "o" / "capacity.csv").exists()


def test_menu_eval_worked_example(tmp_path):
    path = write(tmp_path, WORKED_MENU)
    assert main(["menu-eval", "--scenario", path, "--out", str(tmp_path / "o")]) == 0
    header, rows = read_csv(tmp_path / "o" / "menu.csv")
    assert [float(r[3]) for r in rows] == [0.75, 0.5]
    summary = dict(read_csv(tmp_path / "o" / "summary.csv")[1])
    assert float(summary["revenue"]) == 0.175 and summary["feasible"] == "true"


def test_menu_eval_needs_a_menu(tmp_path):
    assert main(["menu-eval", "--out", str(tmp_path)]) == 2


def test_single_class_and_brute_force(tmp_path):
    assert main(["single-class", "--capacity", "0.5", "--out", str(tmp_path / "a")]) == 0
    summary = dict(read_csv(tmp_path / "a" / "summary.csv")[1])
    assert float(summary["single_J"]) == pytest.approx(0.25, abs=1e-8)
    assert main(["brute-force", "--capacity", "0.1", "--classes", "2", "--set", "menu.resolution=16",
                 "--out", str(tmp_path / "b")]) == 0
    summary = dict(read_csv(tmp_path / "b" / "summary.csv")[1])
    assert 0.9 < float(summary["ratio"]) <= 1.0


def test_sweep_reports_trends(tmp_path, capsys):
    path = write(tmp_path, "[sweep]\nparameter = capacity\nvalues = 0.1, 0.2, 0.3\n")
    assert main(["sweep", "--scenario", path, "--out", str(tmp_path / "o")]) == 0
    text = capsys.readouterr().out
    assert "theorem: J nondecreasing in capacity: holds" in text
    assert "observation: prices at capacity 0.2 below those at 0.1" in text
    header, rows = read_csv(tmp_path / "o" / "sweep.csv")
    assert len(rows) == 3 and header[0] == "value"


def test_exit_codes(tmp_path, monkeypatch):
    assert main(["solve-fixed", "--scenario", write(tmp_path, "[regime]\ncapacity = x\n")]) == 2
    assert main(["solve-fixed", "--scenario", str(tmp_path / "missing.ini")]) == 2
    assert main(["nonsense"]) == 2
    inverse_free = write(tmp_path, "[quality]\nmodel = inverse\n[regime]\ncost = free\n", "f.ini")
    assert main(["solve-variable", "--scenario", inverse_free, "--out", str(tmp_path)]) == 4

    import sys
    cli_main = sys.modules["servicediff.cli.main"]

    def violated(sc, vf=None):
        raise AssumptionViolation("virtual capacity", "h is not decreasing")
    monkeypatch.setattr(cli_main, "solve", violated)
    assert main(["solve-fixed", "--out", str(tmp_path)]) == 3


def test_payg_flag(tmp_path):
    assert main(["solve-fixed", "--payg", "--out", str(tmp_path)]) == 0
    summary = dict(read_csv(tmp_path / "summary.csv")[1])
    assert float(summary["q_lo"]) > 0


@pytest.mark.parametrize("figure", sorted(FIGURES))
def test_figures_match_golden(tmp_path, figure, capsys):
    assert main(["reproduce", figure, "--svg", "--out", str(tmp_path)]) == 0
    assert "fails" not in "".join(line for line in capsys.readouterr().out.splitlines()
                                  if line.startswith("check"))
    golden = os.path.join(GOLDEN, figure)
    names = sorted(os.listdir(golden))
    assert names
    for name in names:
        gh, grows = read_csv(os.path.join(golden, name))
        h, rows = read_csv(tmp_path / figure / name)
        assert h == gh and len(rows) == len(grows)
        for r, g in zip(rows, grows):
            for x, y in zip(r, g):
                try:
                    assert float(x) == pytest.approx(float(y), rel=1e-9, abs=1e-12), name
                except ValueError:
                    assert x == y
    for svg in (tmp_path / figure).glob("*.svg"):
        ET.parse(svg)


def test_regold_writes_golden(tmp_path):
    gold = tmp_path / "gold"
    assert main(["reproduce", "fig2", "--regold", "--golden-dir", str(gold),
                 "--out", str(tmp_path / "o")]) == 0
    assert (gold / "fig2" / "cost.csv").read_bytes() == (tmp_path / "o" / "fig2" / "cost.csv").read_bytes()
