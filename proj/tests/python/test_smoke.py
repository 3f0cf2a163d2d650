import json
import math
import os
import subprocess
from fractions import Fraction
from pathlib import Path

import pytest

import dualtest

DATA = Path(os.environ.get("DUALTEST_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))
CLI = os.environ.get("DUALTEST_CLI")


def test_quality_is_weighted_mean():
    assert dualtest.quality([0.8, 0.6]) == pytest.approx(0.7, abs=1e-15)
    w = {"facets": ["a", "b"], "weights": [0.25, 0.75], "bounds": [[0, 1], [0, 1]]}
    assert dualtest.quality([0.4, 0.8], w) == pytest.approx(0.25 * 0.4 + 0.75 * 0.8, abs=1e-15)


def test_constraint_order():
    assert dualtest.check_constraints([0.8], [0.75], 0.7, 0.1) == "ok"
    assert dualtest.check_constraints([0.8], [0.65], 0.7, 0.2) == "MinQualityMachine"
    assert dualtest.check_constraints([0.95], [0.75], 0.7, 0.1) == "QualityGap"
    assert dualtest.check_constraints([0.6], [0.5], 0.7, 0.01) == "MinQualityHuman"


def test_binomial_against_exact_fractions():
    for n in (1, 10, 30, 64):
        for c in range(n + 1):
            exact = Fraction(sum(math.comb(n, k) for k in range(c, n + 1)), 2**n)
            assert abs(dualtest.binomial_test(c, n) - float(exact)) <= 1e-12


def test_errors_carry_a_code():
    with pytest.raises(dualtest.Error) as info:
        dualtest.binomial_test(6, 5)
    assert info.value.code == "domain_error"


def test_simulate_is_deterministic_and_reported():
    cfg = DATA / "toy" / "config.json"
    a = dualtest.simulate(cfg)
    assert a == dualtest.simulate(cfg)
    assert a["config_digest"] == dualtest.config_digest(json.loads(cfg.read_text()))
    rep = dualtest.report(a, cfg)
    correct = sum(r["verdict"] == r["hidden_label"] for r in a["rounds"])
    assert rep["overall"]["correct"] == correct
    assert rep["overall"]["rounds"] == len(a["rounds"])
    assert dualtest.simulate(cfg, seed=8) != a


def test_alpha_game_and_solvers():
    g = dualtest.alpha_game()
    assert g["value"] == 0.7
    assert g["rounds"] == 10
    assert dualtest.solve(DATA / "toy" / "game_alpha070.json")["guarantee_met"]
    assert dualtest.solve_matrix([[1, 0], [0, 1]])["value"] == pytest.approx(0.5, abs=1e-3)


def test_detector_and_reward():
    d = dualtest.train_detector(DATA / "toy" / "corpus.jsonl", epochs=300)
    assert d["frozen"]
    s = dualtest.score(d, [0.5] * 6)
    assert 0.0 < s < 1.0
    z = d["bias"] + sum(w * 0.5 for w in d["weights"])
    assert s == pytest.approx(1 / (1 + math.exp(-z)), abs=1e-12)
    b = dualtest.reward([0.5] * 6, [0.5] * 6, d)
    assert b["total"] == pytest.approx(b["undetect_term"] + b["qual_term"] + b["tau_bonus"] + b["parity_bonus"])


def test_toy_loop_converges():
    summary = dualtest.toy_loop(1)
    assert summary["converged"]
    assert summary["final_expected_detectability"] < summary["initial_expected_detectability"]


@pytest.mark.skipif(not CLI, reason="command-line tool not built")
class TestCli:
    def run(self, *args):
        return subprocess.run([CLI, *args], capture_output=True, text=True)

    def test_unknown_flag_exits_2(self):
        p = self.run("simulate", "--bogus")
        assert p.returncode == 2
        assert "error" in p.stderr

    def test_missing_subcommand_exits_2(self):
        assert self.run().returncode == 2

    def test_runtime_error_exits_1(self, tmp_path):
        p = self.run("simulate", "--config", str(tmp_path / "none.json"))
        assert p.returncode == 1
        assert "configuration_error" in p.stderr

    def test_solve_prints_value(self):
        p = self.run("solve", "--config", str(DATA / "toy" / "game_alpha070.json"))
        assert p.returncode == 0
        assert "value 0.700000" in p.stdout
        assert "guarantee met" in p.stdout

    def test_simulate_matches_module(self, tmp_path):
        out = tmp_path / "t.json"
        p = self.run("simulate", "--config", str(DATA / "toy" / "config.json"), "--out", str(out))
        assert p.returncode == 0
        assert json.loads(out.read_text()) == dualtest.simulate(DATA / "toy" / "config.json")
