import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from iacsit import __version__
from iacsit.channel_model import RNG_ID, parse_config
from iacsit.cli import EXIT_GUARD, EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE, run
from iacsit.csit_allocation import CsitAllocation, RemovalPlan
from iacsit.experiments import ResultTable
from iacsit.feasibility import FeasibilityReport
from iacsit.precoding import BeamformerSet

from conftest import SUPER3, TIGHT5

GOLDEN = Path(__file__).parent / "golden"


def call(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestFeasibility:
    def test_tight(self, capsys):
        code, out, _ = call(capsys, "feasibility", "[(2,2)^3]")
        assert code == EXIT_OK and "TIGHT" in out

    def test_infeasible_exit(self, capsys):
        code, out, _ = call(capsys, "feasibility", "[(2,2)^4]")
        assert code == EXIT_INFEASIBLE and "INFEASIBLE" in out

    @pytest.mark.parametrize(
        "argv, golden",
        [
            (["[(2,2)^4]"], "feasibility_infeasible.json"),
            ([TIGHT5], "feasibility_tight.json"),
            ([TIGHT5, "--brute-force"], "feasibility_tight.json"),
        ],
    )
    def test_golden(self, capsys, argv, golden):
        _, out, _ = call(capsys, "feasibility", *argv, "--json")
        assert json.loads(out) == json.loads((GOLDEN / golden).read_text())

    def test_json_round_trip(self, capsys):
        _, out, _ = call(capsys, "feasibility", "[(2,2)^4]", "--json")
        rep = FeasibilityReport.from_dict(json.loads(out))
        assert not rep.feasible and rep.witness_counts[0] < rep.witness_counts[1]

    def test_config_from_file(self, capsys, tmp_path):
        p = tmp_path / "cfg.txt"
        p.write_text(TIGHT5 + "\n")
        code, out, _ = call(capsys, "feasibility", str(p))
        assert code == EXIT_OK and "TIGHT" in out

    def test_guard_exit(self, capsys):
        code, _, err = call(capsys, "feasibility", "[(2,2)^11]", "--brute-force")
        assert code == EXIT_GUARD and "K <= 10" in err


class TestAllocate:
    def test_five_user_tight(self, capsys):
        code, out, _ = call(capsys, "allocate", TIGHT5, "--json")
        d = json.loads(out)
        assert code == EXIT_OK
        assert d["size"] == 346 and d["complete_size"] == 905
        assert d == json.loads((GOLDEN / "allocate_tight.json").read_text())

    def test_three_user_super(self, capsys):
        _, out, _ = call(capsys, "allocate", SUPER3, "--mode", "heuristic", "--json")
        d = json.loads(out)
        assert d == json.loads((GOLDEN / "allocate_super.json").read_text())
        assert d["size"] == 20 and d["complete_size"] == 99
        assert d["reduction_ratio"] == pytest.approx(1 - 20 / 99)
        alloc = CsitAllocation.from_list(d["masks"])
        plan = RemovalPlan.from_dict(d["removal_plan"])
        assert plan.reduced_config == parse_config("[(2,1).(3,2).(2,2)]")
        assert alloc.K == 3

    def test_exhaustive_mode(self, capsys):
        _, out, _ = call(capsys, "allocate", SUPER3, "--mode", "exhaustive", "--json")
        assert json.loads(out)["size"] <= 20

    def test_text_output(self, capsys):
        _, out, _ = call(capsys, "allocate", TIGHT5)
        assert "TX3: COMPLETE" in out and "size 346 / complete 905" in out

    def test_infeasible(self, capsys):
        code, _, err = call(capsys, "allocate", "[(2,2)^4]")
        assert code == EXIT_INFEASIBLE and "infeasible" in err


class TestPrecode:
    def test_auto(self, capsys):
        code, out, _ = call(capsys, "precode", TIGHT5, "--alloc", "auto", "--seed", "1", "--json")
        d = json.loads(out)
        assert code == EXIT_OK
        assert set(d) == {"config", "seed", "converged", "leakage", "trace", "beamformers"}
        assert d["converged"] and d["leakage"] <= 1e-8
        b = BeamformerSet.from_dict(d["beamformers"])
        assert sorted(b.tx) == [1, 2, 3, 4, 5]
        assert all(np.isclose(np.linalg.norm(v), 1) for v in b.tx.values())
        assert all(np.all(np.diff(v) <= 1e-12) for v in d["trace"].values())

    def test_alloc_file(self, capsys, tmp_path):
        _, out, _ = call(capsys, "allocate", SUPER3, "--json")
        p = tmp_path / "alloc.json"
        p.write_text(out)
        _, a, _ = call(capsys, "precode", SUPER3, "--alloc", str(p), "--seed", "2", "--json")
        _, b, _ = call(capsys, "precode", SUPER3, "--alloc", "auto", "--seed", "2", "--json")
        assert json.loads(a) == json.loads(b)

    def test_missing_seed_is_usage(self, capsys):
        with pytest.raises(SystemExit) as e:
            run(["precode", TIGHT5, "--alloc", "auto"])
        assert e.value.code == EXIT_USAGE


class TestSimulate:
    def test_rate(self, capsys, tmp_path):
        spec = tmp_path / "rate.spec"
        spec.write_text(f"config = {SUPER3}\nsnr_grid_db = 0, 20\ntrials = 2\n")
        code, out, err = call(capsys, "simulate-rate", str(spec), "--out", str(tmp_path / "res"))
        assert code == EXIT_OK
        assert out.splitlines()[0] == "x,policy,mean,stderr,n"
        t = ResultTable.from_json((tmp_path / "res.json").read_text())
        assert len(t.rows) == 4 and t.metadata["version"] == __version__
        assert (tmp_path / "res.csv").read_text() == out

    def test_feedback_env_workers(self, capsys, tmp_path, monkeypatch):
        spec = tmp_path / "fb.spec"
        spec.write_text("K = 3\ntotal_antennas_grid = 12:14\ntrials = 3\n")
        monkeypatch.setenv("IACSIT_WORKERS", "2")
        code, out, _ = call(capsys, "simulate-feedback", str(spec), "--json")
        assert code == EXIT_OK
        assert [r["x"] for r in json.loads(out)["rows"]] == [12.0] * 3 + [13.0] * 3 + [14.0] * 3

    def test_bad_env(self, capsys, tmp_path, monkeypatch):
        spec = tmp_path / "fb.spec"
        spec.write_text("K = 3\ntotal_antennas_grid = 12\ntrials = 1\n")
        monkeypatch.setenv("IACSIT_WORKERS", "many")
        code, _, _ = call(capsys, "simulate-feedback", str(spec))
        assert code == EXIT_USAGE

    def test_missing_spec(self, capsys, tmp_path):
        code, _, _ = call(capsys, "simulate-rate", str(tmp_path / "nope"))
        assert code == EXIT_USAGE


class TestUsage:
    @pytest.mark.parametrize(
        "argv",
        [[], ["bogus"], ["allocate", TIGHT5, "--mode", "greedy"], ["feasibility"]],
    )
    def test_usage_errors_exit_1(self, argv):
        with pytest.raises(SystemExit) as e:
            run(argv)
        assert e.value.code == EXIT_USAGE

    def test_parse_error_exit_1(self, capsys):
        code, _, err = call(capsys, "feasibility", "[(2,x)]")
        assert code == EXIT_USAGE and "(2,x)" in err

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as e:
            run(["--version"])
        assert e.value.code == 0
        out = capsys.readouterr().out
        assert __version__ in out and RNG_ID in out

    def test_console_script(self):
        r = subprocess.run(
            [sys.executable, "-m", "iacsit.cli", "feasibility", "[(2,2)^4]"], capture_output=True, text=True
        )
        assert r.returncode == EXIT_INFEASIBLE
