import json
import subprocess
import sys

import numpy as np
import pytest

from _support import swap_mdp
from qtube import __version__
from qtube.cli import main
from qtube.fileio import save_mdp, toy3x2
from qtube.mdp import MdpSpec, validate
from qtube.trajectory import read_records_csv


@pytest.fixture()
def toy_path(tmp_path):
    path = tmp_path / "toy.json"
    save_mdp(toy3x2(), path)
    return str(path)


@pytest.fixture()
def swap_path(tmp_path):
    path = tmp_path / "swap.json"
    save_mdp(swap_mdp(), path)
    return str(path)


def _no_gap_path(tmp_path):
    kernel = np.array([[0.5, 0.5], [0.4, 0.6]])
    spec = MdpSpec("twin", 0.9, 2, 2, np.stack([kernel, kernel]),
                   np.array([[1.0, 1.0], [0.2, 0.2]]))
    path = tmp_path / "twin.json"
    save_mdp(validate(spec), path)
    return str(path)


class TestValidate:
    def test_valid_file(self, toy_path, capsys):
        assert main(["validate", toy_path]) == 0
        out = capsys.readouterr().out
        assert "valid MDP 'toy3x2' with 3 states, 2 actions, gamma=0.95" in out

    def test_missing_file(self, tmp_path, capsys):
        assert main(["validate", str(tmp_path / "nope.json")]) == 1
        assert "no such file" in capsys.readouterr().err

    def test_invalid_model(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        doc = {
            "schema": "qtube.mdp.v1", "name": "bad", "gamma": 0.9,
            "num_states": 2, "num_actions": 1,
            "transitions": [[[0.9, 0.0], [0.5, 0.5]]],
            "rewards": [[1.0], [0.0]],
        }
        path.write_text(json.dumps(doc))
        assert main(["validate", str(path)]) == 1
        err = capsys.readouterr().err
        assert err.startswith("error: invalid MDP:")
        assert "sums to" in err


class TestExample:
    def test_writes_loadable_file(self, tmp_path, capsys):
        out = tmp_path / "toy.json"
        assert main(["example", "toy3x2", "--out", str(out)]) == 0
        assert f"wrote {out}" in capsys.readouterr().out
        assert main(["validate", str(out)]) == 0
        # kernel literals survive serialization digit for digit
        assert '0.7' in out.read_text()

    def test_unknown_name(self, tmp_path, capsys):
        assert main(["example", "mystery", "--out", str(tmp_path / "x.json")]) == 1
        assert "toy3x2" in capsys.readouterr().err


class TestAnalyze:
    def test_stdout_document(self, toy_path, capsys):
        assert main(["analyze", toy_path]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["schema"] == "qtube.report.v1"
        assert doc["certificates"]["optimal"]["upper_bound"] == pytest.approx(0.5337, abs=1e-3)

    def test_report_file(self, toy_path, tmp_path, capsys):
        target = tmp_path / "report.json"
        assert main(["analyze", toy_path, "--report", str(target), "--depth", "2"]) == 0
        assert f"wrote {target}" in capsys.readouterr().out
        doc = json.loads(target.read_text())
        assert doc["config"]["depth"] == 2

    def test_missing_file(self, tmp_path, capsys):
        assert main(["analyze", str(tmp_path / "gone.json")]) == 1
        assert "no such file" in capsys.readouterr().err


class TestTrajectory:
    def test_default_zero_start(self, toy_path, tmp_path, capsys):
        out = tmp_path / "runs"
        assert main(["trajectory", toy_path, "--csv", str(out)]) == 0
        records = read_records_csv(out / "qvi_zeros.csv")
        assert [rec.k for rec in records] == list(range(51))
        manifest = json.loads((out / "qvi_manifest.json").read_text())
        assert manifest["schema"] == "qtube.manifest.v1"
        assert manifest["kind"] == "qvi"
        assert manifest["basis_label"] == "toy-default"
        assert manifest["config"] == {"iters": 50, "delta_frac": 0.4}
        assert manifest["trajectories"][0]["csv"] == "qvi_zeros.csv"
        assert manifest["trajectories"][0]["label"] == "zeros"
        assert manifest["trajectories"][0]["final_k"] == 50

    def test_reference_start_entrances(self, toy_path, tmp_path):
        out = tmp_path / "runs"
        assert main(["trajectory", toy_path, "--paper-q0", "--csv", str(out)]) == 0
        manifest = json.loads((out / "qvi_manifest.json").read_text())
        entry = manifest["trajectories"][0]
        assert entry["label"] == "toyq0"
        assert entry["poss_entrance"] == 0
        assert entry["tube_entrance"] == 2
        assert manifest["rate_gamma_lambda2"] == pytest.approx(0.5337, abs=1e-3)
        assert manifest["strip_half_width_v"] == pytest.approx(
            np.sqrt(2) * manifest["delta"], rel=1e-9
        )

    def test_circle_writes_one_file_per_start(self, toy_path, tmp_path):
        out = tmp_path / "runs"
        code = main(["trajectory", toy_path, "--circle", "2:12", "--iters", "10",
                     "--csv", str(out)])
        assert code == 0
        names = sorted(p.name for p in out.glob("qvi_circle*.csv"))
        assert names == [f"qvi_circle{j:02d}.csv" for j in range(12)]
        manifest = json.loads((out / "qvi_manifest.json").read_text())
        assert manifest["circle"] == {"radius": 2.0, "count": 12}
        assert len(manifest["trajectories"]) == 12

    def test_custom_q0_file(self, toy_path, tmp_path):
        table = tmp_path / "q0.json"
        table.write_text(json.dumps([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]))
        out = tmp_path / "runs"
        assert main(["trajectory", toy_path, "--q0", str(table), "--iters", "3",
                     "--csv", str(out)]) == 0
        records = read_records_csv(out / "qvi_custom.csv")
        assert len(records) == 4

    def test_zero_iterations(self, toy_path, tmp_path):
        out = tmp_path / "runs"
        assert main(["trajectory", toy_path, "--iters", "0", "--csv", str(out)]) == 0
        assert len(read_records_csv(out / "qvi_zeros.csv")) == 1

    @pytest.mark.parametrize("spec", ["abc", "2", "0:5", "2:0", "x:y"])
    def test_bad_circle_specs(self, toy_path, tmp_path, spec, capsys):
        code = main(["trajectory", toy_path, "--circle", spec, "--csv", str(tmp_path)])
        assert code == 1
        assert "--circle" in capsys.readouterr().err

    def test_wrong_shape_q0(self, toy_path, tmp_path, capsys):
        table = tmp_path / "q0.json"
        table.write_text(json.dumps([[1.0, 2.0], [3.0, 4.0]]))
        assert main(["trajectory", toy_path, "--q0", str(table),
                     "--csv", str(tmp_path)]) == 1
        assert "does not match" in capsys.readouterr().err

    def test_reference_start_rejected_off_toy(self, swap_path, tmp_path, capsys):
        assert main(["trajectory", swap_path, "--paper-q0", "--csv", str(tmp_path)]) == 1
        assert "applies only to the toy3x2 example" in capsys.readouterr().err

    def test_no_gap_model_rejected(self, tmp_path, capsys):
        path = _no_gap_path(tmp_path)
        with pytest.warns(UserWarning):
            code = main(["trajectory", path, "--csv", str(tmp_path / "out")])
        assert code == 1
        assert "tube radius is undefined" in capsys.readouterr().err


class TestQlearn:
    def test_deterministic_reruns_byte_identical(self, toy_path, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        argv = ["qlearn", toy_path, "--seed", "3", "--steps", "2000"]
        assert main(argv + ["--csv", str(first)]) == 0
        assert main(argv + ["--csv", str(second)]) == 0
        a = (first / "qlearn_zeros.csv").read_bytes()
        b = (second / "qlearn_zeros.csv").read_bytes()
        assert a == b

    def test_circle_seeds_increment(self, toy_path, tmp_path):
        out = tmp_path / "runs"
        assert main(["qlearn", toy_path, "--seed", "4", "--steps", "100",
                     "--circle", "1.5:3", "--csv", str(out)]) == 0
        manifest = json.loads((out / "qlearn_manifest.json").read_text())
        assert manifest["kind"] == "qlearn"
        assert [t["seed"] for t in manifest["trajectories"]] == [4, 5, 6]
        assert manifest["config"]["steps"] == 100
        for t in manifest["trajectories"]:
            assert (out / t["csv"]).exists()

    def test_zero_steps(self, toy_path, tmp_path):
        out = tmp_path / "runs"
        assert main(["qlearn", toy_path, "--steps", "0", "--csv", str(out)]) == 0
        assert len(read_records_csv(out / "qlearn_zeros.csv")) == 1

    def test_stochastic_rows_leave_residual_blank(self, toy_path, tmp_path):
        out = tmp_path / "runs"
        assert main(["qlearn", toy_path, "--steps", "200", "--csv", str(out)]) == 0
        for rec in read_records_csv(out / "qlearn_zeros.csv"):
            assert rec.witness_residual is None


class TestParser:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert f"qtube {__version__}" in capsys.readouterr().out

    def test_missing_subcommand(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_installed_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "qtube", "--version"],
            capture_output=True, text=True, check=False,
        )
        assert proc.returncode == 0
        assert __version__ in proc.stdout
