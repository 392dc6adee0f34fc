"""Shared run outputs, produced through the solver CLI only.

The renderer is exercised exactly the way a user would drive it: the
solver package writes CSVs and a manifest, this package reads them.
"""

import json
import subprocess
import sys

import pytest


def _qtube(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "qtube", *args],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


@pytest.fixture(scope="session")
def runs(tmp_path_factory):
    """toy model runs: reference start, 12 circle starts, and Q-learning."""
    root = tmp_path_factory.mktemp("runs")
    model = root / "toy.json"
    _qtube("example", "toy3x2", "--out", str(model))
    single = root / "single"
    _qtube("trajectory", str(model), "--paper-q0", "--csv", str(single))
    multi = root / "multi"
    _qtube("trajectory", str(model), "--circle", "2:12", "--iters", "25",
           "--csv", str(multi))
    qlearn = root / "qlearn"
    _qtube("qlearn", str(model), "--circle", "2:12", "--steps", "4000",
           "--seed", "0", "--csv", str(qlearn))
    return {
        "single": single / "qvi_manifest.json",
        "multi": multi / "qvi_manifest.json",
        "qlearn": qlearn / "qlearn_manifest.json",
    }


@pytest.fixture(scope="session")
def single_csv(runs):
    manifest = json.loads(runs["single"].read_text())
    return runs["single"].parent / manifest["trajectories"][0]["csv"]
