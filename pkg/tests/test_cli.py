import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from isltopo.cli import main

TINY = Path(__file__).resolve().parents[1] / "configs" / "tiny.yaml"


@pytest.fixture
def fast_config(tmp_path):
    raw = yaml.safe_load(TINY.read_text())
    raw["pga"]["t_max"] = 100
    raw["heuristic"]["iterations"] = 10
    path = tmp_path / "fast.yaml"
    path.write_text(yaml.safe_dump(raw))
    return path


def test_generate_writes_candidates_and_sidecar(tmp_path, fast_config, capsys):
    out = tmp_path / "cands.csv"
    assert main(["generate", "--config", str(fast_config), "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert rows and set(rows[0]) == {"u", "v", "kind", "distance_km"}
    assert all(int(r["u"]) < int(r["v"]) < 36 for r in rows)
    assert all(float(r["distance_km"]) <= 5000.0 for r in rows)
    side = json.loads(out.with_suffix(".constellation.json").read_text())
    assert side["n_sats"] == 36 and side["seed"] == 7 and side["n_candidates"] == len(rows)
    assert "candidate links" in capsys.readouterr().out


@pytest.mark.parametrize("method", ["spectral", "heuristic"])
def test_optimize_then_evaluate(tmp_path, fast_config, capsys, method):
    out = tmp_path / method
    assert main(["optimize", "--config", str(fast_config), "--method", method, "--out", str(out)]) == 0
    doc = json.loads((out / "metrics.json").read_text())
    assert doc["method"] == method and doc["degree_feasible"]
    assert (out / "topology.txt").exists() and (out / "trace.csv").exists()
    capsys.readouterr()

    assert main(["evaluate", "--config", str(fast_config), "--topology", str(out / "topology.txt")]) == 0
    ev = json.loads(capsys.readouterr().out)
    assert ev["diameter"] == doc["diameter"]
    assert ev["n_edges"] == doc["n_edges"]
    assert ev["degree_feasible"]


def test_experiment_writes_outputs(tmp_path, fast_config, capsys):
    out = tmp_path / "exp"
    assert main(["experiment", "--config", str(fast_config), "--out", str(out), "--trials", "2", "--jobs", "1"]) == 0
    rows = list(csv.DictReader((out / "results.csv").open()))
    assert len(rows) == 4
    assert {r["method"] for r in rows} == {"spectral", "heuristic"}
    assert (out / "summary.json").exists()
    assert "results ->" in capsys.readouterr().out


def test_seed_override_changes_constellation(tmp_path, fast_config):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["generate", "--config", str(fast_config), "--out", str(a)])
    main(["generate", "--config", str(fast_config), "--out", str(b), "--seed", "8"])
    pa = json.loads(a.with_suffix(".constellation.json").read_text())["phase_offsets_rad"]
    pb = json.loads(b.with_suffix(".constellation.json").read_text())["phase_offsets_rad"]
    assert pa != pb


def test_unknown_config_key_exits_2(tmp_path, capsys):
    raw = yaml.safe_load(TINY.read_text())
    raw["pga"]["learning_rate"] = 1.0
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(raw))
    assert main(["generate", "--config", str(path), "--out", str(tmp_path / "x.csv")]) == 2
    assert "pga.learning_rate" in capsys.readouterr().err


def test_infeasible_topology_link_exits_1(tmp_path, fast_config, capsys):
    topo = tmp_path / "t.txt"
    # opposite satellites of one ring are a full orbit diameter apart
    topo.write_text("0,0,0,3\n")
    assert main(["evaluate", "--config", str(fast_config), "--topology", str(topo)]) == 1
    assert "error" in capsys.readouterr().err


def test_module_help():
    proc = subprocess.run([sys.executable, "-m", "isltopo", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("generate", "optimize", "evaluate", "experiment"):
        assert cmd in proc.stdout
