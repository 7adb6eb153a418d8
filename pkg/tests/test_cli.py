import json
import subprocess
import sys

import pytest

from rclattice.cli import EXIT_CHECK, EXIT_CONFIG, config_hash, load_config, main


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


SMALL = {"name": "small", "seed": 5, "algorithm": "sw",
         "graph": {"kind": "box", "d": 2, "n": 6},
         "boundary": {"kind": "spin", "value": 1},
         "grid": {"beta": [0.3, 0.6]}, "replicas": 2, "sweeps": 20, "burn_in": 5}


def run_dir(out):
    dirs = [d for d in out.iterdir() if not d.name.startswith(".")]
    assert len(dirs) == 1
    return dirs[0]


def test_run_writes_artifacts(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", str(write(tmp_path, SMALL)), "--out", str(out)]) == 0
    d = run_dir(out)
    man = json.loads((d / "manifest.json").read_text())
    assert man["seed"] == 5 and man["config"]["thin"] == 1  # default materialised
    assert man["config_hash"] == config_hash(man["config"])
    rows = (d / "series.csv").read_text().splitlines()
    assert rows[0] == "grid_index,beta,replica,index,magnetization"
    assert len(rows) == 1 + 2 * 2 * 20
    summ = [json.loads(line) for line in (d / "summary.jsonl").read_text().splitlines()]
    assert len(summ) == 4 and all("stderr" in s for s in summ)


def test_identical_seed_identical_bytes(tmp_path):
    cfg = write(tmp_path, SMALL)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(b), "--jobs", "2"]) == 0
    da, db = run_dir(a), run_dir(b)
    for f in ("manifest.json", "series.csv", "summary.jsonl"):
        assert (da / f).read_bytes() == (db / f).read_bytes()


def test_seed_override_changes_output(tmp_path):
    cfg = write(tmp_path, SMALL)
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "6"])
    assert (run_dir(tmp_path / "a") / "series.csv").read_bytes() != \
        (run_dir(tmp_path / "b") / "series.csv").read_bytes()


@pytest.mark.parametrize("bad, field", [
    ({"seed": 1}, "<root>"),
    ({"seed": 1, "algorithm": "metropolis"}, "algorithm"),
    ({"seed": 1, "algorithm": "sw", "grid": {"beta": []}}, "grid/beta"),
    ({"seed": -1, "algorithm": "sw"}, "seed"),
    ({"seed": 1, "algorithm": "sw", "sweeps": 0}, "sweeps"),
    ({"seed": 1, "algorithm": "disorder"}, "disorder"),
])
def test_malformed_config(tmp_path, capsys, bad, field):
    out = tmp_path / "out"
    code = main(["run", "--config", str(write(tmp_path, bad)), "--out", str(out)])
    assert code == EXIT_CONFIG
    assert f"config error at {field}" in capsys.readouterr().err
    assert not out.exists() or not any(out.iterdir())


def test_unreadable_config(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_runtime_failure_leaves_nothing(tmp_path):
    cfg = dict(SMALL, graph={"kind": "tree", "d": 2, "depth": 2})
    out = tmp_path / "out"
    assert main(["run", "--config", str(write(tmp_path, cfg)), "--out", str(out)]) == EXIT_CONFIG
    assert not any(out.iterdir())


def test_env_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("RCLATTICE_OUT", str(tmp_path / "env"))
    assert main(["run", "--config", str(write(tmp_path, dict(SMALL, sweeps=3)))]) == 0
    assert run_dir(tmp_path / "env")


@pytest.mark.parametrize("algorithm, extra", [
    ("heat-bath", {}),
    ("cftp", {"sweeps": 30}),
    ("sweeny", {"grid": {"p": [0.4], "q": [2]}, "boundary": {"kind": "free"}}),
    ("bernoulli", {"grid": {"p": [0.5]}, "snapshots": True, "boundary": {"kind": "free"}}),
    ("disorder", {"disorder": {"kind": "dilution", "p": 0.9}, "model": {"name": "potts", "q": 2},
                  "graph": {"kind": "box", "d": 2, "n": 6, "topology": "periodic"},
                  "boundary": {"kind": "free"}}),
])
def test_algorithms_run(tmp_path, algorithm, extra):
    cfg = dict(SMALL, algorithm=algorithm, **extra)
    out = tmp_path / "out"
    assert main(["run", "--config", str(write(tmp_path, cfg)), "--out", str(out)]) == 0
    d = run_dir(out)
    assert (d / "series.csv").exists()
    if cfg.get("snapshots"):
        assert any((d / "snapshots").iterdir())


def test_exact_config(tmp_path):
    cfg = {"name": "es", "seed": 0, "algorithm": "exact", "grid": {"beta": [0.5], "q": [2]},
           "exact": {"max_bonds": 3}}
    out = tmp_path / "out"
    assert main(["run", "--config", str(write(tmp_path, cfg)), "--out", str(out)]) == 0
    summary = json.loads((run_dir(out) / "summary.jsonl").read_text())
    assert summary["max"] < 1e-12


def test_check_exit_codes(monkeypatch, capsys):
    from rclattice import checks
    assert main(["check", "--suite", "couplings"]) == 0
    assert "[PASS]" in capsys.readouterr().out
    bad = checks.CheckItem("couplings", "forced", "always fails", 1.0, 0.0, False)
    monkeypatch.setitem(checks.SUITES, "couplings", lambda: [bad])
    assert main(["check", "--suite", "couplings"]) == EXIT_CHECK


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "rclattice", "run", "--config",
                          str(write(tmp_path, {"seed": 1})), "--out", str(tmp_path / "o")],
                         capture_output=True, text=True)
    assert res.returncode == EXIT_CONFIG


def test_load_config_defaults(tmp_path):
    cfg = load_config(write(tmp_path, {"seed": 3, "algorithm": "heat-bath"}))
    assert cfg["graph"]["kind"] == "box" and cfg["replicas"] == 1
