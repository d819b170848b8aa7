"""CLI contract: subcommands, exit codes, manifests, determinism."""

import json

import numpy as np
import pytest

from geomtest import (
    SeededRng,
    sample_poissonized_pair,
    save_labeled_csv,
    uniform_box,
)
from geomtest.cli import run


@pytest.fixture(scope="module")
def cache(tmp_path_factory):
    out = tmp_path_factory.mktemp("cache")
    path = out / "constants.csv"
    code = run(["constants", "--kinds", "knn:1,mst", "--d", "2",
                "--replicates", "60", "--seed", "3", "--out", str(path),
                "--output-dir", str(out)])
    assert code == 0
    return path


@pytest.fixture(scope="module")
def data_csv(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    f = uniform_box(2)
    s = sample_poissonized_pair(200, 150, f, f, SeededRng(9))
    path = out / "sample.csv"
    save_labeled_csv(path, s)
    return path


def test_constants_writes_cache_and_manifest(cache):
    header = open(cache).readline()
    assert header.startswith("schema_version,")
    manifest = json.loads((cache.parent / "manifest.json").read_text())
    assert manifest["command"] == "constants"
    assert manifest["kinds"] == "knn:1,mst"
    assert manifest["replicates"] == 60


def test_test_subcommand_asymptotic(cache, data_csv, capsys, tmp_path):
    code = run(["test", "--data", str(data_csv), "--functional", "knn", "--k", "1",
                "--p", "0.57", "--alpha", "0.05", "--constants", str(cache),
                "--output-dir", str(tmp_path)])
    captured = capsys.readouterr().out.strip().splitlines()
    assert code == 0
    assert captured[0] == "t_raw,center,scale,z,p_value,reject,method,alpha"
    assert captured[1].split(",")[6] == "asymptotic"


def test_test_subcommand_permutation(data_csv, capsys, tmp_path):
    code = run(["test", "--data", str(data_csv), "--functional", "mst",
                "--method", "permutation", "--permutations", "99",
                "--seed", "5", "--output-dir", str(tmp_path)])
    out = capsys.readouterr().out.strip().splitlines()
    assert code == 0
    assert out[1].split(",")[6] == "permutation"


def test_missing_constants_hint(data_csv, capsys, tmp_path):
    code = run(["test", "--data", str(data_csv), "--functional", "knn",
                "--constants", str(tmp_path / "nope.csv"),
                "--output-dir", str(tmp_path)])
    assert code == 2
    assert "geomtest constants" in capsys.readouterr().err


def test_wrong_dimension_constants(cache, capsys, tmp_path):
    f = uniform_box(3)
    s = sample_poissonized_pair(100, 100, f, f, SeededRng(10))
    path = tmp_path / "d3.csv"
    save_labeled_csv(path, s)
    code = run(["test", "--data", str(path), "--constants", str(cache),
                "--output-dir", str(tmp_path)])
    assert code == 2
    assert "d=3" in capsys.readouterr().err


def test_unknown_flag_exits_2(capsys):
    assert run(["tails", "--d", "1", "--bogus", "3"]) == 2
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and "--bogus" in err


def test_invalid_numeric_flag_exits_2(capsys, tmp_path):
    code = run(["tails", "--d", "1", "--replicates", "few",
                "--output-dir", str(tmp_path)])
    assert code == 2
    assert "replicates" in capsys.readouterr().err


def test_power_determinism(tmp_path, cache):
    args = ["power", "--d", "2", "--a", "0.25", "--h-grid", "0:2:2",
            "--n1", "120", "--n2", "80", "--iters", "50", "--tests", "knn_1",
            "--seed", "7", "--constants", str(cache), "--svg"]
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert run(args + ["--output-dir", str(out1)]) == 0
    assert run(args + ["--output-dir", str(out2)]) == 0
    assert (out1 / "power.csv").read_bytes() == (out2 / "power.csv").read_bytes()
    assert (out1 / "power.svg").read_bytes() == (out2 / "power.svg").read_bytes()
    m1 = json.loads((out1 / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    m1.pop("output_dir"), m2.pop("output_dir")
    assert m1 == m2
    header = (out1 / "power.csv").read_text().splitlines()[0]
    assert header == "h,test,power,se,a,d,n1,n2,alpha,seed"


def test_power_missing_knn_constants_row(tmp_path, cache):
    code = run(["power", "--d", "2", "--a", "0.25", "--h-grid", "0:1:2",
                "--n1", "100", "--n2", "80", "--iters", "50", "--tests", "knn_2",
                "--constants", str(cache), "--output-dir", str(tmp_path)])
    assert code == 2


def test_clt_subcommand(tmp_path, cache, capsys):
    code = run(["clt", "--functional", "knn", "--k", "1", "--d", "2",
                "--p", "0.6", "--n", "500", "--replicates", "500",
                "--constants", str(cache), "--seed", "2",
                "--output-dir", str(tmp_path)])
    assert code == 0
    assert "ks_distance=" in capsys.readouterr().out
    lines = (tmp_path / "clt.csv").read_text().splitlines()
    assert lines[0] == "replicate,z"
    assert lines[-1].startswith("# ks_distance=")


def test_dissim_subcommand(tmp_path, capsys):
    code = run(["dissim", "--f", "gaussian:mu=0", "--g", "gaussian:mu=1",
                "--d", "1", "--p", "0.5", "--mc-n", "20000", "--seed", "1",
                "--output-dir", str(tmp_path)])
    out = capsys.readouterr().out.strip().splitlines()
    assert code == 0
    assert out[0] == "dissimilarity,se"
    val = float(out[1].split(",")[0])
    assert 0.5 < val < 1.0


def test_tails_subcommand(tmp_path, capsys):
    code = run(["tails", "--k", "1", "--d", "1", "--s-grid", "0.25:1:4",
                "--replicates", "400", "--seed", "4", "--output-dir", str(tmp_path)])
    assert code == 0
    assert "fit_slope=" in capsys.readouterr().out
    assert (tmp_path / "tails.csv").exists()


def test_config_file_with_flag_override(tmp_path, cache, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("d = 1\ns-grid = 0.25:1:4\nreplicates = 300  # comment\n")
    code = run(["tails", "--config", str(cfg), "--replicates", "200",
                "--output-dir", str(tmp_path)])
    assert code == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["replicates"] == 200  # flag beat the config value
    assert manifest["s_grid"] == "0.25:1:4"


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("nonsense = 1\n")
    assert run(["tails", "--d", "1", "--config", str(cfg),
                "--output-dir", str(tmp_path)]) == 2


def test_localpower_subcommand(tmp_path, cache, capsys):
    code = run(["localpower", "--d", "2", "--h-vec", "1,1", "--p", "0.6",
                "--n1", "180", "--n2", "120", "--iters", "60",
                "--constants", str(cache), "--output-dir", str(tmp_path)])
    assert code == 0
    assert "predicted_rsq4=" in capsys.readouterr().out
    assert (tmp_path / "local_power.csv").exists()


def test_output_reproducible_from_manifest_alone(tmp_path, cache):
    """Rebuild the command line from a manifest and get identical output."""
    out1 = tmp_path / "orig"
    assert run(["power", "--d", "2", "--a", "0.25", "--h-grid", "0:1:2",
                "--n1", "100", "--n2", "80", "--iters", "50", "--tests", "knn_1",
                "--seed", "9", "--constants", str(cache),
                "--output-dir", str(out1)]) == 0
    manifest = json.loads((out1 / "manifest.json").read_text())
    out2 = tmp_path / "replay"
    argv = [manifest["command"]]
    for key, val in manifest.items():
        if key in ("command", "package_version", "output_dir") or val is None:
            continue
        if key == "svg":
            if val:
                argv.append("--svg")
            continue
        argv += [f"--{key.replace('_', '-')}", str(val)]
    argv += ["--output-dir", str(out2)]
    assert run(argv) == 0
    assert (out1 / "power.csv").read_bytes() == (out2 / "power.csv").read_bytes()
