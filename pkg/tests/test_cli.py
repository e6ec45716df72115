import json

import pytest

from helpers import DATA
from molali.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, fresh_dir, main, validate_report


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def ingested(workspace):
    out = workspace / "data"
    assert main(["ingest", "--source", str(DATA / "nci_small.smi"), "--out", str(out), "--seed", "1"]) == EXIT_OK
    return out


@pytest.fixture(scope="module")
def trained(workspace, ingested):
    cfg = workspace / "tiny.json"
    cfg.write_text(json.dumps({"batch_size": 32, "probe_size": 16, "checkpoint_every": 1}))
    out = workspace / "run"
    rc = main(["train", "--config", str(cfg), "--epochs", "1", "--limit", "64", "--data", str(ingested),
               "--out", str(out), "--seed", "3"])
    assert rc == EXIT_OK
    return out


def _checkpoint(run):
    found = sorted(p for p in (run / "checkpoints").glob("*.npz"))
    assert found, list(run.iterdir())
    return found[-1]


def test_ingest_manifest(ingested):
    manifest = json.loads((ingested / "run_manifest.json").read_text())
    for key in ("command", "config", "seed", "code_version", "started", "finished", "outputs", "dataset_hash"):
        assert key in manifest
    assert manifest["command"] == "ingest" and manifest["dataset_hash"]


def test_train_writes_log_and_config(trained):
    config = json.loads((trained / "config.json").read_text())
    assert config["ablation_name"] == "ALMGIG" and config["seed"] == 3 and config["epochs"] == 1
    assert _checkpoint(trained).exists()


def test_train_ablation_switches(workspace, ingested):
    out = workspace / "ali"
    rc = main(["train", "--ablation", "ALI", "--epochs", "1", "--limit", "32", "--data", str(ingested),
               "--out", str(out)])
    assert rc == EXIT_OK
    abl = json.loads((out / "config.json").read_text())["ablation"]
    assert abl["unary_D"] is False and abl["cycle_D"] is False and abl["joint_D"] is True


def test_generate_deterministic(workspace, trained, capsys):
    ck = str(_checkpoint(trained))
    a, b = workspace / "gen", workspace / "gen"
    assert main(["generate", "--checkpoint", ck, "--n", "100", "--seed", "7", "--out", str(a)]) == EXIT_OK
    first = json.loads(capsys.readouterr().out.strip().splitlines()[-1])["error_classes"]
    assert sum(first.values()) == 100
    assert main(["generate", "--checkpoint", ck, "--n", "100", "--seed", "7", "--out", str(b)]) == EXIT_OK
    second = workspace / "gen-1"
    assert (a / "samples.smi").read_bytes() == (second / "samples.smi").read_bytes()


def test_baseline_output(workspace):
    out = workspace / "base"
    assert main(["baseline", "--n", "200", "--seed", "1", "--out", str(out)]) == EXIT_OK
    stats = json.loads((out / "stats.json").read_text())
    assert sum(stats["error_classes"].values()) == 200
    assert stats["error_classes"]["valency"] == 0


def test_evaluate_identical_corpora_and_plot(workspace):
    smi = str(DATA / "small.smi")
    out = workspace / "eval"
    assert main(["evaluate", "--generated", smi, "--reference", smi, "--out", str(out), "--bins", "16"]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    validate_report(report)
    assert report["memd"] == 1.0
    assert len(list((out / "histograms").glob("*.csv"))) == 10
    assert main(["plot", "--report", str(out)]) == EXIT_OK
    assert (out / "descriptors.png").stat().st_size > 0


def test_nn_and_interpolate(workspace, trained, ingested, capsys):
    ck = str(_checkpoint(trained))
    assert main(["nn", "--checkpoint", ck, "--query", "CCO", "--k", "3", "--data", str(ingested),
                 "--index", str(workspace / "idx")]) == EXIT_OK
    res = json.loads(capsys.readouterr().out)
    assert len(res["cosine"]) == 3 and len(res["tanimoto"]) == 3
    assert main(["interpolate", "--checkpoint", ck, "--a", "CCO", "--b", "c1ccccc1", "--steps", "4"]) == EXIT_OK
    assert len(capsys.readouterr().out.strip().splitlines()) == 4


def test_config_errors_exit_2(workspace, tmp_path):
    assert main(["generate", "--checkpoint", str(tmp_path / "missing.npz")]) == EXIT_CONFIG
    assert main(["train", "--ablation", "Nonexistent"]) == EXIT_CONFIG
    assert main(["baseline", "--bogus"]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"no_such_key": 1}))
    assert main(["train", "--config", str(bad), "--data", str(workspace / "data")]) == EXIT_CONFIG
    assert main(["ingest", "--source", str(tmp_path / "nowhere")]) == EXIT_CONFIG


def test_runtime_error_exit_1(tmp_path):
    empty = tmp_path / "empty.smi"
    empty.write_text("")
    smi = str(DATA / "small.smi")
    assert main(["evaluate", "--generated", str(empty), "--reference", smi, "--out", str(tmp_path / "e")]) == EXIT_RUNTIME


def test_fresh_dir_suffixes(tmp_path):
    a = fresh_dir(tmp_path / "run")
    (a / "x").write_text("1")
    b = fresh_dir(tmp_path / "run")
    (b / "x").write_text("1")
    c = fresh_dir(tmp_path / "run")
    assert (a.name, b.name, c.name) == ("run", "run-1", "run-2")


def test_version_and_help(capsys):
    assert main(["--version"]) == EXIT_OK
    assert main(["--help"]) == EXIT_OK
