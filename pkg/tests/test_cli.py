from __future__ import annotations

import json
import subprocess
import sys

import pytest

from assaygen.cli import main
from assaygen.config import ConfigError, Hyperparameters, load_config

from .conftest import make_workspace


def _run(ws, *args):
    return main([args[0], "--config", str(ws["config"]), *args[1:]])


def _run_dir(ws):
    (d,) = [p for p in (ws["root"] / "runs").iterdir() if p.is_dir()]
    return d


def test_retrieve_without_index_is_missing_artifact(workspace, capsys):
    assert _run(workspace, "ingest") == 0
    assert _run(workspace, "retrieve") == 1
    err = capsys.readouterr().err
    assert "run 'index' first" in err


def test_generate_without_retrieval_is_missing_artifact(workspace, capsys):
    assert _run(workspace, "ingest") == 0
    assert _run(workspace, "index") == 0
    assert _run(workspace, "generate") == 1
    assert "run 'retrieve' first" in capsys.readouterr().err


def test_stage_by_stage_with_default_hyperparameters(workspace, capsys):
    for cmd in ("ingest", "index", "retrieve", "generate"):
        assert _run(workspace, cmd) == 0, cmd
    run_dir = _run_dir(workspace)
    manifest = json.loads((run_dir / "grk4" / "manifest.json").read_text())
    assert manifest["n_batches"] == 10
    assert manifest["hyperparameters"]["max_assay_num"] == 10
    assert len(list((run_dir / "grk4" / "batches").glob("batch_*.txt"))) == 10
    run_manifest = json.loads((run_dir / "run_manifest.json").read_text())
    assert run_manifest["seed"] == 0 and len(run_manifest["template_digests"]) >= 5
    assert run_manifest["sampling"] == {"temperature": 1.0, "max_output_tokens": 2048}
    retrieval = json.loads((run_dir / "grk4" / "retrieval.json").read_text())
    assert retrieval["k"] == 300
    assert "generated" in capsys.readouterr().out


def test_seed_override_changes_run_directory(workspace):
    assert _run(workspace, "ingest") == 0
    assert _run(workspace, "ingest", "--seed", "5") == 0
    assert len([p for p in (workspace["root"] / "runs").iterdir()]) == 2


def test_full_pipeline_is_reproducible(tmp_path):
    outputs = []
    for name in ("a", "b"):
        ws = make_workspace(tmp_path / name)
        assert main(["run", "--config", str(ws["config"]), "--targets", str(ws["targets"]), "--mock-llm",
                     "--parallel", "2"]) == 0
        rd = _run_dir(ws)
        files = {}
        for t in ("grk4", "egfr", "ache"):
            for f in ("molecules.smi", "prompt.txt", "generation.json", "optimization.json", "report.json"):
                files[f"{t}/{f}"] = (rd / t / f).read_bytes()
        files["report.csv"] = (rd / "report.csv").read_bytes()
        files["aggregate.json"] = (rd / "aggregate.json").read_bytes()
        outputs.append(files)
    assert outputs[0] == outputs[1]
    assert outputs[0]["grk4/molecules.smi"].strip()


def test_config_errors_exit_one(tmp_path, capsys):
    bad = tmp_path / "c.json"
    bad.write_text(json.dumps({"paths": {}}))
    assert main(["ingest", "--config", str(bad)]) == 1
    assert "seed" in capsys.readouterr().err
    assert main(["ingest", "--config", str(tmp_path / "nope.json")]) == 1


def test_config_validation(tmp_path, workspace):
    cfg = json.loads(workspace["config"].read_text())
    cfg["hyperparameters"] = {"batch_size": 200}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert "batch_size" in str(exc.value)
    cfg["hyperparameters"] = {}
    cfg["paths"]["raw_dir"] = str(tmp_path / "missing")
    p.write_text(json.dumps(cfg))
    with pytest.raises(ConfigError):
        load_config(p)


def test_defaults():
    hp = Hyperparameters()
    assert (hp.max_assay_num, hp.n_mol, hp.max_mol_size, hp.min_mol_num) == (10, 8, 45, 8)
    assert (hp.retrieval_k, hp.batch_size, hp.total_molecules) == (300, 10, 100)


def test_provider_failure_exits_two(workspace, capsys, monkeypatch):
    cfg = json.loads(workspace["config"].read_text())
    cfg["providers"]["embedder"] = {"model_id": "emb", "kind": "openai", "api_key_env": "ASSAYGEN_TEST_NO_KEY"}
    workspace["config"].write_text(json.dumps(cfg))
    monkeypatch.delenv("ASSAYGEN_TEST_NO_KEY", raising=False)
    assert _run(workspace, "ingest") == 0
    assert _run(workspace, "index") == 2
    assert "AuthError" in capsys.readouterr().err
    assert _run(workspace, "index", "--mock-llm") == 0


def test_module_entry_point_help():
    out = subprocess.run([sys.executable, "-m", "assaygen", "--help"], capture_output=True, text=True, check=True)
    for cmd in ("ingest", "index", "retrieve", "generate", "optimize", "evaluate"):
        assert cmd in out.stdout
