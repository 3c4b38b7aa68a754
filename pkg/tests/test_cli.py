import json
from pathlib import Path

import pytest

from veriframe.cli import run
from veriframe.config import load_config
from veriframe.errors import VeriframeError
from veriframe.synthetic import make_corpus, make_face_image
from veriframe.media import save_png


def test_no_arguments_usage_error(capsys):
    assert run([]) == 2
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_subcommand(capsys):
    assert run(["frobnicate"]) == 2


def test_domain_error_exit_one(capsys):
    code = run(["ingest", "--manifest", "/nope.csv", "--video-root", "/v",
                "--output-root", "/o"])
    assert code == 1
    assert "error:" in capsys.readouterr().err


@pytest.fixture(scope="module")
def mini_workdir(tmp_path_factory):
    """A small corpus pushed through the whole CLI: ingest + train."""
    workdir = tmp_path_factory.mktemp("cli")
    corpus = workdir / "corpus"
    make_corpus(corpus, n_videos=10, frames_per_video=4, seed=77)
    crops = workdir / "crops"
    assert run([
        "ingest",
        "--manifest", str(corpus / "manifest.csv"),
        "--video-root", str(corpus / "videos"),
        "--output-root", str(crops),
        "--frames", "4",
        "--seed", "3",
    ]) == 0
    artifact = workdir / "artifact"
    assert run([
        "train",
        "--index", str(crops / "index.csv"),
        "--out", str(artifact),
        "--backbone", "tiny_test",
        "--epochs", "6",
        "--lr", "1e-3",
        "--seed", "4",
    ]) == 0
    return workdir, crops, artifact


def test_ingest_and_train_outputs(mini_workdir):
    workdir, crops, artifact = mini_workdir
    assert (crops / "index.csv").is_file()
    assert (artifact / "descriptor.json").is_file()
    assert (artifact / "weights.bin").is_file()
    assert (artifact / "checksum.txt").is_file()
    history = json.loads((artifact / "history.json").read_text())
    assert len(history) == 6


def test_evaluate_writes_reports(mini_workdir, tmp_path):
    workdir, crops, artifact = mini_workdir
    assert run([
        "evaluate",
        "--artifact", str(artifact),
        "--index", str(crops / "index.csv"),
        "--n", "128",
        "--seed", "1",
        "--out-dir", str(tmp_path),
    ]) == 0
    lines = (tmp_path / "report.csv").read_text().splitlines()
    assert lines[0].startswith("model,tp,fp,tn,fn")
    assert lines[1].startswith("tiny_test,")
    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["rows"][0]["model"] == "tiny_test"


def test_export_round_trip(mini_workdir, tmp_path):
    _, _, artifact = mini_workdir
    out = tmp_path / "copy"
    assert run(["export", "--artifact", str(artifact), "--out", str(out)]) == 0
    assert (out / "checksum.txt").read_text() == (artifact / "checksum.txt").read_text()


def test_predict_stdout_json_and_seed_determinism(mini_workdir, tmp_path, capsys):
    _, _, artifact = mini_workdir
    image = make_face_image(size=(300, 300), faces=[(40, 50, 120, 120, True)],
                            seed=5)
    media = tmp_path / "probe.png"
    save_png(image, media)
    outputs = []
    for _ in range(2):
        assert run([
            "predict", "--artifact", str(artifact), "--file", str(media),
            "--seed", "11",
        ]) == 0
        outputs.append(capsys.readouterr().out)
    assert outputs[0] == outputs[1]
    payload = json.loads(outputs[0])
    assert payload["media_type"] == "image"
    assert len(payload["faces"]) == 1
    assert payload["aggregate"]["label"] in ("REAL", "FAKE")


def test_predict_missing_file(mini_workdir, capsys):
    _, _, artifact = mini_workdir
    assert run(["predict", "--artifact", str(artifact),
                "--file", "/does/not/exist.png"]) == 1


def test_report_reference_comparison(tmp_path):
    assert run(["report", "--out-dir", str(tmp_path)]) == 0
    lines = (tmp_path / "report.csv").read_text().splitlines()
    assert len(lines) == 4
    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["best"]["precision"] == ["inception_resnet_v2"]
    assert payload["footnotes"]


def test_report_custom_counts(tmp_path):
    counts = tmp_path / "counts.csv"
    counts.write_text("model,tp,fp,tn,fn\nmine,10,2,9,3\n")
    assert run(["report", "--counts", str(counts), "--out-dir", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["rows"][0]["model"] == "mine"
    assert payload["rows"][0]["tp"] == 10


def test_report_bad_counts_header(tmp_path):
    counts = tmp_path / "counts.csv"
    counts.write_text("name,hits\nx,1\n")
    assert run(["report", "--counts", str(counts), "--out-dir", str(tmp_path)]) == 1


class TestConfigPrecedence:
    def test_defaults(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)  # no veriframe.toml here
        cfg = load_config(env={})
        assert cfg["service.port"] == 8000
        assert cfg["faces.backend"] == "stub"

    def test_file_overrides_defaults(self, tmp_path):
        path = tmp_path / "veriframe.toml"
        path.write_text("[service]\nport = 1234\n")
        cfg = load_config(config_path=path, env={})
        assert cfg["service.port"] == 1234

    def test_env_overrides_file(self, tmp_path):
        path = tmp_path / "veriframe.toml"
        path.write_text("[service]\nport = 1234\n")
        cfg = load_config(config_path=path, env={"VERIFRAME_SERVICE_PORT": "2345"})
        assert cfg["service.port"] == 2345

    def test_flags_override_env(self, tmp_path):
        path = tmp_path / "veriframe.toml"
        path.write_text("[service]\nport = 1234\n")
        cfg = load_config(config_path=path,
                          env={"VERIFRAME_SERVICE_PORT": "2345"},
                          overrides={"service.port": 3456})
        assert cfg["service.port"] == 3456

    def test_bad_int_rejected(self):
        with pytest.raises(VeriframeError):
            load_config(env={"VERIFRAME_SERVICE_PORT": "not-a-port"})

    def test_missing_explicit_file_rejected(self, tmp_path):
        with pytest.raises(VeriframeError, match="not found"):
            load_config(config_path=tmp_path / "absent.toml", env={})

    def test_unknown_override_rejected(self):
        with pytest.raises(VeriframeError, match="unknown config key"):
            load_config(env={}, overrides={"service.passwordz": 1})

    def test_string_keys_pass_through(self, tmp_path):
        path = tmp_path / "veriframe.toml"
        path.write_text("[faces]\nbackend = \"stub\"\n[model]\nbackbone = \"tiny_test\"\n")
        cfg = load_config(config_path=path, env={})
        assert cfg["faces.backend"] == "stub"
        assert cfg["model.backbone"] == "tiny_test"
