import json
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from sonomaly.audio import read_wav, synth_clip, write_wav
from sonomaly.bench import CorpusConfig, build_corpus
from sonomaly.cli import main
from sonomaly.service import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


@pytest.fixture(scope="module")
def wav_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("wavs")
    write_wav(d / "bg.wav", synth_clip("tonal_background", 1.5, 1))
    write_wav(d / "anomaly.wav", synth_clip("chirp_anomaly", 0.4, 2))
    return d


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    cfg = CorpusConfig(
        n_train=5,
        n_test_normal=3,
        n_test_anomalous=2,
        snr_levels=(6.0,),
        duration_s=1.5,
        anomaly_duration_range=(0.3, 0.6),
    )
    build_corpus(cfg, seed=3, out_dir=out)
    return out


class TestService:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"

    def test_mix_spectrogram_extract_chain(self, client, wav_dir, tmp_path):
        out = str(tmp_path)
        r = client.post(
            "/mix",
            json={
                "background_wav": str(wav_dir / "bg.wav"),
                "anomaly_wav": str(wav_dir / "anomaly.wav"),
                "snr_db": 0.0,
                "t_start_sample": 800,
                "out_dir": out,
            },
        )
        assert r.status_code == 200
        rec = r.json()["record"]
        assert rec["t_start_sample"] == 800
        mixed = read_wav(r.json()["mixed_wav"])
        assert len(mixed) == len(read_wav(wav_dir / "bg.wav"))

        r = client.post("/spectrogram", json={"wav": r.json()["mixed_wav"], "out_dir": out})
        assert r.status_code == 200
        t, f = r.json()["shape"]
        assert f == 64

        r = client.post("/extract", json={"wav": str(wav_dir / "bg.wav"), "out_dir": out})
        assert r.status_code == 200
        levels = r.json()["levels"]
        assert [l["name"] for l in levels] == ["block1", "block2", "block3"]
        from sonomaly.features import import_embeddings

        pyramid = import_embeddings(r.json()["aep_path"])
        assert len(pyramid.levels) == 3

    def test_fit_and_score(self, client, corpus, tmp_path):
        out = str(tmp_path)
        r = client.post(
            "/fit", json={"corpus_dir": str(corpus), "detector": "padim", "out_dir": out}
        )
        assert r.status_code == 200, r.text
        model_path = r.json()["model_path"]
        assert Path(model_path).exists()

        clip = json.loads((corpus / "manifest.json").read_text())["clips"][-1]
        r = client.post(
            "/score",
            json={
                "model_path": model_path,
                "wav": str(corpus / clip["wav_path"]),
                "out_dir": out,
            },
        )
        assert r.status_code == 200, r.text
        body = r.json()
        assert body["sample_score"] > 0
        assert Path(body["map_npy"]).exists() and Path(body["map_pgm"]).exists()

    def test_user_errors_are_400(self, client, wav_dir, tmp_path):
        r = client.post(
            "/mix",
            json={
                "background_wav": str(wav_dir / "anomaly.wav"),
                "anomaly_wav": str(wav_dir / "bg.wav"),
                "snr_db": 0.0,
                "t_start_sample": 0,
                "out_dir": str(tmp_path),
            },
        )
        assert r.status_code == 400
        assert r.json()["error"] == "BoundsError"

    def test_fit_single_clip_statistics_error(self, client, tmp_path):
        out = tmp_path / "c"
        cfg = CorpusConfig(
            n_train=1,
            n_test_normal=0,
            n_test_anomalous=0,
            snr_levels=(6.0,),
            duration_s=1.0,
            anomaly_duration_range=(0.3, 0.5),
        )
        build_corpus(cfg, seed=1, out_dir=out)
        r = client.post(
            "/fit", json={"corpus_dir": str(out), "detector": "padim", "out_dir": str(tmp_path)}
        )
        assert r.status_code == 400
        assert r.json()["error"] == "StatisticsError"


class TestCli:
    def test_help_lists_flags(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["bench", "--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for flag in ("--seed", "--out", "--snr", "--detector", "--coreset-fraction",
                     "--epsilon", "--steps", "--lr", "--sigma", "--jobs"):
            assert flag in out

    def test_unknown_subcommand_exit_1(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1

    def test_unknown_flag_exit_1(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["mix", "--no-such-flag"])
        assert exc.value.code == 1

    def test_mix_prints_resolved_config_and_succeeds(self, wav_dir, tmp_path, capsys):
        code = main(
            [
                "mix",
                "--background", str(wav_dir / "bg.wav"),
                "--anomaly", str(wav_dir / "anomaly.wav"),
                "--snr", "6",
                "--t-start", "1000",
                "--out", str(tmp_path),
            ]
        )
        out = capsys.readouterr().out
        assert code == 0
        blocks = out.split("}\n{")
        resolved = json.loads(blocks[0] + "}")
        assert resolved["command"] == "mix"
        assert resolved["config"]["snr_db"] == 6.0
        assert resolved["config"]["t_start_sample"] == 1000
        assert (tmp_path / "mixed.wav").exists()

    def test_mix_user_error_exit_1(self, wav_dir, tmp_path, capsys):
        code = main(
            [
                "mix",
                "--background", str(wav_dir / "anomaly.wav"),
                "--anomaly", str(wav_dir / "bg.wav"),
                "--snr", "0",
                "--out", str(tmp_path),
            ]
        )
        assert code == 1
        assert "BoundsError" in capsys.readouterr().out

    def test_fit_one_clip_exit_1(self, tmp_path, capsys):
        corpus = tmp_path / "c"
        cfg = CorpusConfig(
            n_train=1,
            n_test_normal=0,
            n_test_anomalous=0,
            snr_levels=(6.0,),
            duration_s=1.0,
            anomaly_duration_range=(0.3, 0.5),
        )
        build_corpus(cfg, seed=1, out_dir=corpus)
        code = main(["fit", "--corpus", str(corpus), "--detector", "padim", "--out", str(tmp_path / "m")])
        assert code == 1
        assert "StatisticsError" in capsys.readouterr().out

    def test_score_dim_mismatch_exit_1(self, corpus, tmp_path, capsys):
        code = main(["fit", "--corpus", str(corpus), "--detector", "patchcore", "--out", str(tmp_path)])
        assert code == 0
        model = str(tmp_path / "patchcore.avdm")
        # embeddings with the wrong channel width
        from sonomaly.features import FeatureMapPyramid, export_embeddings

        bad = FeatureMapPyramid(
            (np.zeros((4, 4, 3), dtype=np.float32),), ("level_0",), (8, 8)
        )
        export_embeddings(bad, tmp_path / "bad.aep1")
        code = main(
            ["score", "--model", model, "--embeddings", str(tmp_path / "bad.aep1"),
             "--out", str(tmp_path / "s")]
        )
        assert code == 1
        out = capsys.readouterr().out
        assert "ShapeError" in out or "ParameterError" in out

    def test_bench_tiny_and_eval_round_trip(self, tmp_path, capsys):
        out = tmp_path / "bench"
        args = [
            "bench", "--seed", "5", "--out", str(out),
            "--detector", "padim",
            "--n-train", "5", "--n-test-normal", "3", "--n-test-anomalous", "2",
            "--duration", "1.5", "--snr", "6", "--anomaly-duration", "0.3,0.6",
        ]
        code = main(args)
        assert code == 0, capsys.readouterr().out
        capsys.readouterr()
        assert (out / "run" / "report.csv").exists()
        assert (out / "config.json").exists()

        code = main(
            ["eval", "--corpus", str(out / "corpus"), "--maps", str(out / "run" / "maps"),
             "--detector", "padim", "--out", str(tmp_path / "eval"),
             "--models-dir", str(out / "run" / "models")]
        )
        assert code == 0
        assert (tmp_path / "eval" / "report.csv").exists()

    def test_bench_determinism_byte_identical(self, tmp_path):
        outs = []
        for name in ("d1", "d2"):
            out = tmp_path / name
            code = main(
                ["bench", "--seed", "9", "--out", str(out),
                 "--detector", "padim,patchcore",
                 "--n-train", "4", "--n-test-normal", "2", "--n-test-anomalous", "2",
                 "--duration", "1.0", "--snr", "6,-6", "--anomaly-duration", "0.3,0.5"]
            )
            assert code == 0
            outs.append(out)
        a, b = outs
        assert (a / "run/report.csv").read_bytes() == (b / "run/report.csv").read_bytes()
        from sonomaly.detectors import model_crc

        for det in ("padim", "patchcore"):
            assert model_crc(a / f"run/models/{det}.avdm") == model_crc(b / f"run/models/{det}.avdm")

    def test_bench_config_file_merging(self, tmp_path, capsys):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"seed": 11, "corpus": {"n_train": 4, "n_test_normal": 2,
                                                               "n_test_anomalous": 1,
                                                               "duration_s": 1.0,
                                                               "anomaly_duration_range": [0.3, 0.5],
                                                               "snr_levels": [6.0]},
                                        "detectors": ["padim"]}))
        out = tmp_path / "bench"
        code = main(["bench", "--out", str(out), "--config", str(cfg_file)])
        assert code == 0
        echoed = json.loads((out / "config.json").read_text())
        assert echoed["seed"] == 11
        assert echoed["corpus"]["n_train"] == 4
        # flags still override the file
        code = main(["bench", "--out", str(tmp_path / "b2"), "--config", str(cfg_file),
                     "--seed", "12"])
        assert code == 0
        echoed = json.loads((tmp_path / "b2" / "config.json").read_text())
        assert echoed["seed"] == 12

    def test_report_rerender(self, tmp_path, capsys):
        out = tmp_path / "bench"
        main(["bench", "--seed", "5", "--out", str(out), "--detector", "padim",
              "--n-train", "4", "--n-test-normal", "2", "--n-test-anomalous", "1",
              "--duration", "1.0", "--snr", "6", "--anomaly-duration", "0.3,0.5"])
        capsys.readouterr()
        code = main(
            ["report", "--report-json", str(out / "run/report.json"),
             "--out", str(tmp_path / "re"), "--corpus", str(out / "corpus"),
             "--maps", str(out / "run/maps")]
        )
        assert code == 0
        assert (tmp_path / "re" / "report.csv").exists()
        heatmaps = list((tmp_path / "re" / "heatmaps" / "padim").glob("*.pgm"))
        assert len(heatmaps) == 1

    def test_outputs_stay_inside_out_dir(self, wav_dir, tmp_path, capsys):
        before = set()
        for root in (wav_dir,):
            before |= {p for p in Path(root).rglob("*")}
        out = tmp_path / "only_here"
        code = main(
            ["mix", "--background", str(wav_dir / "bg.wav"), "--anomaly",
             str(wav_dir / "anomaly.wav"), "--snr", "0", "--out", str(out)]
        )
        assert code == 0
        after = {p for p in Path(wav_dir).rglob("*")}
        assert before == after  # inputs untouched
        assert (out / "mixed.wav").exists()
