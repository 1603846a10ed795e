import json

import pytest
import yaml

from turboae_ti.cli import main


def tiny_config_dict(name="tiny"):
    return {
        "name": name,
        "block_len": 8,
        "arch": {"block_len": 8, "enc_filters": 4, "enc_kernel": 3,
                 "dec_filters": 4, "dec_kernel": 3, "dec_iters": 2},
        "training": {"epochs": 1, "steps_enc": 1, "steps_dec": 1,
                     "batch_size": 8, "channel": {"kind": "awgn"},
                     "seed": 1, "val_blocks": 8},
        "eval_channel": {"kind": "awgn"},
        "eval_snr_db": [0.0, 2.0],
        "eval_min_errors": 5,
        "eval_max_blocks": 10,
        "seed": 1,
    }


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.setenv("TURBOAE_TI_OUT", str(tmp_path))
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture
def config_path(workdir):
    path = workdir / "tiny.yaml"
    path.write_text(yaml.safe_dump(tiny_config_dict()))
    return path


@pytest.fixture
def trained(workdir, config_path):
    out = workdir / "run"
    assert main(["train", "--config", str(config_path),
                 "--out", str(out)]) == 0
    return out


class TestTrain:
    def test_writes_artifacts(self, trained):
        assert (trained / "config.yaml").exists()
        assert (trained / "epoch_0001.pt").exists()
        assert (trained / "history.csv").exists()

    def test_resume_when_done_is_a_noop(self, trained, config_path, capsys):
        assert main(["train", "--config", str(config_path),
                     "--out", str(trained), "--resume"]) == 0
        assert "nothing to do" in capsys.readouterr().out

    def test_preset_smoke(self, workdir):
        # presets cover both scales; just check they resolve and validate
        out = workdir / "preset_run"
        cfg = workdir / "dump.yaml"
        from turboae_ti.presets import preset
        from turboae_ti.config import save_config
        p = preset("awgn_l40", scale="desk", seed=0)
        save_config(p, cfg)
        loaded = yaml.safe_load(cfg.read_text())
        assert loaded["block_len"] == 40

    def test_missing_config_is_usage_error(self, workdir):
        assert main(["train", "--config", str(workdir / "nope.yaml")]) == 2

    def test_no_config_or_preset_is_usage_error(self, workdir):
        assert main(["train"]) == 2

    def test_unparsable_config_is_usage_error(self, workdir):
        bad = workdir / "bad.yaml"
        bad.write_text("{:not yaml")
        assert main(["train", "--config", str(bad)]) == 2

    def test_invalid_field_is_usage_error(self, workdir):
        d = tiny_config_dict()
        d["eval_snr_db"] = []
        bad = workdir / "bad.yaml"
        bad.write_text(yaml.safe_dump(d))
        assert main(["train", "--config", str(bad)]) == 2


class TestEval:
    def test_turbo_baseline(self, workdir, config_path, capsys):
        out = workdir / "ber_turbo.csv"
        assert main(["eval", "--config", str(config_path),
                     "--model", "lte-turbo", "--out", str(out)]) == 0
        assert out.exists()
        assert "lte-turbo" in capsys.readouterr().out

    def test_neural_checkpoint(self, trained, config_path, workdir):
        out = workdir / "ber_neural.csv"
        assert main(["eval", "--config", str(config_path),
                     "--checkpoint", str(trained / "epoch_0001.pt"),
                     "--out", str(out)]) == 0
        text = out.read_text()
        assert text.startswith("# config_hash=")
        assert "turboae-ti" in text

    def test_soft_interleaver_flag(self, trained, config_path, workdir):
        out = workdir / "ber_soft.csv"
        assert main(["eval", "--config", str(config_path), "--soft",
                     "--checkpoint", str(trained / "epoch_0001.pt"),
                     "--out", str(out)]) == 0

    def test_sharded_runs_merge_to_csv(self, workdir, config_path):
        outs = []
        for i in range(2):
            out = workdir / f"shard{i}.csv"
            assert main(["eval", "--config", str(config_path),
                         "--model", "lte-turbo", "--shards", "2",
                         "--shard-index", str(i), "--out", str(out)]) == 0
            outs.append(out)
        from turboae_ti.evaluation import BerCurve, merge_curves
        merged = merge_curves([BerCurve.from_csv(o) for o in outs], 8)
        assert len(merged.points) == 2

    def test_neural_without_checkpoint_is_usage_error(self, workdir, config_path):
        assert main(["eval", "--config", str(config_path)]) == 2

    def test_wrong_arch_checkpoint_is_usage_error(self, trained, workdir):
        d = tiny_config_dict("other")
        d["block_len"] = 16
        d["arch"]["block_len"] = 16
        other = workdir / "other.yaml"
        other.write_text(yaml.safe_dump(d))
        assert main(["eval", "--config", str(other),
                     "--checkpoint", str(trained / "epoch_0001.pt")]) == 2


class TestFinetune:
    def test_zero_epochs(self, trained, config_path, workdir):
        out = workdir / "ft"
        assert main(["finetune", str(trained / "epoch_0001.pt"),
                     "--config", str(config_path), "--epochs", "0",
                     "--out", str(out)]) == 0

    def test_runs_on_new_channel(self, trained, workdir):
        d = tiny_config_dict("burst")
        d["training"]["channel"] = {"kind": "bursty_rician", "K": 10.0,
                                    "sigma_b": 2.0}
        cfg = workdir / "burst.yaml"
        cfg.write_text(yaml.safe_dump(d))
        out = workdir / "ft2"
        assert main(["finetune", str(trained / "epoch_0001.pt"),
                     "--config", str(cfg), "--epochs", "1",
                     "--out", str(out)]) == 0
        assert (out / "epoch_0002.pt").exists()


class TestAnalyze:
    def test_heatmap(self, trained, workdir, capsys):
        out = workdir / "a"
        assert main(["analyze", str(trained / "epoch_0001.pt"),
                     "--mode", "heatmap", "--out", str(out)]) == 0
        assert (out / "interleaver.png").exists()
        perm = json.loads((out / "interleaver.json").read_text())["perm"]
        assert sorted(perm) == list(range(8))

    def test_distance(self, trained, workdir):
        out = workdir / "d"
        assert main(["analyze", str(trained / "epoch_0001.pt"),
                     "--mode", "distance", "--m", "2", "--instances", "2",
                     "--out", str(out)]) == 0
        report = json.loads((out / "distance.json").read_text())
        assert report["M"] == 2 and len(report["distances"]) == 2

    def test_ber_vs_epoch_over_directory(self, trained, workdir, capsys):
        out = workdir / "e"
        assert main(["analyze", str(trained), "--mode", "ber-vs-epoch",
                     "--blocks", "16", "--out", str(out)]) == 0
        assert (out / "ber_vs_epoch.csv").exists()
        assert "epoch 1:" in capsys.readouterr().out

    def test_empty_directory_is_usage_error(self, workdir):
        empty = workdir / "empty"
        empty.mkdir()
        assert main(["analyze", str(empty), "--mode", "ber-vs-epoch"]) == 2


class TestPlot:
    def test_plots_curves_with_zero_ber_markers(self, workdir, config_path):
        csv = workdir / "c.csv"
        assert main(["eval", "--config", str(config_path),
                     "--model", "lte-turbo", "--out", str(csv)]) == 0
        png = workdir / "ber.png"
        assert main(["plot", str(csv), "--out", str(png)]) == 0
        assert png.stat().st_size > 0

    def test_empty_csv_is_usage_error(self, workdir):
        empty = workdir / "empty.csv"
        empty.write_text("model_id,channel_kind,K,sigma_b,S,snr_db,"
                         "ebno_db,blocks,bit_errors,ber,ci95\n")
        assert main(["plot", str(empty), "--out", str(workdir / "x.png")]) == 2


class TestVerify:
    def test_checkpoint_matches_its_config(self, trained, config_path):
        assert main(["verify", str(trained / "epoch_0001.pt"),
                     "--config", str(config_path)]) == 0

    def test_csv_matches_its_config(self, trained, config_path, workdir):
        out = workdir / "v.csv"
        assert main(["eval", "--config", str(config_path),
                     "--model", "lte-turbo", "--out", str(out)]) == 0
        assert main(["verify", str(out), "--config", str(config_path)]) == 0

    def test_mismatch_detected(self, trained, workdir):
        d = tiny_config_dict()
        d["seed"] = 99
        other = workdir / "other.yaml"
        other.write_text(yaml.safe_dump(d))
        assert main(["verify", str(trained / "epoch_0001.pt"),
                     "--config", str(other)]) == 2

    def test_unknown_artifact_type_is_usage_error(self, trained, config_path,
                                                  workdir):
        weird = workdir / "thing.txt"
        weird.write_text("hello")
        assert main(["verify", str(weird), "--config", str(config_path)]) == 2
