import numpy as np
import pytest

from mvpl import cli
from mvpl import data as dt


def run_cli(*argv):
    return cli.main(list(argv))


@pytest.fixture(scope="module")
def tiny_container(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "tiny.mvpl"
    code = run_cli(
        "gen-data", "--out", str(path), "--n-per-class", "2", "--eval-per-class", "1",
        "--frames", "4", "--height", "16", "--width", "16",
        "--labeled-fraction", "0.5", "--seed", "3",
    )
    assert code == 0
    return path


def config_text(data, out, **overrides):
    values = {
        "data": data,
        "out": out,
        "epochs": 2,
        "batch_size": 2,
        "mu": 1,
        "crop_size": 12,
        "eta": 0.05,
        "lr_ramp_epochs": 1.0,
        "model_widths": "3,4",
        "eval_every": 1,
    }
    values.update(overrides)
    return "".join(f"{k} = {v}\n" for k, v in values.items())


def test_gen_data_writes_valid_container(tiny_container):
    ds = dt.load_dataset(tiny_container)
    assert len(ds.manifest.train_ids()) == 16
    assert len(ds.manifest.labeled_train_ids()) == 8
    assert len(ds.manifest.eval_ids()) == 8


def test_gen_data_refuses_overwrite(tiny_container, capsys):
    code = run_cli("gen-data", "--out", str(tiny_container), "--n-per-class", "1")
    assert code == 1
    assert "exists" in capsys.readouterr().err


def test_extract_views_in_place(tiny_container):
    assert not dt.load_dataset(tiny_container).has_views()
    code = run_cli("extract-views", "--data", str(tiny_container), "--iterations", "30")
    assert code == 0
    assert dt.load_dataset(tiny_container).has_views()


def test_train_eval_round_trip(tiny_container, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    out = tmp_path / "run1"
    cfg.write_text(config_text(tiny_container, out))
    assert run_cli("train", "--config", str(cfg)) == 0
    capsys.readouterr()
    assert (out / "metrics.csv").exists()
    assert (out / "config.resolved").exists()
    assert (out / "model.mvpl").exists()
    header = (out / "metrics.csv").read_text().splitlines()[0]
    assert header == "epoch,lr,loss_sup,loss_unsup,mask_rate,pl_acc_rgb,pl_acc_flow,pl_acc_tg,eval_top1"
    resolved = (out / "config.resolved").read_text()
    for key in ("tau =", "mu =", "lambda_u =", "eta =", "W ="):
        assert key in resolved
    code = run_cli("eval", "--checkpoint", str(out / "model.mvpl"),
                   "--data", str(tiny_container), "--clips", "1")
    assert code == 0
    assert "top-1" in capsys.readouterr().out


def test_train_refuses_existing_out_dir(tiny_container, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    out = tmp_path / "run2"
    cfg.write_text(config_text(tiny_container, out))
    assert run_cli("train", "--config", str(cfg)) == 0
    assert run_cli("train", "--config", str(cfg)) == 1
    assert "--force" in capsys.readouterr().err
    assert run_cli("train", "--config", str(cfg), "--force") == 0


def test_train_rejects_unknown_config_key(tiny_container, tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(config_text(tiny_container, tmp_path / "x") + "bogus_key = 3\n")
    assert run_cli("train", "--config", str(cfg)) == 1
    assert "unknown key" in capsys.readouterr().err


def test_train_rejects_missing_dataset(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(config_text(tmp_path / "nope.mvpl", tmp_path / "out"))
    assert run_cli("train", "--config", str(cfg)) == 1
    assert "does not exist" in capsys.readouterr().err


def test_train_warns_when_views_missing(tmp_path, capsys):
    data = tmp_path / "noviews.mvpl"
    assert run_cli(
        "gen-data", "--out", str(data), "--n-per-class", "2", "--eval-per-class", "1",
        "--frames", "3", "--height", "16", "--width", "16", "--labeled-fraction", "1.0",
    ) == 0
    cfg = tmp_path / "run.cfg"
    cfg.write_text(config_text(data, tmp_path / "out", epochs=1))
    assert run_cli("train", "--config", str(cfg)) == 0
    assert "on the fly" in capsys.readouterr().err


def test_gradcheck_passes(capsys):
    assert run_cli("gradcheck") == 0
    out = capsys.readouterr().out
    assert "pass" in out and "FAIL" not in out


def test_ablate_views_summary(tiny_container, tmp_path, capsys):
    out = tmp_path / "ablate"
    code = run_cli(
        "ablate", "--table", "views", "--data", str(tiny_container),
        "--out", str(out), "--seeds", "0", "--epochs", "1", "--model-widths", "3,4",
        "--batch-size", "4", "--crop-size", "12",
    )
    assert code == 0
    summary = (out / "summary.csv").read_text().splitlines()
    assert summary[0] == "variant,top1_seed0,top1_mean"
    names = [line.split(",")[0] for line in summary[1:]]
    assert names == ["rgb", "rgb+flow", "rgb+tg", "rgb+flow+tg"]
    # each run wrote its metrics + resolved config
    assert (out / "rgb" / "seed0" / "metrics.csv").exists()
    assert (out / "rgb" / "seed0" / "config.resolved").exists()


def test_ablate_refuses_existing_dir(tiny_container, tmp_path, capsys):
    out = tmp_path / "ab2"
    out.mkdir()
    code = run_cli("ablate", "--table", "views", "--data", str(tiny_container),
                   "--out", str(out), "--seeds", "0", "--epochs", "1",
                   "--batch-size", "4", "--crop-size", "12")
    assert code == 1
