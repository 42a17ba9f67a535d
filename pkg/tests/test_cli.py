import math

import pytest

from iqinet import config as cfgio
from iqinet.cli import EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO, EXIT_OK, main

SMALL = ["--set", "train.dataset_size=2048", "--set", "train.batch_size=64", "--set", "train.epochs=1",
         "--set", "train.hidden=16", "--set", "train.m=2"]


class TestConfigFiles:
    def test_round_trip(self):
        values = {"a.x": 1.5, "a.flag": True, "b.list": [1, 2], "c": "inf"}
        text = cfgio.dumps(values)
        assert cfgio.dumps(cfgio.loads(text)) == text
        assert cfgio.parse_bool(cfgio.loads(text)["a.flag"]) is True

    def test_comments_and_errors(self):
        assert cfgio.loads("# c\n\nk = v\n") == {"k": "v"}
        with pytest.raises(cfgio.ConfigError):
            cfgio.loads("no equals sign\n")

    def test_parsers(self):
        assert cfgio.parse_float("ideal") == math.inf
        assert cfgio.parse_list("1, 2.5,3") == [1.0, 2.5, 3.0]
        with pytest.raises(cfgio.ConfigError):
            cfgio.parse_int("x")


class TestCommands:
    def test_link_budget(self, capsys):
        assert main(["link-budget"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "h_p" in out and "5.69" in out

    def test_train_eval_export_are_deterministic(self, tmp_path, capsys):
        for tag in ("a", "b"):
            d = tmp_path / tag
            assert main(["train-conv", "--out", str(d / "ckpt"), "--log", str(d / "log.csv"),
                         "--set", "channel.irr_db=15", *SMALL]) == EXIT_OK
            assert main(["eval", "--checkpoint", str(d / "ckpt"), "--snr-db", "4,8",
                         "--set", "sweep.max_bits=20000", "--out", str(d / "ber.csv")]) == EXIT_OK
            assert main(["export-constellation", "--checkpoint", str(d / "ckpt"),
                         "--out", str(d / "c.txt")]) == EXIT_OK
        for name in ("ckpt/tx.net", "ckpt/rx.net", "ckpt/pair.cfg", "log.csv", "ber.csv", "c.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
        assert "train.irr_db = 15.0" in (tmp_path / "a" / "ckpt" / "pair.cfg").read_text()

    def test_train_rl(self, tmp_path):
        args = ["train-rl", "--out", str(tmp_path / "rl"), "--set", "train.dataset_size=3000",
                "--set", "train.finetune_size=1000", "--set", "train.batch_size=50",
                "--set", "train.hidden=16", "--set", "train.epochs=1"]
        assert main(args) == EXIT_OK
        assert "train.regime = rl" in (tmp_path / "rl" / "pair.cfg").read_text()

    def test_baseline_eval_to_stdout(self, capsys):
        assert main(["eval", "--m", "4", "--snr-db", "6", "--set", "channel.irr_db=20",
                     "--set", "sweep.max_bits=40000"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "system,m,irr_db,snr_db,bits,errors,ber,censored,seed"
        assert lines[1].startswith("baseline,4,20.0,6.0,")

    def test_sweep_from_config_file(self, tmp_path):
        conf = tmp_path / "sweep.cfg"
        conf.write_text("sweep.snr_db_list = 5, 10\nsweep.irr_db_list = 15\nsweep.m_list = 2,4\n"
                        "sweep.max_bits = 20000\n")
        for tag in ("a", "b"):
            assert main(["sweep", "--config", str(conf), "--out", str(tmp_path / f"{tag}.csv")]) == EXIT_OK
        text = (tmp_path / "a.csv").read_text()
        assert text == (tmp_path / "b.csv").read_text()
        assert len(text.splitlines()) == 5


class TestExitCodes:
    def test_config_errors(self, tmp_path):
        assert main(["sweep", "--out", str(tmp_path / "x.csv"), "--set", "sweep.m_list=2"]) == EXIT_CONFIG
        assert main(["train-conv", "--out", str(tmp_path / "x"), "--set", "train.bogus=1"]) == EXIT_CONFIG
        assert main(["train-conv", "--out", str(tmp_path / "x"), "--set", "oops"]) == EXIT_CONFIG
        assert main(["train-rl", "--out", str(tmp_path / "x"), "--set", "train.sigma2=0"]) == EXIT_CONFIG

    def test_io_errors(self, tmp_path):
        assert main(["eval", "--checkpoint", str(tmp_path / "missing")]) == EXIT_IO
        assert main(["link-budget", "--config", str(tmp_path / "missing.cfg")]) == EXIT_IO
        conf = tmp_path / "s.cfg"
        conf.write_text(f"sweep.snr_db_list = 5\nsweep.irr_db_list = 15\nsweep.m_list = 2\n"
                        f"sweep.systems = learned-conv\nsweep.checkpoint_dir = {tmp_path / 'none'}\n")
        assert main(["sweep", "--config", str(conf), "--out", str(tmp_path / "o.csv")]) == EXIT_IO

    def test_divergence(self, tmp_path):
        args = ["train-conv", "--out", str(tmp_path / "d"), *SMALL,
                "--set", "train.lr_adam=1e300", "--set", "train.lr_sgd=1e300"]
        assert main(args) == EXIT_DIVERGED
