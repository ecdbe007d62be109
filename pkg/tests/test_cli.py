import re

import numpy as np
import pytest

from digitnet import network
from digitnet.cli import UsageError, main, parse_args
from digitnet.dataio import RawImages, RawLabels, serialize_idx_images, serialize_idx_labels

SUMMARY = re.compile(r"final_accuracy=(\d\.\d{4})$")


def write_fake_mnist(root, n_train=120, n_test=40, seed=0):
    rng = np.random.default_rng(seed)
    prototypes = rng.integers(0, 256, (10, 784), dtype=np.uint8)
    for prefix, n in (("train", n_train), ("t10k", n_test)):
        labels = rng.integers(0, 10, n).astype(np.uint8)
        noise = rng.integers(-30, 30, (n, 784))
        pixels = np.clip(prototypes[labels].astype(int) + noise, 0, 255).astype(np.uint8)
        (root / f"{prefix}-images-idx3-ubyte").write_bytes(
            serialize_idx_images(RawImages(n, 28, 28, pixels.ravel())))
        (root / f"{prefix}-labels-idx1-ubyte").write_bytes(
            serialize_idx_labels(RawLabels(n, labels)))
    return root


@pytest.fixture
def data_dir(tmp_path):
    d = tmp_path / "mnist"
    d.mkdir()
    return write_fake_mnist(d)


class TestParseArgs:
    def test_table1_best_row(self):
        cmd = parse_args(["train", "--hidden", "4", "--batch-size", "50", "--epochs", "50",
                          "--data-dir", "./mnist"])
        c = cmd.config
        assert cmd.name == "train"
        assert (c.hidden_layers, c.batch_size, c.epochs, c.neurons) == (4, 50, 50, 500)

    def test_sweep_table1(self):
        cmd = parse_args(["sweep", "--grid", "table1", "--data-dir", "./mnist", "--out", "table1.csv"])
        assert len(cmd.grid) == 12
        assert str(cmd.out) == "table1.csv"

    def test_all_training_flags(self):
        cmd = parse_args(["train", "--hidden", "2", "--width", "64", "--batch-size", "10",
                          "--epochs", "3", "--seed", "9", "--preset", "paper-math", "--lr", "0.5",
                          "--loss", "xent", "--optimizer", "adam", "--data-dir", "d",
                          "--out", "o.csv", "--checkpoint", "n.ckpt"])
        c = cmd.config
        assert (c.neurons, c.seed, c.preset, c.lr, c.loss, c.optimizer) == (
            64, 9, "paper-math", 0.5, "xent", "adam")
        assert (str(cmd.out), str(cmd.checkpoint)) == ("o.csv", "n.ckpt")

    def test_pure(self):
        argv = ["train", "--hidden", "3", "--data-dir", "x"]
        assert parse_args(argv) == parse_args(argv)

    @pytest.mark.parametrize("argv,token", [
        (["train", "--hidden", "zero", "--data-dir", "d"], "zero"),
        (["train", "--hidden", "2", "--data-dir", "d", "--bogus"], "--bogus"),
        (["train", "--data-dir", "d"], "--hidden"),
        (["train", "--hidden", "2", "--lr", "fast", "--data-dir", "d"], "fast"),
        (["sweep", "--data-dir", "d"], "--grid"),
    ])
    def test_usage_errors_name_token(self, argv, token):
        with pytest.raises(UsageError, match=re.escape(token)):
            parse_args(argv)


class TestMain:
    def test_usage_exit_code(self, capsys):
        assert main(["train", "--hidden", "zero", "--data-dir", "d"]) == 2
        assert "zero" in capsys.readouterr().err

    def test_missing_data_dir_is_runtime_error(self, tmp_path, capsys):
        assert main(["train", "--hidden", "1", "--data-dir", str(tmp_path / "nope")]) == 1
        assert "does not exist" in capsys.readouterr().err

    def test_missing_output_dir_checked_before_training(self, data_dir, tmp_path, capsys):
        rc = main(["train", "--hidden", "1", "--data-dir", str(data_dir),
                   "--out", str(tmp_path / "missing" / "x.csv")])
        assert rc == 1
        assert "epoch" not in capsys.readouterr().err

    def test_inspect(self, data_dir, capsys):
        assert main(["inspect", "--data-dir", str(data_dir)]) == 0
        out = capsys.readouterr().out
        assert "count=120 rows=28 cols=28" in out
        assert "pixel_min=" in out and "pixel_max=" in out

    def test_train_then_eval(self, data_dir, tmp_path, capsys):
        ckpt, csv_path = tmp_path / "net.ckpt", tmp_path / "run.csv"
        rc = main(["train", "--hidden", "1", "--width", "16", "--batch-size", "10", "--epochs", "3",
                   "--data-dir", str(data_dir), "--checkpoint", str(ckpt), "--out", str(csv_path)])
        assert rc == 0
        captured = capsys.readouterr()
        out_lines = captured.out.strip().splitlines()
        assert len(out_lines) == 1
        trained = SUMMARY.search(out_lines[0]).group(1)
        assert len(re.findall(r"^epoch \d+ test_accuracy \d\.\d{4}$", captured.err, re.M)) == 3
        assert csv_path.read_text().count("\n") == 4
        assert network.load(ckpt).depth == 2

        assert main(["eval", "--checkpoint", str(ckpt), "--data-dir", str(data_dir)]) == 0
        evaluated = SUMMARY.search(capsys.readouterr().out.strip()).group(1)
        assert evaluated == trained

    def test_eval_missing_checkpoint(self, data_dir, tmp_path):
        assert main(["eval", "--checkpoint", str(tmp_path / "none"), "--data-dir", str(data_dir)]) == 1

    def test_eval_corrupt_checkpoint(self, data_dir, tmp_path):
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"garbage")
        assert main(["eval", "--checkpoint", str(bad), "--data-dir", str(data_dir)]) == 1

    def test_sweep_grid_file(self, data_dir, tmp_path, capsys):
        grid = tmp_path / "grid.csv"
        grid.write_text("hidden_layers,batch_size,epochs\n1,20,2\n2,10,1\n")
        out, plot = tmp_path / "s.csv", tmp_path / "s.ndjson"
        rc = main(["sweep", "--grid-file", str(grid), "--width", "8", "--data-dir", str(data_dir),
                   "--out", str(out), "--plotdata", str(plot)])
        assert rc == 0
        assert SUMMARY.search(capsys.readouterr().out.strip())
        assert out.read_text().count("\n") == 1 + 3
        assert plot.read_text().count("\n") == 3 + 2
