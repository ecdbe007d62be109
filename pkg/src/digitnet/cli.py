"""Command-line entry point: inspect, train, eval and sweep."""

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import dataio, experiment, network
from .experiment import PRESETS, RunConfig

log = logging.getLogger("digitnet")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _count(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"seed must be non-negative, got {text!r}")
    return value


def _rate(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"learning rate must be > 0, got {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="digitnet", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("inspect", help="print IDX headers and pixel ranges")
    p.add_argument("--data-dir", required=True, type=Path)

    def training_flags(p, hidden_required):
        p.add_argument("--hidden", type=_count, required=hidden_required,
                       help="number of hidden layers")
        p.add_argument("--width", type=_count, default=500, help="neurons per hidden layer")
        p.add_argument("--batch-size", type=_count, default=50)
        p.add_argument("--epochs", type=_count, default=20)
        p.add_argument("--seed", type=_seed, default=0)
        p.add_argument("--preset", choices=PRESETS, default=experiment.REPLICATION)
        p.add_argument("--lr", type=_rate)
        p.add_argument("--loss", choices=["quadratic", "xent"])
        p.add_argument("--optimizer", choices=["sgd", "adam"])
        p.add_argument("--data-dir", required=True, type=Path)
        p.add_argument("--out", type=Path, help="CSV of per-epoch test accuracy")

    p = sub.add_parser("train", help="train one network")
    training_flags(p, hidden_required=True)
    p.add_argument("--checkpoint", type=Path, help="where to save the trained network")

    p = sub.add_parser("eval", help="evaluate a saved network on the test set")
    p.add_argument("--checkpoint", required=True, type=Path)
    p.add_argument("--data-dir", required=True, type=Path)

    p = sub.add_parser("sweep", help="train every row of a grid")
    grid = p.add_mutually_exclusive_group(required=True)
    grid.add_argument("--grid", choices=sorted(experiment.GRIDS))
    grid.add_argument("--grid-file", type=Path)
    p.add_argument("--width", type=_count, default=500)
    p.add_argument("--seed", type=_seed, default=0, help="base seed; row i uses seed + i")
    p.add_argument("--preset", choices=PRESETS, default=experiment.REPLICATION)
    p.add_argument("--data-dir", required=True, type=Path)
    p.add_argument("--out", type=Path, help="CSV of per-epoch test accuracy")
    p.add_argument("--plotdata", type=Path, help="newline-delimited JSON series")
    p.add_argument("--jobs", type=_count, default=1)
    return parser


@dataclass
class Command:
    name: str
    data_dir: Path
    config: RunConfig | None = None
    grid: list[RunConfig] = field(default_factory=list)
    out: Path | None = None
    plotdata: Path | None = None
    checkpoint: Path | None = None
    jobs: int = 1
    verbose: bool = False


def parse_args(argv: list[str]) -> Command:
    ns = build_parser().parse_args(argv)
    cmd = Command(ns.command, ns.data_dir, verbose=ns.verbose)
    if ns.command == "train":
        try:
            cmd.config = RunConfig(
                hidden_layers=ns.hidden, neurons=ns.width, batch_size=ns.batch_size,
                epochs=ns.epochs, seed=ns.seed, preset=ns.preset, lr=ns.lr,
                loss=ns.loss, optimizer=ns.optimizer,
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        cmd.out, cmd.checkpoint = ns.out, ns.checkpoint
    elif ns.command == "eval":
        cmd.checkpoint = ns.checkpoint
    elif ns.command == "sweep":
        if ns.grid:
            cmd.grid = experiment.GRIDS[ns.grid](ns.seed, ns.preset, ns.width)
        else:
            try:
                text = ns.grid_file.read_text()
            except OSError as exc:
                raise UsageError(f"cannot read grid file: {exc}") from None
            try:
                cmd.grid = experiment.read_grid(text, ns.seed, ns.preset)
            except (KeyError, ValueError) as exc:
                raise UsageError(f"bad grid file {ns.grid_file}: {exc}") from None
        cmd.out, cmd.plotdata, cmd.jobs = ns.out, ns.plotdata, ns.jobs
    return cmd


def _check_paths(cmd: Command) -> None:
    if not cmd.data_dir.is_dir():
        raise FileNotFoundError(f"data directory {cmd.data_dir} does not exist")
    dataio.mnist_paths(cmd.data_dir)
    for target in (cmd.out, cmd.plotdata, cmd.checkpoint if cmd.name == "train" else None):
        if target is not None and not target.parent.resolve().is_dir():
            raise FileNotFoundError(f"output directory {target.parent} does not exist")
    if cmd.name == "eval" and not cmd.checkpoint.is_file():
        raise FileNotFoundError(f"checkpoint {cmd.checkpoint} does not exist")


def _progress(epoch: int, acc: float) -> None:
    print(f"epoch {epoch} test_accuracy {acc:.4f}", file=sys.stderr, flush=True)


def _inspect(cmd: Command) -> None:
    paths = dataio.mnist_paths(cmd.data_dir)
    for name, path in paths.items():
        data = path.read_bytes()
        if "images" in name:
            raw = dataio.parse_idx_images(data)
            print(f"{path.name}: magic=0x{dataio.IMAGES_MAGIC:08X} count={raw.count} "
                  f"rows={raw.rows} cols={raw.cols} "
                  f"pixel_min={int(raw.pixels.min())} pixel_max={int(raw.pixels.max())}")
        else:
            raw = dataio.parse_idx_labels(data)
            print(f"{path.name}: magic=0x{dataio.LABELS_MAGIC:08X} count={raw.count} "
                  f"label_min={int(raw.labels.min())} label_max={int(raw.labels.max())}")
    print(f"inspect ok files={len(paths)}")


def _train(cmd: Command) -> None:
    train_ds, test_ds = dataio.load_mnist(cmd.data_dir)
    net, report = experiment.train_network(cmd.config, train_ds, test_ds, on_epoch=_progress)
    if cmd.checkpoint:
        network.save(net, cmd.checkpoint)
    if cmd.out:
        cmd.out.write_text(experiment.to_csv([report]))
    c = cmd.config
    print(f"train hidden={c.hidden_layers} width={c.neurons} batch_size={c.batch_size} "
          f"epochs={c.epochs} seed={c.seed} final_accuracy={experiment.format_accuracy(report.final_accuracy)}")


def _eval(cmd: Command) -> None:
    net = network.load(cmd.checkpoint)
    _, test_ds = dataio.load_mnist(cmd.data_dir)
    acc = experiment.evaluate(net, test_ds)
    print(f"eval checkpoint={cmd.checkpoint} final_accuracy={experiment.format_accuracy(acc)}")


def _sweep(cmd: Command) -> None:
    train_ds, test_ds = dataio.load_mnist(cmd.data_dir)

    def row_done(i, report):
        c = report.config
        print(f"row {i} hidden={c.hidden_layers} batch_size={c.batch_size} epochs={c.epochs} "
              f"test_accuracy {report.final_accuracy:.4f}", file=sys.stderr, flush=True)

    record = experiment.sweep(cmd.grid, train_ds, test_ds, jobs=cmd.jobs, on_report=row_done)
    if cmd.out:
        cmd.out.write_text(experiment.to_csv(record))
    if cmd.plotdata:
        cmd.plotdata.write_text(experiment.to_plotdata(record))
    best = max(record, key=lambda r: r.final_accuracy)
    print(f"sweep rows={len(record)} best_hidden={best.config.hidden_layers} "
          f"final_accuracy={experiment.format_accuracy(best.final_accuracy)}")


HANDLERS = {"inspect": _inspect, "train": _train, "eval": _eval, "sweep": _sweep}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cmd = parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        print("usage: digitnet {inspect,train,eval,sweep} ... (see --help)", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if cmd.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _check_paths(cmd)
        HANDLERS[cmd.name](cmd)
    except (OSError, ValueError) as exc:
        print(f"digitnet: error: {exc}", file=sys.stderr)
        return 1
    return 0
