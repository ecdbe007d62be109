"""Training runs, test-set evaluation, hyperparameter sweeps and result files."""

import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable

import numpy as np

from .dataio import LabeledDataset
from .learning import Hyperparams, Loss, Optimizer, Trainer
from .network import OUTPUT_WIDTH, Activation, LayerSpec, Network, build, predict_batch
from .rng import SplitMix64

log = logging.getLogger(__name__)

PAPER_MATH = "paper-math"
REPLICATION = "replication"
PRESETS = (PAPER_MATH, REPLICATION)
DEFAULT_LR = {Optimizer.SGD: 3.0, Optimizer.ADAM: 0.001}


@dataclass(frozen=True)
class RunConfig:
    hidden_layers: int
    batch_size: int
    epochs: int
    neurons: int = 500
    seed: int = 0
    preset: str = REPLICATION
    lr: float | None = None
    loss: str | None = None
    optimizer: str | None = None

    def __post_init__(self):
        if self.hidden_layers < 1:
            raise ValueError(f"hidden_layers must be >= 1, got {self.hidden_layers}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.neurons < 1:
            raise ValueError(f"neurons must be >= 1, got {self.neurons}")
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; choose from {PRESETS}")

    def resolve(self) -> tuple[list[LayerSpec], Hyperparams]:
        """Layer layout and optimizer settings after applying preset defaults."""
        if self.preset == PAPER_MATH:
            hidden, loss, opt = Activation.SIGMOID, Loss.QUADRATIC, Optimizer.SGD
        else:
            hidden, loss, opt = Activation.RELU, Loss.SOFTMAX_CROSS_ENTROPY, Optimizer.ADAM
        if self.loss is not None:
            loss = Loss.parse(self.loss)
        if self.optimizer is not None:
            opt = Optimizer(self.optimizer)
        lr = self.lr if self.lr is not None else DEFAULT_LR[opt]
        output = Activation.IDENTITY if loss is Loss.SOFTMAX_CROSS_ENTROPY else Activation.SIGMOID
        specs = [LayerSpec(self.neurons, hidden) for _ in range(self.hidden_layers)]
        specs.append(LayerSpec(OUTPUT_WIDTH, output))
        hp = Hyperparams(eta=lr, m=self.batch_size, epochs=self.epochs, loss=loss, optimizer=opt)
        return specs, hp

    def seeds(self) -> tuple[int, int]:
        """(initialization seed, data-order seed), both derived from ``seed``."""
        rng = SplitMix64(self.seed)
        return rng.next_u64(), rng.next_u64()


@dataclass
class TrainReport:
    config: RunConfig
    per_epoch_accuracy: list[float]
    wall_time_seconds: float = 0.0

    @property
    def final_accuracy(self) -> float:
        return self.per_epoch_accuracy[-1]

    def same_result(self, other: "TrainReport") -> bool:
        return self.config == other.config and self.per_epoch_accuracy == other.per_epoch_accuracy


@dataclass
class SweepRecord:
    reports: list[TrainReport] = field(default_factory=list)

    def __len__(self):
        return len(self.reports)

    def __iter__(self):
        return iter(self.reports)


def evaluate(net: Network, test: LabeledDataset) -> float:
    if test.n < 1:
        raise ValueError("cannot evaluate on an empty test set")
    predicted = predict_batch(net, test.inputs)
    return float(np.mean(predicted == test.labels))


def train_network(config: RunConfig, train_ds: LabeledDataset, test_ds: LabeledDataset,
                  on_epoch: Callable[[int, float], None] | None = None) -> tuple[Network, TrainReport]:
    specs, hp = config.resolve()
    init_seed, order_seed = config.seeds()
    start = time.perf_counter()
    net = build(train_ds.inputs.shape[1], specs, init_seed)
    trainer = Trainer(hp, order_seed)
    accuracies = []
    for epoch in range(hp.epochs):
        net = trainer.epoch(net, train_ds, epoch)
        acc = evaluate(net, test_ds)
        accuracies.append(acc)
        log.info("epoch %d/%d accuracy %.4f", epoch + 1, hp.epochs, acc)
        if on_epoch is not None:
            on_epoch(epoch + 1, acc)
    report = TrainReport(config, accuracies, time.perf_counter() - start)
    return net, report


def train(config: RunConfig, train_ds: LabeledDataset, test_ds: LabeledDataset,
          on_epoch: Callable[[int, float], None] | None = None) -> TrainReport:
    return train_network(config, train_ds, test_ds, on_epoch)[1]


# Paper values for each (hidden layers, batch size, epochs) row, in table order.
TABLE1 = [
    (2, 50, 50, 0.9726),
    (3, 50, 20, 0.9645),
    (3, 50, 50, 0.9656),
    (4, 50, 20, 0.9632),
    (4, 100, 20, 0.9581),
    (4, 50, 50, 0.9732),
    (4, 100, 50, 0.9656),
    (5, 50, 40, 0.9709),
    (6, 50, 20, 0.9591),
    (7, 50, 20, 0.9567),
    (8, 50, 20, 0.9619),
    (9, 50, 20, 0.9592),
]


def table1_band(hidden_layers: int, epochs: int) -> float:
    """Allowed deviation from the published accuracy for a replication row."""
    return 0.03 if hidden_layers >= 6 and epochs == 20 else 0.02


def table1_grid(base_seed: int = 0, preset: str = REPLICATION, neurons: int = 500) -> list[RunConfig]:
    return [
        RunConfig(hidden_layers=h, batch_size=m, epochs=e, neurons=neurons,
                  seed=base_seed + i, preset=preset)
        for i, (h, m, e, _) in enumerate(TABLE1)
    ]


GRIDS = {"table1": table1_grid}


def read_grid(text: str, base_seed: int = 0, preset: str = REPLICATION) -> list[RunConfig]:
    """Grid file: CSV with columns hidden_layers,batch_size,epochs and optional neurons,seed."""
    rows = list(csv.DictReader(io.StringIO(text)))
    grid = []
    for i, row in enumerate(rows):
        grid.append(RunConfig(
            hidden_layers=int(row["hidden_layers"]),
            batch_size=int(row["batch_size"]),
            epochs=int(row["epochs"]),
            neurons=int(row.get("neurons") or 500),
            seed=int(row["seed"]) if row.get("seed") else base_seed + i,
            preset=row.get("preset") or preset,
        ))
    return grid


_worker_data: tuple[LabeledDataset, LabeledDataset] | None = None


def _init_worker(train_ds, test_ds):
    global _worker_data
    _worker_data = (train_ds, test_ds)


def _run_row(config: RunConfig) -> TrainReport:
    return train(config, *_worker_data)


def sweep(grid: list[RunConfig], train_ds: LabeledDataset, test_ds: LabeledDataset,
          jobs: int = 1, on_report: Callable[[int, TrainReport], None] | None = None) -> SweepRecord:
    """Train every grid row; reports come back in grid order whatever the execution order."""
    if not grid:
        raise ValueError("sweep grid is empty")
    reports: list[TrainReport | None] = [None] * len(grid)
    if jobs <= 1:
        for i, config in enumerate(grid):
            reports[i] = train(config, train_ds, test_ds)
            if on_report:
                on_report(i, reports[i])
    else:
        with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(train_ds, test_ds)) as pool:
            futures = {pool.submit(_run_row, c): i for i, c in enumerate(grid)}
            for fut, i in futures.items():
                reports[i] = fut.result()
                if on_report:
                    on_report(i, reports[i])
    return SweepRecord(reports)


CSV_HEADER = ["hidden_layers", "neurons", "batch_size", "epochs", "seed", "epoch", "test_accuracy"]


def format_accuracy(acc: float) -> str:
    """Four decimals, rounding half up on the shortest decimal repr of ``acc``."""
    return str(Decimal(repr(float(acc))).quantize(Decimal("0.0001"), rounding=ROUND_HALF_UP))


def to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for report in records:
        c = report.config
        for epoch, acc in enumerate(report.per_epoch_accuracy, start=1):
            writer.writerow([c.hidden_layers, c.neurons, c.batch_size, c.epochs, c.seed,
                             epoch, format_accuracy(acc)])
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        parsed = {k: int(v) for k, v in row.items() if k != "test_accuracy"}
        parsed["test_accuracy"] = float(row["test_accuracy"])
        rows.append(parsed)
    return rows


def to_plotdata(records) -> str:
    """Newline-delimited JSON.

    ``{"series": "epoch", "config_id", "epoch", "accuracy", ...}`` per trained
    epoch, then ``{"series": "final", "config_id", "hidden_layers", "accuracy", ...}``
    per config for the accuracy-versus-depth chart.
    """
    lines = []
    reports = list(records)
    for i, report in enumerate(reports):
        c = report.config
        for epoch, acc in enumerate(report.per_epoch_accuracy, start=1):
            lines.append({"series": "epoch", "config_id": i, "epoch": epoch,
                          "accuracy": float(format_accuracy(acc)),
                          "hidden_layers": c.hidden_layers, "batch_size": c.batch_size})
    for i, report in enumerate(reports):
        c = report.config
        lines.append({"series": "final", "config_id": i, "epoch": len(report.per_epoch_accuracy),
                      "accuracy": float(format_accuracy(report.final_accuracy)),
                      "hidden_layers": c.hidden_layers, "batch_size": c.batch_size,
                      "epochs": c.epochs})
    return "".join(json.dumps(line) + "\n" for line in lines)


def emit(records, fmt: str = "csv") -> str:
    if fmt == "csv":
        return to_csv(records)
    if fmt == "plotdata":
        return to_plotdata(records)
    raise ValueError(f"unknown output format {fmt!r}")
