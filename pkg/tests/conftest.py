import os
from pathlib import Path

import numpy as np
import pytest

from digitnet.dataio import LabeledDataset, load_mnist, mnist_paths
from digitnet.network import Activation, LayerSpec, build
from digitnet.rng import SplitMix64

REPO = Path(__file__).resolve().parent.parent


def mnist_dir() -> Path | None:
    candidates = [os.environ.get("DIGITNET_MNIST_DIR"), REPO / "data" / "mnist"]
    for c in candidates:
        if not c:
            continue
        try:
            mnist_paths(c)
        except (FileNotFoundError, OSError):
            continue
        return Path(c)
    return None


@pytest.fixture(scope="session")
def mnist_path():
    path = mnist_dir()
    if path is None:
        pytest.skip("MNIST IDX files not found; set DIGITNET_MNIST_DIR")
    return path


@pytest.fixture(scope="session")
def mnist(mnist_path):
    return load_mnist(mnist_path)


def toy_t1() -> tuple:
    """10 two-feature samples, 2-class one-hot targets, 2-3-2 sigmoid net."""
    rng = SplitMix64(2024)
    xs = rng.doubles(20).reshape(10, 2) * 2 - 1
    labels = (xs[:, 0] + 0.5 * xs[:, 1] > 0).astype(int)
    ys = np.eye(2)[labels]
    net = build(2, [LayerSpec(3, Activation.SIGMOID), LayerSpec(2, Activation.SIGMOID)], seed=7)
    return LabeledDataset(xs, ys), net


@pytest.fixture
def t1():
    return toy_t1()


def random_sigmoid_case(k: int):
    """Network of depth 1-3 with widths 1-6 plus a random (x, y) pair."""
    rng = SplitMix64(1000 + k)
    depth = 1 + rng.below(3)
    widths = [1 + rng.below(6) for _ in range(depth + 1)]
    net = build(widths[0], [LayerSpec(w, Activation.SIGMOID) for w in widths[1:]], seed=k)
    x = rng.doubles(widths[0]) * 2 - 1
    y = rng.doubles(widths[-1])
    return net, x, y


_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, title = marker.args
    entry = _criteria.setdefault(n, {"title": title, "status": "PASS", "notes": []})
    if report.when == "call" or report.outcome != "passed":
        if report.failed:
            entry["status"] = "FAIL"
        elif report.skipped and entry["status"] == "PASS":
            entry["status"] = "SKIP"
    if report.when == "call":
        entry["notes"] += [f"{k}={v}" for k, v in item.user_properties]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        e = _criteria[n]
        notes = f" ({', '.join(e['notes'])})" if e["notes"] else ""
        terminalreporter.write_line(f"criterion {n}: {e['status']} - {e['title']}{notes}")
