"""Network construction, activations, forward pass and checkpoints."""

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import linalg
from .linalg import ShapeError
from .rng import SplitMix64

INPUT_WIDTH = 784
OUTPUT_WIDTH = 10


class ConfigurationError(ValueError):
    """Network layout does not support the requested operation."""


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _sigmoid_prime(z):
    s = _sigmoid(z)
    return s * (1.0 - s)


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_prime(z):
    # derivative at exactly 0 is taken as 0
    return (np.asarray(z) > 0).astype(np.float64)


def _tanh_prime(z):
    t = np.tanh(z)
    return 1.0 - t * t


class Activation(enum.Enum):
    SIGMOID = "sigmoid"
    RELU = "relu"
    TANH = "tanh"
    IDENTITY = "identity"

    def f(self, z):
        return _FUNCS[self][0](np.asarray(z, dtype=np.float64))

    def prime(self, z):
        return _FUNCS[self][1](np.asarray(z, dtype=np.float64))


_FUNCS = {
    Activation.SIGMOID: (_sigmoid, _sigmoid_prime),
    Activation.RELU: (_relu, _relu_prime),
    Activation.TANH: (np.tanh, _tanh_prime),
    Activation.IDENTITY: (lambda z: z.copy(), np.ones_like),
}


def activate(kind: Activation, z: float) -> float:
    return float(kind.f(z))


def activate_prime(kind: Activation, z: float) -> float:
    return float(kind.prime(z))


@dataclass(frozen=True)
class LayerSpec:
    width: int
    activation: Activation = Activation.SIGMOID

    def __post_init__(self):
        if self.width < 1:
            raise ValueError(f"layer width must be >= 1, got {self.width}")
        object.__setattr__(self, "activation", Activation(self.activation))


@dataclass
class Network:
    input_width: int
    layers: list[LayerSpec]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        self.check_shapes()

    def check_shapes(self) -> None:
        if not self.layers:
            raise ValueError("network needs at least one layer")
        if not len(self.layers) == len(self.weights) == len(self.biases):
            raise ShapeError("layers, weights and biases differ in length")
        fan_in = self.input_width
        for i, (spec, w, b) in enumerate(zip(self.layers, self.weights, self.biases)):
            if w.shape != (spec.width, fan_in) or b.shape != (spec.width,):
                raise ShapeError(
                    f"layer {i}: expected W {spec.width}x{fan_in} and b {spec.width}, "
                    f"got W {w.shape} and b {b.shape}"
                )
            fan_in = spec.width

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def output_width(self) -> int:
        return self.layers[-1].width

    def copy(self) -> "Network":
        return Network(
            self.input_width,
            list(self.layers),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def parameters(self) -> list[np.ndarray]:
        """Weights and biases interleaved per layer: W1, b1, W2, b2, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def same_as(self, other: "Network") -> bool:
        """Bit-exact equality of layout and parameters."""
        return (
            self.input_width == other.input_width
            and self.layers == other.layers
            and all(
                a.shape == b.shape and a.tobytes() == b.tobytes()
                for a, b in zip(self.parameters(), other.parameters())
            )
        )


def build(input_width: int, specs, seed: int) -> Network:
    """Gaussian weights with std 1/sqrt(fan_in) from SplitMix64(seed); zero biases."""
    specs = [s if isinstance(s, LayerSpec) else LayerSpec(s) for s in specs]
    if not specs:
        raise ValueError("at least one layer spec is required")
    if input_width < 1:
        raise ValueError(f"input width must be >= 1, got {input_width}")
    rng = SplitMix64(seed)
    weights, biases = [], []
    fan_in = input_width
    for spec in specs:
        w = rng.gaussians(spec.width * fan_in).reshape(spec.width, fan_in)
        weights.append(w / np.sqrt(fan_in))
        biases.append(linalg.zeros(spec.width))
        fan_in = spec.width
    return Network(input_width, specs, weights, biases)


@dataclass
class ForwardTrace:
    zs: list[np.ndarray] = field(default_factory=list)
    activations: list[np.ndarray] = field(default_factory=list)

    @property
    def output(self) -> np.ndarray:
        return self.activations[-1]


def forward(net: Network, x: np.ndarray) -> ForwardTrace:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.input_width,):
        raise ShapeError(f"input has shape {x.shape}, network expects ({net.input_width},)")
    trace = ForwardTrace(activations=[x])
    a = x
    for spec, w, b in zip(net.layers, net.weights, net.biases):
        z = linalg.affine(w, a, b)
        a = linalg.map_elementwise(spec.activation.f, z)
        trace.zs.append(z)
        trace.activations.append(a)
    return trace


def forward_batch(net: Network, xs: np.ndarray) -> ForwardTrace:
    """Forward pass over a stack of inputs, one sample per row."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != net.input_width:
        raise ShapeError(f"inputs have shape {xs.shape}, network expects (n, {net.input_width})")
    trace = ForwardTrace(activations=[xs])
    a = xs
    for spec, w, b in zip(net.layers, net.weights, net.biases):
        z = linalg.affine_rows(w, a, b)
        a = spec.activation.f(z)
        trace.zs.append(z)
        trace.activations.append(a)
    return trace


def argmax_digit(outputs: np.ndarray) -> int:
    # np.argmax returns the first maximal index, i.e. the lowest digit on ties
    return int(np.argmax(outputs))


def predict(net: Network, x: np.ndarray) -> int:
    if net.output_width != OUTPUT_WIDTH:
        raise ConfigurationError(
            f"predict needs a {OUTPUT_WIDTH}-wide output layer, got {net.output_width}"
        )
    return argmax_digit(forward(net, x).output)


def predict_batch(net: Network, xs: np.ndarray, chunk: int = 2000) -> np.ndarray:
    if net.output_width != OUTPUT_WIDTH:
        raise ConfigurationError(
            f"predict needs a {OUTPUT_WIDTH}-wide output layer, got {net.output_width}"
        )
    out = [np.argmax(forward_batch(net, xs[i:i + chunk]).output, axis=1)
           for i in range(0, len(xs), chunk)]
    return np.concatenate(out) if out else np.empty(0, dtype=np.intp)


# Checkpoint layout (little-endian):
#   b"PCPT0001"
#   u32 input_width, u32 layer_count
#   per layer: u32 width, u8 name_len, name (ASCII activation name)
#   per layer: width*fan_in f64 weights (row-major), then width f64 biases
CHECKPOINT_MAGIC = b"PCPT0001"


class CheckpointError(ValueError):
    """Checkpoint bytes are malformed."""


def dumps(net: Network) -> bytes:
    parts = [CHECKPOINT_MAGIC, struct.pack("<II", net.input_width, net.depth)]
    for spec in net.layers:
        name = spec.activation.value.encode("ascii")
        parts.append(struct.pack("<IB", spec.width, len(name)) + name)
    for w, b in zip(net.weights, net.biases):
        parts.append(w.astype("<f8").tobytes())
        parts.append(b.astype("<f8").tobytes())
    return b"".join(parts)


def loads(data: bytes) -> Network:
    if data[:8] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"bad checkpoint magic {data[:8]!r}")
    try:
        input_width, depth = struct.unpack_from("<II", data, 8)
        pos = 16
        specs = []
        for _ in range(depth):
            width, name_len = struct.unpack_from("<IB", data, pos)
            pos += 5
            name = data[pos:pos + name_len].decode("ascii")
            pos += name_len
            specs.append(LayerSpec(width, Activation(name)))
    except (struct.error, UnicodeDecodeError, ValueError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc
    if not specs:
        raise CheckpointError("checkpoint has no layers")
    weights, biases = [], []
    fan_in = input_width
    for spec in specs:
        need = 8 * (spec.width * fan_in + spec.width)
        if len(data) - pos < need:
            raise CheckpointError("checkpoint truncated")
        w = np.frombuffer(data, "<f8", spec.width * fan_in, pos).reshape(spec.width, fan_in)
        pos += 8 * w.size
        b = np.frombuffer(data, "<f8", spec.width, pos)
        pos += 8 * b.size
        weights.append(w.astype(np.float64))
        biases.append(b.astype(np.float64))
        fan_in = spec.width
    if pos != len(data):
        raise CheckpointError(f"{len(data) - pos} trailing bytes after parameters")
    return Network(input_width, specs, weights, biases)


def save(net: Network, path) -> None:
    Path(path).write_bytes(dumps(net))


def load(path) -> Network:
    return loads(Path(path).read_bytes())
