"""Costs, backpropagation, gradient descent, minibatch SGD and Adam.

The quadratic cost per sample is ``0.5 * sum((y - a)**2)``; its output delta
is ``(a - y) * f'(z)``, pushed back one layer at a time with
``delta_l = W_{l+1}^T delta_{l+1} * f'(z_l)``.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .dataio import LabeledDataset, minibatches
from .linalg import ShapeError
from .network import Activation, Network, forward, forward_batch


class Loss(enum.Enum):
    QUADRATIC = "quadratic"
    SOFTMAX_CROSS_ENTROPY = "softmax_cross_entropy"

    @classmethod
    def parse(cls, name: str) -> "Loss":
        if name in ("xent", "cross_entropy"):
            return cls.SOFTMAX_CROSS_ENTROPY
        return cls(name)


class Optimizer(enum.Enum):
    SGD = "sgd"
    ADAM = "adam"


def softmax(z: np.ndarray) -> np.ndarray:
    """Softmax over the last axis with the max-shift trick."""
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - np.max(z, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def _check_same(a: np.ndarray, y: np.ndarray) -> None:
    if a.shape != y.shape:
        raise ShapeError(f"output shape {a.shape} does not match target shape {y.shape}")


def cost(loss: Loss, a: np.ndarray, y: np.ndarray) -> float:
    """Per-sample cost. For cross-entropy ``a`` holds the logits."""
    a = np.asarray(a, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_same(a, y)
    if loss is Loss.QUADRATIC:
        d = y - a
        return 0.5 * float(np.dot(d, d))
    return -float(np.dot(y, _log_softmax(a)))


def batch_cost(loss: Loss, a: np.ndarray, y: np.ndarray) -> float:
    """Sum of per-sample costs over the rows of ``a``."""
    _check_same(a, y)
    if loss is Loss.QUADRATIC:
        return 0.5 * float(np.sum((y - a) ** 2))
    return -float(np.sum(y * _log_softmax(a)))


def output_delta(loss: Loss, a, y, z, activation: Activation) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    _check_same(a, y)
    _check_same(z, y)
    if loss is Loss.QUADRATIC:
        return (a - y) * activation.prime(z)
    if activation is not Activation.IDENTITY:
        raise ValueError("softmax cross-entropy expects an identity (logit) output layer")
    return softmax(z) - y


@dataclass
class Gradients:
    dw: list[np.ndarray]
    db: list[np.ndarray]

    @classmethod
    def zeros_like(cls, net: Network) -> "Gradients":
        return cls([np.zeros_like(w) for w in net.weights],
                   [np.zeros_like(b) for b in net.biases])

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.dw, self.db):
            out += [w, b]
        return out

    def check_matches(self, net: Network) -> None:
        if len(self.dw) != net.depth or len(self.db) != net.depth:
            raise ShapeError(f"gradients cover {len(self.dw)} layers, network has {net.depth}")
        for i, (g, p) in enumerate(zip(self.arrays(), net.parameters())):
            if g.shape != p.shape:
                raise ShapeError(f"gradient {i} has shape {g.shape}, parameter has {p.shape}")

    def __add__(self, other: "Gradients") -> "Gradients":
        return Gradients([a + b for a, b in zip(self.dw, other.dw)],
                         [a + b for a, b in zip(self.db, other.db)])

    def scaled(self, factor: float) -> "Gradients":
        return Gradients([w * factor for w in self.dw], [b * factor for b in self.db])

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(g))) for g in self.arrays())


def backprop(net: Network, x, y, loss: Loss) -> tuple[float, Gradients]:
    """Cost and parameter gradients for a single sample."""
    y = np.asarray(y, dtype=np.float64)
    trace = forward(net, x)
    if y.shape != (net.output_width,):
        raise ShapeError(f"target shape {y.shape}, network output is ({net.output_width},)")
    c = cost(loss, trace.output, y)
    depth = net.depth
    dw: list[np.ndarray] = [None] * depth
    db: list[np.ndarray] = [None] * depth
    delta = output_delta(loss, trace.output, y, trace.zs[-1], net.layers[-1].activation)
    for l in range(depth - 1, -1, -1):
        dw[l] = linalg.outer(delta, trace.activations[l])
        db[l] = delta
        if l > 0:
            delta = (net.weights[l].T @ delta) * net.layers[l - 1].activation.prime(trace.zs[l - 1])
    return c, Gradients(dw, db)


def backprop_batch(net: Network, xs, ys, loss: Loss) -> tuple[float, Gradients]:
    """Summed cost and summed per-sample gradients over the rows of ``xs``.

    Same quantities as looping ``backprop`` and adding, computed with matrix
    products so a whole minibatch costs a handful of BLAS calls.
    """
    ys = np.asarray(ys, dtype=np.float64)
    trace = forward_batch(net, xs)
    if ys.shape != trace.output.shape:
        raise ShapeError(f"targets {ys.shape} do not match outputs {trace.output.shape}")
    c = batch_cost(loss, trace.output, ys)
    depth = net.depth
    dw: list[np.ndarray] = [None] * depth
    db: list[np.ndarray] = [None] * depth
    delta = output_delta(loss, trace.output, ys, trace.zs[-1], net.layers[-1].activation)
    for l in range(depth - 1, -1, -1):
        dw[l] = delta.T @ trace.activations[l]
        db[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ net.weights[l]) * net.layers[l - 1].activation.prime(trace.zs[l - 1])
    return c, Gradients(dw, db)


def summed_sample_gradients(net: Network, xs, ys, loss: Loss) -> tuple[float, Gradients]:
    """Reference path: per-sample backprop added up in sample-index order."""
    total_cost = 0.0
    total = Gradients.zeros_like(net)
    for x, y in zip(xs, ys):
        c, g = backprop(net, x, y, loss)
        total_cost += c
        total = total + g
    return total_cost, total


def full_gradient(net: Network, ds: LabeledDataset, loss: Loss) -> tuple[float, Gradients]:
    """Mean cost and mean gradient over the whole dataset."""
    c, g = backprop_batch(net, ds.inputs, ds.targets, loss)
    return c / ds.n, g.scaled(1.0 / ds.n)


def dataset_cost(net: Network, ds: LabeledDataset, loss: Loss) -> float:
    trace = forward_batch(net, ds.inputs)
    return batch_cost(loss, trace.output, ds.targets) / ds.n


def sample_cost(net: Network, x, y, loss: Loss) -> float:
    return cost(loss, forward(net, x).output, y)


def relative_error(g: float, g_hat: float) -> float:
    return abs(g - g_hat) / max(1e-12, abs(g) + abs(g_hat))


_WIDE = np.longdouble

_WIDE_ACTIVATIONS = {
    Activation.SIGMOID: lambda z: 1 / (1 + np.exp(-z)),
    Activation.RELU: lambda z: np.maximum(z, 0),
    Activation.TANH: np.tanh,
    Activation.IDENTITY: lambda z: z,
}


def _wide_cost(layers, params, x, y, loss: Loss):
    # Deliberately separate from forward(): plain loops over extended-precision copies.
    a = x
    for spec, (w, b) in zip(layers, zip(params[0::2], params[1::2])):
        a = _WIDE_ACTIVATIONS[spec.activation](w @ a + b)
    if loss is Loss.QUADRATIC:
        return np.sum((y - a) ** 2) / 2
    shifted = a - np.max(a)
    return -np.sum(y * (shifted - np.log(np.sum(np.exp(shifted)))))


def numeric_gradients(net: Network, x, y, loss: Loss, eps: float) -> Gradients:
    """Central differences ``(C(p+eps) - C(p-eps)) / 2eps`` for every parameter.

    Costs are evaluated in extended precision so cancellation noise stays far
    below the gradients being checked.
    """
    params = [p.astype(_WIDE) for p in net.parameters()]
    xw = np.asarray(x, dtype=np.float64).astype(_WIDE)
    yw = np.asarray(y, dtype=np.float64).astype(_WIDE)
    numeric = Gradients.zeros_like(net)
    step = _WIDE(eps)
    for param, out in zip(params, numeric.arrays()):
        flat, out_flat = param.reshape(-1), out.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            c_plus = _wide_cost(net.layers, params, xw, yw, loss)
            flat[i] = orig - step
            c_minus = _wide_cost(net.layers, params, xw, yw, loss)
            flat[i] = orig
            out_flat[i] = float((c_plus - c_minus) / (2 * step))
    return numeric


def grad_check(net: Network, x, y, loss: Loss, eps: float = 1e-6) -> float:
    """Largest relative error between backprop and central differences."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    _, analytic = backprop(net, x, y, loss)
    numeric = numeric_gradients(net, x, y, loss, eps)
    worst = 0.0
    for g, n in zip(analytic.arrays(), numeric.arrays()):
        for a, b in zip(g.ravel(), n.ravel()):
            worst = max(worst, relative_error(float(a), float(b)))
    return worst


def _descend(params: list[np.ndarray], grads: list[np.ndarray], eta: float) -> None:
    for p, g in zip(params, grads):
        p -= g * eta


def gd_step(net: Network, grads: Gradients, eta: float) -> Network:
    """Return a new network with every parameter moved by ``-eta * grad``."""
    grads.check_matches(net)
    out = net.copy()
    _descend(out.parameters(), grads.arrays(), eta)
    return out


@dataclass
class Hyperparams:
    eta: float = 3.0
    m: int = 10
    epochs: int = 1
    loss: Loss = Loss.QUADRATIC
    optimizer: Optimizer = Optimizer.SGD
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        self.loss = Loss(self.loss)
        self.optimizer = Optimizer(self.optimizer)
        if not self.eta > 0:
            raise ValueError(f"learning rate must be > 0, got {self.eta}")
        if self.m < 1:
            raise ValueError(f"batch size must be >= 1, got {self.m}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if not self.epsilon > 0:
            raise ValueError("Adam epsilon must be > 0")


@dataclass
class AdamState:
    m: Gradients
    v: Gradients
    t: int = 0

    @classmethod
    def fresh(cls, net: Network) -> "AdamState":
        return cls(Gradients.zeros_like(net), Gradients.zeros_like(net))

    def copy(self) -> "AdamState":
        return AdamState(self.m.scaled(1.0), self.v.scaled(1.0), self.t)


_CHUNK = 16384  # elements per slice; keeps the temporaries cache-resident


def _adam_update(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState, hp: Hyperparams) -> None:
    """Advance ``state`` and ``params`` in place by one Adam step."""
    state.t += 1
    b1, b2 = hp.beta1, hp.beta2
    step_scale = hp.eta / (1.0 - b1 ** state.t)
    v_scale = 1.0 / np.sqrt(1.0 - b2 ** state.t)
    tmp_buf = np.empty(_CHUNK)
    step_buf = np.empty(_CHUNK)
    for p, g, m, v in zip(params, grads, state.m.arrays(), state.v.arrays()):
        p, g, m, v = p.reshape(-1), g.reshape(-1), m.reshape(-1), v.reshape(-1)
        for lo in range(0, p.size, _CHUNK):
            hi = min(lo + _CHUNK, p.size)
            gs, ms, vs = g[lo:hi], m[lo:hi], v[lo:hi]
            tmp, step = tmp_buf[:hi - lo], step_buf[:hi - lo]
            np.multiply(gs, 1.0 - b1, out=tmp)
            ms *= b1
            ms += tmp                 # m = b1*m + (1-b1)*g
            np.multiply(gs, gs, out=tmp)
            tmp *= 1.0 - b2
            vs *= b2
            vs += tmp                 # v = b2*v + (1-b2)*g^2
            np.sqrt(vs, out=tmp)
            tmp *= v_scale
            tmp += hp.epsilon         # sqrt(v_hat) + eps
            np.multiply(ms, step_scale, out=step)
            step /= tmp               # eta * m_hat / (sqrt(v_hat) + eps)
            p[lo:hi] -= step


def adam_step(net: Network, grads: Gradients, state: AdamState, hp: Hyperparams) -> tuple[Network, AdamState]:
    """One bias-corrected Adam update; inputs are left untouched."""
    grads.check_matches(net)
    state.m.check_matches(net)
    state.v.check_matches(net)
    out, new_state = net.copy(), state.copy()
    _adam_update(out.parameters(), grads.arrays(), new_state, hp)
    return out, new_state


def sgd_epoch(net: Network, ds: LabeledDataset, hp: Hyperparams, seed: int, epoch_index: int) -> Network:
    """One pass of minibatch SGD; every minibatch applies its mean gradient.

    Updates go to a private copy, so ``net`` itself is left as it was.
    """
    net = net.copy()
    params = net.parameters()
    for batch in minibatches(ds, hp.m, seed ^ epoch_index):
        _, g = backprop_batch(net, batch.inputs, batch.targets, hp.loss)
        _descend(params, g.scaled(1.0 / batch.m).arrays(), hp.eta)
    return net


def adam_epoch(net: Network, ds: LabeledDataset, hp: Hyperparams, state: AdamState,
               seed: int, epoch_index: int) -> tuple[Network, AdamState]:
    state.m.check_matches(net)
    net, state = net.copy(), state.copy()
    params = net.parameters()
    for batch in minibatches(ds, hp.m, seed ^ epoch_index):
        _, g = backprop_batch(net, batch.inputs, batch.targets, hp.loss)
        _adam_update(params, g.scaled(1.0 / batch.m).arrays(), state, hp)
    return net, state


@dataclass
class Trainer:
    """Carries optimizer state across epochs for either optimizer."""

    hp: Hyperparams
    seed: int
    adam: AdamState | None = field(default=None)

    def epoch(self, net: Network, ds: LabeledDataset, epoch_index: int) -> Network:
        if self.hp.optimizer is Optimizer.SGD:
            return sgd_epoch(net, ds, self.hp, self.seed, epoch_index)
        if self.adam is None:
            self.adam = AdamState.fresh(net)
        net, self.adam = adam_epoch(net, ds, self.hp, self.adam, self.seed, epoch_index)
        return net
