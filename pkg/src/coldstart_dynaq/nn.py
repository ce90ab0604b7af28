"""Small feed-forward network stack in plain numpy.

Dense layers with ReLU, inverted dropout after each hidden layer, a
regression (MSE) or categorical (softmax) head, Adam, and Monte-Carlo
dropout prediction (mean and per-output variance over stochastic forward
passes). Shared by the environment model and the demand forecaster.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

HEADS = ("regression", "categorical", "categorical_mse")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class Prediction:
    mean: np.ndarray
    variance: np.ndarray


class Network:
    def __init__(
        self,
        sizes: list[int],
        dropout: float = 0.0,
        head: str = "regression",
        rng: np.random.Generator | None = None,
    ):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if not (0.0 <= dropout < 1.0):
            raise ValueError(f"dropout must be in [0,1), got {dropout}")
        if head not in HEADS:
            raise ValueError(f"unknown head {head!r}")
        if rng is None:
            rng = np.random.default_rng()
        self.sizes = list(sizes)
        self.dropout = dropout
        self.head = head
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, (fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def num_hidden(self) -> int:
        return len(self.sizes) - 2

    def parameters(self) -> list[np.ndarray]:
        return self.weights + self.biases


class AdamState:
    def __init__(self, net: Network, learning_rate: float = 0.001):
        self.learning_rate = learning_rate
        self.step_count = 0
        self.m = [np.zeros_like(p) for p in net.parameters()]
        self.v = [np.zeros_like(p) for p in net.parameters()]

    def apply(self, net: Network, grads: list[np.ndarray]) -> None:
        self.step_count += 1
        t = self.step_count
        for p, g, m, v in zip(net.parameters(), grads, self.m, self.v):
            m *= ADAM_BETA1
            m += (1 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1 - ADAM_BETA2) * g * g
            m_hat = m / (1 - ADAM_BETA1**t)
            v_hat = v / (1 - ADAM_BETA2**t)
            p -= self.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def draw_masks(net: Network, batch: int, rng: np.random.Generator) -> list[np.ndarray] | None:
    """Inverted-dropout masks, one per hidden layer; None when dropout is off."""
    if net.dropout == 0.0:
        return None
    keep = 1.0 - net.dropout
    return [
        (rng.random((batch, size)) < keep) / keep
        for size in net.sizes[1:-1]
    ]


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward_cached(net: Network, X: np.ndarray, masks):
    """Activations of every layer; masks apply after each hidden ReLU."""
    acts = [X]
    pres = []
    a = X
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w + b
        pres.append(z)
        if i < last:
            a = np.maximum(z, 0.0)
            if masks is not None:
                a = a * masks[i]
        else:
            a = z
        acts.append(a)
    out = _softmax(a) if net.head in ("categorical", "categorical_mse") else a
    return acts, pres, out


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


def forward(
    net: Network,
    x: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """One forward pass; dropout masks are drawn only when training=True."""
    X, single = _as_batch(x)
    if X.shape[1] != net.sizes[0]:
        raise ValueError(f"input dim {X.shape[1]} != network input {net.sizes[0]}")
    masks = None
    if training and net.dropout > 0.0:
        if rng is None:
            raise ValueError("training forward with dropout needs an rng")
        masks = draw_masks(net, X.shape[0], rng)
    _, _, out = _forward_cached(net, X, masks)
    return out[0] if single else out


def _one_hot(Y: np.ndarray, num_classes: int) -> np.ndarray:
    Y = np.asarray(Y)
    if Y.ndim == 2:
        return Y.astype(float)
    onehot = np.zeros((len(Y), num_classes))
    onehot[np.arange(len(Y)), Y.astype(int)] = 1.0
    return onehot


def batch_loss(net: Network, X: np.ndarray, Y: np.ndarray, masks=None) -> float:
    """Loss of the current parameters on a batch, with fixed dropout masks."""
    X, _ = _as_batch(X)
    _, _, out = _forward_cached(net, X, masks)
    if net.head == "regression":
        Y = np.asarray(Y, dtype=float).reshape(out.shape)
        return float(np.mean((out - Y) ** 2))
    onehot = _one_hot(Y, net.sizes[-1])
    if net.head == "categorical":
        return float(-np.mean(np.sum(onehot * np.log(out + 1e-12), axis=1)))
    return float(np.mean((out - onehot) ** 2))


def _loss_and_grads(net: Network, X: np.ndarray, Y: np.ndarray, masks):
    acts, pres, out = _forward_cached(net, X, masks)
    batch = X.shape[0]
    if net.head == "regression":
        Yb = np.asarray(Y, dtype=float).reshape(out.shape)
        loss = float(np.mean((out - Yb) ** 2))
        dz = 2.0 * (out - Yb) / out.size
    else:
        onehot = _one_hot(Y, net.sizes[-1])
        if net.head == "categorical":
            loss = float(-np.mean(np.sum(onehot * np.log(out + 1e-12), axis=1)))
            dz = (out - onehot) / batch
        else:
            loss = float(np.mean((out - onehot) ** 2))
            dout = 2.0 * (out - onehot) / out.size
            dz = out * (dout - np.sum(dout * out, axis=1, keepdims=True))

    w_grads = [None] * len(net.weights)
    b_grads = [None] * len(net.biases)
    for i in range(len(net.weights) - 1, -1, -1):
        w_grads[i] = acts[i].T @ dz
        b_grads[i] = dz.sum(axis=0)
        if i > 0:
            da = dz @ net.weights[i].T
            if masks is not None:
                da = da * masks[i - 1]
            dz = da * (pres[i - 1] > 0.0)
    return loss, w_grads + b_grads


def train_step(
    net: Network,
    adam: AdamState,
    X: np.ndarray,
    Y: np.ndarray,
    rng: np.random.Generator | None = None,
) -> float:
    """One Adam step on the batch loss; returns the pre-step loss."""
    X, _ = _as_batch(X)
    masks = None
    if net.dropout > 0.0:
        if rng is None:
            raise ValueError("train_step with dropout needs an rng")
        masks = draw_masks(net, X.shape[0], rng)
    loss, grads = _loss_and_grads(net, X, Y, masks)
    if not math.isfinite(loss):
        raise FloatingPointError(
            f"non-finite loss {loss} (batch {X.shape}, head {net.head})"
        )
    adam.apply(net, grads)
    return loss


def mc_predict(
    net: Network,
    x: np.ndarray,
    samples: int = 10,
    rng: np.random.Generator | None = None,
) -> Prediction:
    """Monte-Carlo dropout: mean/variance over stochastic forward passes.

    With dropout disabled every pass is identical, so the variance is
    exactly zero and the mean equals the deterministic output.
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    if net.dropout == 0.0:
        out = forward(net, x)
        return Prediction(mean=out, variance=np.zeros_like(out))
    if rng is None:
        raise ValueError("mc_predict with dropout needs an rng")
    draws = np.stack([forward(net, x, training=True, rng=rng) for _ in range(samples)])
    return Prediction(mean=draws.mean(axis=0), variance=draws.var(axis=0))


def save_network(net: Network, path) -> None:
    header = json.dumps({"sizes": net.sizes, "dropout": net.dropout, "head": net.head})
    arrays = {f"w{i}": w for i, w in enumerate(net.weights)}
    arrays.update({f"b{i}": b for i, b in enumerate(net.biases)})
    np.savez(path, header=np.frombuffer(header.encode(), dtype=np.uint8), **arrays)


def load_network(path) -> Network:
    data = np.load(path)
    header = json.loads(bytes(data["header"]).decode())
    net = Network(header["sizes"], dropout=header["dropout"], head=header["head"],
                  rng=np.random.default_rng(0))
    net.weights = [data[f"w{i}"] for i in range(len(net.sizes) - 1)]
    net.biases = [data[f"b{i}"] for i in range(len(net.sizes) - 1)]
    return net
