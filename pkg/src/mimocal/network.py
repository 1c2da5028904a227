"""Calinet: a dense tanh network trained with Adagrad to map UL to DL channels.

Complex channels are fed to the real-valued network by interleaving real and
imaginary parts. In the default ``per_user`` mode one network of width
``2M`` is trained for every user (each user has its own scale ``c_n`` or
``a_n``, so a single shared network could not represent the map). The
``joint`` mode trains a single ``2MN``-wide network on whole channel
matrices.

Losses are sums of squared errors over a batch. Reported MSE values are
means per complex channel entry, the same normalization used for the
baseline estimators.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .channels import CalibrationDataset
from .errors import InvalidArgumentError, InvalidStateError, ShapeError
from .numerics import Rng

__all__ = [
    "Activation",
    "LayerParams",
    "NetworkParams",
    "AdagradState",
    "TrainConfig",
    "TrainHistory",
    "EpochRecord",
    "Calinet",
    "encode_channels",
    "decode_channels",
    "init_network",
    "forward",
    "loss",
    "backward",
    "adagrad_step",
    "split_indices",
    "train",
    "predict",
]


class Activation(str, enum.Enum):
    TANH = "tanh"
    LINEAR = "linear"

    def __str__(self):
        return self.value


@dataclass(eq=False)
class LayerParams:
    W: np.ndarray
    b: np.ndarray
    activation: Activation = Activation.TANH

    def __post_init__(self):
        self.activation = Activation(self.activation)
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ShapeError(f"layer with W {self.W.shape} and b {self.b.shape}")


@dataclass(eq=False)
class NetworkParams:
    layers: list[LayerParams]

    def __post_init__(self):
        if not self.layers:
            raise InvalidArgumentError("a network needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.W.shape[1] != prev.W.shape[0]:
                raise InvalidArgumentError(
                    f"layer widths do not chain: {prev.W.shape} then {nxt.W.shape}"
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0].W.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].W.shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.input_dim,) + tuple(layer.W.shape[0] for layer in self.layers)

    @property
    def output_activation(self) -> Activation:
        return self.layers[-1].activation

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            [LayerParams(l.W.copy(), l.b.copy(), l.activation) for l in self.layers]
        )


@dataclass(eq=False)
class AdagradState:
    """Running sums of squared gradients, shaped like the parameters."""

    G: list[tuple[np.ndarray, np.ndarray]]
    epsilon: float = 1e-8


@dataclass(eq=False)
class ForwardCache:
    params: NetworkParams
    inputs: np.ndarray
    activations: list[np.ndarray]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 256
    batch_size: int = 4
    validation_fraction: float = 0.4
    seed: int = 0
    hidden_dims: tuple[int, ...] = (128, 128, 128)
    mode: str = "per_user"
    output_activation: str = "linear"
    target_scale: float = 1.0 / 3.0
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InvalidArgumentError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1 or self.batch_size < 1:
            raise InvalidArgumentError("epochs and batch_size must be >= 1")
        if not 0.0 < self.validation_fraction < 1.0:
            raise InvalidArgumentError(
                f"validation_fraction must be in (0, 1), got {self.validation_fraction}"
            )
        if self.mode not in ("per_user", "joint"):
            raise InvalidArgumentError(f"mode must be 'per_user' or 'joint', got {self.mode!r}")
        Activation(self.output_activation)
        if any(int(h) < 1 for h in self.hidden_dims):
            raise InvalidArgumentError(f"hidden widths must be >= 1, got {self.hidden_dims}")
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))

    def layer_dims(self, M: int, N: int) -> tuple[int, ...]:
        width = 2 * M if self.mode == "per_user" else 2 * M * N
        return (width,) + self.hidden_dims + (width,)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_mse: float
    val_mse: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    @property
    def train_mse(self) -> np.ndarray:
        return np.array([r.train_mse for r in self.records])

    @property
    def val_mse(self) -> np.ndarray:
        return np.array([r.val_mse for r in self.records])


@dataclass(eq=False)
class Calinet:
    """Trained calibration network(s) for an ``M``-antenna, ``N``-user system.

    ``nets`` holds one network per user in ``per_user`` mode (an entry is
    ``None`` if that user was not trained) and a single network in ``joint``
    mode. Network outputs are divided by ``target_scale`` before decoding.
    """

    nets: list[Optional[NetworkParams]]
    mode: str
    M: int
    N: int
    target_scale: float = 1.0


# -- encoding -----------------------------------------------------------------


def _encode(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.complex128)
    return np.stack([z.real, z.imag], axis=-1).reshape(z.shape[:-1] + (2 * z.shape[-1],))


def _decode(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    pairs = v.reshape(v.shape[:-1] + (v.shape[-1] // 2, 2))
    return pairs[..., 0] + 1j * pairs[..., 1]


def encode_channels(H) -> np.ndarray:
    """Flatten a complex matrix row-major as ``(re, im, re, im, ...)``."""
    H = np.asarray(H, dtype=np.complex128)
    return _encode(H.reshape(-1))


def decode_channels(v, rows: int, cols: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (2 * rows * cols,):
        raise ShapeError(f"expected a vector of length {2 * rows * cols}, got {v.shape}")
    return _decode(v).reshape(rows, cols)


# -- network primitives -------------------------------------------------------


def init_network(layer_dims: Sequence[int], rng: Rng, output_activation="linear"):
    """Glorot-uniform weights, zero biases and a zeroed Adagrad accumulator.

    Hidden layers use tanh; the last layer uses ``output_activation``.
    """
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2 or min(dims) < 1:
        raise InvalidArgumentError(f"layer_dims must list >= 2 positive widths, got {layer_dims}")
    out_act = Activation(output_activation)
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        W = rng.child("layer", i).uniform(-limit, limit, (fan_out, fan_in))
        act = out_act if i == len(dims) - 2 else Activation.TANH
        layers.append(LayerParams(W, np.zeros(fan_out), act))
    params = NetworkParams(layers)
    state = AdagradState([(np.zeros_like(l.W), np.zeros_like(l.b)) for l in layers])
    return params, state


def _forward_layers(layers, x: np.ndarray) -> list[np.ndarray]:
    acts = [x]
    h = x
    for layer in layers:
        h = h @ layer.W.T + layer.b
        if layer.activation is Activation.TANH:
            np.tanh(h, out=h)
        acts.append(h)
    return acts


def _backprop(layers, acts, target, grads):
    """Accumulate gradients of the summed squared error into ``grads``.

    ``acts`` holds rows of activations, one row per sample; ``grads`` is a
    list of preallocated ``(dW, db)`` pairs that are overwritten.
    """
    delta = 2.0 * (acts[-1] - target)
    for i in range(len(layers) - 1, -1, -1):
        layer = layers[i]
        if layer.activation is Activation.TANH:
            out = acts[i + 1]
            delta *= 1.0 - out * out
        dW, db = grads[i]
        np.matmul(delta.T, acts[i], out=dW)
        np.sum(delta, axis=0, out=db)
        if i:
            delta = delta @ layer.W
    return grads


def _as_rows(x, dim: int, what: str) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    rows = x[np.newaxis, :] if single else x
    if rows.ndim != 2 or rows.shape[1] != dim:
        raise ShapeError(f"{what} must have length {dim}, got shape {x.shape}")
    return rows, single


def forward(params: NetworkParams, x):
    """Evaluate the network on one input vector or a batch of rows.

    Returns the output (same leading shape as ``x``) and the cache needed by
    :func:`backward`.
    """
    rows, single = _as_rows(x, params.input_dim, "input")
    acts = _forward_layers(params.layers, rows)
    out = acts[-1][0] if single else acts[-1]
    return out, ForwardCache(params, np.asarray(x), acts)


def loss(params: NetworkParams, inputs, targets) -> float:
    """Summed squared error over a batch."""
    out, _ = forward(params, inputs)
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != out.shape:
        raise ShapeError(f"targets {targets.shape} do not match outputs {out.shape}")
    return float(np.sum((out - targets) ** 2))


def backward(params: NetworkParams, x, target, cache: ForwardCache):
    """Gradients of the summed squared error w.r.t. every ``(W, b)``."""
    if cache.params is not params:
        raise InvalidStateError("cache was produced by a different network")
    x = np.asarray(x)
    if x.shape != cache.inputs.shape or not np.array_equal(x, cache.inputs):
        raise InvalidStateError("cache was produced for a different input")
    target_rows, _ = _as_rows(target, params.output_dim, "target")
    if target_rows.shape[0] != cache.activations[0].shape[0]:
        raise ShapeError("target batch size does not match the input batch")
    grads = [(np.empty_like(l.W), np.empty_like(l.b)) for l in params.layers]
    return _backprop(params.layers, cache.activations, target_rows, grads)


def adagrad_step(params: NetworkParams, state: AdagradState, gradients, learning_rate: float):
    """One Adagrad update, returning new ``(params, state)``.

    ``G += g**2`` and ``theta -= lr * g / (sqrt(G) + eps)``, entrywise.
    """
    if len(gradients) != len(params.layers):
        raise ShapeError("gradient list does not match the number of layers")
    new_layers, new_G = [], []
    for layer, (GW, Gb), (gW, gb) in zip(params.layers, state.G, gradients):
        if gW.shape != layer.W.shape or gb.shape != layer.b.shape:
            raise ShapeError(f"gradient shapes {gW.shape}, {gb.shape} do not match layer")
        GW = GW + gW * gW
        Gb = Gb + gb * gb
        W = layer.W - learning_rate * gW / (np.sqrt(GW) + state.epsilon)
        b = layer.b - learning_rate * gb / (np.sqrt(Gb) + state.epsilon)
        new_layers.append(LayerParams(W, b, layer.activation))
        new_G.append((GW, Gb))
    return NetworkParams(new_layers), AdagradState(new_G, state.epsilon)


# -- training -------------------------------------------------------------------


class _FlatNet:
    """Parameters, gradients and Adagrad sums as views into flat buffers.

    Lets the training loop apply the Adagrad update to all parameters with a
    handful of vectorized operations.
    """

    def __init__(self, params: NetworkParams, epsilon: float):
        sizes = [(l.W.shape, l.b.shape) for l in params.layers]
        total = sum(int(np.prod(w)) + b[0] for w, b in sizes)
        self.theta = np.empty(total)
        self.grad = np.empty(total)
        self.G = np.zeros(total)
        self.epsilon = epsilon
        self.layers, self.grads = [], []
        pos = 0
        for layer, (wshape, bshape) in zip(params.layers, sizes):
            nw = int(np.prod(wshape))
            W = self.theta[pos : pos + nw].reshape(wshape)
            gW = self.grad[pos : pos + nw].reshape(wshape)
            pos += nw
            b = self.theta[pos : pos + bshape[0]]
            gb = self.grad[pos : pos + bshape[0]]
            pos += bshape[0]
            W[...] = layer.W
            b[...] = layer.b
            self.layers.append(LayerParams(W, b, layer.activation))
            self.grads.append((gW, gb))
        self._scratch = np.empty(total)

    def step(self, x, t, learning_rate):
        acts = _forward_layers(self.layers, x)
        _backprop(self.layers, acts, t, self.grads)
        g, s = self.grad, self._scratch
        np.multiply(g, g, out=s)
        self.G += s
        np.sqrt(self.G, out=s)
        s += self.epsilon
        np.divide(g, s, out=s)
        s *= learning_rate
        self.theta -= s

    def params(self) -> NetworkParams:
        return NetworkParams(
            [LayerParams(l.W.copy(), l.b.copy(), l.activation) for l in self.layers]
        )


def split_indices(P: int, validation_fraction: float, rng: Rng):
    """Seeded random partition of ``range(P)`` into training and validation indices."""
    if P < 2:
        raise InvalidArgumentError(f"need at least 2 pairs to split, got {P}")
    n_val = int(round(P * validation_fraction))
    n_val = min(max(n_val, 1), P - 1)
    perm = rng.permutation(P)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def _training_views(dataset: CalibrationDataset, mode: str):
    """Network inputs and targets, one ``(P, width)`` pair per network."""
    if mode == "joint":
        x = _encode(np.swapaxes(dataset.ul, 1, 2).reshape(dataset.P, -1))
        y = _encode(dataset.dl.reshape(dataset.P, -1))
        return [(x, y)]
    return [(_encode(dataset.ul[:, :, n]), _encode(dataset.dl[:, n, :])) for n in range(dataset.N)]


def _entry_mse(out: np.ndarray, target: np.ndarray) -> float:
    # two reals per complex entry
    return float(np.sum((out - target) ** 2) / (out.size // 2))


def _fit(params, state, x_tr, y_tr, x_va, y_va, config: TrainConfig, rng: Rng, scale: float):
    net = _FlatNet(params, state.epsilon)
    n = x_tr.shape[0]
    bs = config.batch_size
    train_curve, val_curve = [], []
    for epoch in range(config.epochs):
        order = rng.child("epoch", epoch).permutation(n)
        xs, ys = x_tr[order], y_tr[order]
        for start in range(0, n, bs):
            net.step(xs[start : start + bs], ys[start : start + bs], config.learning_rate)
        out_tr = _forward_layers(net.layers, x_tr)[-1]
        out_va = _forward_layers(net.layers, x_va)[-1]
        train_curve.append(_entry_mse(out_tr / scale, y_tr / scale))
        val_curve.append(_entry_mse(out_va / scale, y_va / scale))
    return net.params(), train_curve, val_curve


def train(dataset: CalibrationDataset, config: TrainConfig, users: Optional[Sequence[int]] = None):
    """Train Calinet on a dataset with a seeded train/validation split.

    Parameters
    ----------
    dataset : CalibrationDataset
        Paired UL/DL estimates; at least two pairs.
    config : TrainConfig
        Optimizer and architecture settings. Everything random (split, init,
        per-epoch shuffles) derives from ``config.seed``.
    users : sequence of int, optional
        Zero-based users to train in ``per_user`` mode; default all. Useful
        when only one user's predictions are needed.

    Returns
    -------
    model : Calinet
    history : TrainHistory
        Per-epoch MSE per complex entry on the training and validation
        splits, averaged over the trained networks.
    """
    root = Rng(config.seed)
    train_idx, val_idx = split_indices(dataset.P, config.validation_fraction, root.child("split"))
    scale = config.target_scale if config.output_activation == "tanh" else 1.0
    dims = config.layer_dims(dataset.M, dataset.N)
    views = _training_views(dataset, config.mode)
    if config.mode == "joint":
        chosen = [0]
    else:
        chosen = list(range(dataset.N)) if users is None else sorted({int(u) for u in users})
        if any(not 0 <= u < dataset.N for u in chosen) or not chosen:
            raise InvalidArgumentError(f"users must be in [0, {dataset.N}), got {users}")
    nets: list[Optional[NetworkParams]] = [None] * len(views)
    curves = []
    for k in chosen:
        x, y = views[k]
        y = y * scale
        params, state = init_network(dims, root.child("init", k), config.output_activation)
        state.epsilon = config.epsilon
        params, tr, va = _fit(
            params, state, x[train_idx], y[train_idx], x[val_idx], y[val_idx],
            config, root.child("shuffle", k), scale,
        )
        nets[k] = params
        curves.append((tr, va))
    history = TrainHistory(
        [
            EpochRecord(e + 1, float(np.mean([c[0][e] for c in curves])), float(np.mean([c[1][e] for c in curves])))
            for e in range(config.epochs)
        ]
    )
    model = Calinet(nets, config.mode, dataset.M, dataset.N, scale)
    return model, history


def _net_output(net: NetworkParams, x: np.ndarray) -> np.ndarray:
    if x.shape[-1] != net.input_dim:
        raise ShapeError(f"network expects inputs of length {net.input_dim}, got {x.shape[-1]}")
    return _forward_layers(net.layers, x)[-1]


def predict(model: Calinet, H_UL, users: Optional[Sequence[int]] = None) -> np.ndarray:
    """Predict DL channels from UL channel estimates.

    ``H_UL`` is ``M x N`` (result ``N x M``) or a ``(P, M, N)`` stack
    (result ``(P, N, M)``). In ``per_user`` mode ``users`` restricts which
    rows are computed; other rows are left at zero.
    """
    H = np.asarray(H_UL, dtype=np.complex128)
    single = H.ndim == 2
    if single:
        H = H[np.newaxis]
    if H.ndim != 3 or H.shape[1:] != (model.M, model.N):
        raise ShapeError(f"H_UL must be {(model.M, model.N)}, got {np.shape(H_UL)}")
    P = H.shape[0]
    if model.mode == "joint":
        x = _encode(np.swapaxes(H, 1, 2).reshape(P, -1))
        out = _decode(_net_output(model.nets[0], x) / model.target_scale)
        result = out.reshape(P, model.N, model.M)
    else:
        result = np.zeros((P, model.N, model.M), dtype=np.complex128)
        wanted = range(model.N) if users is None else users
        for n in wanted:
            net = model.nets[n]
            if net is None:
                raise InvalidStateError(f"no network was trained for user {n}")
            result[:, n, :] = _decode(_net_output(net, _encode(H[:, :, n])) / model.target_scale)
    return result[0] if single else result
