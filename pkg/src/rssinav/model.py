"""Dense-network position regressor built from scratch on numpy.

The regressor maps a normalized RSSI feature vector to normalized (x, y).
Everything is explicit: forward pass, batch normalization with separate
train/inference behaviour, mean-absolute-error loss, analytic
backpropagation, a seeded training loop (plain gradient descent or
adaptive-moment), and a self-describing binary model file that bundles the
network with its feature selection and normalization parameters.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import ToolkitError
from .features import (
    FeatureSelection,
    NormalizationParams,
    denormalize_coords,
    normalize_features,
    sidecar_dumps,
    sidecar_loads,
)
from .scan_ingest import ScanSnapshot

RELU = "relu"
IDENTITY = "identity"
ACTIVATIONS = (RELU, IDENTITY)

DEFAULT_EPOCHS = 700
DEFAULT_VALIDATION_SPLIT = 0.2
DEFAULT_BATCH_SIZE = 16
DEFAULT_LEARNING_RATE = 1e-3

_MAGIC = b"FPNNMODEL\x00"
_FORMAT_VERSION = 1


class ShapeMismatch(ToolkitError):
    """Array shapes do not match the model or each other."""


class EmptyBatch(ToolkitError):
    """A loss or gradient was requested over zero samples."""


class UninitializedStatistics(ToolkitError):
    """Inference-mode batch norm needs populated running statistics."""


class EmptyDataset(ToolkitError):
    """Training needs at least one row."""


class DivergenceDetected(ToolkitError):
    """Training loss became non-finite; carries the report so far."""

    def __init__(self, message: str, report: "TrainReport"):
        super().__init__(message)
        self.report = report


class VersionMismatch(ToolkitError):
    """The model file was written by an unknown format version."""


class CorruptFile(ToolkitError):
    """The model file is truncated or structurally invalid."""


class ChecksumFailure(ToolkitError):
    """The model file's checksum does not match its content."""


class NoKnownAccessPoints(ToolkitError):
    """A snapshot contains none of the model's feature APs; no estimate."""


@dataclass
class DenseLayer:
    """Fully connected layer: out = activation(W @ x + b), W is (out, in)."""

    weights: np.ndarray
    biases: np.ndarray
    activation: str = RELU

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float)
        self.biases = np.asarray(self.biases, dtype=float).reshape(-1)
        if self.weights.ndim != 2 or self.weights.shape[0] != self.biases.shape[0]:
            raise ShapeMismatch("weights must be (out, in) with matching biases")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def in_width(self) -> int:
        return self.weights.shape[1]

    @property
    def out_width(self) -> int:
        return self.weights.shape[0]


@dataclass
class BatchNormLayer:
    """Per-feature standardization: batch statistics while training, running
    statistics at inference (so inference output never depends on batch
    composition)."""

    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    epsilon: float = 1e-5
    momentum: float = 0.9
    initialized: bool = True

    def __post_init__(self) -> None:
        self.gamma = np.asarray(self.gamma, dtype=float).reshape(-1)
        self.beta = np.asarray(self.beta, dtype=float).reshape(-1)
        self.running_mean = np.asarray(self.running_mean, dtype=float).reshape(-1)
        self.running_var = np.asarray(self.running_var, dtype=float).reshape(-1)
        if not (len(self.gamma) == len(self.beta) == len(self.running_mean) == len(self.running_var)):
            raise ShapeMismatch("batch-norm parameter widths differ")
        if self.epsilon <= 0 or not 0 < self.momentum < 1:
            raise ValueError("epsilon must be > 0 and momentum in (0, 1)")
        if np.any(self.running_var < 0):
            raise ValueError("running variance must be non-negative")

    @classmethod
    def fresh(cls, width: int, epsilon: float = 1e-5, momentum: float = 0.9) -> "BatchNormLayer":
        return cls(np.ones(width), np.zeros(width), np.zeros(width), np.ones(width), epsilon, momentum, initialized=False)

    @property
    def width(self) -> int:
        return len(self.gamma)

    def update_running(self, mean: np.ndarray, var: np.ndarray) -> None:
        if not self.initialized:
            self.running_mean = mean.copy()
            self.running_var = var.copy()
            self.initialized = True
        else:
            self.running_mean = self.momentum * self.running_mean + (1.0 - self.momentum) * mean
            self.running_var = self.momentum * self.running_var + (1.0 - self.momentum) * var


@dataclass
class MlpRegressor:
    """Ordered dense / batch-norm layer stack ending in an identity-activation
    dense layer of width 2 (normalized x, y)."""

    layers: list

    def __post_init__(self) -> None:
        if not self.layers or not isinstance(self.layers[0], DenseLayer):
            raise ShapeMismatch("model must start with a dense layer")
        width = self.layers[0].in_width
        for layer in self.layers:
            if isinstance(layer, DenseLayer):
                if layer.in_width != width:
                    raise ShapeMismatch(f"layer expects width {layer.in_width}, got {width}")
                width = layer.out_width
            elif isinstance(layer, BatchNormLayer):
                if layer.width != width:
                    raise ShapeMismatch(f"batch norm width {layer.width} does not match {width}")
            else:
                raise ShapeMismatch(f"unsupported layer type {type(layer).__name__}")
        last = self.layers[-1]
        if not isinstance(last, DenseLayer) or last.activation != IDENTITY:
            raise ShapeMismatch("final layer must be dense with identity activation")

    @property
    def input_width(self) -> int:
        return self.layers[0].in_width

    @property
    def output_width(self) -> int:
        return self.layers[-1].out_width

    @classmethod
    def default(cls, input_width: int, hidden=(32, 64), output_width: int = 2) -> "MlpRegressor":
        """Standard architecture: dense(32) -> batch norm -> dense(64) -> dense(2).

        Parameters start at zero; train() seeds them from its config.
        """
        first, second = hidden
        layers = [
            DenseLayer(np.zeros((first, input_width)), np.zeros(first), RELU),
            BatchNormLayer.fresh(first),
            DenseLayer(np.zeros((second, first)), np.zeros(second), RELU),
            DenseLayer(np.zeros((output_width, second)), np.zeros(output_width), IDENTITY),
        ]
        return cls(layers)


def initialize_parameters(model: MlpRegressor, rng: np.random.Generator) -> None:
    """Seeded uniform fan-in init for dense layers; batch norm reset to neutral."""
    for layer in model.layers:
        if isinstance(layer, DenseLayer):
            bound = 1.0 / np.sqrt(layer.in_width)
            layer.weights = rng.uniform(-bound, bound, layer.weights.shape)
            layer.biases = np.zeros_like(layer.biases)
        else:
            layer.gamma = np.ones(layer.width)
            layer.beta = np.zeros(layer.width)
            layer.running_mean = np.zeros(layer.width)
            layer.running_var = np.ones(layer.width)
            layer.initialized = False


def _as_batch(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim == 2:
        return arr, False
    raise ShapeMismatch(f"expected a vector or matrix, got ndim={arr.ndim}")


def forward(model: MlpRegressor, x, mode: str = "infer") -> np.ndarray:
    """Run the network on one vector or a batch.

    Train mode normalizes with batch statistics (without touching running
    statistics); inference mode uses running statistics and therefore gives
    the same answer for a sample alone or inside any batch.
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    batch, single = _as_batch(x)
    if batch.shape[1] != model.input_width:
        raise ShapeMismatch(f"input width {batch.shape[1]} != model width {model.input_width}")
    out = batch
    for layer in model.layers:
        if isinstance(layer, DenseLayer):
            z = out @ layer.weights.T + layer.biases
            out = np.maximum(z, 0.0) if layer.activation == RELU else z
        else:
            if mode == "train":
                mean = out.mean(axis=0)
                var = out.var(axis=0)
            else:
                if not layer.initialized:
                    raise UninitializedStatistics("batch norm has no running statistics yet")
                mean, var = layer.running_mean, layer.running_var
            out = layer.gamma * (out - mean) / np.sqrt(var + layer.epsilon) + layer.beta
    return out[0] if single else out


def mae_loss(pred, truth) -> float:
    """Mean absolute error over every coordinate component of the batch."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ShapeMismatch(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    if pred.size == 0:
        raise EmptyBatch("loss over an empty batch")
    return float(np.abs(pred - truth).mean())


def _forward_cached(model: MlpRegressor, batch: np.ndarray):
    caches = []
    out = batch
    for layer in model.layers:
        if isinstance(layer, DenseLayer):
            z = out @ layer.weights.T + layer.biases
            activated = np.maximum(z, 0.0) if layer.activation == RELU else z
            caches.append({"input": out, "z": z})
            out = activated
        else:
            mean = out.mean(axis=0)
            var = out.var(axis=0)
            ivar = 1.0 / np.sqrt(var + layer.epsilon)
            xhat = (out - mean) * ivar
            caches.append({"input": out, "mean": mean, "var": var, "ivar": ivar, "xhat": xhat})
            out = layer.gamma * xhat + layer.beta
    return out, caches


def _backward_cached(model: MlpRegressor, caches, grad_out: np.ndarray):
    grads = [None] * len(model.layers)
    g = grad_out
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        cache = caches[i]
        if isinstance(layer, DenseLayer):
            dz = g * (cache["z"] > 0.0) if layer.activation == RELU else g
            grads[i] = {"weights": dz.T @ cache["input"], "biases": dz.sum(axis=0)}
            g = dz @ layer.weights
        else:
            m = cache["input"].shape[0]
            xhat, ivar = cache["xhat"], cache["ivar"]
            dgamma = (g * xhat).sum(axis=0)
            dbeta = g.sum(axis=0)
            dxhat = g * layer.gamma
            # batch statistics (population variance) participate in the gradient
            g = (ivar / m) * (m * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
            grads[i] = {"gamma": dgamma, "beta": dbeta}
    return grads


def backward(model: MlpRegressor, inputs, targets):
    """Analytic gradients of the batch MAE loss for every parameter.

    The MAE subgradient at an exactly-zero component error is 0.  Gradient
    shapes mirror parameter shapes, as a list of per-layer dicts.
    """
    loss, grads, _ = _loss_and_grads(model, inputs, targets)
    return grads


def _loss_and_grads(model: MlpRegressor, inputs, targets):
    batch, _ = _as_batch(inputs)
    truth, _ = _as_batch(targets)
    if batch.shape[0] != truth.shape[0] or truth.shape[1] != model.output_width:
        raise ShapeMismatch("batch and target shapes do not match the model")
    if batch.shape[0] == 0:
        raise EmptyBatch("gradient over an empty batch")
    pred, caches = _forward_cached(model, batch)
    loss = float(np.abs(pred - truth).mean())
    grad_out = np.sign(pred - truth) / pred.size
    grads = _backward_cached(model, caches, grad_out)
    return loss, grads, caches


@dataclass
class TrainConfig:
    """Training hyperparameters; every value is recorded for reproducibility."""

    epochs: int = DEFAULT_EPOCHS
    validation_split: float = DEFAULT_VALIDATION_SPLIT
    batch_size: int = DEFAULT_BATCH_SIZE
    learning_rate: float = DEFAULT_LEARNING_RATE
    seed: int = 0
    optimizer: str = "adam"  # "adam" (adaptive-moment) or "sgd" (plain gradient descent)

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 <= self.validation_split < 1.0:
            raise ValueError("validation_split must be in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainReport:
    """Per-epoch losses (normalized MAE) plus final test metrics when known."""

    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    test_mae_norm: float | None = None
    test_mean_error_ft: float | None = None


def write_report_csv(report: TrainReport, sink) -> None:
    """Export per-epoch losses as CSV rows of (epoch, train_loss, val_loss)."""
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="") as fh:
            write_report_csv(report, fh)
        return
    sink.write("epoch,train_loss,val_loss\n")
    for i, (tr, va) in enumerate(zip(report.train_loss, report.val_loss), start=1):
        sink.write(f"{i},{tr!r},{va!r}\n")


def _param_items(model: MlpRegressor):
    for i, layer in enumerate(model.layers):
        if isinstance(layer, DenseLayer):
            yield i, "weights"
            yield i, "biases"
        else:
            yield i, "gamma"
            yield i, "beta"


class _Adam:
    def __init__(self, model: MlpRegressor, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {key: np.zeros_like(getattr(model.layers[key[0]], key[1])) for key in _param_items(model)}
        self.v = {key: np.zeros_like(m) for key, m in self.m.items()}

    def step(self, model: MlpRegressor, grads) -> None:
        self.t += 1
        for key in self.m:
            i, name = key
            g = grads[i][name]
            self.m[key] = self.beta1 * self.m[key] + (1 - self.beta1) * g
            self.v[key] = self.beta2 * self.v[key] + (1 - self.beta2) * g * g
            mhat = self.m[key] / (1 - self.beta1**self.t)
            vhat = self.v[key] / (1 - self.beta2**self.t)
            param = getattr(model.layers[i], name)
            setattr(model.layers[i], name, param - self.lr * mhat / (np.sqrt(vhat) + self.eps))


class _Sgd:
    def __init__(self, model: MlpRegressor, lr: float):
        self.lr = lr

    def step(self, model: MlpRegressor, grads) -> None:
        for i, name in _param_items(model):
            param = getattr(model.layers[i], name)
            setattr(model.layers[i], name, param - self.lr * grads[i][name])


def validation_counts(n: int, fraction: float) -> tuple[int, int]:
    """(training rows, validation rows) for a carve-out: the validation count
    is the rounded fraction of n, capped so at least one training row survives."""
    n_val = min(int(np.floor(fraction * n + 0.5)), n - 1) if n > 1 else 0
    return n - n_val, n_val


def train(model: MlpRegressor, inputs, targets, config: TrainConfig) -> TrainReport:
    """Seeded minibatch training on normalized data.

    The seed drives everything that is random: parameter initialization
    (training re-initializes the model so a run is a pure function of data,
    architecture and config), the one-time shuffle whose last
    ``validation_split`` fraction becomes the validation set, and the
    per-epoch batch order.  Batch-norm running statistics are updated from
    every training batch; validation loss is computed in inference mode.
    Raises DivergenceDetected (carrying the report so far) if the loss goes
    non-finite.
    """
    X, _ = _as_batch(inputs)
    T, _ = _as_batch(targets)
    if X.shape[0] == 0:
        raise EmptyDataset("no training rows")
    if X.shape[0] != T.shape[0] or X.shape[1] != model.input_width or T.shape[1] != model.output_width:
        raise ShapeMismatch("training arrays do not match the model widths")
    rng = np.random.default_rng(config.seed)
    initialize_parameters(model, rng)

    n = X.shape[0]
    perm = rng.permutation(n)
    n_train, n_val = validation_counts(n, config.validation_split)
    train_idx = perm[:n_train]
    val_idx = perm[n_train:]
    Xtr, Ttr = X[train_idx], T[train_idx]
    Xva, Tva = X[val_idx], T[val_idx]

    optimizer = _Adam(model, config.learning_rate) if config.optimizer == "adam" else _Sgd(model, config.learning_rate)
    report = TrainReport()
    for _ in range(config.epochs):
        order = rng.permutation(len(Xtr))
        total_abs = 0.0
        for start in range(0, len(order), config.batch_size):
            batch_idx = order[start : start + config.batch_size]
            loss, grads, caches = _loss_and_grads(model, Xtr[batch_idx], Ttr[batch_idx])
            if not np.isfinite(loss):
                raise DivergenceDetected("training loss became non-finite", report)
            for layer, cache in zip(model.layers, caches):
                if isinstance(layer, BatchNormLayer):
                    layer.update_running(cache["mean"], cache["var"])
            optimizer.step(model, grads)
            total_abs += loss * batch_idx.size
        epoch_train = total_abs / len(Xtr)
        if len(Xva):
            epoch_val = mae_loss(forward(model, Xva, mode="infer"), Tva)
        else:
            epoch_val = epoch_train  # no validation rows carved out
        if not (np.isfinite(epoch_train) and np.isfinite(epoch_val)):
            raise DivergenceDetected("training loss became non-finite", report)
        report.train_loss.append(float(epoch_train))
        report.val_loss.append(float(epoch_val))
    return report


class PositionEstimate(NamedTuple):
    x: float
    y: float


@dataclass
class ModelBundle:
    """A trained regressor with the selection and scaling it was fit with."""

    model: MlpRegressor
    selection: FeatureSelection
    params: NormalizationParams

    def __iter__(self):
        return iter((self.model, self.selection, self.params))


def prepare_features(bundle: ModelBundle, values) -> np.ndarray:
    """Normalize raw RSSI values and clamp them into the fitted [0, 1] range.

    Readings outside the range seen at fit time (possible for any scan the
    training set did not cover) would make the network extrapolate wildly;
    clamping pins them to the nearest trained boundary instead.
    """
    return np.clip(normalize_features(bundle.params, values), 0.0, 1.0)


def predict_position(bundle: ModelBundle, snapshot: ScanSnapshot) -> PositionEstimate:
    """Estimate (x, y) in feet from one parsed scan.

    The feature vector is assembled in kept-column order with absent APs
    zero-filled, normalized (out-of-range readings clamped), run through the
    network in inference mode and denormalized.  If the snapshot contains
    none of the kept APs the estimate is refused (NoKnownAccessPoints) so a
    navigator can hold position instead of acting on noise.
    """
    observed = snapshot.rssi_by_mac()
    kept = bundle.selection.kept_columns
    if not any(mac in observed for mac in kept):
        raise NoKnownAccessPoints("snapshot contains none of the model's access points")
    vector = np.array([float(observed.get(mac, 0.0)) for mac in kept])
    out = forward(bundle.model, prepare_features(bundle, vector), mode="infer")
    x, y = denormalize_coords(bundle.params, out)
    return PositionEstimate(float(x), float(y))


def _arch_descriptor(model: MlpRegressor) -> list[dict]:
    arch = []
    for layer in model.layers:
        if isinstance(layer, DenseLayer):
            arch.append(
                {"kind": "dense", "in": layer.in_width, "out": layer.out_width, "activation": layer.activation}
            )
        else:
            arch.append(
                {
                    "kind": "batchnorm",
                    "width": layer.width,
                    "epsilon": layer.epsilon,
                    "momentum": layer.momentum,
                    "initialized": layer.initialized,
                }
            )
    return arch


def _parameter_blocks(layer) -> list[np.ndarray]:
    if isinstance(layer, DenseLayer):
        return [layer.weights, layer.biases]
    return [layer.gamma, layer.beta, layer.running_mean, layer.running_var]


def save_model(model: MlpRegressor, selection: FeatureSelection, params: NormalizationParams, sink) -> None:
    """Write the self-describing binary model file.

    Layout: magic, format version, JSON architecture header, parameter
    blocks as little-endian float64 in declared order, the
    selection/normalization sidecar text, and a SHA-256 checksum over
    everything before it.
    """
    if isinstance(sink, (str, Path)):
        with open(sink, "wb") as fh:
            save_model(model, selection, params, fh)
        return
    header = json.dumps(
        {"arch": _arch_descriptor(model), "input_width": model.input_width, "output_width": model.output_width},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    sidecar = sidecar_dumps(selection, params).encode("utf-8")
    body = bytearray()
    body += _MAGIC
    body += struct.pack("<H", _FORMAT_VERSION)
    body += struct.pack("<I", len(header)) + header
    for layer in model.layers:
        for block in _parameter_blocks(layer):
            body += np.ascontiguousarray(block, dtype="<f8").tobytes()
    body += struct.pack("<I", len(sidecar)) + sidecar
    body += hashlib.sha256(bytes(body)).digest()
    sink.write(bytes(body))


def load_model(source) -> ModelBundle:
    """Read a model file back; forward outputs are bit-identical to save time."""
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            return load_model(fh)
    data = source.read()

    if len(data) < len(_MAGIC) + 2 or not data.startswith(_MAGIC):
        raise CorruptFile("not a model file (bad magic)")
    (version,) = struct.unpack_from("<H", data, len(_MAGIC))
    if version != _FORMAT_VERSION:
        raise VersionMismatch(f"unsupported model format version {version}")
    offset = len(_MAGIC) + 2

    def take(count: int) -> bytes:
        nonlocal offset
        if offset + count > len(data) - 32:  # the final 32 bytes are the checksum
            raise CorruptFile("model file is truncated")
        chunk = data[offset : offset + count]
        offset += count
        return chunk

    if len(data) < offset + 4 + 32:
        raise CorruptFile("model file is truncated")
    (header_len,) = struct.unpack("<I", take(4))
    try:
        header = json.loads(take(header_len).decode("utf-8"))
        arch = header["arch"]
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise CorruptFile(f"bad architecture header: {exc}") from exc

    layers = []
    for descriptor in arch:
        try:
            kind = descriptor["kind"]
            if kind == "dense":
                rows, cols = int(descriptor["out"]), int(descriptor["in"])
                weights = np.frombuffer(take(rows * cols * 8), dtype="<f8").reshape(rows, cols).copy()
                biases = np.frombuffer(take(rows * 8), dtype="<f8").copy()
                layers.append(DenseLayer(weights, biases, descriptor["activation"]))
            elif kind == "batchnorm":
                width = int(descriptor["width"])
                blocks = [np.frombuffer(take(width * 8), dtype="<f8").copy() for _ in range(4)]
                layers.append(
                    BatchNormLayer(
                        *blocks, float(descriptor["epsilon"]), float(descriptor["momentum"]), bool(descriptor["initialized"])
                    )
                )
            else:
                raise CorruptFile(f"unknown layer kind {kind!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptFile(f"bad layer descriptor: {exc}") from exc
    (sidecar_len,) = struct.unpack("<I", take(4))
    sidecar_text = take(sidecar_len).decode("utf-8")
    if offset != len(data) - 32:
        raise CorruptFile("trailing bytes before checksum")
    if hashlib.sha256(data[:-32]).digest() != data[-32:]:
        raise ChecksumFailure("model file checksum mismatch")
    selection, params = sidecar_loads(sidecar_text)
    try:
        model = MlpRegressor(layers)
    except ToolkitError as exc:
        raise CorruptFile(f"inconsistent architecture: {exc}") from exc
    return ModelBundle(model, selection, params)
