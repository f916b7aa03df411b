"""Network assembly, training loop, and model serialization.

The classifier is a 4-block CNN: blocks of (2, 2, 3, 3) convolutions with
(64, 128, 256, 384) filters, each conv followed by LeakyReLU(0.3), each block
closed by 2x2 max pooling (first three blocks only) and batch normalization.
Three poolings take 32x32 down to 4x4, so the flatten vector is
4*4*384 = 6144, feeding dense layers 256 -> 128 -> 64 -> K with dropout 0.3
after each hidden dense layer.

Model files: magic "QLM1", version u16 LE, u32-length-prefixed JSON header
(config, label names, fold accuracies), then every parameter and batchnorm
running-stat tensor in declaration order as little-endian float32.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .data import Dataset, normalize_for_training, stratified_kfold
from .layers import (BatchNorm, Conv2D, Dense, Dropout, Flatten, Layer,
                     LeakyReLU, MaxPool2)
from .optim import Adam, ExponentialDecay, softmax, softmax_ce_backward, softmax_ce_forward

MAGIC = b"QLM1"
FORMAT_VERSION = 1


class ConfigError(ValueError):
    """Network configuration violates a structural invariant."""


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; message carries fold/epoch/batch diagnostics."""


class SerializationError(ValueError):
    """Model file is malformed, truncated, or of an unknown version."""


@dataclass(frozen=True)
class NetworkConfig:
    """Structural description of the classifier.

    ``flatten_len`` may be declared (to pin the expected dense input width)
    or left None to accept whatever the conv stack produces.
    """

    classes: int = 29
    input_hw: int = 32
    input_channels: int = 1
    blocks: tuple[tuple[int, int], ...] = ((2, 64), (2, 128), (3, 256), (3, 384))
    pool_plan: tuple[bool, ...] = (True, True, True, False)
    kernel: int = 3
    fc: tuple[int, ...] = (256, 128, 64)
    dropout: float = 0.3
    leaky_slope: float = 0.3
    bn_momentum: float = 0.99
    bn_epsilon: float = 1e-3
    flatten_len: int | None = 6144

    def __post_init__(self):
        if self.classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.classes}")
        if len(self.pool_plan) != len(self.blocks):
            raise ConfigError("pool plan must give one entry per block")
        if any(n < 1 or f < 1 for n, f in self.blocks):
            raise ConfigError("every block needs >= 1 conv and >= 1 filter")
        computed = self.computed_flatten_len()
        if self.flatten_len is not None and self.flatten_len != computed:
            raise ConfigError(
                f"declared flatten length {self.flatten_len} but the conv stack "
                f"produces {computed}")

    def spatial_after_blocks(self) -> int:
        hw = self.input_hw
        for pooled in self.pool_plan:
            if pooled:
                if hw < 2:
                    raise ConfigError("pooling below 1x1 spatial size")
                hw //= 2
        return hw

    def computed_flatten_len(self) -> int:
        return self.spatial_after_blocks() ** 2 * self.blocks[-1][1]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["blocks"] = [list(b) for b in self.blocks]
        d["pool_plan"] = list(self.pool_plan)
        d["fc"] = list(self.fc)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        return cls(
            classes=int(d["classes"]),
            input_hw=int(d["input_hw"]),
            input_channels=int(d["input_channels"]),
            blocks=tuple((int(n), int(f)) for n, f in d["blocks"]),
            pool_plan=tuple(bool(p) for p in d["pool_plan"]),
            kernel=int(d["kernel"]),
            fc=tuple(int(w) for w in d["fc"]),
            dropout=float(d["dropout"]),
            leaky_slope=float(d["leaky_slope"]),
            bn_momentum=float(d["bn_momentum"]),
            bn_epsilon=float(d["bn_epsilon"]),
            flatten_len=None if d.get("flatten_len") is None else int(d["flatten_len"]),
        )


def quick_config(classes: int) -> NetworkConfig:
    """Desk-scale variant: same topology, filters cut to 8/16/24/32."""
    return NetworkConfig(
        classes=classes,
        blocks=((2, 8), (2, 16), (3, 24), (3, 32)),
        flatten_len=None,
    )


class Network:
    """Ordered layer stack. ``mode`` reflects the last forward pass."""

    def __init__(self, config: NetworkConfig, layers: list[Layer]):
        self.config = config
        self.layers = layers
        self.mode = "infer"

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        """Run the stack; returns logits [batch, classes]."""
        self.mode = "train" if training else "infer"
        for layer in self.layers:
            x = layer.forward(x, training=training)
        return x

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        grad = grad_logits
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def parameters(self) -> list[np.ndarray]:
        """Trainable tensors in declaration order; stable across calls."""
        out = []
        for layer in self.layers:
            out.extend(getattr(layer, name) for name in layer.params)
        return out

    def gradients(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend(layer.grads[name] for name in layer.params)
        return out

    def state_tensors(self) -> list[np.ndarray]:
        """Non-trainable persistent tensors (batchnorm running stats)."""
        out = []
        for layer in self.layers:
            out.extend(getattr(layer, name) for name in layer.state)
        return out

    def predict_proba(self, x: np.ndarray, batch: int = 256) -> np.ndarray:
        """Inference-mode class probabilities for a batch of inputs."""
        chunks = []
        for start in range(0, len(x), batch):
            logits = self.forward(x[start:start + batch], training=False)
            chunks.append(softmax(logits))
        return np.concatenate(chunks) if chunks else np.zeros((0, self.config.classes))


def build(config: NetworkConfig, rng: np.random.Generator,
          dtype=np.float32) -> Network:
    """Instantiate the stack with He-uniform initialization."""
    layers: list[Layer] = []
    in_ch = config.input_channels
    for (n_convs, filters), pooled in zip(config.blocks, config.pool_plan):
        for _ in range(n_convs):
            layers.append(Conv2D(in_ch, filters, kernel=config.kernel,
                                 rng=rng, dtype=dtype))
            layers.append(LeakyReLU(config.leaky_slope))
            in_ch = filters
        if pooled:
            layers.append(MaxPool2())
        layers.append(BatchNorm(filters, momentum=config.bn_momentum,
                                epsilon=config.bn_epsilon, dtype=dtype))
    layers.append(Flatten())
    width = config.computed_flatten_len()
    for fc_width in config.fc:
        layers.append(Dense(width, fc_width, rng=rng, dtype=dtype))
        layers.append(LeakyReLU(config.leaky_slope))
        if config.dropout > 0:
            layers.append(Dropout(config.dropout, rng=rng))
        width = fc_width
    layers.append(Dense(width, config.classes, rng=rng, dtype=dtype))
    return Network(config, layers)


@dataclass(frozen=True)
class TrainConfig:
    folds: int = 5
    shuffle: bool = True
    batch: int = 128
    epochs: int = 30
    seed: int = 0
    lr: float = 0.001
    decay_exponent: float = -0.01

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError(f"need >= 2 folds, got {self.folds}")
        if self.batch < 1:
            raise ValueError(f"need batch >= 1, got {self.batch}")
        if self.epochs < 1:
            raise ValueError(f"need >= 1 epoch, got {self.epochs}")


@dataclass
class FitResult:
    epoch_losses: list[float]        # mean batch loss per epoch
    val_accuracies: list[float]      # per epoch, empty without a val set


def accuracy(net: Network, x: np.ndarray, labels: np.ndarray, batch: int = 256) -> float:
    probs = net.predict_proba(x, batch=batch)
    return float(np.mean(probs.argmax(axis=1) == labels))


def mean_loss(net: Network, x: np.ndarray, y: np.ndarray, batch: int = 256) -> float:
    """Inference-mode cross-entropy averaged over the whole set."""
    total, n = 0.0, 0
    for start in range(0, len(x), batch):
        xb, yb = x[start:start + batch], y[start:start + batch]
        loss, _ = softmax_ce_forward(net.forward(xb, training=False), yb)
        total += loss * len(xb)
        n += len(xb)
    return total / max(n, 1)


def fit(net: Network, x: np.ndarray, y: np.ndarray, tcfg: TrainConfig,
        rng: np.random.Generator, x_val: np.ndarray | None = None,
        val_labels: np.ndarray | None = None, log=None, tag: str = "") -> FitResult:
    """Train one network in place with Adam plus per-epoch lr decay."""
    opt = Adam(lr=tcfg.lr)
    decay = ExponentialDecay(tcfg.decay_exponent)
    result = FitResult([], [])
    n = len(x)
    for epoch in range(tcfg.epochs):
        order = rng.permutation(n) if tcfg.shuffle else np.arange(n)
        batch_losses = []
        for start in range(0, n, tcfg.batch):
            idx = order[start:start + tcfg.batch]
            logits = net.forward(x[idx], training=True)
            loss, probs = softmax_ce_forward(logits, y[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at {tag or 'fit'} epoch {epoch + 1} "
                    f"batch {start // tcfg.batch + 1}")
            net.backward(softmax_ce_backward(probs, y[idx]))
            opt.step(net.parameters(), net.gradients())
            batch_losses.append(loss)
        opt.lr = decay(opt.lr) if tcfg.decay_exponent != 0 else opt.lr
        result.epoch_losses.append(float(np.mean(batch_losses)))
        if x_val is not None:
            result.val_accuracies.append(accuracy(net, x_val, val_labels))
            if log:
                log(f"{tag} epoch {epoch + 1}/{tcfg.epochs}: "
                    f"loss {result.epoch_losses[-1]:.4f} "
                    f"val acc {result.val_accuracies[-1]:.4f}")
        elif log:
            log(f"{tag} epoch {epoch + 1}/{tcfg.epochs}: loss {result.epoch_losses[-1]:.4f}")
    return result


@dataclass
class TrainedBundle:
    """Best-fold network plus everything needed to reproduce and reuse it."""

    network: Network
    fold_accuracies: tuple[float, ...]
    config: NetworkConfig
    label_names: tuple[str, ...]

    @property
    def best_fold(self) -> int:
        return int(np.argmax(self.fold_accuracies))


def train(data: Dataset, tcfg: TrainConfig, ncfg: NetworkConfig, log=None) -> TrainedBundle:
    """K-fold training: fresh init per fold, keep the best fold's weights.

    Fold quality is the final-epoch validation accuracy; ties go to the
    earliest fold.
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    if len(data.label_map) != ncfg.classes:
        raise ValueError(
            f"dataset has {len(data.label_map)} classes but the network is "
            f"configured for {ncfg.classes}")
    plan = stratified_kfold(data, k=tcfg.folds, seed=tcfg.seed)
    x, y = normalize_for_training(data)
    labels = data.labels

    best_net, fold_accs = None, []
    for fold in range(tcfg.folds):
        tr, va = plan.train_indices(fold), plan.val_indices(fold)
        net = build(ncfg, np.random.default_rng([tcfg.seed, fold, 0]))
        res = fit(net, x[tr], y[tr], tcfg, np.random.default_rng([tcfg.seed, fold, 1]),
                  x_val=x[va], val_labels=labels[va], log=log,
                  tag=f"fold {fold + 1}/{tcfg.folds}")
        fold_accs.append(res.val_accuracies[-1])
        if best_net is None or fold_accs[-1] > max(fold_accs[:-1]):
            best_net = net
    return TrainedBundle(best_net, tuple(fold_accs), ncfg, data.label_map.names)


def predict(net: Network, image: np.ndarray) -> tuple[int, np.ndarray]:
    """Classify one normalized [32,32] (or [h,w,1]) grayscale image.

    Returns (argmax label index, full probability vector); argmax ties break
    toward the lowest index.
    """
    hw = net.config.input_hw
    if image.shape == (hw, hw):
        image = image[..., None]
    if image.shape != (hw, hw, net.config.input_channels):
        raise ValueError(f"expected [{hw},{hw}] image, got {image.shape}")
    probs = net.predict_proba(image[None].astype(np.float32))[0]
    return int(probs.argmax()), probs


def _header_dict(bundle: TrainedBundle) -> dict:
    return {
        "config": bundle.config.to_dict(),
        "labels": list(bundle.label_names),
        "fold_accuracies": list(bundle.fold_accuracies),
    }


def dump_bytes(bundle: TrainedBundle) -> bytes:
    header = json.dumps(_header_dict(bundle)).encode("utf-8")
    parts = [MAGIC, struct.pack("<H", FORMAT_VERSION),
             struct.pack("<I", len(header)), header]
    for tensor in bundle.network.parameters() + bundle.network.state_tensors():
        parts.append(np.ascontiguousarray(tensor, dtype="<f4").tobytes())
    return b"".join(parts)


def save(bundle: TrainedBundle, path):
    with open(path, "wb") as f:
        f.write(dump_bytes(bundle))


def from_bytes(blob: bytes) -> TrainedBundle:
    if blob[:4] != MAGIC:
        raise SerializationError(f"bad magic {blob[:4]!r}, not a model file")
    if len(blob) < 10:
        raise SerializationError("truncated header")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != FORMAT_VERSION:
        raise SerializationError(f"unsupported format version {version}")
    (header_len,) = struct.unpack_from("<I", blob, 6)
    if len(blob) < 10 + header_len:
        raise SerializationError("truncated header")
    try:
        header = json.loads(blob[10:10 + header_len].decode("utf-8"))
        config = NetworkConfig.from_dict(header["config"])
        labels = tuple(header["labels"])
        fold_accs = tuple(float(a) for a in header["fold_accuracies"])
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise SerializationError(f"corrupt header: {exc}") from None

    net = build(config, np.random.default_rng(0))
    offset = 10 + header_len
    for tensor in net.parameters() + net.state_tensors():
        nbytes = tensor.size * 4
        if offset + nbytes > len(blob):
            raise SerializationError("truncated weights")
        tensor[...] = np.frombuffer(blob, dtype="<f4", count=tensor.size,
                                    offset=offset).reshape(tensor.shape)
        offset += nbytes
    if offset != len(blob):
        raise SerializationError(f"{len(blob) - offset} trailing bytes after weights")
    return TrainedBundle(net, fold_accs, config, labels)


def load(path) -> TrainedBundle:
    with open(path, "rb") as f:
        return from_bytes(f.read())
