"""End-to-end node classifier: one attention layer plus a Euclidean readout.

The readout is a linear map on the origin log map of the layer output, so
training and downstream evaluation (clustering, export) share the same
tangent-space view of the embeddings.  All trainable parameters (layer
weight, readout weight/bias) are ordinary Euclidean matrices; optimization
is adaptive-moment gradient descent with decoupled weight decay.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from . import gyro
from .autodiff import Tape, Tensor
from .graphs import GraphDataset
from .layer import LayerParams, layer_forward


@dataclass
class TrainConfig:
    dim: int = 16
    curvature: float = 1.0
    learning_rate: float = 0.005
    weight_decay: float = 5e-4
    max_epochs: int = 1000
    patience: int = 100
    dropout: float = 0.6
    seed: int = 0
    aggregation: str = "accelerated"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.curvature <= 0.0:
            raise ValueError("training requires positive curvature")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.weight_decay < 0.0:
            raise ValueError("weight_decay must be non-negative")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be at least 1")
        if not 0 <= self.patience <= self.max_epochs:
            raise ValueError("patience must lie in [0, max_epochs]")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.aggregation not in ("serial", "accelerated"):
            raise ValueError(f"unknown aggregation mode: {self.aggregation!r}")


@dataclass
class Classifier:
    layer: LayerParams
    w_out: np.ndarray             # (num_classes, dim)
    b_out: np.ndarray             # (1, num_classes)

    def __post_init__(self):
        self.w_out = np.asarray(self.w_out, dtype=np.float64)
        self.b_out = np.asarray(self.b_out, dtype=np.float64).reshape(1, -1)
        if self.w_out.shape[1] != self.layer.weight.shape[0]:
            raise ValueError("readout width does not match layer output dimension")
        if self.b_out.shape[1] != self.w_out.shape[0]:
            raise ValueError("bias length does not match number of classes")

    @property
    def num_classes(self) -> int:
        return self.w_out.shape[0]

    def clone(self) -> "Classifier":
        return Classifier(layer=replace(self.layer, weight=self.layer.weight.copy()),
                          w_out=self.w_out.copy(), b_out=self.b_out.copy())


def init_classifier(num_features: int, num_classes: int, config: TrainConfig,
                    rng: np.random.Generator) -> Classifier:
    """Uniform fan-in initialization for both weight matrices, zero bias."""
    s_layer = 1.0 / np.sqrt(num_features)
    s_out = 1.0 / np.sqrt(config.dim)
    layer = LayerParams(weight=rng.uniform(-s_layer, s_layer, (config.dim, num_features)),
                        curvature=config.curvature, aggregation=config.aggregation)
    w_out = rng.uniform(-s_out, s_out, (num_classes, config.dim))
    return Classifier(layer=layer, w_out=w_out, b_out=np.zeros((1, num_classes)))


@dataclass
class ForwardResult:
    logits: Tensor
    embeddings: Tensor
    attention: Tensor
    params: dict[str, Tensor] = field(default_factory=dict)


def forward(model: Classifier, ds: GraphDataset, *, training: bool = False,
            rng: np.random.Generator | None = None, dropout: float = 0.0,
            tape: Tape | None = None,
            scratch: np.ndarray | None = None) -> ForwardResult:
    """Run the classifier; with a tape, parameters become tracked leaves."""
    if ds.num_features != model.layer.weight.shape[1]:
        raise ValueError("dataset feature width does not match the layer weight")
    if tape is not None:
        weight = tape.leaf(model.layer.weight)
        w_out = tape.leaf(model.w_out)
        b_out = tape.leaf(model.b_out)
    else:
        weight = ad.constant(model.layer.weight)
        w_out = ad.constant(model.w_out)
        b_out = ad.constant(model.b_out)
    c = model.layer.curvature
    emb, attn = layer_forward(ad.constant(ds.features), weight, ds.adjacency, c,
                              model.layer.aggregation, dropout=dropout,
                              training=training, rng=rng, scratch=scratch)
    logits = ad.add(ad.matmul(gyro.logmap0(emb, c), ad.transpose(w_out)), b_out)
    return ForwardResult(logits=logits, embeddings=emb, attention=attn,
                         params={"weight": weight, "w_out": w_out, "b_out": b_out})


def loss_cross_entropy(logits: Tensor, labels: np.ndarray, mask: np.ndarray) -> Tensor:
    """Mean negative log softmax probability of the true class over `mask`."""
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ValueError("loss mask is empty")
    labels = np.asarray(labels, dtype=np.int64)
    picked = ad.gather_rows(logits, mask)
    lse = ad.row_logsumexp(picked)
    onehot = np.zeros((mask.size, logits.shape[1]))
    onehot[np.arange(mask.size), labels[mask]] = 1.0
    true_logit = ad.row_sum(ad.mul(picked, ad.constant(onehot)))
    return ad.mul(ad.total_sum(ad.sub(lse, true_logit)), 1.0 / mask.size)


def predictions(logits: np.ndarray) -> np.ndarray:
    """Argmax class per node; ties resolve to the lowest class index."""
    return np.argmax(logits, axis=1)


def accuracy_from_logits(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ValueError("accuracy mask is empty")
    return float(np.mean(predictions(logits[mask]) == labels[mask]))


def evaluate_accuracy(model: Classifier, ds: GraphDataset, mask: np.ndarray) -> float:
    result = forward(model, ds)
    return accuracy_from_logits(result.logits.data, ds.labels, mask)


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


class _Adam:
    """Adaptive-moment optimizer with decoupled weight decay."""

    def __init__(self, params: dict[str, np.ndarray], lr: float, weight_decay: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for key, p in self.params.items():
            g = grads[key]
            self.m[key] = self.beta1 * self.m[key] + (1.0 - self.beta1) * g
            self.v[key] = self.beta2 * self.v[key] + (1.0 - self.beta2) * g * g
            update = (self.m[key] / b1c) / (np.sqrt(self.v[key] / b2c) + self.eps)
            p -= self.lr * (update + self.weight_decay * p)


def train(ds: GraphDataset, config: TrainConfig) -> tuple[Classifier, list[EpochStats]]:
    """Full training run; returns the best-validation-epoch model and history.

    Stops once validation accuracy has not improved for `patience` epochs
    (patience 0 therefore runs exactly one epoch).  Deterministic for a
    fixed seed.  Raises FloatingPointError if the loss diverges.
    """
    if ds.train_idx.size == 0 or ds.val_idx.size == 0:
        raise ValueError("training requires non-empty train and val splits")
    rng = np.random.default_rng(config.seed)
    model = init_classifier(ds.num_features, ds.num_classes, config, rng)

    arrays = {"weight": model.layer.weight, "w_out": model.w_out, "b_out": model.b_out}
    optimizer = _Adam(arrays, config.learning_rate, config.weight_decay)

    history: list[EpochStats] = []
    best_acc = -np.inf
    best_epoch = 0
    best_model = model.clone()
    scratch = np.empty_like(ds.features) if config.dropout > 0.0 else None

    for epoch in range(1, config.max_epochs + 1):
        tape = Tape(check_values=False)
        result = forward(model, ds, training=True, rng=rng,
                         dropout=config.dropout, tape=tape, scratch=scratch)
        loss = loss_cross_entropy(result.logits, ds.labels, ds.train_idx)
        if not np.isfinite(loss.item()):
            raise FloatingPointError(f"training loss diverged at epoch {epoch}")
        grads = ad.backward(loss, tape)
        optimizer.step({k: grads[t].data for k, t in result.params.items()})
        if not all(np.all(np.isfinite(p)) for p in arrays.values()):
            raise FloatingPointError(f"parameters diverged at epoch {epoch}")

        eval_result = forward(model, ds)
        eval_logits = eval_result.logits
        stats = EpochStats(
            epoch=epoch,
            train_loss=loss_cross_entropy(eval_logits, ds.labels, ds.train_idx).item(),
            train_acc=accuracy_from_logits(eval_logits.data, ds.labels, ds.train_idx),
            val_loss=loss_cross_entropy(eval_logits, ds.labels, ds.val_idx).item(),
            val_acc=accuracy_from_logits(eval_logits.data, ds.labels, ds.val_idx),
        )
        history.append(stats)

        if stats.val_acc > best_acc:
            best_acc = stats.val_acc
            best_epoch = epoch
            best_model = model.clone()
        if epoch - best_epoch >= config.patience:
            break

    return best_model, history
