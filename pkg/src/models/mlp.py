import copy
import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from src.data.casebase import CaseBase
from src.data.encoding import InputEncoder, encode_rows
from src.errors import ModelError, ShapeError, TrainingDivergedError

logger = logging.getLogger(__name__)

HEADS = ("softmax", "linear")


class TrainConfig(BaseModel):
    epochs: int = Field(default=200, ge=1)
    # zero is accepted and leaves the parameters untouched
    learning_rate: float = Field(default=0.1, ge=0.0)
    batch_size: int = Field(default=16, ge=1)
    seed: int = 0
    l2: float = Field(default=0.0, ge=0.0)


@dataclass
class MlpModel:
    """
    Feed-forward net: rectified hidden layers, softmax (classification) or
    identity (regression) head. ``weights[l]`` has shape
    (layer_sizes[l + 1], layer_sizes[l]), so each layer computes W @ x + b.
    """

    layer_sizes: List[int]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    head: str = "softmax"
    hidden_activation: str = "relu"
    encoder: Optional[InputEncoder] = None
    class_labels: List[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.layer_sizes) < 2:
            raise ShapeError("layer_sizes needs at least an input and an output width")
        if self.head not in HEADS:
            raise ModelError(f"unknown head '{self.head}'")
        if self.hidden_activation != "relu":
            raise ModelError(f"unsupported hidden activation '{self.hidden_activation}'")
        n_layers = len(self.layer_sizes) - 1
        if len(self.weights) != n_layers or len(self.biases) != n_layers:
            raise ShapeError(
                f"expected {n_layers} weight matrices and bias vectors, got "
                f"{len(self.weights)} and {len(self.biases)}"
            )
        for l in range(n_layers):
            expected = (self.layer_sizes[l + 1], self.layer_sizes[l])
            if self.weights[l].shape != expected:
                raise ShapeError(
                    f"layer {l}: weight matrix shape {self.weights[l].shape}, expected {expected}"
                )
            if self.biases[l].shape != (self.layer_sizes[l + 1],):
                raise ShapeError(
                    f"layer {l}: bias shape {self.biases[l].shape}, expected ({self.layer_sizes[l + 1]},)"
                )
            if not (np.all(np.isfinite(self.weights[l])) and np.all(np.isfinite(self.biases[l]))):
                raise ModelError(f"layer {l}: parameters must be finite")
        if self.encoder is not None and self.encoder.width != self.layer_sizes[0]:
            raise ShapeError(
                f"encoder width {self.encoder.width} does not match input width {self.layer_sizes[0]}"
            )

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    @property
    def latent_width(self) -> int:
        return self.layer_sizes[-2]

    @property
    def is_classifier(self) -> bool:
        return self.head == "softmax"

    def require_classifier(self, purpose: str) -> None:
        if not self.is_classifier:
            raise ModelError(f"{purpose} needs a classification head")

    def copy(self) -> "MlpModel":
        return copy.deepcopy(self)


class ForwardPass(NamedTuple):
    logits: np.ndarray
    probs: np.ndarray
    penultimate: np.ndarray


class Contribution(NamedTuple):
    predicted_class: int
    values: np.ndarray
    bias: float
    logit: float


def init_model(
    layer_sizes: Sequence[int],
    seed: int,
    head: str = "softmax",
    encoder: Optional[InputEncoder] = None,
    class_labels: Optional[Sequence[str]] = None,
) -> MlpModel:
    """Uniform +/- sqrt(6 / (fan_in + fan_out)) weights, zero biases, seeded."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(
        layer_sizes=list(layer_sizes),
        weights=weights,
        biases=biases,
        head=head,
        encoder=encoder,
        class_labels=list(class_labels or []),
    )


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _propagate(model: MlpModel, X: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Pre-activations Z[l] of every layer and inputs A[l] to every layer (A[0] = X)."""
    if X.ndim != 2 or X.shape[1] != model.layer_sizes[0]:
        raise ShapeError(
            f"input width {X.shape[-1] if X.ndim else 0} does not match model input {model.layer_sizes[0]}"
        )
    activations = [X]
    pre = []
    for l in range(model.n_layers):
        z = activations[-1] @ model.weights[l].T + model.biases[l]
        pre.append(z)
        if l < model.n_layers - 1:
            activations.append(np.maximum(z, 0.0))
    return pre, activations


def _outputs(model: MlpModel, logits: np.ndarray) -> np.ndarray:
    return softmax(logits) if model.is_classifier else logits


def forward_batch(model: MlpModel, X: np.ndarray) -> ForwardPass:
    pre, activations = _propagate(model, np.atleast_2d(np.asarray(X, dtype=float)))
    logits = pre[-1]
    return ForwardPass(logits, _outputs(model, logits), activations[-1])


def forward(model: MlpModel, x: np.ndarray) -> ForwardPass:
    """Single encoded input; ``probs`` is the identity output for a linear head."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeError("forward expects a single input vector")
    out = forward_batch(model, x[None, :])
    return ForwardPass(out.logits[0], out.probs[0], out.penultimate[0])


def predict_batch(model: MlpModel, X: np.ndarray) -> np.ndarray:
    """Class indices (ties to the lowest index) or regression outputs."""
    logits = forward_batch(model, X).logits
    if model.is_classifier:
        return np.argmax(logits, axis=1)
    return logits[:, 0]


def predict(model: MlpModel, x: np.ndarray):
    return predict_batch(model, np.asarray(x, dtype=float)[None, :])[0]


def latents(model: MlpModel, X: np.ndarray) -> np.ndarray:
    return forward_batch(model, X).penultimate


def head_forward(model: MlpModel, latent: np.ndarray) -> np.ndarray:
    """Output-layer logits for a (possibly perturbed) penultimate vector."""
    latent = np.asarray(latent, dtype=float)
    if latent.shape[-1] != model.latent_width:
        raise ShapeError(f"latent width {latent.shape[-1]}, expected {model.latent_width}")
    return latent @ model.weights[-1].T + model.biases[-1]


def head_predict(model: MlpModel, latent: np.ndarray) -> int:
    return int(np.argmax(head_forward(model, latent)))


def input_jacobian(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """d logit_c / d x for every output c, shape (C, d), by exact backpropagation."""
    pre, _ = _propagate(model, np.asarray(x, dtype=float)[None, :])
    grad = np.eye(model.n_outputs)
    for l in range(model.n_layers - 1, -1, -1):
        grad = grad @ model.weights[l]
        if l > 0:
            grad = grad * (pre[l - 1][0] > 0.0)
    return grad


def input_gradient(model: MlpModel, x: np.ndarray, c: int) -> np.ndarray:
    return input_jacobian(model, x)[c]


def input_attribution(model: MlpModel, x: np.ndarray, c: Optional[int] = None) -> np.ndarray:
    """Gradient x input; auxiliary display only."""
    x = np.asarray(x, dtype=float)
    if c is None:
        c = int(predict(model, x)) if model.is_classifier else 0
    return input_gradient(model, x, c) * x


def contributions(model: MlpModel, x: np.ndarray, c: Optional[int] = None) -> Contribution:
    """
    Penultimate activations weighted by their connections to the predicted
    class: values.sum() + bias == logit exactly (up to rounding).
    """
    if not model.is_classifier:
        raise ModelError("contributions require a classification head")
    fp = forward(model, x)
    if c is None:
        c = int(np.argmax(fp.logits))
    values = fp.penultimate * model.weights[-1][c]
    return Contribution(c, values, float(model.biases[-1][c]), float(fp.logits[c]))


def contributions_batch(model: MlpModel, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Each row's contribution vector toward its own predicted class."""
    if not model.is_classifier:
        raise ModelError("contributions require a classification head")
    fp = forward_batch(model, X)
    classes = np.argmax(fp.logits, axis=1)
    return classes, fp.penultimate * model.weights[-1][classes]


def _batch_loss_and_grad(model: MlpModel, Xb: np.ndarray, yb: np.ndarray):
    pre, activations = _propagate(model, Xb)
    logits = pre[-1]
    n = Xb.shape[0]
    if model.is_classifier:
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        loss = -float(np.mean(log_probs[np.arange(n), yb]))
        d_out = np.exp(log_probs)
        d_out[np.arange(n), yb] -= 1.0
        d_out /= n
    else:
        residual = logits[:, 0] - yb
        loss = float(np.mean(residual ** 2))
        d_out = (2.0 * residual / n)[:, None]
    return loss, pre, activations, d_out


def fit_arrays(
    model: MlpModel, X: np.ndarray, y: np.ndarray, config: TrainConfig
) -> Tuple[MlpModel, List[float]]:
    """
    Mini-batch SGD on a private copy of ``model``.
    Shuffling is seeded from config.seed, so identical inputs give identical parameters.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        raise ModelError("cannot train on an empty dataset")
    y = np.asarray(y, dtype=int if model.is_classifier else float)
    trained = model.copy()
    rng = np.random.default_rng(config.seed)
    lr, l2 = config.learning_rate, config.l2
    losses: List[float] = []

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(X.shape[0])
        total = 0.0
        for start in range(0, X.shape[0], config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, pre, activations, d_z = _batch_loss_and_grad(trained, X[idx], y[idx])
            loss += 0.5 * l2 * sum(float(np.sum(w * w)) for w in trained.weights)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, loss)
            total += loss * len(idx)

            for l in range(trained.n_layers - 1, -1, -1):
                grad_w = d_z.T @ activations[l] + l2 * trained.weights[l]
                grad_b = d_z.sum(axis=0)
                if l > 0:
                    d_z = (d_z @ trained.weights[l]) * (pre[l - 1] > 0.0)
                trained.weights[l] -= lr * grad_w
                trained.biases[l] -= lr * grad_b

        epoch_loss = total / X.shape[0]
        if not np.isfinite(epoch_loss) or not all(np.all(np.isfinite(w)) for w in trained.weights):
            raise TrainingDivergedError(epoch, epoch_loss)
        losses.append(epoch_loss)
        logger.debug(f"Epoch {epoch}/{config.epochs} loss={epoch_loss:.6f}")

    logger.info(
        f"Trained {trained.layer_sizes} for {config.epochs} epochs, final loss {losses[-1]:.6f}"
    )
    return trained, losses


def train_sgd(
    model: MlpModel, casebase: CaseBase, config: TrainConfig
) -> Tuple[MlpModel, List[float]]:
    if len(casebase) == 0:
        raise ModelError("cannot train on an empty case base")
    X = encode_rows(model.encoder, [c.features for c in casebase.cases])
    if model.is_classifier:
        y = casebase.labels
    else:
        y = casebase.outcomes
        if np.any(np.isnan(y)):
            raise ModelError("regression training needs an outcome on every case")
    return fit_arrays(model, X, y, config)


def build_model(
    casebase: CaseBase, hidden: Sequence[int], seed: int, head: Optional[str] = None
) -> MlpModel:
    """Fresh model whose input encoder and output width are derived from the case base."""
    encoder = InputEncoder.from_casebase(casebase)
    if head is None:
        head = "softmax" if casebase.schema.task == "classification" else "linear"
    n_out = casebase.schema.n_classes if head == "softmax" else 1
    return init_model(
        [encoder.width, *hidden, n_out],
        seed=seed,
        head=head,
        encoder=encoder,
        class_labels=casebase.schema.class_labels,
    )
