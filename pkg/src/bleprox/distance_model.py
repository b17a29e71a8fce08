"""Stage 2: a dense feed-forward classifier over encoded feature rows.

Four-way softmax over the distance classes, trained by mini-batch Adam with
a stepped learning-rate decay. Per-event predictions come from the mode of
the per-row classes. All math is float64 NumPy; training is deterministic
for a fixed seed (fixed init, fixed shuffle stream, fixed batch order).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DISTANCE_CLASSES, DistanceClass


class TrainingDivergence(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass(frozen=True)
class NetConfig:
    hidden_layers: tuple[int, ...] = (256, 128, 64)
    learning_rate: float = 0.02
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    scheduler_gamma: float = 0.9
    scheduler_step: int = 10
    epochs: int = 1000
    batch_size: int = 256
    seed: int = 0

    def __post_init__(self):
        if any(w < 1 for w in self.hidden_layers):
            raise ValueError("hidden layer widths must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")

    def lr_at_epoch(self, epoch: int) -> float:
        """Learning rate in force during a 0-based epoch."""
        return self.learning_rate * self.scheduler_gamma ** (epoch // self.scheduler_step)


_N_OUT = len(DISTANCE_CLASSES)


@dataclass
class DistanceModel:
    weights: list[np.ndarray]  # (fan_in, fan_out) per layer
    biases: list[np.ndarray]
    config: NetConfig
    train_losses: list[float] = field(default_factory=list)

    @property
    def input_dim(self) -> int:
        return int(self.weights[0].shape[0])

    def to_dict(self) -> dict:
        return {
            "kind": "distance_model",
            "class_metres": [c.metres for c in DISTANCE_CLASSES],
            "config": {
                "hidden_layers": list(self.config.hidden_layers),
                "learning_rate": self.config.learning_rate,
                "beta1": self.config.beta1,
                "beta2": self.config.beta2,
                "epsilon": self.config.epsilon,
                "scheduler_gamma": self.config.scheduler_gamma,
                "scheduler_step": self.config.scheduler_step,
                "epochs": self.config.epochs,
                "batch_size": self.config.batch_size,
                "seed": self.config.seed,
            },
            "layer_shapes": [list(w.shape) for w in self.weights],
            "weights": [w.reshape(-1).tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "train_losses": self.train_losses,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DistanceModel":
        if doc.get("kind") != "distance_model":
            raise ValueError("not a distance model document")
        cfg = dict(doc["config"])
        cfg["hidden_layers"] = tuple(cfg["hidden_layers"])
        weights = [
            np.asarray(flat, dtype=np.float64).reshape(shape)
            for flat, shape in zip(doc["weights"], doc["layer_shapes"])
        ]
        biases = [np.asarray(b, dtype=np.float64) for b in doc["biases"]]
        return cls(weights, biases, NetConfig(**cfg), [float(v) for v in doc["train_losses"]])


def init_params(input_dim: int, config: NetConfig, rng: np.random.Generator):
    """He fan-in initialization; biases start at zero."""
    widths = [input_dim, *config.hidden_layers, _N_OUT]
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return weights, biases


def _forward(weights, biases, x):
    """Returns (activations per layer incl. input, logits)."""
    acts = [x]
    a = x
    for w, b in zip(weights[:-1], biases[:-1]):
        a = np.maximum(a @ w + b, 0.0)
        acts.append(a)
    logits = a @ weights[-1] + biases[-1]
    return acts, logits


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grads(weights, biases, x, y_idx):
    """Mean cross-entropy and its gradients; the finite-difference oracle in
    the tests checks these analytic gradients parameter by parameter."""
    n = x.shape[0]
    acts, logits = _forward(weights, biases, x)
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(log_norm - z[np.arange(n), y_idx]))

    probs = _softmax(logits)
    delta = probs
    delta[np.arange(n), y_idx] -= 1.0
    delta /= n

    grads_w = [None] * len(weights)
    grads_b = [None] * len(biases)
    for layer in range(len(weights) - 1, -1, -1):
        grads_w[layer] = acts[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * (acts[layer] > 0.0)
    return loss, grads_w, grads_b


def train_distance(x: np.ndarray, y_idx: np.ndarray, config: NetConfig) -> DistanceModel:
    x = np.asarray(x, dtype=np.float64)
    y_idx = np.asarray(y_idx, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("training matrix must be non-empty and 2-D")
    if x.shape[0] != y_idx.shape[0]:
        raise ValueError("features and labels differ in length")

    rng = np.random.default_rng(config.seed)
    weights, biases = init_params(x.shape[1], config, rng)

    m_w = [np.zeros_like(w) for w in weights]
    v_w = [np.zeros_like(w) for w in weights]
    m_b = [np.zeros_like(b) for b in biases]
    v_b = [np.zeros_like(b) for b in biases]
    step = 0

    n = x.shape[0]
    losses = []
    for epoch in range(config.epochs):
        lr = config.lr_at_epoch(epoch)
        perm = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, config.batch_size):
            batch = perm[start:start + config.batch_size]
            loss, gw, gb = loss_and_grads(weights, biases, x[batch], y_idx[batch])
            if not np.isfinite(loss):
                raise TrainingDivergence(
                    f"non-finite loss at epoch {epoch}, batch {n_batches} (lr={lr:g})"
                )
            step += 1
            bc1 = 1.0 - config.beta1 ** step
            bc2 = 1.0 - config.beta2 ** step
            for i in range(len(weights)):
                m_w[i] = config.beta1 * m_w[i] + (1 - config.beta1) * gw[i]
                v_w[i] = config.beta2 * v_w[i] + (1 - config.beta2) * gw[i] ** 2
                weights[i] -= lr * (m_w[i] / bc1) / (np.sqrt(v_w[i] / bc2) + config.epsilon)
                m_b[i] = config.beta1 * m_b[i] + (1 - config.beta1) * gb[i]
                v_b[i] = config.beta2 * v_b[i] + (1 - config.beta2) * gb[i] ** 2
                biases[i] -= lr * (m_b[i] / bc1) / (np.sqrt(v_b[i] / bc2) + config.epsilon)
            epoch_loss += loss
            n_batches += 1
        losses.append(epoch_loss / n_batches)

    return DistanceModel(weights, biases, config, losses)


def predict_rows(model: DistanceModel, x: np.ndarray) -> tuple[list[DistanceClass], np.ndarray]:
    """Per-row (class, probability) predictions; ties go to the smaller class."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ValueError(f"expected (n, {model.input_dim}) input, got {x.shape}")
    _, logits = _forward(model.weights, model.biases, x)
    probs = _softmax(logits)
    best = np.argmax(logits, axis=1)  # first maximum = smallest class on ties
    return [DISTANCE_CLASSES[i] for i in best], probs


def aggregate_event(row_predictions) -> DistanceClass:
    """Mode of the per-row classes; ties break toward the smaller distance."""
    preds = list(row_predictions)
    if not preds:
        raise ValueError("cannot aggregate an empty prediction list")
    best = None
    best_count = -1
    for cls in DISTANCE_CLASSES:  # ascending metres, so first max wins ties
        count = sum(1 for p in preds if p is cls)
        if count > best_count:
            best, best_count = cls, count
    return best


def select_look(rows, mode: str):
    """Subset FeatureRows to the first look, last look, or the whole event."""
    if mode not in ("first", "last", "full"):
        raise ValueError(f"unknown look mode {mode!r}")
    rows = list(rows)
    if not rows:
        raise ValueError("cannot select from zero rows")
    if mode == "full":
        return rows
    indices = [r.look_index for r in rows]
    wanted = min(indices) if mode == "first" else max(indices)
    return [r for r in rows if r.look_index == wanted]
