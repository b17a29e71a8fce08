"""Stage 1: multiclass gradient boosting that predicts the receiver's facing
angle (8 classes, 45 degree steps) from attitude and magnetic-field readings.

Plain first-order softmax boosting: each round fits one regression tree per
class to the residual (one-hot minus softmax probability) and adds it with
shrinkage. For learning rates <= 1 the training log-loss is provably
non-increasing, which training asserts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .trees import RegressionTree, fit_tree

ANGLE_LABELS = tuple(range(0, 360, 45))
_N_CLASSES = len(ANGLE_LABELS)

#: FeatureRow attributes consumed by the model, z-scored before fitting.
ANGLE_FEATURES = (
    "att_roll", "att_pitch", "att_yaw",
    "mag_x", "mag_y", "mag_z",
)

_LOSS_SLACK = 1e-9
_PRIOR_FLOOR = 1e-12


@dataclass(frozen=True)
class GBCConfig:
    n_estimators: int = 100
    learning_rate: float = 0.2
    max_depth: int = 3
    min_samples_leaf: int = 5
    seed: int = 0  # kept for interface stability; exact greedy fitting draws nothing

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")


@dataclass
class AngleModel:
    config: GBCConfig
    feature_means: np.ndarray  # (6,)
    feature_stds: np.ndarray   # (6,) zero-variance features carry std 1.0
    init_scores: np.ndarray    # (8,) prior log-probabilities
    rounds: list[list[RegressionTree]]  # n_estimators rounds of 8 trees
    train_losses: list[float]

    def to_dict(self) -> dict:
        return {
            "kind": "angle_model",
            "class_labels": list(ANGLE_LABELS),
            "feature_names": list(ANGLE_FEATURES),
            "config": {
                "n_estimators": self.config.n_estimators,
                "learning_rate": self.config.learning_rate,
                "max_depth": self.config.max_depth,
                "min_samples_leaf": self.config.min_samples_leaf,
                "seed": self.config.seed,
            },
            "feature_means": self.feature_means.tolist(),
            "feature_stds": self.feature_stds.tolist(),
            "init_scores": self.init_scores.tolist(),
            "trees": [[t.to_node_list() for t in rnd] for rnd in self.rounds],
            "train_losses": self.train_losses,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AngleModel":
        if doc.get("kind") != "angle_model":
            raise ValueError("not an angle model document")
        if tuple(doc["class_labels"]) != ANGLE_LABELS:
            raise ValueError("unexpected angle label set")
        return cls(
            config=GBCConfig(**doc["config"]),
            feature_means=np.asarray(doc["feature_means"], dtype=np.float64),
            feature_stds=np.asarray(doc["feature_stds"], dtype=np.float64),
            init_scores=np.asarray(doc["init_scores"], dtype=np.float64),
            rounds=[[RegressionTree.from_node_list(nodes) for nodes in rnd] for rnd in doc["trees"]],
            train_losses=[float(v) for v in doc["train_losses"]],
        )


def angle_feature_matrix(rows) -> np.ndarray:
    """Raw (n, 6) attitude + magnetic-field matrix from FeatureRows."""
    out = np.empty((len(rows), len(ANGLE_FEATURES)), dtype=np.float64)
    for i, row in enumerate(rows):
        out[i, 0:3] = row.attitude
        out[i, 3:6] = row.magnetic_field
    return out


def _softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _log_loss(scores: np.ndarray, label_idx: np.ndarray) -> float:
    z = scores - scores.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    picked = z[np.arange(scores.shape[0]), label_idx]
    return float(np.mean(log_norm - picked))


def label_indices(labels_deg) -> np.ndarray:
    idx = np.empty(len(labels_deg), dtype=np.int64)
    for i, deg in enumerate(labels_deg):
        if int(deg) not in ANGLE_LABELS:
            raise ValueError(f"angle label {deg} outside the 45-degree grid")
        idx[i] = int(deg) // 45
    return idx


def fit_gbc(x: np.ndarray, label_idx: np.ndarray, config: GBCConfig) -> AngleModel:
    """Train on a raw feature matrix; normalization is fitted here and stored."""
    if x.shape[0] == 0:
        raise ValueError("cannot train on zero rows")
    x = np.asarray(x, dtype=np.float64)

    means = x.mean(axis=0)
    stds = x.std(axis=0)
    stds = np.where(stds > 0.0, stds, 1.0)
    xn = (x - means) / stds

    counts = np.bincount(label_idx, minlength=_N_CLASSES).astype(np.float64)
    priors = counts / counts.sum()
    init = np.log(np.maximum(priors, _PRIOR_FLOOR))

    n = x.shape[0]
    scores = np.tile(init, (n, 1))
    onehot = np.zeros((n, _N_CLASSES), dtype=np.float64)
    onehot[np.arange(n), label_idx] = 1.0

    rounds: list[list[RegressionTree]] = []
    losses = [_log_loss(scores, label_idx)]
    for _ in range(config.n_estimators):
        probs = _softmax(scores)
        residual = onehot - probs
        round_trees: list[RegressionTree] = []
        for k in range(_N_CLASSES):
            tree, pred = fit_tree(xn, residual[:, k], config.max_depth, config.min_samples_leaf)
            scores[:, k] += config.learning_rate * pred
            round_trees.append(tree)
        rounds.append(round_trees)
        loss = _log_loss(scores, label_idx)
        if loss > losses[-1] + _LOSS_SLACK:
            raise RuntimeError(
                f"boosting log-loss increased ({losses[-1]:.12f} -> {loss:.12f})"
            )
        losses.append(loss)

    return AngleModel(config, means, stds, init, rounds, losses)


def train_angle(rows, labels_deg, config: GBCConfig) -> AngleModel:
    """Train from FeatureRows and per-row angle labels in degrees."""
    if len(rows) == 0:
        raise ValueError("cannot train on zero rows")
    if len(rows) != len(labels_deg):
        raise ValueError("rows and labels differ in length")
    return fit_gbc(angle_feature_matrix(rows), label_indices(labels_deg), config)


def decision_scores(model: AngleModel, x: np.ndarray) -> np.ndarray:
    """Accumulated per-class scores for a raw (n, 6) matrix."""
    xn = (np.asarray(x, dtype=np.float64) - model.feature_means) / model.feature_stds
    scores = np.tile(model.init_scores, (xn.shape[0], 1))
    lr = model.config.learning_rate
    for round_trees in model.rounds:
        for k, tree in enumerate(round_trees):
            scores[:, k] += lr * tree.predict(xn)
    return scores


def predict_angles(model: AngleModel, rows) -> tuple[np.ndarray, np.ndarray]:
    """Per-row (angles_deg, probabilities) for a list of FeatureRows."""
    scores = decision_scores(model, angle_feature_matrix(rows))
    probs = _softmax(scores)
    # argmax takes the first maximum, i.e. ties break toward the smaller angle
    best = np.argmax(scores, axis=1)
    angles = np.asarray(ANGLE_LABELS, dtype=np.int64)[best]
    return angles, probs


def predict_angle(model: AngleModel, row) -> tuple[int, np.ndarray]:
    angles, probs = predict_angles(model, [row])
    return int(angles[0]), probs[0]
