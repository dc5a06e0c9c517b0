"""Linear one-vs-all soft-margin SVM trained by dual coordinate ascent.

Each of the K classes gets a binary hinge-loss problem (class positive,
rest negative) solved in the dual with box constraints [0, c]. The bias is
an augmented constant-1 feature component, so it is regularized along with
the weights. Passes visit samples in a shuffled order drawn from a generator
seeded only by the configuration, making training deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._ioutil import fmt17
from .errors import DimensionMismatch, EmptyClass, NonFinite, SingleClass

DEFAULT_C_GRID = (0.1, 1.0, 10.0, 100.0)

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    """Soft-margin trade-off and stopping rule for the dual solver."""

    c: float = 1.0
    tolerance: float = 1e-4
    max_passes: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_passes < 1:
            raise ValueError(f"maxPasses must be >= 1, got {self.max_passes}")


@dataclass(frozen=True)
class LinearOvaModel:
    """One row of weights and one bias per class; predicts by argmax."""

    class_labels: tuple
    weights: np.ndarray
    biases: np.ndarray
    c: float
    feature_dim: int

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        b = np.ascontiguousarray(self.biases, dtype=np.float64)
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)
        object.__setattr__(self, "class_labels", tuple(self.class_labels))


def train_binary(features, y, cfg):
    """Solve one binary soft-margin problem; returns (w, bias, duals).

    ``features`` is d x N, ``y`` holds +1/-1 labels. The dual box-constrained
    problem is optimized coordinate-wise until the largest projected-gradient
    violation within a pass drops to ``cfg.tolerance`` or ``cfg.max_passes``
    passes have run. Duals come back for KKT/duality-gap inspection.

    The solver centers features on their mean and augments them with a
    constant-1 component (regularized bias); the centering shift is folded
    back into the returned bias, so (w, bias) is an ordinary affine model
    over the raw input features. Without the centering, feature clouds far
    from the origin make the dual Gram matrix nearly rank-one and stall
    coordinate ascent.
    """
    d, n = features.shape
    mean = features.mean(axis=1)
    # row i = y_i * centered-augmented sample i, contiguous for the hot loop
    signed = np.empty((n, d + 1))
    signed[:, :d] = (features.T - mean) * y[:, None]
    signed[:, d] = y
    sq_norms = np.einsum("ij,ij->i", signed, signed)
    alpha = np.zeros(n)
    w = np.zeros(d + 1)
    rng = np.random.default_rng(cfg.seed)
    c = cfg.c

    for _ in range(cfg.max_passes):
        worst = 0.0
        for i in rng.permutation(n):
            g = float(w @ signed[i]) - 1.0
            a = alpha[i]
            if a <= 0.0:
                pg = min(g, 0.0)
            elif a >= c:
                pg = max(g, 0.0)
            else:
                pg = g
            if pg != 0.0:
                worst = max(worst, abs(pg))
                new_a = min(max(a - g / sq_norms[i], 0.0), c)
                if new_a != a:
                    w += (new_a - a) * signed[i]
                    alpha[i] = new_a
        if worst <= cfg.tolerance:
            break
    return w[:d], float(w[d] - w[:d] @ mean), alpha


def train_ova(features, labels, cfg=TrainConfig(), class_labels=None):
    """Train K binary classifiers, one per class in first-appearance order.

    Parameters
    ----------
    features : ndarray, shape (d, N)
        One column per training sample.
    labels : sequence of length N
    cfg : TrainConfig
    class_labels : sequence, optional
        Explicit class order; every listed class must appear in ``labels``.

    Raises
    ------
    SingleClass
        Fewer than two distinct labels.
    EmptyClass
        An explicitly requested class has no samples.
    NonFinite
        Features contain NaN or infinity.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = list(labels)
    if features.ndim != 2 or features.shape[1] != len(labels):
        raise DimensionMismatch(
            f"features {features.shape} do not match {len(labels)} labels"
        )
    if features.shape[1] < 2:
        raise SingleClass("need at least two training samples")
    if not np.isfinite(features).all():
        raise NonFinite("features contain non-finite values")

    if class_labels is None:
        class_labels = list(dict.fromkeys(labels))
    else:
        class_labels = list(class_labels)
        present = set(labels)
        for cls in class_labels:
            if cls not in present:
                raise EmptyClass(f"class {cls!r} has no training samples")
    if len(class_labels) < 2:
        raise SingleClass(f"need >= 2 distinct classes, got {class_labels!r}")

    d = features.shape[0]
    weights = np.empty((len(class_labels), d))
    biases = np.empty(len(class_labels))
    label_arr = np.array(labels, dtype=object)
    for k, cls in enumerate(class_labels):
        y = np.where(label_arr == cls, 1.0, -1.0)
        weights[k], biases[k], _ = train_binary(features, y, cfg)
    return LinearOvaModel(
        class_labels=tuple(class_labels),
        weights=weights,
        biases=biases,
        c=cfg.c,
        feature_dim=d,
    )


def decision_values(model, x):
    """Per-class affine scores ``w_k . x + b_k`` for one feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.feature_dim,):
        raise DimensionMismatch(f"expected a length-{model.feature_dim} vector, got {x.shape}")
    return model.weights @ x + model.biases


def predict(model, x):
    """Label of the largest decision value; ties go to the lowest index."""
    return model.class_labels[int(np.argmax(decision_values(model, x)))]


def predict_columns(model, x):
    """Vectorized :func:`predict` over the columns of a d x K matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != model.feature_dim:
        raise DimensionMismatch(f"expected {model.feature_dim} x K matrix, got {x.shape}")
    scores = model.weights @ x + model.biases[:, None]
    return [model.class_labels[i] for i in np.argmax(scores, axis=0)]


def model_to_json(model):
    """Versioned JSON-able dict; weights row-major at full precision."""
    return {
        "version": MODEL_FORMAT_VERSION,
        "classLabels": list(model.class_labels),
        "c": model.c,
        "featureDim": model.feature_dim,
        "weights": [float(fmt17(v)) for v in model.weights.ravel(order="C")],
        "biases": [float(fmt17(v)) for v in model.biases],
    }


def model_from_json(doc):
    """Inverse of :func:`model_to_json`."""
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('version')!r}")
    labels = tuple(doc["classLabels"])
    dim = int(doc["featureDim"])
    return LinearOvaModel(
        class_labels=labels,
        weights=np.array(doc["weights"], dtype=np.float64).reshape(len(labels), dim),
        biases=np.array(doc["biases"], dtype=np.float64),
        c=float(doc["c"]),
        feature_dim=dim,
    )
