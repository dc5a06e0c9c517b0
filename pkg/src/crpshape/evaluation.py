"""End-to-end pipeline runs and repeated-split evaluation protocols.

Training covers graph coding, scatter construction, projection, and the SVM
(with its trade-off parameter picked on training data from a small grid);
test samples only ever pass through the fitted projection and classifier.
Splits are a deterministic function of (seed, run), so whole evaluations are
bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import coding as coding_mod
from . import projection as projection_mod
from . import svm as svm_mod
from .errors import ClassTooSmall, DimensionMismatch, ZeroDescriptor
from .spectral import DEFAULT_BASELINE_DIM
from .svm import DEFAULT_C_GRID, TrainConfig


@dataclass(frozen=True)
class LabeledDataset:
    """Normalized descriptor columns with labels and shape names."""

    descriptors: np.ndarray
    labels: tuple
    names: tuple
    descriptor_kind: str = ""

    def __post_init__(self):
        x = np.array(self.descriptors, dtype=np.float64, order="C")
        labels = tuple(self.labels)
        names = tuple(self.names)
        if x.ndim != 2:
            raise DimensionMismatch(f"descriptors must be m x N, got {x.shape}")
        if not len(labels) == len(names) == x.shape[1]:
            raise DimensionMismatch(
                f"{x.shape[1]} descriptor columns, {len(labels)} labels, {len(names)} names"
            )
        counts = {}
        for lab in labels:
            counts[lab] = counts.get(lab, 0) + 1
        small = [lab for lab, c in counts.items() if c < 2]
        if small:
            raise ClassTooSmall(f"classes with fewer than 2 members: {small!r}")
        x.flags.writeable = False
        object.__setattr__(self, "descriptors", x)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "names", names)

    @property
    def n(self):
        return self.descriptors.shape[1]

    @property
    def m(self):
        return self.descriptors.shape[0]

    def class_order(self):
        """Distinct labels in first-appearance order."""
        return tuple(dict.fromkeys(self.labels))


@dataclass(frozen=True)
class SplitProtocol:
    """Repeated random-fraction or k-fold splitting, stratified by default."""

    mode: str = "fraction"
    train_fraction: float | None = 0.7
    folds: int | None = None
    repetitions: int = 1
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if self.mode not in ("fraction", "kfold"):
            raise ValueError(f"mode must be 'fraction' or 'kfold', got {self.mode!r}")
        if self.mode == "fraction":
            if self.train_fraction is None or not 0.0 < self.train_fraction < 1.0:
                raise ValueError(f"trainFraction must lie in (0, 1), got {self.train_fraction}")
        else:
            if self.folds is None or self.folds < 2:
                raise ValueError(f"kfold mode needs folds >= 2, got {self.folds}")
        if self.repetitions < 1:
            raise ValueError(f"repetitions must be >= 1, got {self.repetitions}")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one training run needs besides the data."""

    variant: str = "crp"
    coding_method: str = "nnls"
    ridge_lambda: float | None = None
    d: int = projection_mod.DEFAULT_OUTPUT_DIM
    epsilon_reg: float = projection_mod.EPSILON_REG_DEFAULT
    baseline_dim: int = DEFAULT_BASELINE_DIM
    svm: TrainConfig = field(default_factory=TrainConfig)
    c_grid: tuple = DEFAULT_C_GRID

    def __post_init__(self):
        if self.variant not in ("crp", "baseline"):
            raise ValueError(f"variant must be 'crp' or 'baseline', got {self.variant!r}")
        if self.coding_method not in ("l2", "nnls"):
            raise ValueError(f"coding method must be 'l2' or 'nnls', got {self.coding_method!r}")
        if self.ridge_lambda is not None and not self.ridge_lambda > 0:
            raise ValueError(f"lambda must be positive, got {self.ridge_lambda}")
        if self.d < 1 or self.baseline_dim < 1:
            raise ValueError("output dimensions must be positive")
        if not self.c_grid:
            raise ValueError("c grid must not be empty")


@dataclass(frozen=True)
class FittedPipeline:
    """Artifacts of one training phase; functions of the train split only."""

    variant: str
    coding: coding_mod.CodingMatrix | None
    projection: projection_mod.ProjectionMatrix | None
    model: svm_mod.LinearOvaModel
    selected_c: float
    baseline_dim: int | None


@dataclass(frozen=True)
class EvaluationReport:
    """Accuracy statistics and the pooled confusion matrix over all runs."""

    mean_accuracy: float
    std_accuracy: float
    per_run_accuracies: tuple
    per_run_c: tuple
    confusion: np.ndarray
    class_labels: tuple
    config: dict

    def __post_init__(self):
        conf = np.ascontiguousarray(self.confusion, dtype=np.int64)
        conf.flags.writeable = False
        object.__setattr__(self, "confusion", conf)
        object.__setattr__(self, "per_run_accuracies", tuple(self.per_run_accuracies))
        object.__setattr__(self, "per_run_c", tuple(self.per_run_c))
        object.__setattr__(self, "class_labels", tuple(self.class_labels))


# ---------------------------------------------------------------------------
# splitting


def _round_half_up(value):
    return int(np.floor(value + 0.5))


def _class_indices(labels):
    """Indices per class, classes in first-appearance order."""
    groups = {}
    for idx, lab in enumerate(labels):
        groups.setdefault(lab, []).append(idx)
    return groups


def split_dataset(ds, proto, run):
    """Deterministic (train, test) index arrays for one run.

    Fraction mode draws ``round_half_up(trainFraction * n_k)`` training
    members per class when stratified; k-fold mode cycles through folds as
    ``run`` advances (``run % folds`` selects the fold, ``run // folds`` the
    reshuffle). Both sides are returned sorted, disjoint, and covering.
    """
    if not 0 <= run < proto.repetitions:
        raise ValueError(f"run {run} outside [0, {proto.repetitions})")
    n = ds.n

    if proto.mode == "fraction":
        rng = np.random.default_rng([proto.seed, run])
        train, test = [], []
        if proto.stratified:
            for lab, idx in _class_indices(ds.labels).items():
                perm = rng.permutation(idx)
                take = _round_half_up(proto.train_fraction * len(idx))
                if take == 0 or take == len(idx):
                    raise ClassTooSmall(
                        f"class {lab!r} with {len(idx)} members cannot split at "
                        f"fraction {proto.train_fraction}"
                    )
                train.extend(perm[:take])
                test.extend(perm[take:])
        else:
            perm = rng.permutation(n)
            take = _round_half_up(proto.train_fraction * n)
            if take == 0 or take == n:
                raise ClassTooSmall(
                    f"{n} samples cannot split at fraction {proto.train_fraction}"
                )
            train, test = perm[:take], perm[take:]
    else:
        fold = run % proto.folds
        cycle = run // proto.folds
        rng = np.random.default_rng([proto.seed, cycle])
        train, test = [], []
        if proto.stratified:
            for lab, idx in _class_indices(ds.labels).items():
                if len(idx) < proto.folds:
                    raise ClassTooSmall(
                        f"class {lab!r} has {len(idx)} members for {proto.folds} folds"
                    )
                perm = rng.permutation(idx)
                test.extend(perm[fold::proto.folds])
                train.extend(np.delete(perm, np.s_[fold::proto.folds]))
        else:
            perm = rng.permutation(n)
            test = perm[fold::proto.folds]
            train = np.delete(perm, np.s_[fold::proto.folds])

    return np.sort(np.asarray(train, dtype=np.intp)), np.sort(np.asarray(test, dtype=np.intp))


# ---------------------------------------------------------------------------
# single pipeline run


def truncate_renormalize(x, dim):
    """First ``dim`` descriptor components, renormalized to unit columns."""
    x = np.asarray(x, dtype=np.float64)
    dim = min(dim, x.shape[0])
    out = x[:dim].copy()
    norms = np.linalg.norm(out, axis=0)
    if (norms == 0).any():
        raise ZeroDescriptor("truncation produced an all-zero descriptor")
    return out / norms


def _select_svm(features, labels, cfg):
    """Grid-search c on training accuracy; first strict improvement wins."""
    best = None
    for c in cfg.c_grid:
        model = svm_mod.train_ova(features, labels, replace(cfg.svm, c=c))
        correct = sum(
            pred == lab
            for pred, lab in zip(svm_mod.predict_columns(model, features), labels)
        )
        if best is None or correct > best[0]:
            best = (correct, model, c)
    return best[1], best[2]


def fit_pipeline(ds, train_idx, cfg):
    """Train on the given indices only; test data never enters here."""
    train_idx = np.asarray(train_idx, dtype=np.intp)
    x_train = ds.descriptors[:, train_idx]
    labels_train = [ds.labels[i] for i in train_idx]

    if cfg.variant == "crp":
        dictionary = coding_mod.Dictionary(
            columns=x_train, names=tuple(ds.names[i] for i in train_idx)
        )
        w = coding_mod.build_coding_matrix(dictionary, cfg.coding_method, cfg.ridge_lambda)
        pair = projection_mod.scatter_pair(x_train, w)
        pm = projection_mod.solve_projection(pair, cfg.d, cfg.epsilon_reg)
        feats = projection_mod.project(pm, x_train)
        model, chosen_c = _select_svm(feats, labels_train, cfg)
        return FittedPipeline(
            variant="crp", coding=w, projection=pm, model=model,
            selected_c=chosen_c, baseline_dim=None,
        )

    feats = truncate_renormalize(x_train, cfg.baseline_dim)
    model, chosen_c = _select_svm(feats, labels_train, cfg)
    return FittedPipeline(
        variant="baseline", coding=None, projection=None, model=model,
        selected_c=chosen_c, baseline_dim=min(cfg.baseline_dim, ds.m),
    )


def apply_pipeline(fitted, x):
    """Map raw descriptor columns into the fitted feature space."""
    if fitted.variant == "crp":
        return projection_mod.project(fitted.projection, x)
    return truncate_renormalize(x, fitted.baseline_dim)


def _score(fitted, ds, test_idx, class_order):
    feats = apply_pipeline(fitted, ds.descriptors[:, np.asarray(test_idx, dtype=np.intp)])
    predictions = svm_mod.predict_columns(fitted.model, feats)
    index = {lab: i for i, lab in enumerate(class_order)}
    confusion = np.zeros((len(class_order), len(class_order)), dtype=np.int64)
    correct = 0
    for pred, i in zip(predictions, test_idx):
        truth = ds.labels[i]
        confusion[index[truth], index[pred]] += 1
        correct += pred == truth
    return correct / len(test_idx), confusion


def run_pipeline(ds, train_idx, test_idx, cfg):
    """Fit on train indices, score on test indices.

    Returns (accuracy, confusion); the confusion matrix is indexed by the
    dataset-wide class order, rows true and columns predicted.
    """
    accuracy, confusion, _ = run_pipeline_detailed(ds, train_idx, test_idx, cfg)
    return accuracy, confusion


def run_pipeline_detailed(ds, train_idx, test_idx, cfg):
    """Like :func:`run_pipeline` but also returns the fitted artifacts.

    Keeping the index sets disjoint is the caller's job (splits from
    :func:`split_dataset` always are); evaluating on training indices is
    allowed as a memorization check.
    """
    train_idx = np.asarray(train_idx, dtype=np.intp)
    test_idx = np.asarray(test_idx, dtype=np.intp)
    if len(test_idx) == 0 or len(train_idx) == 0:
        raise ValueError("train and test index sets must be nonempty")
    fitted = fit_pipeline(ds, train_idx, cfg)
    accuracy, confusion = _score(fitted, ds, test_idx, ds.class_order())
    return accuracy, confusion, fitted


# ---------------------------------------------------------------------------
# protocols


def mean_and_population_std(values):
    """Mean and population standard deviation, summed in the given order so
    repeated evaluations stay bit-identical."""
    values = list(values)
    mean = sum(values) / len(values)
    std = (sum((v - mean) ** 2 for v in values) / len(values)) ** 0.5
    return mean, std


def _config_echo(ds, proto, cfg):
    return {
        "variant": cfg.variant,
        "codingMethod": cfg.coding_method,
        "descriptorKind": ds.descriptor_kind,
        "d": cfg.d,
        "lambda": cfg.ridge_lambda,
        "epsilonReg": cfg.epsilon_reg,
        "baselineDim": cfg.baseline_dim,
        "cGrid": list(cfg.c_grid),
        "protocol": {
            "mode": proto.mode,
            "trainFraction": proto.train_fraction,
            "folds": proto.folds,
            "repetitions": proto.repetitions,
            "seed": proto.seed,
            "stratified": proto.stratified,
        },
    }


def evaluate(ds, proto, cfg):
    """Run every repetition and pool the results.

    Accuracies are averaged in run order (population standard deviation),
    confusion matrices are summed, so repeated invocations are bit-identical.
    """
    class_order = ds.class_order()
    accuracies = []
    selected = []
    confusion = np.zeros((len(class_order), len(class_order)), dtype=np.int64)
    for run in range(proto.repetitions):
        train_idx, test_idx = split_dataset(ds, proto, run)
        acc, conf, fitted = run_pipeline_detailed(ds, train_idx, test_idx, cfg)
        accuracies.append(acc)
        selected.append(fitted.selected_c)
        confusion += conf
    mean, std = mean_and_population_std(accuracies)
    return EvaluationReport(
        mean_accuracy=mean,
        std_accuracy=std,
        per_run_accuracies=accuracies,
        per_run_c=selected,
        confusion=confusion,
        class_labels=class_order,
        config=_config_echo(ds, proto, cfg),
    )


def sweep_dimension(ds, proto, cfg, d_values):
    """Mean/std accuracy per output dimension, with splits shared across
    the swept values for paired comparison.

    Returns a list of ``(d, meanAccuracy, stdAccuracy)`` tuples in the
    requested order. Coding and scatter matrices are reused across ``d``
    within each run; only the projection and classifier are refit.
    """
    d_values = [int(d) for d in d_values]
    if not d_values:
        return []
    if max(d_values) > ds.m:
        raise DimensionMismatch(
            f"swept dimension {max(d_values)} exceeds descriptor dimension {ds.m}"
        )
    per_d = {d: [] for d in d_values}
    for run in range(proto.repetitions):
        train_idx, test_idx = split_dataset(ds, proto, run)
        if cfg.variant == "crp":
            x_train = ds.descriptors[:, train_idx]
            labels_train = [ds.labels[i] for i in train_idx]
            dictionary = coding_mod.Dictionary(
                columns=x_train, names=tuple(ds.names[i] for i in train_idx)
            )
            w = coding_mod.build_coding_matrix(dictionary, cfg.coding_method, cfg.ridge_lambda)
            pair = projection_mod.scatter_pair(x_train, w)
            for d in d_values:
                pm = projection_mod.solve_projection(pair, d, cfg.epsilon_reg)
                feats = projection_mod.project(pm, x_train)
                model, chosen_c = _select_svm(feats, labels_train, cfg)
                fitted = FittedPipeline(
                    variant="crp", coding=w, projection=pm, model=model,
                    selected_c=chosen_c, baseline_dim=None,
                )
                acc, _ = _score(fitted, ds, test_idx, ds.class_order())
                per_d[d].append(acc)
        else:
            for d in d_values:
                acc, _, _ = run_pipeline_detailed(
                    ds, train_idx, test_idx, replace(cfg, baseline_dim=d)
                )
                per_d[d].append(acc)
    rows = []
    for d in d_values:
        mean, std = mean_and_population_std(per_d[d])
        rows.append((d, mean, std))
    return rows
