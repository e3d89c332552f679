"""Modeling attacks on PUF datasets: linear SVM, MLP, boosted and bagged trees."""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field, fields

import numpy as np

from .encoding import FeatureVector, encode, encode_arrays, encode_dataset
from .linear import LinearHyper, LinearSVM
from .mlp import MLP, MlpHyper, TrainingDivergedError
from .trees import BaggedTrees, BagHyper, BoostedTrees, BoostHyper


class ModelKind(enum.Enum):
    LINEAR = "linear"
    MLP = "mlp"
    BOOSTED = "boosted"
    BAGGED = "bagged"

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown model kind {value!r}; expected one of "
                             f"{[k.value for k in cls]}") from None


_MODELS = {
    ModelKind.LINEAR: (LinearSVM, LinearHyper),
    ModelKind.MLP: (MLP, MlpHyper),
    ModelKind.BOOSTED: (BoostedTrees, BoostHyper),
    ModelKind.BAGGED: (BaggedTrees, BagHyper),
}


def make_hyper(kind, overrides: dict | None = None, seed: int | None = None):
    kind = ModelKind.parse(kind)
    hyper_cls = _MODELS[kind][1]
    overrides = dict(overrides or {})
    known = {f.name for f in fields(hyper_cls)}
    unknown = set(overrides) - known
    if unknown:
        raise ValueError(f"unknown {kind.value} hyperparameters: {sorted(unknown)}")
    if "hidden" in overrides:
        overrides["hidden"] = tuple(overrides["hidden"])
    if seed is not None:
        overrides["seed"] = seed
    return hyper_cls(**overrides)


def _as_arrays(train):
    if isinstance(train, tuple):
        return train
    x = np.stack([fv.values for fv in train])
    y = np.array([fv.label for fv in train])
    return x, y


def _check_train(y):
    if len(y) < 2:
        raise ValueError("need at least two training examples")


def train_linear(train, hyper: LinearHyper | None = None) -> LinearSVM:
    x, y = _as_arrays(train)
    _check_train(y)
    return LinearSVM(hyper).fit(x, y)


def train_mlp(train, hyper: MlpHyper | None = None) -> MLP:
    x, y = _as_arrays(train)
    _check_train(y)
    return MLP(hyper).fit(x, y)


def train_trees(train, hyper=None, mode: str = "boosted"):
    x, y = _as_arrays(train)
    _check_train(y)
    if mode == "boosted":
        return BoostedTrees(hyper).fit(x, y)
    if mode == "bagged":
        return BaggedTrees(hyper).fit(x, y)
    raise ValueError(f"tree mode must be 'boosted' or 'bagged', got {mode!r}")


def train_model(kind, x, y, hyper=None):
    kind = ModelKind.parse(kind)
    model_cls, hyper_cls = _MODELS[kind]
    return model_cls(hyper or hyper_cls()).fit(x, y)


@dataclass
class AttackReport:
    model_kind: str
    n_train: int
    n_test: int
    fold_accuracies: list
    mlaa: float
    # wall-clock time varies run to run, so it is left out of equality
    train_seconds: float = field(compare=False)
    constant_predictor: bool = False
    # bookkeeping for leakage checks; not serialized
    folds: list = field(default_factory=list, repr=False, compare=False)

    CSV_FIELDS = ("model_kind", "n_train", "n_test", "k", "mlaa", "fold_accuracies", "train_seconds",
                  "constant_predictor")

    def csv_row(self) -> dict:
        return {"model_kind": self.model_kind, "n_train": self.n_train, "n_test": self.n_test,
                "k": len(self.fold_accuracies), "mlaa": f"{self.mlaa:.6f}",
                "fold_accuracies": ";".join(f"{a:.6f}" for a in self.fold_accuracies),
                "train_seconds": f"{self.train_seconds:.3f}",
                "constant_predictor": int(self.constant_predictor)}


def stratified_folds(y: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    """Split indices into ``k`` folds with per-class round-robin after a seeded shuffle."""
    gen = np.random.default_rng(seed)
    assign = np.empty(len(y), dtype=np.int64)
    offset = 0
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[gen.permutation(len(idx))]
        assign[idx] = (np.arange(len(idx)) + offset) % k
        offset += len(idx)
    return [np.flatnonzero(assign == f) for f in range(k)]


def _attack_arrays(dataset, valid_only: bool | None, pair_encoding: str):
    if isinstance(dataset, tuple):
        return dataset
    if valid_only is None:
        valid_only = dataset.config.v_ctrl > 0
    if valid_only:
        dataset = dataset.valid_only()
    return encode_dataset(dataset, pair_encoding)


def cross_validate(dataset, model_kind, k: int = 5, seed: int = 0, hyper=None,
                   valid_only: bool | None = None, pair_encoding: str = "auto") -> AttackReport:
    """Stratified k-fold MLAA. Trains on valid CRPs only when v_ctrl > 0 unless told otherwise.

    ``dataset`` is a :class:`~rnnpuf.core.Dataset` or an already encoded ``(x, y)`` tuple.
    """
    kind = ModelKind.parse(model_kind)
    if k < 2:
        raise ValueError("need k >= 2 folds")
    x, y = _attack_arrays(dataset, valid_only, pair_encoding)
    if len(y) < k:
        raise ValueError(f"dataset of {len(y)} records is smaller than k={k}")
    folds = stratified_folds(y, k, seed)
    accs, seconds, constant, n_train = [], 0.0, False, 0
    for f, test in enumerate(folds):
        train = np.concatenate([folds[j] for j in range(k) if j != f])
        start = time.perf_counter()
        model = train_model(kind, x[train], y[train], hyper)
        seconds += time.perf_counter() - start
        constant |= model.constant is not None
        accs.append(float(np.mean(model.predict(x[test]) == y[test])))
        n_train = len(train)
    return AttackReport(kind.value, n_train, len(folds[0]), accs, float(np.mean(accs)), seconds,
                        constant, folds)


def learning_curve(dataset, model_kind, train_sizes, seed: int = 0, hyper=None,
                   test_size: int | None = None, valid_only: bool | None = None,
                   pair_encoding: str = "auto") -> list[tuple[int, float]]:
    """Accuracy vs. training-set size on one fixed held-out set."""
    kind = ModelKind.parse(model_kind)
    train_sizes = [int(s) for s in train_sizes]
    if not train_sizes or min(train_sizes) < 1:
        raise ValueError("training sizes must be positive")
    x, y = _attack_arrays(dataset, valid_only, pair_encoding)
    largest = max(train_sizes)
    if test_size is None:
        test_size = min(len(y) - largest, 10000)
    if test_size < 1 or largest + test_size > len(y):
        raise ValueError(f"need {largest} training + {test_size} test records, have {len(y)}")
    order = np.random.default_rng(seed).permutation(len(y))
    test = order[len(y) - test_size:]
    curve = []
    for size in train_sizes:
        train = order[:size]
        model = train_model(kind, x[train], y[train], hyper)
        curve.append((size, float(np.mean(model.predict(x[test]) == y[test]))))
    return curve
