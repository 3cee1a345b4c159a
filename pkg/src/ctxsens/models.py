"""Sensitivity regressors behind one train/predict/persist contract.

Families: a constant-mean baseline, a seeded uniform-random baseline, ridge
regression, a linear epsilon-insensitive SVR trained by stochastic
subgradient descent, a random forest of CART regression trees, and an
adapter for external scorers speaking the NDJSON protocol.

All predictions are clamped to [-1, 1]. Training is fully deterministic:
identical family, hyperparameters, seed, and training data produce
bit-identical model files.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import struct
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import sparse

from .features import FeatureConfig, FeatureVector, Vocabulary, fit_vocabulary, to_csr, transform_many
from .scorer import ExternalScorerClient, ScorerEndpoint, ScorerError

FAMILY_CONSTANT_MEAN = "constant_mean"
FAMILY_UNIFORM_RANDOM = "uniform_random"
FAMILY_RIDGE = "ridge"
FAMILY_LINEAR_SVR = "linear_svr"
FAMILY_RANDOM_FOREST = "random_forest"
FAMILY_EXTERNAL = "external"

FAMILIES = (
    FAMILY_CONSTANT_MEAN,
    FAMILY_UNIFORM_RANDOM,
    FAMILY_RIDGE,
    FAMILY_LINEAR_SVR,
    FAMILY_RANDOM_FOREST,
    FAMILY_EXTERNAL,
)

FAMILY_ALIASES = {
    "b1": FAMILY_CONSTANT_MEAN,
    "constant": FAMILY_CONSTANT_MEAN,
    "b2": FAMILY_UNIFORM_RANDOM,
    "random": FAMILY_UNIFORM_RANDOM,
    "lr": FAMILY_RIDGE,
    "svr": FAMILY_LINEAR_SVR,
    "rf": FAMILY_RANDOM_FOREST,
}


def resolve_family(name: str) -> str:
    name = name.lower()
    name = FAMILY_ALIASES.get(name, name)
    if name not in FAMILIES:
        raise TrainingError(f"unknown model family {name!r}; expected one of {FAMILIES}")
    return name


class TrainingError(ValueError):
    pass


class PredictionError(RuntimeError):
    pass


class ModelPersistenceError(RuntimeError):
    pass


class ChecksumError(ModelPersistenceError):
    pass


class VersionError(ModelPersistenceError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for all families; unused fields are ignored per family."""

    seed: int = 0
    features: FeatureConfig = field(default_factory=FeatureConfig)
    patience: int = 5
    ridge_lambda: float = 1.0
    ridge_tol: float = 1e-10
    ridge_max_iter: int = 1000
    svr_epsilon: float = 0.05
    svr_learning_rate: float = 0.01
    svr_c: float = 1.0
    svr_max_epochs: int = 100
    svr_batch_size: int = 32
    rf_n_trees: int = 100
    rf_max_depth: int | None = 12
    rf_min_samples_leaf: int = 5
    rf_max_features: int | str = "sqrt"
    rf_bootstrap: bool = True
    external: ScorerEndpoint | None = None

    def __post_init__(self) -> None:
        if self.patience < 1:
            raise TrainingError("patience must be >= 1")

    def hyperparameters(self, family: str) -> dict:
        if family == FAMILY_RIDGE:
            return {
                "ridge_lambda": self.ridge_lambda,
                "ridge_tol": self.ridge_tol,
                "ridge_max_iter": self.ridge_max_iter,
            }
        if family == FAMILY_LINEAR_SVR:
            return {
                "svr_epsilon": self.svr_epsilon,
                "svr_learning_rate": self.svr_learning_rate,
                "svr_c": self.svr_c,
                "svr_max_epochs": self.svr_max_epochs,
                "svr_batch_size": self.svr_batch_size,
                "patience": self.patience,
            }
        if family == FAMILY_RANDOM_FOREST:
            return {
                "rf_n_trees": self.rf_n_trees,
                "rf_max_depth": self.rf_max_depth,
                "rf_min_samples_leaf": self.rf_min_samples_leaf,
                "rf_max_features": self.rf_max_features,
                "rf_bootstrap": self.rf_bootstrap,
            }
        return {}


@dataclass(frozen=True)
class TrainingMetadata:
    seed: int
    hyperparameters: dict
    training_fingerprint: str
    extras: dict = field(default_factory=dict)


# --- training data normalization ---------------------------------------------


@dataclass
class _TrainingData:
    kind: str  # "text" | "vector"
    inputs: list
    y: np.ndarray
    w: np.ndarray


def _normalize_items(items: Sequence, what: str) -> _TrainingData:
    if not items:
        raise TrainingError(f"{what} set is empty")
    inputs, ys, ws = [], [], []
    for item in items:
        if len(item) == 2:
            x, y = item
            w = 1.0
        elif len(item) == 3:
            x, y, w = item
        else:
            raise TrainingError("items must be (input, target) or (input, target, weight)")
        if not -1.0 <= y <= 1.0:
            raise TrainingError(f"target {y} outside [-1, 1]")
        if w <= 0:
            raise TrainingError("weights must be positive")
        inputs.append(x)
        ys.append(float(y))
        ws.append(float(w))
    if all(isinstance(x, str) for x in inputs):
        kind = "text"
    elif all(isinstance(x, FeatureVector) for x in inputs):
        kind = "vector"
    else:
        raise TrainingError(f"{what} inputs must be all text or all FeatureVector")
    return _TrainingData(kind=kind, inputs=inputs, y=np.asarray(ys), w=np.asarray(ws))


def _fingerprint(data: _TrainingData) -> str:
    digest = hashlib.sha256()
    digest.update(data.kind.encode())
    for x, y, w in zip(data.inputs, data.y, data.w):
        if isinstance(x, str):
            digest.update(b"T")
            digest.update(x.encode("utf-8", "surrogatepass"))
        else:
            digest.update(b"V")
            digest.update(np.asarray(x.indices, dtype=np.int64).tobytes())
            digest.update(np.asarray(x.weights, dtype=np.float64).tobytes())
        digest.update(struct.pack("<dd", y, w))
        digest.update(b"\x00")
    return digest.hexdigest()


def _clamp(scores: np.ndarray) -> np.ndarray:
    return np.clip(scores, -1.0, 1.0)


# --- model classes -----------------------------------------------------------


class Model:
    """Base regressor: subclasses implement raw scoring over a batch."""

    family: str = ""

    def __init__(self, metadata: TrainingMetadata, vocab: Vocabulary | None, dimension: int | None):
        self.metadata = metadata
        self.vocab = vocab
        self.dimension = dimension

    def predict_batch(self, inputs: Sequence) -> np.ndarray:
        """Predict for a batch; outputs are clamped to [-1, 1]."""
        if len(inputs) == 0:
            return np.zeros(0)
        return _clamp(self._raw_scores(list(inputs)))

    def predict(self, x) -> float:
        return float(self.predict_batch([x])[0])

    def _raw_scores(self, inputs: list) -> np.ndarray:
        raise NotImplementedError

    def _vectors(self, inputs: list) -> sparse.csr_matrix:
        if all(isinstance(x, str) for x in inputs):
            if self.vocab is None:
                raise PredictionError(f"{self.family} model was trained on vectors; pass FeatureVector inputs")
            return to_csr(transform_many(self.vocab, inputs))
        if all(isinstance(x, FeatureVector) for x in inputs):
            matrix = to_csr(inputs)
            if self.dimension is not None and matrix.shape[1] != self.dimension:
                raise PredictionError(f"expected dimension {self.dimension}, got {matrix.shape[1]}")
            return matrix
        raise PredictionError("inputs must be all text or all FeatureVector")

    # persistence hooks
    def _param_arrays(self) -> dict[str, np.ndarray]:
        return {}

    def _extra_metadata(self) -> dict:
        return {}


class ConstantMeanModel(Model):
    family = FAMILY_CONSTANT_MEAN

    def __init__(self, mean: float, metadata: TrainingMetadata):
        super().__init__(metadata, vocab=None, dimension=None)
        self.mean = float(mean)

    def _raw_scores(self, inputs: list) -> np.ndarray:
        return np.full(len(inputs), self.mean)

    def _param_arrays(self) -> dict[str, np.ndarray]:
        return {"mean": np.array([self.mean])}


class UniformRandomModel(Model):
    """Scores drawn uniformly from [-1, 1]; the i-th score of a batch depends
    only on (seed, i), so batch prediction is pure and reproducible."""

    family = FAMILY_UNIFORM_RANDOM

    def __init__(self, metadata: TrainingMetadata):
        super().__init__(metadata, vocab=None, dimension=None)

    def _raw_scores(self, inputs: list) -> np.ndarray:
        rng = np.random.default_rng(self.metadata.seed)
        return rng.uniform(-1.0, 1.0, len(inputs))


class _LinearModel(Model):
    def __init__(
        self,
        weights: np.ndarray,
        bias: float,
        metadata: TrainingMetadata,
        vocab: Vocabulary | None,
        dimension: int,
    ):
        super().__init__(metadata, vocab, dimension)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.bias = float(bias)

    def _raw_scores(self, inputs: list) -> np.ndarray:
        matrix = self._vectors(inputs)
        return matrix @ self.weights + self.bias

    def _param_arrays(self) -> dict[str, np.ndarray]:
        return {"weights": self.weights, "bias": np.array([self.bias])}


class RidgeModel(_LinearModel):
    family = FAMILY_RIDGE


class LinearSVRModel(_LinearModel):
    family = FAMILY_LINEAR_SVR


@dataclass(frozen=True)
class _Tree:
    feature: np.ndarray  # int32; -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict_row(self, row: dict[int, float]) -> float:
        node = 0
        while self.feature[node] >= 0:
            if row.get(int(self.feature[node]), 0.0) <= self.threshold[node]:
                node = int(self.left[node])
            else:
                node = int(self.right[node])
        return float(self.value[node])


class RandomForestModel(Model):
    family = FAMILY_RANDOM_FOREST

    def __init__(
        self,
        trees: Sequence[_Tree],
        metadata: TrainingMetadata,
        vocab: Vocabulary | None,
        dimension: int,
    ):
        super().__init__(metadata, vocab, dimension)
        self.trees = list(trees)

    def predict_per_tree(self, inputs: Sequence) -> np.ndarray:
        """Unclamped per-tree scores, shape (n_trees, n_inputs)."""
        matrix = self._vectors(list(inputs)).tocsr()
        rows = []
        for i in range(matrix.shape[0]):
            start, end = matrix.indptr[i], matrix.indptr[i + 1]
            rows.append(dict(zip(matrix.indices[start:end].tolist(), matrix.data[start:end].tolist())))
        out = np.empty((len(self.trees), len(rows)))
        for t, tree in enumerate(self.trees):
            out[t] = [tree.predict_row(row) for row in rows]
        return out

    def _raw_scores(self, inputs: list) -> np.ndarray:
        return self.predict_per_tree(inputs).mean(axis=0)

    def _param_arrays(self) -> dict[str, np.ndarray]:
        arrays: dict[str, np.ndarray] = {}
        for i, tree in enumerate(self.trees):
            arrays[f"t{i}_feature"] = tree.feature
            arrays[f"t{i}_threshold"] = tree.threshold
            arrays[f"t{i}_left"] = tree.left
            arrays[f"t{i}_right"] = tree.right
            arrays[f"t{i}_value"] = tree.value
        return arrays

    def _extra_metadata(self) -> dict:
        return {"n_trees": len(self.trees)}


class ExternalModel(Model):
    """Adapter for a scorer reachable over the NDJSON protocol."""

    family = FAMILY_EXTERNAL

    def __init__(self, endpoint: ScorerEndpoint, metadata: TrainingMetadata, fit_accepted: bool | None):
        super().__init__(metadata, vocab=None, dimension=None)
        self.endpoint = endpoint
        self.fit_accepted = fit_accepted

    def _raw_scores(self, inputs: list) -> np.ndarray:
        items = []
        for i, x in enumerate(inputs):
            if isinstance(x, str):
                items.append((str(i), x, None))
            elif isinstance(x, tuple) and len(x) == 2:
                items.append((str(i), x[0], x[1]))
            else:
                raise PredictionError("external inputs must be text or (text, parent) tuples")
        with ExternalScorerClient(self.endpoint) as client:
            scores, errors = client.score_many(items, max_in_flight=self.endpoint.max_in_flight)
        if errors:
            raise PredictionError(f"external scorer failed on {len(errors)} inputs: {errors}")
        return np.array([scores[str(i)] for i in range(len(inputs))])

    def _extra_metadata(self) -> dict:
        return {"endpoint": self.endpoint.to_json(), "fit_accepted": self.fit_accepted}


# --- ridge -------------------------------------------------------------------


def ridge_objective(
    weights: np.ndarray,
    bias: float,
    matrix: sparse.csr_matrix,
    y: np.ndarray,
    lam: float,
    sample_weight: np.ndarray | None = None,
) -> float:
    """Weighted squared error plus lam * ||weights||^2 (bias unpenalized)."""
    sw = np.ones(len(y)) if sample_weight is None else sample_weight
    residual = y - (matrix @ weights + bias)
    return float(residual @ (sw * residual) + lam * (weights @ weights))


def ridge_gradient(
    weights: np.ndarray,
    bias: float,
    matrix: sparse.csr_matrix,
    y: np.ndarray,
    lam: float,
    sample_weight: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    sw = np.ones(len(y)) if sample_weight is None else sample_weight
    residual = sw * (y - (matrix @ weights + bias))
    grad_w = -2.0 * (matrix.T @ residual) + 2.0 * lam * weights
    grad_b = -2.0 * float(residual.sum())
    return grad_w, grad_b


def _solve_ridge(
    matrix: sparse.csr_matrix,
    y: np.ndarray,
    lam: float,
    sw: np.ndarray,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, float]:
    """Conjugate gradient on the normal equations of [X, 1] with the bias
    column unpenalized. Deterministic; no randomness involved."""
    n, d = matrix.shape

    def apply(theta: np.ndarray) -> np.ndarray:
        w, b = theta[:d], theta[d]
        t = sw * (matrix @ w + b)
        out = np.empty(d + 1)
        out[:d] = matrix.T @ t + lam * w
        out[d] = t.sum()
        return out

    rhs = np.empty(d + 1)
    t = sw * y
    rhs[:d] = matrix.T @ t
    rhs[d] = t.sum()

    theta = np.zeros(d + 1)
    residual = rhs - apply(theta)
    direction = residual.copy()
    rs = float(residual @ residual)
    threshold = (tol * max(1.0, math.sqrt(float(rhs @ rhs)))) ** 2
    for _ in range(max_iter):
        if rs <= threshold:
            break
        applied = apply(direction)
        denom = float(direction @ applied)
        if denom <= 0.0:
            break
        alpha = rs / denom
        theta += alpha * direction
        residual -= alpha * applied
        rs_next = float(residual @ residual)
        direction = residual + (rs_next / rs) * direction
        rs = rs_next
    return theta[:d], float(theta[d])


# --- linear SVR ---------------------------------------------------------------


def svr_epsilon_loss(
    weights: np.ndarray,
    bias: float,
    matrix: sparse.csr_matrix,
    y: np.ndarray,
    epsilon: float,
    sample_weight: np.ndarray | None = None,
) -> float:
    """Mean weighted epsilon-insensitive loss (no regularizer)."""
    sw = np.ones(len(y)) if sample_weight is None else sample_weight
    residual = np.abs(y - (matrix @ weights + bias)) - epsilon
    return float((sw * np.maximum(residual, 0.0)).sum() / sw.sum())


def _validation_mse(weights: np.ndarray, bias: float, matrix, y: np.ndarray) -> float:
    preds = _clamp(matrix @ weights + bias)
    return float(np.mean((preds - y) ** 2))


def _fit_linear_svr(
    matrix: sparse.csr_matrix,
    y: np.ndarray,
    sw: np.ndarray,
    val_matrix: sparse.csr_matrix | None,
    val_y: np.ndarray | None,
    config: TrainConfig,
) -> tuple[np.ndarray, float, dict]:
    """Mini-batch subgradient descent on
    ||w||^2 / (2 C W) + (1/W) sum_i sw_i max(0, |y_i - f(x_i)| - eps),
    with an epoch-level 1/t learning-rate decay and epoch-level early stopping
    on validation MSE (patience from config). Returns the best snapshot."""
    n, d = matrix.shape
    rng = np.random.default_rng(config.seed)
    weights = np.zeros(d)
    bias = 0.0
    total_weight = float(sw.sum())
    reg = 1.0 / (config.svr_c * total_weight)

    has_val = val_matrix is not None and val_y is not None and len(val_y) > 0
    history: list[float] = []
    best = (math.inf, weights.copy(), bias, 0)
    if has_val:
        initial = _validation_mse(weights, bias, val_matrix, val_y)
        history.append(initial)
        best = (initial, weights.copy(), bias, 0)

    epochs_run = 0
    for epoch in range(1, config.svr_max_epochs + 1):
        lr = config.svr_learning_rate / epoch
        order = rng.permutation(n)
        for start in range(0, n, config.svr_batch_size):
            batch = order[start : start + config.svr_batch_size]
            xb = matrix[batch]
            residual = y[batch] - (xb @ weights + bias)
            active = np.abs(residual) > config.svr_epsilon
            coef = np.where(active, -np.sign(residual), 0.0) * sw[batch]
            batch_weight = float(sw[batch].sum())
            grad_w = reg * weights + (xb.T @ coef) / batch_weight
            grad_b = float(coef.sum()) / batch_weight
            weights -= lr * grad_w
            bias -= lr * grad_b
        epochs_run = epoch
        if has_val:
            score = _validation_mse(weights, bias, val_matrix, val_y)
            history.append(score)
            if score < best[0]:
                best = (score, weights.copy(), bias, epoch)
            elif epoch - best[3] >= config.patience:
                break

    if has_val:
        _, weights, bias, best_epoch = best
        extras = {
            "epochs_run": epochs_run,
            "best_epoch": best_epoch,
            "validation_mse_history": history,
        }
    else:
        extras = {"epochs_run": epochs_run, "best_epoch": epochs_run, "validation_mse_history": []}
    return weights, bias, extras


# --- random forest -------------------------------------------------------------


def _best_split(values: np.ndarray, y: np.ndarray, sw: np.ndarray, min_leaf: int) -> tuple[float, float] | None:
    """Best (threshold, score) for one feature by weighted variance reduction.

    Score is sum_left^2/W_left + sum_right^2/W_right of weighted targets;
    maximizing it minimizes weighted SSE. Thresholds are midpoints between
    distinct consecutive sorted values, so for sparse features they are
    determined by the nonzero values present at the node.
    """
    order = np.argsort(values, kind="stable")
    v = values[order]
    wy = (sw * y)[order]
    w = sw[order]
    n = len(v)
    if v[0] == v[n - 1]:
        return None
    cw = np.cumsum(w)
    cwy = np.cumsum(wy)
    total_w, total_wy = cw[-1], cwy[-1]
    counts = np.arange(1, n)
    valid = (v[:-1] < v[1:]) & (counts >= min_leaf) & ((n - counts) >= min_leaf)
    if not valid.any():
        return None
    left_w, left_wy = cw[:-1], cwy[:-1]
    right_w, right_wy = total_w - left_w, total_wy - left_wy
    with np.errstate(divide="ignore", invalid="ignore"):
        score = np.where(valid, left_wy**2 / left_w + right_wy**2 / right_w, -np.inf)
    best = int(np.argmax(score))
    parent_score = total_wy**2 / total_w
    if score[best] <= parent_score + 1e-12 * max(1.0, abs(parent_score)):
        return None
    threshold = (v[best] + v[best + 1]) / 2.0
    return float(threshold), float(score[best])


def _build_tree(
    csc: sparse.csc_matrix,
    y: np.ndarray,
    sw: np.ndarray,
    rng: np.random.Generator,
    max_depth: int | None,
    min_leaf: int,
    n_feature_sample: int,
) -> _Tree:
    n_rows, n_features = csc.shape
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    position = np.full(n_rows, -1, dtype=np.int64)

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    def grow(rows: np.ndarray, depth: int, node: int) -> None:
        y_node, w_node = y[rows], sw[rows]
        value[node] = float((w_node * y_node).sum() / w_node.sum())
        n_node = len(rows)
        if n_node < 2 * min_leaf or (max_depth is not None and depth >= max_depth):
            return
        if y_node.max() - y_node.min() <= 0.0:
            return
        candidates = rng.choice(n_features, size=min(n_feature_sample, n_features), replace=False)
        position[rows] = np.arange(n_node)
        best: tuple[float, int, float] | None = None  # (score, feature, threshold)
        dense = np.empty(n_node)
        for j in candidates:
            start, end = csc.indptr[j], csc.indptr[j + 1]
            col_rows = csc.indices[start:end]
            col_pos = position[col_rows]
            inside = col_pos >= 0
            dense[:] = 0.0
            dense[col_pos[inside]] = csc.data[start:end][inside]
            found = _best_split(dense, y_node, w_node, min_leaf)
            if found is not None and (best is None or found[1] > best[0]):
                best = (found[1], int(j), found[0])
        position[rows] = -1
        if best is None:
            return
        _, j, cut = best
        start, end = csc.indptr[j], csc.indptr[j + 1]
        col_values = np.zeros(n_rows)
        col_values[csc.indices[start:end]] = csc.data[start:end]
        go_left = col_values[rows] <= cut
        rows_left, rows_right = rows[go_left], rows[~go_left]
        feature[node] = j
        threshold[node] = cut
        left[node] = new_node()
        right[node] = new_node()
        grow(rows_left, depth + 1, left[node])
        grow(rows_right, depth + 1, right[node])

    grow(np.arange(n_rows), 0, new_node())
    return _Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=np.float64),
    )


def _fit_forest(matrix: sparse.csr_matrix, y: np.ndarray, sw: np.ndarray, config: TrainConfig) -> list[_Tree]:
    n, d = matrix.shape
    if config.rf_max_features == "sqrt":
        n_sample = max(1, int(round(math.sqrt(d))))
    elif config.rf_max_features == "all":
        n_sample = d
    elif isinstance(config.rf_max_features, int) and config.rf_max_features >= 1:
        n_sample = min(d, config.rf_max_features)
    else:
        raise TrainingError(f"bad rf_max_features {config.rf_max_features!r}")
    trees = []
    for i in range(config.rf_n_trees):
        # per-tree seed = master ^ i, so parallel tree training could never
        # change results
        rng = np.random.default_rng(config.seed ^ i)
        boot = rng.integers(0, n, n) if config.rf_bootstrap else np.arange(n)
        csc = matrix[boot].tocsc()
        trees.append(
            _build_tree(
                csc,
                y[boot],
                sw[boot],
                rng,
                config.rf_max_depth,
                config.rf_min_samples_leaf,
                n_sample,
            )
        )
    return trees


# --- train/predict ------------------------------------------------------------


def train(
    family: str,
    train_set: Sequence,
    validation_set: Sequence | None = None,
    config: TrainConfig | None = None,
) -> Model:
    """Train a regressor. Items are (input, target[, weight]) with targets in
    [-1, 1]; inputs are texts (featurized internally) or FeatureVectors."""
    family = resolve_family(family)
    config = config or TrainConfig()
    data = _normalize_items(train_set, "train")
    metadata = TrainingMetadata(
        seed=config.seed,
        hyperparameters=config.hyperparameters(family),
        training_fingerprint=_fingerprint(data),
    )

    if family == FAMILY_CONSTANT_MEAN:
        mean = float((data.w * data.y).sum() / data.w.sum())
        return ConstantMeanModel(mean, metadata)

    if family == FAMILY_UNIFORM_RANDOM:
        return UniformRandomModel(metadata)

    if family == FAMILY_EXTERNAL:
        if config.external is None:
            raise TrainingError("external family needs config.external (a ScorerEndpoint)")
        examples = [
            {"text": x, "parent": None, "target": y}
            for x, y in zip(data.inputs, data.y.tolist())
            if isinstance(x, str)
        ]
        with ExternalScorerClient(config.external) as client:
            accepted = client.fit(examples) if examples else None
        return ExternalModel(config.external, metadata, fit_accepted=accepted)

    # featurized families
    vocab: Vocabulary | None = None
    if data.kind == "text":
        vocab = fit_vocabulary(data.inputs, config.features)
        matrix = to_csr(transform_many(vocab, data.inputs))
    else:
        matrix = to_csr(data.inputs)
    dimension = matrix.shape[1]

    val_matrix = None
    val_y = None
    if validation_set:
        val_data = _normalize_items(validation_set, "validation")
        if val_data.kind != data.kind:
            raise TrainingError("validation inputs must match train input kind")
        if val_data.kind == "text":
            val_matrix = to_csr(transform_many(vocab, val_data.inputs))
        else:
            val_matrix = to_csr(val_data.inputs)
            if val_matrix.shape[1] != dimension:
                raise TrainingError("validation vectors disagree on dimension")
        val_y = val_data.y

    if family == FAMILY_RIDGE:
        weights, bias = _solve_ridge(
            matrix, data.y, config.ridge_lambda, data.w, config.ridge_tol, config.ridge_max_iter
        )
        return RidgeModel(weights, bias, metadata, vocab, dimension)

    if family == FAMILY_LINEAR_SVR:
        weights, bias, extras = _fit_linear_svr(matrix, data.y, data.w, val_matrix, val_y, config)
        metadata = replace(metadata, extras=extras)
        return LinearSVRModel(weights, bias, metadata, vocab, dimension)

    if family == FAMILY_RANDOM_FOREST:
        trees = _fit_forest(matrix, data.y, data.w, config)
        return RandomForestModel(trees, metadata, vocab, dimension)

    raise TrainingError(f"unhandled family {family!r}")


def predict(model: Model, x) -> float:
    """Single-input convenience over Model.predict_batch."""
    return model.predict(x)


# --- persistence ---------------------------------------------------------------

_MAGIC = b"CSENSMDL"
FORMAT_MAJOR = 1
FORMAT_MINOR = 0


def _pack_arrays(arrays: dict[str, np.ndarray]) -> bytes:
    buf = io.BytesIO()
    buf.write(struct.pack("<I", len(arrays)))
    for name in sorted(arrays):
        encoded = name.encode("utf-8")
        blob = io.BytesIO()
        np.save(blob, np.ascontiguousarray(arrays[name]), allow_pickle=False)
        payload = blob.getvalue()
        buf.write(struct.pack("<I", len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack("<Q", len(payload)))
        buf.write(payload)
    return buf.getvalue()


def _unpack_arrays(payload: bytes) -> dict[str, np.ndarray]:
    buf = io.BytesIO(payload)
    (count,) = struct.unpack("<I", buf.read(4))
    arrays = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", buf.read(4))
        name = buf.read(name_len).decode("utf-8")
        (blob_len,) = struct.unpack("<Q", buf.read(8))
        arrays[name] = np.load(io.BytesIO(buf.read(blob_len)), allow_pickle=False)
    return arrays


def save_model(model: Model, path: str | Path) -> None:
    """Write the versioned model container: magic, version, family tag,
    JSON metadata block, binary parameter block, trailing CRC32."""
    metadata = {
        "seed": model.metadata.seed,
        "hyperparameters": model.metadata.hyperparameters,
        "training_fingerprint": model.metadata.training_fingerprint,
        "extras": model.metadata.extras | model._extra_metadata(),
        "vocabulary": model.vocab.to_json() if model.vocab is not None else None,
        "dimension": model.dimension,
    }
    meta_bytes = json.dumps(metadata, ensure_ascii=False, sort_keys=True).encode("utf-8")
    family_bytes = model.family.encode("utf-8")
    params = _pack_arrays(model._param_arrays())

    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<HH", FORMAT_MAJOR, FORMAT_MINOR))
    buf.write(struct.pack("<I", len(family_bytes)))
    buf.write(family_bytes)
    buf.write(struct.pack("<I", len(meta_bytes)))
    buf.write(meta_bytes)
    buf.write(struct.pack("<Q", len(params)))
    buf.write(params)
    body = buf.getvalue()
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))


def load_model(path: str | Path) -> Model:
    blob = Path(path).read_bytes()
    if len(blob) < len(_MAGIC) + 8 or not blob.startswith(_MAGIC):
        raise ModelPersistenceError(f"{path}: not a model file")
    body, tail = blob[:-4], blob[-4:]
    (stored_crc,) = struct.unpack("<I", tail)
    if zlib.crc32(body) != stored_crc:
        raise ChecksumError(f"{path}: checksum mismatch; file is corrupted")
    buf = io.BytesIO(body[len(_MAGIC) :])
    major, _minor = struct.unpack("<HH", buf.read(4))
    if major > FORMAT_MAJOR:
        raise VersionError(f"{path}: format major version {major} is newer than supported {FORMAT_MAJOR}")
    (family_len,) = struct.unpack("<I", buf.read(4))
    family = buf.read(family_len).decode("utf-8")
    (meta_len,) = struct.unpack("<I", buf.read(4))
    metadata_obj = json.loads(buf.read(meta_len).decode("utf-8"))
    (params_len,) = struct.unpack("<Q", buf.read(8))
    arrays = _unpack_arrays(buf.read(params_len))

    extras = dict(metadata_obj.get("extras", {}))
    metadata = TrainingMetadata(
        seed=metadata_obj["seed"],
        hyperparameters=metadata_obj["hyperparameters"],
        training_fingerprint=metadata_obj["training_fingerprint"],
        extras=extras,
    )
    vocab_obj = metadata_obj.get("vocabulary")
    vocab = Vocabulary.from_json(vocab_obj) if vocab_obj is not None else None
    dimension = metadata_obj.get("dimension")

    if family == FAMILY_CONSTANT_MEAN:
        return ConstantMeanModel(float(arrays["mean"][0]), metadata)
    if family == FAMILY_UNIFORM_RANDOM:
        return UniformRandomModel(metadata)
    if family == FAMILY_RIDGE:
        return RidgeModel(arrays["weights"], float(arrays["bias"][0]), metadata, vocab, dimension)
    if family == FAMILY_LINEAR_SVR:
        return LinearSVRModel(arrays["weights"], float(arrays["bias"][0]), metadata, vocab, dimension)
    if family == FAMILY_RANDOM_FOREST:
        trees = []
        for i in range(extras["n_trees"]):
            trees.append(
                _Tree(
                    feature=arrays[f"t{i}_feature"],
                    threshold=arrays[f"t{i}_threshold"],
                    left=arrays[f"t{i}_left"],
                    right=arrays[f"t{i}_right"],
                    value=arrays[f"t{i}_value"],
                )
            )
        return RandomForestModel(trees, metadata, vocab, dimension)
    if family == FAMILY_EXTERNAL:
        endpoint = ScorerEndpoint.from_json(extras["endpoint"])
        return ExternalModel(endpoint, metadata, extras.get("fit_accepted"))
    raise ModelPersistenceError(f"{path}: unknown family {family!r}")
