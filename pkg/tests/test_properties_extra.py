"""Property encodings that pair fast implementations with independent oracles
or exercise whole-loop invariants on deliberately tiny inputs."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ctxsens import analysis, evaluation
from ctxsens.augmentation import AugmentationConfig, TrainPost, run_augmentation
from ctxsens.corpus import Post
from ctxsens.features import FeatureVector
from ctxsens.models import TrainConfig, train

from helpers import planted_examples
from oracles import pairwise_auc, threshold_enumeration_ap

pytestmark = pytest.mark.property


def fv(*values: float) -> FeatureVector:
    pairs = [(i, v) for i, v in enumerate(values) if v != 0.0]
    return FeatureVector(
        indices=tuple(i for i, _ in pairs),
        weights=tuple(v for _, v in pairs),
        dimension=len(values),
    )


_instance = st.integers(0, 10**9)


@given(_instance)
def test_roc_auc_equals_pairwise_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 50))
    scores = rng.choice(np.linspace(0, 1, 7), n).tolist()
    labels = (rng.random(n) < 0.5).tolist()
    if all(labels) or not any(labels):
        return
    assert evaluation.roc_auc(scores, labels) == pytest.approx(pairwise_auc(scores, labels), abs=1e-12)


@given(_instance)
def test_aupr_equals_enumeration_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 50))
    scores = rng.choice(np.linspace(0, 1, 7), n).tolist()
    labels = (rng.random(n) < 0.4).tolist()
    if not any(labels):
        return
    assert evaluation.aupr(scores, labels) == pytest.approx(threshold_enumeration_ap(scores, labels), abs=1e-12)


@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=1, max_size=40))
def test_mse_at_least_mae_squared(pairs):
    pred = [p for p, _ in pairs]
    gold = [g for _, g in pairs]
    assert evaluation.mse(pred, gold) >= evaluation.mae(pred, gold) ** 2 - 1e-12


@given(st.integers(0, 10_000))
def test_monte_carlo_cv_reproducible(seed):
    examples = planted_examples(14, seed=seed % 17)
    config = TrainConfig(seed=seed)
    split = evaluation.SplitSpec(n_repeats=2, seed=seed)
    assert evaluation.monte_carlo_cv(examples, "constant_mean", config, split) == evaluation.monte_carlo_cv(
        examples, "constant_mean", config, split
    )


@given(st.integers(0, 10_000))
def test_rf_prediction_is_mean_of_trees(seed):
    rng = np.random.default_rng(seed)
    data = [(fv(*rng.normal(0, 1, 3)), float(rng.uniform(-1, 1))) for _ in range(8)]
    config = TrainConfig(seed=seed, rf_n_trees=3, rf_max_depth=3, rf_min_samples_leaf=1)
    model = train("random_forest", data, config=config)
    queries = [fv(*rng.normal(0, 1, 3)) for _ in range(4)]
    per_tree = model.predict_per_tree(queries)
    assert model.predict_batch(queries) == pytest.approx(per_tree.mean(axis=0), abs=1e-12)


@given(st.integers(0, 10_000))
def test_svr_early_stopping_bounds(seed):
    rng = np.random.default_rng(seed)
    make = lambda n: [(fv(*rng.normal(0, 1, 3)), float(rng.uniform(-0.5, 0.5))) for _ in range(n)]
    config = TrainConfig(seed=seed, svr_max_epochs=12, patience=2)
    model = train("linear_svr", make(10), make(5), config)
    extras = model.metadata.extras
    assert extras["epochs_run"] <= extras["best_epoch"] + config.patience
    history = extras["validation_mse_history"]
    assert history[extras["best_epoch"]] == min(history)


@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 2))
def test_augmentation_conservation(seed, k, cycles):
    rng = np.random.default_rng(seed)
    gold = [
        TrainPost(post=Post(f"g{i}", f"text {i}"), target=float(rng.uniform(-1, 1)))
        for i in range(6)
    ]
    pool = tuple(Post(f"p{i}", f"pool text {i}") for i in range(8))
    config = AugmentationConfig(
        pool=pool,
        k_per_cycle=k,
        n_cycles=cycles,
        teacher_family="constant_mean",
        student_family="constant_mean",
        train_config=TrainConfig(seed=seed),
        seed=seed,
        selection="random_k" if seed % 2 else "teacher_top_k",
    )
    logs = run_augmentation(gold[:4], gold[4:5], gold[5:], config)
    for t, log in enumerate(logs, start=1):
        assert log.train_size == 4 + t * k
        assert log.pool_size == len(pool) - t * k
    selected = [pid for log in logs for pid in log.selected_post_ids]
    assert len(selected) == len(set(selected))
    assert "g5" not in selected


@given(st.integers(0, 10_000))
def test_bootstrap_deterministic_per_seed(seed):
    rng = np.random.default_rng(seed)
    a = (rng.random(20) < 0.5).tolist()
    b = (rng.random(20) < 0.5).tolist()
    first = analysis.paired_bootstrap(a, b, resample_size=10, n_resamples=30, seed=seed)
    second = analysis.paired_bootstrap(a, b, resample_size=10, n_resamples=30, seed=seed)
    assert first == second
