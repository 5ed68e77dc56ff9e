import numpy as np
import pytest

from lzspa.classification import (
    DEFAULT_GAMMA_GRID,
    ClassificationError,
    SweepConfig,
    accuracy,
    class_losses,
    classify,
    fit,
    load_bundle,
    save_bundle,
    split_train_validation,
    sweep,
)
from lzspa.core import AlphabetError, TokenSequence

from conftest import markov_bits


def two_class_markov(seed, n_train=200, n_test=100, length=512):
    rng = np.random.default_rng(seed)
    train = [(markov_bits(p, length, rng), lab) for lab, p in (("slow", 0.1), ("fast", 0.4)) for _ in range(n_train)]
    test = [(markov_bits(p, length, rng), lab) for lab, p in (("slow", 0.1), ("fast", 0.4)) for _ in range(n_test)]
    return train, test


def constant_model():
    data = [([0] * 50, "zeros"), ([1] * 50, "ones")]
    return fit(data, gamma=0.5, alphabet_size=2)


def test_constant_classes():
    model = constant_model()
    zeros = dict(model.classes)["zeros"]
    assert zeros.dist_at(0)[0] > 0.9
    label, losses = classify(model, [0, 0, 0, 0])
    assert label == "zeros"
    assert losses[model.labels.index("zeros")] < losses[model.labels.index("ones")]


def test_labels_are_sorted_and_models_frozen():
    model = constant_model()
    assert model.labels == ["ones", "zeros"]
    assert all(m.frozen for _, m in model.classes)


def test_needs_two_classes_and_one_alphabet():
    with pytest.raises(ClassificationError):
        fit([([0, 1], "a"), ([1, 1], "a")], alphabet_size=2)
    with pytest.raises(AlphabetError):
        fit([(TokenSequence.of([0, 1], 2), "a"), (TokenSequence.of([0, 2], 3), "b")])


def test_scoring_is_pure_and_equivariant():
    train, _ = two_class_markov(0, n_train=10, n_test=1)
    model = fit(train, gamma=0.5, alphabet_size=2)
    query = markov_bits(0.2, 300, np.random.default_rng(1))
    fp = model.fingerprint()
    a = class_losses(model, query)
    b = class_losses(model, query)
    assert a == b and model.fingerprint() == fp
    swapped = type(model)(list(reversed(model.classes)), model.gamma, model.epochs)
    assert class_losses(swapped, query) == list(reversed(a))


def test_threaded_scoring_is_identical():
    train, test = two_class_markov(1, n_train=20, n_test=5)
    model = fit(train, gamma=0.5, alphabet_size=2)
    for seq, _ in test:
        assert class_losses(model, seq, workers=1) == class_losses(model, seq, workers=4)


def test_ties_go_to_the_first_class():
    model = fit([([0, 1], "a"), ([0, 1], "b")], gamma=0.5, alphabet_size=2)
    assert classify(model, [1, 0, 1])[0] == "a"


def test_markov_task_accuracy():
    train, test = two_class_markov(2, n_train=60, n_test=40)
    model = fit(train, gamma=0.5, alphabet_size=2)
    assert accuracy(model, test) >= 0.95


def test_split_keeps_every_class_on_both_sides():
    data = [([0], "a"), ([1], "a"), ([0], "b"), ([1], "b"), ([1], "b")]
    train, val = split_train_validation(data, 0.2, seed=0)
    assert {lab for _, lab in train} == {"a", "b"} == {lab for _, lab in val}
    assert len(train) + len(val) == len(data)
    with pytest.raises(ClassificationError):
        split_train_validation([([0], "a"), ([1], "b"), ([1], "b")], 0.5, 0)


def test_sweep_single_value_grid():
    train, _ = two_class_markov(3, n_train=10, n_test=1)
    res = sweep(train, SweepConfig(gamma_grid=(0.75,)), alphabet_size=2)
    assert res.best_gamma == 0.75 and len(res.table) == 1


def test_sweep_returns_validation_argmin():
    train, _ = two_class_markov(4, n_train=40, n_test=1)
    res = sweep(train, SweepConfig(gamma_grid=DEFAULT_GAMMA_GRID, epoch_grid=(1, 2)), alphabet_size=2)
    assert len(res.table) == 2 * len(DEFAULT_GAMMA_GRID)
    best = min(res.table, key=lambda r: r["mean_val_loss"])
    assert (res.best_gamma, res.best_epochs) == (best["gamma"], best["epochs"])
    assert all(res.best_loss <= r["mean_val_loss"] for r in res.table)


def test_incremental_epochs_match_fresh_training():
    # the sweep grows trees epoch by epoch; that must equal training from scratch
    train, _ = two_class_markov(5, n_train=6, n_test=1, length=200)
    res = sweep(train, SweepConfig(gamma_grid=(0.5,), epoch_grid=(1, 3)), alphabet_size=2)
    tr, val = split_train_validation(train, 0.2, 0)
    fresh = fit(tr, gamma=0.5, epochs=3, alphabet_size=2)
    losses = {lab: [] for lab in fresh.labels}
    for seq, lab in val:
        losses[lab].append(dict(fresh.classes)[lab].evaluate_log_loss(seq).per_symbol_bits)
    expected = float(np.mean([np.mean(v) for v in losses.values()]))
    row = next(r for r in res.table if r["epochs"] == 3)
    assert row["mean_val_loss"] == pytest.approx(expected, abs=1e-12)


def test_bundle_round_trip(tmp_path):
    train, test = two_class_markov(6, n_train=10, n_test=3)
    model = fit(train, gamma=0.33, epochs=2, alphabet_size=2)
    save_bundle(model, tmp_path / "b")
    again = load_bundle(tmp_path / "b")
    assert again.labels == model.labels and again.gamma == 0.33 and again.epochs == 2
    assert again.fingerprint() == model.fingerprint()
    for seq, _ in test:
        assert class_losses(again, seq) == class_losses(model, seq)
