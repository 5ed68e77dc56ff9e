"""Min-log-loss classification with one LZ78-transform model per class, plus the gamma / epoch sweep."""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Sequence

import numpy as np

from .core import AlphabetError
from .transform import LZTransformSPA, _tokens_of

DEFAULT_GAMMA_GRID = (0.1, 0.33, 0.5, 0.75, 1.0, 3.0, 5.0)


class ClassificationError(ValueError):
    pass


@dataclass
class ClassifierModel:
    classes: list[tuple[Hashable, LZTransformSPA]]
    gamma: float
    epochs: int

    @property
    def labels(self) -> list:
        return [lab for lab, _ in self.classes]

    @property
    def alphabet_size(self) -> int:
        return self.classes[0][1].alphabet_size

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for lab, m in self.classes:
            h.update(repr(lab).encode())
            h.update(m.to_bytes())
        return h.hexdigest()


def _group(train_set: Sequence[tuple], alphabet_size: int | None) -> tuple[dict, int]:
    groups: dict = {}
    for seq, label in train_set:
        groups.setdefault(label, []).append(seq)
    if len(groups) < 2:
        raise ClassificationError("need at least two labels")
    if alphabet_size is None:
        sizes = {s.alphabet.size for seqs in groups.values() for s in seqs if hasattr(s, "alphabet")}
        if len(sizes) > 1:
            raise AlphabetError(f"training sequences mix alphabets {sorted(sizes)}")
        if not sizes:
            raise ClassificationError("alphabet_size is required for plain token lists")
        alphabet_size = sizes.pop()
    for label, seqs in groups.items():
        if not seqs or all(len(s) == 0 for s in seqs):
            raise ClassificationError(f"class {label!r} has no training data")
    return groups, alphabet_size


def _sorted_labels(labels) -> list:
    try:
        return sorted(labels)
    except TypeError:
        return sorted(labels, key=repr)


def fit(
    train_set: Sequence[tuple],
    gamma: float = 0.5,
    epochs: int = 1,
    alphabet_size: int | None = None,
) -> ClassifierModel:
    """Train one frozen model per label on that label's sequences.

    ``train_set`` holds ``(sequence, label)`` pairs.  Classes are kept in
    sorted label order, which is also the tie-break order.
    """
    groups, A = _group(train_set, alphabet_size)
    classes = []
    for label in _sorted_labels(groups):
        model = LZTransformSPA(A, gamma=gamma)
        model.train(groups[label], epochs=epochs)
        classes.append((label, model.freeze()))
    return ClassifierModel(classes, gamma, epochs)


def _default_workers() -> int:
    env = os.environ.get("LZSPA_THREADS")
    return max(1, int(env)) if env else 1


def class_losses(model: ClassifierModel, seq, workers: int | None = None) -> list[float]:
    """Total log loss (bits) of ``seq`` under every class model, in class order."""
    tokens = _tokens_of(seq, model.alphabet_size)
    workers = workers or _default_workers()
    scorers = [m for _, m in model.classes]
    if workers <= 1:
        return [m.evaluate_log_loss(tokens).total_bits for m in scorers]
    # frozen evaluation keeps its cursor local, so the shared trees are read-only
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda m: m.evaluate_log_loss(tokens).total_bits, scorers))


def classify(model: ClassifierModel, seq, workers: int | None = None) -> tuple[Hashable, list[float]]:
    """Label with the smallest log loss (lowest class index on ties) and the loss vector."""
    losses = class_losses(model, seq, workers)
    best = int(np.argmin(losses))
    return model.classes[best][0], losses


def accuracy(model: ClassifierModel, test_set: Sequence[tuple], workers: int | None = None) -> float:
    if not test_set:
        raise ClassificationError("empty test set")
    hits = sum(classify(model, seq, workers)[0] == label for seq, label in test_set)
    return hits / len(test_set)


@dataclass(frozen=True)
class SweepConfig:
    gamma_grid: tuple[float, ...] = DEFAULT_GAMMA_GRID
    validation_fraction: float = 0.2
    epochs: int = 1
    epoch_grid: tuple[int, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.gamma_grid:
            raise ClassificationError("gamma grid is empty")
        if any(not g > 0 for g in self.gamma_grid):
            raise ClassificationError("every gamma must be > 0")
        if not 0 < self.validation_fraction < 1:
            raise ClassificationError("validation fraction must be in (0, 1)")
        if self.epoch_grid is not None and (not self.epoch_grid or min(self.epoch_grid) < 1):
            raise ClassificationError("epoch grid must be non-empty with entries >= 1")

    @property
    def epochs_to_try(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.epoch_grid))) if self.epoch_grid else (self.epochs,)


@dataclass
class SweepResult:
    best_gamma: float
    best_epochs: int
    table: list[dict] = field(default_factory=list)

    @property
    def best_loss(self) -> float:
        return min(r["mean_val_loss"] for r in self.table)


def split_train_validation(train_set: Sequence[tuple], fraction: float, seed: int) -> tuple[list, list]:
    """Per-class seeded shuffle; each class keeps at least one sequence on both sides."""
    groups: dict = {}
    for seq, label in train_set:
        groups.setdefault(label, []).append(seq)
    rng = np.random.default_rng(seed)
    train, val = [], []
    for label in _sorted_labels(groups):
        seqs = groups[label]
        if len(seqs) < 2:
            raise ClassificationError(f"class {label!r} needs >= 2 sequences to hold one out")
        order = rng.permutation(len(seqs))
        k = min(max(1, int(round(fraction * len(seqs)))), len(seqs) - 1)
        val += [(seqs[i], label) for i in order[:k]]
        train += [(seqs[i], label) for i in order[k:]]
    return train, val


def sweep(train_set: Sequence[tuple], config: SweepConfig = SweepConfig(),
          alphabet_size: int | None = None) -> SweepResult:
    """Pick ``(gamma, epochs)`` by mean per-symbol validation log loss.

    The objective averages, over classes, the mean per-symbol loss of each
    class's held-out sequences under that class's own model.  Trees are
    grown once per epoch count and shared across gammas.
    """
    train, val = split_train_validation(train_set, config.validation_fraction, config.seed)
    groups, A = _group(train, alphabet_size)
    val_groups: dict = {}
    for seq, label in val:
        val_groups.setdefault(label, []).append(seq)
    labels = _sorted_labels(groups)
    table = []
    bases = {lab: LZTransformSPA(A, gamma=config.gamma_grid[0]) for lab in labels}
    done = 0
    for epochs in config.epochs_to_try:
        for lab in labels:
            bases[lab].train(groups[lab], epochs=epochs - done)
        done = epochs
        for g in config.gamma_grid:
            per_class = []
            for lab in labels:
                view = bases[lab].with_gamma(g)
                per_class.append(float(np.mean([view.evaluate_log_loss(s).per_symbol_bits
                                                for s in val_groups[lab]])))
            clf = ClassifierModel([(lab, bases[lab].with_gamma(g)) for lab in labels], g, epochs)
            table.append({
                "gamma": g,
                "epochs": epochs,
                "mean_val_loss": float(np.mean(per_class)),
                "val_accuracy": accuracy(clf, val),
            })
    best = min(table, key=lambda r: r["mean_val_loss"])
    return SweepResult(best["gamma"], best["epochs"], table)


# -- bundles -----------------------------------------------------------------------


def save_bundle(model: ClassifierModel, directory) -> Path:
    """One ``.lzspa`` file per class plus ``manifest.json``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (label, m) in enumerate(model.classes):
        name = f"class_{i}.lzspa"
        m.save(d / name)
        entries.append({"label": label, "file": name})
    manifest = {"gamma": model.gamma, "epochs": model.epochs, "classes": entries}
    path = d / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def load_bundle(directory) -> ClassifierModel:
    d = Path(directory)
    manifest = json.loads((d / "manifest.json").read_text())
    classes = [(e["label"], LZTransformSPA.load(d / e["file"])) for e in manifest["classes"]]
    for _, m in classes:
        m.freeze()
    return ClassifierModel(classes, manifest["gamma"], manifest["epochs"])
