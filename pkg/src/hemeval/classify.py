"""Nearest-class-mean classification under cosine similarity.

The "classifier head" is deliberately training-free: a class prototype is
the L2-normalized mean of its members' L2-normalized vectors, and a query
is assigned to the prototype with the highest cosine. Ties break toward
the lexicographically smallest class id so results are platform-stable.
"""

from __future__ import annotations

import numpy as np

from .core import ClassifierReport, ClassScores, EmbeddingSet, HemevalError


class ClassifyError(HemevalError):
    pass


def _label_column(embeddings: EmbeddingSet, label: str) -> tuple[str, ...]:
    if label not in embeddings.labels:
        raise ClassifyError(f"embedding set has no label {label!r}")
    return embeddings.labels[label]


def split(
    embeddings: EmbeddingSet, label: str, test_fraction: float, seed: int
) -> tuple[EmbeddingSet, EmbeddingSet]:
    """Deterministic stratified train/test split by class of `label`."""
    if not 0.0 < test_fraction < 1.0:
        raise ClassifyError("test_fraction must be in (0, 1)")
    classes = _label_column(embeddings, label)
    by_class: dict[str, list[int]] = {}
    for idx, cls in enumerate(classes):
        by_class.setdefault(cls, []).append(idx)
    for cls, members in sorted(by_class.items()):
        if len(members) < 2:
            raise ClassifyError(f"class {cls!r} has fewer than 2 members")

    rng = np.random.default_rng(seed)
    train_idx: list[int] = []
    test_idx: list[int] = []
    for cls in sorted(by_class):
        members = list(by_class[cls])
        order = rng.permutation(len(members))
        n_test = int(round(test_fraction * len(members)))
        n_test = min(max(n_test, 1), len(members) - 1)
        picked = [members[i] for i in order]
        test_idx.extend(picked[:n_test])
        train_idx.extend(picked[n_test:])
    return embeddings.subset(sorted(train_idx)), embeddings.subset(sorted(test_idx))


def _normalize_rows(vectors: np.ndarray, ids: tuple[str, ...]) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1)
    for i, norm in enumerate(norms):
        if norm < 1e-12:
            raise ClassifyError(f"zero-norm vector for id {ids[i]!r}")
    return vectors / norms[:, None]


def fit_prototypes(train: EmbeddingSet, label: str) -> dict[str, np.ndarray]:
    """Unit-norm prototype per class: normalized mean of normalized members."""
    classes = _label_column(train, label)
    normalized = _normalize_rows(train.vectors, train.ids)
    prototypes: dict[str, np.ndarray] = {}
    for cls in sorted(set(classes)):
        members = normalized[[i for i, c in enumerate(classes) if c == cls]]
        mean = members.mean(axis=0)
        norm = float(np.linalg.norm(mean))
        if norm < 1e-12:
            raise ClassifyError(f"class {cls!r}: member directions cancel out")
        prototypes[cls] = mean / norm
    return prototypes


def predict(vector: np.ndarray, prototypes: dict[str, np.ndarray]) -> tuple[str, dict[str, float]]:
    """Argmax-cosine class for one query plus the full score map."""
    if not prototypes:
        raise ClassifyError("no prototypes fitted")
    query = np.asarray(vector, dtype=np.float64)
    if not np.all(np.isfinite(query)):
        raise ClassifyError("query vector has non-finite components")
    dim = next(iter(prototypes.values())).shape[0]
    if query.shape != (dim,):
        raise ClassifyError(f"query dimension {query.shape} does not match prototypes ({dim},)")
    norm = float(np.linalg.norm(query))
    if norm < 1e-12:
        raise ClassifyError("zero-norm query vector")
    query = query / norm
    scores = {cls: float(query @ proto) for cls, proto in sorted(prototypes.items())}
    # max() keeps the first maximum, so sorted keys break exact-cosine ties
    # toward the lexicographically smallest class id.
    best = max(sorted(scores), key=scores.__getitem__)
    return best, scores


def evaluate(test: EmbeddingSet, prototypes: dict[str, np.ndarray], label: str) -> ClassifierReport:
    """Accuracy, per-class precision/recall/F1, weighted F1, confusion matrix."""
    if len(test) == 0:
        raise ClassifyError("empty test set")
    truth = _label_column(test, label)
    predictions = [predict(test.vectors[i], prototypes)[0] for i in range(len(test))]

    classes = tuple(sorted(set(truth) | set(prototypes)))
    index = {cls: i for i, cls in enumerate(classes)}
    confusion = [[0] * len(classes) for _ in classes]
    for t, p in zip(truth, predictions):
        confusion[index[t]][index[p]] += 1

    per_class: dict[str, ClassScores] = {}
    weighted = 0.0
    correct = 0
    for cls in classes:
        i = index[cls]
        tp = confusion[i][i]
        support = sum(confusion[i])
        predicted = sum(row[i] for row in confusion)
        precision = tp / predicted if predicted else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
        per_class[cls] = ClassScores(precision=precision, recall=recall, f1=f1, support=support)
        weighted += support * f1
        correct += tp

    n = len(test)
    return ClassifierReport(
        task=label,
        accuracy=correct / n,
        weighted_f1=weighted / n,
        classes=classes,
        per_class=per_class,
        confusion=tuple(tuple(row) for row in confusion),
    )
