"""Caption quality metrics: BLEU, ROUGE-L, and greedy-matching BERTScore.

Corpus aggregation is sentence-level: the reported scalar for each metric
is the arithmetic mean of per-pair scores (recorded in the report
metadata, since pooling conventions differ between toolkits). BERTScore
is computed without idf weighting and without baseline rescaling; token
embeddings come from a pluggable provider so exported contextual
embeddings can replace the built-in deterministic ones.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .core import CaptionPair, HemevalError
from .jsonlio import iter_jsonl
from .rng import SeedStream, fnv1a64, _MASK64
from .textnorm import tokenize

__all__ = [
    "MetricsError",
    "EmbeddingProvider",
    "OneHotProvider",
    "HashedRandomProvider",
    "FileProvider",
    "tokenize",
    "bleu",
    "rouge_l",
    "bert_score",
    "corpus_scores",
    "PairScores",
    "TextMetricsReport",
    "provider_from_spec",
]


class MetricsError(HemevalError):
    pass


# ---------------------------------------------------------------------------
# n-gram and LCS metrics
# ---------------------------------------------------------------------------


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(
    candidate: Sequence[str],
    reference: Sequence[str],
    max_n: int = 4,
    smoothing: str = "epsilon",
) -> float:
    """Clipped n-gram precision geometric mean with brevity penalty.

    smoothing="epsilon" replaces a zero precision of order n >= 2 by
    1/(2 * number of candidate n-grams of that order); smoothing="none"
    sends the whole score to zero instead. A zero unigram precision is
    always a zero score (no shared vocabulary means no credit). Orders
    longer than the candidate are skipped, so bleu(x, x) is 1.0 for any
    non-empty x.
    """
    if max_n < 1:
        raise MetricsError("max_n must be >= 1")
    if smoothing not in ("none", "epsilon"):
        raise MetricsError(f"unknown smoothing {smoothing!r}")
    if not candidate or not reference:
        return 0.0

    log_sum = 0.0
    orders = 0
    for n in range(1, max_n + 1):
        cand_counts = _ngrams(candidate, n)
        total = sum(cand_counts.values())
        if total == 0:
            continue
        ref_counts = _ngrams(reference, n)
        clipped = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
        if clipped == 0:
            if smoothing == "none" or n == 1:
                return 0.0
            precision = 1.0 / (2.0 * total)
        else:
            precision = clipped / total
        log_sum += math.log(precision)
        orders += 1
    if orders == 0:
        return 0.0
    brevity = math.exp(min(0.0, 1.0 - len(reference) / len(candidate)))
    return brevity * math.exp(log_sum / orders)


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        current = [0] * (len(b) + 1)
        ai = a[i - 1]
        for j in range(1, len(b) + 1):
            if ai == b[j - 1]:
                current[j] = previous[j - 1] + 1
            else:
                current[j] = max(previous[j], current[j - 1])
        previous = current
    return previous[len(b)]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> tuple[float, float, float]:
    """LCS precision/recall/F1 over tokens; zeros when either side is empty."""
    if not candidate or not reference:
        return 0.0, 0.0, 0.0
    lcs = _lcs_length(candidate, reference)
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    if precision + recall == 0.0:
        return precision, recall, 0.0
    f1 = 2.0 * precision * recall / (precision + recall)
    return precision, recall, f1


# ---------------------------------------------------------------------------
# Embedding providers and BERTScore
# ---------------------------------------------------------------------------


class EmbeddingProvider(Protocol):
    """Per-token embeddings: deterministic, unit-norm, fixed dimension."""

    name: str

    def embed(self, tokens: Sequence[str]) -> np.ndarray: ...


class OneHotProvider:
    """Exactly orthogonal embeddings over an explicit vocabulary.

    With this provider BERTScore reduces to exact token-overlap
    fractions, which makes it the reference point for tests.
    """

    def __init__(self, vocabulary: Iterable[str]) -> None:
        self._index = {token: i for i, token in enumerate(dict.fromkeys(vocabulary))}
        if not self._index:
            raise MetricsError("one_hot provider needs a non-empty vocabulary")
        self.name = "one_hot"

    @property
    def dimension(self) -> int:
        return len(self._index)

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(tokens), len(self._index)), dtype=np.float64)
        for row, token in enumerate(tokens):
            if token not in self._index:
                raise MetricsError(f"token {token!r} not in one_hot vocabulary")
            out[row, self._index[token]] = 1.0
        return out


class HashedRandomProvider:
    """Deterministic pseudo-random unit vectors keyed by (seed, token)."""

    def __init__(self, seed: int, dimension: int = 32) -> None:
        if dimension < 1:
            raise MetricsError("dimension must be >= 1")
        self._seed = seed
        self.dimension = dimension
        self.name = f"hashed:{seed}"

    def _vector(self, token: str) -> np.ndarray:
        state = fnv1a64((self._seed & _MASK64).to_bytes(8, "little") + token.encode("utf-8"))
        stream = SeedStream(state)
        vec = np.array([stream.uniform() * 2.0 - 1.0 for _ in range(self.dimension)])
        norm = float(np.linalg.norm(vec))
        if norm < 1e-12:
            vec = np.zeros(self.dimension)
            vec[0] = 1.0
            return vec
        return vec / norm

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        if not tokens:
            return np.zeros((0, self.dimension), dtype=np.float64)
        return np.stack([self._vector(t) for t in tokens])


class FileProvider:
    """Token embeddings from a JSONL file of {"token", "vector"} lines.

    Vectors must be unit-norm within 1e-6. Unknown tokens fall back to
    the `<unk>` vector when present, otherwise they are an error.
    """

    def __init__(self, table: Mapping[str, np.ndarray], source: str = "file") -> None:
        if not table:
            raise MetricsError("empty token-embedding table")
        dims = {v.shape[0] for v in table.values()}
        if len(dims) != 1:
            raise MetricsError("token embeddings have mixed dimensions")
        self._table = dict(table)
        self.dimension = dims.pop()
        self.name = source

    @classmethod
    def from_path(cls, path: str | Path) -> "FileProvider":
        table: dict[str, np.ndarray] = {}
        for line_no, obj in iter_jsonl(path):
            if "token" not in obj or "vector" not in obj:
                raise MetricsError(f"line {line_no}: missing field 'token' or 'vector'")
            vec = np.asarray(obj["vector"], dtype=np.float64)
            if vec.ndim != 1 or not np.all(np.isfinite(vec)):
                raise MetricsError(f"line {line_no}: invalid vector for token {obj['token']!r}")
            norm = float(np.linalg.norm(vec))
            if abs(norm - 1.0) > 1e-6:
                raise MetricsError(
                    f"token {obj['token']!r}: vector norm {norm:.8f} is not unit within 1e-6"
                )
            table[str(obj["token"])] = vec
        return cls(table, source=f"file:{path}")

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        rows = []
        for token in tokens:
            vec = self._table.get(token)
            if vec is None:
                vec = self._table.get("<unk>")
            if vec is None:
                raise MetricsError(f"token {token!r} not in embedding file and no <unk> entry")
            rows.append(vec)
        return np.stack(rows) if rows else np.zeros((0, self.dimension), dtype=np.float64)


def bert_score(
    candidate: Sequence[str],
    reference: Sequence[str],
    provider: EmbeddingProvider,
) -> tuple[float, float, float]:
    """Greedy max-cosine matching scores (precision, recall, F1).

    Raises MetricsError on an empty side: greedy matching is undefined
    there, and that case must stay distinct from a genuine score of 0.
    """
    if not candidate or not reference:
        raise MetricsError("bert_score is undefined for empty token sequences")
    cand = provider.embed(candidate)
    ref = provider.embed(reference)
    if cand.shape[0] != len(candidate) or ref.shape[0] != len(reference):
        raise MetricsError(f"provider {provider.name!r} returned a wrong number of vectors")
    sims = cand @ ref.T
    precision = float(np.mean(np.max(sims, axis=1)))
    recall = float(np.mean(np.max(sims, axis=0)))
    if precision + recall == 0.0:
        return precision, recall, 0.0
    f1 = 2.0 * precision * recall / (precision + recall)
    return precision, recall, f1


# ---------------------------------------------------------------------------
# Corpus scoring
# ---------------------------------------------------------------------------

ALL_METRICS = ("bleu", "rougeL", "bertscore")


@dataclass(frozen=True)
class PairScores:
    image_id: str
    bleu: float | None = None
    rouge_l_precision: float | None = None
    rouge_l_recall: float | None = None
    rouge_l_f1: float | None = None
    bertscore_precision: float | None = None
    bertscore_recall: float | None = None
    bertscore_f1: float | None = None

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "bleu": self.bleu,
            "rouge_l_precision": self.rouge_l_precision,
            "rouge_l_recall": self.rouge_l_recall,
            "rouge_l_f1": self.rouge_l_f1,
            "bertscore_precision": self.bertscore_precision,
            "bertscore_recall": self.bertscore_recall,
            "bertscore_f1": self.bertscore_f1,
        }


@dataclass(frozen=True)
class TextMetricsReport:
    per_pair: tuple[PairScores, ...]
    aggregates: Mapping[str, float | None]
    options: Mapping[str, object]

    def to_dict(self) -> dict:
        return {
            "per_pair": [p.to_dict() for p in self.per_pair],
            "aggregates": dict(self.aggregates),
            "options": dict(self.options),
        }


def _mean(values: list[float]) -> float | None:
    if not values:
        return None
    return sum(values) / len(values)


def corpus_scores(
    pairs: Sequence[CaptionPair],
    provider: EmbeddingProvider | None = None,
    metrics: Sequence[str] = ALL_METRICS,
    bleu_max_n: int = 4,
    smoothing: str = "epsilon",
) -> TextMetricsReport:
    """Score every pair and aggregate by sentence-level arithmetic mean.

    Pairs whose candidate or reference tokenizes to nothing get a null
    BERTScore and are excluded from that metric's mean; BLEU and ROUGE-L
    are total and always contribute.
    """
    for metric in metrics:
        if metric not in ALL_METRICS:
            raise MetricsError(f"unknown metric {metric!r}")
    if "bertscore" in metrics and provider is None:
        raise MetricsError("bertscore requested but no embedding provider given")

    per_pair: list[PairScores] = []
    skipped_bert = 0
    for pair in pairs:
        cand = tokenize(pair.candidate)
        ref = tokenize(pair.reference)
        scores: dict[str, float | None] = {}
        if "bleu" in metrics:
            scores["bleu"] = bleu(cand, ref, max_n=bleu_max_n, smoothing=smoothing)
        if "rougeL" in metrics:
            p, r, f = rouge_l(cand, ref)
            scores.update(rouge_l_precision=p, rouge_l_recall=r, rouge_l_f1=f)
        if "bertscore" in metrics:
            if cand and ref:
                p, r, f = bert_score(cand, ref, provider)
                scores.update(bertscore_precision=p, bertscore_recall=r, bertscore_f1=f)
            else:
                skipped_bert += 1
        per_pair.append(PairScores(image_id=pair.image_id, **scores))

    metric_fields = {
        "bleu": ("bleu",),
        "rougeL": ("rouge_l_precision", "rouge_l_recall", "rouge_l_f1"),
        "bertscore": ("bertscore_precision", "bertscore_recall", "bertscore_f1"),
    }
    aggregates: dict[str, float | None] = {"pairs": len(per_pair)}
    for metric in metrics:
        for field in metric_fields[metric]:
            values = [getattr(p, field) for p in per_pair if getattr(p, field) is not None]
            aggregates[field] = _mean(values)
    if "bertscore" in metrics:
        aggregates["bertscore_skipped"] = skipped_bert

    options = {
        "metrics": list(metrics),
        "pooling": "sentence_mean",
        "bleu_max_n": bleu_max_n,
        "smoothing": smoothing,
        "provider": provider.name if provider is not None else None,
        "idf_weighting": False,
        "baseline_rescaling": False,
    }
    return TextMetricsReport(per_pair=tuple(per_pair), aggregates=aggregates, options=options)


def provider_from_spec(spec: str, vocabulary: Iterable[str] | None = None) -> EmbeddingProvider:
    """Build a provider from a CLI spec: one_hot | hashed:<seed> | file:<path>."""
    if spec == "one_hot":
        if vocabulary is None:
            raise MetricsError("one_hot provider needs a vocabulary source")
        return OneHotProvider(vocabulary)
    if spec.startswith("hashed:"):
        try:
            seed = int(spec.split(":", 1)[1])
        except ValueError:
            raise MetricsError(f"bad hashed provider spec {spec!r}") from None
        return HashedRandomProvider(seed)
    if spec.startswith("file:"):
        return FileProvider.from_path(spec.split(":", 1)[1])
    raise MetricsError(f"unknown provider spec {spec!r}")
