"""Tagging-error statistics: crossover, class breakdowns, per-tag F1,
confusion rankings, OOV proportions, and tag surprisal in two contexts.

Error identity is positional: two systems share an error when they err on
the same (sentence, token) position, whatever they predicted there.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .conllu import Treebank
from .tags import BOS, ROOT_TAG, UPOS_TAGS, WORD_CLASSES, word_class


@dataclass(frozen=True, order=True)
class ErrorRecord:
    sentence_index: int  # 0-based
    token_index: int     # 1-based
    gold: str
    predicted: str

    def __post_init__(self):
        if self.gold == self.predicted:
            raise ValueError("an error record needs gold != predicted")


@dataclass
class ErrorSet:
    records: list[ErrorRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def positions(self) -> frozenset[tuple[int, int]]:
        return frozenset((r.sentence_index, r.token_index) for r in self.records)

    def to_dicts(self) -> list[dict]:
        return [
            {
                "sentence_index": r.sentence_index,
                "token_index": r.token_index,
                "gold": r.gold,
                "predicted": r.predicted,
            }
            for r in sorted(self.records)
        ]

    @classmethod
    def from_dicts(cls, rows: Iterable[dict]) -> "ErrorSet":
        return cls(
            records=[
                ErrorRecord(
                    sentence_index=row["sentence_index"],
                    token_index=row["token_index"],
                    gold=row["gold"],
                    predicted=row["predicted"],
                )
                for row in rows
            ]
        )


def errors_from_tags(gold: Treebank, predicted: Sequence[Sequence[str]]) -> ErrorSet:
    """Collect positions where the predicted UPOS differs from gold."""
    if len(predicted) != len(gold.sentences):
        raise ValueError("predicted tags do not align with the treebank")
    records = []
    for si, (tags, sent) in enumerate(zip(predicted, gold.sentences)):
        if len(tags) != len(sent.tokens):
            raise ValueError(f"sentence {si}: tag sequence length mismatch")
        for tag, token in zip(tags, sent.tokens):
            if tag != token.upos:
                records.append(ErrorRecord(si, token.index, token.upos, tag))
    return ErrorSet(records)


@dataclass(frozen=True)
class CrossoverStats:
    only_a: int
    only_b: int
    both: int

    @property
    def union(self) -> int:
        return self.only_a + self.only_b + self.both

    def fractions(self) -> dict[str, float]:
        u = self.union
        if u == 0:
            return {"only_a": 0.0, "only_b": 0.0, "both": 0.0}
        return {"only_a": self.only_a / u, "only_b": self.only_b / u, "both": self.both / u}


def crossover(a: ErrorSet, b: ErrorSet) -> CrossoverStats:
    pa, pb = a.positions(), b.positions()
    both = len(pa & pb)
    return CrossoverStats(only_a=len(pa) - both, only_b=len(pb) - both, both=both)


@dataclass(frozen=True)
class ClassBreakdown:
    errors: dict[str, int]  # per word class
    tokens: dict[str, int]

    @property
    def total_errors(self) -> int:
        return sum(self.errors.values())

    @property
    def total_tokens(self) -> int:
        return sum(self.tokens.values())


def class_breakdown(errors: ErrorSet, gold: Treebank) -> ClassBreakdown:
    """Error and token counts per {open, closed, other}, keyed by gold tag."""
    err = {c: 0 for c in WORD_CLASSES}
    tok = {c: 0 for c in WORD_CLASSES}
    for sent in gold:
        for token in sent.tokens:
            tok[word_class(token.upos)] += 1
    for record in errors:
        err[word_class(record.gold)] += 1
    return ClassBreakdown(errors=err, tokens=tok)


def class_ratios(a: ClassBreakdown, b: ClassBreakdown) -> dict[str, Optional[float]]:
    """Per-class error-count ratio a/b; None where b has no errors."""
    out: dict[str, Optional[float]] = {}
    for c in WORD_CLASSES:
        out[c] = a.errors[c] / b.errors[c] if b.errors[c] else None
    return out


@dataclass(frozen=True)
class TagF1:
    precision: float
    recall: float
    f1: float
    gold_count: int
    predicted_count: int
    correct: int


def per_tag_f1(
    predicted: Sequence[Sequence[str]], gold: Treebank
) -> dict[str, TagF1]:
    """Micro P/R/F1 per tag. Tags never predicted and never gold are absent;
    a tag with gold occurrences but no predictions scores 0."""
    gold_counts: Counter[str] = Counter()
    pred_counts: Counter[str] = Counter()
    correct: Counter[str] = Counter()
    if len(predicted) != len(gold.sentences):
        raise ValueError("predicted tags do not align with the treebank")
    for tags, sent in zip(predicted, gold.sentences):
        if len(tags) != len(sent.tokens):
            raise ValueError("tag sequence length mismatch")
        for tag, token in zip(tags, sent.tokens):
            gold_counts[token.upos] += 1
            pred_counts[tag] += 1
            if tag == token.upos:
                correct[tag] += 1
    out = {}
    for tag in UPOS_TAGS:
        g, p = gold_counts[tag], pred_counts[tag]
        if g == 0 and p == 0:
            continue
        c = correct[tag]
        prec = c / p if p else 0.0
        rec = c / g if g else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        out[tag] = TagF1(
            precision=prec, recall=rec, f1=f1,
            gold_count=g, predicted_count=p, correct=c,
        )
    return out


def top_confusions(errors: ErrorSet, k: int = 5) -> list[tuple[tuple[str, str], int]]:
    """The k most frequent (gold -> predicted) confusions, count-descending
    with lexicographic tie-breaking."""
    counts = Counter((r.gold, r.predicted) for r in errors)
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:k]


@dataclass(frozen=True)
class SurprisalStats:
    context_kind: str            # "bigram" or "head_relation"
    mean_all: float              # bits over all target tokens
    mean_errors: Optional[float]  # bits over error tokens; None without errors
    token_count: int
    error_count: int


class TagContextModel:
    """Conditional tag distribution p(tag | context) with additive smoothing
    over the 17-tag inventory."""

    def __init__(self, smoothing: float = 1.0):
        if smoothing < 0:
            raise ValueError("smoothing must be non-negative")
        self.smoothing = smoothing
        self._joint: Counter[tuple] = Counter()
        self._context: Counter[tuple] = Counter()
        self._alphabet_size = len(UPOS_TAGS)

    def add(self, context: tuple, tag: str) -> None:
        self._joint[(context, tag)] += 1
        self._context[context] += 1

    def probability(self, context: tuple, tag: str) -> float:
        num = self._joint[(context, tag)] + self.smoothing
        den = self._context[context] + self.smoothing * self._alphabet_size
        if den == 0:
            raise ValueError(f"unseen context {context!r} with smoothing disabled")
        return num / den

    def surprisal(self, context: tuple, tag: str) -> float:
        """-log2 p(tag | context), in bits."""
        return -math.log2(self.probability(context, tag))


def _bigram_contexts(sentence) -> list[tuple]:
    tags = [BOS, BOS] + sentence.gold_tags()
    return [(tags[i], tags[i + 1]) for i in range(len(sentence.tokens))]


def _head_rel_contexts(sentence) -> list[tuple]:
    contexts = []
    for token in sentence.tokens:
        head_tag = ROOT_TAG if token.head == 0 else sentence.tokens[token.head - 1].upos
        contexts.append((head_tag, token.deprel))
    return contexts


def _surprisal_stats(
    kind: str,
    context_fn,
    train: Treebank,
    target: Treebank,
    errors: ErrorSet,
    smoothing: float,
) -> SurprisalStats:
    model = TagContextModel(smoothing=smoothing)
    for sent in train:
        for ctx, token in zip(context_fn(sent), sent.tokens):
            model.add(ctx, token.upos)
    error_positions = errors.positions()
    total = 0.0
    total_err = 0.0
    n = 0
    n_err = 0
    for si, sent in enumerate(target.sentences):
        for ctx, token in zip(context_fn(sent), sent.tokens):
            bits = model.surprisal(ctx, token.upos)
            total += bits
            n += 1
            if (si, token.index) in error_positions:
                total_err += bits
                n_err += 1
    return SurprisalStats(
        context_kind=kind,
        mean_all=total / n if n else 0.0,
        mean_errors=total_err / n_err if n_err else None,
        token_count=n,
        error_count=n_err,
    )


def bigram_surprisal(
    train: Treebank, target: Treebank, errors: ErrorSet, smoothing: float = 1.0
) -> SurprisalStats:
    """Mean -log2 p(tag | two preceding tags), estimated on the train split
    gold tags with BOS padding at sentence starts."""
    return _surprisal_stats("bigram", _bigram_contexts, train, target, errors, smoothing)


def head_rel_surprisal(
    train: Treebank, target: Treebank, errors: ErrorSet, smoothing: float = 1.0
) -> SurprisalStats:
    """Mean -log2 p(tag | head's gold tag, gold relation); tokens headed by
    the artificial root condition on a dedicated root symbol."""
    return _surprisal_stats(
        "head_relation", _head_rel_contexts, train, target, errors, smoothing
    )


@dataclass(frozen=True)
class OovStats:
    all_proportion: float
    error_proportion: float


def oov_error_stats(flags: Sequence[Sequence[bool]], errors: ErrorSet) -> OovStats:
    """OOV proportion over all tokens vs. over error tokens."""
    total = sum(len(f) for f in flags)
    oov_total = sum(sum(f) for f in flags)
    error_positions = errors.positions()
    err_oov = 0
    for si, ti in error_positions:
        if flags[si][ti - 1]:
            err_oov += 1
    return OovStats(
        all_proportion=oov_total / total if total else 0.0,
        error_proportion=err_oov / len(error_positions) if error_positions else 0.0,
    )
