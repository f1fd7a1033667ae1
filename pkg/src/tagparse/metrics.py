"""Scoring primitives: tagging accuracy, UAS, LAS.

Punctuation is included; scores are micro-averaged over all tokens.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .conllu import Treebank


@dataclass(frozen=True)
class ParseScore:
    correct_heads: int
    correct_labeled: int
    token_count: int

    @property
    def uas(self) -> float:
        return self.correct_heads / self.token_count if self.token_count else 0.0

    @property
    def las(self) -> float:
        return self.correct_labeled / self.token_count if self.token_count else 0.0


def attachment_scores(
    predicted: Sequence[Sequence[tuple[int, str]]], gold: Treebank
) -> ParseScore:
    """Score predicted (head, relation) pairs against the gold treebank."""
    if len(predicted) != len(gold.sentences):
        raise ValueError(
            f"predicted {len(predicted)} sentences, gold has {len(gold.sentences)}"
        )
    heads_ok = 0
    both_ok = 0
    total = 0
    for pred, sent in zip(predicted, gold.sentences):
        if len(pred) != len(sent.tokens):
            raise ValueError(
                f"sentence {sent.sent_id or total}: predicted {len(pred)} tokens, "
                f"gold has {len(sent.tokens)}"
            )
        for (head, rel), token in zip(pred, sent.tokens):
            total += 1
            if head == token.head:
                heads_ok += 1
                if rel == token.deprel:
                    both_ok += 1
    return ParseScore(correct_heads=heads_ok, correct_labeled=both_ok, token_count=total)


def tagging_accuracy(predicted: Sequence[Sequence[str]], gold: Treebank) -> float:
    """Fraction of tokens whose predicted UPOS equals gold."""
    if len(predicted) != len(gold.sentences):
        raise ValueError(
            f"predicted {len(predicted)} sentences, gold has {len(gold.sentences)}"
        )
    correct = 0
    total = 0
    for pred, sent in zip(predicted, gold.sentences):
        if len(pred) != len(sent.tokens):
            raise ValueError(
                f"sentence {sent.sent_id or total}: predicted {len(pred)} tags, "
                f"gold has {len(sent.tokens)}"
            )
        for tag, token in zip(pred, sent.tokens):
            total += 1
            correct += tag == token.upos
    return correct / total if total else 0.0
