"""The six tag-conditioning regimes for parser inputs.

A scheme maps every token to a symbol from the tag inventory plus MASK (or
disables tag input entirely). The same scheme must be applied at training
and inference time, so conditionings are built per split.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from .analysis import ErrorSet
from .conllu import Treebank
from .tags import MASK


class TagScheme(Enum):
    NONE = "none"
    PRED = "pred"
    MASK_ALL_BUT_TAGGER_ERRORS = "mask_all_but_tagger_errors"
    MASK_ALL_BUT_PROBE_ERRORS = "mask_all_but_probe_errors"
    MASK_TAGGER_ERRORS = "mask_tagger_errors"
    GOLD = "gold"

    @property
    def needs_predicted(self) -> bool:
        return self in (TagScheme.PRED, TagScheme.MASK_TAGGER_ERRORS)

    @property
    def needs_errors(self) -> bool:
        return self in (
            TagScheme.MASK_ALL_BUT_TAGGER_ERRORS,
            TagScheme.MASK_ALL_BUT_PROBE_ERRORS,
            TagScheme.MASK_TAGGER_ERRORS,
        )

    @property
    def uses_tags(self) -> bool:
        return self is not TagScheme.NONE


class SchemeError(ValueError):
    pass


@dataclass
class TagConditioning:
    """Per-token tag symbols for one treebank under one scheme.

    `symbols` is None exactly for the no-tag scheme. `provenance` records
    the scheme and which inputs produced the conditioning.
    """

    scheme: TagScheme
    symbols: Optional[list[list[str]]]
    provenance: dict

    def __post_init__(self):
        if (self.symbols is None) != (self.scheme is TagScheme.NONE):
            raise SchemeError("symbols must be absent exactly for the no-tag scheme")


def build_conditioning(
    scheme: TagScheme,
    gold: Treebank,
    predicted: Optional[Sequence[Sequence[str]]] = None,
    errors: Optional[ErrorSet] = None,
) -> TagConditioning:
    """Assemble per-token parser input symbols for one split.

    gold/predicted/MASK are chosen per position from the scheme definition;
    error positions come from the supplied ErrorSet (tagger or probe errors,
    depending on the scheme).
    """
    provenance = {
        "scheme": scheme.value,
        "split": gold.split,
        "treebank": gold.name,
        "predicted": predicted is not None,
        "error_count": len(errors) if errors is not None else None,
    }
    if scheme is TagScheme.NONE:
        return TagConditioning(scheme=scheme, symbols=None, provenance=provenance)
    if scheme is TagScheme.GOLD:
        symbols = [s.gold_tags() for s in gold]
        return TagConditioning(scheme=scheme, symbols=symbols, provenance=provenance)

    if scheme.needs_predicted:
        if predicted is None:
            raise SchemeError(f"{scheme.value} requires predicted tags")
        if len(predicted) != len(gold.sentences) or any(
            len(p) != len(s.tokens) for p, s in zip(predicted, gold.sentences)
        ):
            raise SchemeError("predicted tags do not align with the treebank")
    if scheme.needs_errors:
        if errors is None:
            raise SchemeError(f"{scheme.value} requires an error set")
        n_sent = len(gold.sentences)
        for record in errors:
            if not 0 <= record.sentence_index < n_sent:
                raise SchemeError(f"error sentence index {record.sentence_index} out of range")
            if not 1 <= record.token_index <= len(gold.sentences[record.sentence_index]):
                raise SchemeError(
                    f"error token index {record.token_index} out of range in "
                    f"sentence {record.sentence_index}"
                )

    error_positions = errors.positions() if errors is not None else frozenset()
    symbols = []
    for si, sent in enumerate(gold.sentences):
        row = []
        for token in sent.tokens:
            is_error = (si, token.index) in error_positions
            if scheme is TagScheme.PRED:
                row.append(predicted[si][token.index - 1])
            elif scheme in (
                TagScheme.MASK_ALL_BUT_TAGGER_ERRORS,
                TagScheme.MASK_ALL_BUT_PROBE_ERRORS,
            ):
                row.append(token.upos if is_error else MASK)
            elif scheme is TagScheme.MASK_TAGGER_ERRORS:
                row.append(MASK if is_error else predicted[si][token.index - 1])
            else:
                raise SchemeError(f"unhandled scheme {scheme}")
        symbols.append(row)
    return TagConditioning(scheme=scheme, symbols=symbols, provenance=provenance)
