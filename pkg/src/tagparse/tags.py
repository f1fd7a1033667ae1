"""UPOS tag inventory, word-type classes, and reserved symbols."""

from __future__ import annotations

# The 17 universal POS tags, in canonical alphabetical order.
UPOS_TAGS = (
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
)

OPEN_CLASS = frozenset({"ADJ", "ADV", "INTJ", "NOUN", "PROPN", "VERB"})
CLOSED_CLASS = frozenset({"ADP", "AUX", "CCONJ", "DET", "NUM", "PART", "PRON", "SCONJ"})
OTHER_CLASS = frozenset({"PUNCT", "SYM", "X"})

WORD_CLASSES = ("open", "closed", "other")

# Reserved symbols. PAD/MASK take embedding slots; BOS and ROOT_TAG are
# context symbols for the tag statistics and never enter any vocabulary.
PAD = "<pad>"
MASK = "MASK"
BOS = "<s>"
ROOT_TAG = "<root>"


def word_class(tag: str) -> str:
    """Map a UPOS tag to its word-type class: open, closed, or other."""
    if tag in OPEN_CLASS:
        return "open"
    if tag in CLOSED_CLASS:
        return "closed"
    if tag in OTHER_CLASS:
        return "other"
    raise ValueError(f"not a UPOS tag: {tag!r}")


class TagInventory:
    """The fixed 17-tag UPOS set plus PAD and MASK embedding symbols.

    Two index spaces coexist:
      * class indices 0..16 over the real tags, used as classifier targets;
      * symbol ids with PAD=0 and MASK=1 reserved, used to index tag
        embedding tables in tag-conditioned parsers.
    """

    def __init__(self):
        self.tags = UPOS_TAGS
        self._class_index = {t: i for i, t in enumerate(self.tags)}
        self.symbols = (PAD, MASK) + self.tags
        self._symbol_id = {s: i for i, s in enumerate(self.symbols)}

    @property
    def num_classes(self) -> int:
        return len(self.tags)

    @property
    def num_symbols(self) -> int:
        return len(self.symbols)

    @property
    def pad_id(self) -> int:
        return self._symbol_id[PAD]

    @property
    def mask_id(self) -> int:
        return self._symbol_id[MASK]

    def __contains__(self, tag: str) -> bool:
        return tag in self._class_index

    def class_index(self, tag: str) -> int:
        try:
            return self._class_index[tag]
        except KeyError:
            raise ValueError(f"not a UPOS tag: {tag!r}") from None

    def class_label(self, index: int) -> str:
        return self.tags[index]

    def symbol_id(self, symbol: str) -> int:
        try:
            return self._symbol_id[symbol]
        except KeyError:
            raise ValueError(f"not a tag symbol: {symbol!r}") from None

    def __eq__(self, other) -> bool:
        return isinstance(other, TagInventory)

    def __repr__(self) -> str:
        return f"TagInventory({len(self.tags)} tags)"
