"""CoNLL-U treebank reading, writing, vocabularies, and OOV flags.

Multiword-token range lines (ID "1-2") and empty nodes (ID "1.1") carry no
Token but are kept verbatim so that parse -> write -> parse is a field-level
fixed point.
"""

from __future__ import annotations

import io
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .tags import TagInventory

SPLITS = ("train", "dev", "test")

_INT_ID = re.compile(r"^[1-9][0-9]*$")
_RANGE_ID = re.compile(r"^[0-9]+-[0-9]+$")
_EMPTY_ID = re.compile(r"^[0-9]+\.[0-9]+$")

FORM_PAD_ID = 0
FORM_UNK_ID = 1


class ConlluParseError(ValueError):
    """Malformed CoNLL-U input; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class TreebankWarning(UserWarning):
    """Gold-data anomaly that is reported but does not abort parsing."""


@dataclass
class Token:
    index: int   # 1-based position within the sentence
    form: str
    upos: str
    head: int    # 0 = artificial root
    deprel: str


@dataclass
class Sentence:
    tokens: list[Token]
    sent_id: str = ""
    comments: list[str] = field(default_factory=list)
    # Raw 10-column rows in file order, including MWT ranges and empty nodes.
    rows: list[list[str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tokens)

    def gold_tags(self) -> list[str]:
        return [t.upos for t in self.tokens]


@dataclass
class Treebank:
    sentences: list[Sentence]
    split: str
    name: str = ""

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def token_count(self) -> int:
        return sum(len(s) for s in self.sentences)


def make_sentence(
    forms: Sequence[str],
    upos: Sequence[str],
    heads: Sequence[int],
    deprels: Sequence[str],
    sent_id: str = "",
) -> Sentence:
    """Build a Sentence programmatically, synthesizing default raw rows."""
    if not len(forms) == len(upos) == len(heads) == len(deprels):
        raise ValueError("forms, upos, heads, deprels must align")
    tokens = [
        Token(i + 1, f, u, h, d)
        for i, (f, u, h, d) in enumerate(zip(forms, upos, heads, deprels))
    ]
    rows = [
        [str(t.index), t.form, "_", t.upos, "_", "_", str(t.head), t.deprel, "_", "_"]
        for t in tokens
    ]
    comments = [f"# sent_id = {sent_id}"] if sent_id else []
    return Sentence(tokens=tokens, sent_id=sent_id, comments=comments, rows=rows)


def _finish_sentence(sentence: Sentence, start_line: int) -> Optional[Sentence]:
    if not sentence.rows and not sentence.comments:
        return None
    if not sentence.tokens:
        warnings.warn(
            f"sentence ending at line {start_line} has no token lines; dropped",
            TreebankWarning,
        )
        return None
    n = len(sentence.tokens)
    roots = [t for t in sentence.tokens if t.head == 0]
    label = sentence.sent_id or f"line {start_line}"
    if len(roots) != 1:
        warnings.warn(
            f"sentence {label}: expected exactly one root, found {len(roots)}",
            TreebankWarning,
        )
    for t in sentence.tokens:
        if t.head > n:
            warnings.warn(
                f"sentence {label}: token {t.index} head {t.head} "
                f"exceeds sentence length {n}",
                TreebankWarning,
            )
    return sentence


def parse_conllu(
    source: Union[str, bytes, io.IOBase], split: str = "train", name: str = ""
) -> Treebank:
    """Parse CoNLL-U text into a Treebank.

    Accepts a string, UTF-8 bytes, or a file object. Structural violations
    (column count, non-integer head, self-headed token, non-contiguous ids)
    raise ConlluParseError with the line number; gold-data anomalies
    (multiple roots, out-of-range heads) are warnings.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")

    tag_inventory = TagInventory()
    sentences: list[Sentence] = []
    current = Sentence(tokens=[])
    block_start = 1

    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if line == "":
            done = _finish_sentence(current, block_start)
            if done is not None:
                sentences.append(done)
            current = Sentence(tokens=[])
            block_start = lineno + 1
            continue
        if line.startswith("#"):
            current.comments.append(line)
            if line[1:].split("=", 1)[0].strip() == "sent_id" and "=" in line:
                current.sent_id = line.split("=", 1)[1].strip()
            continue

        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluParseError(f"expected 10 columns, found {len(cols)}", lineno)
        tid = cols[0]
        if _RANGE_ID.match(tid) or _EMPTY_ID.match(tid):
            current.rows.append(cols)
            continue
        if not _INT_ID.match(tid):
            raise ConlluParseError(f"invalid token id {tid!r}", lineno)

        index = int(tid)
        if index != len(current.tokens) + 1:
            raise ConlluParseError(
                f"token id {index} breaks 1..n contiguity "
                f"(expected {len(current.tokens) + 1})",
                lineno,
            )
        try:
            head = int(cols[6])
        except ValueError:
            raise ConlluParseError(f"non-integer head {cols[6]!r}", lineno) from None
        if head < 0:
            raise ConlluParseError(f"negative head {head}", lineno)
        if head == index:
            raise ConlluParseError(f"token {index} is its own head", lineno)
        upos = cols[3]
        if upos not in tag_inventory:
            warnings.warn(
                f"line {lineno}: UPOS {upos!r} outside the 17-tag inventory",
                TreebankWarning,
            )
        current.tokens.append(Token(index, cols[1], upos, head, cols[7]))
        current.rows.append(cols)

    done = _finish_sentence(current, block_start)
    if done is not None:
        sentences.append(done)
    if not sentences:
        raise ConlluParseError("no sentences found", 1)
    return Treebank(sentences=sentences, split=split, name=name)


def read_treebank(path: Union[str, Path], split: str, name: str = "") -> Treebank:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        return parse_conllu(fh.read(), split=split, name=name or path.stem)


def write_conllu(
    treebank: Treebank,
    tags: Optional[Sequence[Sequence[str]]] = None,
) -> str:
    """Render a Treebank back to CoNLL-U text (UTF-8 string, LF endings).

    `tags`, if given, must align 1:1 with the tokens of each sentence and
    replaces the UPOS column; all other columns come from the stored rows
    (or the current Token fields for UPOS/HEAD/DEPREL).
    """
    if tags is not None and len(tags) != len(treebank.sentences):
        raise ValueError(
            f"override has {len(tags)} sentences, treebank has "
            f"{len(treebank.sentences)}"
        )
    out: list[str] = []
    for si, sentence in enumerate(treebank.sentences):
        overrides = None
        if tags is not None:
            overrides = list(tags[si])
            if len(overrides) != len(sentence.tokens):
                raise ValueError(
                    f"sentence {si}: override has {len(overrides)} tags for "
                    f"{len(sentence.tokens)} tokens"
                )
        out.extend(sentence.comments)
        rows = sentence.rows or make_sentence(
            [t.form for t in sentence.tokens],
            [t.upos for t in sentence.tokens],
            [t.head for t in sentence.tokens],
            [t.deprel for t in sentence.tokens],
        ).rows
        ti = 0
        for row in rows:
            if _INT_ID.match(row[0]):
                token = sentence.tokens[ti]
                cols = list(row)
                cols[3] = overrides[ti] if overrides is not None else token.upos
                cols[6] = str(token.head)
                cols[7] = token.deprel
                out.append("\t".join(cols))
                ti += 1
            else:
                out.append("\t".join(row))
        out.append("")
    return "\n".join(out) + "\n"


def write_treebank(
    treebank: Treebank,
    path: Union[str, Path],
    tags: Optional[Sequence[Sequence[str]]] = None,
) -> None:
    Path(path).write_text(write_conllu(treebank, tags), encoding="utf-8", newline="\n")


@dataclass(frozen=True)
class Vocabulary:
    """Train-split lookup tables. Ids 0/1 are padding/unknown for forms and
    chars; tags carry their own reserved symbols in TagInventory."""

    forms: dict[str, int]
    chars: dict[str, int]
    tags: TagInventory
    relations: dict[str, int]

    def form_id(self, form: str) -> int:
        return self.forms.get(form, FORM_UNK_ID)

    def char_id(self, ch: str) -> int:
        return self.chars.get(ch, FORM_UNK_ID)

    @property
    def num_forms(self) -> int:
        return len(self.forms) + 2

    @property
    def num_chars(self) -> int:
        return len(self.chars) + 2

    @property
    def num_relations(self) -> int:
        return len(self.relations)

    def rel_id(self, deprel: str) -> int:
        try:
            return self.relations[deprel]
        except KeyError:
            raise ValueError(f"relation {deprel!r} not in vocabulary") from None

    def rel_label(self, rel_id: int) -> str:
        return self._rel_labels[rel_id]

    @property
    def _rel_labels(self) -> list[str]:
        labels = [""] * len(self.relations)
        for rel, i in self.relations.items():
            labels[i] = rel
        return labels

    def to_dict(self) -> dict:
        return {
            "forms": dict(self.forms),
            "chars": dict(self.chars),
            "relations": dict(self.relations),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Vocabulary":
        return cls(
            forms=dict(data["forms"]),
            chars=dict(data["chars"]),
            tags=TagInventory(),
            relations=dict(data["relations"]),
        )


def build_vocabulary(train: Treebank) -> Vocabulary:
    """First-occurrence-ordered vocabularies from the train split only."""
    if train.split != "train":
        raise ValueError(f"vocabulary must be built from the train split, got {train.split!r}")
    if not train.sentences or train.token_count() == 0:
        raise ValueError("cannot build a vocabulary from an empty treebank")
    forms: dict[str, int] = {}
    chars: dict[str, int] = {}
    relations: dict[str, int] = {}
    for sentence in train:
        for token in sentence.tokens:
            if token.form not in forms:
                forms[token.form] = len(forms) + 2
            for ch in token.form:
                if ch not in chars:
                    chars[ch] = len(chars) + 2
            if token.deprel not in relations:
                relations[token.deprel] = len(relations)
    return Vocabulary(forms=forms, chars=chars, tags=TagInventory(), relations=relations)


def oov_flags(
    vocab: Union[Vocabulary, Iterable[str]], treebank: Treebank
) -> list[list[bool]]:
    """Per-token flags: True iff the surface form is absent from the
    training vocabulary (case-sensitive exact match). An alternate form set
    (e.g. an embedding vocabulary) may be passed instead of a Vocabulary."""
    if isinstance(vocab, Vocabulary):
        known = vocab.forms
    else:
        known = set(vocab)
    return [[t.form not in known for t in s.tokens] for s in treebank]
