"""UPOS taggers, biaffine dependency parsers, probing heads, and
tagging-error analysis over CoNLL-U treebanks."""

__version__ = "0.1.0"

from .conllu import (  # noqa: F401
    Sentence,
    Token,
    Treebank,
    Vocabulary,
    build_vocabulary,
    oov_flags,
    parse_conllu,
    read_treebank,
    write_conllu,
)
from .embeddings import EmbeddingTable, load_vectors, pca_compress  # noqa: F401
from .masking import TagScheme, build_conditioning  # noqa: F401
from .metrics import attachment_scores, tagging_accuracy  # noqa: F401
from .tags import MASK, UPOS_TAGS, TagInventory  # noqa: F401
