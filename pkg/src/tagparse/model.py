"""Shared BiLSTM encoder with a tagger head or a biaffine parser head.

Parameters fall into four named groups (embeddings, char_encoder, bilstm,
head) so probing can freeze everything but the head and verify it did.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from .conllu import Vocabulary
from .embeddings import EmbeddingTable
from . import mst

TAGGER_KIND = "tagger"
PARSER_KIND = "parser"

ARC_MLP_DIM = 100
REL_MLP_DIM = 50
TAGGER_MLP_DIM = 100

PARAM_GROUPS = ("embeddings", "char_encoder", "bilstm", "head")

CHECKPOINT_VERSION = 1

# Sentences longer than this are truncated (with a warning) during batching.
MAX_SENTENCE_LEN = 512


@dataclass(frozen=True)
class EncoderConfig:
    word_dim: int = 100
    char_dim: int = 100
    char_lstm_input: int = 100
    tag_dim: int = 100
    lstm_layers: int = 3
    lstm_size: int = 200  # per direction
    dropout: float = 0.33

    def __post_init__(self):
        for name in ("word_dim", "char_dim", "char_lstm_input", "tag_dim",
                     "lstm_layers", "lstm_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")

    @property
    def output_dim(self) -> int:
        return 2 * self.lstm_size


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 2e-3
    beta1: float = 0.9
    beta2: float = 0.9
    batch_size: int = 30
    max_epochs: int = 200
    patience: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.batch_size <= 0 or self.max_epochs <= 0 or self.patience <= 0:
            raise ValueError("batch_size, max_epochs, patience must be positive")
        if self.patience >= self.max_epochs:
            raise ValueError("patience must be smaller than max_epochs")


@dataclass
class Batch:
    """Padded tensors for a list of sentences; id 0 is padding throughout."""

    word_ids: torch.Tensor     # (B, T)
    char_ids: torch.Tensor     # (B, T, C)
    char_lengths: torch.Tensor  # (B, T)
    lengths: torch.Tensor      # (B,)
    tag_ids: Optional[torch.Tensor]  # (B, T) conditioning symbols, or None
    gold_classes: torch.Tensor  # (B, T), -100 at padding
    gold_heads: torch.Tensor   # (B, T), -100 at padding
    gold_rels: torch.Tensor    # (B, T), -100 at padding

    @property
    def size(self) -> int:
        return self.word_ids.shape[0]


class MLP(nn.Module):
    """Single ReLU layer with dropout on its input."""

    def __init__(self, input_dim: int, output_dim: int, dropout: float):
        super().__init__()
        self.dropout = nn.Dropout(dropout)
        self.linear = nn.Linear(input_dim, output_dim)

    def forward(self, x):
        return torch.relu(self.linear(self.dropout(x)))


class Biaffine(nn.Module):
    """Bilinear scorer with bias terms on both sides.

    Inputs (B, T, d) x (B, T, d) -> scores (B, T, T, out) with rows indexing
    dependents and columns candidate heads.
    """

    def __init__(self, dim: int, output_dim: int):
        super().__init__()
        self.weight = nn.Parameter(torch.zeros(output_dim, dim + 1, dim + 1))

    def forward(self, dep, head):
        dep = torch.cat([dep, dep.new_ones(*dep.shape[:-1], 1)], dim=-1)
        head = torch.cat([head, head.new_ones(*head.shape[:-1], 1)], dim=-1)
        return torch.einsum("bxi,oij,byj->bxyo", dep, self.weight, head)


class CharEncoder(nn.Module):
    """Single-layer BiLSTM over characters; final states concatenated and
    projected to the char summary width."""

    def __init__(self, num_chars: int, input_dim: int, output_dim: int):
        super().__init__()
        self.emb = nn.Embedding(num_chars, input_dim, padding_idx=0)
        self.lstm = nn.LSTM(input_dim, input_dim, num_layers=1,
                            bidirectional=True, batch_first=True)
        self.proj = nn.Linear(2 * input_dim, output_dim)

    def forward(self, char_ids, char_lengths):
        b, t, c = char_ids.shape
        flat = char_ids.reshape(b * t, c)
        lens = char_lengths.reshape(b * t).clamp(min=1)
        x = self.emb(flat)
        packed = pack_padded_sequence(x, lens.cpu(), batch_first=True,
                                      enforce_sorted=False)
        _, (h, _) = self.lstm(packed)
        summary = torch.cat([h[0], h[1]], dim=-1)
        return self.proj(summary).reshape(b, t, -1)


class Encoder(nn.Module):
    """word + char (+ tag) embeddings -> stacked BiLSTM -> contextual vectors."""

    def __init__(self, config: EncoderConfig, vocab: Vocabulary,
                 word_matrix: np.ndarray, use_tags: bool):
        super().__init__()
        self.config = config
        self.use_tags = use_tags
        weights = torch.as_tensor(word_matrix, dtype=torch.float32)
        if weights.shape != (vocab.num_forms, config.word_dim):
            raise ValueError(
                f"word matrix shape {tuple(weights.shape)} does not match "
                f"({vocab.num_forms}, {config.word_dim})"
            )
        # Pre-trained word vectors stay fixed; char/tag embeddings train.
        self.word_emb = nn.Embedding.from_pretrained(weights, freeze=True,
                                                     padding_idx=0)
        self.char_encoder = CharEncoder(vocab.num_chars, config.char_lstm_input,
                                        config.char_dim)
        if use_tags:
            self.tag_emb = nn.Embedding(vocab.tags.num_symbols, config.tag_dim,
                                        padding_idx=0)
        else:
            self.tag_emb = None
        input_dim = config.word_dim + config.char_dim
        input_dim += config.tag_dim if use_tags else 0
        self.root_input = nn.Parameter(torch.randn(input_dim) * 0.1)
        self.bilstm = nn.LSTM(
            input_dim, config.lstm_size, num_layers=config.lstm_layers,
            bidirectional=True, batch_first=True,
            dropout=config.dropout if config.lstm_layers > 1 else 0.0,
        )
        self.word_dropout = nn.Dropout(config.dropout)
        self.char_dropout = nn.Dropout(config.dropout)
        self.tag_dropout = nn.Dropout(config.dropout)

    def forward(self, batch: Batch, include_root: bool) -> torch.Tensor:
        word = self.word_dropout(self.word_emb(batch.word_ids))
        char = self.char_dropout(self.char_encoder(batch.char_ids, batch.char_lengths))
        parts = [word, char]
        if self.tag_emb is not None:
            if batch.tag_ids is None:
                raise ValueError("tag inputs required but missing from the batch")
            parts.append(self.tag_dropout(self.tag_emb(batch.tag_ids)))
        elif batch.tag_ids is not None:
            raise ValueError("tag inputs provided but tag embeddings are disabled")
        x = torch.cat(parts, dim=-1)
        lengths = batch.lengths
        if include_root:
            root = self.root_input.expand(x.shape[0], 1, x.shape[-1])
            x = torch.cat([root, x], dim=1)
            lengths = lengths + 1
        packed = pack_padded_sequence(x, lengths.cpu(), batch_first=True,
                                      enforce_sorted=False)
        out, _ = self.bilstm(packed)
        out, _ = pad_packed_sequence(out, batch_first=True, total_length=x.shape[1])
        return out


class TaggerHead(nn.Module):
    def __init__(self, input_dim: int, num_classes: int, dropout: float,
                 hidden_dim: int = TAGGER_MLP_DIM):
        super().__init__()
        self.mlp = MLP(input_dim, hidden_dim, dropout)
        self.out = nn.Linear(hidden_dim, num_classes)

    def forward(self, vectors):
        return self.out(self.mlp(vectors))


class ParserHead(nn.Module):
    def __init__(self, input_dim: int, num_rels: int, dropout: float,
                 arc_dim: int = ARC_MLP_DIM, rel_dim: int = REL_MLP_DIM):
        super().__init__()
        self.arc_dep = MLP(input_dim, arc_dim, dropout)
        self.arc_head = MLP(input_dim, arc_dim, dropout)
        self.rel_dep = MLP(input_dim, rel_dim, dropout)
        self.rel_head = MLP(input_dim, rel_dim, dropout)
        self.arc_biaffine = Biaffine(arc_dim, 1)
        self.rel_biaffine = Biaffine(rel_dim, num_rels)

    def forward(self, vectors):
        arc = self.arc_biaffine(self.arc_dep(vectors), self.arc_head(vectors))
        rel = self.rel_biaffine(self.rel_dep(vectors), self.rel_head(vectors))
        return arc.squeeze(-1), rel


@dataclass
class ScoredParse:
    """Raw arc scores and relation distributions for one sentence.

    arc_scores[dep, head] with the root at index 0; rel_probs sums to 1
    over the last axis for every (dep, head) pair.
    """

    arc_scores: np.ndarray  # (n+1, n+1)
    rel_probs: np.ndarray   # (n+1, n+1, R)

    def decode(self, method: str = "mst") -> tuple[list[int], list[int]]:
        heads, rels = mst.decode_tree(self.arc_scores, self.rel_probs, method=method)
        return heads, rels


class Model(nn.Module):
    """Encoder plus exactly one head (tagger or parser)."""

    def __init__(self, kind: str, encoder: Encoder, head: nn.Module):
        super().__init__()
        if kind not in (TAGGER_KIND, PARSER_KIND):
            raise ValueError(f"unknown model kind {kind!r}")
        self.kind = kind
        self.encoder = encoder
        self.head = head

    def encode(self, batch: Batch) -> torch.Tensor:
        """Contextual vectors, with a learned root prepended for parsers."""
        return self.encoder(batch, include_root=self.kind == PARSER_KIND)

    def forward(self, batch: Batch):
        vectors = self.encode(batch)
        return self.head(vectors)

    def tag_distributions(self, batch: Batch) -> torch.Tensor:
        """Per-token probabilities over the 17 tags (rows sum to 1)."""
        if self.kind != TAGGER_KIND:
            raise ValueError("tag distributions require a tagger head")
        return torch.softmax(self.forward(batch), dim=-1)


def word_embedding_matrix(vocab: Vocabulary, table: EmbeddingTable) -> np.ndarray:
    """Rows by form id: 0 padding (zeros), 1 unknown (table mean), then the
    table vector of each train form (unknown vector when absent)."""
    matrix = np.zeros((vocab.num_forms, table.dim), dtype=np.float64)
    matrix[1] = table.unknown_vector
    for form, idx in vocab.forms.items():
        matrix[idx] = table.lookup(form)
    return matrix


class ModelState:
    """A model plus everything needed to rebuild it: config snapshot,
    vocabulary, conditioning regime, and per-group freeze flags."""

    def __init__(self, model: Model, encoder_config: EncoderConfig,
                 vocab: Vocabulary, tag_scheme: Optional[str] = None,
                 frozen: Optional[set[str]] = None):
        self.model = model
        self.encoder_config = encoder_config
        self.vocab = vocab
        self.tag_scheme = tag_scheme
        self.frozen = set(frozen or ())

    @property
    def kind(self) -> str:
        return self.model.kind

    @property
    def uses_tag_inputs(self) -> bool:
        return self.model.encoder.tag_emb is not None

    @staticmethod
    def group_of(param_name: str) -> str:
        if param_name.startswith("encoder.char_encoder."):
            return "char_encoder"
        if param_name.startswith("encoder.bilstm."):
            return "bilstm"
        if param_name.startswith("head."):
            return "head"
        return "embeddings"  # word/tag embeddings and the root input vector

    def parameter_groups(self) -> dict[str, list[tuple[str, nn.Parameter]]]:
        groups: dict[str, list[tuple[str, nn.Parameter]]] = {g: [] for g in PARAM_GROUPS}
        for name, param in self.model.named_parameters():
            groups[self.group_of(name)].append((name, param))
        return groups

    def freeze(self, groups) -> None:
        groups = set(groups)
        unknown = groups - set(PARAM_GROUPS)
        if unknown:
            raise ValueError(f"unknown parameter groups: {sorted(unknown)}")
        by_group = self.parameter_groups()
        for g in groups:
            for _, param in by_group[g]:
                param.requires_grad_(False)
        self.frozen |= groups

    def trainable_parameters(self) -> list[nn.Parameter]:
        return [p for p in self.model.parameters() if p.requires_grad]

    def group_checksum(self, group: str) -> str:
        digest = hashlib.sha256()
        for name, param in sorted(self.parameter_groups()[group]):
            digest.update(name.encode())
            digest.update(param.detach().cpu().contiguous().numpy().tobytes())
        return digest.hexdigest()

    def checksums(self, groups=PARAM_GROUPS) -> dict[str, str]:
        return {g: self.group_checksum(g) for g in groups}


def build_model(
    kind: str,
    vocab: Vocabulary,
    table: EmbeddingTable,
    config: EncoderConfig,
    seed: int,
    use_tags: bool = False,
    tag_scheme: Optional[str] = None,
) -> ModelState:
    """Construct a freshly initialised tagger or parser (seeded)."""
    if table.dim != config.word_dim:
        raise ValueError(
            f"embedding table dim {table.dim} does not match word_dim {config.word_dim}"
        )
    torch.manual_seed(seed)
    matrix = word_embedding_matrix(vocab, table)
    encoder = Encoder(config, vocab, matrix, use_tags=use_tags)
    if kind == TAGGER_KIND:
        head: nn.Module = TaggerHead(config.output_dim, vocab.tags.num_classes,
                                     config.dropout)
    elif kind == PARSER_KIND:
        head = ParserHead(config.output_dim, vocab.num_relations, config.dropout)
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    model = Model(kind, encoder, head)
    return ModelState(model, config, vocab, tag_scheme=tag_scheme)


def build_tagger(vocab, table, config: EncoderConfig, seed: int) -> ModelState:
    """Taggers never consume tag inputs."""
    return build_model(TAGGER_KIND, vocab, table, config, seed, use_tags=False)


def build_parser(vocab, table, config: EncoderConfig, seed: int,
                 use_tags: bool, tag_scheme: Optional[str] = None) -> ModelState:
    return build_model(PARSER_KIND, vocab, table, config, seed,
                       use_tags=use_tags, tag_scheme=tag_scheme)


def save_checkpoint(state: ModelState, path: Union[str, Path]) -> None:
    """Self-describing single-file archive; tensor round trip is bit-exact."""
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "kind": state.kind,
        "encoder_config": asdict(state.encoder_config),
        "use_tags": state.uses_tag_inputs,
        "tag_scheme": state.tag_scheme,
        "frozen": sorted(state.frozen),
        "vocabulary": state.vocab.to_dict(),
        "parameters": state.model.state_dict(),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_checkpoint(path: Union[str, Path]) -> ModelState:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version!r}")
    vocab = Vocabulary.from_dict(payload["vocabulary"])
    config = EncoderConfig(**payload["encoder_config"])
    use_tags = payload["use_tags"]
    matrix = np.zeros((vocab.num_forms, config.word_dim))
    encoder = Encoder(config, vocab, matrix, use_tags=use_tags)
    kind = payload["kind"]
    if kind == TAGGER_KIND:
        head: nn.Module = TaggerHead(config.output_dim, vocab.tags.num_classes,
                                     config.dropout)
    else:
        head = ParserHead(config.output_dim, vocab.num_relations, config.dropout)
    model = Model(kind, encoder, head)
    model.load_state_dict(payload["parameters"])
    model.encoder.word_emb.weight.requires_grad_(False)
    state = ModelState(model, config, vocab, tag_scheme=payload["tag_scheme"])
    if payload["frozen"]:
        state.freeze(payload["frozen"])
    return state
