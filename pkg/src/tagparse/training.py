"""Batching, losses, the early-stopping training loop, and prediction."""

from __future__ import annotations

import random
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import torch
import torch.nn.functional as F

from .analysis import ErrorSet, errors_from_tags
from .conllu import Sentence, Treebank, Vocabulary
from .masking import TagConditioning
from .metrics import attachment_scores, tagging_accuracy
from .model import (
    MAX_SENTENCE_LEN,
    PARSER_KIND,
    TAGGER_KIND,
    Batch,
    ModelState,
    ScoredParse,
    TrainConfig,
)
from .tags import MASK

PREDICT_BATCH = 64


def make_batch(
    sentences: Sequence[Sentence],
    vocab: Vocabulary,
    symbol_rows: Optional[Sequence[Sequence[str]]] = None,
) -> Batch:
    """Collate sentences into padded tensors (id 0 = padding)."""
    lengths = []
    for s in sentences:
        if len(s) > MAX_SENTENCE_LEN:
            warnings.warn(
                f"sentence {s.sent_id or '?'} truncated to {MAX_SENTENCE_LEN} tokens"
            )
        lengths.append(min(len(s), MAX_SENTENCE_LEN))
    b = len(sentences)
    t = max(lengths)
    c = max(
        (len(tok.form) for s, n in zip(sentences, lengths) for tok in s.tokens[:n]),
        default=1,
    )
    c = max(c, 1)

    word = torch.zeros(b, t, dtype=torch.long)
    chars = torch.zeros(b, t, c, dtype=torch.long)
    char_len = torch.zeros(b, t, dtype=torch.long)
    tag_ids = torch.zeros(b, t, dtype=torch.long) if symbol_rows is not None else None
    gold_cls = torch.full((b, t), -100, dtype=torch.long)
    gold_heads = torch.full((b, t), -100, dtype=torch.long)
    gold_rels = torch.full((b, t), -100, dtype=torch.long)

    for bi, (sent, n) in enumerate(zip(sentences, lengths)):
        if symbol_rows is not None and len(symbol_rows[bi]) != len(sent):
            raise ValueError(f"conditioning row {bi} does not align with the sentence")
        for ti, token in enumerate(sent.tokens[:n]):
            word[bi, ti] = vocab.form_id(token.form)
            for ci, ch in enumerate(token.form):
                chars[bi, ti, ci] = vocab.char_id(ch)
            char_len[bi, ti] = len(token.form)
            if tag_ids is not None:
                tag_ids[bi, ti] = vocab.tags.symbol_id(symbol_rows[bi][ti])
            if token.upos in vocab.tags:
                gold_cls[bi, ti] = vocab.tags.class_index(token.upos)
            if token.head <= n:
                gold_heads[bi, ti] = token.head
            gold_rels[bi, ti] = vocab.relations.get(token.deprel, -100)
    return Batch(
        word_ids=word,
        char_ids=chars,
        char_lengths=char_len,
        lengths=torch.tensor(lengths, dtype=torch.long),
        tag_ids=tag_ids,
        gold_classes=gold_cls,
        gold_heads=gold_heads,
        gold_rels=gold_rels,
    )


def compute_loss(state: ModelState, batch: Batch) -> torch.Tensor:
    """Tagger: tag cross-entropy. Parser: head cross-entropy per dependent
    plus relation cross-entropy at the gold arcs."""
    if state.kind == TAGGER_KIND:
        logits = state.model(batch)
        return F.cross_entropy(
            logits.reshape(-1, logits.shape[-1]),
            batch.gold_classes.reshape(-1),
            ignore_index=-100,
        )
    arc, rel = state.model(batch)
    t1 = arc.shape[1]
    cols = torch.arange(t1)
    head_valid = cols.unsqueeze(0) <= batch.lengths.unsqueeze(1)  # (B, T+1)
    arc_logits = arc[:, 1:, :].masked_fill(~head_valid.unsqueeze(1), -1e9)
    arc_loss = F.cross_entropy(
        arc_logits.reshape(-1, t1),
        batch.gold_heads.reshape(-1),
        ignore_index=-100,
    )
    rel_dep = rel[:, 1:, :, :]
    index = batch.gold_heads.clamp(min=0).unsqueeze(-1).unsqueeze(-1)
    index = index.expand(-1, -1, 1, rel.shape[-1])
    rel_at_gold = rel_dep.gather(2, index).squeeze(2)
    rel_loss = F.cross_entropy(
        rel_at_gold.reshape(-1, rel.shape[-1]),
        batch.gold_rels.reshape(-1),
        ignore_index=-100,
    )
    return arc_loss + rel_loss


def _conditioning_rows(
    state: ModelState,
    treebank: Treebank,
    conditioning: Optional[TagConditioning],
    allow_auto_mask: bool,
) -> Optional[list[list[str]]]:
    if not state.uses_tag_inputs:
        if conditioning is not None and conditioning.symbols is not None:
            raise ValueError("model takes no tag inputs but conditioning was given")
        return None
    if conditioning is not None:
        if conditioning.symbols is None:
            raise ValueError("no-tag conditioning passed to a tag-consuming model")
        if len(conditioning.symbols) != len(treebank.sentences):
            raise ValueError("conditioning does not align with the treebank")
        return conditioning.symbols
    if allow_auto_mask:
        # Withheld tag information: feed the mask symbol at every position.
        return [[MASK] * len(s) for s in treebank]
    raise ValueError("model consumes tag inputs; a conditioning is required")


def predict_tags(
    state: ModelState,
    treebank: Treebank,
    conditioning: Optional[TagConditioning] = None,
    batch_size: int = PREDICT_BATCH,
) -> tuple[list[list[str]], ErrorSet]:
    """Argmax tags per token plus the positions where they differ from gold."""
    if state.kind != TAGGER_KIND:
        raise ValueError("predict_tags requires a tagger head")
    rows = _conditioning_rows(state, treebank, conditioning, allow_auto_mask=True)
    state.model.eval()
    predictions: list[list[str]] = []
    with torch.no_grad():
        sents = treebank.sentences
        for start in range(0, len(sents), batch_size):
            chunk = sents[start:start + batch_size]
            chunk_rows = rows[start:start + batch_size] if rows is not None else None
            batch = make_batch(chunk, state.vocab, chunk_rows)
            probs = state.model.tag_distributions(batch)
            best = probs.argmax(dim=-1)
            for bi, sent in enumerate(chunk):
                n = min(len(sent), MAX_SENTENCE_LEN)
                tags = [state.vocab.tags.class_label(int(best[bi, ti])) for ti in range(n)]
                tags += [tags[-1]] * (len(sent) - n) if n < len(sent) else []
                predictions.append(tags)
    return predictions, errors_from_tags(treebank, predictions)


def score_sentences(
    state: ModelState,
    treebank: Treebank,
    conditioning: Optional[TagConditioning] = None,
    batch_size: int = PREDICT_BATCH,
) -> list[ScoredParse]:
    """Arc scores and relation distributions per sentence."""
    if state.kind != PARSER_KIND:
        raise ValueError("scoring parses requires a parser head")
    rows = _conditioning_rows(state, treebank, conditioning, allow_auto_mask=False)
    state.model.eval()
    parses: list[ScoredParse] = []
    with torch.no_grad():
        sents = treebank.sentences
        for start in range(0, len(sents), batch_size):
            chunk = sents[start:start + batch_size]
            chunk_rows = rows[start:start + batch_size] if rows is not None else None
            batch = make_batch(chunk, state.vocab, chunk_rows)
            arc, rel = state.model(batch)
            rel_probs = torch.softmax(rel, dim=-1)
            for bi, sent in enumerate(chunk):
                n = min(len(sent), MAX_SENTENCE_LEN)
                parses.append(ScoredParse(
                    arc_scores=arc[bi, :n + 1, :n + 1].numpy().copy(),
                    rel_probs=rel_probs[bi, :n + 1, :n + 1].numpy().copy(),
                ))
    return parses


def parse_treebank(
    state: ModelState,
    treebank: Treebank,
    conditioning: Optional[TagConditioning] = None,
    method: str = "mst",
    batch_size: int = PREDICT_BATCH,
) -> list[list[tuple[int, str]]]:
    """Decode (head, relation) per token for every sentence."""
    trees = []
    for sent, parse in zip(treebank.sentences,
                           score_sentences(state, treebank, conditioning, batch_size)):
        heads, rel_ids = parse.decode(method=method)
        labels = [state.vocab.rel_label(r) for r in rel_ids]
        tree = list(zip(heads[1:], labels))
        if len(tree) < len(sent):  # truncated overlong sentence
            tree += [(0, labels[-1])] * (len(sent) - len(tree))
        trees.append(tree)
    return trees


def evaluate(
    state: ModelState,
    treebank: Treebank,
    conditioning: Optional[TagConditioning] = None,
) -> float:
    """Dev metric: tagging accuracy for taggers, LAS for parsers."""
    if state.kind == TAGGER_KIND:
        predictions, _ = predict_tags(state, treebank, conditioning)
        return tagging_accuracy(predictions, treebank)
    trees = parse_treebank(state, treebank, conditioning)
    return attachment_scores(trees, treebank).las


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    dev_metric: float
    best: bool


def history_to_csv(history: Sequence[EpochRecord]) -> str:
    lines = ["epoch,train_loss,dev_metric,best"]
    for rec in history:
        lines.append(f"{rec.epoch},{rec.train_loss!r},{rec.dev_metric!r},{int(rec.best)}")
    return "\n".join(lines) + "\n"


def _snapshot(state: ModelState) -> dict[str, torch.Tensor]:
    return {k: v.detach().clone() for k, v in state.model.state_dict().items()}


def train(
    state: ModelState,
    train_tb: Treebank,
    dev_tb: Treebank,
    config: TrainConfig,
    train_conditioning: Optional[TagConditioning] = None,
    dev_conditioning: Optional[TagConditioning] = None,
    log: Optional[Callable[[str], None]] = None,
) -> tuple[ModelState, list[EpochRecord]]:
    """Adam with the recipe defaults, shuffled 30-sentence batches, dev
    evaluation per epoch, early stopping, best-snapshot restore.

    Frozen parameter groups receive no updates. The returned state is the
    input state with the best-dev parameters loaded.
    """
    if not train_tb.sentences or not dev_tb.sentences:
        raise ValueError("train and dev treebanks must be non-empty")
    train_rows = _conditioning_rows(state, train_tb, train_conditioning,
                                    allow_auto_mask=False)

    torch.manual_seed(config.seed)
    rng = random.Random(config.seed)
    optimizer = torch.optim.Adam(
        state.trainable_parameters(),
        lr=config.learning_rate,
        betas=(config.beta1, config.beta2),
        eps=1e-8,
    )
    sentences = train_tb.sentences
    indices = list(range(len(sentences)))
    history: list[EpochRecord] = []
    best_metric = -float("inf")
    best_epoch = 0
    best_params = _snapshot(state)

    for epoch in range(1, config.max_epochs + 1):
        state.model.train()
        rng.shuffle(indices)
        total_loss = 0.0
        n_batches = 0
        for start in range(0, len(indices), config.batch_size):
            chosen = indices[start:start + config.batch_size]
            chunk = [sentences[i] for i in chosen]
            rows = [train_rows[i] for i in chosen] if train_rows is not None else None
            batch = make_batch(chunk, state.vocab, rows)
            optimizer.zero_grad()
            loss = compute_loss(state, batch)
            loss.backward()
            optimizer.step()
            total_loss += float(loss.detach())
            n_batches += 1
        dev_metric = evaluate(state, dev_tb, dev_conditioning)
        improved = dev_metric > best_metric
        if improved:
            best_metric = dev_metric
            best_epoch = epoch
            best_params = _snapshot(state)
        history.append(EpochRecord(
            epoch=epoch,
            train_loss=total_loss / n_batches,
            dev_metric=dev_metric,
            best=improved,
        ))
        if log is not None:
            log(f"epoch {epoch}: loss {total_loss / n_batches:.4f} "
                f"dev {dev_metric:.4f}{' *' if improved else ''}")
        if epoch - best_epoch >= config.patience:
            break
    state.model.load_state_dict(best_params)
    return state, history
