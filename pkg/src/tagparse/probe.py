"""Head-swap probing: retrain only a fresh classification head over a
frozen encoder for exactly one epoch, then measure what it can read out.
"""

from __future__ import annotations

import copy
import json
import math
import random
from dataclasses import dataclass

import torch

from .analysis import ErrorSet
from .conllu import Treebank
from .masking import TagScheme
from .metrics import tagging_accuracy
from .model import TAGGER_KIND, Model, ModelState, TaggerHead, TrainConfig
from .tags import MASK
from .training import compute_loss, make_batch, predict_tags

FROZEN_GROUPS = ("embeddings", "char_encoder", "bilstm")

# Probing is defined only for encoders whose training never saw gold tags:
# plain no-tag models and predicted-tag parsers. Everything else risks
# leaking the labels being probed.
_PROBEABLE_SCHEMES = {None, TagScheme.NONE.value, TagScheme.PRED.value}


class ProbeError(ValueError):
    pass


@dataclass
class ProbeReport:
    source: str               # "parser" or "tagger"
    split: str                # split the metrics were computed on
    accuracy: float
    steps: int                # optimizer steps; one epoch exactly
    seed: int
    error_set: ErrorSet
    frozen_checksum_before: dict[str, str]
    frozen_checksum_after: dict[str, str]

    @property
    def encoder_unchanged(self) -> bool:
        return self.frozen_checksum_before == self.frozen_checksum_after

    def to_json(self) -> str:
        payload = {
            "source": self.source,
            "split": self.split,
            "accuracy": self.accuracy,
            "steps": self.steps,
            "seed": self.seed,
            "errors": self.error_set.to_dicts(),
            "frozen_checksum_before": self.frozen_checksum_before,
            "frozen_checksum_after": self.frozen_checksum_after,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ProbeReport":
        data = json.loads(text)
        return cls(
            source=data["source"],
            split=data["split"],
            accuracy=data["accuracy"],
            steps=data["steps"],
            seed=data["seed"],
            error_set=ErrorSet.from_dicts(data["errors"]),
            frozen_checksum_before=data["frozen_checksum_before"],
            frozen_checksum_after=data["frozen_checksum_after"],
        )


def probe_as_tagger(
    state: ModelState,
    train_tb: Treebank,
    eval_tb: Treebank,
    config: TrainConfig,
) -> tuple[ProbeReport, ModelState]:
    """Swap the head for a freshly seeded tagger head, freeze everything
    else, train one epoch, and evaluate.

    Parsers trained under gold-revealing conditioning regimes are rejected;
    for predicted-tag parsers the tag input is withheld (all-mask) during
    probing. Returns the report and the probed state so callers can score
    additional splits.
    """
    if state.tag_scheme not in _PROBEABLE_SCHEMES:
        raise ProbeError(
            f"probing is defined only for no-tag and predicted-tag models, "
            f"not the {state.tag_scheme} regime"
        )
    if not train_tb.sentences:
        raise ProbeError("probe training split is empty")

    source = state.kind
    encoder = copy.deepcopy(state.model.encoder)
    torch.manual_seed(config.seed)
    head = TaggerHead(state.encoder_config.output_dim,
                      state.vocab.tags.num_classes,
                      state.encoder_config.dropout)
    probed = ModelState(
        Model(TAGGER_KIND, encoder, head),
        state.encoder_config,
        state.vocab,
        tag_scheme=state.tag_scheme,
    )
    probed.freeze(FROZEN_GROUPS)
    before = probed.checksums(FROZEN_GROUPS)

    rng = random.Random(config.seed)
    optimizer = torch.optim.Adam(
        probed.trainable_parameters(),
        lr=config.learning_rate,
        betas=(config.beta1, config.beta2),
        eps=1e-8,
    )
    sentences = train_tb.sentences
    indices = list(range(len(sentences)))
    rng.shuffle(indices)
    mask_rows = None
    if probed.uses_tag_inputs:
        mask_rows = [[MASK] * len(s) for s in sentences]
    steps = 0
    probed.model.train()
    for start in range(0, len(indices), config.batch_size):
        chosen = indices[start:start + config.batch_size]
        chunk = [sentences[i] for i in chosen]
        rows = [mask_rows[i] for i in chosen] if mask_rows is not None else None
        batch = make_batch(chunk, probed.vocab, rows)
        optimizer.zero_grad()
        loss = compute_loss(probed, batch)
        loss.backward()
        optimizer.step()
        steps += 1
    assert steps == math.ceil(len(sentences) / config.batch_size)

    after = probed.checksums(FROZEN_GROUPS)
    predictions, error_set = predict_tags(probed, eval_tb)
    report = ProbeReport(
        source=source,
        split=eval_tb.split,
        accuracy=tagging_accuracy(predictions, eval_tb),
        steps=steps,
        seed=config.seed,
        error_set=error_set,
        frozen_checksum_before=before,
        frozen_checksum_after=after,
    )
    return report, probed


def validate_probe(
    tagger_state: ModelState,
    train_tb: Treebank,
    eval_tb: Treebank,
    config: TrainConfig,
) -> tuple[ProbeReport, ModelState]:
    """The same head-swap applied to a trained tagger, to check that the
    one-epoch procedure recovers near-original accuracy."""
    if tagger_state.kind != TAGGER_KIND:
        raise ProbeError("validate_probe expects a tagger state")
    return probe_as_tagger(tagger_state, train_tb, eval_tb, config)


def probe_report_for(
    probed: ModelState,
    treebank: Treebank,
    base: ProbeReport,
) -> ProbeReport:
    """Score an already-probed head on another split, reusing the probe's
    provenance (steps, seed, checksums)."""
    predictions, error_set = predict_tags(probed, treebank)
    return ProbeReport(
        source=base.source,
        split=treebank.split,
        accuracy=tagging_accuracy(predictions, treebank),
        steps=base.steps,
        seed=base.seed,
        error_set=error_set,
        frozen_checksum_before=base.frozen_checksum_before,
        frozen_checksum_after=base.frozen_checksum_after,
    )
