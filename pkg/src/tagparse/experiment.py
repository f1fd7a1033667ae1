"""Drive the tag-masking experiment matrix: one parser per conditioning
regime per seed, identical configuration otherwise, scored by test LAS."""

from __future__ import annotations

import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import torch

from .analysis import ErrorSet
from .conllu import Treebank, Vocabulary, build_vocabulary
from .embeddings import EmbeddingTable
from .masking import TagConditioning, TagScheme, build_conditioning
from .metrics import attachment_scores
from .model import EncoderConfig, ModelState, TrainConfig, build_parser, build_tagger
from .probe import probe_as_tagger
from .training import parse_treebank, predict_tags, train

SCHEME_ORDER = (
    TagScheme.NONE,
    TagScheme.PRED,
    TagScheme.MASK_ALL_BUT_TAGGER_ERRORS,
    TagScheme.MASK_ALL_BUT_PROBE_ERRORS,
    TagScheme.MASK_TAGGER_ERRORS,
    TagScheme.GOLD,
)


@dataclass
class SchemeInputs:
    """Per-split tagger predictions and error sets feeding the schemes."""

    predicted: Optional[dict[str, list[list[str]]]] = None
    tagger_errors: Optional[dict[str, ErrorSet]] = None
    probe_errors: Optional[dict[str, ErrorSet]] = None


@dataclass
class MaskingTable:
    treebank: str
    schemes: list[TagScheme]
    rows: dict[int, dict[str, float]]  # seed -> scheme value -> test LAS

    def averages(self) -> dict[str, float]:
        out = {}
        for scheme in self.schemes:
            values = [self.rows[seed][scheme.value] for seed in self.rows]
            out[scheme.value] = sum(values) / len(values)
        return out

    def to_csv(self) -> str:
        header = ["treebank", "seed"] + [s.value for s in self.schemes]
        lines = [",".join(header)]
        for seed in sorted(self.rows):
            cells = [self.treebank, str(seed)]
            cells += [f"{100 * self.rows[seed][s.value]:.2f}" for s in self.schemes]
            lines.append(",".join(cells))
        avg = self.averages()
        cells = [self.treebank, "avg"]
        cells += [f"{100 * avg[s.value]:.2f}" for s in self.schemes]
        lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def conditioning_for(
    scheme: TagScheme,
    gold: Treebank,
    inputs: SchemeInputs,
) -> TagConditioning:
    split = gold.split
    predicted = inputs.predicted[split] if (
        scheme.needs_predicted and inputs.predicted) else None
    errors = None
    if scheme is TagScheme.MASK_ALL_BUT_PROBE_ERRORS:
        errors = inputs.probe_errors[split] if inputs.probe_errors else None
    elif scheme.needs_errors:
        errors = inputs.tagger_errors[split] if inputs.tagger_errors else None
    return build_conditioning(scheme, gold, predicted=predicted, errors=errors)


def _train_parser_for_scheme(
    scheme_value: str,
    train_tb: Treebank,
    dev_tb: Treebank,
    test_tb: Treebank,
    vocab: Vocabulary,
    table: EmbeddingTable,
    encoder_config: EncoderConfig,
    train_config: TrainConfig,
    conditionings: dict[str, Optional[TagConditioning]],
    limit_threads: bool = False,
) -> tuple[str, float]:
    if limit_threads:
        torch.set_num_threads(1)
    scheme = TagScheme(scheme_value)
    parser = build_parser(
        vocab, table, encoder_config, train_config.seed,
        use_tags=scheme.uses_tags, tag_scheme=scheme.value,
    )
    train(parser, train_tb, dev_tb, train_config,
          train_conditioning=conditionings["train"],
          dev_conditioning=conditionings["dev"])
    trees = parse_treebank(parser, test_tb, conditionings["test"])
    return scheme_value, attachment_scores(trees, test_tb).las


def _worker(payload):
    return _train_parser_for_scheme(*payload, limit_threads=True)


def run_masking_experiment(
    train_tb: Treebank,
    dev_tb: Treebank,
    test_tb: Treebank,
    table: EmbeddingTable,
    schemes: Sequence[TagScheme],
    encoder_config: EncoderConfig,
    train_config: TrainConfig,
    seeds: Sequence[int],
    jobs: int = 1,
    log: Optional[Callable[[str], None]] = None,
) -> MaskingTable:
    """Train one parser per (scheme, seed) with shared seeds and config.

    Schemes that need tagger output trigger a tagger training per seed; the
    probe-error scheme additionally probes the no-tag parser of that seed.
    """
    if not schemes:
        raise ValueError("at least one scheme is required")
    if not seeds:
        raise ValueError("at least one seed is required")
    schemes = [s for s in SCHEME_ORDER if s in set(schemes)]
    vocab = build_vocabulary(train_tb)
    splits = {"train": train_tb, "dev": dev_tb, "test": test_tb}
    say = log or (lambda msg: None)

    need_tagger = any(s.needs_predicted or s is TagScheme.MASK_ALL_BUT_TAGGER_ERRORS
                      for s in schemes)
    need_probe = TagScheme.MASK_ALL_BUT_PROBE_ERRORS in schemes

    rows: dict[int, dict[str, float]] = {}
    for seed in seeds:
        cfg = replace(train_config, seed=seed)
        inputs = SchemeInputs()
        if need_tagger:
            say(f"seed {seed}: training tagger")
            tagger = build_tagger(vocab, table, encoder_config, seed)
            train(tagger, train_tb, dev_tb, cfg)
            inputs.predicted = {}
            inputs.tagger_errors = {}
            for name, tb in splits.items():
                tags, errors = predict_tags(tagger, tb)
                inputs.predicted[name] = tags
                inputs.tagger_errors[name] = errors

        seed_rows: dict[str, float] = {}
        none_parser: Optional[ModelState] = None
        if TagScheme.NONE in schemes or need_probe:
            say(f"seed {seed}: training no-tag parser")
            none_parser = build_parser(vocab, table, encoder_config, seed,
                                       use_tags=False, tag_scheme=TagScheme.NONE.value)
            train(none_parser, train_tb, dev_tb, cfg)
            if TagScheme.NONE in schemes:
                trees = parse_treebank(none_parser, test_tb, None)
                seed_rows[TagScheme.NONE.value] = attachment_scores(trees, test_tb).las
        if need_probe:
            say(f"seed {seed}: probing no-tag parser")
            report, probed = probe_as_tagger(none_parser, train_tb, test_tb, cfg)
            inputs.probe_errors = {}
            for name, tb in splits.items():
                _, errors = predict_tags(probed, tb)
                inputs.probe_errors[name] = errors

        remaining = [s for s in schemes if s is not TagScheme.NONE]
        tasks = []
        for scheme in remaining:
            conds = {name: conditioning_for(scheme, tb, inputs)
                     for name, tb in splits.items()}
            tasks.append((scheme.value, train_tb, dev_tb, test_tb, vocab, table,
                          encoder_config, cfg, conds))
        if jobs > 1 and len(tasks) > 1:
            ctx = mp.get_context("spawn")
            with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
                for scheme_value, las in pool.map(_worker, tasks):
                    seed_rows[scheme_value] = las
                    say(f"seed {seed}: {scheme_value} LAS {100 * las:.2f}")
        else:
            for task in tasks:
                say(f"seed {seed}: training parser ({task[0]})")
                scheme_value, las = _train_parser_for_scheme(*task)
                seed_rows[scheme_value] = las
                say(f"seed {seed}: {scheme_value} LAS {100 * las:.2f}")
        rows[seed] = seed_rows
    return MaskingTable(treebank=train_tb.name, schemes=list(schemes), rows=rows)
