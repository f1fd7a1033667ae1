"""Command-line pipeline: train, probe, analyze, mask-experiment, eval.

Every command writes its artifacts under --out (checkpoints/, reports/,
tables/, figures/) along with a manifest recording the resolved
configuration, its hash, and package versions.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import click

from . import __version__
from .conllu import read_treebank, write_treebank
from .embeddings import load_vectors, pca_compress
from .experiment import run_masking_experiment
from .masking import TagScheme, build_conditioning
from .metrics import attachment_scores, tagging_accuracy
from .model import (
    EncoderConfig,
    TrainConfig,
    build_parser,
    build_tagger,
    load_checkpoint,
    save_checkpoint,
)
from .probe import probe_as_tagger, probe_report_for, validate_probe
from .report import build_analysis_report, render_figures, write_report_files
from .training import history_to_csv, parse_treebank, predict_tags, train

SCHEME_CHOICES = [s.value for s in TagScheme]


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise click.ClickException(f"config {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise click.ClickException(f"config {path} must hold a JSON object")
    return data


def _configs(config: dict, seed: int | None) -> tuple[EncoderConfig, TrainConfig]:
    try:
        encoder = EncoderConfig(**config.get("encoder", {}))
        training = TrainConfig(**config.get("training", {}))
    except (TypeError, ValueError) as exc:
        raise click.ClickException(f"bad configuration: {exc}")
    if seed is not None:
        training = replace(training, seed=seed)
    return encoder, training


def _prepare_embeddings(path: str, treebanks, word_dim: int):
    forms = {t.form for tb in treebanks for s in tb for t in s.tokens}
    table = load_vectors(path, restrict_to=forms)
    if table.dim == word_dim:
        return table
    if table.dim < word_dim:
        raise click.ClickException(
            f"embeddings are {table.dim}-dimensional but word_dim is {word_dim}; "
            f"lower encoder.word_dim in the config"
        )
    try:
        return pca_compress(table, word_dim)
    except ValueError as exc:
        raise click.ClickException(str(exc))


def _write_manifest(out: Path, command: str, arguments: dict,
                    encoder: EncoderConfig, training: TrainConfig,
                    extra: dict | None = None) -> None:
    import numpy
    import torch

    config = {"encoder": asdict(encoder), "training": asdict(training)}
    if extra:
        config.update(extra)
    blob = json.dumps({"command": command, "arguments": arguments,
                       "config": config}, sort_keys=True)
    manifest = {
        "command": command,
        "arguments": arguments,
        "config": config,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
        "versions": {
            "tagparse": __version__,
            "torch": torch.__version__,
            "numpy": numpy.__version__,
        },
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _echo_history(history) -> None:
    best = max(history, key=lambda r: r.dev_metric)
    click.echo(f"trained {len(history)} epochs; best dev metric "
               f"{best.dev_metric:.4f} at epoch {best.epoch}")


@click.group()
@click.version_option(version=__version__)
def main():
    """Train and dissect UPOS taggers and biaffine dependency parsers."""


@main.command("train")
@click.option("--kind", type=click.Choice(["tagger", "parser"]), required=True)
@click.option("--train", "train_path", type=click.Path(exists=True), required=True)
@click.option("--dev", "dev_path", type=click.Path(exists=True), required=True)
@click.option("--test", "test_path", type=click.Path(exists=True))
@click.option("--embeddings", type=click.Path(exists=True), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--seed", type=int)
@click.option("--out", type=click.Path(), required=True)
@click.option("--scheme", type=click.Choice(SCHEME_CHOICES), default="none",
              help="Tag-conditioning regime (parser only).")
@click.option("--tagger-checkpoint", type=click.Path(exists=True),
              help="Trained tagger; required by predicted/masked schemes.")
@click.option("--base-parser", type=click.Path(exists=True),
              help="No-tag parser to probe; required by the probe-error scheme.")
@click.option("--name", default="", help="Treebank code for reports.")
def cmd_train(kind, train_path, dev_path, test_path, embeddings, config_path,
              seed, out, scheme, tagger_checkpoint, base_parser, name):
    """Train a tagger or a parser and write a checkpoint plus history."""
    out = Path(out)
    encoder_cfg, train_cfg = _configs(_load_config(config_path), seed)
    train_tb = read_treebank(train_path, "train", name)
    dev_tb = read_treebank(dev_path, "dev", name)
    test_tb = read_treebank(test_path, "test", name) if test_path else None
    splits = [tb for tb in (train_tb, dev_tb, test_tb) if tb is not None]
    table = _prepare_embeddings(embeddings, splits, encoder_cfg.word_dim)
    scheme = TagScheme(scheme)

    if kind == "tagger":
        if scheme is not TagScheme.NONE:
            raise click.ClickException("taggers never consume tag inputs")
        state = build_tagger(_vocab(train_tb), table, encoder_cfg, train_cfg.seed)
        state, history = train(state, train_tb, dev_tb, train_cfg, log=click.echo)
        conds = {tb.split: None for tb in splits}
    else:
        vocab = _vocab(train_tb)
        conds = {}
        if scheme in (TagScheme.NONE, TagScheme.GOLD):
            for tb in splits:
                conds[tb.split] = build_conditioning(scheme, tb)
        else:
            inputs = _scheme_inputs_from_checkpoints(
                scheme, splits, tagger_checkpoint, base_parser, train_cfg)
            for tb in splits:
                conds[tb.split] = _conditioning(scheme, tb, inputs)
        state = build_parser(vocab, table, encoder_cfg, train_cfg.seed,
                             use_tags=scheme.uses_tags, tag_scheme=scheme.value)
        state, history = train(state, train_tb, dev_tb, train_cfg,
                               train_conditioning=conds["train"],
                               dev_conditioning=conds["dev"],
                               log=click.echo)

    suffix = kind if kind == "tagger" else f"{kind}_{scheme.value}"
    save_checkpoint(state, out / "checkpoints" / f"{suffix}.pt")
    (out / "reports").mkdir(parents=True, exist_ok=True)
    (out / "reports" / f"history_{suffix}.csv").write_text(
        history_to_csv(history), encoding="utf-8")
    _echo_history(history)

    if test_tb is not None:
        if kind == "tagger":
            tags, _ = predict_tags(state, test_tb)
            click.echo(f"test accuracy {100 * tagging_accuracy(tags, test_tb):.2f}")
        else:
            trees = parse_treebank(state, test_tb, conds.get("test"))
            score = attachment_scores(trees, test_tb)
            click.echo(f"test UAS {100 * score.uas:.2f} LAS {100 * score.las:.2f}")

    _write_manifest(out, "train", {
        "kind": kind, "train": str(train_path), "dev": str(dev_path),
        "test": str(test_path) if test_path else None,
        "embeddings": str(embeddings), "scheme": scheme.value, "name": name,
        "tagger_checkpoint": tagger_checkpoint, "base_parser": base_parser,
    }, encoder_cfg, train_cfg)


def _vocab(train_tb):
    from .conllu import build_vocabulary

    try:
        return build_vocabulary(train_tb)
    except ValueError as exc:
        raise click.ClickException(str(exc))


def _conditioning(scheme, tb, inputs):
    predicted = inputs["predicted"].get(tb.split) if scheme.needs_predicted else None
    errors = inputs["errors"].get(tb.split) if scheme.needs_errors else None
    return build_conditioning(scheme, tb, predicted=predicted, errors=errors)


def _scheme_inputs_from_checkpoints(scheme, splits, tagger_checkpoint,
                                    base_parser, train_cfg):
    """Tagger predictions / tagger errors / probe errors for every split."""
    inputs = {"predicted": {}, "errors": {}}
    if scheme is TagScheme.MASK_ALL_BUT_PROBE_ERRORS:
        if base_parser is None:
            raise click.ClickException(
                f"--base-parser is required for scheme {scheme.value}")
        parser_state = load_checkpoint(base_parser)
        train_tb = next(tb for tb in splits if tb.split == "train")
        _, probed = probe_as_tagger(parser_state, train_tb, train_tb, train_cfg)
        for tb in splits:
            _, errors = predict_tags(probed, tb)
            inputs["errors"][tb.split] = errors
        return inputs
    if tagger_checkpoint is None:
        raise click.ClickException(
            f"--tagger-checkpoint is required for scheme {scheme.value}")
    tagger_state = load_checkpoint(tagger_checkpoint)
    if tagger_state.kind != "tagger":
        raise click.ClickException("--tagger-checkpoint does not hold a tagger")
    for tb in splits:
        tags, errors = predict_tags(tagger_state, tb)
        inputs["predicted"][tb.split] = tags
        inputs["errors"][tb.split] = errors
    return inputs


@main.command("probe")
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--train", "train_path", type=click.Path(exists=True), required=True)
@click.option("--dev", "dev_path", type=click.Path(exists=True))
@click.option("--test", "test_path", type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--seed", type=int)
@click.option("--out", type=click.Path(), required=True)
@click.option("--name", default="")
def cmd_probe(checkpoint, train_path, dev_path, test_path, config_path, seed,
              out, name):
    """Swap in a fresh tagging head, train it one epoch, report accuracy
    and errors on dev and/or test."""
    if dev_path is None and test_path is None:
        raise click.UsageError("at least one of --dev/--test is required")
    out = Path(out)
    encoder_cfg, train_cfg = _configs(_load_config(config_path), seed)
    state = load_checkpoint(checkpoint)
    train_tb = read_treebank(train_path, "train", name)
    evals = []
    if dev_path:
        evals.append(read_treebank(dev_path, "dev", name))
    if test_path:
        evals.append(read_treebank(test_path, "test", name))

    fn = validate_probe if state.kind == "tagger" else probe_as_tagger
    try:
        report, probed = fn(state, train_tb, evals[0], train_cfg)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    reports = [report]
    for tb in evals[1:]:
        reports.append(probe_report_for(probed, tb, report))

    (out / "reports").mkdir(parents=True, exist_ok=True)
    for rep in reports:
        path = out / "reports" / f"probe_{rep.source}_{rep.split}.json"
        path.write_text(rep.to_json(), encoding="utf-8")
        click.echo(f"{rep.split}: probe accuracy {100 * rep.accuracy:.2f} "
                   f"({len(rep.error_set)} errors), encoder unchanged: "
                   f"{rep.encoder_unchanged}")
    save_checkpoint(probed, out / "checkpoints" / f"probe_{report.source}.pt")
    _write_manifest(out, "probe", {
        "checkpoint": str(checkpoint), "train": str(train_path),
        "dev": str(dev_path) if dev_path else None,
        "test": str(test_path) if test_path else None, "name": name,
    }, encoder_cfg, train_cfg)


def _predicted_tags_for(source: str, gold_tb):
    """Read predicted tags from a CoNLL-U file, or run a checkpoint."""
    path = Path(source)
    if path.suffix == ".pt":
        state = load_checkpoint(path)
        if state.kind == "tagger":
            tags, _ = predict_tags(state, gold_tb)
            return tags
        raise click.ClickException(
            f"{source}: analyze needs tagging systems; probe parser "
            f"checkpoints first")
    pred_tb = read_treebank(path, gold_tb.split, gold_tb.name)
    if len(pred_tb.sentences) != len(gold_tb.sentences) or any(
        len(p) != len(g) for p, g in zip(pred_tb.sentences, gold_tb.sentences)
    ):
        raise click.ClickException(f"{source} does not align with the gold file")
    return [s.gold_tags() for s in pred_tb]


@main.command("analyze")
@click.option("--train", "train_path", type=click.Path(exists=True), required=True,
              help="Training split (vocabulary, OOV, context statistics).")
@click.option("--gold", "gold_path", type=click.Path(exists=True), required=True)
@click.option("--pred", "pred_sources", type=click.Path(exists=True), multiple=True,
              required=True, help="Prediction file or tagger checkpoint (1-2).")
@click.option("--system-name", "system_names", multiple=True,
              help="Display names matching --pred order.")
@click.option("--split", type=click.Choice(["dev", "test"]), default="test")
@click.option("--smoothing", type=float, default=1.0,
              help="Additive smoothing for the surprisal statistics.")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--seed", type=int)
@click.option("--out", type=click.Path(), required=True)
@click.option("--figures", is_flag=True, help="Also render PNG bar charts.")
@click.option("--name", default="")
def cmd_analyze(train_path, gold_path, pred_sources, system_names, split,
                smoothing, config_path, seed, out, figures, name):
    """Crossover, class breakdowns, per-tag F1, confusions, OOV, surprisal."""
    if not 1 <= len(pred_sources) <= 2:
        raise click.UsageError("--pred must be given once or twice")
    if system_names and len(system_names) != len(pred_sources):
        raise click.UsageError("--system-name count must match --pred count")
    out = Path(out)
    encoder_cfg, train_cfg = _configs(_load_config(config_path), seed)
    train_tb = read_treebank(train_path, "train", name)
    gold_tb = read_treebank(gold_path, split, name)
    names = list(system_names) or [f"system_{c}" for c in "ab"[:len(pred_sources)]]
    systems = {
        n: _predicted_tags_for(src, gold_tb)
        for n, src in zip(names, pred_sources)
    }
    report = build_analysis_report(train_tb, gold_tb, systems, smoothing=smoothing)
    written = write_report_files(report, out)
    if figures:
        try:
            written += render_figures(report, out)
        except RuntimeError as exc:
            raise click.ClickException(str(exc))
    for path in written:
        click.echo(f"wrote {path}")
    _write_manifest(out, "analyze", {
        "train": str(train_path), "gold": str(gold_path),
        "pred": [str(p) for p in pred_sources], "systems": names,
        "split": split, "name": name,
    }, encoder_cfg, train_cfg, extra={"smoothing": smoothing})


@main.command("mask-experiment")
@click.option("--train", "train_path", type=click.Path(exists=True), required=True)
@click.option("--dev", "dev_path", type=click.Path(exists=True), required=True)
@click.option("--test", "test_path", type=click.Path(exists=True), required=True)
@click.option("--embeddings", type=click.Path(exists=True), required=True)
@click.option("--scheme", "scheme_values", type=click.Choice(SCHEME_CHOICES),
              multiple=True, help="Default: all six regimes.")
@click.option("--seed", "seeds", type=int, multiple=True, help="Default: 0.")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Parallel parser trainings per seed.")
@click.option("--out", type=click.Path(), required=True)
@click.option("--name", default="")
def cmd_mask_experiment(train_path, dev_path, test_path, embeddings,
                        scheme_values, seeds, config_path, jobs, out, name):
    """Train parsers under tag-conditioning regimes; tabulate test LAS."""
    out = Path(out)
    encoder_cfg, train_cfg = _configs(_load_config(config_path), None)
    schemes = [TagScheme(v) for v in scheme_values] or list(TagScheme)
    seeds = list(seeds) or [train_cfg.seed]
    train_tb = read_treebank(train_path, "train", name)
    dev_tb = read_treebank(dev_path, "dev", name)
    test_tb = read_treebank(test_path, "test", name)
    table = _prepare_embeddings(embeddings, [train_tb, dev_tb, test_tb],
                                encoder_cfg.word_dim)
    result = run_masking_experiment(
        train_tb, dev_tb, test_tb, table, schemes, encoder_cfg, train_cfg,
        seeds, jobs=jobs, log=click.echo,
    )
    (out / "tables").mkdir(parents=True, exist_ok=True)
    csv_path = out / "tables" / "masking_las.csv"
    csv_path.write_text(result.to_csv(), encoding="utf-8")
    click.echo(f"wrote {csv_path}")
    for scheme, las in result.averages().items():
        click.echo(f"{scheme}: LAS {100 * las:.2f}")
    _write_manifest(out, "mask-experiment", {
        "train": str(train_path), "dev": str(dev_path), "test": str(test_path),
        "embeddings": str(embeddings), "schemes": [s.value for s in schemes],
        "seeds": seeds, "jobs": jobs, "name": name,
    }, encoder_cfg, train_cfg)


@main.command("eval")
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--treebank", "treebank_path", type=click.Path(exists=True),
              required=True)
@click.option("--split", type=click.Choice(["train", "dev", "test"]),
              default="test", show_default=True)
@click.option("--out", type=click.Path())
@click.option("--name", default="")
def cmd_eval(checkpoint, treebank_path, split, out, name):
    """Score a checkpoint on a treebank (accuracy, or UAS/LAS)."""
    state = load_checkpoint(checkpoint)
    tb = read_treebank(treebank_path, split, name)
    if state.kind == "tagger":
        tags, errors = predict_tags(state, tb)
        payload = {
            "kind": "tagger",
            "accuracy": tagging_accuracy(tags, tb),
            "errors": len(errors),
            "tokens": tb.token_count(),
        }
    else:
        scheme = TagScheme(state.tag_scheme or "none")
        if scheme not in (TagScheme.NONE, TagScheme.GOLD):
            raise click.ClickException(
                f"checkpoint was conditioned on {scheme.value}; evaluate it "
                f"through the mask-experiment pipeline")
        conditioning = build_conditioning(scheme, tb)
        trees = parse_treebank(state, tb, conditioning)
        score = attachment_scores(trees, tb)
        payload = {
            "kind": "parser",
            "scheme": scheme.value,
            "uas": score.uas,
            "las": score.las,
            "tokens": score.token_count,
        }
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    click.echo(text, nl=False)
    if out:
        out = Path(out)
        (out / "reports").mkdir(parents=True, exist_ok=True)
        (out / "reports" / "eval.json").write_text(text, encoding="utf-8")


@main.command("export-predictions")
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--treebank", "treebank_path", type=click.Path(exists=True),
              required=True)
@click.option("--split", type=click.Choice(["train", "dev", "test"]),
              default="test", show_default=True)
@click.option("--out-file", type=click.Path(), required=True)
@click.option("--name", default="")
def cmd_export_predictions(checkpoint, treebank_path, split, out_file, name):
    """Write a copy of a treebank with the UPOS column replaced by a
    tagger checkpoint's predictions (input to `analyze`)."""
    state = load_checkpoint(checkpoint)
    if state.kind != "tagger":
        raise click.ClickException("export-predictions needs a tagger checkpoint")
    tb = read_treebank(treebank_path, split, name)
    tags, _ = predict_tags(state, tb)
    write_treebank(tb, out_file, tags=tags)
    click.echo(f"wrote {out_file}")


if __name__ == "__main__":
    main()
