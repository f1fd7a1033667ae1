"""Assemble analysis results into a JSON report, CSV tables, and figure
data. Output is byte-stable: same inputs, same bytes."""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Optional, Sequence

from . import analysis
from .conllu import Treebank, build_vocabulary, oov_flags
from .metrics import tagging_accuracy
from .tags import UPOS_TAGS, WORD_CLASSES, word_class

TOP_CONFUSIONS = 5


def _system_block(
    name: str,
    predicted: Sequence[Sequence[str]],
    gold: Treebank,
    train: Treebank,
    flags,
    smoothing: float,
) -> dict:
    errors = analysis.errors_from_tags(gold, predicted)
    breakdown = analysis.class_breakdown(errors, gold)
    f1 = analysis.per_tag_f1(predicted, gold)
    confusions = analysis.top_confusions(errors, k=TOP_CONFUSIONS)
    oov = analysis.oov_error_stats(flags, errors)
    bigram = analysis.bigram_surprisal(train, gold, errors, smoothing=smoothing)
    headrel = analysis.head_rel_surprisal(train, gold, errors, smoothing=smoothing)
    return {
        "name": name,
        "accuracy": tagging_accuracy(predicted, gold),
        "error_count": len(errors),
        "class_breakdown": {
            "errors": dict(breakdown.errors),
            "tokens": dict(breakdown.tokens),
        },
        "per_tag_f1": {
            tag: {
                "precision": s.precision,
                "recall": s.recall,
                "f1": s.f1,
                "gold_count": s.gold_count,
                "predicted_count": s.predicted_count,
            }
            for tag, s in f1.items()
        },
        "top_confusions": [
            {"gold": g, "predicted": p, "count": c} for (g, p), c in confusions
        ],
        "oov": {
            "all_proportion": oov.all_proportion,
            "error_proportion": oov.error_proportion,
        },
        "surprisal": {
            "bigram": {
                "mean_all": bigram.mean_all,
                "mean_errors": bigram.mean_errors,
            },
            "head_relation": {
                "mean_all": headrel.mean_all,
                "mean_errors": headrel.mean_errors,
            },
        },
        "_errors": errors,
        "_breakdown": breakdown,
    }


def build_analysis_report(
    train: Treebank,
    gold: Treebank,
    systems: dict[str, Sequence[Sequence[str]]],
    smoothing: float = 1.0,
) -> dict:
    """Full error-analysis report over one or two tagging systems.

    With two systems the report adds positional error crossover and
    per-class error-count ratios (first over second).
    """
    if not systems:
        raise ValueError("at least one system is required")
    if len(systems) > 2:
        raise ValueError("at most two systems are compared")
    vocab = build_vocabulary(train)
    flags = oov_flags(vocab, gold)
    blocks = {
        name: _system_block(name, predicted, gold, train, flags, smoothing)
        for name, predicted in systems.items()
    }
    report = {
        "treebank": gold.name,
        "split": gold.split,
        "token_count": gold.token_count(),
        "smoothing": smoothing,
        "systems": {},
        "comparison": None,
    }
    for name, block in blocks.items():
        report["systems"][name] = {
            k: v for k, v in block.items() if not k.startswith("_")
        }
    if len(blocks) == 2:
        (name_a, block_a), (name_b, block_b) = blocks.items()
        cross = analysis.crossover(block_a["_errors"], block_b["_errors"])
        ratios = analysis.class_ratios(block_a["_breakdown"], block_b["_breakdown"])
        report["comparison"] = {
            "a": name_a,
            "b": name_b,
            "crossover": {
                "only_a": cross.only_a,
                "only_b": cross.only_b,
                "both": cross.both,
                "union": cross.union,
                "fractions": cross.fractions(),
            },
            "class_ratios": ratios,
        }
    return report


def report_to_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_-]+", "_", name)


def _pct(x: Optional[float]) -> str:
    return "" if x is None else f"{100 * x:.2f}"


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


def write_report_files(report: dict, out_dir) -> list[Path]:
    """Emit report.json plus the CSV tables and per-figure data series."""
    out = Path(out_dir)
    written = [_write(out / "reports" / "analysis.json", report_to_json(report))]
    systems = report["systems"]

    lines = ["system,accuracy"]
    for name, block in systems.items():
        lines.append(f"{name},{_pct(block['accuracy'])}")
    written.append(_write(out / "tables" / "accuracy.csv", "\n".join(lines) + "\n"))

    lines = ["system,all,open,closed,other"]
    for name, block in systems.items():
        err = block["class_breakdown"]["errors"]
        total = sum(err[c] for c in WORD_CLASSES)
        lines.append(f"{name},{total}," + ",".join(str(err[c]) for c in WORD_CLASSES))
    tokens = next(iter(systems.values()))["class_breakdown"]["tokens"]
    lines.append(
        f"total,{sum(tokens[c] for c in WORD_CLASSES)},"
        + ",".join(str(tokens[c]) for c in WORD_CLASSES)
    )
    written.append(_write(out / "tables" / "class_breakdown.csv", "\n".join(lines) + "\n"))

    lines = ["system,rank,gold,predicted,count"]
    for name, block in systems.items():
        for rank, row in enumerate(block["top_confusions"], start=1):
            lines.append(f"{name},{rank},{row['gold']},{row['predicted']},{row['count']}")
    written.append(_write(out / "tables" / "top_confusions.csv", "\n".join(lines) + "\n"))

    names = list(systems)
    lines = ["tag,class," + ",".join(names) + ",tokens"]
    for tag in UPOS_TAGS:
        scores = [systems[n]["per_tag_f1"].get(tag) for n in names]
        if all(s is None for s in scores):
            continue
        gold_count = next(s["gold_count"] for s in scores if s is not None)
        cells = [tag, word_class(tag)]
        cells += [_pct(s["f1"]) if s is not None else "" for s in scores]
        cells.append(str(gold_count))
        lines.append(",".join(cells))
    written.append(_write(out / "tables" / "per_tag_f1.csv", "\n".join(lines) + "\n"))

    if report["comparison"] is not None:
        cross = report["comparison"]["crossover"]
        series = [
            (f"only_{report['comparison']['a']}", cross["only_a"]),
            ("both", cross["both"]),
            (f"only_{report['comparison']['b']}", cross["only_b"]),
        ]
        lines = ["label,value"] + [f"{label},{value}" for label, value in series]
        written.append(_write(out / "figures" / "crossover.csv", "\n".join(lines) + "\n"))

    for name, block in systems.items():
        safe = _safe(name)
        lines = ["label,value",
                 f"all,{block['oov']['all_proportion']!r}",
                 f"errors,{block['oov']['error_proportion']!r}"]
        written.append(_write(out / "figures" / f"oov_{safe}.csv", "\n".join(lines) + "\n"))
        for kind in ("bigram", "head_relation"):
            stats = block["surprisal"][kind]
            err = stats["mean_errors"]
            lines = ["label,value",
                     f"all,{stats['mean_all']!r}",
                     f"errors,{err!r}" if err is not None else "errors,"]
            written.append(_write(out / "figures" / f"surprisal_{kind}_{safe}.csv",
                                  "\n".join(lines) + "\n"))
    return written


def render_figures(report: dict, out_dir) -> list[Path]:
    """Optional bar-chart images for the figure series (needs matplotlib)."""
    try:
        import matplotlib
    except ImportError as exc:
        raise RuntimeError(
            "figure rendering needs matplotlib; install tagparse[figures]"
        ) from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir) / "figures"
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for csv_path in sorted(out.glob("*.csv")):
        labels, values = [], []
        for line in csv_path.read_text().splitlines()[1:]:
            label, _, value = line.partition(",")
            if value == "":
                continue
            labels.append(label)
            values.append(float(value))
        if not values:
            continue
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.bar(labels, values, color="#4878a8")
        ax.set_title(csv_path.stem.replace("_", " "))
        fig.tight_layout()
        png = csv_path.with_suffix(".png")
        fig.savefig(png, dpi=120)
        plt.close(fig)
        written.append(png)
    return written
