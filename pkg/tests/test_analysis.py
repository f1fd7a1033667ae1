import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tagparse.analysis import (
    ErrorRecord,
    ErrorSet,
    TagContextModel,
    bigram_surprisal,
    class_breakdown,
    class_ratios,
    crossover,
    errors_from_tags,
    head_rel_surprisal,
    oov_error_stats,
    per_tag_f1,
    top_confusions,
)
from tagparse.conllu import Treebank, make_sentence
from tagparse.metrics import tagging_accuracy
from tagparse.tags import UPOS_TAGS


def err(si, ti, gold="NOUN", pred="VERB"):
    return ErrorRecord(si, ti, gold, pred)


def chain_treebank(tag_rows, split="test"):
    """One sentence per row of tags; token i heads i-1 ('dep' chain)."""
    sentences = []
    for i, tags in enumerate(tag_rows):
        n = len(tags)
        heads = [0] + list(range(1, n))
        rels = ["root"] + ["dep"] * (n - 1)
        forms = [f"w{j}" for j in range(n)]
        sentences.append(make_sentence(forms, tags, heads, rels, sent_id=f"s{i}"))
    return Treebank(sentences, split=split, name="chain")


def test_error_record_requires_disagreement():
    with pytest.raises(ValueError):
        ErrorRecord(0, 1, "NOUN", "NOUN")


def test_crossover_examples():
    a = ErrorSet([err(0, 1), err(0, 2)])
    b = ErrorSet([err(0, 2), err(0, 3), err(1, 1)])
    stats = crossover(a, b)
    assert (stats.only_a, stats.only_b, stats.both, stats.union) == (1, 2, 1, 4)

    same = crossover(a, a)
    assert same.only_a == same.only_b == 0 and same.both == 2


def test_crossover_identity_is_positional():
    # same position, different predictions: still a shared error
    a = ErrorSet([ErrorRecord(0, 1, "NOUN", "VERB")])
    b = ErrorSet([ErrorRecord(0, 1, "NOUN", "ADJ")])
    assert crossover(a, b).both == 1


@settings(max_examples=200, deadline=None)
@given(st.sets(st.tuples(st.integers(0, 20), st.integers(1, 15))),
       st.sets(st.tuples(st.integers(0, 20), st.integers(1, 15))))
def test_crossover_set_algebra(pa, pb):
    a = ErrorSet([err(si, ti) for si, ti in pa])
    b = ErrorSet([err(si, ti) for si, ti in pb])
    stats = crossover(a, b)
    assert stats.union == len(a) + len(b) - stats.both
    assert stats.union == len(pa | pb)


def test_class_breakdown_counts_and_ratios():
    gold = chain_treebank([["NOUN", "DET", "PUNCT", "VERB"]])
    errors_a = ErrorSet([err(0, 1, "NOUN", "VERB"), err(0, 2, "DET", "ADP")])
    errors_b = ErrorSet([err(0, 1, "NOUN", "ADJ")])
    a = class_breakdown(errors_a, gold)
    b = class_breakdown(errors_b, gold)
    assert a.errors == {"open": 1, "closed": 1, "other": 0}
    assert a.tokens == {"open": 2, "closed": 1, "other": 1}
    assert a.total_errors == 2 and a.total_tokens == 4
    ratios = class_ratios(a, b)
    assert ratios["open"] == 1.0
    assert ratios["closed"] is None  # b has no closed errors
    assert ratios["other"] is None


def test_class_breakdown_empty_errors():
    gold = chain_treebank([["NOUN", "VERB"]])
    empty = class_breakdown(ErrorSet([]), gold)
    assert empty.total_errors == 0
    assert class_ratios(empty, empty) == {"open": None, "closed": None, "other": None}


def test_reference_count_ratio_formula():
    from tagparse.analysis import ClassBreakdown

    tokens = {"open": 101965, "closed": 46362, "other": 23046}
    a = ClassBreakdown(errors={"open": 6434, "closed": 1867, "other": 336},
                       tokens=tokens)
    b = ClassBreakdown(errors={"open": 15181, "closed": 2816, "other": 429},
                       tokens=tokens)
    ratios = class_ratios(a, b)
    assert round(ratios["open"], 2) == 0.42
    assert round(ratios["closed"], 2) == 0.66
    assert round(ratios["other"], 2) == 0.78


def test_per_tag_f1_all_correct():
    gold = chain_treebank([["NOUN", "VERB", "PUNCT"]])
    pred = [["NOUN", "VERB", "PUNCT"]]
    scores = per_tag_f1(pred, gold)
    assert set(scores) == {"NOUN", "VERB", "PUNCT"}
    assert all(s.f1 == 1.0 for s in scores.values())


def test_per_tag_f1_hand_case():
    # 3 gold X, 2 predicted X of which 1 correct
    gold = chain_treebank([["X", "X", "X", "NOUN"]])
    pred = [["X", "NOUN", "NOUN", "X"]]
    scores = per_tag_f1(pred, gold)
    x = scores["X"]
    assert x.precision == pytest.approx(0.5)
    assert x.recall == pytest.approx(1 / 3)
    assert x.f1 == pytest.approx(0.4)


def test_per_tag_f1_absent_and_zero():
    gold = chain_treebank([["NOUN", "VERB"]])
    pred = [["VERB", "VERB"]]
    scores = per_tag_f1(pred, gold)
    assert "ADJ" not in scores           # never gold, never predicted
    assert scores["NOUN"].f1 == 0.0      # gold but never predicted
    assert scores["NOUN"].predicted_count == 0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(UPOS_TAGS), st.sampled_from(UPOS_TAGS)),
                min_size=1, max_size=60))
def test_micro_f1_pools_to_accuracy(pairs):
    gold = chain_treebank([[g for g, _ in pairs]])
    pred = [[p for _, p in pairs]]
    scores = per_tag_f1(pred, gold)
    correct = sum(s.correct for s in scores.values())
    predicted = sum(s.predicted_count for s in scores.values())
    assert predicted == len(pairs)
    assert correct / predicted == pytest.approx(tagging_accuracy(pred, gold))


def test_top_confusions_ranking_and_ties():
    errors = ErrorSet(
        [err(0, i + 1, "NOUN", "VERB") for i in range(3)]
        + [err(1, 1, "VERB", "NOUN")]
        + [err(1, 2, "ADJ", "ADV")]
    )
    ranked = top_confusions(errors, k=5)
    assert ranked[0] == (("NOUN", "VERB"), 3)
    # ties broken lexicographically by (gold, predicted)
    assert ranked[1] == (("ADJ", "ADV"), 1)
    assert ranked[2] == (("VERB", "NOUN"), 1)
    assert top_confusions(errors, k=100) == ranked


def test_surprisal_spot_values():
    model = TagContextModel(smoothing=0.0)
    for _ in range(3):
        model.add(("A", "B"), "NOUN")
    model.add(("C", "D"), "NOUN")
    for _ in range(3):
        model.add(("C", "D"), "VERB")
    assert model.surprisal(("A", "B"), "NOUN") == 0.0            # p = 1
    assert model.surprisal(("C", "D"), "NOUN") == pytest.approx(2.0)  # p = 1/4


def test_unseen_context_without_smoothing_raises():
    model = TagContextModel(smoothing=0.0)
    model.add(("A", "A"), "NOUN")
    with pytest.raises(ValueError, match="unseen"):
        model.probability(("Z", "Z"), "NOUN")


def brute_bigram_mean(train_rows, target_rows, positions, smoothing=1.0):
    counts = {}
    ctx_counts = {}
    for tags in train_rows:
        padded = ["<s>", "<s>"] + list(tags)
        for i in range(2, len(padded)):
            ctx = (padded[i - 2], padded[i - 1])
            counts[(ctx, padded[i])] = counts.get((ctx, padded[i]), 0) + 1
            ctx_counts[ctx] = ctx_counts.get(ctx, 0) + 1
    v = len(UPOS_TAGS)
    total, n = 0.0, 0
    total_err, n_err = 0.0, 0
    for si, tags in enumerate(target_rows):
        padded = ["<s>", "<s>"] + list(tags)
        for i in range(2, len(padded)):
            ctx = (padded[i - 2], padded[i - 1])
            p = (counts.get((ctx, padded[i]), 0) + smoothing) / \
                (ctx_counts.get(ctx, 0) + smoothing * v)
            bits = -math.log2(p)
            total += bits
            n += 1
            if (si, i - 1) in positions:
                total_err += bits
                n_err += 1
    return total / n, (total_err / n_err if n_err else None)


def test_bigram_surprisal_matches_count_oracle():
    train_rows = [["DET", "NOUN", "VERB", "PUNCT"], ["DET", "NOUN", "VERB", "PUNCT"]]
    target_rows = [["DET", "NOUN", "VERB", "PUNCT"], ["NOUN", "VERB", "DET", "NOUN"]]
    train = chain_treebank(train_rows, split="train")
    target = chain_treebank(target_rows, split="test")
    errors = ErrorSet([err(1, 1), err(1, 3, "DET", "X")])
    stats = bigram_surprisal(train, target, errors)
    mean_all, mean_err = brute_bigram_mean(train_rows, target_rows,
                                           errors.positions())
    assert stats.mean_all == pytest.approx(mean_all, abs=1e-9)
    assert stats.mean_errors == pytest.approx(mean_err, abs=1e-9)
    assert stats.token_count == 8 and stats.error_count == 2


def test_bigram_surprisal_invariant_to_sentence_order():
    rng = random.Random(0)
    rows = [[rng.choice(UPOS_TAGS) for _ in range(rng.randint(2, 6))]
            for _ in range(8)]
    train = chain_treebank(rows[:4], split="train")
    t1 = chain_treebank(rows[4:], split="test")
    t2 = chain_treebank(list(reversed(rows[4:])), split="test")
    s1 = bigram_surprisal(train, t1, ErrorSet([]))
    s2 = bigram_surprisal(train, t2, ErrorSet([]))
    assert s1.mean_all == pytest.approx(s2.mean_all, abs=1e-12)


def test_head_rel_surprisal_deterministic_corpus():
    # (head tag, relation) fully determines the tag: zero bits unsmoothed,
    # and the smoothed mean shrinks toward zero as counts grow
    sentences = [
        make_sentence(["a", "b"], ["NOUN", "VERB"], [2, 0],
                      ["nsubj", "root"], sent_id=f"s{i}")
        for i in range(200)
    ]
    train = Treebank(sentences, split="train", name="det")
    target = Treebank(sentences[:1], split="test", name="det")
    smoothed = head_rel_surprisal(train, target, ErrorSet([]))
    assert 0 < smoothed.mean_all < 0.5
    exact = head_rel_surprisal(train, target, ErrorSet([]), smoothing=0.0)
    assert exact.mean_all == 0.0


def test_head_rel_surprisal_hand_computation():
    # single context (VERB, nsubj): NOUN 3 times, PROPN once
    sentences = [
        make_sentence(["a", "b"], [tag, "VERB"], [2, 0], ["nsubj", "root"],
                      sent_id=f"s{i}")
        for i, tag in enumerate(["NOUN", "NOUN", "NOUN", "PROPN"])
    ]
    train = Treebank(sentences, split="train", name="hand")
    target = Treebank(sentences, split="test", name="hand")
    stats = head_rel_surprisal(train, target, ErrorSet([]), smoothing=0.0)
    # tokens: 4x the verb under (<root>, root) with p=1 -> 0 bits;
    # 3x NOUN at p=3/4, 1x PROPN at p=1/4
    expected = (3 * -math.log2(3 / 4) + 1 * -math.log2(1 / 4)) / 8
    assert stats.mean_all == pytest.approx(expected, abs=1e-12)


def test_errors_in_rare_contexts_raise_error_mean():
    common = [["DET", "NOUN"]] * 9
    rare = [["VERB", "NOUN"]]
    train = chain_treebank(common + rare, split="train")
    target = chain_treebank(common + rare, split="test")
    errors = ErrorSet([err(9, 2)])  # the NOUN in the rare context
    stats = bigram_surprisal(train, target, errors)
    assert stats.mean_errors > stats.mean_all


def test_oov_error_stats():
    flags = [[False, False, True], [True, False]]
    errors = ErrorSet([err(0, 3), err(1, 2)])
    stats = oov_error_stats(flags, errors)
    assert stats.all_proportion == pytest.approx(0.4)
    assert stats.error_proportion == pytest.approx(0.5)
    none = oov_error_stats([[False, False]], ErrorSet([]))
    assert (none.all_proportion, none.error_proportion) == (0.0, 0.0)


def test_errors_from_tags_alignment_checked(tiny_train):
    with pytest.raises(ValueError):
        errors_from_tags(tiny_train, [["NOUN"]])
