import random

import pytest

from tagparse.conllu import Treebank, make_sentence
from tagparse.metrics import ParseScore, attachment_scores, tagging_accuracy


def tree_treebank(entries, split="test"):
    sentences = []
    for i, (heads, rels) in enumerate(entries):
        n = len(heads)
        forms = [f"w{j}" for j in range(n)]
        tags = ["NOUN"] * n
        sentences.append(make_sentence(forms, tags, heads, rels, sent_id=f"s{i}"))
    return Treebank(sentences, split=split, name="m")


def test_identical_trees_score_one():
    gold = tree_treebank([([2, 0, 2], ["nsubj", "root", "obj"])])
    predicted = [[(2, "nsubj"), (0, "root"), (2, "obj")]]
    score = attachment_scores(predicted, gold)
    assert score.uas == 1.0 and score.las == 1.0 and score.token_count == 3


def test_wrong_label_only_hits_las():
    gold = tree_treebank([([2, 0, 2, 2], ["nsubj", "root", "obj", "punct"])])
    predicted = [[(2, "nsubj"), (0, "root"), (2, "obl"), (2, "punct")]]
    score = attachment_scores(predicted, gold)
    assert score.uas == 1.0
    assert score.las == pytest.approx(0.75)


def test_las_never_exceeds_uas_random():
    rng = random.Random(0)
    rels = ["a", "b", "c"]
    for _ in range(100):
        n = rng.randint(1, 8)
        heads = [0] + [rng.randint(0, n) for _ in range(n - 1)]
        heads = [h if h != i + 1 else 0 for i, h in enumerate(heads)]
        gold = tree_treebank([(heads, [rng.choice(rels) for _ in range(n)])])
        predicted = [[(rng.randint(0, n), rng.choice(rels)) for _ in range(n)]]
        predicted = [[(h if h != i + 1 else 0, r)
                      for i, (h, r) in enumerate(predicted[0])]]
        score = attachment_scores(predicted, gold)
        assert 0.0 <= score.las <= score.uas <= 1.0
        # naive per-token oracle
        uas = sum(h == t.head for (h, _), t in
                  zip(predicted[0], gold.sentences[0].tokens)) / n
        las = sum(h == t.head and r == t.deprel for (h, r), t in
                  zip(predicted[0], gold.sentences[0].tokens)) / n
        assert score.uas == pytest.approx(uas) and score.las == pytest.approx(las)


def test_alignment_mismatch_raises():
    gold = tree_treebank([([0], ["root"])])
    with pytest.raises(ValueError):
        attachment_scores([], gold)
    with pytest.raises(ValueError):
        attachment_scores([[(0, "root"), (1, "x")]], gold)


def test_tagging_accuracy_cases():
    gold = tree_treebank([([0, 1], ["root", "dep"]), ([0, 1], ["root", "dep"])])
    assert tagging_accuracy([["NOUN", "NOUN"], ["NOUN", "NOUN"]], gold) == 1.0
    assert tagging_accuracy([["NOUN", "X"], ["X", "NOUN"]], gold) == 0.5
    with pytest.raises(ValueError):
        tagging_accuracy([["NOUN"]], gold)


def test_scores_invariant_to_sentence_order():
    entries = [([2, 0], ["nsubj", "root"]), ([0], ["root"])]
    gold_a = tree_treebank(entries)
    gold_b = tree_treebank(list(reversed(entries)))
    pred_a = [[(2, "nsubj"), (0, "root")], [(0, "x")]]
    pred_b = list(reversed(pred_a))
    sa = attachment_scores(pred_a, gold_a)
    sb = attachment_scores(pred_b, gold_b)
    assert (sa.uas, sa.las) == (sb.uas, sb.las)


def test_parse_score_empty_is_zero():
    score = ParseScore(0, 0, 0)
    assert score.uas == 0.0 and score.las == 0.0
