import warnings
from pathlib import Path

import pytest

from tagparse.conllu import (
    ConlluParseError,
    TreebankWarning,
    Treebank,
    build_vocabulary,
    make_sentence,
    oov_flags,
    parse_conllu,
    write_conllu,
)

FIXTURES = Path(__file__).parent / "fixtures" / "roundtrip"


def toks(sentence):
    return [(t.index, t.form, t.upos, t.head, t.deprel) for t in sentence.tokens]


def test_basic_parse_field_mapping():
    text = ("1\the\t_\tPRON\t_\t_\t2\tnsubj\t_\t_\n"
            "2\truns\t_\tVERB\t_\t_\t0\troot\t_\t_\n")
    tb = parse_conllu(text, split="train")
    sent = tb.sentences[0]
    assert sent.tokens[0].head == 2
    assert sent.tokens[1].head == 0
    assert sent.tokens[0].form == "he"
    assert sent.tokens[1].upos == "VERB"


def test_wrong_column_count_names_line():
    text = ("1\the\t_\tPRON\t_\t_\t2\tnsubj\t_\t_\n"
            "2\truns\t_\tVERB\t_\t0\troot\t_\t_\n")
    with pytest.raises(ConlluParseError, match="line 2"):
        parse_conllu(text)


def test_non_integer_head_is_an_error():
    text = "1\the\t_\tPRON\t_\t_\tx\tnsubj\t_\t_\n"
    with pytest.raises(ConlluParseError, match="non-integer head"):
        parse_conllu(text)


def test_self_headed_token_is_an_error():
    text = "1\the\t_\tPRON\t_\t_\t1\tnsubj\t_\t_\n"
    with pytest.raises(ConlluParseError, match="own head"):
        parse_conllu(text)


def test_non_contiguous_ids_are_an_error():
    text = ("1\ta\t_\tX\t_\t_\t0\troot\t_\t_\n"
            "3\tb\t_\tX\t_\t_\t1\tdep\t_\t_\n")
    with pytest.raises(ConlluParseError, match="contiguity"):
        parse_conllu(text)


def test_multiple_roots_warn_but_keep_sentence():
    text = ("1\ta\t_\tX\t_\t_\t0\troot\t_\t_\n"
            "2\tb\t_\tX\t_\t_\t0\troot\t_\t_\n")
    with pytest.warns(TreebankWarning, match="root"):
        tb = parse_conllu(text)
    assert len(tb.sentences[0].tokens) == 2


def test_head_beyond_sentence_warns():
    text = ("1\ta\t_\tX\t_\t_\t0\troot\t_\t_\n"
            "2\tb\t_\tX\t_\t_\t9\tdep\t_\t_\n")
    with pytest.warns(TreebankWarning, match="exceeds"):
        parse_conllu(text)


def test_mwt_lines_excluded_from_tokens_but_preserved():
    text = ("1-2\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n"
            "1\tde\t_\tADP\t_\t_\t2\tcase\t_\t_\n"
            "2\tel\t_\tDET\t_\t_\t0\troot\t_\t_\n")
    tb = parse_conllu(text)
    sent = tb.sentences[0]
    assert len(sent.tokens) == 2
    assert sent.rows[0][0] == "1-2"
    assert "1-2\tdel" in write_conllu(tb)


def test_token_count_equals_plain_integer_id_lines():
    for path in sorted(FIXTURES.glob("*.conllu")):
        text = path.read_text(encoding="utf-8")
        plain = sum(
            1 for line in text.splitlines()
            if line and not line.startswith("#")
            and line.split("\t")[0].isdigit()
        )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            tb = parse_conllu(text, split="train")
        assert tb.token_count() == plain


def test_round_trip_is_field_identical_on_all_fixtures():
    for path in sorted(FIXTURES.glob("*.conllu")):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            tb = parse_conllu(path.read_text(encoding="utf-8"), split="train")
            again = parse_conllu(write_conllu(tb), split="train")
        assert len(tb.sentences) == len(again.sentences)
        for a, b in zip(tb, again):
            assert toks(a) == toks(b)
            assert a.comments == b.comments
            assert a.rows == b.rows


def test_write_with_gold_overrides_is_identity():
    text = (FIXTURES / "01_basic.conllu").read_text(encoding="utf-8")
    tb = parse_conllu(text)
    overrides = [s.gold_tags() for s in tb]
    assert write_conllu(tb, tags=overrides) == write_conllu(tb)


def test_write_with_mask_override_carries_literal_symbol():
    tb = parse_conllu("1\the\t_\tPRON\t_\t_\t0\troot\t_\t_\n")
    out = write_conllu(tb, tags=[["MASK"]])
    cols = [l for l in out.splitlines() if l and not l.startswith("#")][0].split("\t")
    assert cols[3] == "MASK"


def test_override_length_mismatch_raises():
    tb = parse_conllu("1\the\t_\tPRON\t_\t_\t0\troot\t_\t_\n")
    with pytest.raises(ValueError, match="override"):
        write_conllu(tb, tags=[["PRON", "VERB"]])
    with pytest.raises(ValueError, match="override"):
        write_conllu(tb, tags=[])


def test_vocabulary_first_occurrence_order():
    tb = Treebank(
        [make_sentence(["a", "b", "a"], ["X", "X", "X"], [0, 1, 1],
                       ["root", "dep", "dep"])],
        split="train",
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        vocab = build_vocabulary(tb)
    assert vocab.forms == {"a": 2, "b": 3}
    assert vocab.form_id("unseen") == 1
    assert vocab.relations == {"root": 0, "dep": 1}


def test_vocabulary_is_deterministic(tiny_train):
    v1 = build_vocabulary(tiny_train)
    v2 = build_vocabulary(tiny_train)
    assert v1.forms == v2.forms
    assert v1.chars == v2.chars
    assert v1.relations == v2.relations


def test_vocabulary_requires_train_split(tiny_train):
    dev = Treebank(tiny_train.sentences, split="dev", name="tiny")
    with pytest.raises(ValueError, match="train split"):
        build_vocabulary(dev)


def test_vocabulary_rejects_empty():
    with pytest.raises(ConlluParseError):
        parse_conllu("", split="train")


def test_oov_flags_and_proportion(tiny_train, tiny_vocab):
    flags = oov_flags(tiny_vocab, tiny_train)
    assert not any(f for row in flags for f in row)

    target = Treebank(
        [make_sentence(
            ["the", "dog", "zap", "qux", "runs", ".", "a", "cat", "dogs", "she"],
            ["DET", "NOUN", "X", "X", "VERB", "PUNCT", "DET", "NOUN", "NOUN", "PRON"],
            [2, 5, 5, 5, 0, 5, 8, 5, 5, 5],
            ["det", "nsubj", "dep", "dep", "root", "punct", "det", "obj", "dep", "dep"],
        )],
        split="test",
        name="tiny",
    )
    flags = oov_flags(tiny_vocab, target)
    assert sum(sum(row) for row in flags) == 2
    assert sum(sum(row) for row in flags) / target.token_count() == pytest.approx(0.2)
    # alternate vocabulary reading: a plain form set
    flags2 = oov_flags({"the", "dog"}, target)
    assert flags2[0][0] is False and flags2[0][2] is True


def test_treebank_requires_known_split(tiny_train):
    with pytest.raises(ValueError, match="split"):
        Treebank(tiny_train.sentences, split="training")
