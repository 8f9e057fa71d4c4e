import json

import pytest
from hypothesis import given, settings, strategies as st

from absclass.corpus import (
    Document,
    PreprocessConfig,
    default_stopwords,
    ingest_corpus,
    label_counts,
    load_lemma_map,
    load_stopwords,
    preprocess_abstract,
    write_corpus,
)


def test_preprocess_hand_trace():
    cfg = PreprocessConfig(stopword_set={"are"}, lemma_map={"networks": "network"})
    assert preprocess_abstract("Neural networks, are great!", cfg) == [
        "neural",
        "network",
        "great",
    ]


def test_preprocess_empty_input():
    assert preprocess_abstract("", PreprocessConfig()) == []


def test_preprocess_all_stopwords():
    cfg = PreprocessConfig(stopword_set={"the", "of", "and"})
    assert preprocess_abstract("the of and", cfg) == []


def test_preprocess_strips_edge_punctuation_only():
    cfg = PreprocessConfig()
    assert preprocess_abstract("(self-attention)! ...maybe?", cfg) == ["self-attention", "maybe"]


def test_preprocess_keeps_duplicate_order():
    cfg = PreprocessConfig(stopword_set={"the"})
    out = preprocess_abstract("Cell THE gene cell", cfg)
    assert out == ["cell", "gene", "cell"]


def test_config_rejects_bad_values():
    with pytest.raises(ValueError):
        PreprocessConfig(min_words=0)
    with pytest.raises(ValueError):
        PreprocessConfig(lemma_map={"a": ""})


words = st.text(alphabet="abcdefg", min_size=1, max_size=6)


@settings(max_examples=150, deadline=None)
@given(
    raw=st.lists(st.text(alphabet="abcdefg.,!? ", min_size=0, max_size=8), max_size=20).map(
        " ".join
    ),
    stopwords=st.sets(words, max_size=5),
    lemma_pairs=st.dictionaries(words, st.text(alphabet="xyz", min_size=1, max_size=4), max_size=5),
)
def test_preprocess_idempotent(raw, stopwords, lemma_pairs):
    # lemma values drawn from a disjoint alphabet so they cannot be stopwords
    cfg = PreprocessConfig(stopword_set=stopwords, lemma_map=lemma_pairs)
    once = preprocess_abstract(raw, cfg)
    assert preprocess_abstract(" ".join(once), cfg) == once


def test_lemma_chain_resolution(tmp_path):
    path = tmp_path / "lemmas.txt"
    path.write_text("running run\nrun ran\nmice mouse\n", encoding="utf-8")
    lemma_map = load_lemma_map(str(path))
    assert lemma_map == {"running": "ran", "run": "ran", "mice": "mouse"}


def test_lemma_map_bad_line(tmp_path):
    path = tmp_path / "lemmas.txt"
    path.write_text("only-one-token\n", encoding="utf-8")
    with pytest.raises(ValueError, match="lemmas.txt:1"):
        load_lemma_map(str(path))


def test_default_stopwords_sane():
    sw = default_stopwords()
    assert 100 <= len(sw) <= 200
    assert "the" in sw and "of" in sw


def test_load_stopwords(tmp_path):
    path = tmp_path / "sw.txt"
    path.write_text("The\nof\n\nand\n", encoding="utf-8")
    assert load_stopwords(str(path)) == {"the", "of", "and"}


def _write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _rec(doc_id, abstract, label=None):
    record = {"id": doc_id, "abstract": abstract}
    if label is not None:
        record["label"] = label
    return json.dumps(record)


def test_ingest_basic(tmp_path):
    path = tmp_path / "corpus.jsonl"
    long_abstract = " ".join(f"word{i}" for i in range(12))
    _write_lines(path, [_rec("a1", long_abstract, "Physics")])
    docs, report = ingest_corpus(str(path), PreprocessConfig())
    assert len(docs) == 1
    assert docs[0].label == "Physics"
    assert docs[0].tokens == long_abstract.split()
    assert report.kept == 1 and report.total_rejected() == 0


def test_ingest_rejections(tmp_path):
    path = tmp_path / "corpus.jsonl"
    long_abstract = " ".join(f"word{i}" for i in range(12))
    short_abstract = " ".join(f"word{i}" for i in range(9))
    _write_lines(
        path,
        [
            _rec("ok", long_abstract, "Physics"),
            "{not valid json",
            _rec("nolabel", long_abstract),
            _rec("short", short_abstract, "Art"),
            json.dumps({"id": "noabstract", "label": "Art"}),
        ],
    )
    docs, report = ingest_corpus(str(path), PreprocessConfig())
    assert [d.id for d in docs] == ["ok"]
    assert report.input_lines == 5
    assert report.malformed_line == 1
    assert report.missing_field == 2
    assert report.too_short == 1
    assert report.kept + report.total_rejected() == report.input_lines


def test_ingest_unlabeled_mode(tmp_path):
    path = tmp_path / "corpus.jsonl"
    long_abstract = " ".join(f"word{i}" for i in range(12))
    _write_lines(path, [_rec("u1", long_abstract)])
    docs, report = ingest_corpus(str(path), PreprocessConfig(), require_label=False)
    assert len(docs) == 1 and docs[0].label is None


def test_ingest_ten_word_minimum_post_preprocessing(tmp_path):
    # 10 raw words but one is a stopword: only 9 survive -> rejected
    path = tmp_path / "corpus.jsonl"
    abstract = "the " + " ".join(f"word{i}" for i in range(9))
    _write_lines(path, [_rec("a", abstract, "X")])
    cfg = PreprocessConfig(stopword_set={"the"})
    docs, report = ingest_corpus(str(path), cfg)
    assert not docs and report.too_short == 1


def test_ingest_missing_file():
    with pytest.raises(OSError):
        ingest_corpus("/nonexistent/nope.jsonl", PreprocessConfig())


def test_ingest_worker_count_invariant(tmp_path):
    path = tmp_path / "corpus.jsonl"
    lines = [_rec(f"d{i}", " ".join(f"w{i}x{j}" for j in range(11)), "L") for i in range(40)]
    _write_lines(path, lines)
    cfg = PreprocessConfig()
    docs1, rep1 = ingest_corpus(str(path), cfg, workers=1)
    docs3, rep3 = ingest_corpus(str(path), cfg, workers=3)
    assert [d.id for d in docs1] == [d.id for d in docs3]
    assert [d.tokens for d in docs1] == [d.tokens for d in docs3]
    assert rep1.as_dict() == rep3.as_dict()


def test_ingest_for_inference_keeps_short_and_empty(tmp_path):
    from absclass.corpus import ingest_for_inference

    path = tmp_path / "corpus.jsonl"
    _write_lines(
        path,
        [
            _rec("full", " ".join(f"w{i}" for i in range(12))),
            _rec("short", "two words"),
            _rec("empty", "the of"),
            "{broken",
        ],
    )
    cfg = PreprocessConfig(stopword_set={"the", "of"})
    docs, report = ingest_for_inference(str(path), cfg)
    assert [d.id for d in docs] == ["full", "short", "empty"]
    assert docs[2].tokens == []
    assert report.malformed_line == 1
    assert report.too_short == 0


def test_write_corpus_round_trip(tmp_path):
    docs = [
        Document(id="a", raw="x", tokens=["alpha", "beta", "alpha"], label="L1"),
        Document(id="b", raw="y", tokens=["gamma"], label=None),
    ]
    path = tmp_path / "out.jsonl"
    write_corpus(docs, str(path))
    again, report = ingest_corpus(
        str(path), PreprocessConfig(min_words=1), require_label=False
    )
    assert [d.tokens for d in again] == [d.tokens for d in docs]
    assert [d.label for d in again] == ["L1", None]


def test_label_counts():
    docs = [Document("a", "", [], "X"), Document("b", "", [], "X"), Document("c", "", [], "Y")]
    assert label_counts(docs) == {"X": 2, "Y": 1}
    with pytest.raises(ValueError):
        label_counts([Document("d", "", [], None)])
