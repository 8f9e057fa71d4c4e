import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from absclass.features import (
    PAD,
    IdfTable,
    build_idf,
    load_idf,
    rank_and_select,
    save_idf,
    select_and_reorder,
    tfidf_rank,
)
from helpers import make_doc


def test_build_idf_hand_value():
    docs = [
        make_doc("1", ["cell", "gene"]),
        make_doc("2", ["cell", "protein"]),
        make_doc("3", ["star"]),
        make_doc("4", ["galaxy"]),
    ]
    table = build_idf(docs)
    assert table.doc_count == 4
    assert table.idf["cell"] == pytest.approx(math.log(2), abs=1e-12)
    assert table.idf["cell"] == pytest.approx(0.693147, abs=1e-6)


def test_idf_word_in_all_docs_is_zero():
    docs = [make_doc(str(i), ["common", f"unique{i}"]) for i in range(5)]
    table = build_idf(docs)
    assert table.idf["common"] == 0.0
    assert table.idf[f"unique{0}"] == pytest.approx(math.log(5))


def test_idf_absent_word_scores_zero():
    table = build_idf([make_doc("1", ["a"])])
    assert "b" not in table.idf
    assert table.lookup("b") == 0.0


def test_idf_bounds():
    rng = np.random.default_rng(0)
    docs = [
        make_doc(str(i), [f"w{rng.integers(8)}" for _ in range(6)]) for i in range(12)
    ]
    table = build_idf(docs)
    for value in table.idf.values():
        assert 0.0 <= value <= math.log(table.doc_count) + 1e-12


def test_build_idf_empty_corpus():
    with pytest.raises(ValueError):
        build_idf([])


def test_tfidf_rank_hand_values():
    doc = make_doc("d", ["cell", "cell", "cell", "gene"])
    table = IdfTable(doc_count=10, idf={"cell": 0.2, "gene": 1.5})
    ranked = tfidf_rank(doc, table)
    assert ranked[0] == ("gene", pytest.approx(1.5))
    assert ranked[1] == ("cell", pytest.approx(0.6))


def test_tfidf_rank_tie_breaks_by_first_occurrence():
    doc = make_doc("d", ["beta", "alpha"])
    table = IdfTable(doc_count=4, idf={"alpha": 1.0, "beta": 1.0})
    ranked = tfidf_rank(doc, table)
    assert [w for w, _ in ranked] == ["beta", "alpha"]


def test_tfidf_rank_singleton():
    doc = make_doc("d", ["only", "only"])
    ranked = tfidf_rank(doc, IdfTable(1, {"only": 0.5}))
    assert ranked == [("only", pytest.approx(1.0))]


def test_tfidf_rank_empty_doc():
    with pytest.raises(ValueError):
        tfidf_rank(make_doc("d", []), IdfTable(1, {}))


def test_select_all_fit_pads_to_d():
    doc = make_doc("d", ["a", "b", "c"])
    ranked = [("b", 3.0), ("a", 2.0), ("c", 1.0)]
    out = select_and_reorder(ranked, doc, d=5)
    assert out.selected == ["a", "b", "c", PAD, PAD]
    assert out.word_types == ["a", "b", "c"]


def test_select_reorders_top_k_to_original_order():
    doc = make_doc("d", ["w1", "w2", "w3", "w4"])
    ranked = [("w3", 4.0), ("w1", 3.0), ("w2", 2.0), ("w4", 1.0)]
    out = select_and_reorder(ranked, doc, d=3)
    assert out.selected == ["w1", "w2", "w3"]
    # top-2 by score is {w3, w1}; abstract order puts w1 first, pads fill up
    assert select_and_reorder(ranked[:2], doc, d=4).selected == ["w1", "w3", PAD, PAD]


def test_select_exactly_d_no_padding():
    doc = make_doc("d", ["x", "y"])
    out = select_and_reorder([("y", 2.0), ("x", 1.0)], doc, d=2)
    assert out.selected == ["x", "y"]


def test_select_requires_positive_d():
    with pytest.raises(ValueError):
        select_and_reorder([], make_doc("d", ["a"]), d=0)


# ---------------------------------------------------------------------------
# brute-force oracle: recompute everything with independent, naive code
# ---------------------------------------------------------------------------

def brute_force_pipeline(token_lists, d):
    """Naive recomputation of idf, scores, ranking, and selection."""
    n = len(token_lists)
    vocab = sorted({w for tokens in token_lists for w in tokens})
    idf = {}
    for word in vocab:
        containing = sum(1 for tokens in token_lists if word in tokens)
        idf[word] = math.log(n / containing)
    results = []
    for tokens in token_lists:
        counts = Counter(tokens)
        firsts = {}
        for pos, tok in enumerate(tokens):
            firsts.setdefault(tok, pos)
        scores = {w: counts[w] * idf[w] for w in counts}
        order = sorted(scores, key=lambda w: (-scores[w], firsts[w]))
        chosen = sorted(order[:d], key=lambda w: firsts[w])
        padded = chosen + [PAD] * (d - len(chosen))
        results.append((idf, [(w, scores[w]) for w in order], padded))
    return results


def random_micro_corpus(rng):
    vocab = [f"w{i}" for i in range(int(rng.integers(2, 31)))]
    docs = []
    for i in range(int(rng.integers(1, 21))):
        length = int(rng.integers(1, 15))
        docs.append(make_doc(str(i), [vocab[rng.integers(len(vocab))] for _ in range(length)]))
    return docs


@pytest.mark.parametrize("seed", range(20))
def test_brute_force_oracle_equivalence(seed):
    rng = np.random.default_rng(seed)
    docs = random_micro_corpus(rng)
    d = int(rng.integers(1, 12))
    table = build_idf(docs)
    expected = brute_force_pipeline([doc.tokens for doc in docs], d)
    for doc, (idf, scored, padded) in zip(docs, expected):
        for word, value in idf.items():
            assert table.lookup(word) == pytest.approx(value, abs=1e-12)
        ranked = tfidf_rank(doc, table)
        assert [w for w, _ in ranked] == [w for w, _ in scored]
        for (w1, s1), (w2, s2) in zip(ranked, scored):
            assert s1 == pytest.approx(s2, abs=1e-12)
        out = select_and_reorder(ranked, doc, d)
        assert out.selected == padded


@settings(max_examples=60, deadline=None)
@given(
    tokens=st.lists(st.sampled_from([f"w{i}" for i in range(9)]), min_size=1, max_size=25),
    d=st.integers(min_value=1, max_value=12),
)
def test_selected_length_is_always_d(tokens, d):
    doc = make_doc("d", tokens)
    table = build_idf([doc, make_doc("other", ["w0", "zz"])])
    out = rank_and_select(doc, table, d)
    assert len(out.selected) == d
    real = [w for w in out.selected if w != PAD]
    assert out.selected == real + [PAD] * (d - len(real))


def test_rank_monotone_in_tf():
    rng = np.random.default_rng(5)
    for _ in range(30):
        docs = random_micro_corpus(rng)
        doc = docs[0]
        table = build_idf(docs)
        ranked = [w for w, _ in tfidf_rank(doc, table)]
        boost = doc.tokens[int(rng.integers(len(doc.tokens)))]
        boosted = make_doc(doc.id, doc.tokens + [boost])
        ranked_boosted = [w for w, _ in tfidf_rank(boosted, table)]
        assert ranked_boosted.index(boost) <= ranked.index(boost)


def test_idf_save_load_round_trip(tmp_path):
    docs = [make_doc(str(i), [f"w{j}" for j in range(i + 1)]) for i in range(4)]
    table = build_idf(docs)
    path = tmp_path / "idf.tsv"
    save_idf(table, str(path))
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "N 4"
    assert lines[1:] == sorted(lines[1:])
    loaded = load_idf(str(path))
    assert loaded.doc_count == table.doc_count
    assert loaded.idf == table.idf


def test_load_idf_bad_header(tmp_path):
    path = tmp_path / "idf.tsv"
    path.write_text("not-a-header\n", encoding="utf-8")
    with pytest.raises(ValueError, match="header"):
        load_idf(str(path))
