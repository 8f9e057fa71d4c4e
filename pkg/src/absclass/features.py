"""TF-IDF ranking of word types and top-d sequence selection."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .corpus import Document

# Sentinel filling short sequences up to length d. Tokenization strips edge
# punctuation, so no real token can ever equal this string.
PAD = "<pad>"


@dataclass
class IdfTable:
    doc_count: int
    idf: dict[str, float]

    def lookup(self, word: str) -> float:
        """Unknown words score 0, matching never-seen semantics."""
        return self.idf.get(word, 0.0)


@dataclass
class RankedAbstract:
    """One abstract's word types, their TF-IDF ranking, and the padded
    top-d selection restored to original abstract order."""

    word_types: list[str]
    scored: list[tuple[str, float]]
    selected: list[str]
    d: int


def build_idf(corpus: list[Document]) -> IdfTable:
    """idf[w] = ln(N / df_w), df counted over per-document word-type sets."""
    if not corpus:
        raise ValueError("cannot build an IDF table from an empty corpus")
    df: dict[str, int] = {}
    for doc in corpus:
        for word in set(doc.tokens):
            df[word] = df.get(word, 0) + 1
    n = len(corpus)
    return IdfTable(doc_count=n, idf={w: math.log(n / c) for w, c in df.items()})


def tfidf_rank(doc: Document, idf: IdfTable) -> list[tuple[str, float]]:
    """Score every word type by tf * idf, descending.

    tf is the raw occurrence count in the abstract. Ties go to the word that
    appears earlier in the abstract.
    """
    if not doc.tokens:
        raise ValueError(f"document {doc.id!r} has no tokens")
    tf: dict[str, int] = {}
    first_pos: dict[str, int] = {}
    for pos, token in enumerate(doc.tokens):
        tf[token] = tf.get(token, 0) + 1
        if token not in first_pos:
            first_pos[token] = pos
    scored = [(w, tf[w] * idf.lookup(w)) for w in tf]
    scored.sort(key=lambda item: (-item[1], first_pos[item[0]]))
    return scored


def select_and_reorder(
    ranked: list[tuple[str, float]], doc: Document, d: int
) -> RankedAbstract:
    """Keep the top-d ranked words, restore abstract order, pad to length d."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    first_pos: dict[str, int] = {}
    word_types: list[str] = []
    for pos, token in enumerate(doc.tokens):
        if token not in first_pos:
            first_pos[token] = pos
            word_types.append(token)
    top = [w for w, _ in ranked[:d]]
    top.sort(key=lambda w: first_pos[w])
    selected = top + [PAD] * (d - len(top))
    return RankedAbstract(word_types=word_types, scored=ranked, selected=selected, d=d)


def rank_and_select(doc: Document, idf: IdfTable, d: int) -> RankedAbstract:
    return select_and_reorder(tfidf_rank(doc, idf), doc, d)


def save_idf(table: IdfTable, path: str) -> None:
    """Text format: header "N <doc_count>", then word<TAB>idf sorted by word."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"N {table.doc_count}\n")
        for word in sorted(table.idf):
            fh.write(f"{word}\t{table.idf[word]:.17g}\n")


def load_idf(path: str) -> IdfTable:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "N" or not header[1].isdigit():
            raise ValueError(f"{path}: bad IDF header, expected 'N <doc_count>'")
        doc_count = int(header[1])
        idf: dict[str, float] = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'word<TAB>idf'")
            idf[parts[0]] = float(parts[1])
    return IdfTable(doc_count=doc_count, idf=idf)
