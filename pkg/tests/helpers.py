"""Synthetic corpora and embedding tables shared across the test modules."""

from __future__ import annotations

import json

import numpy as np

from absclass.corpus import Document
from absclass.embed import EmbeddingTable


def make_doc(doc_id: str, tokens: list[str], label: str | None = None) -> Document:
    return Document(id=doc_id, raw=" ".join(tokens), tokens=list(tokens), label=label)


def random_table(vocab: list[str], dim: int, rng: np.random.Generator) -> EmbeddingTable:
    vectors = {w: rng.normal(size=dim) for w in sorted(set(vocab))}
    return EmbeddingTable(dim=dim, vectors=vectors, source_name="synthetic")


def keyword_corpus(
    rng: np.random.Generator,
    class_sizes: dict[str, int],
    keywords_per_class: int = 12,
    words_per_doc: int = 14,
    shared_pool: list[str] | None = None,
    shared_classes: set[str] | None = None,
    shared_per_doc: int = 0,
    noise_vocab: int = 30,
):
    """Labeled documents whose class is recoverable from disjoint keyword
    pools, optionally diluted with a shared pool and global noise words.

    Returns (documents, full vocabulary list).
    """
    noise = [f"noise{i}" for i in range(noise_vocab)]
    pools = {
        label: [f"{label.lower()}kw{i}" for i in range(keywords_per_class)]
        for label in class_sizes
    }
    vocab = set(noise)
    for pool in pools.values():
        vocab.update(pool)
    if shared_pool:
        vocab.update(shared_pool)
    docs = []
    for label, size in class_sizes.items():
        for n in range(size):
            tokens = list(rng.choice(pools[label], size=words_per_doc // 2))
            if shared_pool and (shared_classes is None or label in shared_classes):
                tokens += list(rng.choice(shared_pool, size=shared_per_doc))
            tokens += list(rng.choice(noise, size=words_per_doc - len(tokens)))
            rng.shuffle(tokens)
            docs.append(make_doc(f"{label}-{n}", [str(t) for t in tokens], label))
    order = rng.permutation(len(docs))
    return [docs[i] for i in order], sorted(vocab)


def write_corpus_jsonl(docs: list[Document], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            record = {"id": doc.id, "abstract": " ".join(doc.tokens)}
            if doc.label is not None:
                record["label"] = doc.label
            fh.write(json.dumps(record) + "\n")


def write_embedding_file(vocab: list[str], dim: int, path, rng: np.random.Generator) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for word in vocab:
            vec = rng.normal(size=dim)
            fh.write(word + " " + " ".join(f"{x:.6f}" for x in vec) + "\n")


def draw_checkable_model(rng, cell_kind, bidirectional, attention, min_grad=2e-6):
    """Finite-difference-checkable model draw; see net.well_conditioned_case."""
    from absclass.net import well_conditioned_case

    return well_conditioned_case(cell_kind, bidirectional, attention, rng, min_grad)
