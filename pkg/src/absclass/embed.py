"""Word-vector file loading and dense feature-sequence construction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import PAD, RankedAbstract, rank_and_select


@dataclass
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray]
    source_name: str = ""
    duplicate_count: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"embedding dim must be >= 1, got {self.dim}")


@dataclass
class FeatureSequence:
    """The d x dim input matrix for one abstract.

    PAD rows are all-zero with mask False; OOV rows are all-zero with mask
    True, which keeps them inert in the linear maps but still attendable.
    """

    matrix: np.ndarray
    mask: np.ndarray
    oov_rows: int = 0

    @property
    def flat_dim(self) -> int:
        return int(self.matrix.shape[0] * self.matrix.shape[1])


@dataclass
class OovReport:
    real_rows: int = 0
    oov_rows: int = 0

    @property
    def oov_rate(self) -> float:
        return self.oov_rows / self.real_rows if self.real_rows else 0.0

    def as_dict(self) -> dict:
        return {
            "real_rows": self.real_rows,
            "oov_rows": self.oov_rows,
            "oov_rate": self.oov_rate,
        }


def load_embedding_table(path: str, expected_dim: int | None = None) -> EmbeddingTable:
    """Parse the space-separated text vector format (word then floats).

    The dimension is inferred from the first vector line and every later line
    must agree; a mismatch is fatal and names the line. A first line of
    exactly two integer tokens is skipped as a word2vec-style size header.
    Duplicate words keep their first vector; duplicates are counted.
    """
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    duplicates = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            parts = [p for p in parts if p]
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2 and all(_is_int(p) for p in parts):
                continue
            word, values = parts[0], parts[1:]
            if not values:
                raise ValueError(f"{path}:{lineno}: no vector components")
            try:
                vec = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if dim is None:
                dim = len(vec)
                if expected_dim is not None and dim != expected_dim:
                    raise ValueError(
                        f"{path}:{lineno}: vector length {dim}, expected {expected_dim}"
                    )
            elif len(vec) != dim:
                raise ValueError(
                    f"{path}:{lineno}: vector length {len(vec)} != {dim} from first entry"
                )
            if word in vectors:
                duplicates += 1
                continue
            vectors[word] = vec
    if dim is None:
        raise ValueError(f"{path}: no vectors found")
    return EmbeddingTable(dim=dim, vectors=vectors, source_name=path, duplicate_count=duplicates)


def _is_int(token: str) -> bool:
    try:
        int(token)
        return True
    except ValueError:
        return False


def embed_sequence(ranked: RankedAbstract, table: EmbeddingTable) -> FeatureSequence:
    """Row t is the vector of selected token t; PAD and OOV rows are zero."""
    d = ranked.d
    matrix = np.zeros((d, table.dim), dtype=np.float64)
    mask = np.zeros(d, dtype=bool)
    oov = 0
    for t, token in enumerate(ranked.selected):
        if token == PAD:
            continue
        mask[t] = True
        vec = table.vectors.get(token)
        if vec is None:
            oov += 1
        else:
            matrix[t] = vec
    return FeatureSequence(matrix=matrix, mask=mask, oov_rows=oov)


def embed_corpus(
    ranked_list: list[RankedAbstract], table: EmbeddingTable
) -> tuple[list[FeatureSequence], OovReport]:
    report = OovReport()
    seqs = []
    for ranked in ranked_list:
        seq = embed_sequence(ranked, table)
        report.real_rows += int(seq.mask.sum())
        report.oov_rows += seq.oov_rows
        seqs.append(seq)
    return seqs, report


def vocab_overlap(corpus_vocab: set[str], table: EmbeddingTable) -> float:
    """Fraction of the corpus vocabulary covered by the embedding table."""
    if not corpus_vocab:
        raise ValueError("corpus vocabulary is empty")
    return len(corpus_vocab & table.vectors.keys()) / len(corpus_vocab)


def featurize_documents(docs, idf, table: EmbeddingTable, d: int):
    """Stack the full feature pipeline for a document list.

    Returns (X, mask, oov_report) where X is (N, d, dim) and mask is (N, d).
    """
    ranked = [rank_and_select(doc, idf, d) for doc in docs]
    seqs, report = embed_corpus(ranked, table)
    X = np.stack([s.matrix for s in seqs])
    mask = np.stack([s.mask for s in seqs])
    return X, mask, report
