"""Corpus ingestion: JSONL abstracts in, clean lemmatized token lists out."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

from ._pool import map_ordered


@dataclass
class Document:
    """One labeled abstract. ``label`` stays None for inference corpora."""

    id: str
    raw: str
    tokens: list[str]
    label: str | None = None


@dataclass
class PreprocessConfig:
    stopword_set: set[str] = field(default_factory=set)
    lemma_map: dict[str, str] = field(default_factory=dict)
    min_words: int = 10

    def __post_init__(self):
        if self.min_words < 1:
            raise ValueError(f"min_words must be >= 1, got {self.min_words}")
        for token, lemma in self.lemma_map.items():
            if not lemma:
                raise ValueError(f"empty lemma for token {token!r}")


@dataclass
class RejectionReport:
    """Counts of dropped records, bucketed by reason."""

    input_lines: int = 0
    kept: int = 0
    malformed_line: int = 0
    missing_field: int = 0
    too_short: int = 0

    def total_rejected(self) -> int:
        return self.malformed_line + self.missing_field + self.too_short

    def as_dict(self) -> dict:
        return {
            "input_lines": self.input_lines,
            "kept": self.kept,
            "rejected": {
                "malformed_line": self.malformed_line,
                "missing_field": self.missing_field,
                "too_short": self.too_short,
            },
        }


def default_stopwords() -> set[str]:
    """The English stopword list shipped with the package."""
    text = resources.files("absclass.data").joinpath("stopwords_en.txt").read_text("utf-8")
    return {line.strip() for line in text.splitlines() if line.strip()}


def load_stopwords(path: str) -> set[str]:
    """One lowercase word per line; blank lines ignored."""
    with open(path, encoding="utf-8") as fh:
        return {line.strip().lower() for line in fh if line.strip()}


def load_lemma_map(path: str) -> dict[str, str]:
    """Load a token->lemma dictionary, one whitespace-separated pair per line.

    Chains (a->b, b->c) are resolved to their fixpoint at load time so that
    applying the map twice equals applying it once.
    """
    raw: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'token lemma', got {line!r}")
            raw[parts[0].lower()] = parts[1].lower()
    return _resolve_chains(raw)


def _resolve_chains(lemma_map: dict[str, str]) -> dict[str, str]:
    resolved = {}
    for token, lemma in lemma_map.items():
        seen = {token}
        while lemma in lemma_map and lemma not in seen:
            seen.add(lemma)
            lemma = lemma_map[lemma]
        resolved[token] = lemma
    return resolved


def _strip_edges(token: str) -> str:
    start, end = 0, len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[start:end]


def preprocess_abstract(raw: str, cfg: PreprocessConfig) -> list[str]:
    """Lowercase, split on whitespace, strip edge punctuation, drop stopwords,
    map each survivor through the lemma dictionary. Order is preserved."""
    tokens = []
    for piece in raw.lower().split():
        token = _strip_edges(piece)
        if not token or token in cfg.stopword_set:
            continue
        tokens.append(cfg.lemma_map.get(token, token))
    return tokens


def _parse_line(line: str, cfg: PreprocessConfig, require_label: bool, keep_short: bool = False):
    """Returns (Document, None) or (None, rejection-bucket name)."""
    line = line.strip()
    if not line:
        return None, "malformed_line"
    try:
        record = json.loads(line)
    except json.JSONDecodeError:
        return None, "malformed_line"
    if not isinstance(record, dict):
        return None, "malformed_line"
    doc_id = record.get("id")
    abstract = record.get("abstract")
    label = record.get("label")
    if not isinstance(doc_id, str) or not isinstance(abstract, str):
        return None, "missing_field"
    if require_label and not isinstance(label, str):
        return None, "missing_field"
    if label is not None and not isinstance(label, str):
        return None, "malformed_line"
    tokens = preprocess_abstract(abstract, cfg)
    if len(tokens) < cfg.min_words and not keep_short:
        return None, "too_short"
    return Document(id=doc_id, raw=abstract, tokens=tokens, label=label), None


def ingest_corpus(
    path: str,
    cfg: PreprocessConfig,
    require_label: bool = True,
    workers: int = 1,
) -> tuple[list[Document], RejectionReport]:
    """Read a JSONL corpus file into Documents.

    Malformed lines, records missing a required field, and abstracts that end
    up shorter than ``cfg.min_words`` tokens are skipped and counted, never
    fatal. An unreadable file raises OSError. Output order follows input line
    order for any worker count.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    report = RejectionReport(input_lines=len(lines))
    docs: list[Document] = []
    results = map_ordered(
        _parse_line, lines, workers, cfg=cfg, require_label=require_label
    )
    for doc, reason in results:
        if doc is None:
            setattr(report, reason, getattr(report, reason) + 1)
        else:
            docs.append(doc)
    report.kept = len(docs)
    return docs, report


def ingest_for_inference(
    path: str, cfg: PreprocessConfig, workers: int = 1
) -> tuple[list[Document], RejectionReport]:
    """Lenient ingestion for classification: the minimum-length rule is
    waived so every well-formed record yields a Document, even with zero
    content tokens. Only malformed lines and missing fields are rejected."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    report = RejectionReport(input_lines=len(lines))
    docs: list[Document] = []
    results = map_ordered(
        _parse_line, lines, workers, cfg=cfg, require_label=False, keep_short=True
    )
    for doc, reason in results:
        if doc is None:
            setattr(report, reason, getattr(report, reason) + 1)
        else:
            docs.append(doc)
    report.kept = len(docs)
    return docs, report


def write_corpus(docs: list[Document], path: str) -> None:
    """Write documents back out as corpus JSONL; the abstract field carries
    the cleaned tokens, so re-ingesting reproduces the same token lists."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            record = {"id": doc.id, "abstract": " ".join(doc.tokens)}
            if doc.label is not None:
                record["label"] = doc.label
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def label_counts(docs: list[Document]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for doc in docs:
        if doc.label is None:
            raise ValueError(f"document {doc.id!r} has no label")
        counts[doc.label] = counts.get(doc.label, 0) + 1
    return counts
