"""Two-level label schema: majors, an Others bucket, minors, and merges."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import Document
from .net import ModelParams, forward_batch

DEFAULT_OTHERS = "Others"


@dataclass
class LabelSchema:
    majors: list[str]
    minors: list[str]
    threshold: int
    others_sentinel: str = DEFAULT_OTHERS
    merge_map: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        overlap = set(self.majors) & set(self.minors)
        if overlap:
            raise ValueError(f"labels in both majors and minors: {sorted(overlap)}")
        if self.others_sentinel in self.majors or self.others_sentinel in self.minors:
            raise ValueError(f"sentinel {self.others_sentinel!r} collides with a real label")

    @property
    def level1_classes(self) -> list[str]:
        """Class list for the first-level model (sentinel appended when
        there are minors to route)."""
        if self.minors:
            return self.majors + [self.others_sentinel]
        return list(self.majors)

    def all_labels(self) -> list[str]:
        return self.majors + self.minors

    def to_json(self) -> dict:
        return {
            "majors": self.majors,
            "minors": self.minors,
            "threshold": self.threshold,
            "others_sentinel": self.others_sentinel,
            "merge_map": self.merge_map,
        }

    @classmethod
    def from_json(cls, data: dict) -> "LabelSchema":
        return cls(
            majors=list(data["majors"]),
            minors=list(data["minors"]),
            threshold=int(data["threshold"]),
            others_sentinel=data.get("others_sentinel", DEFAULT_OTHERS),
            merge_map=dict(data.get("merge_map", {})),
        )


def save_schema(schema: LabelSchema, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_json(), fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def load_schema(path: str) -> LabelSchema:
    with open(path, encoding="utf-8") as fh:
        return LabelSchema.from_json(json.load(fh))


def build_two_level_schema(
    label_counts: dict[str, int],
    threshold: int,
    others_sentinel: str = DEFAULT_OTHERS,
) -> LabelSchema:
    """Labels with at least ``threshold`` training documents become majors;
    the rest are wrapped into the Others bucket as minors."""
    if not label_counts:
        raise ValueError("empty label counts")
    if threshold < 1:
        raise ValueError(f"threshold must be >= 1, got {threshold}")
    majors = [l for l in label_counts if label_counts[l] >= threshold]
    minors = [l for l in label_counts if label_counts[l] < threshold]
    if not majors:
        raise ValueError(f"no label reaches the threshold {threshold}; level 1 is degenerate")
    majors.sort(key=lambda l: (-label_counts[l], l))
    minors.sort(key=lambda l: (-label_counts[l], l))
    return LabelSchema(
        majors=majors, minors=minors, threshold=threshold, others_sentinel=others_sentinel
    )


def relabel_for_level1(docs: list[Document], schema: LabelSchema) -> list[Document]:
    """Copy of the corpus with every minor-class label replaced by the
    sentinel, ready to train the first-level model."""
    minors = set(schema.minors)
    out = []
    for doc in docs:
        label = schema.others_sentinel if doc.label in minors else doc.label
        out.append(Document(id=doc.id, raw=doc.raw, tokens=doc.tokens, label=label))
    return out


def minor_subset(docs: list[Document], schema: LabelSchema) -> list[Document]:
    minors = set(schema.minors)
    return [doc for doc in docs if doc.label in minors]


def route_predict(
    X: np.ndarray,
    mask: np.ndarray,
    level1: ModelParams,
    level2: ModelParams | None,
    schema: LabelSchema,
    batch_size: int = 256,
) -> tuple[list[str], np.ndarray]:
    """Cascade prediction for featurized abstracts.

    Level 1 decides among majors plus the sentinel; anything routed to the
    sentinel is resolved by the level-2 model over the minors. Returns final
    labels and the probability assigned by whichever level emitted them.
    """
    if level1.label_names != schema.level1_classes:
        raise ValueError("level-1 model classes do not match the schema")
    if level2 is not None and level2.label_names != schema.minors:
        raise ValueError("level-2 model classes do not match the schema minors")
    n = X.shape[0]
    labels: list[str | None] = [None] * n
    probs = np.zeros(n)
    sentinel_rows = []
    for start in range(0, n, batch_size):
        sl = slice(start, min(start + batch_size, n))
        trace = forward_batch(X[sl], mask[sl], level1)
        picks = trace.probs.argmax(axis=1)
        for row, pick in enumerate(picks):
            i = start + row
            name = level1.label_names[pick]
            if schema.minors and name == schema.others_sentinel:
                sentinel_rows.append(i)
            else:
                labels[i] = name
                probs[i] = trace.probs[row, pick]
    if sentinel_rows:
        if level2 is None:
            raise ValueError(
                f"{len(sentinel_rows)} abstracts routed to "
                f"{schema.others_sentinel!r} but no level-2 model was given"
            )
        rows = np.array(sentinel_rows)
        for start in range(0, len(rows), batch_size):
            chunk = rows[start : start + batch_size]
            trace = forward_batch(X[chunk], mask[chunk], level2)
            picks = trace.probs.argmax(axis=1)
            for row, pick in enumerate(picks):
                labels[chunk[row]] = level2.label_names[pick]
                probs[chunk[row]] = trace.probs[row, pick]
    return labels, probs


def merge_categories(docs: list[Document], merge_map: dict[str, str],
                     others_sentinel: str = DEFAULT_OTHERS) -> list[Document]:
    """Relabel documents through the merge map (identity when absent)."""
    for src, dst in merge_map.items():
        if dst == others_sentinel:
            raise ValueError(f"merge target {dst!r} collides with the Others sentinel")
        if src == others_sentinel:
            raise ValueError(f"cannot merge away the Others sentinel {src!r}")
    existing = {doc.label for doc in docs if doc.label is not None}
    unknown = set(merge_map) - existing
    if unknown:
        raise ValueError(f"merge map keys not present in the corpus: {sorted(unknown)}")
    out = []
    for doc in docs:
        label = merge_map.get(doc.label, doc.label) if doc.label is not None else None
        out.append(Document(id=doc.id, raw=doc.raw, tokens=doc.tokens, label=label))
    return out


def merge_counts(label_counts: dict[str, int], merge_map: dict[str, str]) -> dict[str, int]:
    merged: dict[str, int] = {}
    for label, count in label_counts.items():
        target = merge_map.get(label, label)
        merged[target] = merged.get(target, 0) + count
    return merged


def imbalance_ratio(label_counts: dict[str, int]) -> float:
    """Majority class size over minority class size."""
    if len(label_counts) < 2:
        raise ValueError("need at least 2 labels")
    counts = list(label_counts.values())
    if min(counts) < 1:
        raise ValueError("every label needs at least one document")
    return max(counts) / min(counts)
