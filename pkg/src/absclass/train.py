"""Mini-batch training with Adam, stratified sampling, and checkpoints."""

from __future__ import annotations

import hashlib
import json
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .corpus import Document
from .embed import EmbeddingTable, OovReport, featurize_documents
from .features import IdfTable
from .net import (
    ModelParams,
    backward_batch,
    forward_batch,
    init_model,
    make_dropout_masks,
    zero_grads,
)

CHECKPOINT_MAGIC = b"ABSC"
CHECKPOINT_VERSION = 1


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 128
    epochs: int = 10
    dropout_rate: float = 0.2
    per_class_cap: int = 150_000
    train_fraction: float = 0.9
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 0 or self.per_class_cap < 1:
            raise ValueError("batch_size, epochs, per_class_cap out of range")


@dataclass
class ModelSpec:
    """Architecture knobs, separate from the optimization knobs."""

    cell_kind: str = "gru"
    hidden_dim: int = 128
    num_layers: int = 2
    bidirectional: bool = True
    attention: bool = True
    d: int = 80


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_model(cls, model: ModelParams) -> "AdamState":
        return cls(m=zero_grads(model), v=zero_grads(model))


def adam_step(
    params: ModelParams, grads: dict[str, np.ndarray], state: AdamState, cfg: TrainConfig
) -> tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update, applied in place to every tensor."""
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for name, arr in params.named_tensors():
        g = grads[name]
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        arr -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return params, state


def apply_dropout(activations: np.ndarray, rate: float, mode: str, rng=None) -> np.ndarray:
    """Inverted dropout: zero units with probability ``rate`` and scale the
    survivors by 1/(1-rate) in train mode; eval mode is the identity."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mode == "eval" or rate == 0.0:
        return activations
    if mode != "train":
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    keep = rng.random(activations.shape) >= rate
    return activations * keep / (1.0 - rate)


def sample_training_set(
    corpus: list[Document], cfg: TrainConfig, rng: np.random.Generator
) -> tuple[list[Document], list[Document], dict]:
    """Cap each class at ``per_class_cap`` docs (sampled without replacement)
    and split the pool into train/test stratified per label."""
    groups: dict[str, list[Document]] = {}
    for doc in corpus:
        if doc.label is None:
            raise ValueError(f"document {doc.id!r} has no label")
        groups.setdefault(doc.label, []).append(doc)
    if not groups:
        raise ValueError("empty corpus")
    train: list[Document] = []
    test: list[Document] = []
    report: dict[str, dict[str, int]] = {}
    for label in sorted(groups):
        docs = groups[label]
        order = rng.permutation(len(docs))
        kept = [docs[i] for i in order[: min(cfg.per_class_cap, len(docs))]]
        n_test = len(kept) - int(round(len(kept) * cfg.train_fraction))
        test.extend(kept[:n_test])
        train.extend(kept[n_test:])
        report[label] = {
            "available": len(docs),
            "sampled": len(kept),
            "train": len(kept) - n_test,
            "test": n_test,
        }
    return train, test, report


@dataclass
class EpochLog:
    epoch: int
    mean_loss: float
    test_micro_f1: float
    wall_seconds: float

    def as_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "mean_loss": self.mean_loss,
            "test_micro_f1": self.test_micro_f1,
            "wall_seconds": self.wall_seconds,
        }


def write_epoch_log(logs: list[EpochLog], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for log in logs:
            fh.write(json.dumps(log.as_dict()) + "\n")


def predict_indices(
    model: ModelParams, X: np.ndarray, mask: np.ndarray, batch_size: int = 256
) -> tuple[np.ndarray, np.ndarray]:
    """Eval-mode argmax predictions and their probabilities, batched."""
    preds = np.empty(X.shape[0], dtype=np.int64)
    top_p = np.empty(X.shape[0])
    for start in range(0, X.shape[0], batch_size):
        sl = slice(start, start + batch_size)
        trace = forward_batch(X[sl], mask[sl], model)
        preds[sl] = trace.probs.argmax(axis=1)
        top_p[sl] = trace.probs[np.arange(trace.probs.shape[0]), preds[sl]]
    return preds, top_p


@dataclass
class TrainResult:
    model: ModelParams
    logs: list[EpochLog]
    oov: OovReport = field(default_factory=OovReport)


def train_model(
    train_docs: list[Document],
    test_docs: list[Document],
    label_names: list[str],
    idf: IdfTable,
    table: EmbeddingTable,
    cfg: TrainConfig,
    spec: ModelSpec,
) -> TrainResult:
    """Train a classifier over ``label_names`` with shuffled mini-batches.

    Per batch: forward with dropout, mean cross-entropy, backward, one Adam
    step. Logs mean train loss and test micro-F1 per epoch. A non-finite
    loss aborts with TrainingDiverged. Fully deterministic given cfg.seed.
    """
    if not train_docs:
        raise ValueError("empty training set")
    label_index = {name: k for k, name in enumerate(label_names)}
    for doc in train_docs + test_docs:
        if doc.label not in label_index:
            raise ValueError(f"document {doc.id!r} has label {doc.label!r} outside the class list")

    X_train, mask_train, oov = featurize_documents(train_docs, idf, table, spec.d)
    y_train = np.array([label_index[doc.label] for doc in train_docs], dtype=np.int64)
    if test_docs:
        X_test, mask_test, _ = featurize_documents(test_docs, idf, table, spec.d)
        y_test = np.array([label_index[doc.label] for doc in test_docs], dtype=np.int64)

    rng = np.random.default_rng(cfg.seed)
    model = init_model(
        cell_kind=spec.cell_kind,
        input_dim=table.dim,
        hidden_dim=spec.hidden_dim,
        num_layers=spec.num_layers,
        label_names=label_names,
        rng=rng,
        bidirectional=spec.bidirectional,
        use_attention=spec.attention,
    )
    state = AdamState.for_model(model)
    logs: list[EpochLog] = []
    n = len(train_docs)
    for epoch in range(1, cfg.epochs + 1):
        started = time.perf_counter()
        perm = rng.permutation(n)
        total_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            masks = None
            if cfg.dropout_rate > 0.0:
                masks = make_dropout_masks(model, len(idx), spec.d, cfg.dropout_rate, rng)
            try:
                trace = forward_batch(X_train[idx], mask_train[idx], model, y_train[idx], masks)
            except FloatingPointError as exc:
                raise TrainingDiverged(f"epoch {epoch}, batch start {start}: {exc}") from None
            if not np.isfinite(trace.loss):
                raise TrainingDiverged(
                    f"non-finite loss {trace.loss} at epoch {epoch}, batch start {start}"
                )
            grads = backward_batch(trace, model)
            adam_step(model, grads, state, cfg)
            total_loss += trace.loss * len(idx)
        micro_f1 = 0.0
        if test_docs:
            preds, _ = predict_indices(model, X_test, mask_test)
            micro_f1 = float((preds == y_test).mean())
        logs.append(
            EpochLog(
                epoch=epoch,
                mean_loss=total_loss / n,
                test_micro_f1=micro_f1,
                wall_seconds=time.perf_counter() - started,
            )
        )
    return TrainResult(model=model, logs=logs, oov=oov)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def save_checkpoint(
    model: ModelParams,
    path: str,
    d: int,
    embedding_dim: int,
    embedding_source: str = "",
    idf_hash: str = "",
    config: dict | None = None,
) -> None:
    """Binary checkpoint: magic, version, JSON header, named float64 tensors."""
    header = {
        "cell_kind": model.cell_kind,
        "input_dim": model.input_dim,
        "hidden_dim": model.hidden_dim,
        "num_layers": model.num_layers,
        "bidirectional": model.bidirectional,
        "use_attention": model.use_attention,
        "label_names": model.label_names,
        "d": d,
        "embedding_dim": embedding_dim,
        "embedding_source": embedding_source,
        "idf_hash": idf_hash,
        "config": config or {},
    }
    header_bytes = json.dumps(header, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for name, arr in model.named_tensors():
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<I", len(name_bytes)))
            fh.write(name_bytes)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_exact(fh, count: int) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise ValueError(f"truncated checkpoint: wanted {count} bytes, got {len(data)}")
    return data


def load_checkpoint(path: str) -> tuple[ModelParams, dict]:
    """Rebuild a model from a checkpoint; inverse of save_checkpoint.

    The round trip is bit-exact: tensors are stored as little-endian float64
    in row-major order.
    """
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"bad checkpoint magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
        (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version != CHECKPOINT_VERSION:
            raise ValueError(
                f"unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"
            )
        (header_len,) = struct.unpack("<I", _read_exact(fh, 4))
        header = json.loads(_read_exact(fh, header_len).decode("utf-8"))
        rng = np.random.default_rng(0)
        model = init_model(
            cell_kind=header["cell_kind"],
            input_dim=header["input_dim"],
            hidden_dim=header["hidden_dim"],
            num_layers=header["num_layers"],
            label_names=header["label_names"],
            rng=rng,
            bidirectional=header["bidirectional"],
            use_attention=header["use_attention"],
        )
        slots = dict(model.named_tensors())
        seen = set()
        while True:
            raw = fh.read(4)
            if not raw:
                break
            if len(raw) != 4:
                raise ValueError("truncated checkpoint: partial record header")
            (name_len,) = struct.unpack("<I", raw)
            name = _read_exact(fh, name_len).decode("utf-8")
            (ndim,) = struct.unpack("<I", _read_exact(fh, 4))
            shape = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim))
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(_read_exact(fh, 8 * count), dtype="<f8").reshape(shape)
            if name not in slots:
                raise ValueError(f"checkpoint tensor {name!r} does not fit this architecture")
            if slots[name].shape != data.shape:
                raise ValueError(
                    f"tensor {name!r} shape {data.shape} != expected {slots[name].shape}"
                )
            slots[name][...] = data
            seen.add(name)
        missing = set(slots) - seen
        if missing:
            raise ValueError(f"checkpoint missing tensors: {sorted(missing)}")
    return model, header


def validate_embedding(header: dict, table: EmbeddingTable) -> None:
    """Reject a checkpoint/table pairing whose dimensions disagree."""
    if header["embedding_dim"] != table.dim:
        raise ValueError(
            f"checkpoint was trained with embedding dim {header['embedding_dim']} "
            f"but the loaded table has dim {table.dim}"
        )
