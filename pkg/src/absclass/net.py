"""Recurrent classifier core: LSTM/GRU cells, stacked bidirectional scans,
attention pooling, softmax output, and exact hand-derived backpropagation.

Everything is plain numpy in float64. Arrays are batch-first: inputs are
(B, d, input_dim), per-timestep representations are (B, d, width). The
single-abstract entry points wrap B=1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embed import FeatureSequence

LSTM_GATES = ("i", "f", "z", "o")
GRU_GATES = ("z", "r", "h")


def sigmoid(x):
    # exp overflow saturates to the IEEE-correct 0.0, no need to warn
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def softmax(x, axis=-1):
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


@dataclass
class CellParams:
    """Weights for one recurrent cell: per gate, W (hidden x input) applied
    to the timestep input, U (hidden x hidden) applied to the previous hidden
    state, and a bias."""

    cell_kind: str
    input_dim: int
    hidden_dim: int
    W: dict[str, np.ndarray]
    U: dict[str, np.ndarray]
    b: dict[str, np.ndarray]

    @property
    def gates(self) -> tuple[str, ...]:
        return LSTM_GATES if self.cell_kind == "lstm" else GRU_GATES


@dataclass
class AttentionParams:
    W: np.ndarray
    b: np.ndarray
    context: np.ndarray


@dataclass
class ModelParams:
    cell_kind: str
    input_dim: int
    hidden_dim: int
    num_layers: int
    bidirectional: bool
    use_attention: bool
    layers: list[tuple[CellParams, CellParams | None]]
    attention: AttentionParams | None
    W_out: np.ndarray
    b_out: np.ndarray
    label_names: list[str]

    @property
    def width(self) -> int:
        """Per-timestep representation width after a recurrent layer."""
        return self.hidden_dim * (2 if self.bidirectional else 1)

    @property
    def num_classes(self) -> int:
        return len(self.label_names)

    def named_tensors(self):
        """Yield (name, array) for every learnable tensor, in a fixed order."""
        for k, (fwd, bwd) in enumerate(self.layers):
            for tag, cell in (("fwd", fwd), ("bwd", bwd)):
                if cell is None:
                    continue
                for g in cell.gates:
                    yield f"layer{k}.{tag}.W_{g}", cell.W[g]
                    yield f"layer{k}.{tag}.U_{g}", cell.U[g]
                    yield f"layer{k}.{tag}.b_{g}", cell.b[g]
        if self.attention is not None:
            yield "attention.W", self.attention.W
            yield "attention.b", self.attention.b
            yield "attention.context", self.attention.context
        yield "output.W", self.W_out
        yield "output.b", self.b_out

    def tensor(self, name: str) -> np.ndarray:
        for n, arr in self.named_tensors():
            if n == name:
                return arr
        raise KeyError(name)


def count_parameters(m: ModelParams) -> int:
    return sum(arr.size for _, arr in m.named_tensors())


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _init_cell(cell_kind: str, input_dim: int, hidden_dim: int, rng) -> CellParams:
    gates = LSTM_GATES if cell_kind == "lstm" else GRU_GATES
    W, U, b = {}, {}, {}
    for g in gates:
        W[g] = _glorot(rng, input_dim, hidden_dim, (hidden_dim, input_dim))
        U[g] = _glorot(rng, hidden_dim, hidden_dim, (hidden_dim, hidden_dim))
        b[g] = np.zeros(hidden_dim)
    return CellParams(cell_kind, input_dim, hidden_dim, W, U, b)


def init_model(
    cell_kind: str,
    input_dim: int,
    hidden_dim: int,
    num_layers: int,
    label_names: list[str],
    rng: np.random.Generator,
    bidirectional: bool = True,
    use_attention: bool = True,
) -> ModelParams:
    """Build a fresh model with Glorot-uniform weights and zero biases."""
    if cell_kind not in ("lstm", "gru"):
        raise ValueError(f"unknown cell kind {cell_kind!r}")
    if num_layers < 1 or hidden_dim < 1 or input_dim < 1:
        raise ValueError("layer count and dimensions must be positive")
    if len(label_names) < 2:
        raise ValueError("need at least 2 classes")
    width = hidden_dim * (2 if bidirectional else 1)
    layers = []
    for k in range(num_layers):
        in_k = input_dim if k == 0 else width
        fwd = _init_cell(cell_kind, in_k, hidden_dim, rng)
        bwd = _init_cell(cell_kind, in_k, hidden_dim, rng) if bidirectional else None
        layers.append((fwd, bwd))
    attention = None
    if use_attention:
        attention = AttentionParams(
            W=_glorot(rng, width, width, (width, width)),
            b=np.zeros(width),
            context=_glorot(rng, width, 1, (width,)),
        )
    W_out = _glorot(rng, width, len(label_names), (len(label_names), width))
    b_out = np.zeros(len(label_names))
    return ModelParams(
        cell_kind=cell_kind,
        input_dim=input_dim,
        hidden_dim=hidden_dim,
        num_layers=num_layers,
        bidirectional=bidirectional,
        use_attention=use_attention,
        layers=layers,
        attention=attention,
        W_out=W_out,
        b_out=b_out,
        label_names=list(label_names),
    )


# ---------------------------------------------------------------------------
# cells
# ---------------------------------------------------------------------------

def _check_cell_shapes(x, p: CellParams):
    if x.shape[-1] != p.input_dim:
        raise ValueError(f"input width {x.shape[-1]} != cell input_dim {p.input_dim}")


def lstm_cell_forward(x_t, h_prev, c_prev, p: CellParams):
    """One LSTM step. Accepts (input_dim,) vectors or (B, input_dim) batches.

    i = sigma(W_i x + U_i h + b_i)      input gate
    f = sigma(W_f x + U_f h + b_f)      forget gate
    z = tanh (W_z x + U_z h + b_z)      candidate
    c = z*i + c_prev*f
    o = sigma(W_o x + U_o h + b_o)      output gate
    h = tanh(c)*o
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    _check_cell_shapes(x_t, p)
    h, c, _ = _lstm_step(x_t, h_prev, c_prev, p)
    return h, c


def _lstm_step(x_t, h_prev, c_prev, p: CellParams):
    i = sigmoid(x_t @ p.W["i"].T + h_prev @ p.U["i"].T + p.b["i"])
    f = sigmoid(x_t @ p.W["f"].T + h_prev @ p.U["f"].T + p.b["f"])
    z = np.tanh(x_t @ p.W["z"].T + h_prev @ p.U["z"].T + p.b["z"])
    c = z * i + c_prev * f
    o = sigmoid(x_t @ p.W["o"].T + h_prev @ p.U["o"].T + p.b["o"])
    tc = np.tanh(c)
    h = tc * o
    return h, c, (i, f, z, o, tc)


def gru_cell_forward(x_t, h_prev, p: CellParams):
    """One GRU step. Accepts (input_dim,) vectors or (B, input_dim) batches.

    z = sigma(W_z x + U_z h + b_z)          update gate
    r = sigma(W_r x + U_r h + b_r)          reset gate
    hc = tanh(W_h x + U_h(r*h) + b_h)       candidate
    h = (1-z)*h_prev + z*hc
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    _check_cell_shapes(x_t, p)
    h, _ = _gru_step(x_t, h_prev, p)
    return h


def _gru_step(x_t, h_prev, p: CellParams):
    z = sigmoid(x_t @ p.W["z"].T + h_prev @ p.U["z"].T + p.b["z"])
    r = sigmoid(x_t @ p.W["r"].T + h_prev @ p.U["r"].T + p.b["r"])
    rh = r * h_prev
    hc = np.tanh(x_t @ p.W["h"].T + rh @ p.U["h"].T + p.b["h"])
    h = (1.0 - z) * h_prev + z * hc
    return h, (z, r, hc, rh)


def _scan(X: np.ndarray, p: CellParams) -> tuple[np.ndarray, dict]:
    """Run a cell over X (B, d, in) from zero initial state, keeping every
    intermediate needed by the backward pass."""
    B, d, _ = X.shape
    h_dim = p.hidden_dim
    H = np.zeros((B, d, h_dim))
    h_all = np.zeros((B, d + 1, h_dim))
    if p.cell_kind == "lstm":
        cache = {g: np.zeros((B, d, h_dim)) for g in ("i", "f", "z", "o", "tc")}
        cache["c_all"] = np.zeros((B, d + 1, h_dim))
        for t in range(d):
            h, c, (i, f, z, o, tc) = _lstm_step(
                X[:, t], h_all[:, t], cache["c_all"][:, t], p
            )
            H[:, t] = h
            h_all[:, t + 1] = h
            cache["c_all"][:, t + 1] = c
            for name, val in (("i", i), ("f", f), ("z", z), ("o", o), ("tc", tc)):
                cache[name][:, t] = val
    else:
        cache = {g: np.zeros((B, d, h_dim)) for g in ("z", "r", "hc", "rh")}
        for t in range(d):
            h, (z, r, hc, rh) = _gru_step(X[:, t], h_all[:, t], p)
            H[:, t] = h
            h_all[:, t + 1] = h
            for name, val in (("z", z), ("r", r), ("hc", hc), ("rh", rh)):
                cache[name][:, t] = val
    cache["h_all"] = h_all
    cache["X"] = X
    return H, cache


def _scan_backward(dH: np.ndarray, cache: dict, p: CellParams, grads: dict, prefix: str):
    """Backpropagate through one direction's scan.

    dH is the upstream gradient on every timestep's hidden state. Gate
    gradients are accumulated into ``grads`` under ``prefix``; returns the
    gradient with respect to the scan input X.
    """
    X = cache["X"]
    B, d, _ = X.shape
    h_all = cache["h_all"]
    dX = np.zeros_like(X)
    gW = {g: grads[f"{prefix}.W_{g}"] for g in p.gates}
    gU = {g: grads[f"{prefix}.U_{g}"] for g in p.gates}
    gb = {g: grads[f"{prefix}.b_{g}"] for g in p.gates}
    dh_carry = np.zeros((B, p.hidden_dim))
    if p.cell_kind == "lstm":
        dc_carry = np.zeros((B, p.hidden_dim))
        for t in range(d - 1, -1, -1):
            i, f, z, o, tc = (cache[k][:, t] for k in ("i", "f", "z", "o", "tc"))
            h_prev = h_all[:, t]
            c_prev = cache["c_all"][:, t]
            dh = dH[:, t] + dh_carry
            da_o = dh * tc * o * (1.0 - o)
            dc = dh * o * (1.0 - tc * tc) + dc_carry
            da_z = dc * i * (1.0 - z * z)
            da_i = dc * z * i * (1.0 - i)
            da_f = dc * c_prev * f * (1.0 - f)
            dc_carry = dc * f
            dh_carry = np.zeros_like(dh_carry)
            dx = np.zeros((B, p.input_dim))
            for g, da in (("i", da_i), ("f", da_f), ("z", da_z), ("o", da_o)):
                gW[g] += da.T @ X[:, t]
                gU[g] += da.T @ h_prev
                gb[g] += da.sum(axis=0)
                dx += da @ p.W[g]
                dh_carry += da @ p.U[g]
            dX[:, t] = dx
    else:
        for t in range(d - 1, -1, -1):
            z, r, hc, rh = (cache[k][:, t] for k in ("z", "r", "hc", "rh"))
            h_prev = h_all[:, t]
            dh = dH[:, t] + dh_carry
            da_z = dh * (hc - h_prev) * z * (1.0 - z)
            da_h = dh * z * (1.0 - hc * hc)
            drh = da_h @ p.U["h"]
            da_r = drh * h_prev * r * (1.0 - r)
            gW["z"] += da_z.T @ X[:, t]
            gW["r"] += da_r.T @ X[:, t]
            gW["h"] += da_h.T @ X[:, t]
            gU["z"] += da_z.T @ h_prev
            gU["r"] += da_r.T @ h_prev
            gU["h"] += da_h.T @ rh
            gb["z"] += da_z.sum(axis=0)
            gb["r"] += da_r.sum(axis=0)
            gb["h"] += da_h.sum(axis=0)
            dX[:, t] = da_z @ p.W["z"] + da_r @ p.W["r"] + da_h @ p.W["h"]
            dh_carry = dh * (1.0 - z) + drh * r + da_z @ p.U["z"] + da_r @ p.U["r"]
    return dX


def _layer_forward(X: np.ndarray, fwd: CellParams, bwd: CellParams | None):
    H_f, cache_f = _scan(X, fwd)
    if bwd is None:
        return H_f, (cache_f, None)
    H_b_rev, cache_b = _scan(X[:, ::-1], bwd)
    H = np.concatenate([H_f, H_b_rev[:, ::-1]], axis=2)
    return H, (cache_f, cache_b)


def _layer_backward(dH, caches, fwd: CellParams, bwd: CellParams | None, grads, k: int):
    cache_f, cache_b = caches
    if bwd is None:
        return _scan_backward(dH, cache_f, fwd, grads, f"layer{k}.fwd")
    h_dim = fwd.hidden_dim
    dX = _scan_backward(dH[:, :, :h_dim], cache_f, fwd, grads, f"layer{k}.fwd")
    dX_b = _scan_backward(
        np.ascontiguousarray(dH[:, ::-1, h_dim:]), cache_b, bwd, grads, f"layer{k}.bwd"
    )
    return dX + dX_b[:, ::-1]


def run_bidirectional_stack(seq: FeatureSequence, m: ModelParams) -> np.ndarray:
    """Per-timestep representations for one abstract: (d, width).

    Forward cells scan t=1..d, backward cells t=d..1, both from zero state;
    each timestep's halves are concatenated, and stacked layers consume the
    previous layer's output. Pad-position rows are zeroed after every layer
    so PAD stays a zero input at each level of the stack; that is what keeps
    logits independent of the trailing pad count.
    """
    if seq.matrix.shape[1] != m.input_dim:
        raise ValueError(
            f"feature width {seq.matrix.shape[1]} != model input_dim {m.input_dim}"
        )
    X = seq.matrix[None, :, :].astype(np.float64)
    pad_zero = seq.mask[None, :, None].astype(np.float64)
    for fwd, bwd in m.layers:
        X, _ = _layer_forward(X, fwd, bwd)
        X = X * pad_zero
    return X[0]


# ---------------------------------------------------------------------------
# attention and output
# ---------------------------------------------------------------------------

def masked_softmax(scores: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax over mask-true positions of the last axis; masked positions
    get exactly 0. Max-subtracted for stability."""
    if not mask.any(axis=-1).all():
        raise ValueError("softmax over an all-masked axis: no attendable token")
    neg = np.where(mask, scores, -np.inf)
    shifted = neg - neg.max(axis=-1, keepdims=True)
    e = np.where(mask, np.exp(shifted), 0.0)
    return e / e.sum(axis=-1, keepdims=True)


def _attention_batch(H, mask, a: AttentionParams):
    u = np.tanh(H @ a.W.T + a.b)
    scores = u @ a.context
    alpha = masked_softmax(scores, mask)
    v = np.einsum("bd,bdk->bk", alpha, H)
    return u, scores, alpha, v


def attention_forward(H: np.ndarray, mask: np.ndarray, a: AttentionParams):
    """Masked attention over one sequence: H (d, k), mask (d,) -> (alpha, v).

    score_t = tanh(W h_t + b) . context; alpha is the softmax of the scores
    over mask-true positions (masked positions get exactly 0); v is the
    alpha-weighted sum of the h_t.
    """
    if H.shape[-1] != a.context.shape[0]:
        raise ValueError(f"H width {H.shape[-1]} != attention width {a.context.shape[0]}")
    _, _, alpha, v = _attention_batch(H[None], np.asarray(mask, bool)[None], a)
    return alpha[0], v[0]


def _mean_pool_alpha(mask):
    counts = mask.sum(axis=1, keepdims=True)
    if (counts == 0).any():
        raise ValueError("cannot pool an all-masked sequence")
    return np.where(mask, 1.0, 0.0) / counts


def output_layer(v: np.ndarray, m: ModelParams, true_class: int | None = None):
    """Linear map to class logits, softmax probabilities, and optional
    cross-entropy loss against ``true_class``."""
    logits = v @ m.W_out.T + m.b_out
    probs = softmax(logits)
    loss = None
    if true_class is not None:
        if not 0 <= true_class < m.num_classes:
            raise ValueError(f"true_class {true_class} out of range [0, {m.num_classes})")
        loss = -np.log(probs[..., true_class])
    return logits, probs, loss


# ---------------------------------------------------------------------------
# full forward / backward
# ---------------------------------------------------------------------------

@dataclass
class ForwardTrace:
    """Everything the backward pass needs, plus the outputs callers read."""

    X: np.ndarray
    mask: np.ndarray
    layer_caches: list = field(repr=False, default_factory=list)
    layer_outputs: list = field(repr=False, default_factory=list)
    dropout_masks: list = field(repr=False, default_factory=list)
    H: np.ndarray | None = None
    attn_u: np.ndarray | None = None
    attn_scores: np.ndarray | None = None
    alpha: np.ndarray | None = None
    v: np.ndarray | None = None
    logits: np.ndarray | None = None
    probs: np.ndarray | None = None
    true_classes: np.ndarray | None = None
    losses: np.ndarray | None = None
    loss: float | None = None

    @property
    def attention_weights(self) -> np.ndarray:
        return self.alpha[0]

    @property
    def abstract_vector(self) -> np.ndarray:
        return self.v[0]

    @property
    def logit_vector(self) -> np.ndarray:
        return self.logits[0]

    @property
    def probabilities(self) -> np.ndarray:
        return self.probs[0]


def make_dropout_masks(
    m: ModelParams, batch: int, d: int, rate: float, rng: np.random.Generator
) -> list[np.ndarray]:
    """Inverted-dropout masks, one per layer output (survivors pre-scaled)."""
    masks = []
    for _ in range(m.num_layers):
        keep = rng.random((batch, d, m.width)) >= rate
        masks.append(keep / (1.0 - rate))
    return masks


def forward_batch(
    X: np.ndarray,
    mask: np.ndarray,
    m: ModelParams,
    true_classes: np.ndarray | None = None,
    dropout_masks: list[np.ndarray] | None = None,
) -> ForwardTrace:
    """Forward pass over a batch: X (B, d, input_dim), mask (B, d).

    ``dropout_masks`` (from make_dropout_masks) are multiplied onto each
    layer's output; pass None for evaluation. Recurrent scans consume PAD
    timesteps (zero input); pad rows of each layer's output are re-zeroed so
    they stay zero input to the next layer, and the pooling step masks them.
    """
    X = np.asarray(X, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if X.ndim != 3 or mask.shape != X.shape[:2]:
        raise ValueError(f"bad shapes: X {X.shape}, mask {mask.shape}")
    if X.shape[2] != m.input_dim:
        raise ValueError(f"feature width {X.shape[2]} != model input_dim {m.input_dim}")
    trace = ForwardTrace(X=X, mask=mask)
    out = X
    pad_zero = mask[:, :, None].astype(np.float64)
    for k, (fwd, bwd) in enumerate(m.layers):
        out, caches = _layer_forward(out, fwd, bwd)
        trace.layer_caches.append(caches)
        trace.layer_outputs.append(out)
        out = out * pad_zero
        drop = None if dropout_masks is None else dropout_masks[k]
        trace.dropout_masks.append(drop)
        if drop is not None:
            out = out * drop
    trace.H = out
    if not np.isfinite(out).all():
        raise FloatingPointError("non-finite hidden states in forward pass")
    if m.use_attention:
        trace.attn_u, trace.attn_scores, trace.alpha, trace.v = _attention_batch(
            out, mask, m.attention
        )
    else:
        trace.alpha = _mean_pool_alpha(mask)
        trace.v = np.einsum("bd,bdk->bk", trace.alpha, out)
    trace.logits = trace.v @ m.W_out.T + m.b_out
    if not np.isfinite(trace.logits).all():
        raise FloatingPointError("non-finite logits in forward pass")
    trace.probs = softmax(trace.logits, axis=1)
    if true_classes is not None:
        true_classes = np.asarray(true_classes, dtype=np.int64)
        if true_classes.min() < 0 or true_classes.max() >= m.num_classes:
            raise ValueError("true class index out of range")
        trace.true_classes = true_classes
        batch_idx = np.arange(X.shape[0])
        with np.errstate(divide="ignore"):
            # a fully saturated wrong prediction yields loss inf, which the
            # training loop reports as divergence
            trace.losses = -np.log(trace.probs[batch_idx, true_classes])
        trace.loss = float(trace.losses.mean())
    return trace


def model_forward(
    seq: FeatureSequence,
    m: ModelParams,
    true_class: int | None = None,
    dropout_masks: list[np.ndarray] | None = None,
) -> ForwardTrace:
    """Forward pass for a single abstract (wraps a batch of one)."""
    tc = None if true_class is None else np.array([true_class])
    return forward_batch(seq.matrix[None], seq.mask[None], m, tc, dropout_masks)


def zero_grads(m: ModelParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in m.named_tensors()}


def backward_batch(trace: ForwardTrace, m: ModelParams) -> dict[str, np.ndarray]:
    """Exact gradients of the mean cross-entropy loss for every tensor.

    Mirrors the forward composition in reverse: softmax/CE, output layer,
    attention (or mean pooling), dropout masks, then backpropagation through
    time across both scan directions of every layer.
    """
    if trace.loss is None:
        raise ValueError("trace has no loss; forward must be run with true classes")
    B = trace.X.shape[0]
    grads = zero_grads(m)

    dlogits = trace.probs.copy()
    dlogits[np.arange(B), trace.true_classes] -= 1.0
    dlogits /= B
    grads["output.W"] += dlogits.T @ trace.v
    grads["output.b"] += dlogits.sum(axis=0)
    dv = dlogits @ m.W_out

    H = trace.H
    if m.use_attention:
        a = m.attention
        alpha, u = trace.alpha, trace.attn_u
        dalpha = np.einsum("bk,bdk->bd", dv, H)
        dH = alpha[:, :, None] * dv[:, None, :]
        ds = alpha * (dalpha - (alpha * dalpha).sum(axis=1, keepdims=True))
        grads["attention.context"] += np.einsum("bd,bdk->k", ds, u)
        da = ds[:, :, None] * a.context * (1.0 - u * u)
        grads["attention.W"] += np.einsum("bdk,bdj->kj", da, H)
        grads["attention.b"] += da.sum(axis=(0, 1))
        dH += da @ a.W
    else:
        dH = trace.alpha[:, :, None] * dv[:, None, :]

    d_out = dH
    pad_zero = trace.mask[:, :, None].astype(np.float64)
    for k in range(m.num_layers - 1, -1, -1):
        drop = trace.dropout_masks[k]
        if drop is not None:
            d_out = d_out * drop
        d_out = d_out * pad_zero
        fwd, bwd = m.layers[k]
        d_out = _layer_backward(d_out, trace.layer_caches[k], fwd, bwd, grads, k)
    return grads


def model_backward(trace: ForwardTrace, m: ModelParams) -> dict[str, np.ndarray]:
    return backward_batch(trace, m)


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------

@dataclass
class GradCheckReport:
    tolerance: float
    per_tensor: dict[str, float]
    worst_tensor: str
    worst_error: float

    @property
    def passed(self) -> bool:
        return bool(self.worst_error < self.tolerance)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tolerance": self.tolerance,
            "worst_tensor": self.worst_tensor,
            "worst_error": self.worst_error,
            "per_tensor": self.per_tensor,
        }


def well_conditioned_case(
    cell_kind: str,
    bidirectional: bool,
    attention: bool,
    rng: np.random.Generator,
    min_grad: float = 2e-6,
):
    """Draw a random small model and input suitable for finite differencing.

    Central differences at step 1e-5 in float64 carry roughly 1e-11 of
    absolute noise, so gradient entries below ~1e-7 cannot be resolved to
    1e-4 relative accuracy no matter how correct they are. Candidates are
    redrawn until the smallest analytic gradient entry clears ``min_grad``;
    the screen conditions on resolvability, never on agreement, so a wrong
    derivation still fails at the points that survive it.

    Returns (model, sequence, true_class, analytic_grads).
    """
    while True:
        model = init_model(
            cell_kind, 2, 3, 2, ["a", "b", "c"], rng,
            bidirectional=bidirectional, use_attention=attention,
        )
        for _, arr in model.named_tensors():
            arr[...] = rng.uniform(-0.9, 0.9, size=arr.shape)
        matrix = rng.normal(size=(4, 2), scale=1.5)
        matrix[3] = 0.0
        seq = FeatureSequence(matrix=matrix, mask=np.array([True, True, True, False]))
        true_class = int(rng.integers(3))
        grads = model_backward(model_forward(seq, model, true_class), model)
        if min(np.abs(g).min() for g in grads.values()) >= min_grad:
            return model, seq, true_class, grads


def gradient_check(
    m: ModelParams,
    seq: FeatureSequence,
    true_class: int,
    tol: float = 1e-4,
    step: float = 1e-5,
    dropout_masks: list[np.ndarray] | None = None,
    grads: dict[str, np.ndarray] | None = None,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    Each scalar parameter is nudged by +/-step and the loss re-evaluated;
    the per-tensor maximum of |analytic - numeric| / max(|analytic|,
    |numeric|, 1e-8) must stay below ``tol``. Meant for small models.
    """
    if grads is None:
        trace = model_forward(seq, m, true_class, dropout_masks)
        grads = model_backward(trace, m)

    def loss_at() -> float:
        t = model_forward(seq, m, true_class, dropout_masks)
        return t.loss

    per_tensor: dict[str, float] = {}
    for name, arr in m.named_tensors():
        analytic = grads[name]
        worst = 0.0
        for idx in range(arr.size):
            orig = arr.flat[idx]
            arr.flat[idx] = orig + step
            up = loss_at()
            arr.flat[idx] = orig - step
            down = loss_at()
            arr.flat[idx] = orig
            numeric = (up - down) / (2.0 * step)
            ga = analytic.flat[idx]
            err = abs(ga - numeric) / max(abs(ga), abs(numeric), 1e-8)
            worst = max(worst, float(err))
        per_tensor[name] = worst
    worst_name = max(per_tensor, key=per_tensor.get)
    return GradCheckReport(
        tolerance=tol,
        per_tensor=per_tensor,
        worst_tensor=worst_name,
        worst_error=per_tensor[worst_name],
    )
