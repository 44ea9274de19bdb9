"""Forward primitives and their reverse-mode gradients.

All primitives take and return float32 `Tensor`s, validate input shapes, and
refuse to emit non-finite values. Explicit reductions (sums, means, softmax
normalizers, norm statistics) accumulate in float64 before casting back.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError, DimensionError, NumericError
from .tensor import Tensor, as_tensor, current_dtype, tape_enabled


def _check_finite(data: np.ndarray, kind: str) -> None:
    if not np.isfinite(data).all():
        raise NumericError(f"{kind} produced non-finite values")


def _make(data, parents, grad_fn, kind: str) -> Tensor:
    data = np.ascontiguousarray(data, dtype=current_dtype())
    _check_finite(data, kind)
    needs = any(p.requires_grad for p in parents)
    if needs and tape_enabled():
        return Tensor(data, requires_grad=True, parents=tuple(parents), grad_fn=grad_fn)
    return Tensor(data)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] > 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.astype(current_dtype())


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.data.shape} x {b.data.shape}")
    ad, bd = a.data, b.data

    def grad_fn(g):
        return [(a, g @ bd.T), (b, ad.T @ g)]

    return _make(ad @ bd, [a, b], grad_fn, "matmul")


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.data + b.data
    except ValueError as exc:
        raise DimensionError(f"add: {exc}") from exc

    def grad_fn(g):
        return [(a, _unbroadcast(g, a.data.shape)), (b, _unbroadcast(g, b.data.shape))]

    return _make(out, [a, b], grad_fn, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.data - b.data
    except ValueError as exc:
        raise DimensionError(f"sub: {exc}") from exc

    def grad_fn(g):
        return [(a, _unbroadcast(g, a.data.shape)), (b, _unbroadcast(-g, b.data.shape))]

    return _make(out, [a, b], grad_fn, "sub")


def hadamard(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.data * b.data
    except ValueError as exc:
        raise DimensionError(f"hadamard: {exc}") from exc
    ad, bd = a.data, b.data

    def grad_fn(g):
        return [(a, _unbroadcast(g * bd, ad.shape)), (b, _unbroadcast(g * ad, bd.shape))]

    return _make(out, [a, b], grad_fn, "hadamard")


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)

    def grad_fn(g):
        return [(a, (g * c).astype(current_dtype()))]

    return _make(a.data * c, [a], grad_fn, "scale")


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ContractError("concat: empty input list")
    ndim = tensors[0].data.ndim
    ax = axis % ndim
    widths = [t.data.shape[ax] for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=ax)
    except ValueError as exc:
        raise DimensionError(f"concat: {exc}") from exc
    bounds = np.cumsum([0] + widths)

    def grad_fn(g):
        pieces = []
        for i, t in enumerate(tensors):
            sl = [slice(None)] * ndim
            sl[ax] = slice(bounds[i], bounds[i + 1])
            pieces.append((t, np.ascontiguousarray(g[tuple(sl)])))
        return pieces

    return _make(out, tensors, grad_fn, "concat")


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0

    def grad_fn(g):
        return [(a, g * mask)]

    return _make(np.where(mask, a.data, 0.0), [a], grad_fn, "relu")


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)

    def grad_fn(g):
        return [(a, g * (1.0 - out * out))]

    return _make(out, [a], grad_fn, "tanh")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.data)

    def grad_fn(g):
        return [(a, g * out * (1.0 - out))]

    return _make(out, [a], grad_fn, "sigmoid")


def log_sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    out = np.minimum(x, 0.0) - np.log1p(np.exp(-np.abs(x)))

    def grad_fn(g):
        return [(a, g * _sigmoid(-x))]

    return _make(out, [a], grad_fn, "log_sigmoid")


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    x = a.data.astype(np.float64)
    x = x - x.max(axis=axis, keepdims=True)
    ex = np.exp(x)
    out = (ex / ex.sum(axis=axis, keepdims=True)).astype(current_dtype())

    def grad_fn(g):
        g64 = g.astype(np.float64)
        y = out.astype(np.float64)
        inner = (g64 * y).sum(axis=axis, keepdims=True)
        return [(a, (y * (g64 - inner)).astype(current_dtype()))]

    return _make(out, [a], grad_fn, "softmax")


def logsumexp(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    x = a.data.astype(np.float64)
    m = x.max(axis=axis, keepdims=True)
    ex = np.exp(x - m)
    out = (m + np.log(ex.sum(axis=axis, keepdims=True))).squeeze(axis)
    sm = (ex / ex.sum(axis=axis, keepdims=True)).astype(current_dtype())

    def grad_fn(g):
        return [(a, np.expand_dims(g, axis % a.data.ndim) * sm)]

    return _make(out, [a], grad_fn, "logsumexp")


def mean_pool(a, axis: int = 0) -> Tensor:
    a = as_tensor(a)
    if a.data.shape[axis] == 0:
        raise DimensionError("mean_pool: empty input along pooled axis")
    n = a.data.shape[axis]
    out = a.data.astype(np.float64).mean(axis=axis)

    def grad_fn(g):
        return [(a, np.broadcast_to(np.expand_dims(g / n, axis), a.data.shape).astype(current_dtype()))]

    return _make(out, [a], grad_fn, "mean_pool")


def masked_mean_pool(a, mask: np.ndarray) -> Tensor:
    """Mean over axis 1 of a (B, L, d) tensor, counting only mask==1 slots.

    Rows with an all-zero mask pool to the zero vector.
    """
    a = as_tensor(a)
    if a.data.ndim != 3 or mask.shape != a.data.shape[:2]:
        raise DimensionError(
            f"masked_mean_pool: data {a.data.shape} incompatible with mask {mask.shape}"
        )
    m = mask.astype(np.float64)
    counts = np.maximum(m.sum(axis=1), 1.0)
    out = (a.data.astype(np.float64) * m[:, :, None]).sum(axis=1) / counts[:, None]
    w = (m / counts[:, None]).astype(current_dtype())

    def grad_fn(g):
        return [(a, g[:, None, :] * w[:, :, None])]

    return _make(out, [a], grad_fn, "masked_mean_pool")


def embedding_gather(table, indices) -> Tensor:
    table = as_tensor(table)
    if table.data.ndim != 2:
        raise DimensionError(f"embedding_gather: table must be 2-d, got {table.data.shape}")
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise ContractError(
            f"embedding_gather: index out of range for table with {table.data.shape[0]} rows"
        )
    out = table.data[idx]

    def grad_fn(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, idx, g)
        return [(table, gt)]

    return _make(out, [table], grad_fn, "embedding_gather")


def take_rows(a, idx) -> Tensor:
    """Select one time slot per example: (B, T, d)[b, idx[b]] -> (B, d)."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    if a.data.ndim != 3 or idx.shape != (a.data.shape[0],):
        raise DimensionError(f"take_rows: data {a.data.shape} incompatible with idx {idx.shape}")
    rows = np.arange(a.data.shape[0])
    out = a.data[rows, idx]

    def grad_fn(g):
        ga = np.zeros_like(a.data)
        ga[rows, idx] = g
        return [(a, ga)]

    return _make(out, [a], grad_fn, "take_rows")


def slice_cols(a, start: int, stop: int) -> Tensor:
    a = as_tensor(a)
    if not 0 <= start < stop <= a.data.shape[-1]:
        raise DimensionError(f"slice_cols: [{start}:{stop}] out of range for {a.data.shape}")
    out = a.data[..., start:stop]

    def grad_fn(g):
        ga = np.zeros_like(a.data)
        ga[..., start:stop] = g
        return [(a, ga)]

    return _make(out, [a], grad_fn, "slice_cols")


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    out = a.data.reshape(shape)

    def grad_fn(g):
        return [(a, g.reshape(a.data.shape))]

    return _make(out, [a], grad_fn, "reshape")


def reduce_sum(a, axis: int | None = None) -> Tensor:
    a = as_tensor(a)
    out = a.data.astype(np.float64).sum(axis=axis)

    def grad_fn(g):
        if axis is None:
            return [(a, np.full(a.data.shape, g, dtype=current_dtype()))]
        return [(a, np.broadcast_to(np.expand_dims(g, axis), a.data.shape).astype(current_dtype()))]

    return _make(out, [a], grad_fn, "sum")


def reduce_mean(a, axis: int | None = None) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    if n == 0:
        raise DimensionError("mean: empty input")
    out = a.data.astype(np.float64).mean(axis=axis)

    def grad_fn(g):
        if axis is None:
            return [(a, np.full(a.data.shape, g / n, dtype=current_dtype()))]
        return [(a, np.broadcast_to(np.expand_dims(g / n, axis), a.data.shape).astype(current_dtype()))]

    return _make(out, [a], grad_fn, "mean")


def dot_product(a, b) -> Tensor:
    """Inner product: vectors give a scalar, (B, d) pairs give per-row scores."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape != b.data.shape or a.data.ndim not in (1, 2):
        raise DimensionError(f"dot_product: incompatible shapes {a.data.shape}, {b.data.shape}")
    prod = a.data.astype(np.float64) * b.data.astype(np.float64)
    out = prod.sum(axis=-1)
    ad, bd = a.data, b.data

    def grad_fn(g):
        if ad.ndim == 1:
            return [(a, g * bd), (b, g * ad)]
        return [(a, g[:, None] * bd), (b, g[:, None] * ad)]

    return _make(out, [a, b], grad_fn, "dot_product")


def gru_cell(x, h, w_x, w_h, b) -> Tensor:
    """One gated-recurrent step.

    x (B, n_in), h (B, d); weight blocks laid out [reset | update | candidate]:
    w_x (n_in, 3d), w_h (d, 3d), b (3d,). Returns the next hidden state (B, d).
    """
    x, h, w_x, w_h, b = map(as_tensor, (x, h, w_x, w_h, b))
    B, d = h.data.shape
    if x.data.ndim != 2 or x.data.shape[0] != B:
        raise DimensionError(f"gru_cell: x {x.data.shape} incompatible with h {h.data.shape}")
    if w_x.data.shape != (x.data.shape[1], 3 * d) or w_h.data.shape != (d, 3 * d) or b.data.shape != (3 * d,):
        raise DimensionError("gru_cell: weight shapes do not match (n_in, 3d)/(d, 3d)/(3d,)")
    gi = x.data @ w_x.data + b.data
    gh = h.data @ w_h.data
    r = _sigmoid(gi[:, :d] + gh[:, :d])
    z = _sigmoid(gi[:, d : 2 * d] + gh[:, d : 2 * d])
    gh_n = gh[:, 2 * d :]
    n = np.tanh(gi[:, 2 * d :] + r * gh_n)
    out = (1.0 - z) * n + z * h.data

    def grad_fn(g):
        dn = g * (1.0 - z)
        dz = g * (h.data - n)
        dn_pre = dn * (1.0 - n * n)
        dr = dn_pre * gh_n
        dr_pre = dr * r * (1.0 - r)
        dz_pre = dz * z * (1.0 - z)
        dgi = np.concatenate([dr_pre, dz_pre, dn_pre], axis=1)
        dgh = np.concatenate([dr_pre, dz_pre, dn_pre * r], axis=1)
        return [
            (x, dgi @ w_x.data.T),
            (h, dgh @ w_h.data.T + g * z),
            (w_x, x.data.T @ dgi),
            (w_h, h.data.T @ dgh),
            (b, dgi.sum(axis=0)),
        ]

    return _make(out, [x, h, w_x, w_h, b], grad_fn, "gru_cell")


def causal_self_attention(q, k, v, lengths=None) -> Tensor:
    """Single-head scaled dot-product attention with a causal mask.

    Accepts (T, d) or (B, T, d) inputs. Position i attends to positions j <= i;
    when `lengths` is given, padded key slots (j >= lengths[b]) are masked too.
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    if q.data.shape != k.data.shape or q.data.shape != v.data.shape:
        raise DimensionError("causal_self_attention: q/k/v shapes must match")
    squeeze = q.data.ndim == 2
    if q.data.ndim not in (2, 3):
        raise DimensionError(f"causal_self_attention: expected 2-d or 3-d input, got {q.data.shape}")
    qd = q.data[None] if squeeze else q.data
    kd = k.data[None] if squeeze else k.data
    vd = v.data[None] if squeeze else v.data
    B, T, d = qd.shape
    inv = 1.0 / np.sqrt(d)
    scores = np.einsum("bid,bjd->bij", qd.astype(np.float64), kd.astype(np.float64)) * inv
    mask = np.triu(np.ones((T, T), dtype=bool), k=1)[None]
    if lengths is not None:
        lengths = np.asarray(lengths, dtype=np.int64)
        key_pad = np.arange(T)[None, :] >= lengths[:, None]
        mask = mask | key_pad[:, None, :]
        # Key 0 is causally reachable from every row and never padded
        # (sequences are non-empty), so no softmax row can end up all-masked.
        mask[:, :, 0] = False
    scores = np.where(mask, -np.inf, scores)
    w = np.exp(scores - scores.max(axis=2, keepdims=True))
    w = w / w.sum(axis=2, keepdims=True)
    out = np.einsum("bij,bjd->bid", w, vd.astype(np.float64))

    def grad_fn(g):
        g3 = (g[None] if squeeze else g).astype(np.float64)
        dw = np.einsum("bid,bjd->bij", g3, vd.astype(np.float64))
        ds = w * (dw - (dw * w).sum(axis=2, keepdims=True))
        gq = np.einsum("bij,bjd->bid", ds, kd.astype(np.float64)) * inv
        gk = np.einsum("bij,bid->bjd", ds, qd.astype(np.float64)) * inv
        gv = np.einsum("bij,bid->bjd", w, g3)
        if squeeze:
            gq, gk, gv = gq[0], gk[0], gv[0]
        return [(q, gq.astype(current_dtype())), (k, gk.astype(current_dtype())), (v, gv.astype(current_dtype()))]

    return _make(out[0] if squeeze else out, [q, k, v], grad_fn, "causal_self_attention")


def layer_norm(a, gain, bias, eps: float = 1e-5) -> Tensor:
    a, gain, bias = as_tensor(a), as_tensor(gain), as_tensor(bias)
    d = a.data.shape[-1]
    if gain.data.shape != (d,) or bias.data.shape != (d,):
        raise DimensionError("layer_norm: gain/bias must match the last input axis")
    x = a.data.astype(np.float64)
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_std
    out = xhat * gain.data + bias.data

    def grad_fn(g):
        g64 = g.astype(np.float64)
        dxhat = g64 * gain.data
        dx = inv_std * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        axes = tuple(range(a.data.ndim - 1))
        return [
            (a, dx.astype(current_dtype())),
            (gain, (g64 * xhat).sum(axis=axes).astype(current_dtype())),
            (bias, g64.sum(axis=axes).astype(current_dtype())),
        ]

    return _make(out, [a, gain, bias], grad_fn, "layer_norm")


PRIMITIVES = {
    "matmul": matmul,
    "add": add,
    "sub": sub,
    "hadamard": hadamard,
    "scale": scale,
    "concat": concat,
    "relu": relu,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "log_sigmoid": log_sigmoid,
    "softmax": softmax,
    "logsumexp": logsumexp,
    "mean_pool": mean_pool,
    "masked_mean_pool": masked_mean_pool,
    "embedding_gather": embedding_gather,
    "take_rows": take_rows,
    "slice_cols": slice_cols,
    "reshape": reshape,
    "sum": reduce_sum,
    "mean": reduce_mean,
    "dot_product": dot_product,
    "gru_cell": gru_cell,
    "causal_self_attention": causal_self_attention,
    "layer_norm": layer_norm,
}


def forward_primitive(kind: str, inputs, **kwargs) -> Tensor:
    """Dispatch a registered primitive by name."""
    if kind not in PRIMITIVES:
        raise ContractError(f"unknown primitive '{kind}'")
    fn = PRIMITIVES[kind]
    if kind == "concat":
        return fn(inputs, **kwargs)
    return fn(*inputs, **kwargs)


def affine(x, w, b) -> Tensor:
    """x @ w + b, the building block of every MLP here."""
    return add(matmul(x, w), b)
