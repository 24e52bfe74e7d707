"""Parameter containers, core layers, and the Adam optimizer.

All layers are plain functions over :class:`~domusfm.autodiff.Tensor` values;
parameters live in named :class:`ParamGroup` objects so that freezing and
checkpointing operate on whole groups.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import (
    Tensor,
    add,
    as_tensor,
    gelu,
    matmul,
    parameter,
    reshape,
    softmax,
    transpose,
)


class NumericError(RuntimeError):
    """Raised when a training step encounters non-finite values."""


@dataclass
class ParamGroup:
    """Named set of parameters updated (or frozen) together."""

    name: str
    tensors: dict[str, Tensor] = field(default_factory=dict)
    frozen: bool = False

    def add(self, name: str, data) -> Tensor:
        if name in self.tensors:
            raise ValueError(f"duplicate tensor name {name!r} in group {self.name!r}")
        t = parameter(data)
        self.tensors[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def zero_grad(self):
        for t in self.tensors.values():
            t.zero_grad()

    def copy(self) -> "ParamGroup":
        g = ParamGroup(self.name, frozen=self.frozen)
        for name, t in self.tensors.items():
            g.tensors[name] = parameter(t.data.copy())
        return g

    def state_bytes(self) -> bytes:
        """Concatenated raw little-endian float32 payload (bitwise comparisons)."""
        return b"".join(t.data.astype("<f4").tobytes() for t in self.tensors.values())


# -- initialization ----------------------------------------------------------


def init_linear(group: ParamGroup, name: str, fan_in: int, fan_out: int,
                rng: np.random.Generator) -> tuple[Tensor, Tensor]:
    """Weight ~ N(0, 1/fan_in), zero bias."""
    w = group.add(f"{name}.w", rng.normal(0.0, fan_in ** -0.5, size=(fan_in, fan_out)))
    b = group.add(f"{name}.b", np.zeros(fan_out))
    return w, b


def init_embedding(group: ParamGroup, name: str, rows: int, dim: int,
                   rng: np.random.Generator, scale: float = 0.02) -> Tensor:
    return group.add(name, rng.normal(0.0, scale, size=(rows, dim)))


def init_vector(group: ParamGroup, name: str, dim: int, rng: np.random.Generator,
                scale: float = 0.02) -> Tensor:
    return group.add(name, rng.normal(0.0, scale, size=(dim,)))


def init_layer_norm(group: ParamGroup, name: str, dim: int) -> tuple[Tensor, Tensor]:
    gain = group.add(f"{name}.g", np.ones(dim))
    bias = group.add(f"{name}.b", np.zeros(dim))
    return gain, bias


def init_attention(group: ParamGroup, name: str, d: int, rng: np.random.Generator):
    for proj in ("q", "k", "v", "o"):
        init_linear(group, f"{name}.{proj}", d, d, rng)


# -- layers ------------------------------------------------------------------


def linear(x, w, b) -> Tensor:
    """x @ w + b with an explicit conformance check."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if x.shape[-1] != w.shape[0] or w.shape[1] != b.shape[-1]:
        raise ValueError(
            f"linear shape mismatch: x{list(x.shape)} @ w{list(w.shape)} + b{list(b.shape)}"
        )
    return add(matmul(x, w), b)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    d = x.shape[-1]
    mu = x.data.mean(axis=-1, keepdims=True)
    var = ((x.data - mu) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    data = xhat * gain.data + bias.data

    from .autodiff import _accumulate, _make, _unbroadcast

    def backward(g):
        dxhat = g * gain.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        _accumulate(x, (dxhat - m1 - xhat * m2) * inv)
        _accumulate(gain, _unbroadcast(g * xhat, gain.data.shape))
        _accumulate(bias, _unbroadcast(g, bias.data.shape))

    assert d == gain.shape[-1] == bias.shape[-1]
    return _make(data, (x, gain, bias), backward)


def multi_head_attention(q, k, v, heads: int, params: dict[str, Tensor],
                         prefix: str = "attn") -> Tensor:
    """Scaled dot-product attention over the second-to-last axis.

    Accepts (n, d) or batched (..., n, d) inputs; all heads share the four
    projection matrices ``{prefix}.{q,k,v,o}.{w,b}`` of shape (d, d).
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    d = q.shape[-1]
    if d % heads != 0:
        raise ValueError(f"model dim {d} not divisible by {heads} heads")
    dh = d // heads
    squeeze = q.ndim == 2
    if squeeze:
        n = q.shape[0]
        q, k, v = (reshape(t, (1, t.shape[0], d)) for t in (q, k, v))

    def project(x, name):
        return linear(x, params[f"{prefix}.{name}.w"], params[f"{prefix}.{name}.b"])

    def split_heads(x):
        b, n, _ = x.shape
        return transpose(reshape(x, (b, n, heads, dh)), (0, 2, 1, 3))

    qh = split_heads(project(q, "q"))
    kh = split_heads(project(k, "k"))
    vh = split_heads(project(v, "v"))
    scores = matmul(qh, transpose(kh, (0, 1, 3, 2))) * (dh ** -0.5)
    weights = softmax(scores, axis=-1)
    ctx = matmul(weights, vh)  # (b, heads, n, dh)
    b, _, n, _ = ctx.shape
    merged = reshape(transpose(ctx, (0, 2, 1, 3)), (b, n, d))
    out = project(merged, "o")
    if squeeze:
        out = reshape(out, (out.shape[1], d))
    return out


def attention_weights(q, k, heads: int, params: dict[str, Tensor],
                      prefix: str = "attn") -> np.ndarray:
    """Forward-only attention weight matrix, for inspection and tests."""
    q, k = as_tensor(q), as_tensor(k)
    d = q.shape[-1]
    dh = d // heads
    qp = linear(q, params[f"{prefix}.q.w"], params[f"{prefix}.q.b"]).data
    kp = linear(k, params[f"{prefix}.k.w"], params[f"{prefix}.k.b"]).data
    n = qp.shape[0]
    qh = qp.reshape(n, heads, dh).transpose(1, 0, 2)
    kh = kp.reshape(n, heads, dh).transpose(1, 0, 2)
    scores = np.matmul(qh, kh.transpose(0, 2, 1)) * (dh ** -0.5)
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def feed_forward(x, params: dict[str, Tensor], prefix: str) -> Tensor:
    """Two-layer MLP with GELU, hidden size taken from the stored weights."""
    h = gelu(linear(x, params[f"{prefix}.1.w"], params[f"{prefix}.1.b"]))
    return linear(h, params[f"{prefix}.2.w"], params[f"{prefix}.2.b"])


# -- optimizer ---------------------------------------------------------------


@dataclass
class AdamState:
    """Adam moments plus hyperparameters; shapes mirror the parameters."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def init_adam(tensors: dict[str, Tensor], lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    for name, t in tensors.items():
        state.m[name] = np.zeros_like(t.data)
        state.v[name] = np.zeros_like(t.data)
    return state


def adam_step(tensors: dict[str, Tensor], grads: dict[str, np.ndarray],
              state: AdamState) -> tuple[dict[str, Tensor], AdamState]:
    """One bias-corrected Adam update, in place. Rejects non-finite gradients."""
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for parameter {name!r}")
        if g.shape != tensors[name].data.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape "
                             f"{tensors[name].data.shape} for {name!r}")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for name, g in grads.items():
        t = tensors[name]
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        mhat = m / bc1
        vhat = v / bc2
        t.data = t.data - (state.lr * mhat / (np.sqrt(vhat) + state.eps)).astype(t.data.dtype)
    return tensors, state


def group_grads(group: ParamGroup) -> dict[str, np.ndarray]:
    """Collect accumulated gradients, treating untouched parameters as zero."""
    out = {}
    for name, t in group.tensors.items():
        out[name] = t.grad if t.grad is not None else np.zeros_like(t.data)
    return out


def apply_gradients(groups: list[ParamGroup], states: dict[str, AdamState]):
    """Adam-update every non-frozen group from its accumulated gradients."""
    for group in groups:
        if group.frozen:
            group.zero_grad()
            continue
        adam_step(group.tensors, group_grads(group), states[group.name])
        group.zero_grad()
