"""Numpy building blocks with explicit forward/backward passes.

Every layer exposes ``forward(x) -> (y, cache)`` and
``backward(dy, cache) -> dx``. Forward passes are pure (safe for concurrent
callers over frozen weights); backward passes accumulate into the layer's
gradient buffers and therefore require exclusive access. All math is float64.
"""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np
from scipy.special import erf

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    cdf = 0.5 * (1.0 + erf(x / _SQRT2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return cdf + x * pdf


def softmax_last(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class Module:
    """Container of named float64 parameters with matching grad buffers."""

    def __init__(self, name: str):
        self.name = name
        self._params: dict[str, np.ndarray] = {}
        self._grads: dict[str, np.ndarray] = {}
        self._children: list["Module"] = []

    def add_param(self, key: str, value: np.ndarray) -> np.ndarray:
        arr = np.array(value, dtype=np.float64)
        self._params[key] = arr
        self._grads[key] = np.zeros_like(arr)
        return arr

    def add_child(self, module: "Module") -> "Module":
        self._children.append(module)
        return module

    def named_parameters(self) -> Iterator[tuple[str, np.ndarray]]:
        for key, val in self._params.items():
            yield f"{self.name}.{key}", val
        for child in self._children:
            yield from child.named_parameters()

    def named_grads(self) -> Iterator[tuple[str, np.ndarray]]:
        for key, val in self._grads.items():
            yield f"{self.name}.{key}", val
        for child in self._children:
            yield from child.named_grads()

    def zero_grad(self) -> None:
        for grad in self._grads.values():
            grad.fill(0.0)
        for child in self._children:
            child.zero_grad()

    def parameter_count(self) -> int:
        return sum(p.size for _, p in self.named_parameters())


class Linear(Module):
    def __init__(
        self,
        name: str,
        d_in: int,
        d_out: int,
        rng: np.random.Generator,
        w_scale: float,
        b_init: float = 0.0,
    ):
        super().__init__(name)
        self.W = self.add_param("W", rng.normal(0.0, w_scale, size=(d_in, d_out)))
        self.b = self.add_param("b", np.full(d_out, b_init))

    def forward(self, x: np.ndarray):
        return x @ self.W + self.b, x

    def backward(self, dy: np.ndarray, cache: np.ndarray) -> np.ndarray:
        x = cache
        d_in, d_out = self.W.shape
        x2 = x.reshape(-1, d_in)
        dy2 = dy.reshape(-1, d_out)
        self._grads["W"] += x2.T @ dy2
        self._grads["b"] += dy2.sum(axis=0)
        return dy @ self.W.T


class LayerNorm(Module):
    EPS = 1e-5

    def __init__(self, name: str, dim: int, beta_init: float = 0.0):
        super().__init__(name)
        self.gamma = self.add_param("gamma", np.ones(dim))
        self.beta = self.add_param("beta", np.full(dim, beta_init))

    def forward(self, x: np.ndarray):
        mu = x.mean(axis=-1, keepdims=True)
        xc = x - mu
        var = (xc * xc).mean(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + self.EPS)
        xhat = xc * inv
        return self.gamma * xhat + self.beta, (xhat, inv)

    def backward(self, dy: np.ndarray, cache) -> np.ndarray:
        xhat, inv = cache
        axes = tuple(range(dy.ndim - 1))
        self._grads["gamma"] += (dy * xhat).sum(axis=axes)
        self._grads["beta"] += dy.sum(axis=axes)
        dxhat = dy * self.gamma
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        return inv * (dxhat - m1 - xhat * m2)


class MultiHeadSelfAttention(Module):
    def __init__(
        self, name: str, dim: int, heads: int, rng: np.random.Generator, w_scale: float
    ):
        super().__init__(name)
        if dim % heads != 0:
            raise ValueError("dim must be divisible by heads")
        self.heads = heads
        self.head_dim = dim // heads
        self.wq = self.add_child(Linear(f"{name}.wq", dim, dim, rng, w_scale))
        self.wk = self.add_child(Linear(f"{name}.wk", dim, dim, rng, w_scale))
        self.wv = self.add_child(Linear(f"{name}.wv", dim, dim, rng, w_scale))
        self.wo = self.add_child(Linear(f"{name}.wo", dim, dim, rng, w_scale))

    def _split(self, x: np.ndarray) -> np.ndarray:
        b, n, d = x.shape
        return x.reshape(b, n, self.heads, self.head_dim).transpose(0, 2, 1, 3)

    def _merge(self, x: np.ndarray) -> np.ndarray:
        b, h, n, hd = x.shape
        return x.transpose(0, 2, 1, 3).reshape(b, n, h * hd)

    def forward(self, x: np.ndarray):
        q_flat, cq = self.wq.forward(x)
        k_flat, ck = self.wk.forward(x)
        v_flat, cv = self.wv.forward(x)
        q, k, v = self._split(q_flat), self._split(k_flat), self._split(v_flat)
        scale = 1.0 / math.sqrt(self.head_dim)
        scores = (q @ k.transpose(0, 1, 3, 2)) * scale
        attn = softmax_last(scores)
        ctx = attn @ v
        out, co = self.wo.forward(self._merge(ctx))
        return out, (cq, ck, cv, co, q, k, v, attn)

    def backward(self, dy: np.ndarray, cache) -> np.ndarray:
        cq, ck, cv, co, q, k, v, attn = cache
        scale = 1.0 / math.sqrt(self.head_dim)
        dctx = self._split(self.wo.backward(dy, co))
        dattn = dctx @ v.transpose(0, 1, 3, 2)
        dv = attn.transpose(0, 1, 3, 2) @ dctx
        dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
        dq = (dscores @ k) * scale
        dk = (dscores.transpose(0, 1, 3, 2) @ q) * scale
        dx = self.wq.backward(self._merge(dq), cq)
        dx += self.wk.backward(self._merge(dk), ck)
        dx += self.wv.backward(self._merge(dv), cv)
        return dx


class FeedForward(Module):
    def __init__(
        self, name: str, dim: int, hidden: int, rng: np.random.Generator, w_scale: float
    ):
        super().__init__(name)
        self.lin1 = self.add_child(Linear(f"{name}.lin1", dim, hidden, rng, w_scale))
        self.lin2 = self.add_child(Linear(f"{name}.lin2", hidden, dim, rng, w_scale))

    def forward(self, x: np.ndarray):
        pre, c1 = self.lin1.forward(x)
        hidden = gelu(pre)
        out, c2 = self.lin2.forward(hidden)
        return out, (c1, pre, c2)

    def backward(self, dy: np.ndarray, cache) -> np.ndarray:
        c1, pre, c2 = cache
        dhidden = self.lin2.backward(dy, c2)
        dpre = dhidden * gelu_grad(pre)
        return self.lin1.backward(dpre, c1)


class TransformerBlock(Module):
    """Pre-norm block: x + attn(ln(x)), then x + ffn(ln(x))."""

    def __init__(
        self,
        name: str,
        dim: int,
        heads: int,
        ff_dim: int,
        rng: np.random.Generator,
        w_scale: float,
    ):
        super().__init__(name)
        self.ln1 = self.add_child(LayerNorm(f"{name}.ln1", dim))
        self.attn = self.add_child(
            MultiHeadSelfAttention(f"{name}.attn", dim, heads, rng, w_scale)
        )
        self.ln2 = self.add_child(LayerNorm(f"{name}.ln2", dim))
        self.ffn = self.add_child(
            FeedForward(f"{name}.ffn", dim, ff_dim, rng, w_scale)
        )

    def forward(self, x: np.ndarray):
        normed1, c_ln1 = self.ln1.forward(x)
        attn_out, c_attn = self.attn.forward(normed1)
        mid = x + attn_out
        normed2, c_ln2 = self.ln2.forward(mid)
        ffn_out, c_ffn = self.ffn.forward(normed2)
        return mid + ffn_out, (c_ln1, c_attn, c_ln2, c_ffn)

    def backward(self, dy: np.ndarray, cache) -> np.ndarray:
        c_ln1, c_attn, c_ln2, c_ffn = cache
        dmid = dy + self.ln2.backward(self.ffn.backward(dy, c_ffn), c_ln2)
        return dmid + self.ln1.backward(self.attn.backward(dmid, c_attn), c_ln1)


class TransformerEncoder(Module):
    """Stack of pre-norm blocks over a token sequence, pooled to one vector.

    Adds learned positional embeddings, applies the blocks, a final layer
    norm, and mean (or first-token) pooling. The final norm's bias starts at
    ``embed_bias_init`` on every coordinate; see ModelConfig for why.
    """

    def __init__(
        self,
        name: str,
        dim: int,
        layers: int,
        heads: int,
        ff_dim: int,
        max_positions: int,
        pooling: str,
        rng: np.random.Generator,
        w_scale: float,
        embed_bias_init: float = 0.0,
    ):
        super().__init__(name)
        self.pooling = pooling
        self.max_positions = max_positions
        self.pos = self.add_param(
            "pos", rng.normal(0.0, 0.02, size=(max_positions, dim))
        )
        self.blocks = [
            self.add_child(
                TransformerBlock(f"{name}.block{i}", dim, heads, ff_dim, rng, w_scale)
            )
            for i in range(layers)
        ]
        self.ln_f = self.add_child(
            LayerNorm(f"{name}.ln_f", dim, beta_init=embed_bias_init)
        )

    def forward(self, x: np.ndarray):
        b, n, _ = x.shape
        if n > self.max_positions:
            raise ValueError(
                f"sequence length {n} exceeds max_positions {self.max_positions}"
            )
        h = x + self.pos[:n]
        block_caches = []
        for block in self.blocks:
            h, cache = block.forward(h)
            block_caches.append(cache)
        h, c_lnf = self.ln_f.forward(h)
        if self.pooling == "mean":
            pooled = h.mean(axis=1)
        else:
            pooled = h[:, 0]
        return pooled, (n, block_caches, c_lnf)

    def backward(self, dpooled: np.ndarray, cache) -> np.ndarray:
        n, block_caches, c_lnf = cache
        b, d = dpooled.shape
        if self.pooling == "mean":
            dh = np.repeat(dpooled[:, None, :] / n, n, axis=1)
        else:
            dh = np.zeros((b, n, d))
            dh[:, 0] = dpooled
        dh = self.ln_f.backward(dh, c_lnf)
        for block, bcache in zip(reversed(self.blocks), reversed(block_caches)):
            dh = block.backward(dh, bcache)
        self._grads["pos"][:n] += dh.sum(axis=0)
        return dh
