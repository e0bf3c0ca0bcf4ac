"""Sequence mixing mechanisms.

All functions take ``[..., L, d]`` tensors.  Masks are boolean with ``True``
meaning "may attend".
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import torch
import torch.nn as nn

from .errors import ConfigError, DegenerateMaskError, ShapeError
from .numeric import DTYPE, Affine, glorot, irfft, rfft, softmax

MECHANISMS = ("full", "probsparse", "autocorr", "cross")


@dataclass(frozen=True)
class AttentionConfig:
    d_model: int
    heads: int
    mechanism: str = "full"
    window: int | None = None
    factor: float = 5.0
    top_k_factor: float = 1.0

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ConfigError(f"unknown attention mechanism {self.mechanism!r}; expected one of {MECHANISMS}")
        if self.heads < 1 or self.d_model % self.heads:
            raise ConfigError(f"{self.heads} heads do not tile model width {self.d_model}")
        if self.window is not None and self.window < 1:
            raise ConfigError(f"window must be at least 1, got {self.window}")
        if self.factor < 1:
            raise ConfigError(f"probsparse factor must be >= 1, got {self.factor}")
        if self.top_k_factor < 1:
            raise ConfigError(f"auto-correlation top-k factor must be >= 1, got {self.top_k_factor}")

    @property
    def d_k(self) -> int:
        return self.d_model // self.heads

    d_v = d_k


# ---------------------------------------------------------------------------
# dot-product attention


def attention_weights(q, k, mask=None):
    scores = q @ k.transpose(-1, -2) / math.sqrt(q.shape[-1])
    if mask is not None:
        if mask.shape[-2:] != scores.shape[-2:]:
            raise ShapeError(f"mask {tuple(mask.shape)} does not match scores {tuple(scores.shape)}")
        if not bool(mask.any(dim=-1).all()):
            raise DegenerateMaskError("a query row has every key masked out")
        scores = scores.masked_fill(~mask, float("-inf"))
    return softmax(scores, axis=-1)


def full_attention(q, k, v, mask=None):
    """``softmax(q k^T / sqrt(d_k)) v``; masked keys get exactly zero weight."""
    if q.shape[-1] != k.shape[-1] or k.shape[-2] != v.shape[-2]:
        raise ShapeError(f"attention shapes disagree: q {tuple(q.shape)}, k {tuple(k.shape)}, v {tuple(v.shape)}")
    return attention_weights(q, k, mask) @ v


def _sample_count(factor: float, n: int) -> int:
    return max(1, min(n, math.ceil(factor * math.log(n)))) if n > 1 else 1


def query_sparsity(q, k, sample_idx):
    """Max-minus-mean of scaled scores over a sampled key subset, per query.

    ``sample_idx [L_q, u]`` lists the keys scored for each query.
    """
    k_sample = k[..., sample_idx, :]  # [..., L_q, u, d]
    scores = (q.unsqueeze(-2) * k_sample).sum(-1) / math.sqrt(q.shape[-1])
    return scores.amax(dim=-1) - scores.mean(dim=-1)


def probsparse_attention(q, k, v, factor: float = 5.0, rng: torch.Generator | None = None):
    """Attention for the ``ceil(f ln L_q)`` most peaked queries; the rest get ``mean(v)``.

    Query peakedness is scored on ``ceil(f ln L_k)`` keys drawn uniformly with
    replacement for every query.  When every query is selected the result is
    plain full attention.
    """
    if factor < 1:
        raise ConfigError(f"probsparse factor must be >= 1, got {factor}")
    l_q, l_k = q.shape[-2], k.shape[-2]
    n_top = _sample_count(factor, l_q)
    if n_top >= l_q:
        return full_attention(q, k, v)
    n_sample = _sample_count(factor, l_k)
    sample_idx = torch.randint(l_k, (l_q, n_sample), generator=rng)
    sparsity = query_sparsity(q, k, sample_idx)
    top = sparsity.topk(n_top, dim=-1).indices  # [..., n_top]
    q_top = torch.gather(q, -2, top.unsqueeze(-1).expand(*top.shape, q.shape[-1]))
    out_top = full_attention(q_top, k, v)
    base = v.mean(dim=-2, keepdim=True).expand(*v.shape[:-2], l_q, v.shape[-1])
    return base.scatter(-2, top.unsqueeze(-1).expand(*top.shape, v.shape[-1]), out_top)


# ---------------------------------------------------------------------------
# auto-correlation


def autocorrelation_scores(q, k):
    """Circular correlation ``R(tau) = sum_t q[t + tau] . k[t]`` averaged over channels.

    Computed in the frequency domain; returns ``[..., L]`` indexed by lag.
    """
    if q.shape != k.shape:
        raise ShapeError(f"auto-correlation needs equal shapes, got {tuple(q.shape)} and {tuple(k.shape)}")
    length = q.shape[-2]
    spectrum = rfft(q, dim=-2) * torch.conj(rfft(k, dim=-2))
    return irfft(spectrum, length, dim=-2).mean(dim=-1)


def roll(v, tau: int):
    """Circular shift so that output row ``t`` is input row ``(t + tau) mod L``."""
    return torch.roll(v, shifts=-(int(tau) % v.shape[-2]), dims=-2)


def default_top_k(length: int, factor: float = 1.0) -> int:
    return min(length, max(1, int(math.floor(factor * math.log2(length))))) if length > 1 else 1


def time_delay_aggregate(q, k, v, top_k: int):
    """Softmax-weighted sum of ``v`` rolled by the ``top_k`` strongest lags."""
    length = v.shape[-2]
    if top_k < 1:
        raise ConfigError(f"top_k must be at least 1, got {top_k}")
    if top_k > length:
        warnings.warn(f"top_k={top_k} exceeds sequence length {length}; clamped", stacklevel=2)
        top_k = length
    r = autocorrelation_scores(q, k)  # [..., L]
    strength, lags = r.topk(top_k, dim=-1)  # [..., k]
    weights = softmax(strength, axis=-1)
    # sum_j w_j roll(v, tau_j) is a circular cross-correlation of v with the
    # sparse lag weights, so it runs through the FFT instead of k gathers
    lag_weights = torch.zeros_like(r).scatter(-1, lags, weights)
    spectrum = rfft(v, dim=-2) * torch.conj(rfft(lag_weights, dim=-1)).unsqueeze(-1)
    return irfft(spectrum, length, dim=-2)


# ---------------------------------------------------------------------------
# sliding windows


def sliding_window_mask(length: int, window: int) -> torch.Tensor:
    if window < 1:
        raise ConfigError(f"window must be at least 1, got {window}")
    i = torch.arange(length)[:, None]
    j = torch.arange(length)[None, :]
    return (j <= i) & (j > i - window)


def window_mask(q_pos: torch.Tensor, k_pos: torch.Tensor, window: int) -> torch.Tensor:
    """Causal width-``window`` mask between arbitrary absolute positions."""
    i = q_pos[:, None]
    j = k_pos[None, :]
    return (j <= i) & (j > i - window) & (j >= 0)


@functools.lru_cache(maxsize=64)
def _block_masks(window: int, n_blocks: int) -> torch.Tensor:
    local = torch.arange(window)
    mask = window_mask(local + window, torch.arange(2 * window), window)
    masks = mask.expand(n_blocks, window, 2 * window).clone()
    # the first block has no predecessor
    masks[0, :, :window] = False
    return masks


def sliding_window_attention(q, k, v, window: int):
    """Causal attention over the previous ``window`` positions in ``O(L * window)``.

    The sequence is cut into blocks of ``window`` rows; each block attends to
    itself and the block before it under the sliding mask.
    """
    if window < 1:
        raise ConfigError(f"window must be at least 1, got {window}")
    length = q.shape[-2]
    n_blocks = -(-length // window)
    pad = n_blocks * window - length

    def blocks(x):
        if pad:
            x = torch.cat([x, x.new_zeros(*x.shape[:-2], pad, x.shape[-1])], dim=-2)
        return x.reshape(*x.shape[:-2], n_blocks, window, x.shape[-1])

    qb, kb, vb = blocks(q), blocks(k), blocks(v)

    def with_previous(xb):
        prev = torch.cat([torch.zeros_like(xb[..., :1, :, :]), xb[..., :-1, :, :]], dim=-3)
        return torch.cat([prev, xb], dim=-2)

    out = full_attention(qb, with_previous(kb), with_previous(vb), _block_masks(window, n_blocks))
    return out.reshape(*q.shape[:-2], n_blocks * window, v.shape[-1])[..., :length, :]


# ---------------------------------------------------------------------------
# multi-head wrapper


class MultiHeadAttention(nn.Module):
    """Project, split into heads, mix with the configured mechanism, concatenate, project.

    ``x_q is x_kv`` gives self-attention; distinct tensors give cross-attention
    with queries from ``x_q`` and keys/values from ``x_kv``.
    """

    def __init__(self, cfg: AttentionConfig, rng: torch.Generator, eval_seed: int = 0):
        super().__init__()
        self.cfg = cfg
        d = cfg.d_model
        # a key bias shifts every score of a query equally, so softmax ignores it;
        # auto-correlation likewise ignores a query bias
        self.w_q = Affine(d, d, rng, bias=cfg.mechanism != "autocorr")
        self.w_k = Affine(d, d, rng, bias=False)
        self.w_v = Affine(d, d, rng)
        self.w_o = Affine(d, d, rng)
        self.rng = rng
        self.eval_seed = eval_seed

    def _split(self, x):
        h = self.cfg.heads
        return x.reshape(*x.shape[:-1], h, x.shape[-1] // h).transpose(-2, -3)

    def _merge(self, x):
        x = x.transpose(-2, -3)
        return x.reshape(*x.shape[:-2], x.shape[-2] * x.shape[-1])

    def forward(self, x_q, x_kv=None, mask=None):
        x_kv = x_q if x_kv is None else x_kv
        if x_q.shape[-1] != self.cfg.d_model or x_kv.shape[-1] != self.cfg.d_model:
            raise ShapeError(f"inputs {tuple(x_q.shape)}, {tuple(x_kv.shape)} do not match width {self.cfg.d_model}")
        q = self._split(self.w_q(x_q))
        k = self._split(self.w_k(x_kv))
        v = self._split(self.w_v(x_kv))
        mech = self.cfg.mechanism
        if mech == "probsparse":
            # inference draws the same key sample every call
            rng = self.rng if self.training else torch.Generator().manual_seed(self.eval_seed)
            out = probsparse_attention(q, k, v, self.cfg.factor, rng)
        elif mech == "autocorr":
            top_k = default_top_k(q.shape[-2], self.cfg.top_k_factor)
            out = time_delay_aggregate(q, k, v, top_k)
        elif mask is None and self.cfg.window is not None and x_kv is x_q:
            out = sliding_window_attention(q, k, v, self.cfg.window)
        else:
            out = full_attention(q, k, v, mask)
        return self.w_o(self._merge(out))


# ---------------------------------------------------------------------------
# recurrent state gate


def recurrent_state_update(state, h, w_z, b_z, b_g):
    """``state * g + z * (1 - g)`` with ``z = h @ w_z + b_z`` and ``g = sigmoid(b_g)``."""
    if state.shape[-1] != w_z.shape[1] or h.shape[-1] != w_z.shape[0]:
        raise ShapeError(f"gate shapes disagree: state {tuple(state.shape)}, h {tuple(h.shape)}, w_z {tuple(w_z.shape)}")
    z = h @ w_z + b_z
    g = torch.sigmoid(b_g)
    return state * g + z * (1.0 - g)


class RecurrentGate(nn.Module):
    def __init__(self, d: int, rng: torch.Generator):
        super().__init__()
        self.w_z = nn.Parameter(glorot((d, d), d, d, rng))
        self.b_z = nn.Parameter(torch.zeros(d, dtype=DTYPE))
        self.b_g = nn.Parameter(torch.zeros(d, dtype=DTYPE))

    def forward(self, state, h):
        return recurrent_state_update(state, h, self.w_z, self.b_z, self.b_g)
