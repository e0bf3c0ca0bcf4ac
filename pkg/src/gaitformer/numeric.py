"""Double-precision tensor substrate.

Every op here works on ``torch.Tensor`` in float64 and is differentiable through
torch's reverse mode.  Leading batch dimensions are allowed everywhere: an op
documented as ``[n x d]`` accepts ``[..., n, d]``.

Randomness never touches torch's global generator.  Callers thread one
``torch.Generator`` through initialization, dropout and sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import torch
import torch.nn as nn

from .errors import ConfigError, ContractError, ShapeError

DTYPE = torch.float64


def make_generator(seed: int) -> torch.Generator:
    return torch.Generator().manual_seed(int(seed) & 0xFFFF_FFFF_FFFF_FFFF)


def as_tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x.to(DTYPE)
    return torch.as_tensor(np.asarray(x, dtype=np.float64))


def glorot(shape: Sequence[int], fan_in: int, fan_out: int, rng: torch.Generator) -> torch.Tensor:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    u = torch.rand(tuple(shape), generator=rng, dtype=DTYPE)
    return (2.0 * u - 1.0) * bound


# ---------------------------------------------------------------------------
# functional ops


def affine(x: torch.Tensor, w: torch.Tensor, b: torch.Tensor | None = None) -> torch.Tensor:
    """Row-wise ``x @ w + b`` with ``w`` laid out ``[d_in, d_out]``."""
    if x.shape[-1] != w.shape[0] or w.dim() != 2:
        raise ShapeError(f"affine: input {tuple(x.shape)} does not match weight {tuple(w.shape)}")
    if b is not None and b.shape != (w.shape[1],):
        raise ShapeError(f"affine: bias {tuple(b.shape)} does not match weight {tuple(w.shape)}")
    y = x @ w
    return y if b is None else y + b


def conv1d(
    x: torch.Tensor,
    kernels: torch.Tensor,
    bias: torch.Tensor | None = None,
    padding: str = "same",
) -> torch.Tensor:
    """Cross-correlation of ``x [..., c_in, L]`` with ``kernels [c_out, c_in, k]``.

    ``same`` zero-pads (k-1)/2 on each side and needs an odd k; ``valid``
    returns ``L - k + 1`` positions.
    """
    c_out, c_in, k = kernels.shape
    if x.shape[-2] != c_in:
        raise ShapeError(f"conv1d: input {tuple(x.shape)} does not match kernels {tuple(kernels.shape)}")
    length = x.shape[-1]
    if padding == "same":
        if k % 2 == 0:
            raise ConfigError(f"conv1d: same padding needs an odd kernel, got k={k}")
        pad = k // 2
    elif padding == "valid":
        if k > length:
            raise ConfigError(f"conv1d: kernel size {k} exceeds sequence length {length}")
        pad = 0
    else:
        raise ConfigError(f"conv1d: unknown padding {padding!r}")
    lead = x.shape[:-2]
    flat = x.reshape(-1, c_in, length)
    if k >= FFT_CONV_MIN_KERNEL:
        y = _fft_correlate(flat, kernels, pad)
        if bias is not None:
            y = y + bias[:, None]
    else:
        y = torch.nn.functional.conv1d(flat, kernels, bias, padding=pad)
    return y.reshape(*lead, c_out, y.shape[-1])


# long kernels (the classification head's) are far cheaper in the frequency domain
FFT_CONV_MIN_KERNEL = 16


def _fft_correlate(x: torch.Tensor, kernels: torch.Tensor, pad: int) -> torch.Tensor:
    """``[B, c_in, L]`` cross-correlated with ``[c_out, c_in, k]``, via one FFT per signal.

    The transform length equals the padded input length, which is enough that
    no kept output position wraps around.
    """
    xp = torch.nn.functional.pad(x, (pad, pad))
    n = xp.shape[-1]
    spec = torch.einsum("bcf,ocf->bof", torch.fft.rfft(xp, n=n), torch.fft.rfft(kernels, n=n).conj())
    return torch.fft.irfft(spec, n=n)[..., : n - kernels.shape[-1] + 1]


def softmax(x: torch.Tensor, axis: int = -1) -> torch.Tensor:
    shifted = x - x.amax(dim=axis, keepdim=True).detach()
    e = torch.exp(shifted)
    return e / e.sum(dim=axis, keepdim=True)


def layer_norm(
    x: torch.Tensor, gamma: torch.Tensor, beta: torch.Tensor, eps: float = 1e-5
) -> torch.Tensor:
    mean = x.mean(dim=-1, keepdim=True)
    var = ((x - mean) ** 2).mean(dim=-1, keepdim=True)
    return (x - mean) / torch.sqrt(var + eps) * gamma + beta


def dropout(x: torch.Tensor, p: float, training: bool, rng: torch.Generator | None = None) -> torch.Tensor:
    """Inverted dropout; identity when not training."""
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    # single-precision uniforms are plenty for a keep/drop decision
    keep = torch.rand(x.shape, generator=rng, dtype=torch.float32) >= p
    return x * keep.to(x.dtype).mul_(1.0 / (1.0 - p))


def max_pool2(x: torch.Tensor) -> torch.Tensor:
    """Pairwise max along the last axis; an odd trailing element is dropped."""
    n = x.shape[-1] // 2
    if n == 0:
        raise ShapeError(f"max_pool2 needs a trailing length of at least 2, got {x.shape[-1]}")
    pairs = x[..., : 2 * n].reshape(*x.shape[:-1], n, 2)
    return pairs.amax(dim=-1)


def activation_pool_dropout(
    x: torch.Tensor,
    relu: bool = False,
    pool: str = "none",
    dropout_p: float = 0.0,
    training: bool = False,
    rng: torch.Generator | None = None,
) -> torch.Tensor:
    if not 0.0 <= dropout_p < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {dropout_p}")
    if relu:
        x = torch.relu(x)
    if pool == "max2":
        x = max_pool2(x)
    elif pool != "none":
        raise ConfigError(f"unknown pool mode {pool!r}")
    return dropout(x, dropout_p, training, rng)


def rfft(x: torch.Tensor, dim: int = -1) -> torch.Tensor:
    """Half spectrum (``L // 2 + 1`` bins) of a real signal; any length."""
    return torch.fft.rfft(x, dim=dim)


def irfft(spectrum: torch.Tensor, n: int, dim: int = -1) -> torch.Tensor:
    return torch.fft.irfft(spectrum, n=n, dim=dim)


def rfft_pair(x: torch.Tensor, dim: int = -1) -> tuple[torch.Tensor, Callable[[torch.Tensor], torch.Tensor]]:
    """Forward spectrum plus the matching inverse for the same length."""
    n = x.shape[dim]
    return rfft(x, dim=dim), lambda s: irfft(s, n, dim=dim)


def lstm_cell(
    x_t: torch.Tensor,
    h: torch.Tensor,
    c: torch.Tensor,
    w_ih: torch.Tensor,
    w_hh: torch.Tensor,
    b: torch.Tensor,
) -> tuple[torch.Tensor, torch.Tensor]:
    # gate blocks are ordered input, forget, candidate, output
    z = x_t @ w_ih + h @ w_hh + b
    i, f, g, o = z.chunk(4, dim=-1)
    c = torch.sigmoid(f) * c + torch.sigmoid(i) * torch.tanh(g)
    h = torch.sigmoid(o) * torch.tanh(c)
    return h, c


def lstm_layer(x: torch.Tensor, w_ih: torch.Tensor, w_hh: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Run an LSTM over ``x [..., L, d_in]`` from zero state, returning ``[..., L, units]``."""
    units = w_hh.shape[0]
    if w_ih.shape != (x.shape[-1], 4 * units) or w_hh.shape != (units, 4 * units):
        raise ShapeError(
            f"lstm_layer: input {tuple(x.shape)}, w_ih {tuple(w_ih.shape)}, w_hh {tuple(w_hh.shape)} disagree"
        )
    lead = x.shape[:-2]
    h = x.new_zeros(*lead, units)
    c = x.new_zeros(*lead, units)
    outputs = []
    for t in range(x.shape[-2]):
        h, c = lstm_cell(x[..., t, :], h, c, w_ih, w_hh, b)
        outputs.append(h)
    return torch.stack(outputs, dim=-2)


# ---------------------------------------------------------------------------
# parameterized modules


class Dropout(nn.Module):
    """Inverted dropout drawing its mask from a shared generator."""

    def __init__(self, p: float, rng: torch.Generator | None = None):
        super().__init__()
        if not 0.0 <= p < 1.0:
            raise ConfigError(f"dropout rate must lie in [0, 1), got {p}")
        self.p = p
        self.rng = rng

    def forward(self, x):
        return dropout(x, self.p, self.training, self.rng)


class Affine(nn.Module):
    def __init__(self, d_in: int, d_out: int, rng: torch.Generator, bias: bool = True, zero: bool = False):
        super().__init__()
        w = torch.zeros(d_in, d_out, dtype=DTYPE) if zero else glorot((d_in, d_out), d_in, d_out, rng)
        self.weight = nn.Parameter(w)
        self.bias = nn.Parameter(torch.zeros(d_out, dtype=DTYPE)) if bias else None

    def forward(self, x):
        return affine(x, self.weight, self.bias)


class Conv1d(nn.Module):
    def __init__(self, c_in: int, c_out: int, k: int, rng: torch.Generator, padding: str = "same"):
        super().__init__()
        if padding == "same" and k % 2 == 0:
            raise ConfigError(f"same-padded convolution needs an odd kernel, got {k}")
        self.padding = padding
        self.weight = nn.Parameter(glorot((c_out, c_in, k), c_in * k, c_out * k, rng))
        self.bias = nn.Parameter(torch.zeros(c_out, dtype=DTYPE))

    def forward(self, x):
        return conv1d(x, self.weight, self.bias, self.padding)


class LayerNorm(nn.Module):
    def __init__(self, d: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.weight = nn.Parameter(torch.ones(d, dtype=DTYPE))
        self.bias = nn.Parameter(torch.zeros(d, dtype=DTYPE))

    def forward(self, x):
        return layer_norm(x, self.weight, self.bias, self.eps)


class LSTM(nn.Module):
    def __init__(self, d_in: int, units: int, rng: torch.Generator):
        super().__init__()
        if units < 1:
            raise ConfigError(f"LSTM needs at least one unit, got {units}")
        self.w_ih = nn.Parameter(glorot((d_in, 4 * units), d_in, 4 * units, rng))
        self.w_hh = nn.Parameter(glorot((units, 4 * units), units, 4 * units, rng))
        self.bias = nn.Parameter(torch.zeros(4 * units, dtype=DTYPE))

    def forward(self, x):
        return lstm_layer(x, self.w_ih, self.w_hh, self.bias)


# ---------------------------------------------------------------------------
# finite-difference oracle


@dataclass(frozen=True)
class GradCheckReport:
    name: str
    max_rel_error: float
    passed: bool
    coords_checked: int = 0


def grad_check(
    loss_fn: Callable[[], torch.Tensor],
    params: Mapping[str, torch.Tensor] | Iterable[tuple[str, torch.Tensor]],
    tolerance: float = 1e-4,
    h: float = 1e-5,
    max_coords: int = 64,
    seed: int = 0,
) -> list[GradCheckReport]:
    """Compare reverse-mode gradients of ``loss_fn()`` with central differences.

    ``loss_fn`` takes no arguments and reads the parameters by closure.  Each
    tensor is probed on at most ``max_coords`` coordinates, picked by ``seed``.
    Relative error is ``|a - b| / max(|a|, |b|, 1e-8)``.
    """
    items = list(params.items()) if isinstance(params, Mapping) else list(params)
    tensors = [p for _, p in items]

    loss = loss_fn()
    if loss.numel() != 1:
        raise ContractError(f"grad_check needs a scalar loss, got shape {tuple(loss.shape)}")
    grads = torch.autograd.grad(loss, tensors, allow_unused=True)

    reports = []
    for i, ((name, p), g) in enumerate(zip(items, grads)):
        analytic = (torch.zeros_like(p) if g is None else g.detach()).reshape(-1)
        flat = p.data.view(-1)
        n = flat.numel()
        if n > max_coords:
            coords = np.random.default_rng([seed, i]).choice(n, size=max_coords, replace=False)
        else:
            coords = np.arange(n)
        worst = 0.0
        with torch.no_grad():
            for j in coords:
                j = int(j)
                orig = flat[j].item()
                flat[j] = orig + h
                up = loss_fn().item()
                flat[j] = orig - h
                down = loss_fn().item()
                flat[j] = orig
                numeric = (up - down) / (2.0 * h)
                a = analytic[j].item()
                rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
                worst = max(worst, rel)
        reports.append(GradCheckReport(name, worst, worst <= tolerance, len(coords)))
    return reports
