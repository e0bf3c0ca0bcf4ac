"""Input encodings: fixed sinusoids and learnable Gaussian ranges."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn

from .errors import ConfigError, ShapeError
from .numeric import DTYPE, glorot, softmax

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
SIGMA_FLOOR = 1e-6


def positional_table(length: int, d: int) -> torch.Tensor:
    """``[length, d]`` table: sin on even channels, cos on odd ones."""
    if d % 2:
        raise ConfigError(f"sinusoidal encoding needs an even width, got d={d}")
    pos = torch.arange(length, dtype=DTYPE)[:, None]
    pair = torch.arange(0, d, 2, dtype=DTYPE)
    angle = pos / torch.pow(torch.tensor(10000.0, dtype=DTYPE), pair / d)
    table = torch.empty(length, d, dtype=DTYPE)
    table[:, 0::2] = torch.sin(angle)
    table[:, 1::2] = torch.cos(angle)
    return table


def sinusoidal_encode(x: torch.Tensor) -> torch.Tensor:
    return x + positional_table(x.shape[-2], x.shape[-1])


class SinusoidalEncoding(nn.Module):
    def forward(self, x):
        return sinusoidal_encode(x)


@dataclass
class GaussianRangeParams:
    """Centers ``mu [G]``, widths ``sigma [G]`` and values ``values [G, d]``."""

    mu: torch.Tensor
    sigma: torch.Tensor
    values: torch.Tensor

    def __post_init__(self):
        if self.values.shape[0] != self.mu.shape[0] or self.sigma.shape != self.mu.shape:
            raise ShapeError(
                f"range params disagree: mu {tuple(self.mu.shape)}, sigma {tuple(self.sigma.shape)}, "
                f"values {tuple(self.values.shape)}"
            )
        if bool((self.sigma <= 0).any()):
            raise ConfigError("every Gaussian range width must be strictly positive")

    @property
    def num_ranges(self) -> int:
        return self.mu.shape[0]


def range_memberships(length: int, mu: torch.Tensor, sigma: torch.Tensor) -> torch.Tensor:
    """``[length, G]`` rows of normalized Gaussian densities.

    Normalizing densities by their sum is a softmax over log-densities, which
    stays finite even when every density underflows.
    """
    pos = torch.arange(length, dtype=DTYPE)[:, None]
    log_density = -0.5 * ((pos - mu) / sigma) ** 2 - torch.log(sigma) - LOG_SQRT_2PI
    return softmax(log_density, axis=-1)


def gaussian_range_encode(x: torch.Tensor, params: GaussianRangeParams) -> torch.Tensor:
    if x.shape[-1] != params.values.shape[1]:
        raise ShapeError(f"input width {x.shape[-1]} does not match range values {tuple(params.values.shape)}")
    p = range_memberships(x.shape[-2], params.mu, params.sigma)
    return x + p @ params.values


def _softplus_inverse(y: float) -> float:
    return y + math.log(-math.expm1(-y))


class GaussianRangeEncoding(nn.Module):
    """Learnable Gaussian range encoding with ``sigma = softplus(rho)``.

    Centers start evenly spaced over ``[0, length)`` with a little jitter so
    the whole sequence is covered from the first step.
    """

    def __init__(self, length: int, d: int, rng: torch.Generator, num_ranges: int = 10):
        super().__init__()
        if num_ranges < 1:
            raise ConfigError(f"need at least one Gaussian range, got {num_ranges}")
        g = num_ranges
        spacing = length / g
        jitter = (2.0 * torch.rand(g, generator=rng, dtype=DTYPE) - 1.0) * length / (4 * g)
        self.mu = nn.Parameter(torch.arange(g, dtype=DTYPE) * spacing + spacing / 2 + jitter)
        self.rho = nn.Parameter(torch.full((g,), _softplus_inverse(spacing), dtype=DTYPE))
        self.values = nn.Parameter(glorot((g, d), g, d, rng))
        self.length = length
        self.clamp_count = 0

    @property
    def sigma(self) -> torch.Tensor:
        return nn.functional.softplus(self.rho)

    def params(self) -> GaussianRangeParams:
        sigma = self.sigma
        if bool((sigma < SIGMA_FLOOR).any()):
            self.clamp_count += 1
            sigma = sigma.clamp_min(SIGMA_FLOOR)
        return GaussianRangeParams(self.mu, sigma, self.values)

    def forward(self, x):
        return gaussian_range_encode(x, self.params())
