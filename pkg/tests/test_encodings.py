import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from gaitformer.encodings import (
    GaussianRangeEncoding,
    GaussianRangeParams,
    gaussian_range_encode,
    positional_table,
    range_memberships,
    sinusoidal_encode,
)
from gaitformer.errors import ConfigError, ShapeError
from gaitformer.numeric import DTYPE, make_generator


def test_sinusoidal_zero_position_alternates():
    row = positional_table(5, 8)[0]
    assert torch.equal(row, torch.tensor([0, 1] * 4, dtype=DTYPE))


def test_sinusoidal_first_pair_at_position_one():
    out = sinusoidal_encode(torch.zeros(3, 6, dtype=DTYPE))
    assert out[1, 0].item() == pytest.approx(math.sin(1.0), abs=1e-15)
    assert out[1, 1].item() == pytest.approx(math.cos(1.0), abs=1e-15)
    assert out[1, 0].item() == pytest.approx(0.84147, abs=1e-5)
    assert out[1, 1].item() == pytest.approx(0.54030, abs=1e-5)


def test_sinusoidal_formula_and_range():
    table = positional_table(80, 64)
    assert table.abs().max() <= 1.0
    pos, pair = 37, 5
    angle = pos / 10000 ** (2 * pair / 64)
    assert table[pos, 2 * pair].item() == pytest.approx(math.sin(angle), abs=1e-14)
    assert table[pos, 2 * pair + 1].item() == pytest.approx(math.cos(angle), abs=1e-14)
    assert torch.equal(sinusoidal_encode(torch.zeros(80, 64, dtype=DTYPE)), table)


def test_sinusoidal_odd_width_rejected():
    with pytest.raises(ConfigError):
        sinusoidal_encode(torch.zeros(4, 5, dtype=DTYPE))


def _params(mu, sigma, values):
    return GaussianRangeParams(torch.tensor(mu, dtype=DTYPE), torch.tensor(sigma, dtype=DTYPE), values)


def test_gaussian_zero_values_is_identity():
    x = torch.randn(12, 4, generator=make_generator(0), dtype=DTYPE)
    p = _params([1.0, 6.0, 10.0], [2.0, 0.5, 4.0], torch.zeros(3, 4, dtype=DTYPE))
    assert torch.equal(gaussian_range_encode(x, p), x)


def test_gaussian_single_range_adds_same_row():
    x = torch.zeros(7, 3, dtype=DTYPE)
    v = torch.tensor([[1.0, -2.0, 0.5]], dtype=DTYPE)
    out = gaussian_range_encode(x, _params([2.0], [1.5], v))
    assert torch.allclose(out, v.expand(7, 3), atol=1e-15)


def test_gaussian_symmetric_midpoint():
    p = range_memberships(9, torch.tensor([0.0, 8.0], dtype=DTYPE), torch.tensor([2.0, 2.0], dtype=DTYPE))
    assert torch.allclose(p[4], torch.tensor([0.5, 0.5], dtype=DTYPE), atol=1e-15)


def test_memberships_match_normalized_densities():
    mu, sigma = torch.tensor([1.0, 5.0], dtype=DTYPE), torch.tensor([1.0, 3.0], dtype=DTYPE)
    p = range_memberships(8, mu, sigma)
    for pos in range(8):
        dens = [math.exp(-0.5 * ((pos - m) / s) ** 2) / (s * math.sqrt(2 * math.pi)) for m, s in zip([1, 5], [1, 3])]
        zeta = sum(dens)
        assert p[pos].tolist() == pytest.approx([d / zeta for d in dens], abs=1e-14)


@settings(max_examples=50, deadline=None)
@given(
    length=st.integers(1, 40),
    mu=st.lists(st.floats(-5, 45), min_size=1, max_size=6),
    log_sigma=st.floats(-3, 4),
)
def test_memberships_are_distributions(length, mu, log_sigma):
    mu_t = torch.tensor(mu, dtype=DTYPE)
    sigma_t = torch.full_like(mu_t, math.exp(log_sigma))
    p = range_memberships(length, mu_t, sigma_t)
    assert (p >= 0).all()
    assert (p.sum(-1) - 1).abs().max() <= 1e-12


def test_params_validation():
    with pytest.raises(ConfigError):
        _params([1.0], [0.0], torch.zeros(1, 2, dtype=DTYPE))
    with pytest.raises(ShapeError):
        _params([1.0, 2.0], [1.0, 1.0], torch.zeros(3, 2, dtype=DTYPE))


def test_module_initialization_and_gradients():
    enc = GaussianRangeEncoding(80, 8, make_generator(1), num_ranges=10)
    assert torch.allclose(enc.sigma, torch.full((10,), 8.0, dtype=DTYPE))
    spacing = 8.0
    centers = torch.arange(10, dtype=DTYPE) * spacing + spacing / 2
    assert (enc.mu.detach() - centers).abs().max() <= 80 / 40
    x = torch.randn(80, 8, generator=make_generator(2), dtype=DTYPE)
    enc(x).pow(2).sum().backward()
    for p in (enc.mu, enc.rho, enc.values):
        assert p.grad is not None and p.grad.abs().sum() > 0


def test_module_clamps_collapsed_widths():
    enc = GaussianRangeEncoding(10, 4, make_generator(3), num_ranges=2)
    with torch.no_grad():
        enc.rho.fill_(-60.0)  # softplus underflows toward zero
    out = enc(torch.zeros(10, 4, dtype=DTYPE))
    assert torch.isfinite(out).all()
    assert enc.clamp_count == 1
