"""Scaling benchmark for the mixing mechanisms and the gradient-check suites."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import torch

from . import attention as A
from .blocks import VARIANTS, ModelConfig, build_model, encoder_layer, MultiScaleCNNFFN, PointwiseFFN
from .encodings import GaussianRangeEncoding
from .errors import ConfigError
from .numeric import DTYPE, LSTM, Conv1d, GradCheckReport, grad_check, layer_norm, make_generator
from .training import cross_entropy

BENCH_MECHANISMS = ("full", "autocorr", "sliding", "probsparse")
DEFAULT_LENGTHS = (64, 128, 256, 512, 1024, 2048)


@dataclass
class BenchReport:
    mechanism: str
    lengths: list[int]
    median_seconds: list[float]
    peak_bytes: list[int]
    slope: float | None
    status: str = "ok"
    repeats: int = 5
    width: int = 32
    notes: list[str] = field(default_factory=list)


def _peak_bytes(mechanism: str, length: int, d: int, window: int, factor: float) -> int:
    """Size of the largest transient tensor the mechanism materializes (float64)."""
    if mechanism == "full":
        return 8 * length * length
    if mechanism == "autocorr":
        k = A.default_top_k(length)
        return 8 * max(k * length * d, 2 * (length // 2 + 1) * d)
    if mechanism == "sliding":
        n_blocks = -(-length // window)
        return 8 * n_blocks * window * 2 * window
    u = A._sample_count(factor, length)
    return 8 * max(length * u * d, u * length)


def _mechanism(mechanism: str, window: int, factor: float):
    if mechanism == "full":
        return lambda q, k, v: A.full_attention(q, k, v)
    if mechanism == "autocorr":
        return lambda q, k, v: A.time_delay_aggregate(q, k, v, A.default_top_k(q.shape[-2]))
    if mechanism == "sliding":
        return lambda q, k, v: A.sliding_window_attention(q, k, v, window)
    if mechanism == "probsparse":
        return lambda q, k, v: A.probsparse_attention(q, k, v, factor, torch.Generator().manual_seed(0))
    raise ConfigError(f"unknown benchmark mechanism {mechanism!r}; expected one of {BENCH_MECHANISMS}")


def bench_scaling(
    mechanism: str,
    lengths=DEFAULT_LENGTHS,
    repeats: int = 5,
    d: int = 32,
    window: int = 32,
    factor: float = 5.0,
    seed: int = 0,
) -> BenchReport:
    """Forward-only median wall time per length and the log-log slope fitted to it.

    Only the mixing mechanism runs (no projections, no FFN), single-threaded.
    Each length gets one discarded warmup call.
    """
    lengths = [int(n) for n in lengths]
    if len(lengths) < 4 or any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise ConfigError(f"need at least 4 strictly increasing lengths, got {lengths}")
    if lengths[-1] < 16 * lengths[0]:
        raise ConfigError(f"lengths must span at least 16x, got {lengths[0]}..{lengths[-1]}")
    if repeats < 5:
        raise ConfigError(f"need at least 5 repeats, got {repeats}")
    fn = _mechanism(mechanism, window, factor)
    rng = make_generator(seed)
    threads = torch.get_num_threads()
    torch.set_num_threads(1)
    medians = []
    try:
        with torch.no_grad():
            for n in lengths:
                q, k, v = (torch.randn(n, d, generator=rng, dtype=DTYPE) for _ in range(3))
                fn(q, k, v)
                times = []
                for _ in range(repeats):
                    t0 = time.perf_counter()
                    fn(q, k, v)
                    times.append(time.perf_counter() - t0)
                medians.append(float(np.median(times)))
    finally:
        torch.set_num_threads(threads)
    peaks = [_peak_bytes(mechanism, n, d, window, factor) for n in lengths]
    tick = time.get_clock_info("perf_counter").resolution
    if all(m < 10 * tick for m in medians) or min(medians) <= 0:
        return BenchReport(mechanism, lengths, medians, peaks, None, "inconclusive", repeats, d,
                           ["timer resolution too coarse for these lengths"])
    slope = float(np.polyfit(np.log(lengths), np.log(medians), 1)[0])
    return BenchReport(mechanism, lengths, medians, peaks, slope, "ok", repeats, d)


def write_bench_csv(path, reports: list[BenchReport]) -> None:
    import csv

    with open(path, "w", newline="") as f:
        out = csv.writer(f)
        out.writerow(["mechanism", "length", "median_seconds", "peak_bytes", "slope", "status"])
        for r in reports:
            for n, t, b in zip(r.lengths, r.median_seconds, r.peak_bytes):
                out.writerow([r.mechanism, n, repr(t), b, "" if r.slope is None else repr(r.slope), r.status])


# ---------------------------------------------------------------------------
# gradient-check suites


def tiny_config(variant: str, seed: int = 0) -> ModelConfig:
    """Small configuration for finite-difference checks: L=16, c=3, width 16, <= 2 layers, 2 subjects."""
    kw = dict(seq_len=16, channels=3, num_subjects=2, d_temporal=16, d_channel=16,
              heads_temporal=4, heads_channel=4, num_ranges=3, state_size=4, window=8, head_units=4, seed=seed)
    layers = {
        "vanilla": dict(layers_before=2),
        "informer": dict(layers_before=2),
        "autoformer": dict(layers_before=2),
        "block_recurrent": dict(layers_before=1, recurrent_layers=1, layers_after=0),
        "that": dict(layers_before=2, channel_layers=1),
        "proposed": dict(layers_before=1, recurrent_layers=1, layers_after=0, channel_layers=1),
    }
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}")
    kw.update(layers.get(variant, {}))
    return ModelConfig(variant, **kw)


def _jitter_parameters(module, rng, scale=0.1):
    # move off the initialization so zero-initialized weights take generic values
    with torch.no_grad():
        for p in module.parameters():
            p.add_(scale * torch.randn(p.shape, generator=rng, dtype=DTYPE))


def variant_gradcheck(variant: str, tolerance: float = 1e-4, seed: int = 0) -> list[GradCheckReport]:
    model = build_model(tiny_config(variant, seed))
    model.eval()
    rng = make_generator(seed + 1)
    _jitter_parameters(model, rng)
    x = torch.randn(2, 3, 16, generator=rng, dtype=DTYPE)
    labels = torch.tensor([0, 1])
    return grad_check(lambda: cross_entropy(model(x), labels), list(model.named_parameters()), tolerance, seed=seed)


def _readout_check(name, fn, tensors: dict, rng, tolerance):
    out = fn()
    weights = torch.randn(out.shape, generator=rng, dtype=DTYPE)
    reports = grad_check(lambda: (fn() * weights).sum(), tensors, tolerance)
    return [GradCheckReport(f"{name}/{r.name}", r.max_rel_error, r.passed, r.coords_checked) for r in reports]


def mechanism_gradcheck(tolerance: float = 1e-4, seed: int = 0) -> list[GradCheckReport]:
    """Finite-difference checks of every mixing mechanism and sub-layer through a random linear readout."""
    rng = make_generator(seed)

    def leaf(*shape):
        return torch.randn(*shape, generator=rng, dtype=DTYPE).requires_grad_()

    reports = []
    q, k, v = leaf(8, 4), leaf(8, 4), leaf(8, 4)
    qkv = {"q": q, "k": k, "v": v}
    mask = A.sliding_window_mask(8, 3)
    cases = {
        "full_attention": lambda: A.full_attention(q, k, v),
        "masked_attention": lambda: A.full_attention(q, k, v, mask),
        "probsparse": lambda: A.probsparse_attention(q, k, v, 1.0, torch.Generator().manual_seed(3)),
        "time_delay_aggregate": lambda: A.time_delay_aggregate(q, k, v, 3),
        "sliding_window": lambda: A.sliding_window_attention(q, k, v, 3),
    }
    for name, fn in cases.items():
        reports += _readout_check(name, fn, qkv, rng, tolerance)

    s, h = leaf(4, 6), leaf(4, 6)
    w_z, b_z, b_g = leaf(6, 6), leaf(6), leaf(6)
    reports += _readout_check(
        "recurrent_gate",
        lambda: A.recurrent_state_update(s, h, w_z, b_z, b_g),
        {"state": s, "h": h, "w_z": w_z, "b_z": b_z, "b_g": b_g},
        rng,
        tolerance,
    )
    x, gamma, beta = leaf(5, 6), leaf(6), leaf(6)
    reports += _readout_check("layer_norm", lambda: layer_norm(x, gamma, beta),
                              {"x": x, "gamma": gamma, "beta": beta}, rng, tolerance)

    gen = make_generator(seed + 7)
    x16 = torch.randn(2, 12, 16, generator=gen, dtype=DTYPE)
    modules = {}
    for mech in ("full", "probsparse", "autocorr"):
        modules[f"multi_head_{mech}"] = A.MultiHeadAttention(A.AttentionConfig(16, 4, mech, factor=1.0), gen)
    modules["multi_head_cross"] = A.MultiHeadAttention(A.AttentionConfig(16, 4, "cross"), gen)
    modules["gaussian_range"] = GaussianRangeEncoding(12, 16, gen, num_ranges=3)
    modules["pointwise_ffn"] = PointwiseFFN(16, gen)
    modules["multiscale_ffn"] = MultiScaleCNNFFN(16, (1, 3, 5, 7), gen)
    for kind in ("blockrec_vertical", "blockrec_horizontal", "proposed_recurrent"):
        modules[kind] = encoder_layer(kind, 16, 4, gen, window=6, state_size=3)
    s16 = torch.randn(2, 5, 16, generator=gen, dtype=DTYPE)
    for name, mod in modules.items():
        mod.eval()
        _jitter_parameters(mod, gen)
        if name == "multi_head_cross":
            fn = lambda mod=mod: mod(x16, s16)
        else:
            fn = lambda mod=mod: mod(x16)
        reports += _readout_check(name, fn, dict(mod.named_parameters()), rng, tolerance)

    conv, lstm = Conv1d(3, 4, 5, gen), LSTM(3, 4, gen)
    xc = torch.randn(3, 10, generator=gen, dtype=DTYPE)
    reports += _readout_check("conv1d", lambda: conv(xc), dict(conv.named_parameters()), rng, tolerance)
    reports += _readout_check("lstm", lambda: lstm(xc.T), dict(lstm.named_parameters()), rng, tolerance)
    return reports


def failures(reports: list[GradCheckReport]) -> list[GradCheckReport]:
    return [r for r in reports if not r.passed]


def worst(reports: list[GradCheckReport]) -> float:
    return max((r.max_rel_error for r in reports), default=0.0)

