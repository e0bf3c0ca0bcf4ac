"""Encoder layers and whole-model assembly for the nine gait architectures."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import torch
import torch.nn as nn

from . import archive
from .attention import AttentionConfig, MultiHeadAttention, RecurrentGate, window_mask
from .encodings import GaussianRangeEncoding, SinusoidalEncoding
from .errors import ConfigError
from .numeric import DTYPE, LSTM, Affine, Conv1d, Dropout, LayerNorm, make_generator, max_pool2, softmax

VARIANTS = ("cnn", "rnn", "cnn_rnn", "vanilla", "informer", "autoformer", "block_recurrent", "that", "proposed")
BASELINES = ("cnn", "rnn", "cnn_rnn")
TWO_STREAM = ("that", "proposed")
RECURRENT = ("block_recurrent", "proposed")

LAYER_KINDS = (
    "vanilla_full",
    "informer_probsparse",
    "autoformer_autocorr",
    "blockrec_vertical",
    "blockrec_horizontal",
    "that_temporal",
    "that_channel",
    "proposed_temporal",
    "proposed_channel",
    "proposed_recurrent",
)

HAR_KERNELS = (1, 3, 5)
GBR_KERNELS = (1, 3, 5, 7)

_LAYER_DEFAULTS = {
    # variant: (layers before the recurrent layer, recurrent layers, layers after, channel layers)
    "vanilla": (5, 0, 0, 0),
    "informer": (5, 0, 0, 0),
    "autoformer": (5, 0, 0, 0),
    "block_recurrent": (9, 1, 2, 0),
    "that": (9, 0, 0, 1),
    "proposed": (9, 1, 2, 1),
}


@dataclass
class ModelConfig:
    variant: str
    seq_len: int = 80
    channels: int = 6
    num_subjects: int = 8
    d_temporal: int = 64
    d_channel: int = 96
    layers_before: int | None = None
    recurrent_layers: int | None = None
    layers_after: int | None = None
    channel_layers: int | None = None
    heads_temporal: int = 8
    heads_channel: int = 6
    num_ranges: int = 10
    kernel_set: tuple[int, ...] | None = None
    dropout: float | None = None
    window: int | None = None
    state_size: int = 16
    probsparse_factor: float = 5.0
    autocorr_factor: float = 1.0
    head_units: int = 16
    conv_units: int = 6
    conv_kernel: int = 5
    lstm_units: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        before, rec, after, chan = _LAYER_DEFAULTS.get(self.variant, (0, 0, 0, 0))
        if self.layers_before is None:
            self.layers_before = before
        if self.recurrent_layers is None:
            self.recurrent_layers = rec
        if self.layers_after is None:
            self.layers_after = after
        if self.channel_layers is None:
            self.channel_layers = chan
        if self.kernel_set is None:
            self.kernel_set = {"that": HAR_KERNELS, "proposed": GBR_KERNELS}.get(self.variant, ())
        self.kernel_set = tuple(int(k) for k in self.kernel_set)
        if self.dropout is None:
            self.dropout = 0.5 if self.variant in BASELINES else 0.1
        if self.window is None:
            self.window = max(1, self.seq_len // 4)
        self.validate()

    def validate(self):
        v = self.variant
        if self.seq_len < 2 or self.channels < 1 or self.num_subjects < 1:
            raise ConfigError(
                f"need seq_len >= 2, channels >= 1, num_subjects >= 1; got {self.seq_len}, "
                f"{self.channels}, {self.num_subjects}"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if v in BASELINES:
            return
        if self.d_temporal % self.heads_temporal:
            raise ConfigError(f"{self.heads_temporal} heads do not divide d_temporal={self.d_temporal}")
        if self.d_temporal % 2:
            raise ConfigError(f"d_temporal must be even, got {self.d_temporal}")
        if v in TWO_STREAM:
            if self.d_channel % self.heads_channel:
                raise ConfigError(f"{self.heads_channel} heads do not divide d_channel={self.d_channel}")
            if self.d_channel % 2:
                raise ConfigError(f"d_channel must be even, got {self.d_channel}")
            if self.channel_layers < 1:
                raise ConfigError(f"{v} needs at least one channel-stream layer")
        elif self.channel_layers:
            raise ConfigError(f"{v} has no channel stream; channel_layers must be 0")
        if v in RECURRENT:
            if self.recurrent_layers != 1:
                raise ConfigError(f"{v} takes exactly one recurrent layer, got {self.recurrent_layers}")
        elif self.recurrent_layers or self.layers_after:
            raise ConfigError(f"only block_recurrent and proposed have a recurrent layer; got R={self.recurrent_layers}")
        if self.layers_before + self.recurrent_layers + self.layers_after < 1:
            raise ConfigError("the temporal stream needs at least one layer")
        expected_kernels = {"that": HAR_KERNELS, "proposed": GBR_KERNELS}.get(v, ())
        if self.kernel_set != expected_kernels:
            raise ConfigError(f"{v} uses kernel set {expected_kernels}, got {self.kernel_set}")
        if not 1 <= self.window <= self.seq_len:
            raise ConfigError(f"window must lie in [1, {self.seq_len}], got {self.window}")
        if self.state_size < 1 or self.num_ranges < 1 or self.head_units < 1:
            raise ConfigError("state_size, num_ranges and head_units must all be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown ModelConfig fields: {sorted(unknown)}")
        d = dict(d)
        if d.get("kernel_set") is not None:
            d["kernel_set"] = tuple(d["kernel_set"])
        return cls(**d)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["kernel_set"] = list(self.kernel_set)
        return d

    @property
    def dense_units(self) -> int:
        return (3 * self.seq_len) // 2


# ---------------------------------------------------------------------------
# feed-forward sub-layers


class PointwiseFFN(nn.Module):
    def __init__(self, d: int, rng: torch.Generator, dropout: float = 0.1):
        super().__init__()
        self.expand = Affine(d, 4 * d, rng)
        self.drop = Dropout(dropout, rng)
        self.contract = Affine(4 * d, d, rng)

    def forward(self, x):
        return self.contract(self.drop(torch.relu(self.expand(x))))


class MultiScaleCNNFFN(nn.Module):
    """Parallel same-padded convolutions over time mixed by learned scale attention.

    Input and output are ``[..., L, d]``; each branch is a ``d -> d`` conv with
    ReLU and dropout.  One scalar logit per branch is softmaxed into the
    mixing weights.
    """

    def __init__(self, d: int, kernel_set, rng: torch.Generator, dropout: float = 0.1):
        super().__init__()
        kernel_set = tuple(kernel_set)
        if not kernel_set:
            raise ConfigError("multi-scale FFN needs at least one kernel size")
        for k in kernel_set:
            if k < 1 or k % 2 == 0:
                raise ConfigError(f"multi-scale FFN kernels must be odd and positive, got {k}")
        self.kernel_set = kernel_set
        self.branches = nn.ModuleList(Conv1d(d, d, k, rng) for k in kernel_set)
        self.scale_logits = nn.Parameter(torch.zeros(len(kernel_set), dtype=DTYPE))
        self.drop = Dropout(dropout, rng)

    def _stacked(self, x):
        # [branch, ..., d, L] with one dropout draw for all branches
        xt = x.transpose(-1, -2)
        return self.drop(torch.stack([torch.relu(conv(xt)) for conv in self.branches]))

    def branch_outputs(self, x):
        return list(self._stacked(x).transpose(-1, -2).unbind(0))

    def forward(self, x):
        weights = softmax(self.scale_logits)
        return torch.tensordot(weights, self._stacked(x), dims=1).transpose(-1, -2)


# ---------------------------------------------------------------------------
# encoder layers


class TransformerLayer(nn.Module):
    """Post-norm encoder layer: ``LN(x + mix(x))`` then ``LN(x + ffn(x))``."""

    def __init__(self, attn: MultiHeadAttention, ffn: nn.Module, d: int, rng, dropout: float = 0.1):
        super().__init__()
        self.attn = attn
        self.ffn = ffn
        self.norm1 = LayerNorm(d)
        self.norm2 = LayerNorm(d)
        self.drop = Dropout(dropout, rng)

    def forward(self, x):
        x = self.norm1(x + self.drop(self.attn(x)))
        return self.norm2(x + self.ffn(x))


class BlockRecurrentLayer(nn.Module):
    """Sliding-window layer that also reads (and optionally updates) recurrent state.

    Tokens are processed in blocks of ``window`` rows.  Each block attends to
    itself and the previous block under a causal width-``window`` mask, and
    cross-attends to the ``[m, d]`` state.  A recurrent layer additionally
    refreshes the state from the block through two gates: one after the state's
    attention sub-layer and one after its feed-forward sub-layer.

    ``prenorm=True`` gives the block-recurrent arrangement (norm before each
    sub-layer, everything per block); ``prenorm=False`` gives residual then norm,
    with the feed-forward applied to the whole reassembled sequence so a
    convolutional FFN sees across block edges.
    """

    def __init__(
        self,
        d: int,
        heads: int,
        window: int,
        state_size: int,
        rng: torch.Generator,
        ffn: nn.Module,
        recurrent: bool = True,
        prenorm: bool = True,
        dropout: float = 0.1,
    ):
        super().__init__()
        self.d = d
        self.window = window
        self.state_size = state_size
        self.recurrent = recurrent
        self.prenorm = prenorm
        self.self_attn = MultiHeadAttention(AttentionConfig(d, heads, "full", window=window), rng)
        self.cross_attn = MultiHeadAttention(AttentionConfig(d, heads, "cross"), rng)
        self.ffn = ffn
        self.norm1 = LayerNorm(d)
        self.norm2 = LayerNorm(d)
        self.drop = Dropout(dropout, rng)
        if recurrent:
            self.state_self_attn = MultiHeadAttention(AttentionConfig(d, heads, "full"), rng)
            self.state_cross_attn = MultiHeadAttention(AttentionConfig(d, heads, "cross"), rng)
            self.state_norm1 = LayerNorm(d)
            self.state_norm2 = LayerNorm(d)
            self.state_ffn = PointwiseFFN(d, rng, dropout)
            self.gate_attn = RecurrentGate(d, rng)
            self.gate_ffn = RecurrentGate(d, rng)

    def initial_state(self, x):
        return x.new_zeros(*x.shape[:-2], self.state_size, self.d)

    def token_mix(self, x_blk, prev_blk, state, start: int):
        n = x_blk.shape[-2]
        keys = x_blk if prev_blk is None else torch.cat([prev_blk, x_blk], dim=-2)
        q_pos = torch.arange(start, start + n)
        k_pos = torch.arange(start + n - keys.shape[-2], start + n)
        mask = window_mask(q_pos, k_pos, self.window)
        return self.self_attn(x_blk, keys, mask) + self.cross_attn(x_blk, state)

    def update_state(self, state, x_blk):
        if not self.recurrent:
            return state
        s = self.state_norm1(state)
        state = self.gate_attn(state, self.state_self_attn(s) + self.state_cross_attn(s, x_blk))
        return self.gate_ffn(state, self.state_ffn(self.state_norm2(state)))

    def step(self, x_blk, prev_blk, state, start: int):
        """One pre-norm block: returns ``(block output, next state)``."""
        xn = self.norm1(x_blk)
        pn = None if prev_blk is None else self.norm1(prev_blk)
        y = x_blk + self.drop(self.token_mix(xn, pn, state, start))
        y = y + self.drop(self.ffn(self.norm2(y)))
        return y, self.update_state(state, xn)

    def forward_with_state(self, x, state=None):
        state = self.initial_state(x) if state is None else state
        length = x.shape[-2]
        outs = []
        prev = None
        for start in range(0, length, self.window):
            blk = x[..., start : start + self.window, :]
            if self.prenorm:
                y, state = self.step(blk, prev, state, start)
            else:
                y = self.token_mix(blk, prev, state, start)
                state = self.update_state(state, blk)
            outs.append(y)
            prev = blk
        y = torch.cat(outs, dim=-2)
        if not self.prenorm:
            y = self.norm1(x + self.drop(y))
            y = self.norm2(y + self.ffn(y))
        return y, state

    def forward(self, x):
        return self.forward_with_state(x)[0]


class BlockRecurrentEncoder(nn.Module):
    """Stack of block-recurrent layers run block by block.

    Every layer of block ``w`` reads the state written by the recurrent layer
    while processing block ``w - 1``; the state starts at zero.
    """

    def __init__(self, layers, window: int):
        super().__init__()
        self.layers = nn.ModuleList(layers)
        self.window = window
        recurrent = [layer for layer in layers if layer.recurrent]
        if len(recurrent) != 1:
            raise ConfigError(f"block-recurrent stack needs exactly one recurrent layer, got {len(recurrent)}")
        self.state_layer = recurrent[0]

    def forward_with_state(self, x):
        state = self.state_layer.initial_state(x)
        caches = [None] * len(self.layers)
        outs = []
        for start in range(0, x.shape[-2], self.window):
            h = x[..., start : start + self.window, :]
            next_state = state
            for i, layer in enumerate(self.layers):
                y, s = layer.step(h, caches[i], state, start)
                caches[i] = h
                if layer.recurrent:
                    next_state = s
                h = y
            state = next_state
            outs.append(h)
        return torch.cat(outs, dim=-2), state

    def forward(self, x):
        return self.forward_with_state(x)[0]


def encoder_layer(
    kind: str,
    d: int,
    heads: int,
    rng: torch.Generator,
    *,
    dropout: float = 0.1,
    window: int | None = None,
    state_size: int = 16,
    probsparse_factor: float = 5.0,
    autocorr_factor: float = 1.0,
    eval_seed: int = 0,
) -> nn.Module:
    """Build one encoder layer of the given kind."""
    if kind not in LAYER_KINDS:
        raise ConfigError(f"unknown layer kind {kind!r}; expected one of {LAYER_KINDS}")

    def mha(mechanism):
        cfg = AttentionConfig(d, heads, mechanism, factor=probsparse_factor, top_k_factor=autocorr_factor)
        return MultiHeadAttention(cfg, rng, eval_seed)

    if kind.startswith("that"):
        ffn_kernels = HAR_KERNELS
    elif kind.startswith("proposed"):
        ffn_kernels = GBR_KERNELS
    else:
        ffn_kernels = None

    if kind in ("blockrec_vertical", "blockrec_horizontal", "proposed_recurrent"):
        if window is None:
            raise ConfigError(f"{kind} needs a window size")
        ffn = PointwiseFFN(d, rng, dropout) if ffn_kernels is None else MultiScaleCNNFFN(d, ffn_kernels, rng, dropout)
        return BlockRecurrentLayer(
            d,
            heads,
            window,
            state_size,
            rng,
            ffn,
            recurrent=kind != "blockrec_vertical",
            prenorm=kind != "proposed_recurrent",
            dropout=dropout,
        )

    mechanism = {
        "vanilla_full": "full",
        "informer_probsparse": "probsparse",
        "autoformer_autocorr": "autocorr",
        "that_temporal": "full",
        "that_channel": "full",
        "proposed_temporal": "autocorr",
        "proposed_channel": "autocorr",
    }[kind]
    attn = mha(mechanism)
    ffn = PointwiseFFN(d, rng, dropout) if ffn_kernels is None else MultiScaleCNNFFN(d, ffn_kernels, rng, dropout)
    return TransformerLayer(attn, ffn, d, rng, dropout)


# ---------------------------------------------------------------------------
# streams and head


class Stream(nn.Module):
    """Project tokens, encode positions, run the layer stack, mean-pool over tokens.

    ``transpose=False``: tokens are time steps (``[c, L] -> [L, c]``).
    ``transpose=True``: tokens are channels carrying their length-``L`` series.
    """

    def __init__(self, d_in: int, d: int, encoding: nn.Module, layers, rng, transpose: bool):
        super().__init__()
        self.transpose = transpose
        self.proj = Affine(d_in, d, rng)
        self.encoding = encoding
        self.layers = nn.ModuleList(layers)

    def tokens(self, x):
        h = self.proj(x if self.transpose else x.transpose(-1, -2))
        h = self.encoding(h)
        for layer in self.layers:
            h = layer(h)
        return h

    def forward(self, x):
        return self.tokens(x).mean(dim=-2)


def head_kernel_size(n_features: int) -> int:
    k = min(128, n_features)
    return k if k % 2 else k - 1


class ClassificationHead(nn.Module):
    """Two same-padded convs over the pooled feature vector, max-pool, linear to logits.

    The conv kernel is 128 clipped to the feature length and made odd.  The
    final linear layer starts at zero so fresh models emit uniform scores.
    """

    def __init__(self, n_features: int, n_subjects: int, units: int, rng, dropout: float = 0.1):
        super().__init__()
        if n_features < 1:
            raise ConfigError("classification head needs at least one feature")
        k = head_kernel_size(n_features)
        self.kernel_size = k
        self.conv1 = Conv1d(1, units, k, rng)
        self.conv2 = Conv1d(units, units, k, rng)
        self.drop = Dropout(dropout, rng)
        pooled = max(n_features // 2, 1)
        self.out = Affine(units * pooled, n_subjects, rng, zero=True)

    def forward(self, f):
        h = f.unsqueeze(-2)
        h = self.drop(torch.relu(self.conv1(h)))
        h = self.drop(torch.relu(self.conv2(h)))
        if h.shape[-1] >= 2:
            h = max_pool2(h)
        return self.out(h.flatten(-2))


# ---------------------------------------------------------------------------
# baselines


class ConvStack(nn.Module):
    """Four same-padded conv layers; optional pool+dropout after every two."""

    def __init__(self, c_in, units, kernel, rng, dropout, pool_every_two: bool):
        super().__init__()
        self.convs = nn.ModuleList(Conv1d(c_in if i == 0 else units, units, kernel, rng) for i in range(4))
        self.drop = Dropout(dropout, rng)
        self.pool_every_two = pool_every_two

    def forward(self, x):
        for i, conv in enumerate(self.convs):
            x = torch.relu(conv(x))
            if not self.pool_every_two:
                x = self.drop(x)
            elif i % 2 == 1:
                x = self.drop(max_pool2(x) if x.shape[-1] >= 2 else x)
        return x


class LSTMStack(nn.Module):
    def __init__(self, c_in, units, rng, n_layers: int = 3):
        super().__init__()
        self.lstms = nn.ModuleList(LSTM(c_in if i == 0 else units, units, rng) for i in range(n_layers))

    def forward(self, x):
        h = x.transpose(-1, -2)
        for lstm in self.lstms:
            h = lstm(h)
        return h


class DenseHead(nn.Module):
    def __init__(self, n_in, units, n_subjects, rng):
        super().__init__()
        self.dense = Affine(n_in, units, rng)
        self.out = Affine(units, n_subjects, rng, zero=True)

    def forward(self, f):
        return self.out(torch.relu(self.dense(f)))


# ---------------------------------------------------------------------------
# models


class GaitModel(nn.Module):
    """Maps ``[c, L]`` (or ``[B, c, L]``) windows to ``num_subjects`` logits."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.rng = make_generator(config.seed)
        builder = {
            "cnn": self._build_cnn,
            "rnn": self._build_rnn,
            "cnn_rnn": self._build_cnn_rnn,
        }.get(config.variant, self._build_transformer)
        builder(config, self.rng)

    # -- baselines

    def _build_cnn(self, cfg, rng):
        self.conv = ConvStack(cfg.channels, cfg.conv_units, cfg.conv_kernel, rng, cfg.dropout, pool_every_two=True)
        length = cfg.seq_len // 2 // 2
        self.head = DenseHead(cfg.conv_units * length, cfg.dense_units, cfg.num_subjects, rng)

    def _build_rnn(self, cfg, rng):
        self.lstm = LSTMStack(cfg.channels, cfg.lstm_units, rng)
        self.head = DenseHead(cfg.lstm_units * cfg.seq_len, cfg.dense_units, cfg.num_subjects, rng)

    def _build_cnn_rnn(self, cfg, rng):
        self.conv = ConvStack(cfg.channels, cfg.conv_units, cfg.conv_kernel, rng, cfg.dropout, pool_every_two=False)
        self.lstm = LSTMStack(cfg.channels, cfg.lstm_units, rng)
        n_in = (cfg.conv_units + cfg.lstm_units) * cfg.seq_len
        self.head = DenseHead(n_in, cfg.dense_units, cfg.num_subjects, rng)

    # -- transformers

    def temporal_layer_kinds(self) -> list[str]:
        cfg = self.config
        v = cfg.variant
        if v == "block_recurrent":
            return (
                ["blockrec_vertical"] * cfg.layers_before
                + ["blockrec_horizontal"] * cfg.recurrent_layers
                + ["blockrec_vertical"] * cfg.layers_after
            )
        if v == "proposed":
            return (
                ["proposed_temporal"] * cfg.layers_before
                + ["proposed_recurrent"] * cfg.recurrent_layers
                + ["proposed_temporal"] * cfg.layers_after
            )
        kind = {
            "vanilla": "vanilla_full",
            "informer": "informer_probsparse",
            "autoformer": "autoformer_autocorr",
            "that": "that_temporal",
        }[v]
        return [kind] * cfg.layers_before

    def _layer(self, kind, d, heads, rng, length):
        cfg = self.config
        return encoder_layer(
            kind,
            d,
            heads,
            rng,
            dropout=cfg.dropout,
            window=min(cfg.window, length),
            state_size=cfg.state_size,
            probsparse_factor=cfg.probsparse_factor,
            autocorr_factor=cfg.autocorr_factor,
            eval_seed=cfg.seed,
        )

    def _build_transformer(self, cfg, rng):
        d_t = cfg.d_temporal
        if cfg.variant in TWO_STREAM:
            t_enc = GaussianRangeEncoding(cfg.seq_len, d_t, rng, cfg.num_ranges)
        else:
            t_enc = SinusoidalEncoding()
        layers = [self._layer(kind, d_t, cfg.heads_temporal, rng, cfg.seq_len) for kind in self.temporal_layer_kinds()]
        if cfg.variant == "block_recurrent":
            layers = [BlockRecurrentEncoder(layers, cfg.window)]
        self.temporal = Stream(cfg.channels, d_t, t_enc, layers, rng, transpose=False)
        n_features = d_t
        if cfg.variant in TWO_STREAM:
            d_c = cfg.d_channel
            if cfg.variant == "that":
                c_enc, kind = SinusoidalEncoding(), "that_channel"
            else:
                c_enc, kind = GaussianRangeEncoding(cfg.channels, d_c, rng, cfg.num_ranges), "proposed_channel"
            c_layers = [self._layer(kind, d_c, cfg.heads_channel, rng, cfg.channels) for _ in range(cfg.channel_layers)]
            self.channel = Stream(cfg.seq_len, d_c, c_enc, c_layers, rng, transpose=True)
            n_features += d_c
        self.head = ClassificationHead(n_features, cfg.num_subjects, cfg.head_units, rng, cfg.dropout)

    # -- forward

    def features(self, x):
        v = self.config.variant
        if v == "cnn":
            return self.conv(x).flatten(-2)
        if v == "rnn":
            return self.lstm(x).flatten(-2)
        if v == "cnn_rnn":
            return torch.cat([self.conv(x).flatten(-2), self.lstm(x).flatten(-2)], dim=-1)
        f = self.temporal(x)
        if v in TWO_STREAM:
            f = torch.cat([f, self.channel(x)], dim=-1)
        return f

    def forward(self, x):
        x = torch.as_tensor(x, dtype=DTYPE)
        return self.head(self.features(x))

    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())


def build_model(config: ModelConfig) -> GaitModel:
    return GaitModel(config)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, model: GaitModel, extra: dict | None = None) -> None:
    arrays = {name: p.detach().cpu().numpy() for name, p in model.state_dict().items()}
    meta = {"kind": "checkpoint", "config": model.config.to_dict()}
    if extra:
        meta.update(extra)
    archive.write_archive(path, arrays, meta)


def load_checkpoint(path) -> tuple[GaitModel, dict]:
    arrays, meta = archive.read_archive(path)
    if meta.get("kind") != "checkpoint":
        raise ConfigError(f"{path} is not a model checkpoint")
    model = build_model(ModelConfig.from_dict(meta["config"]))
    state = {name: torch.from_numpy(a) for name, a in arrays.items()}
    model.load_state_dict(state)
    return model, meta
