import math

import numpy as np
import pytest
import torch
import torch.nn as nn

from gaitformer.blocks import build_model
from gaitformer.data import DatasetSplit, SensorWindow
from gaitformer.errors import ContractError, DivergenceError
from gaitformer.harness import tiny_config
from gaitformer.numeric import DTYPE, Affine, make_generator
from gaitformer.training import TrainState, adam_step, clip_grad_norm, cross_entropy, train_loop, write_metrics_csv


def test_cross_entropy_examples():
    assert cross_entropy(torch.zeros(2, 4, dtype=DTYPE), torch.tensor([0, 3])).item() == pytest.approx(math.log(4), abs=1e-15)
    huge = torch.tensor([[1000.0, 0.0, 0.0]], dtype=DTYPE)
    assert cross_entropy(huge, torch.tensor([0])).item() <= 1e-12
    logits = torch.randn(3, 5, generator=make_generator(0), dtype=DTYPE)
    labels = [4, 0, 2]
    naive = 0.0
    for row, y in zip(logits.tolist(), labels):
        p = [math.exp(v) for v in row]
        naive -= math.log(p[y] / sum(p))
    assert cross_entropy(logits, torch.tensor(labels)).item() == pytest.approx(naive / 3, abs=1e-10)


def test_cross_entropy_label_range():
    with pytest.raises(ContractError):
        cross_entropy(torch.zeros(2, 3, dtype=DTYPE), torch.tensor([0, 3]))
    with pytest.raises(ContractError):
        cross_entropy(torch.zeros(1, 3, dtype=DTYPE), torch.tensor([-1]))


def _param(values):
    p = nn.Parameter(torch.tensor(values, dtype=DTYPE))
    return p


def test_adam_zero_gradient_leaves_parameters():
    p = _param([1.0, -2.0])
    p.grad = torch.zeros(2, dtype=DTYPE)
    adam_step([("p", p)], TrainState())
    assert p.tolist() == [1.0, -2.0]


def test_adam_first_step_closed_form():
    p = _param([1.0])
    p.grad = torch.ones(1, dtype=DTYPE)
    adam_step([("p", p)], TrainState(lr=1e-3))
    # m_hat = 1, v_hat = 1 at t = 1
    assert p.item() == pytest.approx(1.0 - 1e-3 / (1.0 + 1e-8), abs=1e-15)
    assert p.grad.item() == 0.0


def test_adam_constant_gradient_step_tends_to_lr():
    p = _param([0.0])
    state = TrainState(lr=0.01)
    for _ in range(500):
        before = p.item()
        p.grad = torch.full((1,), 3.7, dtype=DTYPE)
        adam_step([("p", p)], state)
    assert before - p.item() == pytest.approx(0.01, rel=1e-6)


def test_clip_grad_norm():
    a, b = _param([0.0, 0.0]), _param([0.0])
    a.grad = torch.tensor([3.0, 0.0], dtype=DTYPE)
    b.grad = torch.tensor([4.0], dtype=DTYPE)
    assert clip_grad_norm([a, b], 1.0) == pytest.approx(5.0)
    assert math.sqrt(a.grad.pow(2).sum() + b.grad.pow(2).sum()) == pytest.approx(1.0)


class Linear(nn.Module):
    def __init__(self, n_in, n_out, seed=0):
        super().__init__()
        self.fc = Affine(n_in, n_out, make_generator(seed))

    def forward(self, x):
        return self.fc(torch.as_tensor(x, dtype=DTYPE).flatten(-2))


def _separable_split(n=64, seed=0):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=(2, 3))
    windows = []
    for i in range(n):
        x = rng.normal(size=(2, 3))
        label = int((x * w).sum() > 0)
        x += (0.5 if label else -0.5) * w  # push away from the boundary
        windows.append(SensorWindow(x, label, i))
    return DatasetSplit(windows[:48], windows[48:], "synthetic")


def test_linearly_separable_toy_reaches_full_train_accuracy():
    split = _separable_split()
    split = DatasetSplit(split.development, [], "synthetic")
    model = Linear(6, 2)
    res = train_loop(model, split, epochs=100, batch_size=24, seed=0, lr=0.05)  # 200 steps
    assert res.best_epoch == 100
    x = torch.tensor(np.stack([w.values for w in split.development]))
    y = torch.tensor([w.subject for w in split.development])
    model.eval()
    assert (model(x).argmax(-1) == y).all()
    assert res.metrics[-1].train_acc == 1.0


def test_zero_epochs_returns_initial_model():
    model = Linear(6, 2)
    before = {k: v.clone() for k, v in model.state_dict().items()}
    res = train_loop(model, _separable_split(), epochs=0)
    assert res.metrics == [] and res.best_epoch is None
    for k, v in model.state_dict().items():
        assert torch.equal(v, before[k])


def _window_split(cfg, n=24, seed=0):
    rng = np.random.default_rng(seed)
    ws = [SensorWindow(rng.normal(size=(cfg.channels, cfg.seq_len)), i % cfg.num_subjects, i) for i in range(n)]
    return DatasetSplit(ws[: n - 4], ws[n - 4:], "synthetic")


def test_training_is_bitwise_deterministic(tmp_path):
    cfg = tiny_config("proposed", seed=3)
    split = _window_split(cfg)
    runs = []
    for i in range(2):
        model = build_model(cfg)
        res = train_loop(model, split, epochs=2, batch_size=8, seed=5, checkpoint=tmp_path / f"m{i}.ckpt")
        write_metrics_csv(tmp_path / f"m{i}.csv", res.metrics)
        runs.append(model.state_dict())
    for k in runs[0]:
        assert torch.equal(runs[0][k], runs[1][k])
    assert (tmp_path / "m0.ckpt").read_bytes() == (tmp_path / "m1.ckpt").read_bytes()
    assert (tmp_path / "m0.csv").read_bytes() == (tmp_path / "m1.csv").read_bytes()


def test_single_window_overfits():
    cfg = tiny_config("vanilla", seed=1)
    model = build_model(cfg)
    x = torch.randn(1, cfg.channels, cfg.seq_len, generator=make_generator(2), dtype=DTYPE)
    y = torch.tensor([1])
    state = TrainState(lr=1e-2)
    named = list(model.named_parameters())
    model.train()
    for _ in range(60):
        loss = cross_entropy(model(x), y)
        loss.backward()
        adam_step(named, state)
    model.eval()
    assert cross_entropy(model(x), y).item() < 0.05


class NanModel(nn.Module):
    def __init__(self):
        super().__init__()
        self.w = nn.Parameter(torch.tensor(float("nan"), dtype=DTYPE))

    def forward(self, x):
        return torch.as_tensor(x, dtype=DTYPE).flatten(-2)[..., :2] * self.w


def test_divergence_names_the_step():
    with pytest.raises(DivergenceError, match="step 1"):
        train_loop(NanModel(), _separable_split(), epochs=1)


def test_best_epoch_is_restored():
    split = _separable_split(seed=3)
    model = Linear(6, 2, seed=1)
    res = train_loop(model, split, epochs=5, batch_size=8, seed=1, lr=0.05)
    best = max(m.eval_acc for m in res.metrics)
    assert res.best_eval_acc == best
    assert res.metrics[res.best_epoch - 1].eval_acc == best
    x = np.stack([w.values for w in split.evaluation])
    y = np.array([w.subject for w in split.evaluation])
    model.eval()
    acc = float((model(torch.tensor(x)).argmax(-1).numpy() == y).mean())
    assert acc == best


def test_empty_development_is_a_contract_error():
    with pytest.raises(ContractError):
        train_loop(Linear(6, 2), DatasetSplit([], [], "synthetic"), epochs=1)
