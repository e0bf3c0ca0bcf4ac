"""Cross-entropy training with Adam."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .data import DatasetSplit, stack_windows
from .errors import ContractError, DivergenceError
from .evaluation import rank_k_accuracy

log = logging.getLogger(__name__)


def cross_entropy(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean negative log-likelihood of ``labels`` under ``softmax(logits)``, in log space."""
    labels = torch.as_tensor(labels, dtype=torch.long)
    n_classes = logits.shape[-1]
    if labels.numel() and (int(labels.min()) < 0 or int(labels.max()) >= n_classes):
        raise ContractError(f"labels must lie in [0, {n_classes}), got range [{int(labels.min())}, {int(labels.max())}]")
    log_z = torch.logsumexp(logits, dim=-1)
    picked = logits.gather(-1, labels.unsqueeze(-1)).squeeze(-1)
    return (log_z - picked).mean()


@dataclass
class TrainState:
    lr: float = 1e-3
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def clip_grad_norm(params, max_norm: float) -> float:
    grads = [p.grad for p in params if p.grad is not None]
    if not grads:
        return 0.0
    norm = math.sqrt(sum(float((g * g).sum()) for g in grads))
    if norm > max_norm:
        for g in grads:
            g.mul_(max_norm / norm)
    return norm


@torch.no_grad()
def adam_step(named_params, state: TrainState, lr: float | None = None, beta1=0.9, beta2=0.999, eps=1e-8):
    """Bias-corrected Adam update, then zero every gradient."""
    lr = state.lr if lr is None else lr
    state.step += 1
    t = state.step
    for name, p in named_params:
        if p.grad is None:
            continue
        g = p.grad
        m = state.m.setdefault(name, torch.zeros_like(p))
        v = state.v.setdefault(name, torch.zeros_like(p))
        m.mul_(beta1).add_(g, alpha=1.0 - beta1)
        v.mul_(beta2).addcmul_(g, g, value=1.0 - beta2)
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        p.sub_(lr * m_hat / (torch.sqrt(v_hat) + eps))
        g.zero_()


@torch.no_grad()
def predict(model, x: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Inference-mode logits for ``x [N, c, L]``."""
    was_training = model.training
    model.eval()
    out = [model(torch.from_numpy(x[i : i + batch_size])).numpy() for i in range(0, len(x), batch_size)]
    model.train(was_training)
    return np.concatenate(out) if out else np.zeros((0, 0))


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    eval_acc: float


@dataclass
class TrainResult:
    model: torch.nn.Module
    metrics: list[EpochMetrics]
    best_epoch: int | None
    best_eval_acc: float | None


def train_loop(
    model,
    split: DatasetSplit,
    epochs: int,
    batch_size: int = 32,
    seed: int = 0,
    lr: float = 1e-3,
    max_batches: int | None = None,
    clip: float | None = 5.0,
    checkpoint=None,
) -> TrainResult:
    """Train on ``split.development``, scoring Rank-1 on ``split.evaluation`` after every epoch.

    Each epoch shuffles the development windows with a generator seeded from
    ``seed``; ``max_batches`` caps how many mini-batches of that shuffle are
    used.  On return the model holds the parameters of the best-scoring epoch,
    which are also written to ``checkpoint`` when a path is given.  With no
    evaluation windows the final epoch is kept.
    """
    from .blocks import save_checkpoint

    if not split.development:
        raise ContractError("training split has no development windows")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    x_dev, y_dev = stack_windows(split.development)
    x_ev, y_ev = stack_windows(split.evaluation)
    named = list(model.named_parameters())
    params = [p for _, p in named]
    state = TrainState(lr=lr)
    metrics: list[EpochMetrics] = []
    best_acc, best_epoch, best_state = -1.0, None, None

    for epoch in range(1, epochs + 1):
        model.train()
        order = rng.permutation(len(x_dev))
        if max_batches is not None:
            order = order[: max_batches * batch_size]
        total_loss, correct, seen = 0.0, 0, 0
        for start in range(0, len(order), batch_size):
            idx = np.sort(order[start : start + batch_size])
            labels = torch.from_numpy(y_dev[idx])
            logits = model(torch.from_numpy(x_dev[idx]))
            loss = cross_entropy(logits, labels)
            if not torch.isfinite(loss):
                raise DivergenceError(f"loss became {loss.item()} at step {state.step + 1} (epoch {epoch})")
            loss.backward()
            if clip is not None:
                clip_grad_norm(params, clip)
            adam_step(named, state)
            total_loss += loss.item() * len(idx)
            correct += int((logits.argmax(-1) == labels).sum())
            seen += len(idx)
        eval_acc = rank_k_accuracy(predict(model, x_ev), y_ev, 1) if len(x_ev) else float("nan")
        metrics.append(EpochMetrics(epoch, total_loss / seen, correct / seen, eval_acc))
        log.info("epoch %d loss %.4f train %.4f eval %.4f", epoch, total_loss / seen, correct / seen, eval_acc)
        # without evaluation windows the latest epoch is kept
        if best_state is None or eval_acc > best_acc or math.isnan(eval_acc):
            best_acc, best_epoch = eval_acc, epoch
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
            if checkpoint is not None:
                save_checkpoint(checkpoint, model, {"epoch": epoch, "eval_acc": eval_acc})

    if best_state is not None:
        model.load_state_dict(best_state)
    return TrainResult(model, metrics, best_epoch, best_acc if best_state is not None else None)


def write_metrics_csv(path, metrics: list[EpochMetrics]) -> None:
    with open(path, "w", newline="") as f:
        out = csv.writer(f)
        out.writerow(["epoch", "train_loss", "train_acc", "eval_acc"])
        for m in metrics:
            out.writerow([m.epoch, repr(m.train_loss), repr(m.train_acc), repr(m.eval_acc)])
