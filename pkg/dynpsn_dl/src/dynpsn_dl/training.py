"""Training loops and policies.

Convolution+recurrent models train with the adaptive-moment optimizer at
1e-4, gradient-norm clipping at 3, up to 100 epochs with early stopping
after 20 epochs without validation improvement and learning-rate halving
after 10; parameters from the best-validation epoch are kept. Graph models
train at 1e-3 for a fixed 100 epochs with plateau-driven halving (patience
5) and no early stop. Batch size is 1 everywhere (variable-size inputs are
never padded together), and each job is seeded for reproducibility within
one software stack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
from torch import nn


class DivergenceError(Exception):
    pass


@dataclass
class RegularPolicy:
    learning_rate: float = 1e-4
    clip_norm: float = 3.0
    max_epochs: int = 100
    early_stop_patience: int = 20
    lr_reduce_patience: int = 10
    lr_reduce_factor: float = 0.5


@dataclass
class GraphPolicy:
    learning_rate: float = 1e-3
    max_epochs: int = 100
    plateau_patience: int = 5
    plateau_factor: float = 0.5


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float


@dataclass
class TrainResult:
    log: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = math.inf
    stopped_early: bool = False

    def write_log(self, path) -> None:
        lines = ["epoch,train_loss,val_loss,lr"]
        lines += [f"{r.epoch},{r.train_loss:.17g},{r.val_loss:.17g},{r.lr:.17g}"
                  for r in self.log]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def _epoch_pass(model: nn.Module, samples, loss_fn, optimizer=None,
                clip_norm: float | None = None) -> float:
    training = optimizer is not None
    model.train(training)
    total = 0.0
    with torch.set_grad_enabled(training):
        for x, y in samples:
            logits = model(x)
            loss = loss_fn(logits.unsqueeze(0), torch.tensor([y]))
            if training:
                optimizer.zero_grad()
                loss.backward()
                if clip_norm is not None:
                    nn.utils.clip_grad_norm_(model.parameters(), clip_norm)
                optimizer.step()
            total += float(loss.detach())
    if not math.isfinite(total):
        raise DivergenceError("non-finite loss; aborting training")
    return total / max(1, len(samples))


def train_regular(model: nn.Module, train_samples, val_samples,
                  policy: RegularPolicy | None = None) -> TrainResult:
    """Early-stopped training; restores the best-validation parameters."""
    policy = policy or RegularPolicy()
    loss_fn = nn.CrossEntropyLoss()
    optimizer = torch.optim.Adam(model.parameters(), lr=policy.learning_rate)
    result = TrainResult()
    best_state = None
    since_best = 0
    lr = policy.learning_rate
    for epoch in range(1, policy.max_epochs + 1):
        train_loss = _epoch_pass(model, train_samples, loss_fn, optimizer,
                                 policy.clip_norm)
        val_loss = _epoch_pass(model, val_samples, loss_fn)
        result.log.append(EpochRecord(epoch, train_loss, val_loss, lr))
        if val_loss < result.best_val_loss:
            result.best_val_loss = val_loss
            result.best_epoch = epoch
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
            since_best = 0
        else:
            since_best += 1
            if since_best >= policy.early_stop_patience:
                result.stopped_early = True
                break
            if since_best % policy.lr_reduce_patience == 0:
                lr *= policy.lr_reduce_factor
                for group in optimizer.param_groups:
                    group["lr"] = lr
    if best_state is not None:
        model.load_state_dict(best_state)
    return result


def train_graph(model: nn.Module, train_samples, val_samples,
                policy: GraphPolicy | None = None) -> TrainResult:
    """Fixed-length training with plateau-driven learning-rate halving."""
    policy = policy or GraphPolicy()
    loss_fn = nn.CrossEntropyLoss()
    optimizer = torch.optim.Adam(model.parameters(), lr=policy.learning_rate)
    scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
        optimizer, factor=policy.plateau_factor, patience=policy.plateau_patience)
    result = TrainResult()
    for epoch in range(1, policy.max_epochs + 1):
        train_loss = _epoch_pass(model, train_samples, loss_fn, optimizer)
        val_loss = _epoch_pass(model, val_samples, loss_fn)
        scheduler.step(val_loss)
        result.log.append(EpochRecord(epoch, train_loss, val_loss,
                                      optimizer.param_groups[0]["lr"]))
        if val_loss < result.best_val_loss:
            result.best_val_loss = val_loss
            result.best_epoch = epoch
    return result
