"""Mini-batch training with validation-F1 driven LR halving and early stopping."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..metrics import full_metrics
from .losses import class_weights, focal_loss, weighted_ce
from .model import GraphInput, ModelConfig, ModelParams, backward, forward, init_params
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)

Example = tuple[GraphInput, int]


@dataclass
class TrainConfig:
    lr: float = 1e-3
    weight_decay: float = 1e-5
    batch_size: int = 32
    max_epochs: int = 100
    early_stop_patience: int = 6
    lr_halve_patience: int = 2
    loss: str = "weighted_ce"  # or "focal"
    focal_alpha: float = 1.0
    focal_gamma: float = 2.0
    class_weights: tuple[float, float] | None = None  # None: derive from the training split

    def __post_init__(self):
        if self.lr <= 0 or self.weight_decay < 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("lr, batch_size and max_epochs must be positive, weight_decay >= 0")
        if self.early_stop_patience < 1 or self.lr_halve_patience < 1:
            raise ValueError("patience values must be >= 1")
        if self.loss not in ("weighted_ce", "focal"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.class_weights is not None:
            self.class_weights = tuple(float(w) for w in self.class_weights)
            if min(self.class_weights) <= 0:
                raise ValueError("class weights must be positive")


class PlateauController:
    """Tracks a validation score: halves the LR after ``halve_patience``
    non-improving epochs and signals a stop after ``stop_patience``."""

    def __init__(self, lr: float, halve_patience: int = 2, stop_patience: int = 6):
        self.lr = lr
        self.halve_patience = halve_patience
        self.stop_patience = stop_patience
        self.best = -np.inf
        self.stale = 0
        self._since_halve = 0

    def step(self, score: float) -> tuple[bool, bool, bool]:
        """Returns (improved, halved, stop)."""
        if score > self.best:
            self.best = score
            self.stale = 0
            self._since_halve = 0
            return True, False, False
        self.stale += 1
        self._since_halve += 1
        halved = False
        if self._since_halve >= self.halve_patience:
            self.lr *= 0.5
            self._since_halve = 0
            halved = True
        return False, halved, self.stale >= self.stop_patience


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_f1: float
    val_auc: float
    lr: float


@dataclass
class History:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_loss", "val_f1", "val_auc", "lr"])
            for r in self.epochs:
                w.writerow([r.epoch, f"{r.train_loss:.10f}", f"{r.val_f1:.10f}", f"{r.val_auc:.10f}", repr(r.lr)])


def example_loss(probs: np.ndarray, y: int, cfg: TrainConfig, weights) -> tuple[float, np.ndarray]:
    if cfg.loss == "focal":
        return focal_loss(probs, y, cfg.focal_alpha, cfg.focal_gamma)
    return weighted_ce(probs, y, weights)


def predict(params: ModelParams, graph: GraphInput) -> tuple[int, np.ndarray]:
    trace = forward(params, graph, "eval")
    return trace.predicted_class, trace.probs


def evaluate(params: ModelParams, examples: Sequence[Example]):
    preds, labels, scores = [], [], []
    for g, y in examples:
        label, probs = predict(params, g)
        preds.append(label)
        labels.append(y)
        scores.append(probs[1])
    return full_metrics(preds, labels, scores)


def train(
    train_set: Sequence[Example],
    val_set: Sequence[Example],
    model_cfg: ModelConfig,
    train_cfg: TrainConfig | None = None,
    rng: np.random.Generator | None = None,
    params: ModelParams | None = None,
    evaluate_fn: Callable[[ModelParams, int], tuple[float, float]] | None = None,
) -> tuple[ModelParams, History]:
    """Fit the classifier and return the parameters of the best validation-F1 epoch.

    ``evaluate_fn(params, epoch) -> (val_f1, val_auc)`` replaces validation
    scoring; the controller logic is exercised through it in tests.
    """
    cfg = train_cfg or TrainConfig()
    rng = rng or np.random.default_rng(model_cfg.seed)
    labels = [y for _, y in train_set]
    if labels.count(0) == 0 or labels.count(1) == 0:
        raise ValueError("training split must contain both classes")
    weights = cfg.class_weights or class_weights(labels.count(0), labels.count(1))
    params = params or init_params(model_cfg, rng)
    state = AdamState()
    ctrl = PlateauController(cfg.lr, cfg.lr_halve_patience, cfg.early_stop_patience)
    history = History()
    best = params.copy()

    def score_val(p, epoch):
        if evaluate_fn is not None:
            return evaluate_fn(p, epoch)
        m = evaluate(p, val_set)
        return m.f1, m.auc

    for epoch in range(1, cfg.max_epochs + 1):
        lr = ctrl.lr
        order = rng.permutation(len(train_set))
        total_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            acc = {k: np.zeros_like(v) for k, v in params.tensors.items()}
            for idx in batch:
                g, y = train_set[idx]
                trace = forward(params, g, "train", rng)
                loss, d_probs = example_loss(trace.probs, y, cfg, weights)
                total_loss += loss
                grads = backward(params, trace, d_probs / len(batch))
                for k, v in grads.params.items():
                    acc[k] += v
            adam_step(params.tensors, acc, state, lr, cfg.weight_decay)
        params.check_finite()
        val_f1, val_auc = score_val(params, epoch)
        improved, halved, stop = ctrl.step(val_f1)
        history.epochs.append(EpochRecord(epoch, total_loss / len(train_set), val_f1, val_auc, lr))
        if improved:
            best = params.copy()
            history.best_epoch = epoch
        if halved:
            log.info("epoch %d: validation F1 stalled, lr -> %g", epoch, ctrl.lr)
        if stop:
            history.stopped_early = True
            log.info("epoch %d: early stop (best epoch %d)", epoch, history.best_epoch)
            break
    return best, history
