"""SGD training loop and evaluation helpers."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..graphlint import LayerGraph
from .data import Dataset
from .model import Model
from .ops import softmax_cross_entropy

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"loss became {loss} in epoch {epoch}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 50
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 5e-4
    seed: int = 7

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate <= 0 or not 0 <= self.momentum < 1 or self.weight_decay < 0:
            raise ValueError("invalid optimizer settings")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class History:
    loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)


class SGD:
    """Momentum SGD; weight decay applies to conv and linear weights only."""

    def __init__(self, model: Model, lr: float, momentum: float, weight_decay: float):
        self.model = model
        self.lr, self.momentum, self.weight_decay = lr, momentum, weight_decay
        self.velocity = {n: {k: np.zeros_like(v) for k, v in ps.items()} for n, ps in model.params.items()}

    def step(self, grads):
        for nid, ps in self.model.params.items():
            for name, p in ps.items():
                g = grads[nid][name]
                if name == "weight" and self.weight_decay:
                    g = g + self.weight_decay * p
                v = self.velocity[nid][name]
                v *= self.momentum
                v += g
                p -= self.lr * v


def train_step(model: Model, opt: SGD, x, y) -> tuple[float, int]:
    logits, tape = model.forward(x, keep=True)
    loss, dlogits = softmax_cross_entropy(logits, y)
    grads, _ = model.backward(dlogits, tape)
    opt.step(grads)
    return loss, int((logits.argmax(axis=1) == y).sum())


def train(graph: LayerGraph, config: TrainConfig, data: Dataset, model: Model | None = None) -> tuple[Model, History]:
    """Train from a seeded initialization; two calls with the same inputs give identical parameters.

    One generator seeded from ``config.seed`` draws the initial weights and
    then every epoch's shuffle.
    """
    rng = np.random.default_rng(config.seed)
    if model is None:
        model = Model(graph, rng=rng)
    opt = SGD(model, config.learning_rate, config.momentum, config.weight_decay)
    hist = History()
    n = len(data)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total, correct = 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, hits = train_step(model, opt, data.images[idx], data.labels[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch, loss)
            total += loss * len(idx)
            correct += hits
        hist.loss.append(total / n)
        hist.train_accuracy.append(correct / n)
        log.info("epoch %d loss %.4f acc %.4f", epoch, hist.loss[-1], hist.train_accuracy[-1])
    return model, hist


def accuracy(model: Model, data: Dataset, images=None) -> float:
    x = data.images if images is None else images
    pred = model.predict(x).argmax(axis=1)
    return float((pred == data.labels).mean())


def mean_loss(model: Model, data: Dataset) -> float:
    loss, _ = softmax_cross_entropy(model.predict(data.images), data.labels)
    return loss
