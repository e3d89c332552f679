"""Fully-connected ReLU network with a logistic output, trained by backprop."""

from dataclasses import dataclass, field

import numpy as np


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"loss became non-finite; last stable epoch was {epoch}")
        self.last_stable_epoch = epoch


@dataclass
class MlpHyper:
    hidden: tuple = (64, 64)
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 64
    epochs: int = 100
    l2: float = 0.0
    # fraction of the training set held out for early stopping (0 disables)
    validation_fraction: float = 0.1
    patience: int = 10
    seed: int = 0


def init_params(sizes, gen) -> list:
    """He-initialized ``[(W, b), ...]`` for layer widths ``sizes``."""
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = gen.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)
        params.append((w, np.zeros(fan_out)))
    return params


def forward(params, x):
    """Logits and the input to every layer."""
    acts = [x]
    h = x
    for w, b in params[:-1]:
        h = np.maximum(h @ w + b, 0.0)
        acts.append(h)
    w, b = params[-1]
    logits = (h @ w + b)[:, 0]
    return logits, acts


def loss_and_grads(params, x, t):
    """Mean binary cross-entropy for targets ``t`` in {0,1} and its gradients."""
    logits, acts = forward(params, x)
    # log(1 + e^z) - t*z, stable for either sign of z
    loss = float(np.mean(np.logaddexp(0.0, logits) - t * logits))
    delta = ((1.0 / (1.0 + np.exp(-logits))) - t)[:, None] / len(t)
    grads = [None] * len(params)
    for layer in range(len(params) - 1, -1, -1):
        w, _ = params[layer]
        a = acts[layer]
        grads[layer] = (a.T @ delta, delta.sum(axis=0))
        if layer:
            delta = (delta @ w.T) * (a > 0)
    return loss, grads


class MLP:
    kind = "mlp"

    def __init__(self, hyper: MlpHyper | None = None):
        self.hyper = hyper or MlpHyper()
        self.params = None
        self.constant = None
        self.history: list = []

    def fit(self, x, y) -> "MLP":
        x = np.asarray(x, dtype=np.float64)
        t = (np.asarray(y) > 0).astype(np.float64)
        if len(t) < 2:
            raise ValueError("need at least two training examples")
        if t.min() == t.max():
            self.constant = 1 if t[0] else -1
            return self
        hp = self.hyper
        gen = np.random.default_rng(hp.seed)
        params = init_params([x.shape[1], *hp.hidden, 1], gen)
        velocity = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
        x_val = t_val = None
        n_val = int(len(t) * hp.validation_fraction)
        if n_val > 0 and len(t) - n_val >= 2:
            order = gen.permutation(len(t))
            x_val, t_val = x[order[:n_val]], t[order[:n_val]]
            x, t = x[order[n_val:]], t[order[n_val:]]
        n = len(t)
        best, best_loss, stale = params, np.inf, 0
        for epoch in range(hp.epochs):
            order = gen.permutation(n)
            total = 0.0
            for start in range(0, n, hp.batch_size):
                idx = order[start:start + hp.batch_size]
                loss, grads = loss_and_grads(params, x[idx], t[idx])
                total += loss * len(idx)
                for i, ((w, b), (gw, gb), (vw, vb)) in enumerate(zip(params, grads, velocity)):
                    vw = hp.momentum * vw - hp.lr * (gw + hp.l2 * w)
                    vb = hp.momentum * vb - hp.lr * gb
                    velocity[i] = (vw, vb)
                    params[i] = (w + vw, b + vb)
            if not np.isfinite(total):
                raise TrainingDivergedError(epoch - 1)
            self.history.append(total / n)
            if x_val is None:
                best = params
                continue
            val_loss = float(np.mean(np.logaddexp(0.0, z := forward(params, x_val)[0]) - t_val * z))
            if val_loss < best_loss:
                best, best_loss, stale = list(params), val_loss, 0
            else:
                stale += 1
                if stale >= hp.patience:
                    break
        self.params = best
        return self

    def decision_function(self, x):
        if self.constant is not None:
            return np.full(len(x), float(self.constant))
        return forward(self.params, np.asarray(x, dtype=np.float64))[0]

    def predict(self, x):
        return np.where(self.decision_function(x) > 0, 1, -1)
