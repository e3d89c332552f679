"""Linear large-margin classifier trained by stochastic subgradient descent."""

from dataclasses import dataclass

import numpy as np


@dataclass
class LinearHyper:
    lr: float = 0.1
    l2: float = 1e-4
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0


class LinearSVM:
    """Hinge loss + L2, step size ``lr / sqrt(t)``, mini-batch subgradients."""

    kind = "linear"

    def __init__(self, hyper: LinearHyper | None = None):
        self.hyper = hyper or LinearHyper()
        self.w = None
        self.b = 0.0
        self.constant = None

    def fit(self, x: np.ndarray, y: np.ndarray) -> "LinearSVM":
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if len(y) < 2:
            raise ValueError("need at least two training examples")
        classes = np.unique(y)
        if len(classes) == 1:
            self.constant = int(classes[0])
            return self
        hp = self.hyper
        gen = np.random.default_rng(hp.seed)
        n, d = x.shape
        w, b, t = np.zeros(d), 0.0, 0
        for _ in range(hp.epochs):
            order = gen.permutation(n)
            for start in range(0, n, hp.batch_size):
                idx = order[start:start + hp.batch_size]
                t += 1
                xb, yb = x[idx], y[idx]
                active = yb * (xb @ w + b) < 1.0
                coef = (yb * active) / len(idx)
                step = hp.lr / np.sqrt(t)
                w -= step * (hp.l2 * w - coef @ xb)
                b += step * coef.sum()
        self.w, self.b = w, b
        return self

    def decision_function(self, x):
        if self.constant is not None:
            return np.full(len(x), float(self.constant))
        return np.asarray(x, dtype=np.float64) @ self.w + self.b

    def predict(self, x):
        return np.where(self.decision_function(x) > 0, 1, -1)
