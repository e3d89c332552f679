"""Depth-limited trees, gradient boosting on logistic loss, and bagging.

Splits are restricted to a fixed set of per-feature thresholds. The data are
expanded once into a 0/1 indicator matrix ``Z[:, t] = x[:, f_t] > thr_t`` so
that the split statistics of a node reduce to one matrix product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class Binner:
    """Candidate thresholds: midpoints between distinct values, or quantiles."""

    def __init__(self, max_bins: int = 16):
        self.max_bins = max_bins
        self.features = None
        self.thresholds = None

    def fit(self, x: np.ndarray) -> "Binner":
        feats, thrs = [], []
        for f in range(x.shape[1]):
            values = np.unique(x[:, f])
            if len(values) < 2:
                continue
            if len(values) > self.max_bins:
                values = np.unique(np.quantile(x[:, f], np.linspace(0, 1, self.max_bins + 1)))
            mids = 0.5 * (values[:-1] + values[1:])
            feats.extend([f] * len(mids))
            thrs.extend(mids)
        self.features = np.asarray(feats, dtype=np.int64)
        self.thresholds = np.asarray(thrs, dtype=np.float64)
        return self

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x)[:, self.features] > self.thresholds).astype(np.float32)


@dataclass
class Tree:
    split: np.ndarray   # indicator column, -1 for leaves
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, z: np.ndarray) -> np.ndarray:
        node = np.zeros(len(z), dtype=np.int64)
        rows = np.arange(len(z))
        while True:
            split = self.split[node]
            inner = split >= 0
            if not inner.any():
                return node
            go_right = z[rows[inner], split[inner]] > 0.5
            node[inner] = np.where(go_right, self.right[node[inner]], self.left[node[inner]])

    def predict(self, z: np.ndarray) -> np.ndarray:
        return self.value[self.apply(z)]


def grow_tree(z: np.ndarray, g: np.ndarray, h: np.ndarray, max_depth: int,
              min_samples_leaf: int = 1, lam: float = 0.0) -> Tree:
    """Greedy level-wise tree maximizing ``G_L^2/(H_L+lam) + G_R^2/(H_R+lam) - G^2/(H+lam)``.

    Leaves hold ``G / (H + lam)``: with ``g = residual, h = p(1-p)`` this is a
    Newton step on logistic loss; with ``g = w*y, h = w`` it is the weighted
    class frequency and the gain is the Gini (variance) reduction.
    """
    split, left, right, value = [-1], [-1], [-1], [0.0]
    frontier = [(0, np.flatnonzero(h > 0) if np.any(h > 0) else np.arange(len(g)))]
    eps = 1e-12
    for _ in range(max_depth):
        next_frontier = []
        for node, idx in frontier:
            gs, hs = g[idx], h[idx]
            G, H = gs.sum(), hs.sum()
            value[node] = G / (H + lam + eps)
            if len(idx) < 2 * min_samples_leaf:
                continue
            zs = z[idx]
            stats = zs.T @ np.stack([gs, hs, np.ones_like(gs)], axis=1).astype(np.float32)
            g_r, h_r, c_r = stats[:, 0].astype(np.float64), stats[:, 1].astype(np.float64), stats[:, 2]
            g_l, h_l, c_l = G - g_r, H - h_r, len(idx) - c_r
            gain = g_l ** 2 / (h_l + lam + eps) + g_r ** 2 / (h_r + lam + eps) - G ** 2 / (H + lam + eps)
            gain[(c_l < min_samples_leaf) | (c_r < min_samples_leaf) | (h_l <= eps) | (h_r <= eps)] = -np.inf
            best = int(np.argmax(gain))
            if not gain[best] > 1e-12 * max(1.0, abs(G)):
                continue
            mask = zs[:, best] > 0.5
            ids = []
            for child_idx in (idx[~mask], idx[mask]):
                split.append(-1)
                left.append(-1)
                right.append(-1)
                value.append(g[child_idx].sum() / (h[child_idx].sum() + lam + eps))
                ids.append(len(value) - 1)
                next_frontier.append((len(value) - 1, child_idx))
            split[node], left[node], right[node] = best, ids[0], ids[1]
        frontier = next_frontier
        if not frontier:
            break
    return Tree(np.asarray(split), np.asarray(left), np.asarray(right), np.asarray(value))


def _sigmoid(f):
    return 0.5 * (1.0 + np.tanh(0.5 * f))


def logistic_loss(f, t) -> float:
    return float(np.mean(np.logaddexp(0.0, f) - t * f))


@dataclass
class BoostHyper:
    n_trees: int = 200
    max_depth: int = 3
    shrinkage: float = 0.1
    min_samples_leaf: int = 20
    l2: float = 1.0
    max_bins: int = 16
    seed: int = 0


class BoostedTrees:
    """Additive stagewise ensemble of regression trees on logistic loss.

    Each stage's step is halved until training loss does not increase, so the
    recorded ``train_loss`` sequence is non-increasing.
    """

    kind = "boosted"

    def __init__(self, hyper: BoostHyper | None = None):
        self.hyper = hyper or BoostHyper()
        self.binner = None
        self.trees: list = []
        self.scales: list = []
        self.f0 = 0.0
        self.train_loss: list = []
        self.constant = None

    def fit(self, x, y) -> "BoostedTrees":
        t = (np.asarray(y) > 0).astype(np.float64)
        if len(t) < 2:
            raise ValueError("need at least two training examples")
        if t.min() == t.max():
            self.constant = 1 if t[0] else -1
            return self
        hp = self.hyper
        self.binner = Binner(hp.max_bins).fit(np.asarray(x))
        z = self.binner.transform(x)
        p0 = t.mean()
        self.f0 = float(np.log(p0 / (1.0 - p0)))
        f = np.full(len(t), self.f0)
        loss = logistic_loss(f, t)
        self.train_loss = [loss]
        for _ in range(hp.n_trees):
            p = _sigmoid(f)
            tree = grow_tree(z, t - p, p * (1.0 - p), hp.max_depth, hp.min_samples_leaf, hp.l2)
            step = tree.predict(z)
            scale = hp.shrinkage
            for _ in range(30):
                new_loss = logistic_loss(f + scale * step, t)
                if new_loss <= loss:
                    break
                scale *= 0.5
            else:
                scale, new_loss = 0.0, loss
            f = f + scale * step
            loss = new_loss
            self.trees.append(tree)
            self.scales.append(scale)
            self.train_loss.append(loss)
        return self

    def decision_function(self, x):
        if self.constant is not None:
            return np.full(len(x), float(self.constant))
        z = self.binner.transform(x)
        f = np.full(len(z), self.f0)
        for tree, scale in zip(self.trees, self.scales):
            f += scale * tree.predict(z)
        return f

    def predict(self, x):
        return np.where(self.decision_function(x) > 0, 1, -1)


@dataclass
class BagHyper:
    n_trees: int = 200
    max_depth: int = 8
    min_samples_leaf: int = 5
    max_bins: int = 16
    seed: int = 0


class BaggedTrees:
    """Majority vote over classification trees grown on bootstrap resamples."""

    kind = "bagged"

    def __init__(self, hyper: BagHyper | None = None):
        self.hyper = hyper or BagHyper()
        self.binner = None
        self.trees: list = []
        self.constant = None

    def fit(self, x, y) -> "BaggedTrees":
        t = (np.asarray(y) > 0).astype(np.float64)
        if len(t) < 2:
            raise ValueError("need at least two training examples")
        if t.min() == t.max():
            self.constant = 1 if t[0] else -1
            return self
        hp = self.hyper
        gen = np.random.default_rng(hp.seed)
        self.binner = Binner(hp.max_bins).fit(np.asarray(x))
        z = self.binner.transform(x)
        n = len(t)
        for _ in range(hp.n_trees):
            # bootstrap multiplicities act as sample weights
            w = np.bincount(gen.integers(0, n, size=n), minlength=n).astype(np.float64)
            self.trees.append(grow_tree(z, w * t, w, hp.max_depth, hp.min_samples_leaf))
        return self

    def vote_fraction(self, x):
        z = self.binner.transform(x)
        votes = np.zeros(len(z))
        for tree in self.trees:
            votes += tree.predict(z) > 0.5
        return votes / len(self.trees)

    def decision_function(self, x):
        if self.constant is not None:
            return np.full(len(x), float(self.constant))
        return self.vote_fraction(x) - 0.5

    def predict(self, x):
        return np.where(self.decision_function(x) > 0, 1, -1)
