"""Gradient-boosted regression trees with logistic loss on ``(t, x, s)``.

The learner is second-order boosting in the XGBoost style: each round fits
a depth-limited tree to the per-row gradient and hessian of the log loss,
scores splits by the regularized gain

    GL^2 / (HL + lam) + GR^2 / (HR + lam) - G^2 / (H + lam)

and sets leaf weights to ``-G / (H + lam)`` shrunk by the learning rate.

All three features are small-range integers and every tree only splits on
them, so rows sharing a state always share a prediction.  Training
therefore works on the unique states with their row count and win count,
which gives exactly the row-level gradients and hessians summed per state.
Split search is exact and greedy over the observed feature values, grown
level by level with one ``bincount`` per feature.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .datagen import PlayDataset

__all__ = [
    "BoostConfig",
    "Tree",
    "BoostedModel",
    "DEFAULT_GRID",
    "logistic_loss",
    "loss_grad_hess",
    "split_train_validation",
    "aggregate_states",
    "boost",
    "fit",
    "fit_tuned",
    "tune",
    "predict",
    "FixedRounds",
    "fit_estimator",
    "save_model",
    "load_model",
]

FEATURES = ("t", "x", "s")
_EPS = 1e-6
_MAX_RAW = 30.0


@dataclass(frozen=True)
class BoostConfig:
    max_depth: int = 4
    learning_rate: float = 0.1
    max_rounds: int = 1000
    early_stopping_rounds: int = 50
    min_child_weight: float = 1.0
    subsample: float = 1.0
    colsample: float = 1.0
    reg_lambda: float = 1.0
    min_split_gain: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.early_stopping_rounds < 1:
            raise ValueError("early_stopping_rounds must be >= 1")
        if not 0.0 < self.subsample <= 1.0 or not 0.0 < self.colsample <= 1.0:
            raise ValueError("subsample fractions must be in (0, 1]")
        if self.reg_lambda < 0 or self.min_child_weight < 0 or self.min_split_gain < 0:
            raise ValueError("penalties must be non-negative")


DEFAULT_GRID: tuple[BoostConfig, ...] = tuple(
    BoostConfig(max_depth=d, learning_rate=lr)
    for d in (3, 4, 5)
    for lr in (0.05, 0.1)
)


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def logistic_loss(y, f):
    """Per-row log loss ``log(1 + e^f) - y f`` of a raw score ``f``."""
    f = np.asarray(f, dtype=float)
    return np.logaddexp(0.0, f) - np.asarray(y) * f


def loss_grad_hess(y, f):
    """First and second derivative of :func:`logistic_loss` in ``f``."""
    p = sigmoid(f)
    return p - np.asarray(y), p * (1.0 - p)


@dataclass(frozen=True)
class Tree:
    """Flat binary tree; ``feature == -1`` marks a leaf.

    Internal nodes send ``X[:, feature] < threshold`` to ``left``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def depth(self) -> int:
        d = np.zeros(len(self.feature), dtype=int)
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                d[self.left[i]] = d[self.right[i]] = d[i] + 1
        return int(d.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        for _ in range(len(self.feature)):
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                break
            idx = np.flatnonzero(inner)
            go_left = X[idx, f[idx]] < self.threshold[node[idx]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=np.float64),
        )


@dataclass
class BoostedModel:
    """Additive ensemble; raw score is ``base_score + sum of tree outputs``."""

    base_score: float
    trees: list[Tree]
    config: BoostConfig
    seed: int | None = None
    metadata: dict = field(default_factory=dict)

    def raw_score(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64).reshape(-1, 3)
        # predict per unique state, then scatter back
        U, inv = np.unique(X, axis=0, return_inverse=True)
        f = np.full(len(U), self.base_score)
        for tree in self.trees:
            f += tree.predict(U)
        return f[inv.reshape(-1)]

    def predict_proba(self, X) -> np.ndarray:
        # keeps the output strictly inside (0, 1) in floating point
        return sigmoid(np.clip(self.raw_score(X), -_MAX_RAW, _MAX_RAW))

    def predict_dataset(self, data: PlayDataset) -> np.ndarray:
        return self.predict_proba(data.features)


def predict(model: BoostedModel, t, x, s):
    """Win probability at ``(t, x, s)``; scalars in, float out."""
    p = model.predict_proba(np.column_stack([np.atleast_1d(t), np.atleast_1d(x), np.atleast_1d(s)]))
    return float(p[0]) if np.ndim(t) == 0 else p


def split_train_validation(data: PlayDataset, rng: np.random.Generator):
    """Assign half of the games (not rows) to a validation set.

    The validation side gets ``round(G / 2)`` games, rounding half up.
    """
    games = np.unique(data.game_id)
    if len(games) < 2:
        raise ValueError("need at least two games to split off a validation set")
    n_val = int(math.floor(len(games) / 2 + 0.5))
    perm = rng.permutation(len(games))
    val_games = games[np.sort(perm[:n_val])]
    in_val = np.isin(data.game_id, val_games)
    return data.take(np.flatnonzero(~in_val)), data.take(np.flatnonzero(in_val))


def aggregate_states(X: np.ndarray, y: np.ndarray):
    """Unique states (sorted), row count and win count per state."""
    U, inv = np.unique(np.asarray(X), axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    n = np.bincount(inv, minlength=len(U)).astype(np.float64)
    wins = np.bincount(inv, weights=np.asarray(y, dtype=np.float64), minlength=len(U))
    return U.astype(np.float64), n, wins


def _aggregate_loss(f, n, wins) -> float:
    return float(np.sum(n * np.logaddexp(0.0, f) - wins * f) / np.sum(n))


class _FeatureCodes:
    """Per-feature rank codes of the training states."""

    def __init__(self, U: np.ndarray):
        self.values = []
        self.codes = []
        for j in range(U.shape[1]):
            v, c = np.unique(U[:, j], return_inverse=True)
            self.values.append(v)
            self.codes.append(c.reshape(-1))


def _grow_tree(codes: _FeatureCodes, g, h, cfg: BoostConfig, features) -> tuple[Tree, np.ndarray]:
    """Grow one tree on aggregated gradients; also returns each state's leaf."""
    lam = cfg.reg_lambda
    m = len(g)
    feat, thr, left, right = [-1], [0.0], [-1], [-1]
    node_of = np.zeros(m, dtype=np.int64)
    frontier = np.array([0])
    for _ in range(cfg.max_depth):
        A = len(frontier)
        local = np.full(len(feat), -1, dtype=np.int64)
        local[frontier] = np.arange(A)
        loc = local[node_of]
        live = loc >= 0
        G_tot = np.bincount(loc[live], weights=g[live], minlength=A)
        H_tot = np.bincount(loc[live], weights=h[live], minlength=A)
        parent = G_tot**2 / (H_tot + lam)
        best_gain = np.full(A, -np.inf)
        best_feat = np.full(A, -1)
        best_code = np.zeros(A, dtype=np.int64)
        for j in features:
            V = len(codes.values[j])
            if V < 2:
                continue
            key = loc[live] * V + codes.codes[j][live]
            GL = np.bincount(key, weights=g[live], minlength=A * V).reshape(A, V).cumsum(axis=1)[:, :-1]
            HL = np.bincount(key, weights=h[live], minlength=A * V).reshape(A, V).cumsum(axis=1)[:, :-1]
            GR = G_tot[:, None] - GL
            HR = H_tot[:, None] - HL
            gain = GL**2 / (HL + lam) + GR**2 / (HR + lam) - parent[:, None]
            ok = (HL >= cfg.min_child_weight) & (HR >= cfg.min_child_weight)
            gain = np.where(ok, gain, -np.inf)
            k = np.argmax(gain, axis=1)
            gk = gain[np.arange(A), k]
            better = gk > best_gain
            best_gain[better] = gk[better]
            best_feat[better] = j
            best_code[better] = k[better]
        # gain is twice the loss reduction in the usual convention
        split = (best_feat >= 0) & (0.5 * best_gain > cfg.min_split_gain + 1e-12)
        if not split.any():
            break
        new_frontier = []
        child_of = {}
        for a in np.flatnonzero(split):
            node = int(frontier[a])
            j = int(best_feat[a])
            vals = codes.values[j]
            c = int(best_code[a])
            feat[node] = j
            thr[node] = 0.5 * (vals[c] + vals[c + 1])
            lo, hi = len(feat), len(feat) + 1
            feat += [-1, -1]
            thr += [0.0, 0.0]
            left += [-1, -1]
            right += [-1, -1]
            left[node], right[node] = lo, hi
            new_frontier += [lo, hi]
            child_of[node] = (j, c, lo, hi)
        for node, (j, c, lo, hi) in child_of.items():
            members = node_of == node
            node_of[members] = np.where(codes.codes[j][members] <= c, lo, hi)
        frontier = np.array(new_frontier)
    n_nodes = len(feat)
    G_leaf = np.bincount(node_of, weights=g, minlength=n_nodes)
    H_leaf = np.bincount(node_of, weights=h, minlength=n_nodes)
    feature = np.asarray(feat, dtype=np.int64)
    value = np.where(feature < 0, -cfg.learning_rate * G_leaf / (H_leaf + lam), 0.0)
    tree = Tree(feature, np.asarray(thr), np.asarray(left, dtype=np.int64),
                np.asarray(right, dtype=np.int64), value)
    return tree, node_of


def _constant_model(rate: float, cfg: BoostConfig, seed, n_rows: int) -> BoostedModel:
    rate = min(max(rate, _EPS), 1.0 - _EPS)
    return BoostedModel(
        math.log(rate / (1.0 - rate)), [], cfg, seed,
        {"degenerate": True, "rounds": 0, "best_round": 0, "n_train": n_rows,
         "train_loss": [], "valid_loss": []},
    )


def boost(
    train: PlayDataset, valid: PlayDataset | None, config: BoostConfig,
    rng: np.random.Generator, seed: int | None = None,
) -> BoostedModel:
    """Boost on ``train``, early-stopping on ``valid`` when given.

    Returns the model truncated at the round with the lowest validation
    loss (round 0 is the constant base model).
    """
    if len(train) == 0:
        raise ValueError("empty training set")
    U, n, wins = aggregate_states(train.features, train.y)
    rate = float(wins.sum() / n.sum())
    if wins.sum() == 0 or wins.sum() == n.sum():
        return _constant_model(rate, config, seed, len(train))
    base = math.log(rate / (1.0 - rate))
    codes = _FeatureCodes(U)
    f = np.full(len(U), base)
    if valid is not None and len(valid):
        Uv, nv, wv = aggregate_states(valid.features, valid.y)
        fv = np.full(len(Uv), base)
        valid_loss = [_aggregate_loss(fv, nv, wv)]
    else:
        valid_loss = None
    train_loss = [_aggregate_loss(f, n, wins)]
    trees: list[Tree] = []
    best, best_round = (valid_loss[0] if valid_loss else math.inf), 0
    all_features = list(range(3))
    for r in range(1, config.max_rounds + 1):
        p = sigmoid(f)
        if config.subsample < 1.0:
            n_r = rng.binomial(n.astype(np.int64), config.subsample).astype(np.float64)
            w_r = rng.hypergeometric(wins.astype(np.int64), (n - wins).astype(np.int64),
                                     n_r.astype(np.int64)).astype(np.float64)
        else:
            n_r, w_r = n, wins
        g = n_r * p - w_r
        h = n_r * p * (1.0 - p)
        if config.colsample < 1.0:
            k = max(1, int(round(config.colsample * 3)))
            features = sorted(rng.choice(3, size=k, replace=False).tolist())
        else:
            features = all_features
        tree, node_of = _grow_tree(codes, g, h, config, features)
        trees.append(tree)
        f = f + tree.value[node_of]
        train_loss.append(_aggregate_loss(f, n, wins))
        if valid_loss is not None:
            fv = fv + tree.predict(Uv)
            valid_loss.append(_aggregate_loss(fv, nv, wv))
            if valid_loss[-1] < best:
                best, best_round = valid_loss[-1], r
            elif r - best_round >= config.early_stopping_rounds:
                break
        else:
            best_round = r
    meta = {
        "degenerate": False,
        "rounds": len(trees),
        "best_round": best_round,
        "n_train": len(train),
        "n_valid": 0 if valid is None else len(valid),
        "train_loss": train_loss,
        "valid_loss": valid_loss or [],
    }
    return BoostedModel(base, trees[:best_round], config, seed, meta)


def fit(data: PlayDataset, config: BoostConfig, rng: np.random.Generator,
        seed: int | None = None) -> BoostedModel:
    """Split games in half, boost on one half, early-stop on the other."""
    if data.n_games < 2:
        raise ValueError("need at least two games to split off a validation set")
    train, valid = split_train_validation(data, rng)
    return boost(train, valid, config, rng, seed)


def selection_key(model: BoostedModel):
    """``(validation loss at the kept round, rounds kept, depth)``; lower is better."""
    loss = model.metadata["valid_loss"]
    vl = loss[model.metadata["best_round"]] if loss else math.inf
    return (vl, model.metadata["best_round"], model.config.max_depth)


def fit_tuned(data: PlayDataset, grid: Sequence[BoostConfig], rng: np.random.Generator,
              seed: int | None = None) -> BoostedModel:
    """Fit every grid entry on one shared split; keep the best validation model.

    Ties on validation loss go to fewer boosting rounds, then smaller depth,
    then earlier grid position.
    """
    if not grid:
        raise ValueError("empty hyperparameter grid")
    if data.n_games < 2:
        raise ValueError("need at least two games to split off a validation set")
    train, valid = split_train_validation(data, rng)
    seeds = rng.integers(0, 2**63, size=len(grid))
    models = [
        boost(train, valid, cfg, np.random.default_rng(int(sd)), seed)
        for cfg, sd in zip(grid, seeds)
    ]
    best = min(range(len(models)), key=lambda i: (*selection_key(models[i]), i))
    chosen = models[best]
    chosen.metadata["grid_losses"] = [selection_key(m)[0] for m in models]
    return chosen


def tune(data: PlayDataset, grid: Sequence[BoostConfig], rng: np.random.Generator) -> BoostConfig:
    """Grid entry with the lowest validation log loss (see :func:`fit_tuned`)."""
    if len(grid) == 1:
        return grid[0]
    return fit_tuned(data, grid, rng).config


def model_to_dict(model: BoostedModel) -> dict:
    return {
        "format": "rwfootball.BoostedModel",
        "version": 1,
        "features": list(FEATURES),
        "base_score": model.base_score,
        "config": asdict(model.config),
        "seed": model.seed,
        "metadata": model.metadata,
        "trees": [t.to_dict() for t in model.trees],
    }


def model_from_dict(d: dict) -> BoostedModel:
    if d.get("format") != "rwfootball.BoostedModel":
        raise ValueError("not a serialized BoostedModel")
    return BoostedModel(
        float(d["base_score"]),
        [Tree.from_dict(t) for t in d["trees"]],
        BoostConfig(**d["config"]),
        d.get("seed"),
        d.get("metadata", {}),
    )


def save_model(model: BoostedModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path) -> BoostedModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def with_overrides(config: BoostConfig, **kw) -> BoostConfig:
    return replace(config, **kw)


@dataclass(frozen=True)
class FixedRounds:
    """Boost on all rows for exactly ``config.max_rounds`` rounds, no validation split."""

    config: BoostConfig

    @classmethod
    def from_model(cls, model: BoostedModel) -> "FixedRounds":
        rounds = max(1, int(model.metadata.get("best_round", 0)))
        return cls(replace(model.config, max_rounds=rounds))


def fit_estimator(data: PlayDataset, estimator, rng: np.random.Generator,
                  seed: int | None = None) -> BoostedModel:
    """Fit a :class:`BoostConfig` or :class:`FixedRounds`, or tune over a sequence of configs."""
    if isinstance(estimator, FixedRounds):
        return boost(data, None, estimator.config, rng, seed)
    if isinstance(estimator, BoostConfig):
        return fit(data, estimator, rng, seed)
    return fit_tuned(data, list(estimator), rng, seed)


def estimator_to_list(estimator) -> list[dict]:
    if isinstance(estimator, FixedRounds):
        return [{**asdict(estimator.config), "fixed_rounds": True}]
    cfgs = [estimator] if isinstance(estimator, BoostConfig) else list(estimator)
    return [asdict(c) for c in cfgs]
