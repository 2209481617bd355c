"""Gradient-boosted trees trained on the focal loss.

Trees are grown level by level on binned features with Newton leaf values
``-G / (H + lambda)``.  Numeric features are cut at observed values (so any
strictly increasing transform of a feature leaves the model unchanged);
categorical features get native subset splits, ordering categories by
their gradient ratio inside each node.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np
import pandas as pd
from scipy.special import expit

from .focal import newton_hessian

MODEL_FORMAT = "twofold.boosted"
MODEL_VERSION = 1


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class BoostingParams:
    n_rounds: int = 200
    learning_rate: float = 0.1
    max_depth: int = 6
    focal_gamma: float = 2.0
    reg_lambda: float = 1.0
    min_child_weight: float = 1e-3
    min_samples_leaf: int = 5
    max_bins: int = 255
    subsample: float = 1.0
    min_hessian: float = 1e-6

    def __post_init__(self):
        if self.n_rounds < 1 or self.max_depth < 1:
            raise ValueError("n_rounds and max_depth must be positive")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.focal_gamma < 0:
            raise ValueError("focal_gamma must be non-negative")
        if not 2 <= self.max_bins <= 255:
            raise ValueError("max_bins must lie in [2, 255]")
        if not 0 < self.subsample <= 1:
            raise ValueError("subsample must lie in (0, 1]")


def schema_hash(features: Sequence[str], categorical: Sequence[str]) -> str:
    text = json.dumps({"features": list(features), "categorical": sorted(categorical)})
    return hashlib.sha256(text.encode()).hexdigest()[:16]


class Binner:
    """Map raw feature values to small integer codes.

    Numeric cuts are actual training values picked by rank; a value goes to
    bin ``b`` when it is greater than ``b`` cuts.  Categorical codes are the
    category values themselves; unseen categories share one extra code.
    """

    def __init__(self, max_bins: int = 255):
        self.max_bins = max_bins

    def fit(self, X: np.ndarray, is_categorical: Sequence[bool]) -> "Binner":
        self.is_categorical = list(map(bool, is_categorical))
        self.cuts: list[list[float]] = []
        self.categories: list[list[int]] = []
        for j, cat in enumerate(self.is_categorical):
            col = X[:, j]
            if cat:
                values = np.unique(col.astype(np.int64))
                if len(values) > self.max_bins - 1:
                    raise ValueError(f"categorical feature {j} has too many levels")
                self.categories.append(values.tolist())
                self.cuts.append([])
            else:
                uniq = np.unique(col)
                if len(uniq) > self.max_bins:
                    pos = np.linspace(0, len(uniq) - 1, self.max_bins + 1)[1:-1]
                    uniq = uniq[np.unique(pos.astype(int))]
                    self.cuts.append(uniq.tolist())
                else:
                    self.cuts.append(uniq[:-1].tolist())
                self.categories.append([])
        return self

    def n_bins(self, j: int) -> int:
        if self.is_categorical[j]:
            return len(self.categories[j]) + 1
        return len(self.cuts[j]) + 1

    def transform(self, X: np.ndarray) -> np.ndarray:
        codes = np.empty(X.shape, dtype=np.uint8)
        for j, cat in enumerate(self.is_categorical):
            col = X[:, j]
            if cat:
                levels = np.asarray(self.categories[j], dtype=np.int64)
                ints = col.astype(np.int64)
                pos = np.searchsorted(levels, ints)
                pos_c = np.minimum(pos, max(len(levels) - 1, 0))
                seen = (pos < len(levels)) & (levels[pos_c] == ints) if len(levels) else np.zeros(len(col), bool)
                codes[:, j] = np.where(seen, pos_c, len(levels))
            else:
                codes[:, j] = np.searchsorted(np.asarray(self.cuts[j]), col, side="left")
        return codes

    def to_dict(self) -> dict:
        return {"max_bins": self.max_bins, "is_categorical": self.is_categorical,
                "cuts": self.cuts, "categories": self.categories}

    @classmethod
    def from_dict(cls, d: dict) -> "Binner":
        b = cls(d["max_bins"])
        b.is_categorical = list(d["is_categorical"])
        b.cuts = [list(map(float, c)) for c in d["cuts"]]
        b.categories = [list(map(int, c)) for c in d["categories"]]
        return b


@dataclass
class Tree:
    """Complete binary tree in heap layout (children of i are 2i+1, 2i+2)."""

    feature: np.ndarray  # -1 marks a leaf
    left_bins: np.ndarray  # (n_nodes, n_codes) bool: code goes left
    value: np.ndarray

    def apply(self, codes: np.ndarray) -> np.ndarray:
        node = np.zeros(len(codes), dtype=np.int64)
        rows = np.arange(len(codes))
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                return node
            f = np.where(active, feat, 0)
            go_left = self.left_bins[node, codes[rows, f]]
            node = np.where(active, np.where(go_left, 2 * node + 1, 2 * node + 2), node)

    def predict(self, codes: np.ndarray) -> np.ndarray:
        return self.value[self.apply(codes)]

    def to_dict(self) -> dict:
        internal = np.flatnonzero(self.feature >= 0)
        return {
            "feature": self.feature.tolist(),
            "value": self.value.tolist(),
            "left": {int(i): np.flatnonzero(self.left_bins[i]).tolist() for i in internal},
            "n_codes": int(self.left_bins.shape[1]),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        feature = np.asarray(d["feature"], dtype=np.int64)
        left = np.zeros((len(feature), d["n_codes"]), dtype=bool)
        for i, bins in d["left"].items():
            left[int(i), bins] = True
        return cls(feature, left, np.asarray(d["value"], dtype=float))


@numba.njit(cache=True)
def _histograms(codes, rows, node_of, level_start, grad, hess, width, n_codes, wanted):
    """Per-node (grad, hess, count) histograms, shape (width, n_feat, n_codes, 3).

    Only nodes flagged in ``wanted`` are accumulated.
    """
    n_feat = codes.shape[1]
    hist = np.zeros((width, n_feat, n_codes, 3))
    for k in range(rows.shape[0]):
        r = rows[k]
        w = node_of[r] - level_start
        if not wanted[w]:
            continue
        g = grad[r]
        h = hess[r]
        for j in range(n_feat):
            b = codes[r, j]
            hist[w, j, b, 0] += g
            hist[w, j, b, 1] += h
            hist[w, j, b, 2] += 1.0
    return hist


@numba.njit(cache=True)
def _route(codes, rows, node_of, feature, left_bins):
    """Send rows of split nodes to their children; return the rows still moving."""
    out = np.empty_like(rows)
    m = 0
    for k in range(rows.shape[0]):
        r = rows[k]
        node = node_of[r]
        f = feature[node]
        if f < 0:
            continue
        if left_bins[node, codes[r, f]]:
            node_of[r] = 2 * node + 1
        else:
            node_of[r] = 2 * node + 2
        out[m] = r
        m += 1
    return out[:m]


def _grow_tree(codes, n_bins, is_cat, grad, hess, params: BoostingParams, n_codes: int) -> Tree:
    depth = params.max_depth
    n_nodes = 2 ** (depth + 1) - 1
    feature = np.full(n_nodes, -1, dtype=np.int64)
    left_bins = np.zeros((n_nodes, n_codes), dtype=bool)
    value = np.zeros(n_nodes)
    lam = params.reg_lambda

    node_of = np.zeros(len(grad), dtype=np.int64)
    rows = np.arange(len(grad))
    level_start = 0
    for level in range(depth + 1):
        width = 2 ** level
        if level == 0:
            hist = _histograms(codes, rows, node_of, level_start, grad, hess, 1, n_codes,
                               np.ones(1, dtype=np.bool_))
        else:
            # build the smaller child of each split pair, derive its sibling
            counts = np.bincount(node_of[rows] - level_start, minlength=width)
            parents = np.flatnonzero(prev_split)
            left_small = counts[2 * parents] <= counts[2 * parents + 1]
            small = np.where(left_small, 2 * parents, 2 * parents + 1)
            wanted = np.zeros(width, dtype=np.bool_)
            wanted[small] = True
            hist = _histograms(codes, rows, node_of, level_start, grad, hess, width, n_codes, wanted)
            hist[small ^ 1] = prev_hist[parents] - hist[small]
        prev_hist = hist
        HG, HH, HC = (hist[..., i].transpose(1, 0, 2) for i in range(3))
        G, H, C = HG[0].sum(1), HH[0].sum(1), HC[0].sum(1)
        value[level_start:level_start + width] = np.where(C > 0, -G / (H + lam), 0.0)
        if level == depth or len(rows) == 0:
            break
        parent_score = G ** 2 / (H + lam)
        best_gain = np.zeros(width)
        best_feat = np.full(width, -1)
        best_mask = np.zeros((width, n_codes), dtype=bool)
        for j in range(codes.shape[1]):
            nb = n_bins[j]
            if nb < 2:
                continue
            hg, hh, hc = HG[j, :, :nb], HH[j, :, :nb], HC[j, :, :nb]
            if is_cat[j]:
                ratio = np.where(hc > 0, hg / (hh + lam), np.inf)
                order = np.argsort(ratio, axis=1, kind="stable")
                hg = np.take_along_axis(hg, order, 1)
                hh = np.take_along_axis(hh, order, 1)
                hc = np.take_along_axis(hc, order, 1)
            else:
                order = None
            sg = hg.cumsum(1)[:, :-1]
            sh = hh.cumsum(1)[:, :-1]
            sc = hc.cumsum(1)[:, :-1]
            rg, rh, rc = G[:, None] - sg, H[:, None] - sh, C[:, None] - sc
            gain = sg ** 2 / (sh + lam) + rg ** 2 / (rh + lam) - parent_score[:, None]
            ok = (
                (sc >= params.min_samples_leaf) & (rc >= params.min_samples_leaf)
                & (sh >= params.min_child_weight) & (rh >= params.min_child_weight)
            )
            gain = np.where(ok, gain, -np.inf)
            pos = np.argmax(gain, axis=1)
            g_best = gain[np.arange(width), pos]
            better = g_best > np.maximum(best_gain, 1e-12)
            if not better.any():
                continue
            best_gain = np.where(better, g_best, best_gain)
            best_feat = np.where(better, j, best_feat)
            if order is None:
                mask = np.arange(nb)[None, :] <= pos[:, None]
            else:
                rank = np.empty_like(order)
                np.put_along_axis(rank, order, np.arange(nb)[None, :].repeat(width, 0), 1)
                mask = rank <= pos[:, None]
            for w in np.flatnonzero(better):
                best_mask[w] = False
                best_mask[w, :nb] = mask[w]
        split = best_feat >= 0
        prev_split = split
        idx = level_start + np.arange(width)
        feature[idx[split]] = best_feat[split]
        left_bins[idx[split]] = best_mask[split]
        rows = _route(codes, rows, node_of, feature, left_bins)
        level_start += width
    return Tree(feature, left_bins, value * params.learning_rate), node_of


@dataclass
class BoostedClassifier:
    """Focal-loss boosted trees producing occurrence scores in (0, 1)."""

    features: list[str]
    categorical: list[str]
    params: BoostingParams = field(default_factory=BoostingParams)
    seed: int = 0
    base_score: float = 0.0
    trees: list[Tree] = field(default_factory=list)
    binner: Optional[Binner] = None

    @property
    def schema(self) -> str:
        return schema_hash(self.features, self.categorical)

    def _matrix(self, rows) -> np.ndarray:
        if isinstance(rows, pd.DataFrame):
            missing = [f for f in self.features if f not in rows.columns]
            if missing:
                raise SchemaError(f"rows lack model features: {', '.join(missing)}")
            return rows[self.features].to_numpy(dtype=float)
        X = np.asarray(rows, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.features):
            raise SchemaError(
                f"expected {len(self.features)} feature columns ({', '.join(self.features)}), "
                f"got shape {X.shape}"
            )
        return X

    def fit(self, rows, labels=None) -> "BoostedClassifier":
        X = self._matrix(rows)
        if labels is None:
            labels = rows["label"]
        y = np.asarray(labels, dtype=bool)
        if len(y) == 0:
            raise ValueError("cannot fit on an empty row set")
        if y.all() or not y.any():
            missing = "negative (no-demand)" if y.all() else "positive (demand)"
            raise ValueError(f"training rows contain no {missing} examples")
        p = self.params
        is_cat = [f in self.categorical for f in self.features]
        self.binner = Binner(p.max_bins).fit(X, is_cat)
        codes = self.binner.transform(X)
        n_bins = [self.binner.n_bins(j) for j in range(X.shape[1])]
        n_codes = max(n_bins)
        prior = float(np.clip(y.mean(), 1e-6, 1 - 1e-6))
        self.base_score = float(np.log(prior / (1 - prior)))
        raw = np.full(len(y), self.base_score)
        rng = np.random.default_rng(self.seed)
        self.trees = []
        for _ in range(p.n_rounds):
            grad, hess = newton_hessian(raw, y, p.focal_gamma, p.min_hessian)
            if p.subsample < 1:
                keep = rng.random(len(y)) < p.subsample
                g_use, h_use = np.where(keep, grad, 0.0), np.where(keep, hess, 0.0)
            else:
                g_use, h_use = grad, hess
            tree, leaf_of = _grow_tree(codes, n_bins, is_cat, g_use, h_use, p, n_codes)
            self.trees.append(tree)
            raw += tree.value[leaf_of]
        return self

    def decision_function(self, rows) -> np.ndarray:
        if self.binner is None:
            raise RuntimeError("classifier is not fitted")
        X = self._matrix(rows)
        if len(X) == 0:
            return np.zeros(0)
        codes = self.binner.transform(X)
        raw = np.full(len(X), self.base_score)
        for tree in self.trees:
            raw += tree.predict(codes)
        return raw

    def predict_proba(self, rows) -> np.ndarray:
        return np.clip(expit(self.decision_function(rows)), 1e-15, 1 - 1e-15)

    def to_dict(self) -> dict:
        if self.binner is None:
            raise RuntimeError("classifier is not fitted")
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "schema_hash": self.schema,
            "features": self.features,
            "categorical": self.categorical,
            "params": asdict(self.params),
            "seed": self.seed,
            "base_score": self.base_score,
            "binner": self.binner.to_dict(),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoostedClassifier":
        if d.get("format") != MODEL_FORMAT or d.get("version") != MODEL_VERSION:
            raise SchemaError(f"not a {MODEL_FORMAT} v{MODEL_VERSION} model")
        model = cls(list(d["features"]), list(d["categorical"]), BoostingParams(**d["params"]),
                    d["seed"], float(d["base_score"]),
                    [Tree.from_dict(t) for t in d["trees"]], Binner.from_dict(d["binner"]))
        if model.schema != d["schema_hash"]:
            raise SchemaError("schema hash mismatch")
        return model
