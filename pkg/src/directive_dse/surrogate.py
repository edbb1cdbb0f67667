"""Random decision forests and the surrogate bundle used to score design points.

Five regressors (latency plus one per resource type) and one classifier
predicting the probability that a point fails to synthesize or times out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from . import _kernels
from ._kernels import CRITERION_GINI, CRITERION_MSE

if TYPE_CHECKING:
    from .evaluator import EvaluationRecord

RESOURCE_KEYS = ("lut", "ff", "dsp", "bram")


class ForestError(ValueError):
    pass


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 50
    max_depth: int = 12
    min_samples_leaf: int = 1
    bootstrap_fraction: float = 1.0
    features_per_split: int | str | None = None  # None -> ceil(sqrt(n_features)); "all"
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.min_samples_leaf < 1:
            raise ForestError("n_trees, max_depth and min_samples_leaf must be >= 1")
        if not 0.0 < self.bootstrap_fraction <= 1.0:
            raise ForestError("bootstrap_fraction must lie in (0, 1]")
        fps = self.features_per_split
        if fps is not None and fps != "all" and (not isinstance(fps, int) or fps < 1):
            raise ForestError(f"features_per_split must be a positive int, 'all' or None, got {fps!r}")

    def n_sub(self, n_features: int) -> int:
        if self.features_per_split == "all":
            return n_features
        if self.features_per_split is None:
            return max(1, math.ceil(math.sqrt(n_features)))
        return min(int(self.features_per_split), n_features)

    def with_seed(self, seed: int) -> ForestParams:
        return ForestParams(self.n_trees, self.max_depth, self.min_samples_leaf, self.bootstrap_fraction,
                            self.features_per_split, seed)


@dataclass
class Forest:
    """Flat node storage for all trees; children index into the shared arrays."""

    kind: str  # "regressor" | "classifier"
    params: ForestParams
    n_features: int
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    roots: np.ndarray
    target_range: tuple[float, float] = (0.0, 0.0)

    @property
    def n_trees(self) -> int:
        return len(self.roots)

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.float64)))
        if X.shape[1] != self.n_features:
            raise ForestError(f"feature length {X.shape[1]} != trained length {self.n_features}")
        out = _kernels.predict_forest(self.feature, self.threshold, self.left, self.right, self.value,
                                      self.roots, X)
        if self.kind == "classifier":
            out = np.clip(out, 0.0, 1.0)
        return out

    def tree_json(self, t: int) -> dict:
        def node(i):
            if self.feature[i] < 0:
                return {"value": float(self.value[i])}
            return {"feature": int(self.feature[i]), "threshold": float(self.threshold[i]),
                    "left": node(self.left[i]), "right": node(self.right[i])}
        return node(int(self.roots[t]))

    def to_json(self) -> dict:
        p = self.params
        return {"kind": self.kind, "n_features": self.n_features,
                "params": {"n_trees": p.n_trees, "max_depth": p.max_depth,
                           "min_samples_leaf": p.min_samples_leaf,
                           "bootstrap_fraction": p.bootstrap_fraction,
                           "features_per_split": p.features_per_split, "seed": p.seed},
                "trees": [self.tree_json(t) for t in range(self.n_trees)]}

    @classmethod
    def from_trees(cls, kind, params, n_features, trees: Sequence[tuple]) -> Forest:
        """Assemble a forest from per-tree (feature, threshold, left, right, value) arrays."""
        parts = [[], [], [], [], []]
        roots, offset = [], 0
        for f, th, l, r, v in trees:
            roots.append(offset)
            parts[0].append(np.asarray(f, np.int64))
            parts[1].append(np.asarray(th, np.float64))
            parts[2].append(np.where(np.asarray(l) >= 0, np.asarray(l, np.int64) + offset, -1))
            parts[3].append(np.where(np.asarray(r) >= 0, np.asarray(r, np.int64) + offset, -1))
            parts[4].append(np.asarray(v, np.float64))
            offset += len(f)
        arrays = [np.concatenate(p) for p in parts]
        return cls(kind, params, n_features, *arrays, roots=np.asarray(roots, np.int64))


def _fit(X, y, params: ForestParams, criterion: int, kind: str, bins=None) -> Forest:
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    y = np.ascontiguousarray(np.asarray(y, dtype=np.float64))
    if X.ndim != 2 or X.shape[0] == 0:
        raise ForestError("empty dataset")
    if y.shape != (X.shape[0],):
        raise ForestError(f"{X.shape[0]} feature rows but {y.shape[0]} targets")
    n, n_feat = X.shape
    n_boot = max(1, round(params.bootstrap_fraction * n))
    n_sub = params.n_sub(n_feat)
    codes, bin_values, n_bins = bins if bins is not None else _kernels.bin_features(X)
    trees = []
    for t in range(params.n_trees):
        rng = np.random.default_rng([params.seed, t])
        rows = rng.integers(0, n, size=n_boot)
        keys = rng.random((2 * n_boot - 1, n_feat))
        trees.append(_kernels.build_tree(codes, bin_values, n_bins, y, rows, keys, n_sub, params.max_depth,
                                         params.min_samples_leaf, criterion))
    forest = Forest.from_trees(kind, params, n_feat, trees)
    forest.target_range = (float(y.min()), float(y.max()))
    return forest


def fit_regressor(X, y, params: ForestParams = ForestParams(), *, bins=None) -> Forest:
    return _fit(X, y, params, CRITERION_MSE, "regressor", bins)


def fit_classifier(X, labels, params: ForestParams = ForestParams(), *, bins=None) -> Forest:
    labels = np.asarray(labels)
    if labels.size and not np.isin(labels, (0, 1)).all():
        raise ForestError("classifier labels must be 0 or 1")
    return _fit(X, labels, params, CRITERION_GINI, "classifier", bins)


def predict_regressor(model: Forest, x) -> float:
    return float(model.predict(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


def predict_proba(model: Forest, x) -> float:
    return float(model.predict(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


@dataclass
class BundlePrediction:
    latency: np.ndarray | None  # (n,)
    ratios: np.ndarray | None  # (n, 4) in RESOURCE_KEYS order
    p_timeout: np.ndarray  # (n,)


@dataclass
class SurrogateBundle:
    timeout_model: Forest
    latency_model: Forest | None = None
    resource_models: dict[str, Forest] = field(default_factory=dict)
    n_rows: int = 0
    n_ok_rows: int = 0

    @property
    def has_regressors(self) -> bool:
        return self.latency_model is not None

    def predict(self, X) -> BundlePrediction:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        p_timeout = self.timeout_model.predict(X)
        if not self.has_regressors:
            return BundlePrediction(None, None, p_timeout)
        lat = self.latency_model.predict(X)
        ratios = np.column_stack([np.maximum(self.resource_models[k].predict(X), 0.0) for k in RESOURCE_KEYS])
        return BundlePrediction(lat, ratios, p_timeout)

    def to_json(self) -> dict:
        return {"n_rows": self.n_rows, "n_ok_rows": self.n_ok_rows,
                "timeout": self.timeout_model.to_json(),
                "latency": self.latency_model.to_json() if self.latency_model else None,
                "resources": {k: m.to_json() for k, m in self.resource_models.items()}}


def retrain_bundle(X, records: Sequence[EvaluationRecord], params: ForestParams = ForestParams()) -> SurrogateBundle:
    """Fit all six models from scratch on encoded points and their evaluation records.

    Regressors see only successful records; the classifier sees every record
    with label 1 for error or timeout. If nothing succeeded yet the bundle holds
    the classifier alone and ``has_regressors`` is False.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != len(records):
        raise ForestError(f"{X.shape[0]} feature rows but {len(records)} records")
    seeds = np.random.SeedSequence(params.seed).generate_state(6)
    labels = np.array([0.0 if r.ok else 1.0 for r in records])
    bundle = SurrogateBundle(fit_classifier(X, labels, params.with_seed(int(seeds[0]))), n_rows=len(records))
    ok = np.flatnonzero(labels == 0.0)
    bundle.n_ok_rows = len(ok)
    if len(ok) == 0:
        return bundle
    Xo = X[ok]
    bins = _kernels.bin_features(Xo)
    bundle.latency_model = fit_regressor(Xo, [records[i].latency for i in ok], params.with_seed(int(seeds[1])),
                                         bins=bins)
    for j, key in enumerate(RESOURCE_KEYS):
        y = [records[i].ratios.as_tuple()[j] for i in ok]
        bundle.resource_models[key] = fit_regressor(Xo, y, params.with_seed(int(seeds[2 + j])), bins=bins)
    return bundle
