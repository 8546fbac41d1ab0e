"""Regression random forest for prognostic score estimation.

Trees are CART regressors grown on bootstrap resamples with the
sum-of-squares split criterion and ``mtry`` candidate features per split.
Each tree draws from its own child stream, so a fitted forest depends only
on the data, the configuration and the stream.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..dgp import TrialData
from ..rng import RngStream
from . import _cart

FORMAT_NAME = "progadjust-forest"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 500
    mtry: int | None = None  # None: ceil(k / 3)
    min_node_size: int = 5
    max_depth: int | None = None
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be at least 1")
        if self.min_node_size < 1:
            raise ValueError("min_node_size must be at least 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")

    def resolved_mtry(self, k: int) -> int:
        mtry = math.ceil(k / 3) if self.mtry is None else self.mtry
        if mtry > k:
            raise ValueError(f"mtry={mtry} exceeds the number of features {k}")
        return mtry


class Tree(NamedTuple):
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_leaves(self) -> int:
        return int((self.left == _cart.LEAF).sum())


@dataclass(frozen=True)
class ScoreModel:
    """Fitted forest plus the training-outcome mean used for centering."""

    trees: list
    alpha_hat: float
    feature_count: int
    _packed: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sizes = np.array([len(t.value) for t in self.trees], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)

        def shift(child, off):
            return np.where(child == _cart.LEAF, _cart.LEAF, child + off).astype(np.int32)

        packed = (
            offsets,
            np.concatenate([t.feature for t in self.trees]).astype(np.int32),
            np.concatenate([t.threshold for t in self.trees]).astype(np.float64),
            np.concatenate([shift(t.left, o) for t, o in zip(self.trees, offsets)]),
            np.concatenate([shift(t.right, o) for t, o in zip(self.trees, offsets)]),
            np.concatenate([t.value for t in self.trees]).astype(np.float64),
        )
        object.__setattr__(self, "_packed", packed)

    def predict_raw(self, x) -> np.ndarray:
        """Uncentered forest prediction, an estimate of E(Y | X = x, z = 0)."""
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.feature_count:
            raise ValueError(f"expected an n x {self.feature_count} matrix, got shape {x.shape}")
        return _cart.predict_packed(x, *self._packed)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "alpha_hat": self.alpha_hat,
            "feature_count": self.feature_count,
            "trees": [{k: v.tolist() for k, v in t._asdict().items()} for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScoreModel":
        if d.get("format") != FORMAT_NAME or d.get("version") != FORMAT_VERSION:
            raise ValueError("not a version-1 progadjust forest dump")
        dtypes = dict(feature=np.int32, threshold=np.float64, left=np.int32,
                      right=np.int32, value=np.float64)
        trees = [Tree(**{k: np.asarray(t[k], dtype=dt) for k, dt in dtypes.items()})
                 for t in d["trees"]]
        return cls(trees, float(d["alpha_hat"]), int(d["feature_count"]))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "ScoreModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def fit_forest(historical: TrialData, config: ForestConfig, stream: RngStream) -> ScoreModel:
    """Grow ``config.n_trees`` trees on historical controls.

    A constant outcome yields single-leaf trees, i.e. a model predicting
    ``alpha_hat`` everywhere.
    """
    if historical.x is None:
        raise ValueError("historical data need covariates")
    if np.any(historical.z != 0):
        raise ValueError("historical data must be controls only (z = 0)")
    x = np.ascontiguousarray(historical.x, dtype=np.float64)
    y = np.ascontiguousarray(historical.y, dtype=np.float64)
    n, k = x.shape
    if n < 2 * config.min_node_size:
        raise ValueError(f"n_hist={n} is below 2 * min_node_size")
    mtry = config.resolved_mtry(k)
    max_depth = -1 if config.max_depth is None else config.max_depth
    presorted = np.ascontiguousarray(np.argsort(x, axis=0, kind="stable").T)

    trees = []
    for t in range(config.n_trees):
        gen = stream.child("tree", t).generator()
        if config.bootstrap:
            sample = gen.integers(0, n, n)
        else:
            sample = np.arange(n)
        uniforms = gen.random((2 * n + 1) * mtry)
        trees.append(Tree(*_cart.grow_tree(x, y, presorted, sample.astype(np.int64), uniforms,
                                           mtry, config.min_node_size, max_depth)))
    return ScoreModel(trees, float(y.mean()), k)


def predict_score(model: ScoreModel, x) -> np.ndarray:
    """Centered prognostic score: forest prediction minus ``alpha_hat``."""
    return model.predict_raw(x) - model.alpha_hat


def _rho_from_prediction(pred, s_true) -> float:
    if pred.std() == 0 or s_true.std() == 0:
        warnings.warn("estimated score is constant; reporting rho = 0", RuntimeWarning)
        return 0.0
    r = float(np.corrcoef(pred, s_true)[0, 1])
    if r < 0:
        warnings.warn(f"negative score correlation {r:.4f}; reporting rho = 0", RuntimeWarning)
        return 0.0
    return min(r, 1.0)


def _r2_oos_from_prediction(raw, y) -> float:
    sst = float(((y - y.mean()) ** 2).sum())
    if sst == 0:
        raise ValueError("evaluation outcome has zero variance")
    resid = y - raw
    return 1.0 - float(resid @ resid) / sst


def estimate_rho(model: ScoreModel, eval_data: TrialData) -> float:
    """Correlation of the estimated with the true score, clamped to [0, 1].

    A constant or negatively correlated score counts as a failed score
    (``rho = 0``) and triggers a warning.
    """
    if eval_data.x is None or eval_data.s_true is None:
        raise ValueError("evaluation data need x and s_true")
    return _rho_from_prediction(predict_score(model, eval_data.x), eval_data.s_true)


def estimate_r2_oos(model: ScoreModel, eval_data: TrialData) -> float:
    """Out-of-sample ``1 - SSE/SST`` of the uncentered forest prediction."""
    if eval_data.x is None:
        raise ValueError("evaluation data need x")
    return _r2_oos_from_prediction(model.predict_raw(eval_data.x), eval_data.y)


def evaluate_score(model: ScoreModel, eval_data: TrialData) -> tuple[float, float]:
    """``(estimate_rho, estimate_r2_oos)`` from a single pass over ``eval_data``."""
    if eval_data.x is None or eval_data.s_true is None:
        raise ValueError("evaluation data need x and s_true")
    raw = model.predict_raw(eval_data.x)
    return (_rho_from_prediction(raw - model.alpha_hat, eval_data.s_true),
            _r2_oos_from_prediction(raw, eval_data.y))
