"""Rank-regression surrogates: boosted trees and a randomized ensemble.

Targets are rank-normalized before fitting, so the models learn the
ordering of candidates rather than raw objective values; any strictly
monotone transform of the targets leaves the fitted models unchanged.
An ensemble of boosted-tree models with independently sampled
hyperparameters supplies a prediction mean and a disagreement-based
standard deviation per point.

Estimators follow the scikit-learn protocol (``fit`` returns self,
``get_params``/``set_params`` via ``BaseEstimator``) so they compose with
the wider ecosystem.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from . import _tree_kernels as _tk
from .sampling import derive_seed, make_rng

# Hyperparameter grid the ensemble samples from (uniformly, with
# replacement) when building its members.
N_ESTIMATORS_GRID = (100, 400, 800, 1000)
MAX_DEPTH_GRID = (3, 6, 12)
LEARNING_RATE_GRID = (0.01, 0.1, 0.5)

DEFAULT_ENSEMBLE_SIZE = 5
DEFAULT_MIN_SAMPLES_LEAF = 2


def _check_X(X) -> np.ndarray:
    arr = np.ascontiguousarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError(f"X must be a non-empty 2d array, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("X contains non-finite values")
    return arr


def _check_X_y(X, y) -> tuple[np.ndarray, np.ndarray]:
    arr = _check_X(X)
    yv = np.asarray(y, dtype=np.float64).ravel()
    if yv.shape[0] != arr.shape[0]:
        raise ValueError(f"X has {arr.shape[0]} rows but y has {yv.shape[0]}")
    if np.isnan(yv).any():
        raise ValueError("y contains NaN")
    return arr, yv


def rank_normalize(y) -> np.ndarray:
    """Map targets to average ranks scaled into [0, 1].

    The value with 0-based rank r maps to r/(n-1); tied values receive the
    mean of the ranks they span. A single value maps to 0.0. Invariant
    under any strictly increasing transform of the targets.
    """
    yv = np.asarray(y, dtype=np.float64).ravel()
    if yv.size == 0:
        raise ValueError("rank_normalize needs at least one value")
    if np.isnan(yv).any():
        raise ValueError("y contains NaN")
    n = yv.size
    if n == 1:
        return np.zeros(1)
    order = np.argsort(yv, kind="stable")
    ranks = np.empty(n, dtype=np.float64)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and yv[order[j + 1]] == yv[order[i]]:
            j += 1
        avg = (i + j) / 2.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks / (n - 1)


class RegressionTree:
    """A fitted axis-aligned regression tree stored as flat arrays."""

    def __init__(self, feature, threshold, left, right, value):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.value = value

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for nid in range(self.n_nodes):
            if self.feature[nid] >= 0:
                depths[self.left[nid]] = depths[nid] + 1
                depths[self.right[nid]] = depths[nid] + 1
        return int(depths.max())

    def predict(self, X) -> np.ndarray:
        arr = _check_X(X)
        roots = np.zeros(1, dtype=np.int64)
        return _tk.predict_trees(
            arr, self.feature, self.threshold, self.left, self.right, self.value, roots
        )

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }


def fit_tree(X, y, max_depth: int, min_samples_leaf: int = 1) -> RegressionTree:
    """Fit one tree by exact greedy variance-reduction splits.

    Thresholds are midpoints between consecutive distinct feature values;
    leaves carry the mean target of their rows. Growth stops at the depth
    limit, at min_samples_leaf, or when a node's targets are constant.
    """
    arr, yv = _check_X_y(X, y)
    if max_depth < 0 or min_samples_leaf < 1:
        raise ValueError("max_depth must be >= 0 and min_samples_leaf >= 1")
    arrays = _tk.fit_tree_arrays(arr, yv, _tk.presort_columns(arr), max_depth, min_samples_leaf)
    return RegressionTree(*arrays)


class GradientBoostedTrees(RegressorMixin, BaseEstimator):
    """Least-squares gradient boosting over exact-split regression trees.

    Each stage fits a tree to the current residuals and the prediction
    moves by ``learning_rate`` times the tree output, starting from the
    target mean. Boosting stops early once the training residuals are
    numerically zero, so ``n_trees_`` may be below ``n_estimators``.
    """

    def __init__(
        self,
        n_estimators: int = 100,
        max_depth: int = 3,
        learning_rate: float = 0.1,
        min_samples_leaf: int = DEFAULT_MIN_SAMPLES_LEAF,
    ):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.min_samples_leaf = min_samples_leaf

    def fit(self, X, y, sorted_idx: np.ndarray | None = None):
        arr, yv = _check_X_y(X, y)
        if arr.shape[0] < 1:
            raise ValueError("need at least one sample")
        if self.n_estimators < 0 or self.learning_rate <= 0:
            raise ValueError("n_estimators must be >= 0 and learning_rate > 0")
        if sorted_idx is None:
            sorted_idx = _tk.presort_columns(arr)

        self.base_prediction_ = float(yv.mean())
        resid = yv - self.base_prediction_
        mse0 = float(np.mean(resid**2))
        stop_tol = 1e-18 * max(1.0, mse0)

        feature, thr, left, right, value, roots, mse_path = _tk.fit_gbt_arrays(
            arr,
            resid,
            sorted_idx,
            self.n_estimators,
            self.max_depth,
            self.min_samples_leaf,
            self.learning_rate,
            stop_tol,
        )
        self.n_trees_ = int(roots.shape[0])
        self.train_mse_path_ = mse_path
        self.feature_ = feature
        self.threshold_ = thr
        self.left_ = left
        self.right_ = right
        self.value_ = value
        self.roots_ = roots
        return self

    def _tree_sum(self, arr: np.ndarray) -> np.ndarray:
        return _tk.predict_trees(
            arr, self.feature_, self.threshold_, self.left_, self.right_, self.value_, self.roots_
        )

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "base_prediction_"):
            raise NotFittedError("GradientBoostedTrees is not fitted")
        arr = _check_X(X)
        return self.base_prediction_ + self.learning_rate * self._tree_sum(arr)

    def trees(self) -> list[RegressionTree]:
        """Materialize per-stage trees (for inspection; predictions use the
        consolidated arrays)."""
        out = []
        bounds = list(self.roots_) + [self.feature_.shape[0]]
        for a, b in zip(bounds[:-1], bounds[1:]):
            out.append(
                RegressionTree(
                    self.feature_[a:b],
                    self.threshold_[a:b],
                    np.where(self.left_[a:b] >= 0, self.left_[a:b] - a, -1),
                    np.where(self.right_[a:b] >= 0, self.right_[a:b] - a, -1),
                    self.value_[a:b],
                )
            )
        return out

    def to_dict(self) -> dict:
        """Dump the model as plain lists; not a stability-guaranteed format."""
        return {
            "base_prediction": self.base_prediction_,
            "learning_rate": self.learning_rate,
            "trees": [t.to_dict() for t in self.trees()],
        }


class RankEnsemble(BaseEstimator):
    """Bag of boosted-tree rank regressors with randomized hyperparameters.

    ``fit`` rank-normalizes the targets once, samples ``n_members``
    hyperparameter triples uniformly (with replacement) from the grids
    using the given seed, and fits every member on the identical data.
    ``predict`` returns the member mean and population standard deviation.
    """

    def __init__(
        self,
        n_members: int = DEFAULT_ENSEMBLE_SIZE,
        seed: int = 0,
        n_estimators_grid: tuple[int, ...] = N_ESTIMATORS_GRID,
        max_depth_grid: tuple[int, ...] = MAX_DEPTH_GRID,
        learning_rate_grid: tuple[float, ...] = LEARNING_RATE_GRID,
        min_samples_leaf: int = DEFAULT_MIN_SAMPLES_LEAF,
    ):
        self.n_members = n_members
        self.seed = seed
        self.n_estimators_grid = n_estimators_grid
        self.max_depth_grid = max_depth_grid
        self.learning_rate_grid = learning_rate_grid
        self.min_samples_leaf = min_samples_leaf

    def fit(self, X, y):
        arr, yv = _check_X_y(X, y)
        if arr.shape[0] < 2:
            raise ValueError("ensemble fitting needs at least two samples")
        if self.n_members < 1:
            raise ValueError("n_members must be >= 1")

        ranks = rank_normalize(yv)
        rng = make_rng(self.seed)
        hps = []
        for _ in range(self.n_members):
            hps.append(
                (
                    self.n_estimators_grid[rng.integers(len(self.n_estimators_grid))],
                    self.max_depth_grid[rng.integers(len(self.max_depth_grid))],
                    self.learning_rate_grid[rng.integers(len(self.learning_rate_grid))],
                )
            )
        self.member_hyperparams_ = hps

        sorted_idx = _tk.presort_columns(arr)
        self.members_ = []
        for n_est, depth, lr in hps:
            member = GradientBoostedTrees(
                n_estimators=int(n_est),
                max_depth=int(depth),
                learning_rate=float(lr),
                min_samples_leaf=self.min_samples_leaf,
            )
            member.fit(arr, ranks, sorted_idx=sorted_idx)
            self.members_.append(member)
        return self

    def predict(self, X):
        """(mean, std) of member predictions; scalars for a single vector."""
        if not hasattr(self, "members_"):
            raise NotFittedError("RankEnsemble is not fitted")
        single = np.asarray(X).ndim == 1
        arr = _check_X(X)
        preds = np.stack([m.predict(arr) for m in self.members_])
        mean = preds.mean(axis=0)
        std = preds.std(axis=0)
        if single:
            return float(mean[0]), float(std[0])
        return mean, std


def fit_objective_ensembles(
    X, Y, n_members: int = DEFAULT_ENSEMBLE_SIZE, seed: int = 0, **kwargs
) -> list[RankEnsemble]:
    """One fitted RankEnsemble per objective column of Y, with derived seeds."""
    Ym = np.asarray(Y, dtype=np.float64)
    if Ym.ndim != 2:
        raise ValueError("Y must be (n_samples, n_objectives)")
    ensembles = []
    for j in range(Ym.shape[1]):
        ens = RankEnsemble(n_members=n_members, seed=derive_seed(seed, j), **kwargs)
        ensembles.append(ens.fit(X, Ym[:, j]))
    return ensembles


def kendall_tau(a, b) -> float:
    """Kendall tau-b rank correlation with tie corrections.

    Computed by full pair enumeration, so quadratic in the input length;
    fine for a few thousand points. Raises when either input is all ties
    (the coefficient is undefined there).
    """
    av = np.asarray(a, dtype=np.float64).ravel()
    bv = np.asarray(b, dtype=np.float64).ravel()
    if av.shape != bv.shape:
        raise ValueError(f"length mismatch: {av.shape[0]} vs {bv.shape[0]}")
    n = av.shape[0]
    if n < 2:
        raise ValueError("kendall_tau needs at least two points")
    iu = np.triu_indices(n, k=1)
    sa = np.sign(av[:, None] - av[None, :])[iu]
    sb = np.sign(bv[:, None] - bv[None, :])[iu]
    n0 = n * (n - 1) // 2
    ties_a = int((sa == 0).sum())
    ties_b = int((sb == 0).sum())
    if ties_a == n0 or ties_b == n0:
        raise ValueError("kendall_tau undefined when one input is constant")
    s = float((sa * sb).sum())
    return s / math.sqrt((n0 - ties_a) * (n0 - ties_b))
