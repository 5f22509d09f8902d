"""Binary event/non-event classifiers: KNN and an SMO-trained RBF-kernel SVM.

Both models carry the normalization parameters fitted on their training matrix
and apply them to incoming raw feature vectors, so callers never have to
remember the transformation themselves.
"""

from __future__ import annotations

import json
import warnings
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path

import numpy as np

from nilmevents.errors import DataError
from nilmevents.features import FeatureKind
from nilmevents.normalize import NormalizationParams, NormKind

MODEL_FORMAT = "nilmevents-model"
MODEL_VERSION = 1

SMO_TOL = 1e-3                      # maximal KKT violation at convergence
SMO_MAX_ITER = 1_000_000            # pair updates; exceeding flags the model
SMO_TAU = 1e-12                     # curvature floor for degenerate pairs
KERNEL_CACHE_BYTES = 256 * 1024 * 1024

DEFAULT_C_GRID = tuple(2.0**e for e in range(-5, 16, 2))
DEFAULT_GAMMA_GRID = tuple(2.0**e for e in range(-15, 10, 2))

PREDICT_CHUNK = 256                 # fixed so results never depend on worker count


class Label(IntEnum):
    NON_EVENT = 0
    EVENT = 1


class SampleOrigin(str, Enum):
    GROUND_TRUTH_EVENT = "ground-truth-event"
    RANDOM_NON_EVENT = "random-non-event"
    ADAPTIVE_FP = "adaptive-fp"


@dataclass(frozen=True)
class LabeledSample:
    vector: np.ndarray
    label: Label
    origin: SampleOrigin
    sample_index: int
    center_time_s: float = float("nan")


def _stack_samples(samples: list[LabeledSample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not samples:
        raise DataError("empty training set")
    x = np.stack([np.asarray(s.vector, dtype=np.float64) for s in samples])
    y = np.array([int(s.label) for s in samples], dtype=np.int8)
    idx = np.array([s.sample_index for s in samples], dtype=np.int64)
    if len(np.unique(idx)) != len(idx):
        raise DataError("sample_index values must be unique within a training set")
    if not np.all(np.isfinite(x)):
        raise DataError("training vectors must be finite")
    return x, y, idx


@dataclass
class KnnModel:
    """All training samples plus K; prediction is a majority vote of the K nearest."""

    x: np.ndarray
    y: np.ndarray
    sample_index: np.ndarray
    k: int
    norm: NormalizationParams
    feature_kind: FeatureKind
    f0: int

    variant = "knn"

    def __post_init__(self) -> None:
        if not 1 <= self.k <= len(self.x):
            raise DataError(f"K={self.k} outside [1, {len(self.x)}]")

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def predict(self, v: np.ndarray, prenormalized: bool = False) -> Label:
        return self.predict_batch(np.asarray(v, dtype=np.float64)[None, :], prenormalized)[0]

    def predict_batch(self, vs: np.ndarray, prenormalized: bool = False) -> np.ndarray:
        """Labels for a matrix of row vectors.

        Neighbor order is resolved by (distance, sample_index); a tied vote
        (possible for even K) resolves to NON_EVENT.
        """
        vs = np.asarray(vs, dtype=np.float64)
        if vs.shape[1] != self.dim:
            raise DataError(f"query dim {vs.shape[1]} != model dim {self.dim}")
        if not prenormalized:
            vs = self.norm.transform(vs)
        out = np.empty(len(vs), dtype=np.int8)
        for i, q in enumerate(vs):
            diff = self.x - q
            d2 = np.einsum("ij,ij->i", diff, diff)
            order = np.lexsort((self.sample_index, d2))[: self.k]
            votes = int(self.y[order].sum())
            out[i] = 1 if 2 * votes > self.k else 0
        return out


def knn_train(samples: list[LabeledSample], k: int, norm: NormalizationParams,
              feature_kind: FeatureKind, f0: int) -> KnnModel:
    x, y, idx = _stack_samples(samples)
    return KnnModel(x=x, y=y, sample_index=idx, k=k, norm=norm,
                    feature_kind=FeatureKind(feature_kind), f0=f0)


def knn_predict(model: KnnModel, v: np.ndarray, prenormalized: bool = False) -> Label:
    return model.predict(v, prenormalized)


class _KernelRows:
    """RBF kernel rows computed on demand, LRU-evicted under a byte budget."""

    def __init__(self, x: np.ndarray, gamma: float, budget_bytes: int):
        self.x = x
        self.gamma = gamma
        self.sq = np.einsum("ij,ij->i", x, x)
        self.max_rows = max(2, budget_bytes // (len(x) * 8))
        self.rows: OrderedDict[int, np.ndarray] = OrderedDict()

    def row(self, i: int) -> np.ndarray:
        cached = self.rows.get(i)
        if cached is not None:
            self.rows.move_to_end(i)
            return cached
        d2 = self.sq + self.sq[i] - 2.0 * (self.x @ self.x[i])
        np.clip(d2, 0.0, None, out=d2)
        row = np.exp(-self.gamma * d2)
        if not np.all(np.isfinite(row)):
            raise DataError("non-finite kernel values")
        self.rows[i] = row
        while len(self.rows) > self.max_rows:
            self.rows.popitem(last=False)
        return row


def _smo_solve(x: np.ndarray, y_signed: np.ndarray, c: float, gamma: float,
               tol: float, max_iter: int, cache_bytes: int,
               objective_trace: list | None = None):
    """Max-violating-pair SMO on the soft-margin RBF dual.

    Returns (alpha, bias, kkt_residual, iterations, converged). `grad` holds
    y_i - sum_l alpha_l y_l K(x_l, x_i); for free support vectors at the
    optimum this equals the bias. When `objective_trace` is a list, the dual
    objective value after every pair update is appended to it.
    """
    n = len(x)
    kernel = _KernelRows(x, gamma, cache_bytes)
    alpha = np.zeros(n)
    grad = y_signed.copy()
    pos, neg = y_signed > 0, y_signed < 0
    objective = 0.0  # dual objective at alpha = 0

    iterations = 0
    kkt = np.inf
    while iterations < max_iter:
        in_up = (pos & (alpha < c)) | (neg & (alpha > 0.0))
        in_low = (pos & (alpha > 0.0)) | (neg & (alpha < c))
        up_idx = np.flatnonzero(in_up)
        low_idx = np.flatnonzero(in_low)
        if len(up_idx) == 0 or len(low_idx) == 0:
            kkt = 0.0
            break
        i = up_idx[np.argmax(grad[up_idx])]
        j = low_idx[np.argmin(grad[low_idx])]
        kkt = grad[i] - grad[j]
        if kkt <= tol:
            break

        k_i, k_j = kernel.row(i), kernel.row(j)
        quad = k_i[i] + k_j[j] - 2.0 * k_i[j]
        step = kkt / max(quad, SMO_TAU)
        quad_true = quad  # actual curvature, for the objective bookkeeping
        # alpha_i moves by +y_i*t, alpha_j by -y_j*t; both must stay in the box
        if y_signed[i] > 0:
            t_lo, t_hi = -alpha[i], c - alpha[i]
        else:
            t_lo, t_hi = alpha[i] - c, alpha[i]
        if y_signed[j] > 0:
            t_lo, t_hi = max(t_lo, alpha[j] - c), min(t_hi, alpha[j])
        else:
            t_lo, t_hi = max(t_lo, -alpha[j]), min(t_hi, c - alpha[j])
        t = min(max(step, t_lo), t_hi)

        d_alpha_i = y_signed[i] * t
        d_alpha_j = -y_signed[j] * t
        alpha[i] += d_alpha_i
        alpha[j] += d_alpha_j
        for idx in (i, j):
            if alpha[idx] < 1e-12:
                alpha[idx] = 0.0
            elif alpha[idx] > c - 1e-12:
                alpha[idx] = c
        grad -= (d_alpha_i * y_signed[i]) * k_i + (d_alpha_j * y_signed[j]) * k_j
        iterations += 1
        if objective_trace is not None:
            objective += t * kkt - 0.5 * t * t * quad_true
            objective_trace.append(objective)

    converged = bool(kkt <= tol)
    free = (alpha > 0.0) & (alpha < c)
    if np.any(free):
        bias = float(np.mean(grad[free]))
    else:
        in_up = (pos & (alpha < c)) | (neg & (alpha > 0.0))
        in_low = (pos & (alpha > 0.0)) | (neg & (alpha < c))
        hi = grad[in_up].max() if np.any(in_up) else 0.0
        lo = grad[in_low].min() if np.any(in_low) else 0.0
        bias = float((hi + lo) / 2.0)
    return alpha, bias, float(max(kkt, 0.0)), iterations, converged


@dataclass
class SvmModel:
    """Support vectors, dual coefficients alpha_i*y_i, and bias of the trained machine."""

    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    c: float
    gamma: float
    norm: NormalizationParams
    feature_kind: FeatureKind
    f0: int
    converged: bool = True
    kkt_residual: float = 0.0
    iterations: int = 0

    variant = "svm"

    @property
    def dim(self) -> int:
        return self.support_vectors.shape[1]

    def decision_values(self, vs: np.ndarray, prenormalized: bool = False) -> np.ndarray:
        vs = np.asarray(vs, dtype=np.float64)
        if vs.shape[1] != self.dim:
            raise DataError(f"query dim {vs.shape[1]} != model dim {self.dim}")
        if not prenormalized:
            vs = self.norm.transform(vs)
        out = np.empty(len(vs))
        sv_sq = np.einsum("ij,ij->i", self.support_vectors, self.support_vectors)
        for i, q in enumerate(vs):
            d2 = sv_sq + q @ q - 2.0 * (self.support_vectors @ q)
            np.clip(d2, 0.0, None, out=d2)
            out[i] = self.dual_coef @ np.exp(-self.gamma * d2) + self.bias
        return out

    def predict(self, v: np.ndarray, prenormalized: bool = False) -> Label:
        return self.predict_batch(np.asarray(v, dtype=np.float64)[None, :], prenormalized)[0]

    def predict_batch(self, vs: np.ndarray, prenormalized: bool = False) -> np.ndarray:
        # exactly zero decision value maps to NON_EVENT
        return (self.decision_values(vs, prenormalized) > 0.0).astype(np.int8)


def svm_train(samples: list[LabeledSample], c: float, gamma: float,
              norm: NormalizationParams | None = None,
              feature_kind: FeatureKind = FeatureKind.CUSUM, f0: int = 50,
              tol: float = SMO_TOL, max_iter: int = SMO_MAX_ITER,
              cache_bytes: int = KERNEL_CACHE_BYTES,
              objective_trace: list | None = None) -> SvmModel:
    """Solve the soft-margin dual by sequential minimal optimization."""
    if c <= 0 or gamma <= 0:
        raise DataError(f"C and gamma must be positive, got C={c}, gamma={gamma}")
    x, y, _ = _stack_samples(samples)
    if len(np.unique(y)) < 2:
        raise DataError("svm_train needs both classes present")
    y_signed = np.where(y == 1, 1.0, -1.0)
    alpha, bias, kkt, iterations, converged = _smo_solve(
        x, y_signed, float(c), float(gamma), tol, max_iter, cache_bytes, objective_trace
    )
    if not converged:
        warnings.warn(
            f"SMO hit the {max_iter}-update cap with KKT residual {kkt:.3g}; model flagged",
            RuntimeWarning,
            stacklevel=2,
        )
    sv = alpha > 0.0
    if norm is None:
        norm = NormalizationParams(kind=NormKind.NONE, dim=x.shape[1])
    return SvmModel(
        support_vectors=x[sv],
        dual_coef=alpha[sv] * y_signed[sv],
        bias=bias,
        c=float(c),
        gamma=float(gamma),
        norm=norm,
        feature_kind=FeatureKind(feature_kind),
        f0=f0,
        converged=converged,
        kkt_residual=kkt,
        iterations=iterations,
    )


def svm_predict(model: SvmModel, v: np.ndarray, prenormalized: bool = False) -> Label:
    return model.predict(v, prenormalized)


def _fscore_counts(pred: np.ndarray, truth: np.ndarray) -> tuple[int, int, int]:
    tp = int(np.sum((pred == 1) & (truth == 1)))
    fp = int(np.sum((pred == 1) & (truth == 0)))
    fn = int(np.sum((pred == 0) & (truth == 1)))
    return tp, fp, fn


def _stratified_fold_ids(y: np.ndarray, folds: int) -> np.ndarray:
    """Round-robin fold assignment within each class, keyed by sample order."""
    ids = np.empty(len(y), dtype=np.int64)
    for cls in (0, 1):
        members = np.flatnonzero(y == cls)
        ids[members] = np.arange(len(members)) % folds
    return ids


def grid_search(samples: list[LabeledSample], c_grid=DEFAULT_C_GRID,
                gamma_grid=DEFAULT_GAMMA_GRID, folds: int = 5,
                jobs: int = 1) -> tuple[float, float, float]:
    """Exhaustive (C, gamma) search by cross-validated F-score on the samples.

    Ties break toward smaller C, then smaller gamma. Returns (C, gamma, score).
    """
    c_grid, gamma_grid = list(c_grid), list(gamma_grid)
    if not c_grid or not gamma_grid:
        raise DataError("grid_search needs non-empty grids")
    if folds < 2:
        raise DataError("grid_search needs folds >= 2")
    x, y, idx = _stack_samples(samples)
    fold_ids = _stratified_fold_ids(y, folds)
    for f in range(folds):
        train_y = y[fold_ids != f]
        if len(np.unique(train_y)) < 2:
            raise DataError(f"fold {f} leaves a single-class training split; reduce folds")

    def evaluate_cell(c: float, gamma: float) -> float:
        tp = fp = fn = 0
        for f in range(folds):
            train = fold_ids != f
            train_samples = [
                LabeledSample(x[t], Label(int(y[t])), SampleOrigin.RANDOM_NON_EVENT, int(idx[t]))
                for t in np.flatnonzero(train)
            ]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                model = svm_train(train_samples, c, gamma)
            pred = model.predict_batch(x[~train], prenormalized=True)
            t, p, n = _fscore_counts(pred, y[~train])
            tp, fp, fn = tp + t, fp + p, fn + n
        if tp == 0:
            return 0.0
        precision = tp / (tp + fp)
        recall = tp / (tp + fn)
        return 2 * precision * recall / (precision + recall)

    cells = [(c, g) for c in c_grid for g in gamma_grid]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            scores = list(pool.map(lambda cg: evaluate_cell(*cg), cells))
    else:
        scores = [evaluate_cell(c, g) for c, g in cells]

    best = max(range(len(cells)), key=lambda i: (scores[i], -cells[i][0], -cells[i][1]))
    return cells[best][0], cells[best][1], scores[best]


def save_model(model: KnnModel | SvmModel, path: str | Path) -> None:
    """Persist a trained model to a versioned .npz container; round-trips bit-exactly."""
    meta = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "variant": model.variant,
        "feature_kind": model.feature_kind.value,
        "f0": model.f0,
        "norm": model.norm.to_dict(),
    }
    arrays: dict[str, np.ndarray] = {}
    if model.variant == "knn":
        meta["k"] = model.k
        arrays.update(x=model.x, y=model.y, sample_index=model.sample_index)
    else:
        meta.update(
            c=model.c, gamma=model.gamma, bias=model.bias,
            converged=model.converged, kkt_residual=model.kkt_residual,
            iterations=model.iterations,
        )
        arrays.update(support_vectors=model.support_vectors, dual_coef=model.dual_coef)
    np.savez(path, meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8), **arrays)


def load_model(path: str | Path) -> KnnModel | SvmModel:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta.get("format") != MODEL_FORMAT:
            raise DataError(f"{path} is not a {MODEL_FORMAT} container")
        if meta.get("version") != MODEL_VERSION:
            raise DataError(f"unsupported model version {meta.get('version')}")
        norm = NormalizationParams.from_dict(meta["norm"])
        kind = FeatureKind(meta["feature_kind"])
        if meta["variant"] == "knn":
            return KnnModel(
                x=data["x"], y=data["y"], sample_index=data["sample_index"],
                k=int(meta["k"]), norm=norm, feature_kind=kind, f0=int(meta["f0"]),
            )
        return SvmModel(
            support_vectors=data["support_vectors"], dual_coef=data["dual_coef"],
            bias=float(meta["bias"]), c=float(meta["c"]), gamma=float(meta["gamma"]),
            norm=norm, feature_kind=kind, f0=int(meta["f0"]),
            converged=bool(meta["converged"]), kkt_residual=float(meta["kkt_residual"]),
            iterations=int(meta["iterations"]),
        )
