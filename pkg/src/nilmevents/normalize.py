"""Feature-space normalization fitted on training data and replayed on test data."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from nilmevents.errors import DataError


class NormKind(str, Enum):
    NONE = "none"
    MINMAX = "minmax"
    VARIANCE = "variance"


@dataclass
class NormalizationParams:
    """Per-dimension statistics captured at fit time.

    MINMAX maps the fitted range onto [-1, 1]; VARIANCE standardizes with the
    population deviation. Constant dimensions map to 0 under both kinds.
    """

    kind: NormKind
    dim: int
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    _span: np.ndarray = field(init=False, repr=False, default=None)
    _safe_std: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self) -> None:
        if self.kind is NormKind.MINMAX:
            if self.lo is None or self.hi is None or len(self.lo) != self.dim or len(self.hi) != self.dim:
                raise DataError("minmax params need lo/hi of length dim")
            if np.any(self.hi < self.lo):
                raise DataError("minmax params require hi >= lo per dimension")
            span = self.hi - self.lo
            self._span = np.where(span == 0.0, 1.0, span)
        elif self.kind is NormKind.VARIANCE:
            if self.mean is None or self.std is None or len(self.mean) != self.dim or len(self.std) != self.dim:
                raise DataError("variance params need mean/std of length dim")
            if np.any(self.std < 0.0):
                raise DataError("variance params require std >= 0")
            self._safe_std = np.where(self.std == 0.0, 1.0, self.std)

    def _check_dim(self, x: np.ndarray) -> None:
        if x.shape[-1] != self.dim:
            raise DataError(f"vector dim {x.shape[-1]} does not match fitted dim {self.dim}")

    def transform(self, x: np.ndarray) -> np.ndarray:
        """Apply the fitted mapping to a vector or a matrix of row vectors."""
        x = np.asarray(x, dtype=np.float64)
        self._check_dim(x)
        if self.kind is NormKind.NONE:
            return x.copy()
        if self.kind is NormKind.MINMAX:
            out = 2.0 * (x - self.lo) / self._span - 1.0
            const = (self.hi == self.lo)
        else:
            out = (x - self.mean) / self._safe_std
            const = (self.std == 0.0)
        if np.any(const):
            out[..., const] = 0.0
        return out

    def inverse_transform(self, x: np.ndarray) -> np.ndarray:
        """Undo transform for non-constant dimensions (constant dims return their fitted value)."""
        x = np.asarray(x, dtype=np.float64)
        self._check_dim(x)
        if self.kind is NormKind.NONE:
            return x.copy()
        if self.kind is NormKind.MINMAX:
            out = (x + 1.0) / 2.0 * self._span + self.lo
            const = (self.hi == self.lo)
            if np.any(const):
                out[..., const] = np.broadcast_to(self.lo, x.shape)[..., const]
        else:
            out = x * self._safe_std + self.mean
            const = (self.std == 0.0)
            if np.any(const):
                out[..., const] = np.broadcast_to(self.mean, x.shape)[..., const]
        return out

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "dim": self.dim}
        for name in ("lo", "hi", "mean", "std"):
            arr = getattr(self, name)
            if arr is not None:
                out[name] = [float(v) for v in arr]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "NormalizationParams":
        arrays = {
            name: np.asarray(data[name], dtype=np.float64)
            for name in ("lo", "hi", "mean", "std")
            if name in data
        }
        return cls(kind=NormKind(data["kind"]), dim=int(data["dim"]), **arrays)


def fit(matrix: np.ndarray, kind: NormKind) -> NormalizationParams:
    """Fit normalization statistics on a training matrix of row vectors."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise DataError("normalization fit needs a non-empty 2-D matrix")
    if matrix.shape[0] < 2:
        raise DataError("normalization fit needs at least 2 rows")
    kind = NormKind(kind)
    dim = matrix.shape[1]
    if kind is NormKind.NONE:
        return NormalizationParams(kind=kind, dim=dim)
    if kind is NormKind.MINMAX:
        return NormalizationParams(kind=kind, dim=dim,
                                   lo=matrix.min(axis=0), hi=matrix.max(axis=0))
    # population deviation: the fitted set itself standardizes to exactly 1
    return NormalizationParams(kind=kind, dim=dim,
                               mean=matrix.mean(axis=0), std=matrix.std(axis=0, ddof=0))
