"""Ragged container for a functional time series observed at scattered points."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ValidationError


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FunctionalDataset:
    """``n`` time-ordered curves; curve ``i`` holds ``N_i`` pairs ``(x, y)``.

    Observations are stored flat, curve after curve, with ``offsets`` marking
    where each curve starts (``offsets[i]:offsets[i+1]``). The arrays are
    read-only: the order of curves is the time order and must not change.
    """

    x: np.ndarray
    y: np.ndarray
    offsets: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        x, y = _frozen(self.x), _frozen(self.y)
        offsets = np.array(self.offsets, dtype=np.int64)
        offsets.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "offsets", offsets)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValidationError("x and y must be 1-d arrays of equal length")
        if offsets.ndim != 1 or len(offsets) < 2 or offsets[0] != 0 or offsets[-1] != len(x):
            raise ValidationError("offsets must run from 0 to the number of observations")
        if np.any(np.diff(offsets) < 1):
            raise ValidationError("every curve needs at least one observation")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValidationError("observations must be finite")
        if np.any(x < 0.0) or np.any(x > 1.0):
            raise DomainError("sampling locations must lie in [0, 1]")

    @classmethod
    def from_curves(cls, curves: Iterable[tuple[Sequence[float], Sequence[float]]]) -> FunctionalDataset:
        xs, ys, sizes = [], [], []
        for cx, cy in curves:
            cx, cy = np.atleast_1d(np.asarray(cx, float)), np.atleast_1d(np.asarray(cy, float))
            if cx.shape != cy.shape:
                raise ValidationError("curve x and y differ in length")
            xs.append(cx)
            ys.append(cy)
            sizes.append(len(cx))
        if not sizes:
            raise ValidationError("dataset has no curves")
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        return cls(np.concatenate(xs), np.concatenate(ys), offsets)

    @property
    def n(self) -> int:
        return len(self.offsets) - 1

    @property
    def sizes(self) -> np.ndarray:
        """``N_i`` for every curve."""
        return np.diff(self.offsets)

    @property
    def curve_index(self) -> np.ndarray:
        """Curve id of every flat observation."""
        if "curve_index" not in self._cache:
            idx = np.repeat(np.arange(self.n), self.sizes)
            idx.setflags(write=False)
            self._cache["curve_index"] = idx
        return self._cache["curve_index"]

    @property
    def obs_weight(self) -> np.ndarray:
        """``1 / N_i`` repeated over the observations of curve ``i``."""
        return (1.0 / self.sizes)[self.curve_index]

    def curve(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        s = slice(self.offsets[i], self.offsets[i + 1])
        return self.x[s], self.y[s]

    def curves(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [self.curve(i) for i in range(self.n)]

    def split(self, values: np.ndarray) -> list[np.ndarray]:
        """Cut a flat per-observation array into per-curve pieces."""
        return np.split(np.asarray(values), self.offsets[1:-1])

    def with_y(self, y: np.ndarray) -> FunctionalDataset:
        return FunctionalDataset(self.x, y, self.offsets)

    def __len__(self) -> int:
        return self.n
