"""Empirical measures over particle states."""

from __future__ import annotations

import numpy as np


def _as_states(samples) -> np.ndarray:
    arr = np.asarray(samples, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError(f"expected an (N, d) array of states, got shape {arr.shape}")
    return arr


class EmpiricalMeasure:
    """Uniform Dirac mixture ``(1/N) sum_i delta_{Y^i}`` over ``N x d`` states.

    A 1-D input is read as ``N`` scalar states.  The samples are copied and
    frozen; every statistic is a pure function of them.
    """

    __slots__ = ("samples", "_mean")

    def __init__(self, samples):
        arr = _as_states(samples)
        if not np.isfinite(arr).all():
            raise ValueError("empirical measure samples must be finite")
        arr = arr.copy()
        arr.setflags(write=False)
        self.samples = arr
        self._mean = None

    @property
    def N(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def mean(self) -> np.ndarray:
        if self._mean is None:
            m = self.samples.mean(axis=0)
            m.setflags(write=False)
            self._mean = m
        return self._mean

    def moment(self, p: int) -> float:
        return moment(self, p)

    def w2_to_dirac0(self) -> float:
        return w2_to_dirac0(self)

    def __repr__(self):
        return f"EmpiricalMeasure(N={self.N}, d={self.dim})"


class DiracBatch:
    """A batch of point masses ``delta_{a_k}``, one per row of ``points``.

    Coefficients written against ``mean()`` accept this in place of an
    :class:`EmpiricalMeasure`, which lets assumption checks evaluate many
    (state, measure) pairs in one vectorised call.
    """

    __slots__ = ("points",)

    def __init__(self, points):
        self.points = _as_states(points)

    def mean(self) -> np.ndarray:
        return self.points

    def w2_to_dirac0(self) -> np.ndarray:
        return np.linalg.norm(self.points, axis=1)


def mean(measure: EmpiricalMeasure) -> np.ndarray:
    return measure.mean()


def w2_to_dirac0(measure: EmpiricalMeasure) -> float:
    """W2 distance to the Dirac mass at the origin: the root mean squared norm."""
    return float(np.sqrt(np.mean(np.sum(measure.samples ** 2, axis=1))))


def moment(measure: EmpiricalMeasure, p: int) -> float:
    """Empirical ``(1/N) sum |Y^i|^p`` for even ``p >= 2``."""
    if p < 2 or p % 2:
        raise ValueError(f"moment order must be an even integer >= 2, got {p}")
    with np.errstate(over="ignore"):
        sq = np.sum(measure.samples ** 2, axis=1)
        return float(np.mean(sq ** (p // 2)))


def wasserstein2_1d(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """Exact W2 between two equal-size 1-D empirical measures (sorted coupling)."""
    if mu.dim != 1 or nu.dim != 1:
        raise ValueError("wasserstein2_1d only handles one-dimensional states")
    if mu.N != nu.N:
        raise ValueError(f"sample sizes differ ({mu.N} vs {nu.N}); subsample first")
    x = np.sort(mu.samples[:, 0])
    y = np.sort(nu.samples[:, 0])
    return float(np.sqrt(np.mean((x - y) ** 2)))
