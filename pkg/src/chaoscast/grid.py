"""Uniform bin grids for discretized predictive distributions.

Bin indices are 0-based here: bin ``i`` is ``[alpha[i], alpha[i+1])``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PAD_BINS = 5


@dataclass(frozen=True)
class BinGrid:
    alpha: np.ndarray
    width: float

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        object.__setattr__(self, "alpha", alpha)
        if alpha.ndim != 1 or len(alpha) < 4:
            raise ValueError("a grid needs at least 3 bins")
        gaps = np.diff(alpha)
        if not np.all(gaps > 0):
            raise ValueError("grid boundaries must be strictly increasing")
        if np.max(np.abs(gaps - self.width)) > 1e-12 * max(1.0, np.max(np.abs(alpha))):
            raise ValueError("grid is not uniform at the declared width")

    @classmethod
    def uniform(cls, lo: float, width: float, n_bins: int) -> "BinGrid":
        return cls(lo + width * np.arange(n_bins + 1), float(width))

    @property
    def n_bins(self) -> int:
        return len(self.alpha) - 1

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.alpha[:-1] + self.alpha[1:])

    def to_dict(self) -> dict:
        return {"alpha": self.alpha.tolist(), "width": self.width}

    @classmethod
    def from_dict(cls, d: dict) -> "BinGrid":
        return cls(np.array(d["alpha"], dtype=float), float(d["width"]))

    def __eq__(self, other):
        if not isinstance(other, BinGrid):
            return NotImplemented
        return self.width == other.width and np.array_equal(self.alpha, other.alpha)

    __hash__ = None


def build_grid(values, width_ratio: float, reference_sd: float) -> BinGrid:
    """Grid of width ``width_ratio * reference_sd`` covering ``values``.

    The sample range is rounded up to a whole number of bins, centred, and
    padded with ``PAD_BINS`` extra bins on each side.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("cannot build a grid from no samples")
    if not width_ratio > 0 or not reference_sd > 0:
        raise ValueError("bin width must be positive")
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        raise ValueError("degenerate samples: all values are equal")
    width = width_ratio * reference_sd
    core = math.ceil((hi - lo) / width - 1e-9)
    n_bins = core + 2 * PAD_BINS
    start = 0.5 * (lo + hi) - 0.5 * n_bins * width
    return BinGrid.uniform(start, width, n_bins)


def label_of(grid: BinGrid, value):
    """Bin index of ``value`` (scalar or array), clamped into range."""
    idx = np.searchsorted(grid.alpha, value, side="right") - 1
    idx = np.clip(idx, 0, grid.n_bins - 1)
    return int(idx) if np.ndim(idx) == 0 else idx


def check_probs(p, atol: float = 1e-9) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or abs(p.sum(axis=-1) - 1.0).max() > atol:
        raise ValueError("not a probability vector")
    return p


def expectation(grid: BinGrid, p) -> float | np.ndarray:
    """Midpoint-rule mean of ``p`` (last axis over bins)."""
    return np.asarray(p) @ grid.midpoints


def std_dev(grid: BinGrid, p) -> float | np.ndarray:
    # centred second moment; same value as E[m^2] - E[m]^2 without the cancellation
    p = np.asarray(p)
    m = grid.midpoints
    dev = m - (p @ m)[..., None]
    return np.sqrt(np.maximum(np.sum(p * dev * dev, axis=-1), 0.0))


def sample_index(p, u):
    """Inverse-CDF categorical draw(s): rows of ``p`` with uniforms ``u``."""
    cdf = np.cumsum(p, axis=-1)
    u = np.asarray(u)[..., None] * cdf[..., -1:]
    idx = np.sum(cdf <= u, axis=-1)
    return np.minimum(idx, np.shape(p)[-1] - 1)


def sample(grid: BinGrid, p, rng: np.random.Generator) -> float:
    """Draw one bin from ``p`` and return its midpoint."""
    return float(grid.midpoints[sample_index(p, rng.random())])
