"""Filtered next-step prediction and Monte Carlo multi-step forecasts."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .grid import expectation, sample_index, std_dev
from .lstm import Checkpoint, LstmState, run_sequence, step

# Replicas are advanced in fixed-size blocks so results do not depend on the
# number of worker threads.
BLOCK = 256
HIST_BINS = 200


@dataclass(frozen=True)
class ForecastConfig:
    n_samples: int = 20_000
    horizon: int = 500
    warmup: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1 or self.horizon < 1:
            raise ValueError("n_samples and horizon must be >= 1")
        if self.warmup < 1:
            raise ValueError("warmup must be >= 1")


@dataclass(frozen=True)
class NextStep:
    mean: np.ndarray  # E[y_{t+1}] for t = 0 .. N-1
    std: np.ndarray
    probs: np.ndarray  # increment distributions, (N, n_bins)


def filter_next_step(ckpt: Checkpoint, observations) -> NextStep:
    """Run the model over ``observations``; level predictions for every next step."""
    y = np.asarray(observations, dtype=float)
    if y.size == 0:
        raise ValueError("observations must be non-empty")
    p, _, _ = run_sequence(ckpt.params, LstmState.zeros(ckpt.params.n_cells), ckpt.standardize(y))
    return NextStep(mean=y + expectation(ckpt.grid, p), std=std_dev(ckpt.grid, p), probs=p)


def nearest_rank(sorted_samples, q: float):
    """Nearest-rank quantile along axis 0 of an already sorted array."""
    n = sorted_samples.shape[0]
    k = max(1, math.ceil(q * n))
    return sorted_samples[k - 1]


@dataclass(frozen=True)
class ForecastEnsemble:
    samples: np.ndarray  # (n_samples, horizon)
    mean: np.ndarray
    std: np.ndarray
    q025: np.ndarray
    q975: np.ndarray
    hist_edges: np.ndarray
    hist: np.ndarray  # (horizon, HIST_BINS) probability per value bin

    @classmethod
    def from_samples(cls, samples) -> "ForecastEnsemble":
        samples = np.asarray(samples, dtype=float)
        srt = np.sort(samples, axis=0)
        lo, hi = float(samples.min()), float(samples.max())
        if hi == lo:
            lo, hi = lo - 0.5, hi + 0.5
        edges = np.linspace(lo, hi, HIST_BINS + 1)
        hist = np.stack(
            [np.histogram(samples[:, k], bins=edges)[0] for k in range(samples.shape[1])]
        ) / samples.shape[0]
        return cls(
            samples=samples,
            mean=samples.mean(axis=0),
            std=samples.std(axis=0),
            q025=nearest_rank(srt, 0.025),
            q975=nearest_rank(srt, 0.975),
            hist_edges=edges,
            hist=hist,
        )

    @property
    def horizon(self) -> int:
        return self.samples.shape[1]

    def coverage(self, truth) -> float:
        """Fraction of steps with ``truth`` inside the central 95% band."""
        truth = np.asarray(truth)
        return float(np.mean((truth >= self.q025) & (truth <= self.q975)))


def replica_streams(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _propagate(ckpt, state, p0, last, uniforms):
    """Sample-then-update for a block of replicas sharing one start state."""
    n, horizon = uniforms.shape
    mids = ckpt.grid.midpoints
    st = LstmState(np.repeat(state.s[None], n, 0), np.repeat(state.h[None], n, 0))
    p = np.repeat(p0[None], n, 0)
    level = np.full(n, last)
    out = np.empty((n, horizon))
    for k in range(horizon):
        level = level + mids[sample_index(p, uniforms[:, k])]
        out[:, k] = level
        if k + 1 < horizon:
            p, st, _ = step(ckpt.params, st, ckpt.standardize(level))
    return out


def forecast(
    ckpt: Checkpoint,
    observations,
    config: ForecastConfig,
    threads: int = 1,
    rngs: list[np.random.Generator] | None = None,
) -> ForecastEnsemble:
    """Monte Carlo forecast of ``config.horizon`` steps after ``config.warmup`` observations.

    Each replica draws from its own generator (spawned from ``config.seed``
    unless ``rngs`` is given), so output is independent of ``threads``.
    """
    y = np.asarray(observations, dtype=float)
    if len(y) < config.warmup:
        raise ValueError(f"warmup {config.warmup} exceeds the {len(y)} available observations")
    warm = y[: config.warmup]
    p, state, _ = run_sequence(ckpt.params, LstmState.zeros(ckpt.params.n_cells), ckpt.standardize(warm))
    p0 = p[-1]
    if rngs is None:
        rngs = replica_streams(config.seed, config.n_samples)
    if len(rngs) != config.n_samples:
        raise ValueError("need one generator per replica")
    uniforms = np.stack([g.random(config.horizon) for g in rngs])
    blocks = [slice(i, min(i + BLOCK, config.n_samples)) for i in range(0, config.n_samples, BLOCK)]

    def run(b):
        return _propagate(ckpt, state, p0, warm[-1], uniforms[b])

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    return ForecastEnsemble.from_samples(np.concatenate(parts))
