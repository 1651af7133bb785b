"""Regularized cross-entropy, backpropagation through time, ADAM, training.

The per-step loss is::

    -log P[label] + lam * sum_{i=1}^{N_o-2} (P[i-1] - 2 P[i] + P[i+1])**2

with the Laplacian taken over interior bins only.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .grid import BinGrid, build_grid, label_of
from .lstm import Checkpoint, LinearMap, LstmParams, LstmState, SequenceCache, init_params, run_sequence

log = logging.getLogger(__name__)

P_FLOOR = 1e-300


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 20
    bptt_len: int = 100
    lam: float = 200.0
    epochs: int = 50
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.bptt_len < 2:
            raise ValueError("bptt_len must be >= 2")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")


@dataclass(frozen=True)
class TrainingSet:
    inputs: np.ndarray  # standardized observations y_0 .. y_{N-1}
    targets: np.ndarray  # bin labels of y_{t+1} - y_t
    grid: BinGrid
    mean: float
    sd: float

    def __post_init__(self):
        if len(self.inputs) != len(self.targets):
            raise ValueError("inputs and targets must be aligned")
        if len(self.targets) and (self.targets.min() < 0 or self.targets.max() >= self.grid.n_bins):
            raise ValueError("label out of range")

    def __len__(self):
        return len(self.targets)


def make_training_set(observed, grid: BinGrid, mean: float, sd: float) -> TrainingSet:
    """Pair each observation with the bin label of the following increment."""
    y = np.asarray(observed, dtype=float)
    return TrainingSet(
        inputs=(y[:-1] - mean) / sd,
        targets=label_of(grid, np.diff(y)),
        grid=grid,
        mean=float(mean),
        sd=float(sd),
    )


def prepare_datasets(train_obs, valid_obs, width_ratio: float, reference_sd: float):
    """Grid and standardization come from the training series only."""
    train_obs = np.asarray(train_obs, dtype=float)
    grid = build_grid(np.diff(train_obs), width_ratio, reference_sd)
    mean, sd = float(np.mean(train_obs)), float(np.std(train_obs))
    return (
        make_training_set(train_obs, grid, mean, sd),
        make_training_set(valid_obs, grid, mean, sd),
    )


def laplacian(p):
    return p[..., :-2] - 2.0 * p[..., 1:-1] + p[..., 2:]


def loss(p, label, lam: float):
    """Regularized cross-entropy; broadcasts over leading axes of ``p``."""
    p = np.asarray(p, dtype=float)
    label = np.asarray(label)
    picked = np.take_along_axis(p, label[..., None], axis=-1)[..., 0]
    ce = -np.log(np.maximum(picked, P_FLOOR))
    pen = lam * np.sum(laplacian(p) ** 2, axis=-1)
    return ce + pen


def penalty_grad_p(p, lam: float):
    """Gradient of the Laplacian penalty with respect to ``p``."""
    lap = laplacian(p)
    g = np.zeros_like(p)
    g[..., :-2] += lap
    g[..., 1:-1] -= 2.0 * lap
    g[..., 2:] += lap
    return 2.0 * lam * g


def logits_grad(p, labels, lam: float):
    """Gradient of the summed loss with respect to the softmax logits."""
    d = p.copy()
    np.put_along_axis(d, labels[..., None], np.take_along_axis(d, labels[..., None], -1) - 1.0, -1)
    if lam:
        gp = penalty_grad_p(p, lam)
        d += p * (gp - np.sum(gp * p, axis=-1, keepdims=True))
    return d


def _flat(a):
    return a.reshape(-1, a.shape[-1])


def backward(params: LstmParams, cache: SequenceCache, labels, lam: float) -> LstmParams:
    """Exact gradient of the window-summed loss; the incoming state is a constant."""
    labels = np.asarray(labels)
    if labels.shape != cache.p.shape[:-1]:
        raise ValueError(f"labels shape {labels.shape} does not match outputs {cache.p.shape[:-1]}")
    nc = params.n_cells
    T = labels.shape[0]
    # output head, all steps at once
    do = logits_grad(cache.p, labels, lam)
    dW_out = _flat(do).T @ _flat(cache.r2)
    db_out = _flat(do).sum(0)
    dq2 = (do @ params.out_final.weight) * (1.0 - cache.r2**2)
    dW2 = _flat(dq2).T @ _flat(cache.r1)
    db2 = _flat(dq2).sum(0)
    dq1 = (dq2 @ params.out_hidden2.weight) * (0.5 * (1.0 + np.tanh(0.5 * cache.q1)))
    dW1 = _flat(dq1).T @ _flat(cache.h[1:])
    db1 = _flat(dq1).sum(0)
    dh_out = dq1 @ params.out_hidden1.weight

    # recurrence, backwards in time
    Wg = params.gates.weight
    Wm = params.input_mix.weight
    da_all = np.empty(cache.gates.shape)
    dx_all = np.empty(cache.x.shape)
    dh_next = np.zeros(cache.s.shape[1:])
    ds_next = np.zeros(cache.s.shape[1:])
    for t in range(T - 1, -1, -1):
        g = cache.gates[t]
        g1, g2, g3, g4 = g[..., :nc], g[..., nc:2 * nc], g[..., 2 * nc:3 * nc], g[..., 3 * nc:]
        dh = dh_out[t] + dh_next
        ds = dh * g3 + ds_next
        da = da_all[t]
        da[..., :nc] = -ds * cache.s[t] * g1 * (1.0 - g1)
        da[..., nc:2 * nc] = ds * g4 * g2 * (1.0 - g2)
        da[..., 2 * nc:3 * nc] = dh * cache.s[t + 1] * g3 * (1.0 - g3)
        da[..., 3 * nc:] = ds * g2 * (1.0 - g4**2)
        dx = (da @ Wg) @ Wm
        dx_all[t] = dx
        dh_next = dx
        ds_next = ds * (1.0 - g1)
    dz_all = da_all @ Wg
    dWg = _flat(da_all).T @ _flat(cache.z)
    dbg = _flat(da_all).sum(0)
    dWm = _flat(dz_all).T @ _flat(cache.x)
    dbm = _flat(dz_all).sum(0)
    de = dx_all * (1.0 - cache.u**2)
    dWe = _flat(de).T @ cache.y.reshape(-1, 1)
    dbe = _flat(de).sum(0)
    return LstmParams(
        input_embed=LinearMap(dWe, dbe),
        input_mix=LinearMap(dWm, dbm),
        gates=LinearMap(dWg, dbg),
        out_hidden1=LinearMap(dW1, db1),
        out_hidden2=LinearMap(dW2, db2),
        out_final=LinearMap(dW_out, db_out),
    )


def sequence_loss(params: LstmParams, state: LstmState, inputs, labels, lam: float) -> float:
    p, _, _ = run_sequence(params, state, inputs)
    return float(np.sum(loss(p, labels, lam)))


@dataclass
class AdamState:
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params: LstmParams) -> "AdamState":
        arrs = params.arrays()
        return cls(0, [np.zeros_like(a) for a in arrs], [np.zeros_like(a) for a in arrs])


def adam_update(params: LstmParams, grads: LstmParams, state: AdamState, config: TrainConfig):
    """One bias-corrected ADAM step. Updates ``params`` and ``state`` in place."""
    state.t += 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m, state.v):
        if p.shape != g.shape:
            raise ValueError("gradient shape mismatch")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= config.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + config.adam_eps)
    return params, state


def stream_windows(n: int, batch_size: int, bptt_len: int):
    """Slice ``range(n)`` into ``batch_size`` equal streams walked window by window.

    Yields index arrays of shape ``(T, batch_size)``; the last window of an
    epoch may be shorter than ``bptt_len``.
    """
    seg = n // batch_size
    if seg < bptt_len:
        raise ValueError(
            f"training sequence of length {n} is too short for {batch_size} streams of "
            f"at least bptt_len={bptt_len} steps"
        )
    starts = np.arange(batch_size) * seg
    for w0 in range(0, seg, bptt_len):
        t = np.arange(w0, min(w0 + bptt_len, seg))
        yield t[:, None] + starts[None, :]


def evaluate_loss(params: LstmParams, data: TrainingSet, lam: float) -> float:
    """Mean per-step loss over a whole sequence from the zero state."""
    p, _, _ = run_sequence(params, LstmState.zeros(params.n_cells), data.inputs)
    return float(np.mean(loss(p, data.targets, lam)))


def histogram_baseline_loss(train: TrainingSet, valid: TrainingSet, lam: float, pseudocount: float = 1.0) -> float:
    """Validation loss of the best constant forecast: the training label histogram."""
    counts = np.bincount(train.targets, minlength=train.grid.n_bins) + pseudocount
    q = counts / counts.sum()
    return float(np.mean(loss(np.broadcast_to(q, (len(valid), len(q))), valid.targets, lam)))


def train(
    train_set: TrainingSet,
    valid_set: TrainingSet,
    config: TrainConfig,
    n_cells: int = 128,
    callback=None,
) -> tuple[Checkpoint, list[tuple[int, float, float]]]:
    """Truncated BPTT over stateful streams; returns the best-validation checkpoint.

    The history holds ``(epoch, mean train loss, mean validation loss)``.
    """
    if valid_set.grid != train_set.grid or (valid_set.mean, valid_set.sd) != (train_set.mean, train_set.sd):
        raise ValueError("training and validation sets must share grid and standardization")
    windows = list(stream_windows(len(train_set), config.batch_size, config.bptt_len))
    params = init_params(n_cells, train_set.grid.n_bins, config.seed)
    adam = AdamState.for_params(params)
    best, best_loss = params.copy(), np.inf
    history = []
    for epoch in range(1, config.epochs + 1):
        state = LstmState.zeros(n_cells, (config.batch_size,))
        total, count = 0.0, 0
        for idx in windows:
            labels = train_set.targets[idx]
            p, new_state, cache = run_sequence(params, state, train_set.inputs[idx])
            total += float(np.sum(loss(p, labels, config.lam)))
            count += labels.size
            grads = backward(params, cache, labels, config.lam)
            adam_update(params, grads, adam, config)
            state = new_state
        valid_loss = evaluate_loss(params, valid_set, config.lam)
        history.append((epoch, total / count, valid_loss))
        log.info("epoch %d  train %.5f  valid %.5f", epoch, total / count, valid_loss)
        if valid_loss < best_loss:
            best, best_loss = params.copy(), valid_loss
        if callback is not None:
            callback(epoch, params)
    ckpt = Checkpoint(best, train_set.grid, train_set.mean, train_set.sd, {"best_valid_loss": best_loss})
    return ckpt, history
