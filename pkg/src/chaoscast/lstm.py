"""The coupled-gate LSTM with a softmax output head.

One step maps a scalar input ``y`` and the state ``(s, h)`` to a discrete
distribution ``P`` over ``n_bins`` bins::

    z   = W_mix (tanh(W_emb y) + h_prev)
    G_k = sigmoid(W_k z), k = 1, 2, 3;   G_4 = tanh(W_4 z)
    s   = (1 - G_1) * s_prev + G_2 * G_4
    h   = G_3 * s
    P   = softmax(W_out tanh(W_2 softplus(W_1 h)))

Every ``W`` above is affine (weight and bias). The four gate maps are stored
stacked row-wise in a single ``(4 N_c, N_c)`` map so a step costs one matmul.
All functions accept a leading batch axis.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NumericalError
from .grid import BinGrid

MAP_NAMES = ("input_embed", "input_mix", "gates", "out_hidden1", "out_hidden2", "out_final")


@dataclass
class LinearMap:
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ValueError(
                f"inconsistent shapes: weight {self.weight.shape}, bias {self.bias.shape}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.weight.shape

    def __call__(self, x):
        return x @ self.weight.T + self.bias


@dataclass
class LstmParams:
    input_embed: LinearMap
    input_mix: LinearMap
    gates: LinearMap
    out_hidden1: LinearMap
    out_hidden2: LinearMap
    out_final: LinearMap

    def __post_init__(self):
        for name, shape in _shapes(self.n_cells, self.n_bins).items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def n_cells(self) -> int:
        return self.input_mix.shape[0]

    @property
    def n_bins(self) -> int:
        return self.out_final.shape[0]

    @property
    def gate_maps(self) -> list[LinearMap]:
        """The G_1..G_4 maps as views into the stacked gate map."""
        nc = self.n_cells
        return [
            LinearMap(self.gates.weight[k * nc:(k + 1) * nc], self.gates.bias[k * nc:(k + 1) * nc])
            for k in range(4)
        ]

    def maps(self) -> dict[str, LinearMap]:
        return {name: getattr(self, name) for name in MAP_NAMES}

    def arrays(self) -> list[np.ndarray]:
        """All weight and bias arrays in a fixed order (for optimizers)."""
        out = []
        for m in self.maps().values():
            out += [m.weight, m.bias]
        return out

    def copy(self) -> "LstmParams":
        return LstmParams(
            **{n: LinearMap(m.weight.copy(), m.bias.copy()) for n, m in self.maps().items()}
        )

    @classmethod
    def zeros(cls, n_cells: int, n_bins: int) -> "LstmParams":
        shapes = _shapes(n_cells, n_bins)
        return cls(**{n: LinearMap(np.zeros(s), np.zeros(s[0])) for n, s in shapes.items()})

    def to_dict(self) -> dict:
        d = {}
        for name, m in self.maps().items():
            if name == "gates":
                for k, g in enumerate(self.gate_maps, start=1):
                    d[f"gate_{k}"] = {"weight": g.weight.tolist(), "bias": g.bias.tolist()}
            else:
                d[name] = {"weight": m.weight.tolist(), "bias": m.bias.tolist()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LstmParams":
        maps = {n: LinearMap(d[n]["weight"], d[n]["bias"]) for n in MAP_NAMES if n != "gates"}
        gates = [LinearMap(d[f"gate_{k}"]["weight"], d[f"gate_{k}"]["bias"]) for k in range(1, 5)]
        maps["gates"] = LinearMap(
            np.concatenate([g.weight for g in gates]), np.concatenate([g.bias for g in gates])
        )
        return cls(**maps)


def _shapes(nc: int, no: int) -> dict[str, tuple[int, int]]:
    return {
        "input_embed": (nc, 1),
        "input_mix": (nc, nc),
        "gates": (4 * nc, nc),
        "out_hidden1": (nc, nc),
        "out_hidden2": (nc, nc),
        "out_final": (no, nc),
    }


def init_params(n_cells: int, n_bins: int, seed: int = 0) -> LstmParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    if n_cells < 1 or n_bins < 3:
        raise ValueError("need n_cells >= 1 and n_bins >= 3")
    rng = np.random.default_rng(seed)
    maps = {}
    for name, (a, b) in _shapes(n_cells, n_bins).items():
        k = 1.0 / np.sqrt(b)
        maps[name] = LinearMap(rng.uniform(-k, k, size=(a, b)), np.zeros(a))
    return LstmParams(**maps)


@dataclass
class LstmState:
    s: np.ndarray
    h: np.ndarray

    @classmethod
    def zeros(cls, n_cells: int, batch: tuple[int, ...] = ()) -> "LstmState":
        return cls(np.zeros(batch + (n_cells,)), np.zeros(batch + (n_cells,)))

    def copy(self) -> "LstmState":
        return LstmState(self.s.copy(), self.h.copy())


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softplus(x):
    return np.logaddexp(0.0, x)


def softmax(o):
    e = np.exp(o - np.max(o, axis=-1, keepdims=True))
    return e / np.sum(e, axis=-1, keepdims=True)


def _finite(name: str, x):
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"non-finite values in layer {name!r}")


def step(params: LstmParams, state: LstmState, y_in) -> tuple[np.ndarray, LstmState, dict]:
    """Advance one step; ``y_in`` is a scalar or a batch of scalars."""
    y = np.asarray(y_in, dtype=float)
    _finite("input", y)
    nc = params.n_cells
    u = np.tanh(params.input_embed(y[..., None]))
    x = u + state.h
    z = params.input_mix(x)
    _finite("input_mix", z)
    a = params.gates(z)
    g123 = sigmoid(a[..., : 3 * nc])
    g4 = np.tanh(a[..., 3 * nc:])
    g1, g2, g3 = g123[..., :nc], g123[..., nc:2 * nc], g123[..., 2 * nc:]
    s = (1.0 - g1) * state.s + g2 * g4
    h = g3 * s
    _finite("state", s)
    q1 = params.out_hidden1(h)
    r1 = softplus(q1)
    r2 = np.tanh(params.out_hidden2(r1))
    o = params.out_final(r2)
    _finite("out_final", o)
    p = softmax(o)
    cache = {
        "y": y, "u": u, "x": x, "z": z, "gates": np.concatenate([g123, g4], axis=-1),
        "s_prev": state.s, "s": s, "h": h, "q1": q1, "r1": r1, "r2": r2, "p": p,
    }
    return p, LstmState(s, h), cache


@dataclass
class SequenceCache:
    """Forward intermediates of a window, time-major ``(T, *batch, ...)``."""

    y: np.ndarray
    u: np.ndarray
    x: np.ndarray
    z: np.ndarray
    gates: np.ndarray
    s: np.ndarray  # T+1 entries, s[0] is the incoming state
    h: np.ndarray  # T+1 entries
    q1: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    p: np.ndarray


def run_sequence(
    params: LstmParams, state: LstmState, inputs
) -> tuple[np.ndarray, LstmState, SequenceCache]:
    """Fold ``step`` over ``inputs`` (time on the first axis).

    Output ``k`` is the distribution after consuming inputs ``0..k``. The
    output head is evaluated once for the whole window.
    """
    y = np.asarray(inputs, dtype=float)
    if y.shape[0] == 0:
        raise ValueError("inputs must be non-empty")
    _finite("input", y)
    T, nc = y.shape[0], params.n_cells
    u = np.tanh(params.input_embed(y[..., None]))
    uz = u @ params.input_mix.weight.T + params.input_mix.bias
    Wm = params.input_mix.weight.T
    Wg, bg = params.gates.weight.T, params.gates.bias
    bshape = y.shape[1:] + (nc,)
    s = np.empty((T + 1,) + bshape)
    h = np.empty((T + 1,) + bshape)
    z = np.empty((T,) + bshape)
    gates = np.empty((T,) + y.shape[1:] + (4 * nc,))
    s[0], h[0] = state.s, state.h
    for t in range(T):
        zt = uz[t] + h[t] @ Wm
        a = zt @ Wg + bg
        g = gates[t]
        g[..., : 3 * nc] = sigmoid(a[..., : 3 * nc])
        g[..., 3 * nc:] = np.tanh(a[..., 3 * nc:])
        s[t + 1] = (1.0 - g[..., :nc]) * s[t] + g[..., nc:2 * nc] * g[..., 3 * nc:]
        h[t + 1] = g[..., 2 * nc:3 * nc] * s[t + 1]
        z[t] = zt
    _finite("state", s[-1])
    _finite("input_mix", z)
    q1 = params.out_hidden1(h[1:])
    r1 = softplus(q1)
    r2 = np.tanh(params.out_hidden2(r1))
    o = params.out_final(r2)
    _finite("out_final", o)
    p = softmax(o)
    cache = SequenceCache(y=y, u=u, x=u + h[:-1], z=z, gates=gates, s=s, h=h, q1=q1, r1=r1, r2=r2, p=p)
    return p, LstmState(s[-1].copy(), h[-1].copy()), cache


@dataclass
class Checkpoint:
    """A trained model together with its grid and input standardization."""

    params: LstmParams
    grid: BinGrid
    mean: float
    sd: float
    meta: dict = field(default_factory=dict)

    def standardize(self, y):
        return (np.asarray(y, dtype=float) - self.mean) / self.sd

    def to_dict(self) -> dict:
        return {
            "n_cells": self.params.n_cells,
            "n_bins": self.params.n_bins,
            "grid": self.grid.to_dict(),
            "standardization": {"mean": self.mean, "sd": self.sd},
            "params": self.params.to_dict(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Checkpoint":
        params = LstmParams.from_dict(d["params"])
        grid = BinGrid.from_dict(d["grid"])
        if (params.n_cells, params.n_bins) != (d["n_cells"], d["n_bins"]) or grid.n_bins != params.n_bins:
            raise ValueError("checkpoint dimensions are inconsistent")
        st = d["standardization"]
        return cls(params, grid, float(st["mean"]), float(st["sd"]), d.get("meta", {}))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "Checkpoint":
        return cls.from_dict(json.loads(Path(path).read_text()))
