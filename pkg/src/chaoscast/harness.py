"""generate -> train -> evaluate -> forecast, writing tidy CSV/JSON outputs.

Output layout under ``config.out_dir``::

    config.json
    data/{train,valid,test}.csv, data/meta.json
    model/checkpoint.json, model/loss.csv
    eval/metrics.json, eval/phase.csv, eval/next_step.csv, eval/distribution.csv
    forecast/forecast.csv, forecast/density.csv, forecast/metrics.json
"""
from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .config import ExperimentConfig
from .dde import DenseSolution, SamplingSpec, Trajectory, integrate, sample_and_observe
from .errors import ConfigurationError
from .forecast import ForecastEnsemble, filter_next_step, forecast
from .lstm import Checkpoint
from .trainer import prepare_datasets, train

log = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")


@dataclass
class MetricsReport:
    rmse_ratio: float
    std_ratio: float
    persistence_ratio: float
    coverage_95: float | None = None
    loss_history: str | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


def _paths(cfg: ExperimentConfig) -> dict[str, Path]:
    out = Path(cfg.out_dir)
    return {
        "root": out,
        "data": out / "data",
        "model": out / "model",
        "eval": out / "eval",
        "forecast": out / "forecast",
    }


def _writable(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigurationError(f"cannot create output directory {path}: {e}") from e
    if not os.access(path, os.W_OK):
        raise ConfigurationError(f"output directory {path} is not writable")
    return path


def split_seeds(seed: int) -> dict[str, int]:
    """Disjoint noise seeds for the three splits."""
    children = np.random.SeedSequence(seed).spawn(len(SPLITS))
    return {name: int(c.generate_state(1)[0]) for name, c in zip(SPLITS, children)}


def generate(cfg: ExperimentConfig) -> dict[str, Trajectory]:
    """One long integration cut into consecutive train/valid/test segments."""
    sc = cfg.system
    lengths = {"train": sc.train_len, "valid": sc.valid_len, "test": sc.test_len}
    total = sum(lengths.values())
    dense = integrate(sc.system(), sc.integration(total))
    stride = round(sc.delta_t / sc.dt)
    seeds = split_seeds(cfg.seed)
    out, start = {}, 0
    for name in SPLITS:
        n = lengths[name]
        seg = dense.values[start * stride:(start + n - 1) * stride + 1]
        part = DenseSolution(dense.t0 + start * sc.delta_t, sc.dt, seg)
        out[name] = sample_and_observe(part, SamplingSpec(sc.delta_t, sc.noise_ratio, seeds[name]))
        start += n
    return out


def cmd_generate(cfg: ExperimentConfig) -> dict[str, Trajectory]:
    p = _paths(cfg)
    _writable(p["data"])
    cfg.save(p["root"] / "config.json")
    trajs = generate(cfg)
    meta = {}
    for name, tr in trajs.items():
        io.write_trajectory(p["data"] / f"{name}.csv", tr)
        meta[name] = {"t0": tr.t0, "delta_t": tr.delta_t, "sigma": tr.sigma, "n": len(tr)}
    io.write_json(p["data"] / "meta.json", meta)
    log.info("wrote %s", ", ".join(f"{k}={len(v)}" for k, v in trajs.items()))
    return trajs


def load_dataset(data_dir) -> dict[str, Trajectory]:
    data_dir = Path(data_dir)
    meta_path = data_dir / "meta.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"no dataset in {data_dir} (run `generate` first)")
    meta = io.read_json(meta_path)
    return {
        name: io.read_trajectory(data_dir / f"{name}.csv", m["sigma"], m["delta_t"])
        for name, m in meta.items()
    }


def cmd_train(cfg: ExperimentConfig) -> tuple[Checkpoint, list]:
    p = _paths(cfg)
    data = load_dataset(p["data"])
    reference_sd = float(np.std(data["train"].truth))
    tr, va = prepare_datasets(data["train"].observed, data["valid"].observed, cfg.model.width_ratio, reference_sd)
    log.info("grid: %d bins of width %.5g", tr.grid.n_bins, tr.grid.width)
    ckpt, history = train(tr, va, cfg.training, n_cells=cfg.model.n_cells)
    ckpt.meta.update(system=cfg.system.kind, delta_t=data["train"].delta_t, reference_sd=reference_sd)
    _writable(p["model"])
    ckpt.save(p["model"] / "checkpoint.json")
    io.write_csv(p["model"] / "loss.csv", ["epoch", "train_loss", "valid_loss"], history)
    print(f"final validation loss {history[-1][2]:.6f} (best {ckpt.meta['best_valid_loss']:.6f})")
    return ckpt, history


def rmse_ratio(pred, truth, sigma: float) -> float:
    """RMSE in units of the noise STD; plain RMSE when the data are noiseless."""
    rmse = float(np.sqrt(np.mean((np.asarray(pred) - np.asarray(truth)) ** 2)))
    return rmse / sigma if sigma > 0 else rmse


def persistence_ratio(traj: Trajectory) -> float:
    """Error of predicting the next truth value by the current observation."""
    return rmse_ratio(traj.observed[:-1], traj.truth[1:], traj.sigma)


def persistence_closed_form(traj: Trajectory) -> float:
    """Expected persistence error: sqrt(1 + <dy^2> / sigma^2)."""
    dy2 = float(np.mean(np.diff(traj.truth) ** 2))
    if traj.sigma == 0:
        return math.sqrt(dy2)
    return math.sqrt(1.0 + dy2 / traj.sigma**2)


def next_step_metrics(pred_mean, pred_std, traj: Trajectory, skip: int = 0) -> MetricsReport:
    """``pred_mean[t]`` predicts ``truth[t+1]``; the first ``skip`` steps are spin-up."""
    sl = slice(skip, len(traj) - 1)
    sigma = traj.sigma
    std = float(np.mean(pred_std[sl]))
    return MetricsReport(
        rmse_ratio=rmse_ratio(pred_mean[sl], traj.truth[1:][sl], sigma),
        std_ratio=std / sigma if sigma > 0 else std,
        persistence_ratio=rmse_ratio(traj.observed[:-1][sl], traj.truth[1:][sl], sigma),
    )


def check_compatible(ckpt: Checkpoint, cfg: ExperimentConfig, traj: Trajectory) -> None:
    """The checkpoint must come from the same system and sampling as ``traj``."""
    meta = ckpt.meta
    if meta.get("system", cfg.system.kind) != cfg.system.kind:
        raise ConfigurationError(f"checkpoint was trained on {meta['system']}, data is {cfg.system.kind}")
    if not math.isclose(meta.get("delta_t", traj.delta_t), traj.delta_t, rel_tol=1e-9):
        raise ConfigurationError("checkpoint grid was built for a different sampling interval")


def cmd_evaluate(cfg: ExperimentConfig) -> MetricsReport:
    p = _paths(cfg)
    ckpt = Checkpoint.load(p["model"] / "checkpoint.json")
    test = load_dataset(p["data"])["test"]
    check_compatible(ckpt, cfg, test)
    nxt = filter_next_step(ckpt, test.observed)
    report = next_step_metrics(nxt.mean, nxt.std, test, skip=cfg.forecast.warmup)
    report.loss_history = "model/loss.csv"
    _writable(p["eval"])
    io.write_json(p["eval"] / "metrics.json", report.to_dict())
    lag = cfg.system.delay_lag
    # prediction of sample i made after seeing samples 0..i-1
    pred = np.concatenate([[np.nan], nxt.mean[:-1]])
    idx = np.arange(lag + 1, len(test))
    io.write_csv(
        p["eval"] / "phase.csv",
        ["t", "observed", "observed_lag", "truth", "truth_lag", "prediction", "prediction_lag"],
        zip(
            test.times[idx], test.observed[idx], test.observed[idx - lag], test.truth[idx],
            test.truth[idx - lag], pred[idx], pred[idx - lag],
        ),
    )
    io.write_csv(
        p["eval"] / "next_step.csv",
        ["t", "truth", "observed", "prediction", "std"],
        zip(test.times[1:], test.truth[1:], test.observed[1:], nxt.mean[:-1], nxt.std[:-1]),
    )
    write_distribution(p["eval"] / "distribution.csv", ckpt, nxt, test, min(cfg.forecast.warmup, len(test) - 2))
    print(
        f"rmse_ratio {report.rmse_ratio:.4f}  std_ratio {report.std_ratio:.4f}  "
        f"persistence {report.persistence_ratio:.4f}"
    )
    return report


def write_distribution(path, ckpt: Checkpoint, nxt, traj: Trajectory, index: int) -> None:
    """Predictive distribution of the observation at ``index + 1``, in level units."""
    levels = traj.observed[index] + ckpt.grid.midpoints
    io.write_csv(path, ["value", "prob", "truth"], ((v, pr, traj.truth[index + 1]) for v, pr in zip(levels, nxt.probs[index])))


def cmd_forecast(cfg: ExperimentConfig, threads: int | None = None) -> tuple[ForecastEnsemble, float]:
    p = _paths(cfg)
    ckpt = Checkpoint.load(p["model"] / "checkpoint.json")
    test = load_dataset(p["data"])["test"]
    check_compatible(ckpt, cfg, test)
    fc = cfg.forecast
    start = cfg.start_index
    need = start + fc.warmup + fc.horizon
    if need > len(test):
        raise ConfigurationError(
            f"test trajectory has {len(test)} samples, forecast needs {need} "
            f"(start {start} + warmup {fc.warmup} + horizon {fc.horizon})"
        )
    obs = test.observed[start:start + fc.warmup]
    ens = forecast(ckpt, obs, fc, threads=threads or os.cpu_count() or 1)
    first = start + fc.warmup
    truth = test.truth[first:first + fc.horizon]
    coverage = ens.coverage(truth)
    _writable(p["forecast"])
    io.write_csv(
        p["forecast"] / "forecast.csv",
        ["step", "mean", "std", "q025", "q975", "truth"],
        zip(range(1, fc.horizon + 1), ens.mean, ens.std, ens.q025, ens.q975, truth),
    )
    centres = 0.5 * (ens.hist_edges[:-1] + ens.hist_edges[1:])
    io.write_csv(
        p["forecast"] / "density.csv",
        ["step", "value", "prob"],
        ((k + 1, c, pr) for k in range(fc.horizon) for c, pr in zip(centres, ens.hist[k])),
    )
    io.write_json(
        p["forecast"] / "metrics.json",
        {
            "coverage_95": coverage,
            "std_first": float(ens.std[0]),
            "std_last": float(ens.std[-1]),
            "sigma": test.sigma,
        },
    )
    print(f"coverage_95 {coverage:.3f}  std step1 {ens.std[0]:.4g}  std final {ens.std[-1]:.4g}")
    return ens, coverage


def cmd_pipeline(cfg: ExperimentConfig, threads: int | None = None) -> MetricsReport:
    cmd_generate(cfg)
    cmd_train(cfg)
    report = cmd_evaluate(cfg)
    _, report.coverage_95 = cmd_forecast(cfg, threads)
    io.write_json(Path(cfg.out_dir) / "eval" / "metrics.json", report.to_dict())
    return report
