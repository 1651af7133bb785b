"""Experiment configuration: one JSON document with system, model, training
and forecast blocks, plus named presets for both benchmark systems."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .dde import DdeSystem, IntegrationSpec, SystemKind
from .errors import ConfigurationError
from .forecast import ForecastConfig
from .trainer import TrainConfig


@dataclass(frozen=True)
class SystemConfig:
    kind: str = "mackey-glass"
    params: dict = field(default_factory=dict)
    tau: float = 17.0
    dt: float = 0.02
    history_value: float = 0.9
    burn_in: float = 500.0
    delta_t: float = 1.0
    noise_ratio: float = 0.3
    train_len: int = 160_000
    valid_len: int = 2_000
    test_len: int = 1_000

    def system(self) -> DdeSystem:
        return DdeSystem(SystemKind(self.kind), dict(self.params), self.tau)

    def integration(self, n_points: int) -> IntegrationSpec:
        return IntegrationSpec(
            dt=self.dt,
            t_end=self.burn_in + (n_points - 1) * self.delta_t,
            burn_in=self.burn_in,
            history_value=self.history_value,
        )

    @property
    def delay_lag(self) -> int:
        """Delay time in samples."""
        return round(self.tau / self.delta_t)


@dataclass(frozen=True)
class ModelConfig:
    n_cells: int = 128
    width_ratio: float = 0.02


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    forecast: ForecastConfig = field(default_factory=ForecastConfig)
    out_dir: str = "runs/latest"
    seed: int = 0
    start_index: int = 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        blocks = {"system": SystemConfig, "model": ModelConfig, "training": TrainConfig, "forecast": ForecastConfig}
        kw = {}
        for key, value in d.items():
            if key in blocks:
                kw[key] = _build(blocks[key], value)
            elif key in ("out_dir", "seed", "start_index"):
                kw[key] = value
            else:
                raise ConfigurationError(f"unknown config key {key!r}")
        return cls(**kw)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps() + "\n")

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.loads(Path(path).read_text())

    def replace(self, **blocks) -> "ExperimentConfig":
        return dataclasses.replace(self, **blocks)


def _build(kind, value: dict):
    names = {f.name for f in dataclasses.fields(kind)}
    unknown = set(value) - names
    if unknown:
        raise ConfigurationError(f"unknown keys for {kind.__name__}: {sorted(unknown)}")
    try:
        return kind(**value)
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"invalid {kind.__name__}: {e}") from e


SYSTEM_PRESETS = {
    "mackey-glass": SystemConfig(
        kind="mackey-glass",
        params={"alpha": 0.2, "beta": 10.0, "gamma": 0.1},
        tau=17.0,
        dt=0.02,
        history_value=0.9,
        delta_t=1.0,
    ),
    "ikeda": SystemConfig(
        kind="ikeda",
        params={"alpha": 6.0},
        tau=1.0,
        dt=0.001,
        history_value=0.1,
        delta_t=0.05,
    ),
}

# (train_len, valid_len, test_len, n_cells, training overrides, forecast overrides)
SCALES = {
    "paper": (160_000, 2_000, 1_000, 128, {}, {"n_samples": 20_000, "horizon": 500}),
    "desk": (20_000, 2_000, 1_000, 32, {"epochs": 20, "batch_size": 2, "learning_rate": 2e-3}, {"n_samples": 2_000, "horizon": 200}),
    "smoke": (2_000, 500, 400, 8, {"epochs": 2, "batch_size": 4, "bptt_len": 50}, {"n_samples": 600, "horizon": 50}),
}


def preset(name: str = "mackey-glass", scale: str = "paper", seed: int = 0, out_dir: str = "runs/latest") -> ExperimentConfig:
    if name not in SYSTEM_PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(SYSTEM_PRESETS)}")
    if scale not in SCALES:
        raise ConfigurationError(f"unknown scale {scale!r}; choose from {sorted(SCALES)}")
    n_train, n_valid, n_test, n_cells, tr, fc = SCALES[scale]
    system = dataclasses.replace(SYSTEM_PRESETS[name], train_len=n_train, valid_len=n_valid, test_len=n_test)
    return ExperimentConfig(
        system=system,
        model=ModelConfig(n_cells=n_cells),
        training=TrainConfig(seed=seed, **tr),
        forecast=ForecastConfig(seed=seed, **fc),
        out_dir=out_dir,
        seed=seed,
    )
