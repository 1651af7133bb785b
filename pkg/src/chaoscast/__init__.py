"""Probabilistic forecasting of noisy chaotic delay systems with a softmax LSTM."""
from .dde import DdeSystem, IntegrationSpec, SamplingSpec, Trajectory, integrate, sample_and_observe, simulate
from .forecast import ForecastConfig, ForecastEnsemble, filter_next_step, forecast
from .grid import BinGrid, build_grid, expectation, label_of, sample, std_dev
from .lstm import Checkpoint, LinearMap, LstmParams, LstmState, init_params, run_sequence, step
from .trainer import TrainConfig, TrainingSet, adam_update, backward, loss, train

__version__ = "0.1.0"
