"""Delay-differential systems, a fixed-step Adams-Bashforth integrator and the
noisy observation model.

Two chaotic benchmarks are supported::

    Mackey-Glass:  dy/dt = alpha * y(t-tau) / (1 + y(t-tau)**beta) - gamma * y(t)
    Ikeda:         dy/dt = -y(t) + alpha * sin(y(t-tau))

Setting ``alpha=0`` in the Mackey-Glass form gives the linear test system
``dy/dt = -gamma * y`` used for convergence checks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DivergenceError

_INT_TOL = 1e-9


class SystemKind(str, Enum):
    MACKEY_GLASS = "mackey-glass"
    IKEDA = "ikeda"


_DEFAULT_PARAMS = {
    SystemKind.MACKEY_GLASS: ({"alpha": 0.2, "beta": 10.0, "gamma": 0.1}, 17.0),
    SystemKind.IKEDA: ({"alpha": 6.0}, 1.0),
}


@dataclass(frozen=True)
class DdeSystem:
    kind: SystemKind
    params: dict[str, float] = field(default_factory=dict)
    tau: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", SystemKind(self.kind))
        defaults, default_tau = _DEFAULT_PARAMS[self.kind]
        merged = {**defaults, **{k: float(v) for k, v in self.params.items()}}
        unknown = set(merged) - set(defaults)
        if unknown:
            raise ConfigurationError(f"unknown parameters for {self.kind.value}: {sorted(unknown)}")
        object.__setattr__(self, "params", merged)
        if self.tau == 0.0:
            object.__setattr__(self, "tau", default_tau)
        if not self.tau > 0:
            raise ConfigurationError(f"tau must be positive, got {self.tau}")

    @classmethod
    def mackey_glass(cls, alpha=0.2, beta=10.0, gamma=0.1, tau=17.0) -> "DdeSystem":
        return cls(SystemKind.MACKEY_GLASS, {"alpha": alpha, "beta": beta, "gamma": gamma}, tau)

    @classmethod
    def ikeda(cls, alpha=6.0, tau=1.0) -> "DdeSystem":
        return cls(SystemKind.IKEDA, {"alpha": alpha}, tau)

    def rhs(self) -> Callable[[float, float], float]:
        """Return ``f(y, y_delayed)`` as a plain float function."""
        if self.kind is SystemKind.MACKEY_GLASS:
            a, b, g = self.params["alpha"], self.params["beta"], self.params["gamma"]

            def f(y, yd):
                return a * yd / (1.0 + yd**b) - g * y

        else:
            a = self.params["alpha"]
            sin = math.sin

            def f(y, yd):
                return -y + a * sin(yd)

        return f


@dataclass(frozen=True)
class IntegrationSpec:
    dt: float
    t_end: float
    burn_in: float
    history_value: float

    def validate(self, tau: float) -> int:
        """Check the invariants and return the delay length in steps."""
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        lag = _exact_ratio(tau, self.dt, "tau/dt")
        if self.burn_in < tau:
            raise ConfigurationError(f"burn_in ({self.burn_in}) must be >= tau ({tau})")
        if self.t_end <= self.burn_in:
            raise ConfigurationError("t_end must exceed burn_in")
        _exact_ratio(self.burn_in, self.dt, "burn_in/dt")
        _exact_ratio(self.t_end, self.dt, "t_end/dt")
        return lag


@dataclass(frozen=True)
class SamplingSpec:
    delta_t: float
    noise_sigma_ratio: float = 0.3
    seed: int = 0


@dataclass(frozen=True)
class DenseSolution:
    """Solver output from ``t0`` onward at spacing ``dt``."""

    t0: float
    dt: float
    values: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.values))


@dataclass(frozen=True)
class Trajectory:
    t0: float
    delta_t: float
    truth: np.ndarray
    observed: np.ndarray
    sigma: float

    def __post_init__(self):
        if len(self.truth) != len(self.observed):
            raise ValueError("truth and observed must have equal length")
        if len(self.truth) < 2:
            raise ValueError("a trajectory needs at least two samples")

    def __len__(self):
        return len(self.truth)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.delta_t * np.arange(len(self.truth))


def _exact_ratio(num: float, den: float, what: str) -> int:
    r = num / den
    n = round(r)
    if abs(r - n) > _INT_TOL * max(1.0, abs(r)):
        raise ConfigurationError(f"{what} = {r!r} is not an integer")
    return int(n)


def _cubic_at(ys, x):
    """Lagrange cubic through (0, ys[0]) ... (3, ys[3]) evaluated at ``x``."""
    y0, y1, y2, y3 = ys
    return (
        -y0 * (x - 1) * (x - 2) * (x - 3) / 6.0
        + y1 * x * (x - 2) * (x - 3) / 2.0
        - y2 * x * (x - 1) * (x - 3) / 2.0
        + y3 * x * (x - 1) * (x - 2) / 6.0
    )


def integrate(
    system: DdeSystem, spec: IntegrationSpec, startup: str = "rk3", keep_burn_in: bool = False
) -> DenseSolution:
    """Integrate ``system`` with third-order Adams-Bashforth at fixed step.

    ``y`` equals ``spec.history_value`` on ``[-tau, 0]``; the delayed term is
    read ``tau/dt`` grid indices back. The multistep history is bootstrapped
    with two Kutta RK3 steps at ``t=0`` and bootstrapped again at ``t=tau``,
    where the delayed argument carries the derivative jump from ``t=0``
    into ``f``. ``startup="euler-ab2"`` selects the plain Euler/AB2 ramp
    without the restart (second order overall; kept for comparison).

    Returns the solution on ``burn_in, burn_in + dt, ..., t_end``, or from
    ``t=0`` with ``keep_burn_in``.
    """
    if startup not in ("rk3", "euler-ab2"):
        raise ConfigurationError(f"unknown startup scheme {startup!r}")
    lag = spec.validate(system.tau)
    f = system.rhs()
    dt = spec.dt
    n_steps = _exact_ratio(spec.t_end, dt, "t_end/dt")
    first = _exact_ratio(spec.burn_in, dt, "burn_in/dt")
    hist = float(spec.history_value)
    y = [hist] * (n_steps + 1)
    isfinite = math.isfinite

    def delayed(k):
        return y[k - lag] if k >= lag else hist

    def delayed_at(x):
        # delayed value at fractional grid position x (units of dt)
        xd = x - lag
        if xd <= 0.0:
            return hist
        return _cubic_at(y[:4], xd)

    c1, c2, c3 = 23.0 / 12.0, -16.0 / 12.0, 5.0 / 12.0
    if startup == "rk3" and lag < 4:
        raise ConfigurationError(f"tau/dt must be at least 4 for the rk3 startup, got {lag}")
    f2 = f1 = 0.0
    f0 = f(y[0], delayed(0))
    yn = y[0]
    for n in range(n_steps):
        if startup == "rk3" and (n < 2 or lag <= n < lag + 2):
            yd_half = delayed_at(n + 0.5)
            k1 = f0
            k2 = f(yn + 0.5 * dt * k1, yd_half)
            k3 = f(yn + dt * (2.0 * k2 - k1), delayed(n + 1))
            ynew = yn + dt * (k1 + 4.0 * k2 + k3) / 6.0
        elif startup == "euler-ab2" and n == 0:
            ynew = yn + dt * f0
        elif startup == "euler-ab2" and n == 1:
            ynew = yn + dt * (1.5 * f0 - 0.5 * f1)
        else:
            ynew = yn + dt * (c1 * f0 + c2 * f1 + c3 * f2)
        if not isfinite(ynew):
            raise DivergenceError(f"non-finite state at step {n + 1} (t={(n + 1) * dt:g})")
        y[n + 1] = ynew
        yn = ynew
        f2, f1 = f1, f0
        try:
            f0 = f(ynew, delayed(n + 1))
        except OverflowError:
            raise DivergenceError(f"overflow at step {n + 1} (t={(n + 1) * dt:g})") from None
    if keep_burn_in:
        first = 0
    return DenseSolution(t0=first * dt, dt=dt, values=np.array(y[first:]))


def sample_and_observe(dense: DenseSolution, sampling: SamplingSpec) -> Trajectory:
    """Subsample ``dense`` every ``delta_t`` and add white Gaussian noise.

    The noise STD is ``noise_sigma_ratio * sd(truth)``, with ``sd`` taken over
    the sampled truth series itself.
    """
    if len(dense.values) == 0:
        raise ValueError("dense solution is empty")
    if sampling.noise_sigma_ratio < 0:
        raise ConfigurationError("noise_sigma_ratio must be >= 0")
    stride = _exact_ratio(sampling.delta_t, dense.dt, "delta_t/dt")
    truth = dense.values[::stride].copy()
    sigma = sampling.noise_sigma_ratio * float(np.std(truth))
    rng = np.random.default_rng(sampling.seed)
    observed = truth + sigma * rng.standard_normal(len(truth))
    return Trajectory(
        t0=dense.t0, delta_t=stride * dense.dt, truth=truth, observed=observed, sigma=sigma
    )


def simulate(
    system: DdeSystem, spec: IntegrationSpec, sampling: SamplingSpec
) -> Trajectory:
    return sample_and_observe(integrate(system, spec), sampling)
