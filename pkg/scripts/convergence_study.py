"""Step-halving study of the Adams-Bashforth integrator.

Prints sup-norm errors against exp(-t) for the linear decay system and
self-convergence ratios for both chaotic systems, for the default RK3
bootstrap and for the plain Euler/AB2 ramp.
"""
import argparse

import numpy as np

from chaoscast.dde import DdeSystem, IntegrationSpec, integrate


def decay_errors(startup, dts):
    system = DdeSystem.mackey_glass(alpha=0.0, gamma=1.0, tau=0.25)
    out = []
    for dt in dts:
        sol = integrate(system, IntegrationSpec(dt, 1.0, 0.25, 1.0), startup, keep_burn_in=True)
        out.append(np.max(np.abs(sol.values - np.exp(-sol.times))))
    return out


def self_convergence(system, startup, dt0, t_end, history, levels=4):
    sols = []
    for k in range(levels):
        sol = integrate(system, IntegrationSpec(dt0 / 2**k, t_end, system.tau, history), startup)
        sols.append(sol.values[:: 2**k])
    return [np.max(np.abs(a - b)) for a, b in zip(sols, sols[1:])]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t-end", type=float, default=100.0, help="Mackey-Glass window end")
    args = ap.parse_args()
    dts = [0.0125, 0.00625, 0.003125]
    for startup in ("rk3", "euler-ab2"):
        errs = decay_errors(startup, dts)
        print(f"dy/dt=-y [{startup}]")
        for dt, e, r in zip(dts, errs, [np.nan] + [a / b for a, b in zip(errs, errs[1:])]):
            print(f"  dt={dt:<8g} err={e:.3e}  ratio={r:.2f}")
    for name, system, dt0, t_end, hist in (
        ("mackey-glass", DdeSystem.mackey_glass(), 0.04, args.t_end, 0.9),
        ("ikeda", DdeSystem.ikeda(), 0.01, 6.0, 0.1),
    ):
        for startup in ("rk3", "euler-ab2"):
            d = self_convergence(system, startup, dt0, t_end, hist)
            ratios = ", ".join(f"{a / b:.2f}" for a, b in zip(d, d[1:]))
            print(f"{name} [{startup}] successive differences {', '.join(f'{x:.2e}' for x in d)}; ratios {ratios}")


if __name__ == "__main__":
    main()
