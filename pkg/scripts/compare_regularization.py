"""Train the same model with plain and regularized cross-entropy and write the
two predictive distributions at one test step side by side.

    python scripts/compare_regularization.py --scale desk --out runs/reg
"""
import argparse
import dataclasses
from pathlib import Path

import numpy as np

from chaoscast import harness, io
from chaoscast.config import preset
from chaoscast.forecast import filter_next_step
from chaoscast.trainer import prepare_datasets, train


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", default="mackey-glass")
    ap.add_argument("--scale", default="desk")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--index", type=int, default=300, help="test step of the snapshot")
    ap.add_argument("--out", default="runs/regularization")
    args = ap.parse_args()

    cfg = preset(args.preset, args.scale, seed=args.seed, out_dir=args.out)
    data = harness.generate(cfg)
    tr, va = prepare_datasets(
        data["train"].observed, data["valid"].observed, cfg.model.width_ratio, float(np.std(data["train"].truth))
    )
    test = data["test"]
    cols, smooth = {}, {}
    for lam in (0.0, cfg.training.lam):
        ckpt, _ = train(tr, va, dataclasses.replace(cfg.training, lam=lam), n_cells=cfg.model.n_cells)
        p = filter_next_step(ckpt, test.observed).probs[args.index]
        cols[lam] = p
        smooth[lam] = float(np.sum(np.diff(p, 2) ** 2))
    levels = test.observed[args.index] + tr.grid.midpoints
    io.write_csv(
        Path(args.out) / "regularization.csv",
        ["value", "prob_ce", "prob_regularized"],
        zip(levels, cols[0.0], cols[cfg.training.lam]),
    )
    for lam, r in smooth.items():
        print(f"lambda={lam:g}: sum of squared second differences {r:.3e}")


if __name__ == "__main__":
    main()
