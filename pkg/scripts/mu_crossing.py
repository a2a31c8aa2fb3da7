"""Continue the genus-0 NLS branchpoints across mu = 2 and report second differences.

    python3 scripts/mu_crossing.py --steps 40 --t 0.1 --out results/mu_crossing
"""
from __future__ import annotations

import argparse
import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from gfunc_rhp.continuation import (
    ContinuationControls,
    continue_parameter,
    newton_solve,
    scan_initializer,
    sign_condition_check,
)
from gfunc_rhp.ffunction import nls_jump_function


@dataclass
class CrossingConfig:
    mu_start: float = 2.2
    mu_end: float = 1.8
    x: float = 1.0
    t: float = 0.1
    steps: int = 40
    out: str = "results/mu_crossing"


def run(cfg: CrossingConfig) -> dict:
    f = nls_jump_function()
    beta = (cfg.mu_start, cfg.x, cfg.t)
    start = newton_solve(scan_initializer(beta, f)[0], beta, f)
    traj = continue_parameter(start, (cfg.mu_end, cfg.x, cfg.t), ContinuationControls(steps=cfg.steps))
    A = traj.alphas
    mu = np.array([b[0] for b in traj.betas])
    d2 = np.max(np.abs(A[2:] - 2 * A[1:-1] + A[:-2]), axis=1)
    k = int(np.argmin(np.abs(mu[1:-1] - 2.0)))
    nb = np.concatenate([d2[max(k - 4, 0):k], d2[k + 1:k + 5]])
    signs = {f"{s.beta[0]:.4f}": sign_condition_check(s).passed
             for s in (traj.solutions[0], traj.solutions[len(traj) // 2], traj.solutions[-1])}
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "alpha_mu.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mu", "alpha0_re", "alpha0_im", "second_difference"])
        for i, (m, a) in enumerate(zip(mu, A[:, 0])):
            dd = d2[i - 1] if 0 < i < len(mu) - 1 else float("nan")
            w.writerow([f"{m:.17g}", f"{a.real:.17g}", f"{a.imag:.17g}", f"{dd:.17g}"])
    summary = {
        "config": asdict(cfg),
        "rejected_steps": sum(1 for s in traj.step_log if not s["accepted"]),
        "second_difference_range": [float(d2.min()), float(d2.max())],
        "mu2_over_neighbour_median": float(d2[k] / np.median(nb)),
        "signs": signs,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for name, v in asdict(CrossingConfig()).items():
        p.add_argument(f"--{name.replace('_', '-')}", type=type(v), default=v)
    print(json.dumps(run(CrossingConfig(**vars(p.parse_args()))), indent=2))


if __name__ == "__main__":
    main()
