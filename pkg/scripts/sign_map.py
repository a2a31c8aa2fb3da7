"""Im h on a grid around a genus-0 NLS solution, with a coarse text rendering.

    python3 scripts/sign_map.py --mu 2.2 --x 1 --t 0 --grid 120
"""
from __future__ import annotations

import argparse
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from gfunc_rhp.cli import sign_grid
from gfunc_rhp.continuation import newton_solve, scan_initializer, sign_condition_check
from gfunc_rhp.ffunction import nls_jump_function


@dataclass
class SignMapConfig:
    mu: float = 2.2
    x: float = 1.0
    t: float = 0.0
    grid: int = 120
    pad: float = 0.5
    out: str = "results/sign_map"


def run(cfg: SignMapConfig):
    f = nls_jump_function()
    beta = (cfg.mu, cfg.x, cfg.t)
    sol = newton_solve(scan_initializer(beta, f)[0], beta, f)
    Z, imh, region = sign_grid(sol, cfg.grid, cfg.pad)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    np.savez(out / "imh_grid.npz", z=Z, imh=imh, region=region.astype(str))
    rep = sign_condition_check(sol)
    (out / "summary.json").write_text(json.dumps({
        "config": asdict(cfg), "alphas": [[a.real, a.imag] for a in sol.alphas.alphas],
        "signs_passed": rep.passed, "worst": [float(rep.worst[0]), str(rep.worst[1]), rep.worst[2]],
    }, indent=2))
    return Z.reshape(cfg.grid, cfg.grid), imh.reshape(cfg.grid, cfg.grid), sol, rep


def render(Z, imh, sol, width=60):
    """'+' for Im h > 0, '-' for Im h < 0, '*' near a branchpoint; top row has the largest Im z."""
    n = Z.shape[0]
    step = max(1, n // width)
    rows = []
    for i in range(n - 1, -1, -step):
        line = []
        for j in range(0, n, step):
            v = imh[i, j]
            near = np.min(np.abs(sol.alphas.array - Z[i, j])) < 1.5 * abs(Z[0, 1] - Z[0, 0]) * step
            line.append("*" if near else "." if not np.isfinite(v) else "+" if v > 0 else "-")
        rows.append("".join(line))
    return "\n".join(rows)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for name, v in asdict(SignMapConfig()).items():
        p.add_argument(f"--{name}", type=type(v), default=v)
    cfg = SignMapConfig(**vars(p.parse_args()))
    Z, imh, sol, rep = run(cfg)
    print(render(Z, imh, sol))
    print(f"sign conditions {'hold' if rep.passed else 'violated'}")


if __name__ == "__main__":
    main()
