"""Derivative formulas vs finite differences on the synthetic genus-2 configuration.

    python3 scripts/genus2_derivatives.py --out results/genus2_derivatives
"""
from __future__ import annotations

import argparse
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from gfunc_rhp.continuation import NewtonOptions
from gfunc_rhp.validation import FDSpec, derivative_reports, genus2_fixture


@dataclass
class Genus2Config:
    mu: float = 2.2
    x: float = 1.0
    t: float = 0.1
    fd_steps: tuple = field(default_factory=lambda: (1e-4, 1e-5))
    tol: float = 1e-5
    out: str = "results/genus2_derivatives"


def run(cfg: Genus2Config) -> list:
    newton = NewtonOptions(residual_tol=1e-11)
    f, sol = genus2_fixture((cfg.mu, cfg.x, cfg.t), newton=newton)
    reps = derivative_reports(sol, cfg.tol, FDSpec(steps=cfg.fd_steps), newton)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "reports.json").write_text(json.dumps({
        "config": asdict(cfg),
        "alphas": [[a.real, a.imag] for a in sol.alphas.alphas],
        "W": list(sol.W), "Omega": list(sol.Omega),
        "polynomial_coefficients": [float(c) for c in f.coeffs.real],
        "reports": [r.to_json() for r in reps],
    }, indent=2))
    return reps


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--mu", type=float, default=2.2)
    p.add_argument("--x", type=float, default=1.0)
    p.add_argument("--t", type=float, default=0.1)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--out", default="results/genus2_derivatives")
    a = p.parse_args()
    for r in run(Genus2Config(a.mu, a.x, a.t, tol=a.tol, out=a.out)):
        print(r.line())


if __name__ == "__main__":
    main()
