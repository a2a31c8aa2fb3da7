"""Newton solution of the modulation equations, parameter continuation and sign checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .contour import GeometryError, Path, QuadratureSpec
from .ffunction import JumpFunction
from .radical import DegeneracyError, RadicalError
from .rhpcore import (
    Configuration,
    DegenerateJacobianError,
    GeometryOptions,
    RHPSolution,
    build_configuration,
    dalpha_dbeta,
    eval_h,
    eval_h_robust,
    make_solution,
    residual_and_jacobian,
    solve_W_Omega,
)

__all__ = [
    "NewtonOptions",
    "NoConvergenceError",
    "ContinuationStallError",
    "ContinuationControls",
    "Trajectory",
    "SignGridSpec",
    "SignReport",
    "newton_solve",
    "scan_initializer",
    "continue_parameter",
    "sign_condition_check",
    "trace_main_arc",
]

_RECOVERABLE = (GeometryError, RadicalError, ArithmeticError, ValueError)


class NoConvergenceError(RuntimeError):
    def __init__(self, msg: str, history: list, alphas):
        super().__init__(msg)
        self.history = history
        self.alphas = alphas


class ContinuationStallError(RuntimeError):
    def __init__(self, msg: str, trajectory: "Trajectory"):
        super().__init__(msg)
        self.trajectory = trajectory


@dataclass(frozen=True)
class NewtonOptions:
    """Diagonal Newton with backtracking; residual_tol is scaled by the configuration scale."""

    residual_tol: float = 1e-10
    max_iters: int = 30
    damping: float = 0.5
    max_halvings: int = 8
    stall_iters: int = 5
    fd_step: float = 1e-7
    symmetrize: bool | None = None

    def __post_init__(self):
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if not (0 < self.damping < 1 and self.max_iters >= 0 and self.max_halvings >= 0):
            raise ValueError("invalid Newton options")


def _paired(alphas: np.ndarray, tol: float = 1e-10) -> bool:
    n = len(alphas)
    scale = max(1.0, float(np.max(np.abs(alphas))))
    return bool(np.all(np.abs(alphas - np.conj(alphas[::-1])) <= tol * scale))


def _symmetrize(alphas: np.ndarray) -> np.ndarray:
    a = 0.5 * (alphas + np.conj(alphas[::-1]))
    return a


def _full_jacobian(alphas, beta, f, spec, geometry, h):
    n = len(alphas)
    J = np.zeros((n, n), dtype=complex)
    for l in range(n):
        p, m = alphas.copy(), alphas.copy()
        p[l] += h
        m[l] -= h
        Kp, _ = residual_and_jacobian(build_configuration(p, beta, f, spec, geometry))
        Km, _ = residual_and_jacobian(build_configuration(m, beta, f, spec, geometry))
        J[:, l] = (Kp - Km) / (2 * h)
    return J


def newton_solve(alpha_init, beta, f: JumpFunction, opts: NewtonOptions | None = None,
                 spec: QuadratureSpec | None = None, geometry: GeometryOptions | None = None) -> RHPSolution:
    """Solve K(alpha_j) = 0 by damped diagonal Newton, rebuilding loops every iterate."""
    opts = opts or NewtonOptions()
    alphas = np.array([complex(a) for a in alpha_init])
    cfg = build_configuration(alphas, beta, f, spec, geometry)  # raises on coincident points
    sym = opts.symmetrize if opts.symmetrize is not None else (f.schwarz and _paired(alphas))
    if sym:
        alphas = _symmetrize(alphas)
        cfg = build_configuration(alphas, beta, f, spec, geometry)
    tol = opts.residual_tol * cfg.scale
    K, J = residual_and_jacobian(cfg)
    r = float(np.max(np.abs(K)))
    history = [r]
    full = False
    it = 0
    while r > tol:
        if it >= opts.max_iters:
            raise NoConvergenceError(f"no convergence after {it} iterations (residual {r:.3e})", history, alphas)
        it += 1
        if not full and len(history) > opts.stall_iters and r > 0.5 * history[-1 - opts.stall_iters]:
            full = True
        if full:
            Jf = _full_jacobian(alphas, beta, f, spec, geometry, opts.fd_step * cfg.scale)
            step = np.linalg.solve(Jf, K)
        else:
            if np.any(np.abs(J) < 1e-12 * cfg.scale):
                raise DegenerateJacobianError("vanishing diagonal Jacobian entry")
            step = K / J
        lam, accepted = 1.0, False
        last_err = None
        for _ in range(opts.max_halvings + 1):
            trial = alphas - lam * step
            if sym:
                trial = _symmetrize(trial)
            try:
                tcfg = build_configuration(trial, beta, f, spec, geometry)
                tK, tJ = residual_and_jacobian(tcfg)
                tr = float(np.max(np.abs(tK)))
            except _RECOVERABLE as e:
                last_err = e
                lam *= opts.damping
                continue
            if tr < r:
                accepted = True
                break
            lam *= opts.damping
        if not accepted:
            if isinstance(last_err, DegeneracyError):
                raise last_err
            if not full:
                full = True
                continue
            raise NoConvergenceError(f"line search failed at residual {r:.3e}", history, alphas)
        alphas, cfg, K, J, r = trial, tcfg, tK, tJ, tr
        history.append(r)
    return make_solution(cfg, K, {"iterations": it, "residual_history": history, "full_jacobian": full})


# ---------------------------------------------------------------------------
# initializer
# ---------------------------------------------------------------------------


def scan_initializer(beta, f: JumpFunction, genus: int = 0, box=None, n: int = 13, top: int = 5,
                     spec: QuadratureSpec | None = None, geometry: GeometryOptions | None = None) -> list:
    """Candidates from a grid scan of sum |K(alpha_j)|^2.

    Schwarz-symmetric f: grid over the upper branchpoint(s) with the rest
    conjugated.  Otherwise (genus 0 only) a grid over both points.  Only
    genus 0 is scanned; returns up to ``top`` candidates sorted by residual.
    """
    if genus != 0:
        raise NotImplementedError("the grid scan covers genus 0; supply initial_alphas for higher genus")
    if box is None:
        c = f.z0(f._beta(beta)[0]) if f.beta_names else 0.0
        c = 0.0 if c is None else complex(c).real
        box = (c - 2.0, c + 2.0, 0.05, 3.0)
    re = np.linspace(box[0], box[1], n)
    im = np.linspace(box[2], box[3], n)
    out = []
    if f.schwarz:
        cands = [(a + 1j * b, a - 1j * b) for a in re for b in im]
    else:
        pts = [a + 1j * b for a in re for b in np.concatenate([-im[::-1], im])]
        cands = [(p, q) for p in pts for q in pts if p != q]
    for al in cands:
        try:
            K, _ = residual_and_jacobian(build_configuration(al, beta, f, spec, geometry))
        except _RECOVERABLE:
            continue
        out.append((float(np.sum(np.abs(K) ** 2)), al))
    out.sort(key=lambda t: t[0])
    return [np.array(al) for _, al in out[:top]]


# ---------------------------------------------------------------------------
# continuation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContinuationControls:
    """Output grid of ``steps`` uniform intervals with adaptive substeps inside each."""

    steps: int = 10
    initial_fraction: float = 1.0
    grow: float = 1.5
    shrink: float = 0.5
    easy_accepts: int = 2
    easy_iterations: int = 3
    min_step_fraction: float = 1e-6
    corrector_iters: int = 10

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")


@dataclass
class Trajectory:
    betas: list
    solutions: list
    step_log: list = field(default_factory=list)
    smoothness: list = field(default_factory=list)
    controls: ContinuationControls | None = None

    @property
    def alphas(self) -> np.ndarray:
        return np.array([s.alphas.array for s in self.solutions])

    def __len__(self) -> int:
        return len(self.solutions)

    def rows(self, beta_names: Sequence[str]) -> tuple[list, list]:
        if not self.solutions:
            return [], []
        s0 = self.solutions[0]
        n_al = len(s0.alphas.alphas)
        head = list(beta_names)
        for j in range(n_al):
            head += [f"alpha{j}_re", f"alpha{j}_im"]
        head += [f"W{j}" for j in range(len(s0.W))]
        head += [f"Omega{j + 1}" for j in range(len(s0.Omega))]
        head += ["residual", "step"]
        rows = []
        for i, (b, s) in enumerate(zip(self.betas, self.solutions)):
            row = list(b)
            for a in s.alphas.alphas:
                row += [a.real, a.imag]
            row += list(s.W) + list(s.Omega) + [s.residual_norm]
            row.append(0.0 if i == 0 else float(np.linalg.norm(np.array(b) - np.array(self.betas[i - 1]))))
            rows.append(row)
        return head, rows


def _linear_path(b0, b1) -> Callable[[float], np.ndarray]:
    b0, b1 = np.asarray(b0, float), np.asarray(b1, float)
    return lambda s: b0 + s * (b1 - b0)


def continue_parameter(start: RHPSolution, beta_path, controls: ContinuationControls | None = None,
                       newton: NewtonOptions | None = None) -> Trajectory:
    """Follow alpha(beta) along ``beta_path`` (callable s in [0, 1] -> beta, or an end point).

    Euler predictor from the derivative formula, Newton corrector, step halving
    on failure and growth after easy accepts.
    """
    controls = controls or ContinuationControls()
    newton = newton or NewtonOptions()
    cfg0 = start.config
    f, spec, geom = cfg0.f, cfg0.spec, cfg0.geometry
    b_start = np.array(start.beta, float)
    path = beta_path if callable(beta_path) else _linear_path(b_start, beta_path)
    if np.linalg.norm(path(0.0) - b_start) > 1e-12 * max(1.0, np.linalg.norm(b_start)):
        raise ValueError("beta_path must start at the starting solution's parameters")
    total = float(np.linalg.norm(path(1.0) - b_start))
    traj = Trajectory([tuple(float(v) for v in b_start)], [start], controls=controls)
    if total == 0.0:
        return traj
    nodes = np.linspace(0.0, 1.0, controls.steps + 1)
    s, sol = 0.0, start
    ds = controls.initial_fraction / controls.steps
    min_ds = controls.min_step_fraction
    easy = 0
    opts = NewtonOptions(
        residual_tol=newton.residual_tol, max_iters=controls.corrector_iters, damping=newton.damping,
        max_halvings=newton.max_halvings, stall_iters=newton.stall_iters, fd_step=newton.fd_step,
        symmetrize=newton.symmetrize,
    )
    for target in nodes[1:]:
        while s < target - 1e-15:
            h = min(ds, target - s)
            b0, b1 = path(s), path(s + h)
            try:
                db = b1 - b0
                pred = sol.alphas.array.copy()
                for k in np.nonzero(db)[0]:
                    pred = pred + dalpha_dbeta(sol, int(k) + 1) * db[k]
                new = newton_solve(pred, b1, f, opts, spec, geom)
                ok = True
            except _RECOVERABLE + (NoConvergenceError,) as e:
                ok, err = False, e
            if not ok:
                traj.step_log.append({"s": s, "h": h, "accepted": False, "reason": type(err).__name__})
                ds = h * controls.shrink
                easy = 0
                if ds < min_ds:
                    raise ContinuationStallError(f"step below minimum at s={s:.6g}", traj)
                continue
            iters = new.diagnostics.get("iterations", 0)
            da = float(np.max(np.abs(new.alphas.array - sol.alphas.array)))
            traj.step_log.append({
                "s": s, "h": h, "accepted": True, "iterations": iters,
                "predictor_error": float(np.max(np.abs(new.alphas.array - pred))),
            })
            traj.smoothness.append(da / max(float(np.linalg.norm(db)), 1e-300))
            s, sol = s + h, new
            easy = easy + 1 if iters <= controls.easy_iterations else 0
            if easy >= controls.easy_accepts:
                ds = h * controls.grow
                easy = 0
            else:
                ds = max(ds, h) if h < ds else h
        traj.betas.append(tuple(float(v) for v in path(target)))
        traj.solutions.append(sol)
    return traj


# ---------------------------------------------------------------------------
# sign conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SignGridSpec:
    """Sampling for the sign check; distances are fractions of the small-loop offset."""

    n_arc: int = 40
    side_distance: float = 0.5
    margin: float = 0.0
    arc_tol: float = 1e-7
    endpoint_exclusion: float = 1.0
    trace_step: float = 0.15
    ray_length: float = 10.0
    n_ray: int = 60


@dataclass
class SignReport:
    main_arcs_ok: list
    sides_ok: list
    comp_arcs_ok: list
    extensions_ok: list
    samples: dict
    worst: tuple

    @property
    def passed(self) -> bool:
        return all(self.main_arcs_ok + self.sides_ok + self.comp_arcs_ok + self.extensions_ok)


def trace_main_arc(solution: RHPSolution, j: int, step: float | None = None, max_length: float = 4.0):
    """Trace the level curve Im (h - W_j) = 0 from alpha_{2j} towards alpha_{2j+1}.

    psi = (h - W_j)^2 is analytic near the arc and behaves like (z - alpha)^3
    at the endpoints; of the three rays with psi > 0 the one closest to the
    polyline arc direction is followed.  Returns ``(points, reached)``;
    the trace gives up after ``max_length`` times the straight distance.
    """
    cfg = solution.config
    W = solution.W
    a, b = cfg.alphas[2 * j], cfg.alphas[2 * j + 1]
    d = step if step is not None else 0.02 * abs(b - a)
    target = b
    stop_real = cfg.pinched and j == cfg.N // 2 and cfg.N % 2 == 0
    reach = 1.5 * d
    if stop_real:
        # every loop layout is pinched at z0, so stop a little short of it
        target = complex(cfg.f.z0(cfg.beta[0]))
        reach = max(reach, 2.0 * cfg.loops.offset)

    def psi(z):
        return (np.asarray(eval_h_robust(np.atleast_1d(z), solution)) - W[j]) ** 2

    arc = cfg.arcs[2 * j]
    t0 = arc.segments[0].tangent(0.0)
    # pick the starting direction among the three psi > 0 rays
    r0 = 0.5 * cfg.loops.offset
    th = np.linspace(-math.pi, math.pi, 721)[:-1]
    ring = a + r0 * np.exp(1j * th)
    vals = psi(ring)
    good = np.abs(vals.imag) <= 0.2 * np.abs(vals)
    good &= vals.real > 0
    if not np.any(good):
        return np.array([a]), False
    dirs = np.exp(1j * th[good])
    z = a + r0 * dirs[np.argmax((dirs * np.conj(t0)).real)]
    pts = [a, z]
    prev_dir = (z - a) / abs(z - a)
    max_steps = int(max_length * abs(target - a) / d) + 20
    for _ in range(max_steps):
        hval = 1e-6 * max(1.0, cfg.scale)
        for _c in range(4):  # corrector: Newton on Im psi along the normal
            p = psi(np.array([z, z + hval, z - hval]))
            dp = (p[1] - p[2]) / (2 * hval)
            if dp == 0 or abs(p[0].imag) <= 1e-13 * abs(p[0]):
                break
            tau = np.conj(dp) / abs(dp)
            if (tau * np.conj(prev_dir)).real < 0:
                tau = -tau
            z = z - 1j * tau * (p[0].imag / (dp * 1j * tau).imag)
        pts.append(z)
        if abs(z - target) < reach:
            pts.append(target)
            return np.array(pts), True
        if stop_real and z.imag <= 0:
            return np.array(pts), False
        p = psi(np.array([z + hval, z - hval]))
        dp = (p[0] - p[1]) / (2 * hval)
        tau = np.conj(dp) / abs(dp)
        if (tau * np.conj(prev_dir)).real < 0:
            tau = -tau
        prev_dir = tau
        z = z + d * tau
    return np.array(pts), False


def _lens_flip(traced: np.ndarray, arc: Path, z: np.ndarray) -> np.ndarray:
    """-1 for points between the traced true arc and the polyline arc, else +1."""
    from .contour import build_arc_chain

    if len(traced) < 3:
        return np.ones(z.shape)
    tr = build_arc_chain(list(traced), "polyline")
    back = arc.reversed()
    start, end = complex(traced[0]), complex(traced[-1])
    segs = list(tr.segments)
    # close: traced end -> polyline point nearest to it -> back along the polyline to the start
    from .contour import LineSegment

    closing = []
    if abs(end - arc.end) > 1e-12 and abs(end - back.start) > 1e-12:
        # traced arc stopped at the pinch point; walk the polyline back from there
        best, k_best = None, 0
        for k, seg in enumerate(arc.segments):
            dist = float(seg.distance(np.array([end]))[0])
            if best is None or dist < best:
                best, k_best = dist, k
        pieces = list(arc.segments[: k_best + 1])
        closing = [LineSegment(end, pieces[-1].end)] if abs(end - pieces[-1].end) > 1e-14 else []
        closing += [s.reversed() for s in reversed(pieces)]
    else:
        closing = list(back.segments)
    segs = segs + closing
    if abs(segs[-1].end - start) > 1e-12:
        segs.append(LineSegment(segs[-1].end, start))
    lens = Path(tuple(segs), closed=True)
    return np.where(lens.contains(z), -1.0, 1.0)


def _default_extension_rays(cfg: Configuration, traced: dict) -> list:
    """One ray from alpha_0 leaving opposite to the traced main arc (Schwarz, pinched layout)."""
    tr = traced.get("main0")
    if not (cfg.f.schwarz and cfg.pinched) or tr is None or len(tr) < 2:
        return []
    return [(cfg.alphas[0], -(tr[1] - tr[0]))]


def sign_condition_check(solution: RHPSolution, grid: SignGridSpec | None = None,
                         extension_rays: Sequence | None = None) -> SignReport:
    """Check Im h = 0 on main arcs, Im h < 0 beside them, Im h > 0 on comp and extension arcs.

    Main arcs are traced as level curves of Im h (the polyline arcs used by
    the loops are only a homotopic stand-in); Im h off the traced arc is
    corrected for the cut displacement between the two.  For Schwarz
    configurations only the upper half-plane is sampled.
    """
    grid = grid or SignGridSpec()
    cfg = solution.config
    W = solution.W
    eps = cfg.loops.offset
    main_ok, side_ok, comp_ok, ext_ok = [], [], [], []
    samples = {}
    worst = (0.0, None, "")
    upper_only = cfg.f.schwarz and cfg.pinched

    def note(v, z, label):
        nonlocal worst
        if v > worst[0]:
            worst = (float(v), complex(z), label)

    for j in range(cfg.N + 1):
        if upper_only and cfg.alphas[2 * j].imag < 0 and cfg.alphas[2 * j + 1].imag < 0:
            continue
        traced, reached = trace_main_arc(solution, j, step=grid.trace_step * eps)
        if not reached or len(traced) < 4:
            main_ok.append(False)
            side_ok.append(False)
            samples[f"main{j}"] = traced
            note(math.inf, traced[-1], f"main{j}: trace did not close")
            continue
        far = np.min(np.abs(traced[:, None] - cfg.alphas[None, :]), axis=1) > grid.endpoint_exclusion * eps
        far &= np.abs(traced - complex(cfg.f.z0(cfg.beta[0]) or 0)) > grid.endpoint_exclusion * eps if cfg.pinched else True
        zc = traced[far]
        if zc.size == 0:
            main_ok.append(False)
            side_ok.append(False)
            continue
        flip = _lens_flip(traced, cfg.arcs[2 * j], zc)
        im_on = flip * np.imag(np.asarray(eval_h_robust(zc, solution)) - W[j])
        main_ok.append(bool(np.max(np.abs(im_on)) < grid.arc_tol * max(1.0, cfg.scale)))
        note(float(np.max(np.abs(im_on))) / grid.arc_tol, zc[np.argmax(np.abs(im_on))], f"main{j}")
        # normals along the traced curve
        tang = np.gradient(traced)[far]
        nrm = 1j * tang / np.abs(tang)
        side_vals = []
        for sgn in (1.0, -1.0):
            zs = zc + sgn * grid.side_distance * eps * nrm
            try:
                v = _lens_flip(traced, cfg.arcs[2 * j], zs) * np.imag(np.asarray(eval_h_robust(zs, solution)))
            except GeometryError:
                zs = zc + sgn * 0.37 * grid.side_distance * eps * nrm
                v = _lens_flip(traced, cfg.arcs[2 * j], zs) * np.imag(np.asarray(eval_h_robust(zs, solution)))
            side_vals.append(v)
        sv = np.concatenate(side_vals)
        side_ok.append(bool(np.all(sv < -grid.margin)))
        note(float(np.max(sv + grid.margin)) if np.max(sv) >= -grid.margin else 0.0, zc[0], f"sides{j}")
        samples[f"main{j}"] = traced
        samples[f"sides{j}"] = sv
    for j in range(1, cfg.N + 1):
        arc = cfg.arcs[2 * j - 1]
        if upper_only and arc.start.imag < 0 and arc.end.imag < 0:
            continue
        zs = arc.sample(grid.n_arc)
        keep = np.min(np.abs(zs[:, None] - cfg.alphas[None, :]), axis=1) > grid.endpoint_exclusion * eps
        zs = zs[keep]
        # nudge to the left of the arc (Im h is continuous across comp arcs)
        nrm = np.array([1j * arc.segments[0].tangent(0.5)] * zs.size)
        v = np.imag(np.asarray(eval_h_robust(zs + 1e-3 * eps * nrm, solution)))
        comp_ok.append(bool(np.all(v > grid.margin)))
        note(float(grid.margin - np.min(v)) if np.min(v) <= grid.margin else 0.0, zs[np.argmin(v)], f"comp{j}")
        samples[f"comp{j}"] = v
    rays = _default_extension_rays(cfg, samples) if extension_rays is None else list(extension_rays)
    for i, (start, direction) in enumerate(rays):
        direction = complex(direction) / abs(complex(direction))
        s = np.linspace(grid.endpoint_exclusion * eps, grid.ray_length * max(1.0, cfg.scale), grid.n_ray)
        zs = complex(start) + s * direction
        try:
            v = np.imag(np.asarray(eval_h_robust(zs, solution)))
        except GeometryError:
            zs = zs + 1e-3 * eps * 1j * direction
            v = np.imag(np.asarray(eval_h_robust(zs, solution)))
        ext_ok.append(bool(np.all(v > grid.margin)))
        note(float(grid.margin - np.min(v)) if np.min(v) <= grid.margin else 0.0, zs[np.argmin(v)], f"ray{i}")
        samples[f"ray{i}"] = v
    return SignReport(main_ok, side_ok, comp_ok, ext_ok, samples, worst)
