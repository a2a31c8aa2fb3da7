"""Independent oracles: closed-form toy integral, finite-difference harness and named suites."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .contour import GeometryError, LineSegment, Path, QuadratureSpec, build_loop, integrate
from .continuation import NewtonOptions, newton_solve, scan_initializer, sign_condition_check
from .ffunction import (
    AugmentedJumpFunction,
    JumpFunction,
    PolynomialJumpFunction,
    appendix_toy_f,
    nls_jump_function,
    toy_integral,
    toy_integral_dmu,
)
from .rhpcore import (
    GeometryOptions,
    RHPSolution,
    build_configuration,
    dalpha_dbeta,
    dh_dbeta,
    dK_dbeta,
    dOmega_dbeta,
    dW_dbeta,
    eval_h,
    eval_h_robust,
    eval_K,
    gprime_jump_check,
    jump_check,
    modulation_residual,
    moment_table,
)

__all__ = [
    "FDSpec",
    "OracleReport",
    "ValidationConfig",
    "UnknownSuiteError",
    "SUITES",
    "appendix_I1",
    "fd_check",
    "genus2_fixture",
    "local_exponent",
    "suite_run",
]

QUAD_TOL = 1e-8
FD_TOL = 1e-5
_NEAR_ZERO = 1e-12


class UnknownSuiteError(KeyError):
    pass


@dataclass(frozen=True)
class FDSpec:
    """Centered differences at ``steps`` (decreasing), optionally Richardson-combined."""

    steps: tuple = (1e-4, 1e-5)
    scheme: str = "centered"
    richardson: bool = True

    def __post_init__(self):
        s = tuple(float(x) for x in self.steps)
        object.__setattr__(self, "steps", s)
        if not s or any(x <= 0 for x in s) or any(a <= b for a, b in zip(s, s[1:])):
            raise ValueError("FD steps must be positive and decreasing")
        if self.scheme != "centered":
            raise ValueError("only centered differences are implemented")


@dataclass
class OracleReport:
    name: str
    computed: object
    reference: object
    abs_err: float
    rel_err: float
    tolerance: float
    passed: bool
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: abs {self.abs_err:.3e} rel {self.rel_err:.3e} (tol {self.tolerance:.1e})"

    def to_json(self) -> dict:
        def enc(v):
            a = np.asarray(v)
            if np.iscomplexobj(a):
                return {"re": a.real.tolist(), "im": a.imag.tolist()}
            return a.tolist() if a.ndim else (v if not isinstance(v, np.generic) else v.item())

        return {
            "name": self.name, "computed": enc(self.computed), "reference": enc(self.reference),
            "abs_err": self.abs_err, "rel_err": self.rel_err, "tolerance": self.tolerance,
            "passed": bool(self.passed), "details": _jsonable(self.details),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def compare(name: str, computed, reference, tolerance: float, details: dict | None = None) -> OracleReport:
    """Max-norm comparison; relative unless the reference is (near) zero."""
    c, r = np.asarray(computed), np.asarray(reference)
    abs_err = float(np.max(np.abs(c - r))) if c.size else 0.0
    ref = float(np.max(np.abs(r))) if r.size else 0.0
    rel_err = abs_err / ref if ref > _NEAR_ZERO else abs_err
    return OracleReport(name, computed, reference, abs_err, rel_err, tolerance, rel_err <= tolerance, details or {})


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------


def _crosses_principal_cut(a: complex, b: complex, z0: complex) -> bool:
    """Does the open segment (a, b) cross the ray z0 + (-inf, 0] transversally?"""
    ua, ub = a - z0, b - z0
    if ua.imag * ub.imag >= 0:
        return False
    s = ua.imag / (ua.imag - ub.imag)
    return (ua + s * (ub - ua)).real < 0


def appendix_I1(c_fn, z0_fn, z1: complex, z2: complex, mu: float, spec: QuadratureSpec | None = None,
                fd: FDSpec | None = None, c_prime_fn=None, z0_prime_fn=None,
                tolerances: tuple = (1e-10, 1e-6)) -> tuple[OracleReport, OracleReport]:
    """Toy integral I1 = int c (z - z0) log(z - z0) over [z1, z0] u [z0, z2].

    Returns (quadrature vs closed form, FD in mu vs the closed-form derivative
    and vs the quadrature of df/dmu); the second report carries both errors.
    """
    spec = spec or QuadratureSpec(abs_tol=1e-14, rel_tol=1e-13)
    fd = fd or FDSpec()
    toy = appendix_toy_f(c_fn, z0_fn, c_prime_fn, z0_prime_fn)

    def path(m):
        z0 = toy.z0(m)
        for a, b in ((z1, z0), (z0, z2)):
            if _crosses_principal_cut(complex(a), complex(b), z0):
                raise GeometryError("integration path crosses the log cut")
        segs = [LineSegment(complex(a), complex(b)) for a, b in ((z1, z0), (z0, z2)) if a != b]
        return Path(tuple(segs))

    def I1(m):
        p = path(m)
        return complex(integrate(lambda z: toy.eval(z, (m,)), p, spec))

    q = I1(mu)
    closed = toy_integral(toy, mu, z1, z2)
    rep_a = compare("toylog-quadrature", q, closed, tolerances[0])
    dfor = toy_integral_dmu(toy, mu, z1, z2)
    if toy.c(mu) == 0 and toy.c_prime_fn(mu) == 0:
        dint = 0j
    else:
        # df/dmu has a log singularity at z0; allow deeper subdivision there
        sing = QuadratureSpec(abs_tol=max(spec.abs_tol, 1e-13), rel_tol=max(spec.rel_tol, 1e-11),
                              max_subdivisions=max(spec.max_subdivisions, 80))
        dint = complex(integrate(lambda z: toy.eval_dbeta(z, (mu,), 1), path(mu), sing))
    rep_fd = fd_check(dfor, lambda h: I1(mu + h), fd, tolerances[1], "toylog-dI1/dmu")
    err_int = compare("", rep_fd.computed, dint, tolerances[1])
    rep_fd.details.update({"interchanged_integral": dint, "rel_err_vs_interchanged": err_int.rel_err})
    rep_fd.passed = rep_fd.passed and err_int.passed
    return rep_a, rep_fd


def fd_check(target_formula, fd_of_base_quantity: Callable[[float], object], spec: FDSpec | None = None,
             tolerance: float = FD_TOL, name: str = "fd") -> OracleReport:
    """Compare a derivative formula with centered differences of the base quantity.

    ``fd_of_base_quantity(delta)`` evaluates the base quantity at parameter
    offset ``delta``.  The observed convergence order (from the two finest
    steps) is always reported.
    """
    spec = spec or FDSpec()
    ref = np.asarray(target_formula() if callable(target_formula) else target_formula)
    ds = []
    for h in spec.steps:
        ds.append((np.asarray(fd_of_base_quantity(h)) - np.asarray(fd_of_base_quantity(-h))) / (2 * h))
    est = ds[-1]
    if spec.richardson and len(ds) >= 2:
        r = spec.steps[-2] / spec.steps[-1]
        est = ds[-1] + (ds[-1] - ds[-2]) / (r * r - 1)
    errs = [float(np.max(np.abs(d - ref))) if np.size(ref) else 0.0 for d in ds]
    order = math.nan
    if len(errs) >= 2:
        e1, e2 = errs[-2], errs[-1]
        if e2 == 0.0 or e1 == 0.0:
            order = math.inf if e2 == 0.0 and e1 > 0 else math.nan
        else:
            order = math.log(e1 / e2) / math.log(spec.steps[-2] / spec.steps[-1])
    details = {"observed_order": order, "step_errors": errs, "steps": list(spec.steps)}
    return compare(name, est, ref, tolerance, details)


def local_exponent(sol: RHPSolution, k: int, radii=None) -> tuple[float, np.ndarray, np.ndarray]:
    """Log-log slope of |h(a + r e) - h(a + r e / 2)| against r at a = alpha_k.

    The difference removes the additive constant (W_j or W_j + 2 Omega
    depending on the sector), leaving the local power of h - const.  The ray
    bisects the widest gap between the arcs leaving alpha_k.
    """
    cfg = sol.config
    a = cfg.alphas[k]
    dirs = []
    for arc in cfg.arcs:
        if abs(arc.start - a) < 1e-12 * cfg.scale:
            dirs.append(np.angle(arc.segments[0].tangent(0.0)))
        if abs(arc.end - a) < 1e-12 * cfg.scale:
            dirs.append(np.angle(-arc.segments[-1].tangent(1.0)))
    dirs = np.sort(np.mod(dirs, 2 * math.pi))
    gaps = np.diff(np.concatenate([dirs, [dirs[0] + 2 * math.pi]]))
    i = int(np.argmax(gaps))
    e = np.exp(1j * (dirs[i] + 0.5 * gaps[i]))
    r = np.geomspace(1e-5, 1e-3, 9) * cfg.scale if radii is None else np.asarray(radii, float)
    v = np.abs(eval_h_robust(a + r * e, sol) - eval_h_robust(a + 0.5 * r * e, sol))
    slope = float(np.polyfit(np.log(r), np.log(v), 1)[0])
    return slope, r, v


# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------

GENUS2_UPPER = (0.1 + 1.1j, 0.6 + 0.8j, 1.0 + 0.4j)


def genus2_fixture(beta=(2.2, 1.0, 0.1), upper=GENUS2_UPPER, degrees: Sequence[int] = range(1, 7),
                   base: JumpFunction | None = None, newton: NewtonOptions | None = None):
    """A genus-2 Schwarz configuration solving the modulation equations exactly.

    K is linear in f, so for f = f_NLS + sum a_k z^k (real a_k) the equations
    K(alpha_j) = 0 at the prescribed branchpoints are a real linear system
    for the a_k.  Returns (f, solution).
    """
    base = base or nls_jump_function()
    al = list(upper) + [np.conj(a) for a in upper[::-1]]
    n_up = len(upper)
    zero = PolynomialJumpFunction(np.zeros((1, len(base.beta_names) + 1)), base.beta_names)
    cols = []
    for k in degrees:
        c = np.zeros(k + 1)
        c[k] = 1.0
        cfg_k = build_configuration(al, beta, AugmentedJumpFunction(zero, c))
        cols.append(modulation_residual(cfg_k)[:n_up])
    A = np.array(cols).T
    K0 = modulation_residual(build_configuration(al, beta, base))[:n_up]
    coef, *_ = np.linalg.lstsq(np.vstack([A.real, A.imag]), -np.concatenate([K0.real, K0.imag]), rcond=None)
    full = np.zeros(max(degrees) + 1)
    full[list(degrees)] = coef
    f = AugmentedJumpFunction(base, full)
    sol = newton_solve(al, beta, f, newton)
    return f, sol


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationConfig:
    beta: tuple = (2.2, 1.0, 0.0)
    initial_alphas: tuple | None = None
    genus2_beta: tuple = (2.2, 1.0, 0.1)
    genus2_upper: tuple = GENUS2_UPPER
    seed: int = 20240607
    quad_tol: float = QUAD_TOL
    fd_tol: float = FD_TOL
    fd: FDSpec = FDSpec()
    newton_tol: float = 1e-11
    n_samples: int = 100


class _Context:
    """Lazily solved fixtures shared across suites of one run."""

    def __init__(self, cfg: ValidationConfig):
        self.cfg = cfg
        self._g0 = None
        self._g2 = None

    @property
    def newton(self):
        return NewtonOptions(residual_tol=self.cfg.newton_tol)

    def genus0(self) -> RHPSolution:
        if self._g0 is None:
            f = nls_jump_function()
            init = self.cfg.initial_alphas
            if init is None:
                init = scan_initializer(self.cfg.beta, f)[0]
            self._g0 = newton_solve(init, self.cfg.beta, f, self.newton)
        return self._g0

    def genus2(self) -> RHPSolution:
        if self._g2 is None:
            self._g2 = genus2_fixture(self.cfg.genus2_beta, self.cfg.genus2_upper, newton=self.newton)[1]
        return self._g2


def _suite_cauchy(ctx: _Context) -> list:
    arc = Path((LineSegment(0j, 1 + 0j),))
    loop = build_loop(arc, 0.3)
    spec = QuadratureSpec(abs_tol=1e-14, rel_tol=1e-13)
    a_in, a_out = 0.4 + 0.1j, 3.0 + 1.0j
    vin = integrate(lambda z: 1.0 / (z - a_in), loop, spec)
    vout = integrate(lambda z: 1.0 / (z - a_out), loop, spec)
    tol = 1e-10
    return [
        compare("cauchy-inside", vin, -2j * math.pi, tol, {"orientation": loop.orientation}),
        OracleReport("cauchy-outside", vout, 0.0, abs(vout), abs(vout), tol, abs(vout) < tol),
    ]


def deformation_reports(sol: RHPSolution, label: str, tol: float, factor: float = 2.0) -> list:
    """D, moments and K(z) (z near each branchpoint) under a loop-standoff change."""
    c1 = sol.config
    geom = GeometryOptions(**{**asdict(c1.geometry), "offset_scale": c1.geometry.offset_scale * factor})
    c2 = build_configuration(c1.points, c1.beta, c1.f, c1.spec, geom)
    t1, t2 = moment_table(c1), moment_table(c2)
    th = np.exp(1j * (0.7 + 2 * math.pi * np.arange(3) / 3))
    zs = (c1.alphas[:, None] + 0.5 * c1.loops.offset * th[None, :]).ravel()
    out = [
        compare(f"deformation-{label}-D", t2.D, t1.D, tol),
        compare(f"deformation-{label}-K", eval_K(zs, c2), eval_K(zs, c1), tol),
    ]
    if c1.N:
        out.append(compare(f"deformation-{label}-moments", np.concatenate([t2.M.ravel(), t2.F.ravel()]),
                           np.concatenate([t1.M.ravel(), t1.F.ravel()]), tol))
    return out


def _suite_deformation(ctx: _Context) -> list:
    tol = ctx.cfg.quad_tol
    return deformation_reports(ctx.genus0(), "genus0", tol) + deformation_reports(ctx.genus2(), "genus2", tol)


def _suite_schwarz(ctx: _Context) -> list:
    rng = np.random.default_rng(ctx.cfg.seed)
    n = ctx.cfg.n_samples
    sol = ctx.genus0()
    cfg = sol.config
    z = (rng.uniform(-3, 3, n) + 1j * rng.uniform(0.05, 3, n))
    z = z[cfg.branch.cut_distance(z) > 1e-3]
    R = cfg.branch
    f = cfg.f
    rep = [
        compare("schwarz-R", R(np.conj(z)), np.conj(R(z)), ctx.cfg.quad_tol, {"seed": ctx.cfg.seed}),
        compare("schwarz-f", f.eval(np.conj(z), cfg.beta), np.conj(f.eval(z, cfg.beta)), ctx.cfg.quad_tol,
                {"seed": ctx.cfg.seed}),
    ]
    zs = z[:10]
    zs = zs[(cfg.loops.main_loops[0].distance(zs) > 0.3 * cfg.loops.offset)
            & (cfg.loops.outer.distance(zs) > 0.3 * cfg.loops.offset)]
    rep.append(compare("schwarz-h", eval_h(np.conj(zs), sol), np.conj(eval_h(zs, sol)), ctx.cfg.quad_tol,
                       {"seed": ctx.cfg.seed}))
    return rep


def _suite_appendix(ctx: _Context) -> list:
    a, _ = appendix_I1(1.0, 0.0, -1.0, 1.0, 1.0)
    a.name = "toylog-closed-form"
    q, d = appendix_I1(lambda m: 1.0 + 0.5 * m, lambda m: m * (0.1 + 0.05j), -1.0, 1.0 + 0.5j, 1.0,
                       c_prime_fn=lambda m: 0.5, z0_prime_fn=lambda m: 0.1 + 0.05j)
    return [a, q, d]


def derivative_reports(sol: RHPSolution, tol: float, fd: FDSpec, newton: NewtonOptions,
                       zs: Sequence[complex] | None = None) -> list:
    """Derivative formulas vs FD: dK at fixed alpha, d alpha, dh, dW and dOmega along the branch."""
    cfg = sol.config
    f = cfg.f
    beta = np.array(cfg.beta)
    out = []
    cache = {}

    def resolve(k, h):
        key = (k, h)
        if key not in cache:
            e = np.zeros(beta.size)
            e[k - 1] = h
            cache[key] = newton_solve(sol.alphas.array, beta + e, f, newton, cfg.spec, cfg.geometry)
        return cache[key]

    if zs is None:
        zs = _interior_points(sol)
    zs = np.asarray(zs, dtype=complex)
    for k in range(1, beta.size + 1):
        name = f.beta_names[k - 1]

        def K_at(h, k=k):
            e = np.zeros(beta.size)
            e[k - 1] = h
            return modulation_residual(build_configuration(cfg.points, beta + e, f, cfg.spec, cfg.geometry))

        out.append(fd_check(lambda k=k: dK_dbeta(cfg, k), K_at, fd, tol, f"dK/d{name}"))
        out.append(fd_check(lambda k=k: dalpha_dbeta(sol, k), lambda h, k=k: resolve(k, h).alphas.array, fd, tol,
                            f"dalpha/d{name}"))
        out.append(fd_check(lambda k=k: dh_dbeta(zs, sol, k), lambda h, k=k: eval_h(zs, resolve(k, h)), fd, tol,
                            f"dh/d{name}"))
        # W_1..W_N and Omega_1..Omega_N (empty for N = 0)
        out.append(fd_check(lambda k=k: dW_dbeta(sol, k), lambda h, k=k: np.array(resolve(k, h).W[1:]), fd, tol,
                            f"dW/d{name}"))
        out.append(fd_check(lambda k=k: dOmega_dbeta(sol, k), lambda h, k=k: np.array(resolve(k, h).Omega), fd,
                            tol, f"dOmega/d{name}"))
    return out


def _interior_points(sol: RHPSolution, n: int = 5) -> np.ndarray:
    """Points inside the outer loop, clear of all loops and arcs."""
    cfg = sol.config
    L = cfg.loops
    cand = []
    for a in cfg.alphas:
        for r in (1.4, 2.6):
            for th in (0.3, 2.2, 4.1):
                cand.append(a + r * L.offset * np.exp(1j * th))
    cand = np.array(cand)
    clear = np.ones(cand.size, bool)
    for p in [L.outer] + list(L.main_loops) + list(L.comp_loops):
        clear &= p.distance(cand) > 0.25 * L.offset
    for arc in cfg.arcs:
        clear &= arc.distance(cand) > 0.25 * L.offset
    pick = cand[clear]
    return pick[np.linspace(0, pick.size - 1, min(n, pick.size)).astype(int)]


def _suite_fd_all(ctx: _Context) -> list:
    reps = [r for r in derivative_reports(ctx.genus0(), ctx.cfg.fd_tol, ctx.cfg.fd, ctx.newton)]
    for r in reps:
        r.name = "genus0-" + r.name
    reps2 = derivative_reports(ctx.genus2(), ctx.cfg.fd_tol, ctx.cfg.fd, ctx.newton)
    for r in reps2:
        r.name = "genus2-" + r.name
    return reps + reps2


def _suite_jumps(ctx: _Context) -> list:
    out = []
    for label, sol in (("genus0", ctx.genus0()), ("genus2", ctx.genus2())):
        rep = jump_check(sol, n_per_arc=16)
        v = max(rep.main_violation, rep.comp_violation)
        out.append(OracleReport(f"jumps-{label}", v, 0.0, v, v, 1e-7, v < 1e-7,
                                {"main": rep.main_violation, "comp": rep.comp_violation, "n_points": len(rep.points)}))
    return out


def _suite_gprime(ctx: _Context) -> list:
    sol = ctx.genus0()
    rep = gprime_jump_check(sol)
    decay = rep.decay
    vals = list(decay.values())
    bounded = bool(len(vals) >= 2 and max(vals) <= 10 * max(min(vals), 1e-300))
    return [
        OracleReport("gprime-jump", rep.max_violation, 0.0, rep.max_violation, rep.max_violation, 1e-6,
                     rep.max_violation < 1e-6, {"n_points": len(rep.points)}),
        OracleReport("gprime-decay", vals, None, 0.0, 0.0, 0.0, bounded, {"|g' z^2|": decay}),
    ]


def _suite_signs(ctx: _Context) -> list:
    rep = sign_condition_check(ctx.genus0())
    return [OracleReport("signs-genus0", rep.worst[0], 0.0, rep.worst[0], rep.worst[0], 0.0, rep.passed,
                         {"main": rep.main_arcs_ok, "sides": rep.sides_ok, "comp": rep.comp_arcs_ok,
                          "extensions": rep.extensions_ok, "worst": rep.worst})]


SUITES = {
    "cauchy": _suite_cauchy,
    "deformation": _suite_deformation,
    "schwarz": _suite_schwarz,
    "appendix": _suite_appendix,
    "fd-all": _suite_fd_all,
    "jumps": _suite_jumps,
    "gprime": _suite_gprime,
    "signs": _suite_signs,
}


def suite_run(names: Sequence[str], config: ValidationConfig | None = None) -> list:
    """Run the named suites; reports are ordered by suite name as given."""
    names = list(names)
    bad = [n for n in names if n not in SUITES]
    if bad:
        raise UnknownSuiteError(f"unknown suite(s) {bad}; available: {sorted(SUITES)}")
    ctx = _Context(config or ValidationConfig())
    out = []
    for n in names:
        for r in SUITES[n](ctx):
            r.details.setdefault("suite", n)
            out.append(r)
    return out
