"""Determinant machinery for the scalar RHP: D, K, K', B, h, g and derivatives.

Notation.  M is the 2N x 2N moment matrix (rows: small loops m1..mN, c1..cN;
columns: integrals of zeta^n / R for n < N followed by their conjugates), F is
the matching row built from f on the outer loop, c(z) the column of small-loop
Cauchy integrals and cf(z) the outer Cauchy integral of f.  Expanding the
(2N+1) x (2N+1) determinant along its last row/column gives

    K(z) = D (cf(z) - F M^{-1} c(z)) / (2 pi i),   D = det M,

so the bracket is B(z) = cf(z) + w . c(z) with w M = -F, i.e. w = (W_1..W_N,
Omega_1..Omega_N).  For N = 0, D = 1 and K = cf / (2 pi i).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .contour import (
    GeometryError,
    LineSegment,
    LoopSystem,
    Path,
    QuadratureAccuracyError,
    QuadratureSpec,
    build_arc_chain,
    build_loop_system,
    integrate_detailed,
)
from .ffunction import JumpFunction
from .radical import BranchPointSet, RadicalBranch

__all__ = [
    "PlacementError",
    "IllConditionedError",
    "DegenerateJacobianError",
    "NearSingularWarning",
    "GeometryOptions",
    "Configuration",
    "RHPSolution",
    "BracketCoefficients",
    "GPrimeReport",
    "contour_arcs",
    "build_configuration",
    "moment_table",
    "eval_D",
    "eval_B",
    "eval_K",
    "eval_K_prime",
    "solve_W_Omega",
    "eval_h",
    "eval_h_robust",
    "eval_h_prime",
    "eval_g",
    "modulation_residual",
    "jacobian_diag",
    "jacobian_diag_from_K_prime",
    "dK_dbeta",
    "dalpha_dbeta",
    "dh_dbeta",
    "dW_dbeta",
    "dOmega_dbeta",
    "bracket_coefficients",
    "gprime_jump_check",
    "make_solution",
    "jump_check",
    "residual_and_jacobian",
    "eval_g_prime",
]

TWO_PI_I = 2j * math.pi


class PlacementError(GeometryError):
    """Evaluation point violates the loop placement rule of the formula."""


class IllConditionedError(ArithmeticError):
    pass


class DegenerateJacobianError(ArithmeticError):
    pass


class NearSingularWarning(RuntimeWarning):
    pass


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeometryOptions:
    """How loops are laid out around the contour.

    The small-loop offset is ``offset_factor * min(d_branch, d_f / 2)`` times
    ``offset_scale``; the outer loop sits at ``outer_factor`` times that.
    ``knee_fraction`` sets the height (as a fraction of Im alpha_N) of the
    vertical piece through z0 in the pinched layout.
    """

    offset_factor: float = 0.3
    outer_factor: float = 2.0
    offset_scale: float = 1.0
    knee_fraction: float = 0.5
    interpolation: str = "polyline"
    pinch: bool | None = None

    def __post_init__(self):
        if not (0 < self.offset_factor and 1 < self.outer_factor and 0 < self.offset_scale):
            raise ValueError("invalid geometry options")
        if not 0 < self.knee_fraction < 1:
            raise ValueError("knee_fraction must be in (0, 1)")


def contour_arcs(alphas: Sequence[complex], z0: float | None = None, knee_fraction: float = 0.5,
                 interpolation: str = "polyline"):
    """Arcs alpha_k -> alpha_{k+1} (k = 0..2N) plus the chains of a pinched layout.

    Returns ``(arcs, upper_chain, lower_chain)``.  With ``z0`` the branchpoints
    must be alpha_0..alpha_N in the upper and alpha_{N+1}..alpha_{2N+1} in the
    lower half-plane; the middle arc then passes vertically through z0, the
    upper chain runs z0 -> z0 + i h -> alpha_N -> ... -> alpha_0 and the lower
    chain z0 -> z0 - i h' -> alpha_{N+1} -> ... -> alpha_{2N+1}.
    """
    a = [complex(x) for x in alphas]
    n = len(a)
    if z0 is None:
        arcs = tuple(Path((LineSegment(a[k], a[k + 1]),)) for k in range(n - 1))
        return arcs, None, None
    N = n // 2 - 1
    if any(a[j].imag <= 0 for j in range(N + 1)) or any(a[j].imag >= 0 for j in range(N + 1, n)):
        raise GeometryError("pinched layout needs alpha_0..alpha_N above and the rest below the real axis")
    z0 = complex(z0)
    knee_up = z0 + 1j * knee_fraction * a[N].imag
    knee_dn = z0 + 1j * knee_fraction * a[N + 1].imag
    arcs = []
    for k in range(n - 1):
        if k == N:
            arcs.append(build_arc_chain([a[N], knee_up, z0, knee_dn, a[N + 1]], "polyline"))
        else:
            arcs.append(build_arc_chain([a[k], a[k + 1]], interpolation))
    up = build_arc_chain([z0, knee_up] + [a[j] for j in range(N, -1, -1)], "polyline")
    dn = build_arc_chain([z0, knee_dn] + [a[j] for j in range(N + 1, n)], "polyline")
    return tuple(arcs), up, dn


def _segment_point_distance(arcs, pts) -> float:
    pts = np.asarray(pts, dtype=complex)
    if pts.size == 0:
        return math.inf
    return float(min(np.min(arc.distance(pts)) for arc in arcs))


def _path_distance(p: Path, q: Path, n: int = 64) -> float:
    return float(min(np.min(q.distance(p.sample(n))), np.min(p.distance(q.sample(n)))))


def _loop_offset(points: BranchPointSet, arcs, f: JumpFunction, beta, chains, opts: GeometryOptions) -> float:
    al = points.array
    d_branch = float(np.min(np.abs(al[:, None] - al[None, :]) + np.diag(np.full(len(al), np.inf))))
    for k, arc in enumerate(arcs):
        others = [al[i] for i in range(len(al)) if i not in (k, k + 1)]
        d_branch = min(d_branch, _segment_point_distance([arc], others))
        for m in range(k + 2, len(arcs)):
            d_branch = min(d_branch, _path_distance(arc, arcs[m]))
    d_f = _segment_point_distance(arcs, f.excluded_points(beta))
    for chain in chains:
        # the lobes must stay off the real axis except at the pinch
        rest = Path(chain.segments[1:])
        d_f = min(d_f, float(np.min(np.abs(rest.sample(64).imag))))
    return opts.offset_factor * min(d_branch, d_f / 2) * opts.offset_scale


@dataclass(frozen=True)
class Configuration:
    """A branchpoint set with its contour, loops, radical branch and f."""

    points: BranchPointSet
    beta: tuple
    f: JumpFunction
    arcs: tuple
    loops: LoopSystem
    branch: RadicalBranch
    spec: QuadratureSpec
    geometry: GeometryOptions
    upper_chain: Path | None = None
    lower_chain: Path | None = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def N(self) -> int:
        return self.points.genus_index

    @property
    def alphas(self) -> np.ndarray:
        return self.points.array

    @property
    def scale(self) -> float:
        return self.points.scale

    @property
    def pinched(self) -> bool:
        return self.loops.outer_upper is not None

    @property
    def main_arcs(self) -> tuple:
        return self.arcs[0::2]

    @property
    def comp_arcs(self) -> tuple:
        return self.arcs[1::2]

    def with_beta(self, beta) -> "Configuration":
        return build_configuration(self.alphas, beta, self.f, self.spec, self.geometry)

    def with_alphas(self, alphas) -> "Configuration":
        return build_configuration(alphas, self.beta, self.f, self.spec, self.geometry)


def build_configuration(alphas, beta, f: JumpFunction, spec: QuadratureSpec | None = None,
                        geometry: GeometryOptions | None = None, offset: float | None = None) -> Configuration:
    """Contour, loops and radical for branchpoints ``alphas`` at parameters ``beta``."""
    spec = spec or QuadratureSpec()
    geometry = geometry or GeometryOptions()
    points = alphas if isinstance(alphas, BranchPointSet) else BranchPointSet(tuple(alphas))
    beta = tuple(float(b) for b in f._beta(beta))
    z0 = f.z0(beta[0]) if f.beta_names else None
    pinch = geometry.pinch
    if pinch is None:
        half = len(points.alphas) // 2
        split = all(a.imag > 0 for a in points.alphas[:half]) and all(a.imag < 0 for a in points.alphas[half:])
        pinch = z0 is not None and f.schwarz and split and complex(z0).imag == 0
    if pinch and not f.schwarz:
        raise GeometryError("the pinched outer loop needs a Schwarz-symmetric f")
    arcs, up, dn = contour_arcs(points.alphas, z0 if pinch else None, geometry.knee_fraction, geometry.interpolation)
    chains = [c for c in (up, dn) if c is not None]
    eps = offset if offset is not None else _loop_offset(points, arcs, f, beta, chains, geometry)
    if not eps > 0:
        raise GeometryError("contour leaves no room for loops")
    loops = build_loop_system(
        arcs, eps, geometry.outer_factor * eps, excluded=f.excluded_points(beta), upper_chain=up,
        lower_chain=dn,
    )
    branch = RadicalBranch(points, tuple(arcs[0::2]))
    return Configuration(points, beta, f, tuple(arcs), loops, branch, spec, geometry, up, dn)


# ---------------------------------------------------------------------------
# loop integrals
# ---------------------------------------------------------------------------


def _record_error(cfg: Configuration, key: str, err) -> None:
    e = float(np.max(np.abs(err))) if np.size(err) else 0.0
    cfg.diagnostics[key] = max(cfg.diagnostics.get(key, 0.0), e)


def _small_loops(cfg: Configuration):
    L = cfg.loops
    loops = list(L.main_loops[1:]) + list(L.comp_loops)
    weights = [None] * cfg.N + list(L.comp_signs)
    return loops, weights


def _small_integrals(cfg: Configuration, zs: np.ndarray, power: int = 1):
    """(Mraw[2N, N], C[2N, nz]) over loops m1..mN, c1..cN."""
    N = cfg.N
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    loops, weights = _small_loops(cfg)
    Mraw = np.zeros((2 * N, N), dtype=complex)
    C = np.zeros((2 * N, zs.size), dtype=complex)
    if N == 0:
        return Mraw, C
    R = cfg.branch
    pw = np.arange(N)

    def integrand(zeta):
        inv = 1.0 / R(zeta)
        rows = [zeta[None, :] ** pw[:, None] * inv[None, :]]
        if zs.size:
            rows.append(inv[None, :] / (zeta[None, :] - zs[:, None]) ** power)
        return np.concatenate(rows, axis=0)

    for l, (loop, wt) in enumerate(zip(loops, weights)):
        res = integrate_detailed(integrand, loop, cfg.spec, wt)
        _record_error(cfg, "small_loop_error", res.error)
        Mraw[l] = res.value[:N]
        C[l] = res.value[N:]
    return Mraw, C


def _outer_integrals(cfg: Configuration, gs: Sequence[Callable], zs: np.ndarray, power: int = 1):
    """For each g: (moments of zeta^n g / R for n < N, Cauchy integrals at zs) over the outer loop."""
    N = cfg.N
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    R = cfg.branch
    pw = np.arange(N)
    m = N + zs.size

    def block(zeta, gv, Rv, zz):
        inv = 1.0 / Rv
        rows = []
        if N:
            rows.append(zeta[None, :] ** pw[:, None] * (gv * inv)[None, :])
        if zz.size:
            rows.append((gv * inv)[None, :] / (zeta[None, :] - zz[:, None]) ** power)
        return np.concatenate(rows, axis=0) if rows else np.zeros((0, zeta.size), dtype=complex)

    if cfg.pinched:
        # upper lobe with f from above; lower lobe mapped to its mirror image:
        # int_{lower} F = conj(int_{conj lower} conj F(conj eta) d eta)
        def up_integrand(eta):
            Rv = R(eta)
            return np.concatenate([block(eta, g(eta), Rv, zs) for g in gs], axis=0)

        def dn_integrand(eta):
            Rc = np.conj(R(np.conj(eta)))
            return np.concatenate([block(eta, g(eta), Rc, np.conj(zs)) for g in gs], axis=0)

        ru = integrate_detailed(up_integrand, cfg.loops.outer_upper, cfg.spec)
        rd = integrate_detailed(dn_integrand, cfg.loops.outer_lower.conj(), cfg.spec)
        total = (ru.value + np.conj(rd.value)).reshape(len(gs), m)
        _record_error(cfg, "outer_loop_error", ru.error + rd.error)
        return [(total[i, :N], total[i, N:]) for i in range(len(gs))]
    else:

        def integrand(zeta):
            Rv = R(zeta)
            return np.concatenate([block(zeta, g(zeta), Rv, zs) for g in gs], axis=0)

        res = integrate_detailed(integrand, cfg.loops.outer, cfg.spec)
        total = res.value.reshape(len(gs), m)
    _record_error(cfg, "outer_loop_error", res.error)
    return [(total[i, :N], total[i, N:]) for i in range(len(gs))]


def _f_of(cfg: Configuration, which="f", k=None) -> Callable:
    f, b = cfg.f, cfg.beta
    if which == "f":
        return lambda z: f.eval(z, b)
    if which == "fz":
        return lambda z: f.eval_zprime(z, b)
    return lambda z: f.eval_dbeta(z, b, k)


def _full(raw: np.ndarray) -> np.ndarray:
    return np.concatenate([raw, np.conj(raw)], axis=-1)


@dataclass(frozen=True)
class MomentTable:
    """Moment system at one configuration."""

    main_moments: np.ndarray  # (N, N): loops m1..mN
    comp_moments: np.ndarray  # (N, N): loops c1..cN
    f_moments: np.ndarray  # (N,)
    M: np.ndarray  # (2N, 2N)
    F: np.ndarray  # (2N,)
    D: complex
    w: np.ndarray  # (2N,) = (W_1..W_N, Omega_1..Omega_N), complex before taking real parts
    condition: float


def moment_table(cfg: Configuration) -> MomentTable:
    cached = cfg.diagnostics.get("_moment_table")
    if cached is not None:
        return cached
    N = cfg.N
    Mraw, _ = _small_integrals(cfg, np.zeros(0))
    ((Fraw, _),) = _outer_integrals(cfg, [_f_of(cfg)], np.zeros(0))
    M = _full(Mraw)
    F = _full(Fraw)
    if N == 0:
        tab = MomentTable(Mraw[:0], Mraw[:0], Fraw, M, F, 1.0 + 0j, np.zeros(0, dtype=complex), 1.0)
    else:
        D = complex(np.linalg.det(M))
        entry = float(np.max(np.abs(M)))
        if abs(D) < 1e-14 * entry ** (2 * N):
            warnings.warn("moment determinant D is nearly singular", NearSingularWarning, stacklevel=2)
        cond = float(np.linalg.cond(M))
        w = np.linalg.solve(M.T, -F)
        tab = MomentTable(Mraw[:N], Mraw[N:], Fraw, M, F, D, w, cond)
    cfg.diagnostics["_moment_table"] = tab
    return tab


# ---------------------------------------------------------------------------
# placement
# ---------------------------------------------------------------------------


def _adjacent_loops(k: int, N: int) -> set:
    out = {("main", k // 2)}
    if k % 2 == 1 and k < 2 * N + 1:
        out.add(("comp", (k + 1) // 2))
    if k % 2 == 0 and k > 0:
        out.add(("comp", k // 2))
    return out


def _containing(cfg: Configuration, zs: np.ndarray) -> list:
    L = cfg.loops
    tags = [("main", j) for j in range(cfg.N + 1)] + [("comp", j) for j in range(1, cfg.N + 1)]
    paths = list(L.main_loops) + list(L.comp_loops)
    inside = np.stack([p.contains(zs) for p in paths]) if paths else np.zeros((0, zs.size), bool)
    return [frozenset(t for t, flag in zip(tags, inside[:, i]) if flag) for i in range(zs.size)]


def _check_on_loops(cfg: Configuration, zs: np.ndarray) -> None:
    L = cfg.loops
    tol = 1e-3 * L.offset
    for p in [L.outer] + list(L.main_loops) + list(L.comp_loops):
        if np.any(p.distance(zs) < tol):
            raise PlacementError("evaluation point lies on an integration loop")


def _check_K_placement(cfg: Configuration, zs: np.ndarray) -> None:
    _check_on_loops(cfg, zs)
    if not np.all(cfg.loops.outer.contains(zs)):
        raise PlacementError("K requires z inside the outer loop")
    N = cfg.N
    allowed = [_adjacent_loops(k, N) for k in range(2 * N + 2)]
    for c in _containing(cfg, zs):
        if c and not any(c <= a for a in allowed):
            raise PlacementError("z lies inside small loops that are not adjacent to one branchpoint")


# ---------------------------------------------------------------------------
# K, D, B
# ---------------------------------------------------------------------------


def eval_D(cfg: Configuration) -> complex:
    """2N x 2N moment determinant; 1 for N = 0."""
    return moment_table(cfg).D


def _bracket(cfg: Configuration, zs: np.ndarray, which="f", k=None, power: int = 1):
    """B-type values cf + w . c at zs for f (or f_beta / f')."""
    tab = moment_table(cfg)
    _, C = _small_integrals(cfg, zs, power)
    ((Fraw, cf),) = _outer_integrals(cfg, [_f_of(cfg, which, k)], zs, power)
    if which == "f":
        w = tab.w
    elif cfg.N:
        w = np.linalg.solve(tab.M.T, -_full(Fraw))
    else:
        w = np.zeros(0, dtype=complex)
    return cf + w @ C, w


def _out(z, v):
    return complex(v[0]) if np.ndim(z) == 0 else v


def eval_B(z, cfg: Configuration, check: bool = True):
    """The bracket B(z) = 2 pi i K(z) / D under the K placement rule."""
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    if check:
        _check_K_placement(cfg, zs)
    B, _ = _bracket(cfg, zs)
    return _out(z, B)


def eval_K(z, cfg: Configuration, check: bool = True):
    """K(z) = D B(z) / (2 pi i); z inside the outer loop, outside non-adjacent small loops."""
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    if check:
        _check_K_placement(cfg, zs)
    B, _ = _bracket(cfg, zs)
    return _out(z, eval_D(cfg) * B / TWO_PI_I)


def eval_K_prime(z, cfg: Configuration, check: bool = True):
    """dK/dz: the Cauchy kernels squared."""
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    if check:
        _check_K_placement(cfg, zs)
    B1, _ = _bracket(cfg, zs, power=2)
    return _out(z, eval_D(cfg) * B1 / TWO_PI_I)


def solve_W_Omega(cfg: Configuration, cond_limit: float = 1e12):
    """Real constants (W, Omega) with W[0] = 0; imaginary residue recorded in diagnostics."""
    N = cfg.N
    if N == 0:
        return [0.0], []
    tab = moment_table(cfg)
    if tab.condition > cond_limit:
        raise IllConditionedError(f"moment system condition number {tab.condition:.3g}")
    cfg.diagnostics["W_Omega_imag"] = float(np.max(np.abs(tab.w.imag)))
    W = [0.0] + [float(v) for v in tab.w[:N].real]
    Om = [float(v) for v in tab.w[N:].real]
    return W, Om


# ---------------------------------------------------------------------------
# h and g
# ---------------------------------------------------------------------------


def _residue_terms(cfg: Configuration, zs: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Sum of the jump constants of the small loops containing each z (W_0 = 0)."""
    N = cfg.N
    out = np.zeros(zs.size, dtype=complex)
    if N == 0:
        return out
    regions = cfg.loops.comp_left_regions
    for i, c in enumerate(_containing(cfg, zs)):
        for kind, j in c:
            if kind == "main" and j >= 1:
                out[i] += w[j - 1]
            elif kind == "comp":
                sigma = 1.0 if regions[j - 1].contains(zs[i : i + 1])[0] else -1.0
                out[i] += sigma * w[N + j - 1]
    return out


def _config_of(obj) -> Configuration:
    return obj.config if isinstance(obj, RHPSolution) else obj


def _h_generic(z, cfg, which="f", k=None, derivative=False):
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    _check_on_loops(cfg, zs)
    inside = cfg.loops.outer.contains(zs)
    B, w = _bracket(cfg, zs, which, k)
    Rz = cfg.branch(zs)
    if derivative:
        B1, _ = _bracket(cfg, zs, which, k, power=2)
        val = (Rz * cfg.branch.log_derivative(zs) * B + Rz * B1) / TWO_PI_I
    else:
        val = Rz * B / TWO_PI_I
        wr = w.real if which == "f" else w
        val = val + _residue_terms(cfg, zs, wr)
    fn = {"f": "f", "fb": "fb"}[which]
    if np.any(~inside):
        fo = zs[~inside]
        if derivative:
            fv = cfg.f.eval_zprime(fo, cfg.beta)
        else:
            fv = _f_of(cfg, fn, k)(fo)
        val[~inside] -= fv
    return zs, val, inside


def eval_h(z, solution) -> complex:
    """h(z) at any point off the loops (placement handled by residue terms)."""
    cfg = _config_of(solution)
    _, val, _ = _h_generic(z, cfg)
    return _out(z, val)


def _loop_distance(cfg: Configuration, zs: np.ndarray) -> np.ndarray:
    L = cfg.loops
    return np.min(np.stack([p.distance(zs) for p in [L.outer] + list(L.main_loops) + list(L.comp_loops)]), axis=0)


def _h_batched(zs: np.ndarray, cfg: Configuration) -> np.ndarray:
    # a vector integrand over many points can exhaust the panel budget; split the batch
    try:
        return _h_generic(zs, cfg)[1]
    except QuadratureAccuracyError:
        if zs.size == 1:
            raise
        m = zs.size // 2
        return np.concatenate([_h_batched(zs[:m], cfg), _h_batched(zs[m:], cfg)])


def eval_h_robust(z, solution, clearance: float = 0.2, scales=(1.0, 0.6, 1.45, 0.4), strict: bool = True):
    """h(z) for arbitrary points off the contour arcs.

    Points closer than ``clearance * offset`` to a loop are re-evaluated with
    loops built at another offset scale (h does not depend on the loops).
    Points no layout keeps clear of (next to a pinch point) raise, or give
    NaN when ``strict`` is false.
    """
    cfg = _config_of(solution)
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.full(zs.size, np.nan + 0j)
    todo = np.ones(zs.size, bool)
    cache = cfg.diagnostics.setdefault("_alt_configs", {})
    for s in scales:
        if not np.any(todo):
            break
        if s == 1.0:
            c = cfg
        else:
            if s not in cache:
                geom = replace(cfg.geometry, offset_scale=cfg.geometry.offset_scale * s)
                try:
                    cache[s] = build_configuration(cfg.points, cfg.beta, cfg.f, cfg.spec, geom)
                except GeometryError:
                    cache[s] = None
            c = cache[s]
            if c is None:
                continue
        idx = np.nonzero(todo)[0]
        ok = _loop_distance(c, zs[idx]) >= clearance * c.loops.offset
        if np.any(ok):
            out[idx[ok]] = _h_batched(zs[idx[ok]], c)
            todo[idx[ok]] = False
    if np.any(todo) and strict:
        raise PlacementError("no loop layout keeps clear of the evaluation point")
    return _out(z, out)


def eval_h_prime(z, solution) -> complex:
    cfg = _config_of(solution)
    _, val, _ = _h_generic(z, cfg, derivative=True)
    return _out(z, val)


def eval_g(z, solution) -> complex:
    """g = (h + f)/2 inside the outer loop; R B / (4 pi i) outside it."""
    cfg = _config_of(solution)
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    _check_on_loops(cfg, zs)
    inside = cfg.loops.outer.contains(zs)
    g = np.empty(zs.size, dtype=complex)
    if np.any(inside):
        zi = zs[inside]
        _, h, _ = _h_generic(zi, cfg)
        g[inside] = 0.5 * (h + cfg.f.eval(zi, cfg.beta))
    if np.any(~inside):
        zo = zs[~inside]
        B, _ = _bracket(cfg, zo)
        g[~inside] = cfg.branch(zo) * B / (2 * TWO_PI_I)
    return _out(z, g)


def eval_g_prime(z, solution) -> complex:
    cfg = _config_of(solution)
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    _check_on_loops(cfg, zs)
    inside = cfg.loops.outer.contains(zs)
    out = np.empty(zs.size, dtype=complex)
    if np.any(inside):
        zi = zs[inside]
        _, hp, _ = _h_generic(zi, cfg, derivative=True)
        out[inside] = 0.5 * (hp + cfg.f.eval_zprime(zi, cfg.beta))
    if np.any(~inside):
        zo = zs[~inside]
        B, _ = _bracket(cfg, zo)
        B1, _ = _bracket(cfg, zo, power=2)
        Rz = cfg.branch(zo)
        out[~inside] = (Rz * cfg.branch.log_derivative(zo) * B + Rz * B1) / (2 * TWO_PI_I)
    return _out(z, out)


# ---------------------------------------------------------------------------
# modulation equations and derivatives
# ---------------------------------------------------------------------------


def modulation_residual(cfg: Configuration) -> np.ndarray:
    """(K(alpha_0), ..., K(alpha_{2N+1})) with each alpha_j inside its adjacent loops."""
    return np.atleast_1d(eval_K(cfg.alphas, cfg, check=False))


def residual_and_jacobian(cfg: Configuration):
    """K(alpha_j) and (D / 2 pi i) oint f' / ((zeta - alpha_j) R) in one pass over the loops."""
    tab = moment_table(cfg)
    al = cfg.alphas
    _, C = _small_integrals(cfg, al)
    (_, cf), (_, cfz) = _outer_integrals(cfg, [_f_of(cfg), _f_of(cfg, "fz")], al)
    K = tab.D * (cf + tab.w @ C) / TWO_PI_I
    J = tab.D * cfz / TWO_PI_I
    return K, J


def jacobian_diag(cfg: Configuration) -> np.ndarray:
    """Diagonal entries dK(alpha_j)/dalpha_j = (D / 2 pi i) oint f' / ((zeta - alpha_j) R)."""
    _, J = residual_and_jacobian(cfg)
    if np.any(np.abs(J) < 1e-12 * cfg.scale):
        raise DegenerateJacobianError("vanishing diagonal Jacobian entry")
    return J


def jacobian_diag_from_K_prime(cfg: Configuration) -> np.ndarray:
    """(3/2) K'(alpha_j), the second form of the diagonal entries (valid at solutions)."""
    return 1.5 * np.atleast_1d(eval_K_prime(cfg.alphas, cfg, check=False))


def dK_dbeta(cfg: Configuration, k) -> np.ndarray:
    """dK(alpha_j)/dbeta_k at fixed alpha: the f row replaced by f_beta on the same loops."""
    B, _ = _bracket(cfg, cfg.alphas, "fb", k)
    return eval_D(cfg) * B / TWO_PI_I


def dalpha_dbeta(solution, k) -> np.ndarray:
    """-2 pi i dK_j/dbeta_k / (D oint f' / ((zeta - alpha_j) R))."""
    cfg = _config_of(solution)
    J = jacobian_diag(cfg)
    return -dK_dbeta(cfg, k) / J


def dh_dbeta(z, solution, k):
    """dh/dbeta_k: the h formula with f replaced by f_beta (moment terms included)."""
    cfg = _config_of(solution)
    _, val, _ = _h_generic(z, cfg, "fb", k)
    return _out(z, val)


def _cramer(cfg: Configuration, k, rows: Sequence[int]) -> np.ndarray:
    tab = moment_table(cfg)
    ((Fraw, _),) = _outer_integrals(cfg, [_f_of(cfg, "fb", k)], np.zeros(0))
    Fb = _full(Fraw)
    out = []
    for l in rows:
        Ml = tab.M.copy()
        Ml[l] = Fb
        out.append(-np.linalg.det(Ml) / tab.D)
    return np.array(out, dtype=complex)


def dW_dbeta(solution, k) -> np.ndarray:
    """dW_j/dbeta_k for j = 1..N (W_0 = 0 is fixed): (-1/D) det with row m_j replaced by F_beta."""
    cfg = _config_of(solution)
    v = _cramer(cfg, k, range(cfg.N))
    cfg.diagnostics["dW_imag"] = float(np.max(np.abs(v.imag))) if v.size else 0.0
    return v.real


def dOmega_dbeta(solution, k) -> np.ndarray:
    """dOmega_j/dbeta_k for j = 1..N: (-1/D) det with row c_j replaced by F_beta."""
    cfg = _config_of(solution)
    v = _cramer(cfg, k, range(cfg.N, 2 * cfg.N))
    cfg.diagnostics["dOmega_imag"] = float(np.max(np.abs(v.imag))) if v.size else 0.0
    return v.real


# ---------------------------------------------------------------------------
# local structure and g' check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BracketCoefficients:
    nu: np.ndarray  # (2N+2, 2): nu_1, nu_2 per branchpoint
    fit_residual: np.ndarray
    flagged: np.ndarray  # True where |nu_1| exceeds the tolerance


def bracket_coefficients(solution, radius_fraction: float = 0.4, n_points: int = 24, degree: int = 8,
                         tol: float | None = None) -> BracketCoefficients:
    """Taylor coefficients of B at each alpha_j from a least-squares fit on a small circle."""
    cfg = _config_of(solution)
    r = radius_fraction * cfg.loops.offset
    th = 2 * math.pi * (np.arange(n_points) + 0.5) / n_points
    u = r * np.exp(1j * th)
    V = (u[:, None] / r) ** np.arange(degree + 1)[None, :]
    nu, res = [], []
    for a in cfg.alphas:
        B = np.atleast_1d(eval_B(a + u, cfg, check=False))
        coef, *_ = np.linalg.lstsq(V, B, rcond=None)
        coef = coef / r ** np.arange(degree + 1)
        nu.append(coef[:2])
        res.append(float(np.max(np.abs(V @ (coef * r ** np.arange(degree + 1)) - B))))
    nu = np.array(nu)
    res = np.array(res)
    if tol is None:
        tol = 1e-6 * max(1.0, float(np.max(np.abs(nu[:, 1]))))
    flagged = np.abs(nu[:, 0]) > tol
    if np.any(res > 1e-6 * max(1.0, float(np.max(np.abs(nu))))):
        warnings.warn("bracket fit residual is large; B may not be analytic at a branchpoint", RuntimeWarning,
                      stacklevel=2)
    return BracketCoefficients(nu, res, flagged)


@dataclass(frozen=True)
class GPrimeReport:
    max_violation: float
    points: np.ndarray
    violations: np.ndarray
    decay: dict


def gprime_jump_check(solution, n_per_arc: int = 5, eta_fraction: float = 1e-3) -> GPrimeReport:
    """Check g'_+ + g'_- = f' on main arcs and g' = O(z^-2) at infinity.

    g' is evaluated just off the arc on both sides at distances eta and
    eta/2 and Richardson-extrapolated to the arc.
    """
    cfg = _config_of(solution)
    eta = eta_fraction * cfg.loops.offset
    pts, viol = [], []
    for arc in cfg.main_arcs:
        for seg in arc.segments:
            for s in (np.arange(n_per_arc) + 0.5) / n_per_arc:
                z = complex(seg.point(s))
                if cfg.pinched and abs(z.imag) < 2 * cfg.loops.outer_offset:
                    continue
                if np.min(np.abs(cfg.alphas - z)) < 2 * cfg.loops.offset:
                    continue
                n = 1j * seg.tangent(s)

                def S(e):
                    gp = eval_g_prime(np.array([z + e * n, z - e * n]), cfg)
                    fp = cfg.f.eval_zprime(np.array([z + e * n, z - e * n]), cfg.beta)
                    return gp[0] + gp[1] - 0.5 * (fp[0] + fp[1])

                v = 2 * S(eta / 2) - S(eta)
                pts.append(z)
                viol.append(abs(v))
    decay = {}
    for rad in (1e2, 1e3):
        zz = rad * cfg.scale * np.exp(1j * (0.3 + 2 * math.pi * np.arange(8) / 8))
        decay[rad] = float(np.max(np.abs(eval_g_prime(zz, cfg) * zz * zz)))
    viol = np.array(viol)
    return GPrimeReport(float(np.max(viol)) if viol.size else 0.0, np.array(pts), viol, decay)


# ---------------------------------------------------------------------------
# solutions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RHPSolution:
    alphas: BranchPointSet
    W: tuple
    Omega: tuple
    beta: tuple
    residual_norm: float
    diagnostics: dict
    config: Configuration = field(repr=False, compare=False)

    def to_json(self) -> dict:
        return {
            "beta": list(self.beta),
            "alphas": [[a.real, a.imag] for a in self.alphas.alphas],
            "W": list(self.W),
            "Omega": list(self.Omega),
            "residual_norm": self.residual_norm,
            "diagnostics": {k: v for k, v in self.diagnostics.items() if not k.startswith("_")},
        }


def make_solution(cfg: Configuration, residual: np.ndarray | None = None, extra: dict | None = None) -> RHPSolution:
    if residual is None:
        residual = modulation_residual(cfg)
    W, Om = solve_W_Omega(cfg)
    diag = {k: v for k, v in cfg.diagnostics.items() if not k.startswith("_")}
    diag.update(extra or {})
    return RHPSolution(cfg.points, tuple(W), tuple(Om), cfg.beta, float(np.max(np.abs(residual))), diag, cfg)


@dataclass(frozen=True)
class JumpReport:
    main_violation: float
    comp_violation: float
    points: np.ndarray
    violations: np.ndarray


def jump_check(solution, n_per_arc: int = 10, eta_fraction: float = 1e-3) -> JumpReport:
    """Check g_+ + g_- - f - W_j = 0 on main arcs and g_+ - g_- - Omega_j = 0 on comp arcs.

    g is evaluated just off each arc on both sides (distances eta and eta/2)
    and Richardson-extrapolated to the arc.  Points near z0 on the real axis
    and near branchpoints are skipped.
    """
    cfg = _config_of(solution)
    W, Om = solve_W_Omega(cfg)
    eta = eta_fraction * cfg.loops.offset
    pts, viol, kinds = [], [], []
    for k, arc in enumerate(cfg.arcs):
        main = k % 2 == 0
        j = k // 2 if main else (k + 1) // 2
        length = arc.length
        for s in (np.arange(n_per_arc) + 0.5) / n_per_arc:
            # locate the point at arclength fraction s
            target, acc = s * length, 0.0
            for seg in arc.segments:
                if acc + seg.length >= target:
                    u = (target - acc) / seg.length
                    break
                acc += seg.length
            z, n = complex(seg.point(u)), 1j * seg.tangent(u)
            if np.min(np.abs(cfg.alphas - z)) < 2 * cfg.loops.offset:
                continue
            if cfg.pinched and abs(z.imag) < 2 * cfg.loops.outer_offset:
                continue

            def S(e):
                zz = np.array([z + e * n, z - e * n])
                g = eval_g(zz, cfg)
                if main:
                    fv = cfg.f.eval(zz, cfg.beta)
                    return g[0] + g[1] - 0.5 * (fv[0] + fv[1]) - W[j]
                return g[0] - g[1] - Om[j - 1]

            pts.append(z)
            viol.append(abs(2 * S(eta / 2) - S(eta)))
            kinds.append(main)
    viol, kinds = np.array(viol), np.array(kinds, dtype=bool)
    mv = float(np.max(viol[kinds])) if np.any(kinds) else 0.0
    cv = float(np.max(viol[~kinds])) if np.any(~kinds) else 0.0
    return JumpReport(mv, cv, np.array(pts), viol)
