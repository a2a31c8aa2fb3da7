"""The radical R(z) = (prod (z - alpha_j))^(1/2) cut along the main arcs.

Each main arc [a, b] contributes a factor (z - a) * sqrt((z - b)/(z - a))
with the principal square root.  That factor is analytic off the straight
segment [a, b] and behaves like z at infinity.  When the arc is curved the
factor is multiplied by -1 inside the region enclosed by the arc and the
straight segment, which moves the cut exactly onto the arc.  The overall sign
gives R(z)/z^(N+1) -> -1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .contour import LineSegment, Path

__all__ = [
    "RadicalError",
    "OnCutError",
    "BranchTrackingError",
    "DegeneracyError",
    "BranchPointSet",
    "RadicalBranch",
    "RadicalSamples",
    "eval_radical",
    "eval_radical_side",
    "radical_on_path",
]


class RadicalError(ValueError):
    pass


class OnCutError(RadicalError):
    """A point lies on a branch cut; use :func:`eval_radical_side`."""


class BranchTrackingError(RadicalError):
    """Values along a path flip sign (the path crosses a cut)."""


class DegeneracyError(RadicalError):
    """Two branchpoints are closer than the degeneracy guard."""


@dataclass(frozen=True)
class BranchPointSet:
    """Ordered distinct branchpoints alpha_0 .. alpha_{2N+1}."""

    alphas: tuple
    schwarz_paired: bool | None = None
    delta_min: float = 1e-8

    def __post_init__(self):
        a = tuple(complex(x) for x in self.alphas)
        object.__setattr__(self, "alphas", a)
        if len(a) < 2 or len(a) % 2:
            raise RadicalError("need an even number (2N+2) of branchpoints")
        arr = np.array(a)
        gaps = np.abs(arr[:, None] - arr[None, :])
        np.fill_diagonal(gaps, np.inf)
        if np.min(gaps) <= self.delta_min * max(self.diameter, 1.0):
            raise DegeneracyError("branchpoints closer than the degeneracy guard")
        paired = _is_conjugate_closed(arr)
        if self.schwarz_paired is None:
            object.__setattr__(self, "schwarz_paired", paired)
        elif self.schwarz_paired and not paired:
            raise RadicalError("branchpoints are not closed under conjugation")

    @property
    def genus_index(self) -> int:
        return len(self.alphas) // 2 - 1

    @property
    def array(self) -> np.ndarray:
        return np.array(self.alphas)

    @property
    def diameter(self) -> float:
        arr = np.array(self.alphas)
        return float(np.max(np.abs(arr[:, None] - arr[None, :])))

    @property
    def scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.array))))

    @property
    def main_arcs(self) -> list[tuple[int, int]]:
        return [(2 * j, 2 * j + 1) for j in range(self.genus_index + 1)]

    @property
    def comp_arcs(self) -> list[tuple[int, int]]:
        return [(2 * j - 1, 2 * j) for j in range(1, self.genus_index + 1)]


def _is_conjugate_closed(arr: np.ndarray, tol: float = 1e-12) -> bool:
    scale = max(1.0, float(np.max(np.abs(arr))))
    return all(np.min(np.abs(arr - np.conj(z))) <= tol * scale for z in arr)


@dataclass(frozen=True)
class RadicalBranch:
    """Branch of R cut along the given main arcs (straight segments by default)."""

    points: BranchPointSet
    cut_arcs: tuple = ()
    anchor: complex = field(init=False)
    anchor_value: complex = field(init=False)

    def __post_init__(self):
        pts = self.points
        arcs = tuple(self.cut_arcs) or tuple(
            Path((LineSegment(pts.alphas[i], pts.alphas[k]),)) for i, k in pts.main_arcs
        )
        if len(arcs) != pts.genus_index + 1:
            raise RadicalError("need one cut arc per main arc")
        for (i, k), arc in zip(pts.main_arcs, arcs):
            tol = 1e-9 * pts.scale
            if abs(arc.start - pts.alphas[i]) > tol or abs(arc.end - pts.alphas[k]) > tol:
                raise RadicalError("cut arc endpoints do not match the branchpoints")
        object.__setattr__(self, "cut_arcs", arcs)
        # closed curves (arc + straight chord back) for the parity correction
        lenses = []
        for (i, k), arc in zip(pts.main_arcs, arcs):
            straight = len(arc.segments) == 1 and isinstance(arc.segments[0], LineSegment)
            if straight:
                lenses.append(None)
            else:
                chord = LineSegment(arc.end, arc.start)
                lenses.append(Path(tuple(arc.segments) + (chord,), closed=True))
        object.__setattr__(self, "_lenses", tuple(lenses))
        za = 1e8 * pts.scale * np.exp(0.3j)
        object.__setattr__(self, "anchor", complex(za))
        object.__setattr__(self, "anchor_value", complex(self(np.array([za]))[0]))

    @property
    def genus_index(self) -> int:
        return self.points.genus_index

    def __call__(self, z) -> np.ndarray:
        """Vectorized R(z) without on-cut checks."""
        z = np.asarray(z, dtype=complex)
        out = -np.ones(z.shape, dtype=complex)
        al = self.points.alphas
        for (i, k), lens in zip(self.points.main_arcs, self._lenses):
            a, b = al[i], al[k]
            with np.errstate(divide="ignore", invalid="ignore"):
                fac = (z - a) * np.sqrt((z - b) / (z - a))
            fac = np.where(z == a, 0.0, fac)
            if lens is not None:
                fac = np.where(lens.contains(z), -fac, fac)
            out = out * fac
        return out

    def polynomial(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.prod(z[..., None] - self.points.array, axis=-1)

    def log_derivative(self, z) -> np.ndarray:
        """R'(z)/R(z) = (1/2) sum 1/(z - alpha_j)."""
        z = np.asarray(z, dtype=complex)
        return 0.5 * np.sum(1.0 / (z[..., None] - self.points.array), axis=-1)

    def cut_distance(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.min(np.stack([a.distance(z) for a in self.cut_arcs]), axis=0)


def eval_radical(z, branch: RadicalBranch):
    """R(z) off the cuts; raises :class:`OnCutError` on a cut."""
    z_arr = np.asarray(z, dtype=complex)
    if np.any(branch.cut_distance(z_arr) <= 1e-12 * branch.points.scale):
        raise OnCutError("point lies on a main-arc cut")
    out = branch(z_arr)
    return complex(out) if out.ndim == 0 else out


def _nearest_on_cut(z: complex, branch: RadicalBranch):
    best = (np.inf, None)
    for arc in branch.cut_arcs:
        for seg in arc.segments:
            d = float(seg.distance(np.array([z]))[0])
            if d < best[0]:
                best = (d, seg)
    return best


def eval_radical_side(z_on_arc, side: str, branch: RadicalBranch):
    """One-sided boundary value R_+ (left of the arc) or R_- (right)."""
    if side not in ("+", "-"):
        raise ValueError("side must be '+' or '-'")
    zs = np.atleast_1d(np.asarray(z_on_arc, dtype=complex))
    scale = branch.points.scale
    out = np.empty(zs.shape, dtype=complex)
    for n, z in enumerate(zs):
        dist, seg = _nearest_on_cut(complex(z), branch)
        if dist > 1e-9 * scale:
            raise RadicalError("point is not on a main-arc cut")
        dbp = float(np.min(np.abs(branch.points.array - z)))
        if dbp <= 1e-12 * scale:
            out[n] = 0.0
            continue
        # parameter of the foot point for the local tangent
        s = _foot_parameter(seg, complex(z))
        normal = 1j * seg.tangent(s)
        eps = min(1e-7 * scale, 1e-3 * dbp)
        sgn = 1.0 if side == "+" else -1.0
        ref = complex(branch(np.array([z + sgn * eps * normal]))[0])
        mag = -np.prod([(z - branch.points.alphas[i]) * np.sqrt((z - branch.points.alphas[k]) / (z - branch.points.alphas[i]))
                        for i, k in branch.points.main_arcs])
        out[n] = mag if (np.conj(ref) * mag).real >= 0 else -mag
    return complex(out[0]) if np.ndim(z_on_arc) == 0 else out


def _foot_parameter(seg, z: complex) -> float:
    ss = np.linspace(0.0, 1.0, 201)
    k = int(np.argmin(np.abs(seg.point(ss) - z)))
    lo, hi = ss[max(k - 1, 0)], ss[min(k + 1, 200)]
    for _ in range(40):
        m1, m2 = lo + (hi - lo) / 3, hi - (hi - lo) / 3
        if abs(complex(seg.point(m1)) - z) < abs(complex(seg.point(m2)) - z):
            hi = m2
        else:
            lo = m1
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class RadicalSamples:
    nodes: np.ndarray
    values: np.ndarray
    max_ratio_deviation: float


def radical_on_path(path: Path, branch: RadicalBranch, n_per_segment: int = 64, max_refine: int = 40) -> RadicalSamples:
    """Sample R along a path, certifying that no sign flip occurs between samples."""
    if path.length == 0.0:
        z = np.array([path.start])
        return RadicalSamples(z, branch(z), 0.0)
    params = np.linspace(0.0, 1.0, n_per_segment + 1)
    nodes, values = [], []
    for seg in path.segments:
        s = list(params)
        v = list(branch(seg.point(np.array(s))))
        k = 0
        while k < len(s) - 1:
            a, b = v[k], v[k + 1]
            if abs(a + b) < abs(a - b):
                if s[k + 1] - s[k] < 2.0 ** (-max_refine):
                    raise BranchTrackingError(f"sign flip of R near {complex(seg.point(s[k]))}")
                m = 0.5 * (s[k] + s[k + 1])
                s.insert(k + 1, m)
                v.insert(k + 1, complex(branch(seg.point(np.array([m])))[0]))
                continue
            k += 1
        nodes.extend(seg.point(np.array(s)))
        values.extend(v)
    nodes, values = np.array(nodes), np.array(values)
    den = np.maximum(np.abs(values[1:]), np.abs(values[:-1]))
    with np.errstate(divide="ignore", invalid="ignore"):
        dev = np.where(den > 0, np.abs(values[1:] - values[:-1]) / den, 0.0)
    return RadicalSamples(nodes, values, float(np.max(dev)) if dev.size else 0.0)
