"""Oriented arcs, clockwise loop contours, and adaptive contour quadrature.

Paths are stored as parametrized segments (straight lines and circular arcs),
each a map from [0, 1] into the complex plane.  Loops around an arc are
"stadium" offset tubes: two offset copies of the arc joined by semicircular
caps.  Quadrature is global-adaptive Gauss-Kronrod (7/15 nodes per panel)
with bisection, applied to vector-valued integrands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "GeometryError",
    "DegenerateArcError",
    "LoopCollisionError",
    "QuadratureEvaluationError",
    "QuadratureAccuracyError",
    "LineSegment",
    "ArcSegment",
    "Path",
    "QuadratureSpec",
    "QuadratureResult",
    "LoopSystem",
    "build_arc_chain",
    "build_loop",
    "build_loop_system",
    "integrate",
    "integrate_detailed",
    "schwarz_loop_integral",
    "mirrored_closed_loop",
    "path_from_record",
]


class GeometryError(ValueError):
    """Invalid contour geometry."""


class DegenerateArcError(GeometryError):
    """Too few points, coincident points, or a non-positive standoff."""


class LoopCollisionError(GeometryError):
    """A loop would pass too close to (or enclose) an excluded point."""


class QuadratureEvaluationError(ArithmeticError):
    """Integrand returned a non-finite value at a quadrature node."""

    def __init__(self, node: complex):
        super().__init__(f"non-finite integrand at node {node!r}")
        self.node = node


class QuadratureAccuracyError(ArithmeticError):
    """Error estimate not met within the subdivision budget."""

    def __init__(self, estimate, error):
        super().__init__(f"quadrature tolerance not met, error estimate {np.max(error):.3e}")
        self.estimate = estimate
        self.error = error


# ---------------------------------------------------------------------------
# segments
# ---------------------------------------------------------------------------


def _as_array(s) -> np.ndarray:
    return np.asarray(s, dtype=float)


@dataclass(frozen=True)
class LineSegment:
    """Straight segment from ``a`` to ``b``."""

    a: complex
    b: complex
    kind = "line"

    def point(self, s):
        s = _as_array(s)
        return self.a + s * (self.b - self.a)

    def deriv(self, s):
        s = _as_array(s)
        return np.full(s.shape, self.b - self.a, dtype=complex)

    @property
    def start(self) -> complex:
        return complex(self.a)

    @property
    def end(self) -> complex:
        return complex(self.b)

    def tangent(self, s: float) -> complex:
        d = self.b - self.a
        return d / abs(d)

    @property
    def length(self) -> float:
        return abs(self.b - self.a)

    def restrict(self, s0: float, s1: float) -> "LineSegment":
        return LineSegment(complex(self.point(s0)), complex(self.point(s1)))

    def reversed(self) -> "LineSegment":
        return LineSegment(self.b, self.a)

    def conj(self) -> "LineSegment":
        return LineSegment(np.conj(self.a), np.conj(self.b))

    def offset(self, d: float) -> "LineSegment":
        n = 1j * self.tangent(0.0)
        return LineSegment(self.a + d * n, self.b + d * n)

    def distance(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=complex)
        d = self.b - self.a
        s = np.clip(((p - self.a) * np.conj(d)).real / abs(d) ** 2, 0.0, 1.0)
        return np.abs(p - (self.a + s * d))

    def ray_crossings(self, z) -> np.ndarray:
        """Crossings of the rightward horizontal ray from each ``z``."""
        z = np.asarray(z, dtype=complex)
        y, x = z.imag, z.real
        ya, yb = self.a.imag, self.b.imag
        straddle = (ya > y) != (yb > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = self.a.real + (y - ya) * (self.b.real - self.a.real) / (yb - ya)
        return (straddle & (xc > x)).astype(int)

    def circle_intersections(self, c: complex, r: float) -> list[float]:
        """Parameters where the segment meets the circle |z - c| = r."""
        d = self.b - self.a
        w = self.a - c
        qa = abs(d) ** 2
        qb = 2.0 * (w * np.conj(d)).real
        qc = abs(w) ** 2 - r * r
        disc = qb * qb - 4 * qa * qc
        if disc < 0:
            return []
        sq = math.sqrt(disc)
        out = []
        for s in ((-qb - sq) / (2 * qa), (-qb + sq) / (2 * qa)):
            if 0.0 <= s <= 1.0:
                out.append(s)
        return out

    def to_record(self) -> dict:
        return {"kind": "line", "endpoints": [[self.a.real, self.a.imag], [self.b.real, self.b.imag]]}


@dataclass(frozen=True)
class ArcSegment:
    """Circular arc ``center + radius*exp(i*(theta0 + sweep*s))``."""

    center: complex
    radius: float
    theta0: float
    sweep: float
    kind = "arc"

    def point(self, s):
        s = _as_array(s)
        return self.center + self.radius * np.exp(1j * (self.theta0 + self.sweep * s))

    def deriv(self, s):
        s = _as_array(s)
        return 1j * self.sweep * self.radius * np.exp(1j * (self.theta0 + self.sweep * s))

    @property
    def start(self) -> complex:
        return complex(self.point(0.0))

    @property
    def end(self) -> complex:
        return complex(self.point(1.0))

    def tangent(self, s: float) -> complex:
        return 1j * math.copysign(1.0, self.sweep) * np.exp(1j * (self.theta0 + self.sweep * s))

    @property
    def length(self) -> float:
        return abs(self.sweep) * self.radius

    def restrict(self, s0: float, s1: float) -> "ArcSegment":
        return ArcSegment(self.center, self.radius, self.theta0 + self.sweep * s0, self.sweep * (s1 - s0))

    def reversed(self) -> "ArcSegment":
        return ArcSegment(self.center, self.radius, self.theta0 + self.sweep, -self.sweep)

    def conj(self) -> "ArcSegment":
        return ArcSegment(np.conj(self.center), self.radius, -self.theta0, -self.sweep)

    def offset(self, d: float) -> "ArcSegment":
        r = self.radius - math.copysign(1.0, self.sweep) * d
        if r <= 0:
            raise LoopCollisionError("offset exceeds the radius of curvature of an arc")
        return ArcSegment(self.center, r, self.theta0, self.sweep)

    def _on_arc(self, theta) -> np.ndarray:
        u = np.mod((theta - self.theta0) * math.copysign(1.0, self.sweep), 2 * math.pi)
        return u < abs(self.sweep)

    def distance(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=complex)
        theta = np.angle(p - self.center)
        radial = np.abs(np.abs(p - self.center) - self.radius)
        ends = np.minimum(np.abs(p - self.start), np.abs(p - self.end))
        return np.where(self._on_arc(theta), radial, ends)

    def ray_crossings(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        v = (z.imag - self.center.imag) / self.radius
        inside = np.abs(v) <= 1.0
        t1 = np.arcsin(np.clip(v, -1.0, 1.0))
        count = np.zeros(z.shape, dtype=int)
        for theta in (t1, math.pi - t1):
            xc = self.center.real + self.radius * np.cos(theta)
            count += (inside & self._on_arc(theta) & (xc > z.real)).astype(int)
        return count

    def circle_intersections(self, c: complex, r: float) -> list[float]:
        dvec = c - self.center
        dist = abs(dvec)
        if dist == 0 or dist > self.radius + r or dist < abs(self.radius - r):
            return []
        a = (self.radius**2 - r**2 + dist**2) / (2 * dist)
        phi = math.acos(max(-1.0, min(1.0, a / self.radius)))
        base = math.atan2(dvec.imag, dvec.real)
        out = []
        for theta in (base - phi, base + phi):
            u = ((theta - self.theta0) * math.copysign(1.0, self.sweep)) % (2 * math.pi)
            if u <= abs(self.sweep):
                out.append(u / abs(self.sweep))
        return out

    def to_record(self) -> dict:
        return {
            "kind": "arc",
            "endpoints": [[self.start.real, self.start.imag], [self.end.real, self.end.imag]],
            "center": [self.center.real, self.center.imag],
            "radius": self.radius,
            "theta0": self.theta0,
            "sweep": self.sweep,
        }


Segment = LineSegment | ArcSegment


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Path:
    """Ordered chain of segments, open or closed."""

    segments: tuple
    closed: bool = False

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise DegenerateArcError("path has no segments")
        tol = 1e-12 * max(self.diameter, 1.0)
        for s0, s1 in zip(segs[:-1], segs[1:]):
            if abs(s0.end - s1.start) > tol:
                raise GeometryError("consecutive segments do not share endpoints")
        if self.closed and abs(segs[-1].end - segs[0].start) > tol:
            raise GeometryError("closed path does not return to its start")

    @property
    def start(self) -> complex:
        return self.segments[0].start

    @property
    def end(self) -> complex:
        return self.segments[-1].end

    @property
    def diameter(self) -> float:
        pts = np.concatenate([s.point(np.linspace(0, 1, 9)) for s in self.segments])
        return float(np.max(np.abs(pts[:, None] - pts[None, :])))

    @property
    def length(self) -> float:
        return float(sum(s.length for s in self.segments))

    @property
    def signed_area(self) -> float:
        """Half of Im of the loop integral of conj(z) dz (negative when clockwise)."""
        x, w = np.polynomial.legendre.leggauss(24)
        s = 0.5 * (x + 1.0)
        total = 0.0
        for seg in self.segments:
            total += 0.5 * float(np.sum(0.5 * w * (np.conj(seg.point(s)) * seg.deriv(s)).imag))
        return total

    @property
    def orientation(self) -> int:
        """-1 for clockwise, +1 for counterclockwise, 0 for open paths."""
        if not self.closed:
            return 0
        return -1 if self.signed_area < 0 else 1

    def reversed(self) -> "Path":
        return Path(tuple(s.reversed() for s in reversed(self.segments)), self.closed)

    def conj(self) -> "Path":
        return Path(tuple(s.conj() for s in self.segments), self.closed)

    def distance(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=complex)
        return np.min(np.stack([s.distance(p) for s in self.segments]), axis=0)

    def contains(self, z) -> np.ndarray:
        """Point-in-region test for a closed path by ray-crossing parity."""
        if not self.closed:
            raise GeometryError("contains() needs a closed path")
        z = np.asarray(z, dtype=complex)
        count = sum(s.ray_crossings(z) for s in self.segments)
        return (count % 2) == 1

    def sample(self, n_per_segment: int = 16) -> np.ndarray:
        s = np.linspace(0.0, 1.0, n_per_segment, endpoint=False)
        pts = [seg.point(s) for seg in self.segments]
        if not self.closed:
            pts.append(np.array([self.end]))
        return np.concatenate(pts)

    def to_record(self) -> dict:
        return {
            "segments": [s.to_record() for s in self.segments],
            "closed": self.closed,
            "orientation": self.orientation,
        }


def path_from_record(rec: dict) -> Path:
    segs = []
    for s in rec["segments"]:
        if s["kind"] == "line":
            (ax, ay), (bx, by) = s["endpoints"]
            segs.append(LineSegment(complex(ax, ay), complex(bx, by)))
        else:
            cx, cy = s["center"]
            segs.append(ArcSegment(complex(cx, cy), float(s["radius"]), float(s["theta0"]), float(s["sweep"])))
    return Path(tuple(segs), bool(rec["closed"]))


def _circle_arc_through(p0: complex, p1: complex, p2: complex):
    """Two arcs p0->p1->p2 on the circle through three points, or None if collinear."""
    d = 2 * ((p0 - p2) * np.conj(p1 - p2)).imag
    if abs(d) < 1e-14 * max(abs(p0 - p2), abs(p1 - p2)) ** 2:
        return None
    # circumcenter
    a2, b2 = abs(p0 - p2) ** 2, abs(p1 - p2) ** 2
    c = p2 + 1j * (a2 * (p1 - p2) - b2 * (p0 - p2)) / d
    r = abs(p0 - c)
    th0, th1, th2 = (np.angle(p - c) for p in (p0, p1, p2))
    orient = ((p1 - p0) * np.conj(p2 - p1)).imag  # <0 means left turn (ccw)
    sgn = 1.0 if orient < 0 else -1.0
    sw1 = ((th1 - th0) * sgn) % (2 * math.pi) * sgn
    sw2 = ((th2 - th1) * sgn) % (2 * math.pi) * sgn
    return ArcSegment(complex(c), float(r), float(th0), float(sw1)), ArcSegment(
        complex(c), float(r), float(th1), float(sw2)
    )


def build_arc_chain(points: Sequence[complex], interpolation: str = "polyline") -> Path:
    """Open path through ``points`` in order.

    ``polyline`` joins consecutive points by straight segments;
    ``circular-through`` uses circle arcs through consecutive triples.
    """
    pts = [complex(p) for p in points]
    if len(pts) < 2:
        raise DegenerateArcError("an arc chain needs at least two points")
    scale = max(1.0, max(abs(p) for p in pts))
    for p, q in zip(pts[:-1], pts[1:]):
        if abs(p - q) <= 1e-14 * scale:
            raise DegenerateArcError("coincident consecutive points")
    if interpolation == "polyline" or len(pts) == 2:
        return Path(tuple(LineSegment(p, q) for p, q in zip(pts[:-1], pts[1:])))
    if interpolation != "circular-through":
        raise ValueError(f"unknown interpolation {interpolation!r}")
    segs: list = []
    k = 0
    while k < len(pts) - 1:
        if k + 2 < len(pts):
            arcs = _circle_arc_through(pts[k], pts[k + 1], pts[k + 2])
            segs.extend(arcs if arcs else (LineSegment(pts[k], pts[k + 1]), LineSegment(pts[k + 1], pts[k + 2])))
            k += 2
        else:
            arcs = _circle_arc_through(pts[k - 1], pts[k], pts[k + 1])
            segs.append(arcs[1] if arcs else LineSegment(pts[k], pts[k + 1]))
            k += 1
    return Path(tuple(segs))


# ---------------------------------------------------------------------------
# loops
# ---------------------------------------------------------------------------


def _intersect_offsets(p: Segment, q: Segment) -> tuple[float, float]:
    """Parameters (u on p, w on q) where two offset curves cross near a corner."""
    if isinstance(p, LineSegment) and isinstance(q, LineSegment):
        dp, dq = p.b - p.a, q.b - q.a
        den = (dp * np.conj(dq)).imag
        rhs = q.a - p.a
        u = (rhs * np.conj(dq)).imag / den
        w = (rhs * np.conj(dp)).imag / den
        return float(u), float(w)
    u, w = 1.0, 0.0
    for _ in range(60):
        r = complex(p.point(u)) - complex(q.point(w))
        a, b = complex(p.deriv(u)), -complex(q.deriv(w))
        jac = np.array([[a.real, b.real], [a.imag, b.imag]])
        du, dw = np.linalg.solve(jac, [-r.real, -r.imag])
        u, w = u + du, w + dw
        if abs(du) + abs(dw) < 1e-15:
            break
    return float(u), float(w)


def _offset_chain(segs: Sequence[Segment], d: float) -> list[Segment]:
    """Offset of a chain at signed distance d (left if d>0), with corner joins."""
    pieces = [s.offset(d) for s in segs]
    lo = [0.0] * len(pieces)
    hi = [1.0] * len(pieces)
    joins: dict[int, ArcSegment] = {}
    for k in range(len(segs) - 1):
        t_in, t_out = segs[k].tangent(1.0), segs[k + 1].tangent(0.0)
        phi = float(np.angle(t_out / t_in))
        if abs(phi) < 1e-12:
            continue
        if d * phi < 0:
            # outer side: round join centred on the vertex
            n_in = 1j * t_in * math.copysign(1.0, d)
            joins[k] = ArcSegment(segs[k].end, abs(d), float(np.angle(n_in)), phi)
        else:
            u, w = _intersect_offsets(pieces[k], pieces[k + 1])
            if not (lo[k] < u <= 1.0 + 1e-12 and -1e-12 <= w < 1.0):
                raise LoopCollisionError("offset too large for a corner of the arc")
            hi[k], lo[k + 1] = min(u, 1.0), max(w, 0.0)
    out: list[Segment] = []
    for k, p in enumerate(pieces):
        if hi[k] <= lo[k]:
            raise LoopCollisionError("offset too large for a short arc piece")
        out.append(p if (lo[k], hi[k]) == (0.0, 1.0) else p.restrict(lo[k], hi[k]))
        if k in joins:
            out.append(joins[k])
    return out


def _check_excluded(arc: Path, offset: float, excluded: Sequence[complex]):
    if len(excluded):
        dist = arc.distance(np.asarray(list(excluded), dtype=complex))
        if np.any(dist < 1.5 * offset):
            bad = complex(np.asarray(list(excluded))[np.argmin(dist)])
            raise LoopCollisionError(f"loop at standoff {offset:g} would come within offset/2 of {bad}")


def build_loop(arc: Path, offset: float, excluded: Sequence[complex] = (), open_start: bool = False) -> Path:
    """Clockwise stadium loop at constant standoff around an open arc.

    With ``open_start`` the cap at the arc's first point is omitted and the
    returned path runs from the left offset of the start point around the arc
    to the right offset of the start point.
    """
    if arc.closed:
        raise GeometryError("build_loop needs an open arc")
    if not offset > 0:
        raise DegenerateArcError("loop standoff must be positive")
    _check_excluded(arc, offset, excluded)
    segs = arc.segments
    left = _offset_chain(segs, offset)
    right = _offset_chain(segs, -offset)
    t_end = segs[-1].tangent(1.0)
    t_start = segs[0].tangent(0.0)
    end_cap = ArcSegment(arc.end, offset, float(np.angle(1j * t_end)), -math.pi)
    pieces = list(left) + [end_cap] + [s.reversed() for s in reversed(right)]
    if not open_start:
        pieces.append(ArcSegment(arc.start, offset, float(np.angle(-1j * t_start)), -math.pi))
    pieces = _snap(pieces)
    return Path(tuple(pieces), closed=not open_start)


def _snap(pieces: list) -> list:
    """Replace line endpoints by the neighbouring exact endpoints."""
    out = list(pieces)
    for k in range(len(out)):
        seg = out[k]
        if isinstance(seg, LineSegment):
            a = out[k - 1].end if k > 0 else seg.a
            b = out[k + 1].start if k + 1 < len(out) else seg.b
            if abs(a - seg.a) < 1e-9 * (1 + abs(a)) and abs(b - seg.b) < 1e-9 * (1 + abs(b)):
                out[k] = LineSegment(a, b)
    return out


# ---------------------------------------------------------------------------
# loop systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LoopSystem:
    """Loops used by the determinant formulas.

    ``outer`` is always an explicit closed clockwise path; when it is pinched
    at a real point, ``outer_upper`` and ``outer_lower`` hold its two lobes so
    that integrands with a real-axis jump can be evaluated lobe by lobe.  ``main_loops[j]`` surrounds
    main arc j (j = 0..N) and ``comp_loops[j-1]`` complementary arc j.
    ``comp_signs[j-1]`` holds the per-segment factor (+1 left half, -1 right
    half) that continues R analytically along each complementary loop.
    """

    outer: Path
    main_loops: tuple
    comp_loops: tuple
    comp_signs: tuple
    comp_left_regions: tuple
    offset: float
    outer_offset: float
    outer_upper: Path | None = None
    outer_lower: Path | None = None
    encloses: dict = field(default_factory=dict)


def _subpath(path: Path, k: int, s: float, before: bool) -> list:
    segs = path.segments
    if before:
        return list(segs[:k]) + ([segs[k].restrict(0.0, s)] if s > 0 else [])
    return ([segs[k].restrict(s, 1.0)] if s < 1 else []) + list(segs[k + 1 :])


def _cap_crossing(cap: ArcSegment, main: Path):
    """Unique crossing of a loop cap with a main arc, as (cap param, seg idx, seg param)."""
    hits = []
    for k, seg in enumerate(main.segments):
        for s in seg.circle_intersections(cap.center, cap.radius):
            z = complex(seg.point(s))
            theta = float(np.angle(z - cap.center))
            u = ((theta - cap.theta0) * math.copysign(1.0, cap.sweep)) % (2 * math.pi)
            if u <= abs(cap.sweep) + 1e-12:
                hits.append((u / abs(cap.sweep), k, s))
    # merge duplicates at shared segment endpoints
    uniq = []
    for h in hits:
        if all(abs(h[0] - g[0]) > 1e-12 for g in uniq):
            uniq.append(h)
    if len(uniq) != 1:
        raise GeometryError(f"complementary loop cap crosses an adjacent main arc {len(uniq)} times")
    return uniq[0]


def _comp_loop(arc: Path, before: Path, after: Path, offset: float, excluded) -> tuple:
    loop = build_loop(arc, offset, excluded)
    segs = list(loop.segments)
    n_left = len(_offset_chain(arc.segments, offset))
    end_idx, start_idx = n_left, len(segs) - 1
    end_cap, start_cap = segs[end_idx], segs[start_idx]
    ue, ke, se = _cap_crossing(end_cap, after)
    us, ks, ss = _cap_crossing(start_cap, before)
    new, signs = [], []
    for i, seg in enumerate(segs):
        if i == end_idx:
            new += [seg.restrict(0.0, ue), seg.restrict(ue, 1.0)]
            signs += [1.0, -1.0]
        elif i == start_idx:
            new += [seg.restrict(0.0, us), seg.restrict(us, 1.0)]
            signs += [-1.0, 1.0]
        else:
            new.append(seg)
            signs.append(1.0 if i < end_idx else -1.0)
    new = _snap(new)
    path = Path(tuple(new), closed=True)
    # region of the loop interior where the analytic continuation equals +R
    left_part = [new[-1]] + new[: end_idx + 1]
    x2 = left_part[-1].end
    back = [s.reversed() for s in reversed(_subpath(after, ke, se, before=True))]
    back += [s.reversed() for s in reversed(arc.segments)]
    back += [s.reversed() for s in reversed(_subpath(before, ks, ss, before=False))]
    region_segs = left_part + back
    if abs(back[0].start - x2) > 1e-9 * (1 + abs(x2)):
        raise GeometryError("complementary loop crossing mismatch")
    region = Path(tuple(_snap(region_segs)), closed=True)
    return path, np.array(signs), region


def build_loop_system(
    arcs: Sequence[Path],
    offset: float,
    outer_offset: float | None = None,
    excluded: Sequence[complex] = (),
    upper_chain: Path | None = None,
    lower_chain: Path | None = None,
) -> LoopSystem:
    """Loops for a contour made of ``arcs`` (main, comp, main, ..., main).

    ``excluded`` are points (singularities of f) that loops must avoid.  With
    ``upper_chain`` (a path starting at a real point z0 and running up to the
    first branchpoint through the upper half-plane) the outer loop is pinched
    at z0 and stored as an upper lobe plus a lower lobe; the lower lobe is the
    mirror image of the upper one unless ``lower_chain`` (z0 down to the last
    branchpoint) is given.
    """
    n_arcs = len(arcs)
    if n_arcs % 2 != 1:
        raise GeometryError("a contour needs an odd number of arcs (N+1 main, N complementary)")
    outer_offset = 2.0 * offset if outer_offset is None else outer_offset
    branch = [a.start for a in arcs] + [arcs[-1].end]
    main_loops, comp_loops, comp_signs, regions = [], [], [], []
    encloses = {}
    for k, arc in enumerate(arcs):
        others = [b for i, b in enumerate(branch) if i not in (k, k + 1)]
        if k % 2 == 0:
            main_loops.append(build_loop(arc, offset, list(others) + list(excluded)))
            encloses[("main", k // 2)] = k
        else:
            path, signs, region = _comp_loop(arc, arcs[k - 1], arcs[k + 1], offset, list(others) + list(excluded))
            comp_loops.append(path)
            comp_signs.append(signs)
            regions.append(region)
            encloses[("comp", (k + 1) // 2)] = k
    whole = Path(tuple(s for a in arcs for s in a.segments))
    outer_upper = outer_lower = None
    if upper_chain is None:
        outer = build_loop(whole, outer_offset, excluded)
    else:
        outer_upper = _pinched_lobe(upper_chain, outer_offset, excluded, upper=True)
        if lower_chain is None:
            outer_lower = outer_upper.conj().reversed()
        else:
            outer_lower = _pinched_lobe(lower_chain, outer_offset, excluded, upper=False)
        outer = Path(tuple(outer_upper.segments) + tuple(outer_lower.segments), closed=True)
    return LoopSystem(
        outer=outer,
        main_loops=tuple(main_loops),
        comp_loops=tuple(comp_loops),
        comp_signs=tuple(comp_signs),
        comp_left_regions=tuple(regions),
        offset=offset,
        outer_offset=outer_offset,
        outer_upper=outer_upper,
        outer_lower=outer_lower,
        encloses=encloses,
    )


def _pinched_lobe(chain: Path, d: float, excluded, upper: bool) -> Path:
    """Closed lobe around ``chain`` touching the real axis only at its start z0.

    The tube sides are cut at height d above (below) z0 and joined to z0 by
    diagonals, so the lobe never runs along the real axis.
    """
    z0 = chain.start
    tube = build_loop(chain, d, excluded, open_start=True)
    segs = list(tube.segments)
    first, last = segs[0], segs[-1]
    if not (isinstance(first, LineSegment) and isinstance(last, LineSegment)):
        raise GeometryError("pinched lobe needs a straight first chain segment")
    if first.length <= d or last.length <= d:
        raise LoopCollisionError("first chain segment too short for the pinch")
    segs[0] = first.restrict(d / first.length, 1.0)
    segs[-1] = last.restrict(0.0, 1.0 - d / last.length)
    lobe = Path(tuple([LineSegment(z0, segs[0].start)] + segs + [LineSegment(segs[-1].end, z0)]))
    im = lobe.sample(32).imag
    if (upper and np.any(im < -1e-14)) or (not upper and np.any(im > 1e-14)):
        raise LoopCollisionError("outer lobe crosses the real axis")
    return lobe


def mirrored_closed_loop(gamma_plus: Path) -> Path:
    """Closed loop made of ``gamma_plus`` followed by its reversed mirror image."""
    mirror = gamma_plus.conj().reversed()
    return Path(tuple(gamma_plus.segments) + tuple(mirror.segments), closed=True)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

# Kronrod 15-point nodes and weights with the embedded 7-point Gauss rule.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
X15 = np.concatenate([-_XGK[:7], [0.0], _XGK[6::-1]])
W15 = np.concatenate([_WGK[:7], [_WGK[7]], _WGK[6::-1]])
W7 = np.zeros(15)
W7[[1, 3, 5]] = _WG[:3]
W7[7] = _WG[3]
W7[[13, 11, 9]] = _WG[:3]


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for adaptive quadrature.

    ``max_subdivisions`` bounds the number of panels per path segment.
    """

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 40
    nodes_per_panel: int = 15

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0 and self.max_subdivisions >= 1):
            raise ValueError("quadrature tolerances must be positive and max_subdivisions >= 1")
        if self.nodes_per_panel != 15:
            raise ValueError("only the 15-node Gauss-Kronrod panel rule is implemented")


@dataclass(frozen=True)
class QuadratureResult:
    value: np.ndarray
    error: np.ndarray
    segment_values: np.ndarray
    panels: tuple
    n_evals: int


def _initial_panels(seg) -> int:
    if isinstance(seg, ArcSegment):
        return max(1, int(math.ceil(abs(seg.sweep) / (math.pi / 2))))
    return 1


def integrate_detailed(
    F: Callable[[np.ndarray], np.ndarray],
    path: Path,
    spec: QuadratureSpec | None = None,
    weights: Sequence[float] | None = None,
) -> QuadratureResult:
    """Adaptive integral of a (vector-valued) function along ``path``.

    ``F`` maps a 1-D complex array of nodes to an array of shape ``(n,)`` or
    ``(m, n)``.  ``weights`` optionally scales each segment's contribution.
    """
    spec = spec or QuadratureSpec()
    segs = path.segments
    wts = np.ones(len(segs)) if weights is None else np.asarray(weights, dtype=float)
    seg_idx, lo, hi = [], [], []
    for k, seg in enumerate(segs):
        n0 = _initial_panels(seg)
        edges = np.linspace(0.0, 1.0, n0 + 1)
        seg_idx += [k] * n0
        lo += list(edges[:-1])
        hi += list(edges[1:])
    seg_idx, lo, hi = np.array(seg_idx), np.array(lo), np.array(hi)
    kvals, errs = _eval_panels(F, segs, wts, seg_idx, lo, hi)
    n_evals = 15 * len(lo)
    squeeze = kvals.ndim == 1
    if squeeze:
        kvals, errs = kvals[:, None], errs[:, None]
    while True:
        total = kvals.sum(axis=0)
        err_total = errs.sum(axis=0)
        tol = np.maximum(spec.abs_tol, spec.rel_tol * np.abs(total))
        if np.all(err_total <= tol):
            break
        e = np.max(errs / tol, axis=1)
        counts = np.bincount(seg_idx, minlength=len(segs))
        can = counts[seg_idx] < spec.max_subdivisions
        pick = (e > 0.5 / len(e)) & can
        if not np.any(pick):
            raise QuadratureAccuracyError(total if not squeeze else total[0], err_total)
        mid = 0.5 * (lo[pick] + hi[pick])
        new_idx = np.concatenate([seg_idx[pick], seg_idx[pick]])
        new_lo = np.concatenate([lo[pick], mid])
        new_hi = np.concatenate([mid, hi[pick]])
        nk, ne = _eval_panels(F, segs, wts, new_idx, new_lo, new_hi)
        if squeeze:
            nk, ne = nk[:, None], ne[:, None]
        n_evals += 15 * len(new_lo)
        keep = ~pick
        seg_idx = np.concatenate([seg_idx[keep], new_idx])
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        kvals = np.concatenate([kvals[keep], nk])
        errs = np.concatenate([errs[keep], ne])
    order = np.lexsort((lo, seg_idx))
    seg_idx, lo, hi, kvals, errs = seg_idx[order], lo[order], hi[order], kvals[order], errs[order]
    seg_vals = np.zeros((len(segs),) + kvals.shape[1:], dtype=complex)
    np.add.at(seg_vals, seg_idx, kvals)
    value = seg_vals.sum(axis=0)
    err_total = errs.sum(axis=0)
    if squeeze:
        value, err_total, seg_vals = value[0], err_total[0], seg_vals[:, 0]
    panels = tuple(zip(seg_idx.tolist(), lo.tolist(), hi.tolist()))
    return QuadratureResult(value, err_total, seg_vals, panels, n_evals)


def _eval_panels(F, segs, wts, seg_idx, lo, hi):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    z = np.empty((len(lo), 15), dtype=complex)
    dz = np.empty((len(lo), 15), dtype=complex)
    for k in np.unique(seg_idx):
        sel = seg_idx == k
        s = mid[sel, None] + half[sel, None] * X15[None, :]
        z[sel] = segs[k].point(s)
        dz[sel] = segs[k].deriv(s) * (half[sel, None] * wts[k])
    vals = np.asarray(F(z.ravel()))
    finite = np.isfinite(vals.reshape(-1, z.size)).all(axis=0)
    if not finite.all():
        raise QuadratureEvaluationError(complex(z.ravel()[np.argmin(finite)]))
    vals = vals.reshape(vals.shape[:-1] + z.shape)
    kv = np.sum(vals * dz * W15, axis=-1)
    gv = np.sum(vals * dz * W7, axis=-1)
    err = np.abs(kv - gv)
    if kv.ndim == 2:  # (m, panels) -> (panels, m)
        return kv.T, err.T
    return kv, err


def integrate(F, path: Path, spec: QuadratureSpec | None = None, weights=None):
    """Integral of ``F`` along ``path``; see :func:`integrate_detailed`."""
    return integrate_detailed(F, path, spec, weights).value


def schwarz_loop_integral(F_upper, partner_upper, gamma_plus: Path, spec: QuadratureSpec | None = None):
    """Closed clockwise loop integral of a Schwarz-class integrand.

    The loop is ``gamma_plus`` (in the closed upper half-plane, real
    endpoints) followed by its reversed mirror image.  For F with
    F(z) = conj(F_partner(conj z)) below the axis the lower half contributes
    ``-conj(integral of partner_upper over gamma_plus)``.
    """
    scale = max(1.0, gamma_plus.diameter)
    if abs(gamma_plus.start.imag) > 1e-12 * scale or abs(gamma_plus.end.imag) > 1e-12 * scale:
        raise GeometryError("gamma_plus endpoints must be real")

    def stacked(z):
        a = np.asarray(F_upper(z))
        b = np.asarray(partner_upper(z))
        return np.concatenate([np.atleast_2d(a), np.atleast_2d(b)], axis=0)

    res = integrate(stacked, gamma_plus, spec)
    m = res.shape[0] // 2
    out = res[:m] - np.conj(res[m:])
    probe = np.asarray(F_upper(np.array([gamma_plus.start])))
    return out[0] if probe.ndim == 1 else out
