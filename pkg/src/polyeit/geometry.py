"""Simple-polygon kernel: admissibility, boolean-derived metrics, vertex matching,
and piecewise-affine deformation fields supported on a band around the inclusion."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from shapely.geometry import Polygon as _ShapelyPolygon

from .errors import DeformationError, FlowDegenerate, GeometryError, MatchImpossible

# Vertex-welding / degeneracy tolerance for polygon predicates.
EPS_GEOM = 1e-12

# Tolerance for angle admissibility checks at the interval boundaries.
ANGLE_TOL = 1e-9


def _cross2(a, b):
    """z-component of the cross product of 2D vectors (vectorized)."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


# ---------------------------------------------------------------------------
# prior information and domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PriorInfo:
    """Constants bounding the admissible class of instances.

    n0: max vertex count, alpha0: angle bound (rad), d0: side/separation bound,
    r0/k0: Lipschitz chart parameters, lambda0/lambda1: conductivity bounds,
    length: domain diameter bound.
    """

    n0: int
    alpha0: float
    d0: float
    r0: float
    k0: float
    lambda0: float
    lambda1: float
    length: float

    def __post_init__(self):
        vals = (self.n0, self.alpha0, self.d0, self.r0, self.k0,
                self.lambda0, self.lambda1, self.length)
        if not all(v > 0 for v in vals):
            raise ValueError("all prior-information fields must be strictly positive")
        if self.n0 < 3:
            raise ValueError("n0 must allow at least a triangle")
        if not self.alpha0 < np.pi:
            raise ValueError("alpha0 must be < pi, otherwise no polygon is admissible")
        if not 1.0 / self.lambda0 < self.lambda0:
            raise ValueError("lambda0 must exceed 1 so the conductivity interval is nonempty")


def _signed_area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _segments_cross(p0, p1, q0, q1) -> bool:
    """Proper or improper crossing of two closed segments, excluding shared endpoints."""
    d1 = _orient(q0, q1, p0)
    d2 = _orient(q0, q1, p1)
    d3 = _orient(p0, p1, q0)
    d4 = _orient(p0, p1, q1)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True
    # collinear/touching cases: flag any contact in the segment interiors
    for (a, b, c, d) in ((q0, q1, p0, d1), (q0, q1, p1, d2), (p0, p1, q0, d3), (p0, p1, q1, d4)):
        if abs(d) <= EPS_GEOM * (np.abs(np.asarray((a, b, c))).max() + 1.0):
            t = np.asarray(b) - np.asarray(a)
            s = float(np.dot(np.asarray(c) - np.asarray(a), t)) / float(np.dot(t, t))
            if EPS_GEOM < s < 1.0 - EPS_GEOM:
                return True
    return False


class Polygon:
    """Simple polygon with counterclockwise vertex order.

    Construction validates simplicity, orientation, and non-degenerate
    consecutive vertices; interior angles are cached.
    """

    __slots__ = ("vertices", "interior_angles")

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise GeometryError("polygon needs an (n>=3, 2) vertex array")
        if not np.all(np.isfinite(v)):
            raise GeometryError("polygon vertices must be finite")
        d = v - np.roll(v, 1, axis=0)
        if np.min(np.hypot(d[:, 0], d[:, 1])) <= EPS_GEOM:
            raise GeometryError("consecutive polygon vertices coincide")
        if _signed_area(v) <= 0:
            raise GeometryError("polygon must be counterclockwise with positive area")
        self.vertices = v
        self.vertices.setflags(write=False)
        if not self._is_simple():
            raise GeometryError("polygon is not simple (self-intersecting)")
        self.interior_angles = self._angles()
        self.interior_angles.setflags(write=False)

    def _is_simple(self) -> bool:
        v = self.vertices
        n = len(v)
        for i in range(n):
            p0, p1 = v[i], v[(i + 1) % n]
            for j in range(i + 1, n):
                if j == i or (j + 1) % n == i or (i + 1) % n == j:
                    continue  # adjacent edges share a vertex by construction
                if _segments_cross(p0, p1, v[j], v[(j + 1) % n]):
                    return False
        # adjacent-edge overlap (collinear spike)
        for i in range(n):
            a, b, c = v[i - 1], v[i], v[(i + 1) % n]
            e0, e1 = b - a, c - b
            if abs(float(_cross2(e0, e1))) <= EPS_GEOM and float(np.dot(e0, e1)) < 0:
                return False
        return True

    def _angles(self) -> np.ndarray:
        v = self.vertices
        e_in = v - np.roll(v, 1, axis=0)      # edge arriving at vertex i
        e_out = np.roll(v, -1, axis=0) - v    # edge leaving vertex i
        turn = np.arctan2(_cross2(e_in, e_out), np.einsum("ij,ij->i", e_in, e_out))
        return np.pi - turn

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def side_lengths(self) -> np.ndarray:
        d = np.roll(self.vertices, -1, axis=0) - self.vertices
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def perimeter(self) -> float:
        return float(self.side_lengths.sum())

    @property
    def area(self) -> float:
        return _signed_area(self.vertices)

    @property
    def diameter(self) -> float:
        v = self.vertices
        d = v[:, None, :] - v[None, :, :]
        return float(np.sqrt((d ** 2).sum(-1)).max())

    def shapely(self) -> _ShapelyPolygon:
        return _ShapelyPolygon(self.vertices)

    def contains_points(self, points) -> np.ndarray:
        return points_in_polygon(np.asarray(points, dtype=float), self.vertices)

    def boundary_distance(self, points) -> np.ndarray:
        """Unsigned distance from each point to the polygon boundary."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        v = self.vertices
        return _points_to_polyline(pts, v, np.roll(v, -1, axis=0)).min(axis=1)

    def __repr__(self):
        return f"Polygon({self.n_vertices} vertices, area={self.area:.6g})"


@dataclass(frozen=True)
class Domain:
    """Target domain: convex (or Lipschitz polygonal) outer boundary."""

    boundary: Polygon

    @property
    def diameter(self) -> float:
        return self.boundary.diameter

    @property
    def area(self) -> float:
        return self.boundary.area

    @classmethod
    def square(cls, half_width: float = 1.0, center=(0.0, 0.0)) -> "Domain":
        cx, cy = center
        h = half_width
        return cls(Polygon([(cx - h, cy - h), (cx + h, cy - h),
                            (cx + h, cy + h), (cx - h, cy + h)]))


@dataclass(frozen=True)
class PiecewiseConductivity:
    """Conductivity equal to k inside the polygon and 1 outside."""

    polygon: Polygon
    k: float

    def value(self, inside: np.ndarray) -> np.ndarray:
        return np.where(inside, self.k, 1.0)


def validate_conductivity(k: float, pi: PriorInfo) -> bool:
    """Admissibility of the interior conductivity value."""
    return (1.0 / pi.lambda0 < k < pi.lambda0
            and 1.0 / pi.lambda1 < abs(k - 1.0) < pi.lambda1)


@dataclass(frozen=True)
class Clause:
    ok: bool
    value: float
    bound: float


@dataclass(frozen=True)
class AdmissibilityReport:
    clauses: dict

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.clauses.values())

    def failed_clauses(self) -> list:
        return [name for name, c in self.clauses.items() if not c.ok]


def validate_polygon(p: Polygon, omega: Domain, pi: PriorInfo) -> AdmissibilityReport:
    """Check every admissibility clause of the inclusion class.

    Non-simple input raises GeometryError at construction; this only reports
    pass/fail per clause. "Length" is read as the minimum side length.
    """
    angles = p.interior_angles
    lo, hi = pi.alpha0 - ANGLE_TOL, 2 * np.pi - pi.alpha0 + ANGLE_TOL
    angle_ok = bool(np.all(angles >= lo) and np.all(angles <= hi))
    worst_angle = float(angles.min())

    inside = bool(np.all(omega.boundary.contains_points(p.vertices))) and \
        not _boundaries_cross(p, omega.boundary)
    sep = boundary_separation(p, omega.boundary) if inside else 0.0

    clauses = {
        "vertex_count": Clause(p.n_vertices <= pi.n0, p.n_vertices, pi.n0),
        "angles": Clause(angle_ok, worst_angle, pi.alpha0),
        "min_side": Clause(bool(p.side_lengths.min() >= pi.d0 - EPS_GEOM),
                           float(p.side_lengths.min()), pi.d0),
        "inside_domain": Clause(inside, float(inside), 1.0),
        "boundary_distance": Clause(bool(sep >= pi.d0 - EPS_GEOM), float(sep), pi.d0),
    }
    return AdmissibilityReport(clauses)


def _boundaries_cross(p: Polygon, q: Polygon) -> bool:
    vp, vq = p.vertices, q.vertices
    for i in range(len(vp)):
        for j in range(len(vq)):
            if _segments_cross(vp[i], vp[(i + 1) % len(vp)], vq[j], vq[(j + 1) % len(vq)]):
                return True
    return False


def boundary_separation(p: Polygon, q: Polygon) -> float:
    """Min distance between two non-crossing polygon boundaries (exact on segments)."""
    vp, vq = p.vertices, q.vertices
    a = _points_to_polyline(vp, vq, np.roll(vq, -1, axis=0)).min()
    b = _points_to_polyline(vq, vp, np.roll(vp, -1, axis=0)).min()
    return float(min(a, b))


# ---------------------------------------------------------------------------
# point / segment primitives (vectorized)
# ---------------------------------------------------------------------------

def points_in_polygon(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Crossing-number containment test, vectorized over points."""
    pts = np.atleast_2d(points)
    x, y = pts[:, 0], pts[:, 1]
    v0 = vertices
    v1 = np.roll(vertices, -1, axis=0)
    inside = np.zeros(len(pts), dtype=bool)
    for (x0, y0), (x1, y1) in zip(v0, v1):
        crosses = (y0 > y) != (y1 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (x < xint)
    return inside


def _points_to_polyline(points: np.ndarray, seg0: np.ndarray, seg1: np.ndarray) -> np.ndarray:
    """Distances from each point to each segment; shape (n_points, n_segments)."""
    p = np.atleast_2d(points)[:, None, :]
    a = seg0[None, :, :]
    b = seg1[None, :, :]
    ab = b - a
    denom = np.einsum("ijk,ijk->ij", ab, ab)
    t = np.clip(np.einsum("ijk,ijk->ij", p - a, ab) / np.where(denom == 0, 1.0, denom), 0.0, 1.0)
    proj = a + t[..., None] * ab
    d = p - proj
    return np.sqrt(np.einsum("ijk,ijk->ij", d, d))


def distance_to_boundary(points, polygon: Polygon) -> np.ndarray:
    v = polygon.vertices
    return _points_to_polyline(np.atleast_2d(np.asarray(points, float)),
                               v, np.roll(v, -1, axis=0)).min(axis=1)


# ---------------------------------------------------------------------------
# boolean-derived metrics
# ---------------------------------------------------------------------------

def boolean_areas(p1: Polygon, p2: Polygon) -> tuple[float, float, float]:
    """(|P1 \\ P2|, |P2 \\ P1|, |P1 ∩ P2|) by exact polygon clipping."""
    s1, s2 = p1.shapely(), p2.shapely()
    return (s1.difference(s2).area, s2.difference(s1).area, s1.intersection(s2).area)


def symmetric_difference_area(p1: Polygon, p2: Polygon) -> float:
    only1, only2, _ = boolean_areas(p1, p2)
    return only1 + only2


def conductivity_diff_norms(c1: PiecewiseConductivity, c2: PiecewiseConductivity) -> tuple[float, float]:
    """Exact L1 and L2 norms of the conductivity difference via polygon booleans."""
    only1, only2, both = boolean_areas(c1.polygon, c2.polygon)
    a1, a2, a12 = abs(c1.k - 1.0), abs(c2.k - 1.0), abs(c1.k - c2.k)
    l1 = a1 * only1 + a2 * only2 + a12 * both
    l2 = np.sqrt(a1 ** 2 * only1 + a2 ** 2 * only2 + a12 ** 2 * both)
    return float(l1), float(l2)


# ---------------------------------------------------------------------------
# Hausdorff distance between boundaries (exact on segment pairs)
# ---------------------------------------------------------------------------

def _segment_quadratics(a0, d, b0, b1):
    """Squared distance from x(t)=a0+t*d to segment (b0,b1) as piecewise quadratics.

    Returns (breaks, coeffs) where on each t-interval the squared distance is
    a single quadratic c2*t^2 + c1*t + c0. Pieces switch where the foot of the
    projection crosses the ends of (b0, b1).
    """
    db = b1 - b0
    L2 = float(np.dot(db, db))
    # foot parameter s(t) = (a0 + t d - b0)·db / L2, linear in t
    s0 = float(np.dot(a0 - b0, db)) / L2
    s1 = float(np.dot(d, db)) / L2
    breaks = []
    for target in (0.0, 1.0):
        if abs(s1) > 1e-300:
            t = (target - s0) / s1
            if 0.0 < t < 1.0:
                breaks.append(t)
    breaks = sorted(breaks)

    def piece(tmid):
        s = s0 + s1 * tmid
        if s <= 0.0:
            ref = b0
        elif s >= 1.0:
            ref = b1
        else:
            # distance to the infinite line: |(x(t)-b0) x db|^2 / L2
            w0 = a0 - b0
            cr0 = float(_cross2(w0, db))
            cr1 = float(_cross2(d, db))
            return (cr1 * cr1 / L2, 2 * cr0 * cr1 / L2, cr0 * cr0 / L2)
        w = a0 - ref
        return (float(np.dot(d, d)), 2 * float(np.dot(w, d)), float(np.dot(w, w)))

    edges = [0.0] + breaks + [1.0]
    pieces = [piece(0.5 * (edges[i] + edges[i + 1])) for i in range(len(edges) - 1)]
    return edges, pieces


def _directed_hausdorff(va: np.ndarray, vb: np.ndarray) -> float:
    """sup over boundary of A of the distance to boundary of B, exact."""
    sb0, sb1 = vb, np.roll(vb, -1, axis=0)
    best = 0.0
    for i in range(len(va)):
        a0 = va[i]
        a1 = va[(i + 1) % len(va)]
        d = a1 - a0
        grid = {0.0, 1.0}
        per_seg = []
        for j in range(len(vb)):
            edges, pieces = _segment_quadratics(a0, d, sb0[j], sb1[j])
            per_seg.append((edges, pieces))
            grid.update(e for e in edges if 0.0 < e < 1.0)
        grid = sorted(grid)

        cand = set(grid)
        # crossings of the active quadratics can host interior maxima of min_b d_b^2
        for gi in range(len(grid) - 1):
            lo, hi = grid[gi], grid[gi + 1]
            tm = 0.5 * (lo + hi)
            active = []
            for edges, pieces in per_seg:
                idx = np.searchsorted(edges, tm) - 1
                idx = min(max(idx, 0), len(pieces) - 1)
                active.append(pieces[idx])
            coes = np.array(active)  # (m, 3) as (c2, c1, c0)
            m = len(coes)
            for p in range(m):
                for q in range(p + 1, m):
                    A = coes[p, 0] - coes[q, 0]
                    B = coes[p, 1] - coes[q, 1]
                    C = coes[p, 2] - coes[q, 2]
                    if abs(A) < 1e-300:
                        if abs(B) > 1e-300:
                            t = -C / B
                            if lo < t < hi:
                                cand.add(t)
                        continue
                    disc = B * B - 4 * A * C
                    if disc >= 0:
                        r = np.sqrt(disc)
                        for t in ((-B + r) / (2 * A), (-B - r) / (2 * A)):
                            if lo < t < hi:
                                cand.add(t)

        ts = np.array(sorted(cand))
        pts = a0[None, :] + ts[:, None] * d[None, :]
        dist = _points_to_polyline(pts, sb0, sb1).min(axis=1)
        best = max(best, float(dist.max()))
    return best


def hausdorff_boundary(p1: Polygon, p2: Polygon) -> float:
    """Symmetric Hausdorff distance between the two polygon boundaries."""
    return max(_directed_hausdorff(p1.vertices, p2.vertices),
               _directed_hausdorff(p2.vertices, p1.vertices))


# ---------------------------------------------------------------------------
# vertex matching and displacement
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VertexCorrespondence:
    """Cyclic orientation-preserving pairing of vertices of two polygons."""

    shift: int
    pairs: np.ndarray          # (n, 2) indices into P1, P2
    displacements: np.ndarray  # (n, 2), x2[j] - x1[i] in P1 vertex order
    d1: float                  # realized max vertex distance


def match_vertices(p1: Polygon, p2: Polygon) -> VertexCorrespondence:
    """Best cyclic shift pairing, minimizing the max vertex distance.

    Ties are broken by the smaller distance sum, then the lowest shift.
    """
    n1, n2 = p1.n_vertices, p2.n_vertices
    if n1 != n2:
        raise MatchImpossible(f"vertex counts differ: {n1} vs {n2}")
    v1, v2 = p1.vertices, p2.vertices
    best = None
    for s in range(n1):
        w = np.roll(v2, -s, axis=0)
        d = np.hypot(*(w - v1).T)
        key = (float(d.max()), float(d.sum()), s)
        if best is None or key < best[0]:
            best = (key, s, w)
    (dmax, _, _), s, w = best
    pairs = np.column_stack([np.arange(n1), (np.arange(n1) + s) % n1])
    return VertexCorrespondence(shift=s, pairs=pairs, displacements=w - v1, d1=dmax)


def total_vertex_displacement(corr: VertexCorrespondence) -> float:
    """Sum of Euclidean vertex distances under the correspondence."""
    return float(np.hypot(*corr.displacements.T).sum())


# ---------------------------------------------------------------------------
# deformation fields
# ---------------------------------------------------------------------------

def _mitered_offset(p: Polygon, dist: float) -> np.ndarray:
    """Offset each vertex along the miter direction; positive dist is outward."""
    v = p.vertices
    e = np.roll(v, -1, axis=0) - v
    t = e / np.hypot(e[:, 0], e[:, 1])[:, None]
    nrm = np.column_stack([t[:, 1], -t[:, 0]])  # outward normal for ccw ordering
    n_prev = np.roll(nrm, 1, axis=0)
    denom = 1.0 + np.einsum("ij,ij->i", n_prev, nrm)
    if np.min(denom) < 1e-6:
        i = int(np.argmin(denom))
        raise DeformationError(f"miter direction degenerate at vertex {i}")
    return v + dist * (n_prev + nrm) / denom[:, None]


def _band_triangles(base: np.ndarray, offset: np.ndarray, vals: np.ndarray):
    """Triangulate the band between two vertex-aligned rings; zero values on the offset ring."""
    n = len(base)
    tris, tvals = [], []
    zero = np.zeros(2)
    for i in range(n):
        j = (i + 1) % n
        quad = (base[i], base[j], offset[j], offset[i])
        qvals = (vals[i], vals[j], zero, zero)
        for diag in ((0, 1, 3), (1, 2, 3)), ((0, 1, 2), (0, 2, 3)):
            t1 = np.array([quad[a] for a in diag[0]])
            t2 = np.array([quad[a] for a in diag[1]])
            if _signed_area(t1) != 0 and _signed_area(t2) != 0 and \
               np.sign(_signed_area(t1)) == np.sign(_signed_area(t2)):
                tris += [t1, t2]
                tvals += [np.array([qvals[a] for a in diag[0]]),
                          np.array([qvals[a] for a in diag[1]])]
                break
        else:
            raise DeformationError(f"band quad at vertex {i} cannot be triangulated")
    return np.array(tris), np.array(tvals)


def _tri_gradient(tri: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Jacobian (2x2) of the affine field with values vals at triangle corners."""
    m = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
    dv = np.column_stack([vals[1] - vals[0], vals[2] - vals[0]])
    return dv @ np.linalg.inv(m)


class DeformationField:
    """Piecewise-affine displacement supported on a band around the inclusion boundary.

    The analytic field lives on a fixed triangulated band (vertex ring of the
    polygon against mitered offset rings at distance taper_dist on either side);
    it equals the prescribed vertex displacements on the inclusion boundary and
    tapers linearly to zero on the offset rings. Mesh-node samples are attached
    for a specific mesh but the field can be re-sampled on any node set.
    """

    def __init__(self, band_tris, band_vals, taper_dist, mesh=None):
        self.band_tris = np.asarray(band_tris, float)
        self.band_vals = np.asarray(band_vals, float)
        self.taper_dist = float(taper_dist)
        self.grads = np.array([_tri_gradient(t, v)
                               for t, v in zip(self.band_tris, self.band_vals)])
        self.sup_norm = float(np.sqrt((self.band_vals ** 2).sum(-1)).max()) \
            if len(self.band_vals) else 0.0
        self.lip_norm = float(max((np.linalg.norm(g, 2) for g in self.grads), default=0.0))
        self.w1inf = max(self.sup_norm, self.lip_norm)
        self.mesh = mesh
        self.values = self.evaluate(mesh.nodes) if mesh is not None else None

    def evaluate(self, points) -> np.ndarray:
        """Sample the band field at arbitrary points (zero outside the band)."""
        pts = np.atleast_2d(np.asarray(points, float))
        out = np.zeros_like(pts)
        if len(self.band_tris) == 0:
            return out
        unset = np.ones(len(pts), dtype=bool)
        tol = 1e-10
        for tri, vals in zip(self.band_tris, self.band_vals):
            if not unset.any():
                break
            lo = tri.min(axis=0) - tol
            hi = tri.max(axis=0) + tol
            boxed = unset & np.all((pts >= lo) & (pts <= hi), axis=1)
            if not boxed.any():
                continue
            idx = np.where(boxed)[0]
            m = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
            lam = np.linalg.solve(m, (pts[idx] - tri[0]).T).T
            inside = (lam[:, 0] >= -tol) & (lam[:, 1] >= -tol) & (lam.sum(axis=1) <= 1 + tol)
            hit = idx[inside]
            l1, l2 = lam[inside, 0], lam[inside, 1]
            out[hit] = (1 - l1 - l2)[:, None] * vals[0] + l1[:, None] * vals[1] + l2[:, None] * vals[2]
            unset[hit] = False
        return out

    def with_mesh(self, mesh) -> "DeformationField":
        return DeformationField(self.band_tris, self.band_vals, self.taper_dist, mesh)

    def scaled(self, factor: float) -> "DeformationField":
        f = DeformationField(self.band_tris, self.band_vals * factor, self.taper_dist)
        if self.mesh is not None:
            f.mesh = self.mesh
            f.values = None if self.values is None else self.values * factor
        return f

    @classmethod
    def zero(cls, mesh=None) -> "DeformationField":
        f = cls(np.zeros((0, 3, 2)), np.zeros((0, 3, 2)), 1.0)
        if mesh is not None:
            f.mesh = mesh
            f.values = np.zeros_like(mesh.nodes)
        return f


def build_deformation(p1: Polygon, p2: Polygon, corr: VertexCorrespondence,
                      mesh, taper_dist: float | None = None,
                      d0: float | None = None) -> DeformationField:
    """Extend the vertex displacement map to a band field sampled on the mesh.

    The taper distance defaults to d0/2 (or to half the boundary clearance
    implied by the mesh when d0 is not given).
    """
    if taper_dist is None:
        if d0 is None:
            raise ValueError("either taper_dist or d0 is required")
        taper_dist = d0 / 2.0
    disp = corr.displacements
    if np.allclose(disp, 0.0):
        return DeformationField.zero(mesh)

    outer = _mitered_offset(p1, taper_dist)
    inner = _mitered_offset(p1, -taper_dist)
    for ring, name in ((outer, "outer"), (inner, "inner")):
        ring_poly = ring
        if _signed_area(ring_poly) <= 0:
            i = int(np.argmin(distance_to_boundary(ring_poly, p1)))
            raise DeformationError(f"{name} offset ring inverted near vertex {i}")
        e_base = np.roll(p1.vertices, -1, axis=0) - p1.vertices
        e_ring = np.roll(ring_poly, -1, axis=0) - ring_poly
        flips = np.einsum("ij,ij->i", e_base, e_ring) <= 0
        if flips.any():
            i = int(np.where(flips)[0][0])
            raise DeformationError(f"{name} offset self-intersects at vertex {i}")

    tris_out, vals_out = _band_triangles(p1.vertices, outer, disp)
    tris_in, vals_in = _band_triangles(p1.vertices, inner, disp)
    return DeformationField(np.concatenate([tris_out, tris_in]),
                            np.concatenate([vals_out, vals_in]),
                            taper_dist, mesh)


def apply_flow(p: Polygon, h: DeformationField, t: float) -> Polygon:
    """Move polygon vertices along the deformation flow x -> x + t h(x)."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("flow parameter t must lie in [0, 1]")
    moved = p.vertices + t * h.evaluate(p.vertices)
    try:
        return Polygon(moved)
    except GeometryError as exc:
        raise FlowDegenerate(f"flow at t={t} degenerates the polygon: {exc}") from exc


# ---------------------------------------------------------------------------
# exchange format
# ---------------------------------------------------------------------------

def read_polygon(path) -> Polygon:
    """Read a polygon from a plain-text file with one "x y" pair per line."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GeometryError(f"bad polygon record {line!r} in {path}")
            rows.append((float(parts[0]), float(parts[1])))
    return Polygon(rows)


def write_polygon(path, polygon: Polygon) -> None:
    with open(path, "w") as fh:
        for x, y in polygon.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
