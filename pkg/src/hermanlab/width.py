"""Discrete extremal width and the alpha-width probes on curve models.

The width of the family of curves joining a source set to a target set is
the Dirichlet energy of the potential that is 0 on the source and 1 on the
target.  We compute it on a rectilinear grid as the energy of a resistor
network (finite volumes on a tensor grid): a uniform core around the
configuration, geometric grading out to an insulated far boundary.  Curves
are imposed through the grid edges they cut: a Dirichlet curve pins the
nearer endpoint of every cut edge, a slit removes the edge.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np
import pyamg
import scipy.sparse as sp

from .cf import ContinuedFraction, convergents
from .solver import HermanCandidate, precision_horizon


class DegenerateConfigurationError(ValueError):
    pass


class InsufficientSamplesError(ValueError):
    pass


@dataclass
class WidthProblem:
    """Source and target polylines (lists of complex arrays) and insulated slits.

    ``window`` = (xmin, xmax, ymin, ymax) is the uniformly gridded core.  With
    ``far`` = None the window is the whole domain (insulated edges); otherwise
    the grid is graded out to a box ``far`` times the core size.
    """

    source: list
    target: list
    slits: list = field(default_factory=list)
    window: tuple | None = None
    resolution: int = 256
    far: float | None = 40.0
    grading: float = 1.15

    def __post_init__(self):
        self.source = [np.asarray(p, complex) for p in _as_list(self.source)]
        self.target = [np.asarray(p, complex) for p in _as_list(self.target)]
        self.slits = [np.asarray(p, complex) for p in _as_list(self.slits)]
        if self.window is None:
            pts = np.concatenate(self.source + self.target + self.slits)
            x0, x1, y0, y1 = pts.real.min(), pts.real.max(), pts.imag.min(), pts.imag.max()
            s = max(x1 - x0, y1 - y0)
            cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
            self.window = (cx - 0.6 * s, cx + 0.6 * s, cy - 0.6 * s, cy + 0.6 * s)

    def transformed(self, a: complex, b: complex = 0) -> "WidthProblem":
        """The image under z -> a z + b (window mapped by its bounding box)."""
        def m(ps):
            return [a * p + b for p in ps]
        x0, x1, y0, y1 = self.window
        corners = a * np.array([x0 + 1j * y0, x1 + 1j * y0, x0 + 1j * y1, x1 + 1j * y1]) + b
        win = (corners.real.min(), corners.real.max(), corners.imag.min(), corners.imag.max())
        return WidthProblem(m(self.source), m(self.target), m(self.slits), win, self.resolution,
                            self.far, self.grading)


def _as_list(p):
    if isinstance(p, np.ndarray) and p.ndim == 1:
        return [p]
    return list(p)


@dataclass(frozen=True)
class WidthResult:
    value: float   # Richardson extrapolation 2 W_N - W_{N/2}
    fine: float
    coarse: float
    resolution: int
    nodes: int
    seconds: float

    def __float__(self) -> float:
        return self.value


# --------------------------------------------------------------------------
# grid

def _axis(lo: float, hi: float, n: int, far: float | None, ratio: float) -> np.ndarray:
    core = np.linspace(lo, hi, n + 1)
    if far is None:
        return core
    h = (hi - lo) / n
    reach = 0.5 * (far - 1) * (hi - lo)
    ext, s, step = [], 0.0, h
    while s < reach:
        step *= ratio
        s += step
        ext.append(s)
    ext = np.array(ext)
    return np.concatenate([lo - ext[::-1], core, hi + ext])


def _cuts(poly: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Grid edges cut by a polyline.

    Returns (vertical edges: i, j, y) for crossings of x = xs[i] between
    ys[j] and ys[j+1], and (horizontal edges: i, j, x) likewise.
    """
    p, q = poly[:-1], poly[1:]
    out = []
    for (pa, qa, pb, qb, g, h) in ((p.real, q.real, p.imag, q.imag, xs, ys),
                                   (p.imag, q.imag, p.real, q.real, ys, xs)):
        lo = np.minimum(pa, qa)
        hi = np.maximum(pa, qa)
        i0 = np.searchsorted(g, lo, side="left")
        i1 = np.searchsorted(g, hi, side="right")
        cnt = np.maximum(i1 - i0, 0)
        cnt[pa == qa] = 0
        seg = np.repeat(np.arange(len(pa)), cnt)
        if len(seg) == 0:
            out.append((np.zeros(0, int), np.zeros(0, int), np.zeros(0)))
            continue
        offs = np.arange(len(seg)) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        idx = i0[seg] + offs
        t = (g[idx] - pa[seg]) / (qa[seg] - pa[seg])
        other = pb[seg] + t * (qb[seg] - pb[seg])
        j = np.searchsorted(h, other, side="right") - 1
        ok = (j >= 0) & (j < len(h) - 1)
        # a crossing exactly at the last grid line still belongs to the last edge
        at_end = other == h[-1]
        j = np.where(at_end, len(h) - 2, j)
        ok |= at_end
        out.append((idx[ok], j[ok], other[ok]))
    return out


TMIN = 1e-3  # cuts closer than this (in edge fractions) pin the endpoint


def _edge_cuts(polys, xs, ys, n_h: int):
    """Edge ids and fractions t (from the lower/left endpoint) of all cuts."""
    nx = len(xs)
    ids, ts = [], []
    for poly in polys:
        (vi, vj, vy), (hj, hi_, hx) = _cuts(poly, xs, ys)
        ids.append(n_h + vj * nx + vi)
        ts.append((vy - ys[vj]) / (ys[vj + 1] - ys[vj]))
        ids.append(hj * (nx - 1) + hi_)
        ts.append((hx - xs[hi_]) / (xs[hi_ + 1] - xs[hi_]))
    if not ids:
        return np.zeros(0, int), np.zeros(0)
    return np.concatenate(ids), np.clip(np.concatenate(ts), 0.0, 1.0)


def _solve_energy(prob: WidthProblem, n: int) -> tuple[float, int]:
    """Grid energy with cut-cell Dirichlet data.

    An edge cut by a Dirichlet curve at fraction t is replaced by two half
    edges of conductance C/t and C/(1-t) joining its endpoints to the
    boundary value; cuts within TMIN of a node pin that node.
    """
    x0, x1, y0, y1 = prob.window
    # square cells in the core
    h = max(x1 - x0, y1 - y0) / n
    nxc = max(1, int(round((x1 - x0) / h)))
    nyc = max(1, int(round((y1 - y0) / h)))
    xs = _axis(x0, x1, nxc, prob.far, prob.grading)
    ys = _axis(y0, y1, nyc, prob.far, prob.grading)
    nx, ny = len(xs), len(ys)
    N = nx * ny

    dx = np.diff(xs)
    dy = np.diff(ys)
    # dual cell sizes (half cells on the boundary)
    hx = np.zeros(nx)
    hx[:-1] += dx / 2
    hx[1:] += dx / 2
    hy = np.zeros(ny)
    hy[:-1] += dy / 2
    hy[1:] += dy / 2
    # horizontal edges (i,j)-(i+1,j): conductance hy[j]/dx[i]
    jj, ii = np.meshgrid(np.arange(ny), np.arange(nx - 1), indexing="ij")
    ha = (jj * nx + ii).ravel()
    hc = (hy[jj] / dx[ii]).ravel()
    # vertical edges (i,j)-(i,j+1): conductance hx[i]/dy[j]
    jj, ii = np.meshgrid(np.arange(ny - 1), np.arange(nx), indexing="ij")
    va = (jj * nx + ii).ravel()
    vc = (hx[ii] / dy[jj]).ravel()
    n_h = len(ha)
    a = np.concatenate([ha, va])
    b = np.concatenate([ha + 1, va + nx])
    c = np.concatenate([hc, vc])
    E = len(a)

    keep = np.ones(E, bool)
    for poly in prob.slits:
        ids, _ = _edge_cuts([poly], xs, ys, n_h)
        keep[ids] = False

    # per edge: nearest cut to each endpoint and the value it carries
    value = np.full(E, -1, np.int8)
    ta = np.full(E, np.inf)
    tb = np.full(E, np.inf)
    pinned = np.full(N, -1, np.int8)
    for v, polys in ((0, prob.source), (1, prob.target)):
        ids, t = _edge_cuts(polys, xs, ys, n_h)
        if len(ids) == 0:
            raise DegenerateConfigurationError("source or target missed by the grid")
        if np.any((value[ids] != -1) & (value[ids] != v)):
            raise DegenerateConfigurationError("degenerate configuration at this resolution")
        value[ids] = v
        np.minimum.at(ta, ids, t)
        np.minimum.at(tb, ids, 1.0 - t)
        for nodes in (a[ids][t < TMIN], b[ids][1.0 - t < TMIN]):
            if np.any((pinned[nodes] != -1) & (pinned[nodes] != v)):
                raise DegenerateConfigurationError("degenerate configuration at this resolution")
            pinned[nodes] = v

    cut = (value >= 0) & keep
    # a cut touching a pinned endpoint leaves an ordinary edge from that node
    pin_a = cut & (ta < TMIN)
    pin_b = cut & (tb < TMIN)
    split = cut & ~pin_a & ~pin_b
    plain = keep & ~split
    pa, pb, pc = a[plain], b[plain], c[plain]
    pv_a, pv_b = pinned[pa], pinned[pb]
    if np.any((pv_a >= 0) & (pv_b >= 0) & (pv_a != pv_b)):
        raise DegenerateConfigurationError("degenerate configuration at this resolution")
    for ends in (a[split], b[split]):
        if np.any((pinned[ends] >= 0) & (pinned[ends] != value[split])):
            raise DegenerateConfigurationError("degenerate configuration at this resolution")
    sa, sb, sc, sv = a[split], b[split], c[split], value[split].astype(float)
    ga = sc / ta[split]
    gb = sc / tb[split]
    bnode = np.concatenate([sa, sb])
    bg = np.concatenate([ga, gb])
    bv = np.concatenate([sv, sv])

    diag = np.bincount(bnode, bg, minlength=N)
    L = sp.coo_matrix((np.concatenate([-pc, -pc, pc, pc]),
                       (np.concatenate([pa, pb, pa, pb]), np.concatenate([pb, pa, pa, pb]))),
                      shape=(N, N)).tocsr() + sp.diags(diag)
    u = np.zeros(N)
    fixed = np.nonzero(pinned >= 0)[0]
    u[fixed] = pinned[fixed]
    free = np.nonzero(pinned < 0)[0]
    rhs = np.bincount(bnode, bg * bv, minlength=N)[free] - L[free][:, fixed] @ u[fixed]
    Lff = L[free][:, free].tocsr()
    # free nodes cut off from all boundary data are singular but consistent
    # (rhs 0); a tiny shift keeps the solver happy
    Lff = Lff + sp.identity(len(free), format="csr") * 1e-14 * Lff.diagonal().max()
    ml = pyamg.ruge_stuben_solver(Lff, max_coarse=500)
    u[free] = ml.solve(rhs, tol=1e-11, accel="cg", maxiter=500)
    energy = float(np.sum(pc * (u[pa] - u[pb]) ** 2) + np.sum(bg * (u[bnode] - bv) ** 2))
    return energy, N


def discrete_extremal_width(problem: WidthProblem) -> WidthResult:
    """Grid Dirichlet energy at resolutions N/2 and N, Richardson extrapolated."""
    if problem.resolution < 64:
        raise ValueError("grid resolution must be >= 64")
    t0 = time.perf_counter()
    fine, nodes = _solve_energy(problem, problem.resolution)
    coarse, _ = _solve_energy(problem, problem.resolution // 2)
    return WidthResult(2 * fine - coarse, fine, coarse, problem.resolution, nodes,
                       time.perf_counter() - t0)


# --------------------------------------------------------------------------
# curve models

@dataclass
class CurveModel:
    """Points of an invariant curve indexed by combinatorial angle in [0, 1)."""

    angles: np.ndarray
    points: np.ndarray
    theta: ContinuedFraction
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        o = np.argsort(self.angles)
        self.angles = np.asarray(self.angles, float)[o]
        self.points = np.asarray(self.points, complex)[o]
        if np.any(np.diff(self.angles) <= 0):
            raise ValueError("angles must be distinct")

    def __len__(self) -> int:
        return len(self.angles)

    @property
    def density(self) -> int:
        return len(self.angles)

    @classmethod
    def round_circle(cls, theta: ContinuedFraction, count: int = 4096) -> "CurveModel":
        """The unit circle sampled along the rotation orbit of 1."""
        with mpmath.workprec(200):
            th = theta.value
            ang = np.array([float(mpmath.frac(j * th)) for j in range(count)])
        return cls(ang, np.exp(2j * np.pi * ang), theta, {"source": "round"})

    @classmethod
    def from_candidate(cls, cand: HermanCandidate, count: int | None = None) -> "CurveModel":
        """Curve model from a solved candidate.

        The periodic orbit at the deepest level (angles k p/q) is used when
        available, otherwise the forward orbit with angles k theta.
        """
        if cand.periodic_orbit is not None and cand.levels:
            rec = cand.levels[-1]
            q, p = rec.q, rec.p
            pts = np.asarray(cand.periodic_orbit)
            ang = (np.arange(q) * p % q) / q
            if count is not None and count < q:
                keep = np.arange(count)
                ang, pts = ang[keep], pts[keep]
            return cls(ang, pts, cand.theta, {"source": "periodic", "q": q})
        if count is None:
            count = convergents(cand.theta, precision_horizon(cand)).q[-1]
        with mpmath.workprec(200):
            th = cand.theta.value
            ang = np.array([float(mpmath.frac(j * th)) for j in range(count)])
        return cls(ang, cand.orbit.values[:count], cand.theta, {"source": "orbit"})

    def validate(self) -> dict:
        gaps = np.diff(np.append(self.points, self.points[0]))
        closing = abs(gaps[-1])
        spacing = float(np.median(np.abs(gaps)))
        w = int(round(np.sum(np.angle(np.append(self.points[1:], self.points[0]) / self.points)) / (2 * np.pi)))
        return {"closes": bool(closing <= 10 * max(spacing, np.max(np.abs(gaps[:-1])))),
                "winding": w, "spacing": spacing}

    def at(self, x: float) -> complex:
        """Point at angle x by linear interpolation between neighbouring samples."""
        x = x % 1.0
        a = np.append(self.angles, self.angles[0] + 1.0)
        p = np.append(self.points, self.points[0])
        k = int(np.searchsorted(a, x, side="right")) - 1
        if k < 0:
            a = np.insert(a, 0, self.angles[-1] - 1.0)
            p = np.insert(p, 0, self.points[-1])
            k = 0
        s = (x - a[k]) / (a[k + 1] - a[k])
        return complex(p[k] + s * (p[k + 1] - p[k]))

    def arc(self, a: float, b: float) -> np.ndarray:
        """Polyline of the arc from angle a to angle b (counterclockwise, b - a in (0, 1))."""
        length = (b - a) % 1.0
        rel = (self.angles - a) % 1.0
        inside = np.nonzero((rel > 0) & (rel < length))[0]
        inside = inside[np.argsort(rel[inside])]
        return np.concatenate([[self.at(a)], self.points[inside], [self.at(b)]])

    def count_in(self, a: float, b: float) -> int:
        length = (b - a) % 1.0
        rel = (self.angles - a) % 1.0
        return int(np.sum(rel <= length))


def _interval(interval) -> tuple[float, float]:
    a, b = interval
    if a == b:
        raise ValueError("empty interval")
    return float(a), float(b)


def alpha_width(curve: CurveModel, interval, alpha: float, resolution: int = 256,
                slits: bool = False, min_samples: int = 8) -> WidthResult:
    """W_alpha(I): width of the curves joining I to the complement of alpha I.

    ``interval`` = (a, b) is the arc from angle a counterclockwise to b.  The
    domain is the sphere minus I and (alpha I)^c; with ``slits`` the two
    components of alpha I minus I are made insulating as well.
    """
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    a, b = _interval(interval)
    length = (b - a) % 1.0
    if alpha * length >= 1:
        raise ValueError("alpha |I| must be < 1")
    n_in = curve.count_in(a, b)
    if n_in < min_samples:
        need = int(np.ceil(min_samples / length))
        raise InsufficientSamplesError(
            f"only {n_in} samples in I; an orbit of length >= {need} is required")
    mid = a + length / 2
    A, B = mid - alpha * length / 2, mid + alpha * length / 2
    src = curve.arc(a, b)
    tgt = curve.arc(B, A)
    sl = [curve.arc(A, a), curve.arc(b, B)] if slits else []
    core = curve.arc(A, B)
    x0, x1, y0, y1 = core.real.min(), core.real.max(), core.imag.min(), core.imag.max()
    s = max(x1 - x0, y1 - y0)
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    win = (cx - s, cx + s, cy - s, cy + s)
    # the far box must contain the whole curve
    ext = max(np.max(np.abs(curve.points.real - cx)), np.max(np.abs(curve.points.imag - cy)))
    far = max(40.0, 40.0 * ext / s)
    prob = WidthProblem([src], [tgt], sl, win, resolution, far)
    return discrete_extremal_width(prob)


@dataclass
class WidthProfile:
    rows: list          # (level, piece_index, width or None, flag)
    maxima: dict        # level -> max width or None
    alpha: float
    density: int

    def to_csv(self) -> str:
        lines = ["level,piece_index,width,flag"]
        for lev, k, w, flag in self.rows:
            lines.append(f"{lev},{k},{'' if w is None else repr(float(w))},{flag}")
        return "\n".join(lines) + "\n"


def _piece(curve: CurveModel, x: float, n: int, tab) -> tuple[float, float]:
    """Angle interval of the combinatorial piece [x, f^{q_n}(x)]."""
    step = (-1) ** n * tab.l[n]  # q_n theta - p_n
    return (x, x + step) if step > 0 else (x + step, x)


def width_profile(curve: CurveModel, max_level: int, alpha: float = 3.0, pieces: int = 4,
                  resolution: int = 96) -> WidthProfile:
    """Per-level maxima of W_alpha over a fixed sample of combinatorial pieces."""
    rows, maxima = [], {}
    if max_level <= 0:
        return WidthProfile(rows, maxima, alpha, len(curve))
    tab = convergents(curve.theta, max_level)
    starts = [curve.angles[k] for k in np.linspace(0, len(curve) - 1, pieces, dtype=int)]
    for n in range(1, max_level + 1):
        vals = []
        for k, x in enumerate(starts):
            if alpha * tab.l[n] >= 1:
                rows.append((n, k, None, "unavailable: alpha*l_n >= 1"))
                continue
            try:
                w = alpha_width(curve, _piece(curve, x, n, tab), alpha, resolution).value
            except (InsufficientSamplesError, DegenerateConfigurationError) as exc:
                rows.append((n, k, None, f"unavailable: {exc}"))
                continue
            rows.append((n, k, w, "ok"))
            vals.append(w)
        maxima[n] = max(vals) if vals else None
    return WidthProfile(rows, maxima, alpha, len(curve))


@dataclass(frozen=True)
class QSResult:
    value: float | None
    level: int
    pairs: int
    reason: str = ""

    @property
    def available(self) -> bool:
        return self.value is not None


def _diameter(poly: np.ndarray) -> float:
    if len(poly) > 64:
        from scipy.spatial import ConvexHull
        try:
            poly = poly[ConvexHull(np.column_stack([poly.real, poly.imag])).vertices]
        except Exception:
            pass
    return float(np.max(np.abs(poly[:, None] - poly[None, :])))


def quasisymmetry_distortion(curve: CurveModel, level: int, max_pairs: int = 512,
                             min_samples: int = 2) -> QSResult:
    """Max ratio of diameters of adjacent level-n combinatorial pieces."""
    tab = convergents(curve.theta, level)
    l = tab.l[level]
    if 2 * l >= 1:
        return QSResult(None, level, 0, "unavailable: pieces too long")
    if l * len(curve) < min_samples:
        return QSResult(None, level, 0, "unavailable: beyond the sample density")
    step = (-1) ** level * l
    idx = np.linspace(0, len(curve) - 1, min(max_pairs, len(curve)), dtype=int)
    worst = 1.0
    for k in idx:
        x = curve.angles[k]
        p1 = curve.arc(*sorted((x, x + step))) if step > 0 else curve.arc(x + step, x)
        y = x + step
        p2 = curve.arc(y, y + step) if step > 0 else curve.arc(y + step, y)
        d1, d2 = _diameter(p1), _diameter(p2)
        if d1 == 0 or d2 == 0:
            return QSResult(None, level, 0, "unavailable: degenerate piece")
        worst = max(worst, d1 / d2, d2 / d1)
    return QSResult(worst, level, len(idx))
