"""First-return renormalization data for Herman candidates.

With c_j the critical orbit (c_0 the free critical point) the level-n first
return is f^{q_n} near c_0, rescaled by A_n(z) = (z - c_0)/(c_{q_n} - c_0).
Backward points c_{-j} are not stored; we substitute the forward index k
whose angle k theta mod 1 is nearest to -j theta and record the mismatch.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy import ndimage

from .cf import ContinuedFraction, convergents
from .render import OrbitClass, Viewport, classify_parameters
from .solver import HermanCandidate, family_map, precision_horizon
from .width import _diameter

ESCAPE = 1e8


@dataclass
class ScalingRow:
    n: int
    q: int
    c_q: complex
    dist: float
    ratio: float | None       # dist_{n+1} / dist_n
    arc_diam: float
    backward_index: int       # forward index standing in for -q_n
    backward_mismatch: float  # |angle(k) - angle(-q_n)| in turns

    @property
    def shape(self) -> float:
        return self.arc_diam / self.dist


@dataclass
class ReturnScalingTable:
    rows: list
    flags: list = field(default_factory=list)

    @property
    def ratios(self) -> list[float]:
        return [r.ratio for r in self.rows if r.ratio is not None]

    @property
    def shape_range(self) -> tuple[float, float]:
        s = [r.shape for r in self.rows]
        return (min(s), max(s)) if s else (float("nan"), float("nan"))

    def stabilized(self, count: int = 3, rel: float = 0.10) -> bool:
        """The last ``count`` ratios agree within ``rel`` of each other."""
        r = self.ratios[-count:]
        return len(r) == count and (max(r) - min(r)) <= rel * min(r)

    def to_json(self) -> dict:
        return {
            "rows": [
                {"n": r.n, "q": r.q, "c_q": [r.c_q.real, r.c_q.imag], "dist": r.dist,
                 "ratio": r.ratio, "arc_diam": r.arc_diam, "shape": r.shape,
                 "backward_index": r.backward_index, "backward_mismatch": r.backward_mismatch}
                for r in self.rows
            ],
            "shape_range": list(self.shape_range),
            "flags": list(self.flags),
        }

    def to_csv(self) -> str:
        out = ["n,q,re_c_q,im_c_q,dist,ratio,arc_diam,backward_index,backward_mismatch"]
        for r in self.rows:
            ratio = "" if r.ratio is None else repr(r.ratio)
            out.append(f"{r.n},{r.q},{r.c_q.real!r},{r.c_q.imag!r},{r.dist!r},{ratio},"
                       f"{r.arc_diam!r},{r.backward_index},{r.backward_mismatch!r}")
        return "\n".join(out) + "\n"


def _orbit_angles(theta: ContinuedFraction, count: int) -> np.ndarray:
    with mpmath.workprec(200):
        th = theta.value
        return np.array([float(mpmath.frac(j * th)) for j in range(count)])


def _signed(a):
    """Representative of a mod 1 in [-1/2, 1/2)."""
    return (np.asarray(a) + 0.5) % 1.0 - 0.5


def return_scaling(cand: HermanCandidate, levels: int) -> ReturnScalingTable:
    """Scaling table of the closest returns c_{q_n}, n = 1..levels."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    flags = []
    horizon = precision_horizon(cand)
    use = levels
    if levels > horizon:
        use = horizon
        flags.append(f"truncated at precision horizon (level {horizon})")
    tab = convergents(cand.theta, use)
    orb = cand.orbit.values
    need = 2 * tab.q[use] + 1
    if len(orb) < need:
        raise ValueError(f"orbit too short: {len(orb)} points, need {need}")
    c0 = orb[0]
    count = min(len(orb), 3 * tab.q[use] + 1)
    ang = _orbit_angles(cand.theta, count)
    rel = _signed(ang)
    pts = orb[:count]

    rows = []
    dists = []
    for n in range(1, use + 1):
        dists.append(abs(orb[tab.q[n]] - c0))
    for n in range(1, use + 1):
        q = tab.q[n]
        s = (-1) ** n * tab.l[n]  # angle of c_{q_n}
        # backward point c_{-q_n}: forward index with angle nearest to -s
        k = int(np.argmin(np.abs(_signed(ang - (-s)))))
        mism = float(abs(_signed(ang[k] + s)))
        a, b = sorted((2 * s, -s))
        inside = (rel >= a) & (rel <= b)
        arc = np.concatenate([[orb[2 * q]], pts[inside], [orb[k]]])
        ratio = dists[n] / dists[n - 1] if n < len(dists) else None
        rows.append(ScalingRow(n, q, complex(orb[q]), float(dists[n - 1]),
                               None if ratio is None else float(ratio),
                               _diameter(arc), k, mism))
    d = [r.dist for r in rows]
    if any(b >= a for a, b in zip(d, d[1:])):
        flags.append("dist not strictly decreasing")
    return ReturnScalingTable(rows, flags)


@dataclass
class RescaledMap:
    n: int
    q: int
    samples: np.ndarray   # points w in the rescaled frame
    values: np.ndarray    # g_n(w), nan where the orbit escaped
    escaped: np.ndarray   # bool mask
    g0: complex           # g_n(0)

    def to_json(self) -> dict:
        return {"n": self.n, "q": self.q, "g0": [self.g0.real, self.g0.imag],
                "samples": [[w.real, w.imag] for w in self.samples],
                "values": [[v.real, v.imag] if np.isfinite(v) else None for v in self.values],
                "escaped": self.escaped.tolist()}


def _scale(cand: HermanCandidate, n: int):
    tab = convergents(cand.theta, n)
    q = tab.q[n]
    orb = cand.orbit.values
    if q >= len(orb):
        raise ValueError(f"orbit too short for level {n}")
    return q, complex(orb[0]), complex(orb[q])


def A(z, c0: complex, cq: complex):
    """A_n(z) = (z - c_0)/(c_{q_n} - c_0), with A_n(c_{q_n}) = 1 exactly."""
    z = np.asarray(z)
    return np.where(z == cq, 1.0 + 0j, (z - c0) / (cq - c0))


def A_inv(w, c0: complex, cq: complex):
    return c0 + np.asarray(w) * (cq - c0)


def _iterate(f, z: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    z = np.array(z, complex)
    bad = np.zeros(z.shape, bool)
    with np.errstate(all="ignore"):
        for _ in range(k):
            z = f(z)
            bad |= ~np.isfinite(z) | (np.abs(z) > ESCAPE)
            z = np.where(bad, 0, z)
    return z, bad


def sample_grid(radius: float = 0.5, rings: int = 8, per_ring: int = 32) -> np.ndarray:
    """Polar sampling of the disk |w| <= radius (centre included)."""
    r = radius * np.arange(1, rings + 1) / rings
    t = 2 * np.pi * np.arange(per_ring) / per_ring
    return np.concatenate([[0j], (r[:, None] * np.exp(1j * t)[None, :]).ravel()])


def rescaled_return_map(cand: HermanCandidate, n: int, grid=None) -> RescaledMap:
    """Samples of g_n = A_n o f^{q_n} o A_n^{-1}; g_n(0) is taken from the stored orbit."""
    if n < 1 or n > precision_horizon(cand):
        raise ValueError("level outside the validated range")
    q, c0, cq = _scale(cand, n)
    w = sample_grid() if grid is None else np.asarray(grid, complex).ravel()
    f = family_map(cand.family, cand.parameter)
    z, bad = _iterate(f, A_inv(w, c0, cq), q)
    g = np.where(bad, np.nan + 0j, A(z, c0, cq))
    # the orbit point itself: A_n(c_{q_n}) = 1 with no rounding
    g0 = complex(A(cq, c0, cq))
    g[w == 0] = g0
    bad[w == 0] = False
    return RescaledMap(n, q, w, g, bad, complex(g0))


def winding_at_zero(cand: HermanCandidate, n: int, radius: float = 1e-2, samples: int = 512) -> int:
    """Winding number of g_n(w) - g_n(0) along |w| = radius."""
    w = radius * np.exp(2j * np.pi * np.arange(samples) / samples)
    m = rescaled_return_map(cand, n, w)
    if m.escaped.any():
        raise ValueError("samples escaped; choose a smaller radius")
    d = m.values - m.g0
    turn = np.diff(np.unwrap(np.angle(np.append(d, d[0]))))
    return int(round(turn.sum() / (2 * np.pi)))


def return_map_distance(cand: HermanCandidate, n: int, m: int, radius: float = 0.5,
                        rings: int = 6, per_ring: int = 24) -> float:
    """Sup distance between g_n and g_m on a common disk of samples."""
    grid = sample_grid(radius, rings, per_ring)
    a = rescaled_return_map(cand, n, grid)
    b = rescaled_return_map(cand, m, grid)
    ok = ~(a.escaped | b.escaped)
    return float(np.max(np.abs(a.values[ok] - b.values[ok])))


# --------------------------------------------------------------------------
# parameter-space self-similarity

@dataclass
class SelfSimilarityReport:
    center: complex
    width: float
    scales: list
    pairs: list       # (scale_a, scale_b, correlation, best_angle)
    control: float    # correlation against a pixel-shuffled window
    px: int
    maxiter: int

    def to_json(self) -> dict:
        return {"center": [self.center.real, self.center.imag], "width": self.width,
                "scales": list(self.scales),
                "pairs": [{"scale_a": a, "scale_b": b, "correlation": c, "angle": t}
                          for a, b, c, t in self.pairs],
                "control": self.control, "px": self.px, "maxiter": self.maxiter}


def _window_mask(d0, dinf, center, width, px, maxiter) -> np.ndarray:
    vp = Viewport(complex(center), float(width), px, px)
    cls, _ = classify_parameters(d0, dinf, vp.points(), maxiter)
    return (cls.reshape(px, px) == OrbitClass.Undecided).astype(float)


def _corr(a: np.ndarray, b: np.ndarray, disc: np.ndarray) -> float:
    x, y = a[disc], b[disc]
    x = x - x.mean()
    y = y - y.mean()
    den = np.sqrt((x * x).sum() * (y * y).sum())
    return float((x * y).sum() / den) if den > 0 else 0.0


def self_similarity_probe(d0: int, dinf: int, theta: ContinuedFraction, center: complex,
                          width: float, scales, px: int = 128, maxiter: int = 2000,
                          angles: int = 72, seed: int = 0) -> SelfSimilarityReport:
    """Correlate the non-escaping locus across nested windows centred at ``center``.

    Each consecutive pair is compared after the rotation (among ``angles``
    equally spaced ones) that maximizes the correlation on the inscribed disc.
    """
    if not theta.is_stationary:
        raise ValueError("self-similarity probe needs a stationary-type theta")
    scales = [float(s) for s in scales]
    masks = [_window_mask(d0, dinf, center, width * s, px, maxiter) for s in scales]
    yy, xx = np.mgrid[0:px, 0:px] - (px - 1) / 2
    disc = xx ** 2 + yy ** 2 <= (px / 2 - 1) ** 2
    pairs = []
    for (sa, a), (sb, b) in zip(zip(scales, masks), zip(scales[1:], masks[1:])):
        best, best_t = -2.0, 0.0
        for k in range(angles):
            t = 360.0 * k / angles
            rb = b if k == 0 else ndimage.rotate(b, t, reshape=False, order=0)
            c = _corr(a, rb, disc)
            if c > best:
                best, best_t = c, t
        pairs.append((sa, sb, best, best_t))
    rng = np.random.default_rng(seed)
    shuffled = rng.permutation(masks[-1].ravel()).reshape(px, px)
    control = _corr(masks[0], shuffled, disc)
    return SelfSimilarityReport(complex(center), float(width), scales, pairs, control, px, maxiter)
