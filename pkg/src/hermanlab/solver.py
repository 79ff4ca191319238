"""Herman-curve parameters by Newton continuation along convergents.

At each convergent p/q the periodic critical orbit is found by multiple
shooting: the unknowns are the (real) parameter pair and the orbit points
z_1..z_{q-1}, the equations z_{k+1} = f(z_k) closed up by z_q = z_0 = the
free critical point.  The resulting sparse system is well conditioned even
when single shooting on f^q(crit) - crit is hopeless (|(f^q)'| is huge).
Each level is seeded from the previous one by interpolating the orbit in
polar form along the combinatorial angle, and accepted only if its cyclic
order realizes rotation by p/q.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

import mpmath
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cf import ContinuedFraction, convergents
from .rmap import (OrbitTrace, RationalMap, antipode, bbm_critical_points, make_bbm,
                   make_rotation, make_unicritical, unicritical_coefficients)

log = logging.getLogger(__name__)

RETRIES = 8
RETRY_SCALE = 1e-3


class SolverError(RuntimeError):
    """Newton failed to converge (after the retry budget)."""

    def __init__(self, msg, level=None, residual=None):
        if level is not None:
            msg = f"level {level}: {msg}"
        super().__init__(msg)
        self.level = level
        self.residual = residual


class CombinatoricsError(SolverError):
    """A root was found but its orbit has the wrong cyclic order."""


# --------------------------------------------------------------------------
# families in the solver's coordinates: P = (Re param, Im param)

class _Unicritical:
    kind = "unicritical"

    def __init__(self, d0: int, dinf: int):
        self.d0, self.dinf = d0, dinf
        inum, iden = unicritical_coefficients(d0, dinf)
        self.num = np.array(inum, float)
        self.den = np.array(iden, float)
        self.dnum = np.polynomial.polynomial.polyder(self.num)
        self.dden = np.polynomial.polynomial.polyder(self.den)

    @property
    def degree(self):
        return self.d0 + self.dinf - 1

    def descriptor(self) -> dict:
        return {"kind": self.kind, "d0": self.d0, "dinf": self.dinf}

    def G(self, z):
        pv = np.polynomial.polynomial.polyval
        return pv(z, self.num) / pv(z, self.den)

    def Gp(self, z):
        pv = np.polynomial.polynomial.polyval
        n, d = pv(z, self.num), pv(z, self.den)
        return (pv(z, self.dnum) * d - n * pv(z, self.dden)) / (d * d)

    def f(self, z, P):
        return complex(P[0], P[1]) * self.G(z)

    def fp(self, z, P):
        return complex(P[0], P[1]) * self.Gp(z)

    def crit(self, P, ref=None):
        return 1.0 + 0j

    def dE_dP(self, P, z, omega):
        prev = np.concatenate([[omega], z])
        g = self.G(prev)
        return -g, -1j * g

    def param(self, P) -> complex:
        return complex(P[0], P[1])

    def rmap(self, P) -> RationalMap:
        return make_unicritical(self.d0, self.dinf, self.param(P))

    def normalize(self, P, z, omega):
        return P, z, omega

    def steps(self, Q: int) -> int:
        return Q

    def closure(self, omega):
        return omega

    def full_orbit(self, omega, z, Q):
        return np.concatenate([[omega], z])

    def shooting_points(self, full, Q):
        return full[1:]


class _BBM:
    kind = "bbm"
    degree = 3

    def __init__(self, h: float = 1e-7):
        self.h = h

    def descriptor(self) -> dict:
        return {"kind": self.kind}

    def f(self, z, P):
        q = complex(P[0], P[1])
        return z * z * (q - z) / (1 + np.conj(q) * z)

    def fp(self, z, P):
        q = complex(P[0], P[1])
        qb = np.conj(q)
        D = 1 + qb * z
        return ((2 * q * z - 3 * z * z) * D - z * z * (q - z) * qb) / (D * D)

    def crit(self, P, ref=None):
        q = complex(P[0], P[1])
        if not np.isfinite(q) or q == 0:
            return complex(np.nan, np.nan)
        r = bbm_critical_points(q)
        if ref is None:
            return complex(r[np.argmin(np.abs(r))])
        return complex(r[np.argmin(np.abs(r - ref))])

    def dE_dP(self, P, z, omega):
        # f depends on conj(q): central differences in the two real directions
        cols = []
        for j in range(2):
            dP = np.zeros(2)
            dP[j] = self.h
            Ep = _residual(self, P + dP, z, self.crit(P + dP, omega))
            Em = _residual(self, P - dP, z, self.crit(P - dP, omega))
            cols.append((Ep - Em) / (2 * self.h))
        return cols[0], cols[1]

    def param(self, P) -> complex:
        return complex(P[0], P[1])

    def rmap(self, P) -> RationalMap:
        return make_bbm(self.param(P))

    def normalize(self, P, z, omega):
        # f_{-q}(z) = -f_q(-z): keep Im q > 0
        if P[1] < 0:
            return -P, -z, -omega
        return P, z, omega

    def steps(self, Q: int) -> int:
        # the orbit meets the antipodal critical point after half a period
        return Q // 2

    def closure(self, omega):
        return antipode(omega)

    def full_orbit(self, omega, z, Q):
        half = np.concatenate([[omega], z])
        return np.concatenate([half, antipode(half)])

    def shooting_points(self, full, Q):
        return full[1:Q // 2]


def _residual(fam, P, z, omega):
    prev = np.concatenate([[omega], z])
    with np.errstate(all="ignore"):
        nxt = np.concatenate([z, [fam.closure(omega)]])
        return nxt - fam.f(prev, P)


# --------------------------------------------------------------------------
# multiple-shooting Newton

@dataclass
class NewtonResult:
    P: np.ndarray
    z: np.ndarray
    omega: complex
    residual: float
    iterations: int
    ok: bool
    history: list = field(default_factory=list)


def _jacobian(fam, P, z, omega):
    Q = len(z) + 1
    n = 2 * Q
    rows, cols, vals = [], [], []

    def blocks(eq, var, a):
        r0, c0 = 2 * eq, 2 + 2 * var
        rows.extend([r0, r0, r0 + 1, r0 + 1])
        cols.extend([c0, c0 + 1, c0, c0 + 1])
        vals.extend([a.real, -a.imag, a.imag, a.real])

    if Q > 1:
        k = np.arange(Q - 1)
        one = np.ones(Q - 1, complex)
        blocks(k, k, one)
        a = -fam.fp(z, P)
        blocks(k + 1, k, a)
    d0, d1 = fam.dE_dP(P, z, omega)
    e = np.arange(Q)
    for j, d in enumerate((d0, d1)):
        rows.extend([2 * e, 2 * e + 1])
        cols.extend([np.full(Q, j), np.full(Q, j)])
        vals.extend([d.real, d.imag])
    R = np.concatenate([np.atleast_1d(np.asarray(x)).ravel() for x in rows])
    C = np.concatenate([np.atleast_1d(np.asarray(x)).ravel() for x in cols])
    V = np.concatenate([np.atleast_1d(np.asarray(x, float)).ravel() for x in vals])
    return sp.csc_matrix((V, (R, C)), shape=(n, n))


def shooting_newton(fam, P, z, omega_ref=None, tol: float = 1e-12, maxit: int = 60) -> NewtonResult:
    """Solve the closed multiple-shooting system from the given seed."""
    P = np.array(P, float)
    z = np.array(z, complex)
    omega = fam.crit(P, omega_ref)
    E = _residual(fam, P, z, omega)
    nE = np.linalg.norm(E)
    hist = []
    for it in range(maxit + 1):
        scale = max(1.0, float(np.max(np.abs(z)))) if len(z) else 1.0
        emax = float(np.max(np.abs(E))) if np.all(np.isfinite(E)) else np.inf
        hist.append(emax)
        if emax < tol * scale:
            return NewtonResult(P, z, omega, emax, it, True, hist)
        if it == maxit or not np.isfinite(emax):
            break
        J = _jacobian(fam, P, z, omega)
        rhs = np.empty(2 * len(E))
        rhs[0::2] = -E.real
        rhs[1::2] = -E.imag
        with np.errstate(all="ignore"):
            try:
                dx = spla.spsolve(J, rhs)
            except RuntimeError:
                break
        if not np.all(np.isfinite(dx)):
            break
        lam = 1.0
        while lam > 1e-6:
            P2 = P + lam * dx[:2]
            z2 = z + lam * (dx[2::2] + 1j * dx[3::2])
            om2 = fam.crit(P2, omega)
            E2 = _residual(fam, P2, z2, om2)
            n2 = np.linalg.norm(E2)
            if np.isfinite(n2) and n2 < (1 - 1e-4 * lam) * nE:
                break
            lam *= 0.5
        else:
            # no decrease: either converged to rounding level or stuck
            emax = float(np.max(np.abs(E)))
            ok = emax < 1e3 * tol * scale
            return NewtonResult(P, z, omega, emax, it, ok, hist)
        P, z, omega, E, nE = P2, z2, om2, E2, n2
    emax = float(np.max(np.abs(E))) if np.all(np.isfinite(E)) else np.inf
    return NewtonResult(P, z, omega, emax, maxit, False, hist)


# --------------------------------------------------------------------------
# seeds and validation

def _angle_index(p: int, Q: int) -> np.ndarray:
    """Orbit index of the point with combinatorial angle j/Q, j = 0..Q-1."""
    if Q == 1:
        return np.zeros(1, int)
    inv = pow(p % Q, -1, Q)
    return (np.arange(Q) * inv) % Q


def circle_seed(p: int, Q: int, r: float) -> tuple[np.ndarray, np.ndarray]:
    """Parameter and orbit seed on the circle of radius r (unicritical)."""
    z = r * np.exp(2j * np.pi * np.arange(1, Q) * p / Q)
    c0 = r * np.exp(2j * np.pi * p / Q)
    return np.array([c0.real, c0.imag]), z


def interp_seed(full: np.ndarray, p: int, Q: int, p2: int, Q2: int) -> np.ndarray:
    """Interpolate a closed orbit (in polar form) to the orbit of rotation p2/Q2.

    ``full`` holds z_0..z_{Q-1}; the result holds Q2 points with angle kp2/Q2.
    """
    ang = (np.arange(Q) * p % Q) / Q
    o = np.argsort(ang)
    a = ang[o]
    pts = full[o]
    ph = np.unwrap(np.angle(pts)) / (2 * np.pi)
    ph0 = ph[0]
    ph -= ph0
    lr = np.log(np.abs(pts))
    a = np.append(a, 1.0)
    ph = np.append(ph, 1.0)
    lr = np.append(lr, lr[0])
    t = (np.arange(Q2) * p2 % Q2) / Q2
    return np.exp(np.interp(t, a, lr) + 2j * np.pi * (np.interp(t, a, ph) + ph0))


def angular_order_ok(full: np.ndarray, p: int, Q: int) -> bool:
    """Sorted by argument around 0 (starting at z_0) the points realize rotation by p/Q."""
    if not np.all(np.isfinite(full)) or np.any(full == 0):
        return False
    rel = np.angle(full / full[0]) % (2 * np.pi)
    rel[0] = 0.0
    o = np.argsort(rel, kind="stable")
    if Q > 1 and np.min(np.diff(np.append(rel[o], 2 * np.pi))) < 1e-12:
        return False  # coincident points: a lower period in disguise
    return bool(np.array_equal(o, _angle_index(p, Q)))


def jordan_check(full: np.ndarray, p: int, Q: int) -> tuple[bool, int]:
    """(simple, winding) of the closed polyline through the orbit in angle order."""
    from shapely.geometry import LineString

    if Q < 3 or not np.all(np.isfinite(full)) or np.any(full == 0):
        return (Q < 3 and np.all(np.isfinite(full)), 1 if Q < 3 else 0)
    pts = full[_angle_index(p, Q)]
    pts = np.append(pts, pts[0])
    if np.min(np.abs(np.diff(pts))) < 1e-12 * np.max(np.abs(pts)):
        return False, 0
    simple = LineString(np.column_stack([pts.real, pts.imag])).is_simple
    w = int(round(np.sum(np.angle(pts[1:] / pts[:-1])) / (2 * np.pi)))
    return bool(simple), w


def _valid(fam, res: NewtonResult, p: int, Q: int, mode: str) -> str | None:
    """Name of the passing test, or None."""
    if not res.ok:
        return None
    full = fam.full_orbit(res.omega, res.z, Q)
    if mode in ("angular", "either") and angular_order_ok(full, p, Q):
        return "angular"
    if mode in ("jordan", "either"):
        if Q < 3:
            ok = np.all(np.isfinite(full)) and (Q < 2 or abs(full[1] - full[0]) > 1e-9)
            return "jordan" if ok else None
        if jordan_check(full, p, Q) == (True, 1):
            return "jordan"
    return None


# --------------------------------------------------------------------------
# results

@dataclass
class LevelRecord:
    n: int
    p: int
    q: int
    parameter: complex
    iterations: int
    shooting_residual: float
    validation: str
    seconds: float


@dataclass
class HermanCandidate:
    """A solved parameter with its critical orbit and residual history."""

    family: dict
    parameter: complex
    theta: ContinuedFraction
    depth: int
    residuals: list
    orbit: OrbitTrace
    levels: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    periodic_orbit: np.ndarray | None = field(default=None, repr=False)

    @property
    def critical_point(self) -> complex:
        return complex(self.orbit.values[0])

    @property
    def degree(self) -> int:
        k = self.family["kind"]
        if k == "unicritical":
            return self.family["d0"] + self.family["dinf"] - 1
        if k == "bbm":
            return 3
        if k == "blaschke":
            return 2 * self.family["d"] - 1
        return 1

    @property
    def local_degree(self) -> int:
        """Local degree of the map at the tracked free critical point."""
        k = self.family["kind"]
        if k == "unicritical":
            return self.family["d0"] + self.family["dinf"] - 1
        if k == "blaschke":
            return 2 * self.family["d"] - 1
        if k == "bbm":
            return 2
        return 1

    def rmap(self) -> RationalMap:
        return family_map(self.family, self.parameter)

    @property
    def drifts(self) -> list[float]:
        ps = [r.parameter for r in self.levels]
        return [abs(b - a) for a, b in zip(ps, ps[1:])]

    def with_parameter(self, c: complex, orbit_length: int | None = None) -> "HermanCandidate":
        """The same family and theta at another parameter (orbit recomputed)."""
        L = orbit_length or len(self.orbit.values) - 1
        f = family_map(self.family, c)
        omega = _free_critical_point(self.family, c, self.critical_point)
        orb = forward_orbit(f, omega, L)
        tab = convergents(self.theta, self.depth)
        return HermanCandidate(dict(self.family), complex(c), self.theta, self.depth,
                               _level_residuals(orb, tab.q), OrbitTrace(orb), [], ["perturbed"])

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "parameter": [self.parameter.real, self.parameter.imag],
            "theta": self.theta.to_string(),
            "depth": self.depth,
            "residuals": list(map(float, self.residuals)),
            "orbit_length": len(self.orbit.values),
            "critical_point": [self.critical_point.real, self.critical_point.imag],
            "levels": [
                {"n": r.n, "p": r.p, "q": r.q, "parameter": [r.parameter.real, r.parameter.imag],
                 "iterations": r.iterations, "shooting_residual": r.shooting_residual,
                 "validation": r.validation}
                for r in self.levels
            ],
            "flags": list(self.flags),
            "periodic_orbit": None if self.periodic_orbit is None else
            [[float(z.real), float(z.imag)] for z in self.periodic_orbit],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "HermanCandidate":
        """Rebuild a candidate; the orbit is recomputed from the stored parameter."""
        fam = dict(doc["family"])
        c = complex(*doc["parameter"])
        theta = ContinuedFraction.parse(doc["theta"])
        depth = int(doc["depth"])
        omega = complex(*doc["critical_point"]) if "critical_point" in doc else None
        f = family_map(fam, c)
        omega = _free_critical_point(fam, c, omega)
        L = int(doc.get("orbit_length", 0)) - 1
        tab = convergents(theta, depth)
        if L <= 0:
            L = 3 * tab.q[-1]
        orb = forward_orbit(f, omega, L)
        levels = [LevelRecord(r["n"], r["p"], r["q"], complex(*r["parameter"]), r["iterations"],
                              r["shooting_residual"], r["validation"], r.get("seconds", 0.0))
                  for r in doc.get("levels", [])]
        per = doc.get("periodic_orbit")
        per = None if per is None else np.array([complex(a, b) for a, b in per])
        return cls(fam, c, theta, depth, _level_residuals(orb, tab.q), OrbitTrace(orb), levels,
                   list(doc.get("flags", [])), per)


def family_map(family: dict, c: complex) -> RationalMap:
    k = family["kind"]
    if k == "unicritical":
        return make_unicritical(family["d0"], family["dinf"], c)
    if k == "bbm":
        return make_bbm(c)
    if k == "rotation":
        return make_rotation(family["theta"])
    if k == "blaschke":
        from .rmap import make_blaschke
        return make_blaschke(family["d"], c / abs(c))
    raise ValueError(f"unknown family {k!r}")


def _free_critical_point(family: dict, c: complex, ref=None) -> complex:
    if family["kind"] == "bbm":
        return _BBM().crit(np.array([c.real, c.imag]), ref)
    return 1.0 + 0j


def forward_orbit(f: RationalMap, z0: complex, n: int) -> np.ndarray:
    """z_0..z_n by plain iteration (finite orbits; Horner in Python complex)."""
    num = [complex(a) for a in f.num[::-1]]
    den = [complex(a) for a in f.den[::-1]]
    out = np.empty(n + 1, complex)
    z = complex(z0)
    out[0] = z
    for k in range(1, n + 1):
        a = 0j
        for co in num:
            a = a * z + co
        b = 0j
        for co in den:
            b = b * z + co
        z = a / b
        out[k] = z
    return out


def _level_residuals(orb: np.ndarray, qs) -> list[float]:
    om = orb[0]
    return [float(abs(orb[q] - om)) if q < len(orb) else float("nan") for q in qs[1:]]


# --------------------------------------------------------------------------
# single level

def _solve_level(fam, P, z, ref, p, Q, tol, mode, rng, retries=RETRIES):
    """Newton from a seed, with perturbed restarts; returns (result, test) or raises."""
    last = None
    for attempt in range(retries + 1):
        if attempt == 0:
            P0, z0 = P, z
        else:
            P0 = P * (1 + RETRY_SCALE * rng.standard_normal(2))
            z0 = z * (1 + RETRY_SCALE * (rng.standard_normal(len(z)) + 1j * rng.standard_normal(len(z))))
        res = shooting_newton(fam, P0, z0, ref, tol)
        last = res
        if not res.ok:
            continue
        test = _valid(fam, res, p, Q, mode)
        if test is not None:
            return res, test
    if last is not None and last.ok:
        raise CombinatoricsError(f"orbit of the root does not realize rotation by {p}/{Q}",
                                 residual=last.residual)
    raise SolverError(f"Newton diverged for {p}/{Q}", residual=None if last is None else last.residual)


def single_shooting_polish(d0: int, dinf: int, c: complex, q: int, steps: int = 3,
                           dps: int | None = None) -> tuple[complex, float, float]:
    """Newton on g(c) = F_c^q(1) - 1 with the derivative from orbit sensitivities.

    Returns (c, |g|, |g/g'|).  With ``dps`` the iteration runs in mpmath.
    """
    inum, iden = unicritical_coefficients(d0, dinf)
    num = list(reversed(inum))
    den = list(reversed(iden))
    dnum = [a * (len(num) - 1 - i) for i, a in enumerate(num[:-1])]
    dden = [a * (len(den) - 1 - i) for i, a in enumerate(den[:-1])]

    def run(c, one, zero):
        z, w = one, zero
        for _ in range(q):
            a = b = da = db = zero
            for co in num:
                a = a * z + co
            for co in den:
                b = b * z + co
            for co in dnum:
                da = da * z + co
            for co in dden:
                db = db * z + co
            g = a / b
            gp = (da * b - a * db) / (b * b)
            w = g + c * gp * w
            z = c * g
        return z - one, w

    if dps is None:
        g, w = run(c, 1 + 0j, 0j)
        best = (c, abs(g), abs(g / w))
        for _ in range(steps):
            c2 = c - g / w
            g2, w2 = run(c2, 1 + 0j, 0j)
            if not np.isfinite(g2) or abs(g2) >= best[1] and abs(g2 / w2) >= best[2]:
                break
            c, g, w = c2, g2, w2
            best = (c, abs(g), abs(g / w))
        return best
    with mpmath.workdps(dps):
        cm = mpmath.mpc(c)
        one, zero = mpmath.mpc(1), mpmath.mpc(0)
        num = [mpmath.mpf(a) for a in num]
        den = [mpmath.mpf(a) for a in den]
        dnum = [mpmath.mpf(a) for a in dnum]
        dden = [mpmath.mpf(a) for a in dden]
        g, w = run(cm, one, zero)
        for _ in range(max(steps, 8)):
            step = g / w
            cm -= step
            g, w = run(cm, one, zero)
            if abs(step) < mpmath.mpf(10) ** (-dps + 5):
                break
        return complex(cm), float(abs(g)), float(abs(g / w))


def solve_periodic_parameter(d0: int, dinf: int, p_over_q, seed: complex, tol: float = 1e-12,
                             validation: str = "angular", seed_orbit: np.ndarray | None = None) -> complex:
    """c with F_c^q(1) = 1 whose orbit realizes rotation by p/q.

    ``p_over_q`` is a Fraction (or anything Fraction accepts) or a pair (p, q).
    """
    if isinstance(p_over_q, tuple):
        p, q = map(int, p_over_q)
    else:
        fr = Fraction(p_over_q)
        p, q = fr.numerator, fr.denominator
    if q < 1 or gcd(p, q) != 1:
        raise ValueError("p/q must be reduced")
    if seed == 0:
        raise ValueError("seed must be nonzero")
    fam = _Unicritical(d0, dinf)
    if q == 1:
        return 1.0 + 0j
    p %= q
    rng = np.random.default_rng(0)
    P = np.array([seed.real, seed.imag])
    seeds = []
    if seed_orbit is not None:
        seeds.append(np.asarray(seed_orbit, complex))
    orb = forward_orbit(make_unicritical(d0, dinf, seed), 1.0, q - 1)[1:]
    if np.all(np.isfinite(orb)):
        seeds.append(orb)
    seeds.append(circle_seed(p, q, abs(seed))[1])
    err = None
    for z in seeds:
        try:
            res, _ = _solve_level(fam, P, z, None, p, q, tol, validation, rng)
        except SolverError as exc:
            err = exc
            continue
        c = fam.param(res.P)
        c2, g, _ = single_shooting_polish(d0, dinf, c, q)
        return c2 if g <= tol or abs(c2 - c) < 1e-10 else c
    raise err


# --------------------------------------------------------------------------
# continuation

def _levels(theta: ContinuedFraction, depth: int):
    tab = convergents(theta, depth)
    return [(n, tab.p[n] % tab.q[n] if tab.q[n] > 1 else 0, tab.q[n]) for n in range(1, depth + 1)], tab


def _continue_chain(fam, start, levels, tol, mode, rng, retries=RETRIES):
    """Follow a solved state (P, z, omega, p, Q) through the given levels."""
    P, z, om, p, Q = start
    out = []
    for n, p2, Q2 in levels:
        t0 = time.perf_counter()
        full = fam.full_orbit(om, z, Q)
        s = fam.shooting_points(interp_seed(full, p, Q, p2, Q2), Q2)
        res, test = _solve_level(fam, P, s, om, p2, Q2, tol, mode, rng, retries)
        res.P, res.z, res.omega = fam.normalize(res.P, res.z, res.omega)
        out.append((n, p2, Q2, res, test, time.perf_counter() - t0))
        P, z, om, p, Q = res.P, res.z, res.omega, p2, Q2
    return out


def _lookahead_select(fam, roots, p, Q, ahead, tol, mode, rng):
    """Pick the root whose continuation over ``ahead`` levels drifts least."""
    best, best_score = None, np.inf
    for res in roots:
        try:
            chain = _continue_chain(fam, (res.P, res.z, res.omega, p, Q), ahead, tol, mode, rng, retries=1)
        except SolverError:
            continue
        pars = [fam.param(res.P)] + [fam.param(c[3].P) for c in chain]
        drift = np.abs(np.diff(pars))
        score = drift[-1] if len(drift) else 0.0
        if len(drift) >= 2 and drift[-1] > drift[-2]:
            score += 1.0  # growing drift: wrong branch
        if score < best_score:
            best, best_score = res, score
    return best


def _multistart(fam, p, Q, starts, tol, mode):
    roots = []
    for P, z in starts:
        res = shooting_newton(fam, P, z, None, tol)
        if not res.ok:
            continue
        res.P, res.z, res.omega = fam.normalize(res.P, res.z, res.omega)
        if _valid(fam, res, p, Q, mode) is None:
            continue
        par = fam.param(res.P)
        if all(abs(par - fam.param(r.P)) > 1e-6 * max(1, abs(par)) for r in roots):
            roots.append(res)
    return roots


def _unicritical_starts(fam, p, Q):
    r0 = fam.d0 / fam.dinf
    out = []
    for r in (r0, 0.25, 0.5, 1.0, 2.0, 4.0):
        for a in np.arange(24) / 24:
            c0 = r * np.exp(2j * np.pi * a)
            z = forward_orbit(make_unicritical(fam.d0, fam.dinf, c0), 1.0, Q - 1)[1:]
            if np.all(np.isfinite(z)) and np.max(np.abs(z)) < 1e6:
                out.append((np.array([c0.real, c0.imag]), z))
            out.append((np.array([c0.real, c0.imag]), circle_seed(p, Q, r)[1]))
    return out


def _finish(fam, theta, depth, records, final, flags, tab, orbit_factor=3):
    n, p, Q, res, test, secs = final
    c = fam.param(res.P)
    f = fam.rmap(res.P)
    L = orbit_factor * tab.q[depth]
    orb = forward_orbit(f, res.omega, L)
    full = fam.full_orbit(res.omega, res.z, Q)
    drifts = [abs(b.parameter - a.parameter) for a, b in zip(records, records[1:])]
    tail = [d for r, d in zip(records[1:], drifts) if r.n >= 4]
    if any(b > a for a, b in zip(tail, tail[1:])):
        flags.append("drift-not-monotone")
    cand = HermanCandidate(fam.descriptor(), c, theta, depth, _level_residuals(orb, tab.q),
                           OrbitTrace(orb), records, flags, full)
    return cand


def solve_herman_parameter(d0: int, dinf: int, theta: ContinuedFraction, depth: int = 16,
                           tol: float = 1e-12, precision: str = "double",
                           validation: str = "angular") -> HermanCandidate:
    """Continue the periodic parameters at p_n/q_n, n = 1..depth."""
    if depth < 4:
        raise ValueError("depth must be >= 4")
    fam = _Unicritical(d0, dinf)
    levels, tab = _levels(theta, depth)
    rng = np.random.default_rng(12345)
    flags: list[str] = []

    def run(multistart):
        recs, last = [], None
        state = None
        for k, (n, p, Q) in enumerate(levels):
            t0 = time.perf_counter()
            if Q == 1:
                res = NewtonResult(np.array([1.0, 0.0]), np.zeros(0, complex), 1 + 0j, 0.0, 0, True)
                rec = (n, 0, 1, res, "trivial", 0.0)
            elif state is None or state[4] < 2:
                if multistart:
                    roots = _multistart(fam, p, Q, _unicritical_starts(fam, p, Q), tol, validation)
                    ahead = levels[k + 1:k + 3]
                    res = _lookahead_select(fam, roots, p, Q, ahead, tol, validation, rng)
                    if res is None:
                        raise SolverError("no valid root in the multi-start", level=n)
                    test = _valid(fam, res, p, Q, validation)
                else:
                    P0, z0 = circle_seed(p, Q, d0 / dinf)
                    try:
                        res, test = _solve_level(fam, P0, z0, None, p, Q, tol, validation, rng)
                    except SolverError as exc:
                        raise type(exc)(str(exc), level=n, residual=exc.residual) from exc
                rec = (n, p, Q, res, test, time.perf_counter() - t0)
            else:
                try:
                    rec = _continue_chain(fam, state, [(n, p, Q)], tol, validation, rng)[0]
                except SolverError as exc:
                    raise type(exc)(str(exc), level=n, residual=exc.residual) from exc
            n_, p_, Q_, res, test, secs = rec
            recs.append(LevelRecord(n_, p_, Q_, fam.param(res.P), res.iterations, res.residual, test, secs))
            state = (res.P, res.z, res.omega, p_, Q_)
            last = rec
        return recs, last

    try:
        records, last = run(False)
    except SolverError as exc:
        log.info("circle-seeded continuation failed (%s); trying multi-start", exc)
        flags.append("multistart")
        records, last = run(True)

    n, p, Q, res, test, secs = last
    if precision == "extended" or Q > 1:
        c = fam.param(res.P)
        c2, g, step = single_shooting_polish(d0, dinf, c, Q, dps=40 if precision == "extended" else None)
        if abs(c2 - c) < 1e-6:
            res.P = np.array([c2.real, c2.imag])
            records[-1].parameter = c2
        if g > tol:
            flags.append("residual-floor")
    return _finish(fam, theta, depth, records, last, flags, tab)


def solve_bbm_parameter(theta: ContinuedFraction, depth: int = 14, tol: float = 1e-12,
                        fd_step: float = 1e-7, start_q: int = 8, validation: str = "jordan") -> HermanCandidate:
    """q with an invariant curve of rotation number theta for z^2 (q - z)/(1 + conj(q) z).

    Only convergents with even q_n are used: the antipode acts as the half turn
    on the curve, which a periodic orbit can only realize for even period.
    """
    if depth < 4:
        raise ValueError("depth must be >= 4")
    fam = _BBM(fd_step)
    lev_all, tab = _levels(theta, depth + 9)
    even = [(n, p, Q) for n, p, Q in lev_all if Q % 2 == 0 and Q >= start_q]
    use = [x for x in even if x[0] <= depth]
    if not use:
        raise SolverError(f"no even convergent denominator >= {start_q} up to depth {depth}")
    rng = np.random.default_rng(2024)
    n0, p0, Q0 = use[0]
    starts = []
    for r in (1.0, 2.0, 3.0, 4.0):
        for a in np.arange(24) / 24:
            q0 = r * np.exp(2j * np.pi * a)
            P = np.array([q0.real, q0.imag])
            om = fam.crit(P)
            for rad in (1.0, abs(om)):
                z = rad * np.exp(1j * np.angle(om)) * np.exp(2j * np.pi * np.arange(1, Q0 // 2) * p0 / Q0)
                starts.append((P, z))
    roots = _multistart(fam, p0, Q0, starts, tol, validation)
    if not roots:
        raise SolverError("no valid root in the multi-start", level=n0)
    ahead = [x for x in even if x[0] > n0][:2]
    t0 = time.perf_counter()
    res = _lookahead_select(fam, roots, p0, Q0, ahead, tol, validation, rng)
    if res is None:
        raise SolverError("no root survives continuation", level=n0)
    first = (n0, p0, Q0, res, _valid(fam, res, p0, Q0, validation), time.perf_counter() - t0)
    chain = [first]
    state = (res.P, res.z, res.omega, p0, Q0)
    for lev in use[1:]:
        try:
            rec = _continue_chain(fam, state, [lev], tol, validation, rng)[0]
        except SolverError:
            # fall back to the iterated-map seed at the new parameter
            n, p, Q = lev
            f = fam.rmap(state[0])
            z = forward_orbit(f, state[2], Q // 2 - 1)[1:]
            try:
                r2, test = _solve_level(fam, state[0], z, state[2], p, Q, tol, validation, rng)
            except SolverError as exc:
                raise type(exc)(str(exc), level=n, residual=exc.residual) from exc
            rec = (n, p, Q, r2, test, 0.0)
        chain.append(rec)
        r = rec[3]
        state = (r.P, r.z, r.omega, rec[1], rec[2])
    records = [LevelRecord(n, p, Q, fam.param(r.P), r.iterations, r.residual, t, s)
               for n, p, Q, r, t, s in chain]
    last = chain[-1]
    dtab = convergents(theta, last[0])
    cand = _finish(fam, theta, last[0], records, last, [], dtab)
    return cand


def rotation_candidate(theta: ContinuedFraction, depth: int = 12, orbit_factor: int = 3) -> HermanCandidate:
    """The rigid rotation by theta viewed as a candidate (orbit of 1)."""
    tab = convergents(theta, depth)
    L = orbit_factor * tab.q[depth]
    with mpmath.workprec(200):
        th = theta.value
        ang = [float(mpmath.frac(j * th)) for j in range(L + 1)]
    orb = np.exp(2j * np.pi * np.array(ang))
    fam = {"kind": "rotation", "theta": float(theta.value)}
    return HermanCandidate(fam, 1 + 0j, theta, depth, _level_residuals(orb, tab.q), OrbitTrace(orb))


# --------------------------------------------------------------------------
# verification and combinatorics

@dataclass
class VerificationReport:
    levels: int
    horizon: int
    residuals: list
    residual_decreasing: bool
    cyclic_order: list
    jordan_simple: bool
    winding: int
    passed: bool
    failures: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in
                ("levels", "horizon", "residuals", "residual_decreasing", "cyclic_order",
                 "jordan_simple", "winding", "passed", "failures")}


def precision_horizon(cand: HermanCandidate) -> int:
    """Last level whose closest return is resolved by the candidate.

    At the solved depth N the orbit closes up (residual near 0); levels well
    below N see the true closest returns.  We stop where the per-level
    residual ratio departs from its running behaviour.
    """
    r = np.array(cand.residuals)
    N = len(r)
    if cand.family["kind"] == "rotation":
        return N
    h = max(1, N - 3)
    return min(h, N)


def verify_herman_candidate(cand: HermanCandidate, levels: int) -> VerificationReport:
    tab = convergents(cand.theta, max(levels, 1))
    horizon = min(levels, precision_horizon(cand))
    res = [float(x) for x in cand.residuals[:horizon]]
    failures = []
    dec = True
    # residuals are indexed from level 1.  Consecutive closest returns lie on
    # opposite sides of the critical point; for the two-critical-point family
    # only returns on the same side (two levels apart) are compared.
    lag = 2 if cand.family["kind"] == "bbm" else 1
    for n in range(1 + lag, len(res)):
        if res[n] > res[n - lag] * (1 + 1e-9):
            dec = False
            failures.append(f"residual increases at level {n + 1}")
            break
    orders = []
    orb = cand.orbit.values
    kind = cand.family["kind"]
    for n in range(1, horizon + 1):
        Q = tab.q[n]
        if Q > len(orb):
            break
        full = orb[:Q]
        if kind == "bbm":
            ok = Q < 3 or jordan_check(full, tab.p[n] % Q, Q) == (True, 1)
        else:
            ok = Q < 2 or angular_order_ok(full, tab.p[n] % Q, Q)
        orders.append(bool(ok))
        if not ok:
            failures.append(f"cyclic order fails at level {n}")
    Q = tab.q[horizon]
    curve = orb[:Q]
    simple, wind = jordan_check(curve, tab.p[horizon] % Q, Q) if Q >= 3 else (True, 1)
    if not simple:
        failures.append("orbit polyline self-intersects")
    if wind != 1:
        failures.append(f"winding number {wind} around 0")
    passed = dec and all(orders) and simple and wind == 1
    return VerificationReport(levels, horizon, res, dec, orders, simple, wind, passed, failures)


@dataclass(frozen=True)
class Combinatorics:
    """Angles of inner and outer critical points, modulo a common rotation."""

    inner: tuple
    outer: tuple

    def canonical(self) -> "Combinatorics":
        allang = [a % 1.0 for a in self.inner + self.outer]
        best = None
        for s in allang:
            inn = tuple(sorted(_wrap(a - s) for a in self.inner))
            out = tuple(sorted(_wrap(a - s) for a in self.outer))
            key = (inn, out)
            if best is None or key < best:
                best = key
        return Combinatorics(*best)

    def isclose(self, other: "Combinatorics", tol: float = 1e-3) -> bool:
        a, b = self.canonical(), other.canonical()
        if len(a.inner) != len(b.inner) or len(a.outer) != len(b.outer):
            return False
        d = [abs(_wrap(x - y + 0.5) - 0.5) for x, y in zip(a.inner + a.outer, b.inner + b.outer)]
        return max(d, default=0.0) < tol

    def rotated(self, s: float) -> "Combinatorics":
        return Combinatorics(tuple(_wrap(a + s) for a in self.inner),
                             tuple(_wrap(a + s) for a in self.outer))

    def __eq__(self, other):
        if not isinstance(other, Combinatorics):
            return NotImplemented
        return self.isclose(other, 1e-9)

    def __hash__(self):
        c = self.canonical()
        return hash((tuple(round(a, 6) for a in c.inner), tuple(round(a, 6) for a in c.outer)))


def _wrap(a: float) -> float:
    a = a % 1.0
    return 0.0 if a > 1 - 1e-12 else a


def compute_combinatorics(cand: HermanCandidate, tol: float = 0.05) -> Combinatorics:
    """Read off comb(f) from the orbit-ordered curve."""
    kind = cand.family["kind"]
    if kind == "unicritical":
        d0, dinf = cand.family["d0"], cand.family["dinf"]
        return Combinatorics((0.0,) * (d0 - 1), (0.0,) * (dinf - 1))
    if kind == "rotation":
        return Combinatorics((), ())
    if kind != "bbm":
        raise ValueError(f"no combinatorics for family {kind!r}")
    from shapely.geometry import Point, Polygon

    f = cand.rmap()
    om = cand.critical_point
    crits = bbm_critical_points(cand.parameter)
    other = complex(crits[np.argmax(np.abs(crits - om))])
    tab = convergents(cand.theta, precision_horizon(cand))
    Q = tab.q[-1]
    ang = np.array([float(mpmath.frac(j * cand.theta.value)) for j in range(Q)])
    o = np.argsort(ang)
    a_sorted, pts = ang[o], cand.orbit.values[:Q][o]
    # locate the second critical point on the polyline
    closed = np.append(pts, pts[0])
    seg = closed[1:] - closed[:-1]
    t = np.clip(((other - closed[:-1]) * np.conj(seg)).real / np.maximum(np.abs(seg) ** 2, 1e-300), 0, 1)
    proj = closed[:-1] + t * seg
    k = int(np.argmin(np.abs(proj - other)))
    dist = abs(proj[k] - other)
    scale = np.max(np.abs(seg))
    if dist > max(tol * np.max(np.abs(pts)), 5 * scale):
        raise ValueError(f"critical point {other} not on the curve (distance {dist:.3g})")
    a_next = a_sorted[k + 1] if k + 1 < Q else 1.0
    angle = a_sorted[k] + t[k] * (a_next - a_sorted[k])
    poly = Polygon(np.column_stack([pts.real, pts.imag]))

    def side(c):
        # inner: near c, some points inside the curve map outside it
        r = 0.2 * scale + 1e-3 * abs(c)
        zz = c + r * np.exp(2j * np.pi * np.arange(256) / 256)
        fz = f(zz)
        ins = np.array([poly.contains(Point(x.real, x.imag)) for x in zz])
        fins = np.array([poly.contains(Point(x.real, x.imag)) for x in fz])
        inner_votes = np.sum(ins & ~fins)
        outer_votes = np.sum(~ins & fins)
        return "inner" if inner_votes >= outer_votes else "outer"

    angles = {"inner": [], "outer": []}
    angles[side(om)].append(0.0)
    angles[side(other)].append(float(angle))
    return Combinatorics(tuple(angles["inner"]), tuple(angles["outer"]))
