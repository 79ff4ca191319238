"""Rational maps of the Riemann sphere and the explicit families used here.

Points near infinity are carried in the reciprocal chart w = 1/z.  Family
constructors keep integer coefficient lists next to the complex ones so that
formula identities can be checked exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

_ROOT_TOL = 1e-10


class IndeterminateError(ArithmeticError):
    """0/0 while evaluating a rational map (numerator and denominator share a root)."""


class RootFindingError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# sphere points

@dataclass(frozen=True)
class SpherePoint:
    """A point of the sphere as a value in the z chart or the w = 1/z chart."""

    value: complex
    chart: str = "z"

    def __post_init__(self):
        if self.chart not in ("z", "w"):
            raise ValueError("chart must be 'z' or 'w'")
        object.__setattr__(self, "value", complex(self.value))

    @classmethod
    def from_complex(cls, z: complex) -> "SpherePoint":
        z = complex(z)
        if np.isinf(z.real) or np.isinf(z.imag):
            return INFINITY
        if abs(z) <= 2.0:
            return cls(z, "z")
        return cls(1.0 / z, "w")

    @property
    def is_infinity(self) -> bool:
        return self.chart == "w" and self.value == 0

    def to_complex(self) -> complex:
        if self.chart == "z":
            return self.value
        if self.value == 0:
            return complex(np.inf, 0.0)
        return 1.0 / self.value

    def recip(self) -> complex:
        """The coordinate w = 1/z (0 at infinity)."""
        if self.chart == "w":
            return self.value
        if self.value == 0:
            return complex(np.inf, 0.0)
        return 1.0 / self.value

    def normalized(self) -> "SpherePoint":
        """Move the point into its preferred chart."""
        if self.chart == "z" and abs(self.value) > 2.0:
            return SpherePoint(1.0 / self.value, "w")
        if self.chart == "w" and self.value != 0 and abs(self.value) > 2.0:
            return SpherePoint(1.0 / self.value, "z")
        return self

    def distance(self, other: "SpherePoint") -> float:
        """Chordal distance on the unit sphere."""
        a, b = self.to_complex(), other.to_complex()
        if np.isinf(a) and np.isinf(b):
            return 0.0
        if np.isinf(a):
            return 2.0 / np.sqrt(1 + abs(b) ** 2)
        if np.isinf(b):
            return 2.0 / np.sqrt(1 + abs(a) ** 2)
        return 2 * abs(a - b) / np.sqrt((1 + abs(a) ** 2) * (1 + abs(b) ** 2))


INFINITY = SpherePoint(0j, "w")
ZERO = SpherePoint(0j, "z")


def _as_point(z) -> SpherePoint:
    return z if isinstance(z, SpherePoint) else SpherePoint.from_complex(z)


# --------------------------------------------------------------------------
# rational maps

def _trim(c: np.ndarray, rel: float = 0.0) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    scale = np.max(np.abs(c)) if c.size else 0.0
    n = len(c)
    while n > 1 and abs(c[n - 1]) <= rel * scale:
        n -= 1
    return c[:n]


@dataclass(frozen=True, eq=False)
class RationalMap:
    """f = num/den with coefficient arrays in ascending powers.

    ``scalar``, ``int_num`` and ``int_den`` are set by the family
    constructors: then num = scalar * int_num and den = int_den exactly.
    ``family`` records how the map was built (kind and parameters).
    """

    num: np.ndarray
    den: np.ndarray
    scalar: complex | None = None
    int_num: tuple[int, ...] | None = None
    int_den: tuple[int, ...] | None = None
    family: dict = field(default_factory=dict)

    def __post_init__(self):
        num = _trim(self.num)
        den = _trim(self.den)
        if not np.any(den):
            raise ValueError("denominator is identically zero")
        if not np.any(num):
            raise ValueError("numerator is identically zero")
        num.setflags(write=False)
        den.setflags(write=False)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        d = self.degree
        # reversed, zero-padded coefficients for the chart at infinity
        rnum = np.zeros(d + 1, complex)
        rden = np.zeros(d + 1, complex)
        rnum[d - len(num) + 1:] = num[::-1]
        rden[d - len(den) + 1:] = den[::-1]
        object.__setattr__(self, "_rnum", rnum)
        object.__setattr__(self, "_rden", rden)

    @property
    def degree(self) -> int:
        return max(len(self.num), len(self.den)) - 1

    # evaluation ------------------------------------------------------------
    def _pair(self, p: SpherePoint) -> tuple[complex, complex]:
        if p.chart == "z":
            z = p.value
            return complex(P.polyval(z, self.num)), complex(P.polyval(z, self.den))
        # in the w chart both polynomials are multiplied by w^d
        w = p.value
        return complex(P.polyval(w, self._rnum)), complex(P.polyval(w, self._rden))

    def eval(self, z) -> SpherePoint:
        p = _as_point(z).normalized()
        if p.chart == "z" and abs(p.value) > 1.0:
            p = SpherePoint(1.0 / p.value, "w")
        a, b = self._pair(p)
        if a == 0 and b == 0:
            raise IndeterminateError(f"0/0 at {p.to_complex()}")
        if abs(a) <= 2.0 * abs(b):
            return SpherePoint(a / b, "z")
        return SpherePoint(b / a, "w")

    def __call__(self, z):
        """Vectorized evaluation on complex input; poles give inf."""
        z = np.asarray(z, dtype=complex)
        with np.errstate(all="ignore"):
            big = np.abs(z) > 1.0
            w = np.where(big, 1.0 / np.where(z == 0, 1, z), 0)
            zs = np.where(big, 0, z)
            a = np.where(big, P.polyval(w, self._rnum), P.polyval(zs, self.num))
            b = np.where(big, P.polyval(w, self._rden), P.polyval(zs, self.den))
            out = a / b
            out = np.where(b == 0, complex(np.inf, 0), out)
            out = np.where(np.isinf(z), self._value_at_inf(), out)
        return out if out.ndim else complex(out)

    @property
    def is_infinity_fixed(self) -> bool:
        return len(self.num) > len(self.den)

    def _value_at_inf(self) -> complex:
        a, b = self._rnum[0], self._rden[0]
        if b == 0:
            return complex(np.inf, 0)
        return complex(a / b)

    def derivative(self, z):
        """f'(z) for finite z (vectorized)."""
        z = np.asarray(z, dtype=complex)
        with np.errstate(all="ignore"):
            n = P.polyval(z, self.num)
            dn = P.polyval(z, P.polyder(self.num))
            d = P.polyval(z, self.den)
            dd = P.polyval(z, P.polyder(self.den))
            out = (dn * d - n * dd) / (d * d)
        return out if out.ndim else complex(out)

    # structure ---------------------------------------------------------------
    def critical_polynomial(self) -> np.ndarray:
        w = P.polysub(P.polymul(P.polyder(self.num), self.den),
                      P.polymul(self.num, P.polyder(self.den)))
        return _trim(w, 1e-13)

    def critical_points(self, cluster_tol: float = 0.05) -> list[tuple[SpherePoint, int]]:
        """Critical points with multiplicities (local degree minus one)."""
        d = self.degree
        if d < 2:
            raise ValueError("degree must be at least 2")
        w = self.critical_polynomial()
        finite = _roots_with_multiplicity(w, cluster_tol)
        out = [(SpherePoint.from_complex(r), m) for r, m in finite]
        m_inf = (2 * d - 2) - sum(m for _, m in finite)
        if m_inf > 0:
            out.append((INFINITY, m_inf))
        return out

    def resultant_ok(self, tol: float = 1e-10) -> bool:
        """True when num and den have no common root (up to tol)."""
        rn = np.polynomial.polynomial.polyroots(self.num) if len(self.num) > 1 else []
        scale = np.max(np.abs(self.den))
        for r in rn:
            if abs(P.polyval(r, self.den)) <= tol * scale * max(1.0, abs(r)) ** (len(self.den) - 1):
                return False
        return True

    # serialization -----------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "num": [[float(c.real), float(c.imag)] for c in self.num],
            "den": [[float(c.real), float(c.imag)] for c in self.den],
            "family": _jsonable(self.family),
        }

    @classmethod
    def from_json(cls, doc) -> "RationalMap":
        if isinstance(doc, str):
            doc = json.loads(doc)
        num = np.array([complex(a, b) for a, b in doc["num"]])
        den = np.array([complex(a, b) for a, b in doc["den"]])
        fam = dict(doc.get("family", {}))
        if "c" in fam and isinstance(fam["c"], list):
            fam["c"] = complex(*fam["c"])
        if "q" in fam and isinstance(fam["q"], list):
            fam["q"] = complex(*fam["q"])
        return cls(num, den, family=fam)


def _jsonable(fam: dict) -> dict:
    out = {}
    for k, v in fam.items():
        if isinstance(v, complex):
            out[k] = [v.real, v.imag]
        else:
            out[k] = v
    return out


def _roots_with_multiplicity(w: np.ndarray, tol: float) -> list[tuple[complex, int]]:
    if len(w) <= 1:
        return []
    roots = P.polyroots(w)
    # single-linkage clustering: multiple roots split into tiny rings
    groups: list[list[complex]] = []
    for r in roots:
        for g in groups:
            if min(abs(r - s) for s in g) < tol * max(1.0, abs(r)):
                g.append(r)
                break
        else:
            groups.append([r])
    scale = np.max(np.abs(w))
    out = []
    for g in groups:
        z, res = _polish(w, complex(np.mean(g)), len(g), scale)
        if res <= _ROOT_TOL:
            out.append((z, len(g)))
            continue
        # not a genuine multiple root: keep the members apart
        for r in g:
            z, res = _polish(w, r, 1, scale)
            if res > _ROOT_TOL:
                raise RootFindingError(f"critical point near {z} has residual {res:.3e}")
            out.append((z, 1))
    return out


def _polish(w: np.ndarray, z: complex, m: int, scale: float) -> tuple[complex, float]:
    """Newton on the (m-1)th derivative; returns the root and its scaled residual."""
    dw = P.polyder(w, m - 1) if m > 1 else w
    dw2 = P.polyder(dw)
    for _ in range(3):
        den = P.polyval(z, dw2)
        if den == 0:
            break
        step = P.polyval(z, dw) / den
        if not np.isfinite(step):
            break
        z -= step
        if abs(step) < 1e-15 * max(1.0, abs(z)):
            break
    if abs(z) < 1e-14:
        z = 0j
    return z, abs(P.polyval(z, dw)) / (scale * max(1.0, abs(z)) ** (len(dw) - 1))


# --------------------------------------------------------------------------
# families

def _from_ints(c: complex, inum: Sequence[int], iden: Sequence[int], family: dict) -> RationalMap:
    num = complex(c) * np.array(inum, dtype=complex)
    den = np.array(iden, dtype=complex)
    return RationalMap(num, den, complex(c), tuple(int(v) for v in inum),
                       tuple(int(v) for v in iden), family)


def blaschke_coefficients(d: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Integer numerator/denominator of the degree-(2d-1) Blaschke product."""
    n = 2 * d - 1
    num = [0] * (n + 1)
    den = [0] * d
    for j in range(d):
        num[d + d - 1 - j] = comb(n, j) * (-1) ** j
        den[j] = comb(n, j) * (-1) ** j
    return tuple(num), tuple(den)


def unicritical_coefficients(d0: int, dinf: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Integer numerator/denominator of G with F_c = c*G."""
    d = d0 + dinf - 1
    num = [0] * (d + 1)
    den = [0] * d0
    for j in range(d0, d + 1):
        num[j] = -comb(d, j) * (-1) ** j
    for j in range(d0):
        den[j] = comb(d, j) * (-1) ** j
    return tuple(num), tuple(den)


def make_blaschke(d: int, c: complex) -> RationalMap:
    """c z^d sum_j C(2d-1,j)(-1)^j z^(d-1-j) / sum_j C(2d-1,j)(-1)^j z^j."""
    if d < 2:
        raise ValueError("d must be >= 2")
    c = complex(c)
    if abs(abs(c) - 1.0) > 1e-12:
        raise ValueError(f"|c| must be 1 (got {abs(c)!r}); the circle symmetry would break")
    inum, iden = blaschke_coefficients(d)
    return _from_ints(c, inum, iden, {"kind": "blaschke", "d": d, "c": c})


def make_unicritical(d0: int, dinf: int, c: complex) -> RationalMap:
    """F_c with superattracting 0, infinity and critical point 1, F_c(1) = c."""
    if d0 < 2 or dinf < 2:
        raise ValueError("d0 and dinf must be >= 2")
    c = complex(c)
    if c == 0:
        raise ValueError("c = 0 gives a degenerate map")
    inum, iden = unicritical_coefficients(d0, dinf)
    return _from_ints(c, inum, iden, {"kind": "unicritical", "d0": d0, "dinf": dinf, "c": c})


def make_bbm(q: complex) -> RationalMap:
    """z^2 (q - z) / (1 + conj(q) z), commuting with the antipode."""
    q = complex(q)
    if q == 0:
        raise ValueError("q must be nonzero")
    return RationalMap(np.array([0, 0, q, -1], complex), np.array([1, np.conj(q)], complex),
                       family={"kind": "bbm", "q": q})


def make_rotation(theta: float) -> RationalMap:
    """The rigid rotation z -> e^{2 pi i theta} z (degree one)."""
    lam = np.exp(2j * np.pi * float(theta))
    return RationalMap(np.array([0, lam]), np.array([1 + 0j]),
                       family={"kind": "rotation", "theta": float(theta)})


def bbm_critical_points(q: complex) -> np.ndarray:
    """The two free critical points of the BBM map, roots of
    -2 conj(q) z^2 + (|q|^2 - 3) z + 2 q."""
    a = -2 * np.conj(q)
    b = abs(q) ** 2 - 3
    c = 2 * q
    disc = np.sqrt(complex(b * b - 4 * a * c))
    # stable quadratic formula
    s = -0.5 * (b + (disc if (np.conj(b) * disc).real >= 0 else -disc))
    return np.array([s / a, c / s])


def antipode(z):
    """z -> -1/conj(z)."""
    z = np.asarray(z, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -1.0 / np.conj(z)
    return out if out.ndim else complex(out)


# --------------------------------------------------------------------------
# orbits

@dataclass(frozen=True)
class OrbitTrace:
    """Forward orbit z_0..z_N (inf allowed) with optional dz_k/dc."""

    values: np.ndarray
    sensitivities: np.ndarray | None = None

    @property
    def points(self) -> list[SpherePoint]:
        return [SpherePoint.from_complex(z) for z in self.values]

    def __len__(self) -> int:
        return len(self.values)


def param_derivative(f: RationalMap) -> Callable[[np.ndarray], np.ndarray] | None:
    """dF/dc for families holomorphic in their parameter."""
    kind = f.family.get("kind")
    if kind in ("unicritical", "blaschke"):
        c = f.family["c"]
        return lambda z: f(z) / c
    return None


def orbit(f: RationalMap, z0, n: int, with_sensitivity: bool = False,
          dF_dc: Callable | None = None) -> OrbitTrace:
    """z_{k+1} = f(z_k) for k < n, optionally with w_{k+1} = dF/dc(z_k) + f'(z_k) w_k."""
    if n < 0:
        raise ValueError("n must be >= 0")
    z = _as_point(z0).to_complex()
    vals = np.empty(n + 1, complex)
    vals[0] = z
    sens = None
    if with_sensitivity:
        if dF_dc is None:
            dF_dc = param_derivative(f)
        if dF_dc is None:
            raise ValueError("no parameter derivative available for this map")
        sens = np.zeros(n + 1, complex)
    for k in range(n):
        zk = vals[k]
        if np.isinf(zk):
            nxt = f.eval(INFINITY).to_complex()
        else:
            nxt = f.eval(SpherePoint.from_complex(zk)).to_complex()
        if np.isnan(nxt):
            raise FloatingPointError("orbit overflow in both charts")
        vals[k + 1] = nxt
        if sens is not None:
            sens[k + 1] = dF_dc(zk) + f.derivative(zk) * sens[k] if np.isfinite(zk) else np.nan
    return OrbitTrace(vals, sens)
