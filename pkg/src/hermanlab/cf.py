"""Continued fractions, convergents and closest returns for rotation numbers.

A rotation number is stored as its list of partial quotients, optionally
with an eventually periodic tail, so that convergents are integer exact.
Closest-return lengths are evaluated with mpmath.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath

# working precision (bits) for values of theta and closest returns
_PREC = 256


class RationalThetaError(ValueError):
    """Raised when an expansion terminates, i.e. theta is rational."""

    def __init__(self, p: int, q: int):
        super().__init__(f"theta is rational: {p}/{q}")
        self.p = p
        self.q = q


def _cf_value(quotients: Sequence[int]) -> Fraction:
    p0, q0, p1, q1 = 1, 0, 0, 1
    for a in quotients:
        p0, p1 = p1, a * p1 + p0
        q0, q1 = q1, a * q1 + q0
    return Fraction(p1, q1)


def _periodic_value(prefix: tuple[int, ...], period: tuple[int, ...]) -> mpmath.mpf:
    # the periodic tail x = [0; period, x] solves a quadratic; expanding far
    # enough is simpler and converges geometrically
    with mpmath.workprec(_PREC):
        n = len(prefix) + len(period) * (_PREC // max(1, len(period)))
        qs = list(prefix) + [period[(i) % len(period)] for i in range(n - len(prefix))]
        fr = _cf_value(qs)
        return mpmath.mpf(fr.numerator) / fr.denominator


@dataclass(frozen=True)
class ContinuedFraction:
    """theta = [0; a_1, a_2, ...] in (0, 1).

    ``partial_quotients`` holds the stored prefix a_1..a_N.  If ``period`` is
    given the quotients after the prefix repeat it forever and any index may
    be queried.  ``precision_exhausted`` is the first level whose q_n^2
    exceeded the reciprocal precision of a floating-point input, else None.
    """

    partial_quotients: tuple[int, ...]
    period: tuple[int, ...] | None = None
    user_value: object = field(default=None, compare=False, repr=False)
    precision_exhausted: int | None = field(default=None, compare=False)

    def __post_init__(self):
        qs = tuple(int(a) for a in self.partial_quotients)
        object.__setattr__(self, "partial_quotients", qs)
        if self.period is not None:
            per = tuple(int(a) for a in self.period)
            if not per:
                raise ValueError("empty period")
            object.__setattr__(self, "period", per)
        if any(a < 1 for a in qs + (self.period or ())):
            raise ValueError("partial quotients must be positive integers")
        if not qs and self.period is None:
            raise ValueError("need at least one partial quotient")

    # construction helpers -------------------------------------------------
    @classmethod
    def periodic(cls, prefix: Sequence[int], period: Sequence[int]) -> "ContinuedFraction":
        return cls(tuple(prefix), tuple(period))

    @classmethod
    def golden(cls) -> "ContinuedFraction":
        return cls((), (1,))

    @classmethod
    def parse(cls, text: str) -> "ContinuedFraction":
        """Parse "1,2,3" or "1(1)" or "(2)" or "3,1(1,2)"."""
        s = text.replace(" ", "")
        m = re.fullmatch(r"([0-9,]*?)(?:\(([0-9,]+)\))?", s)
        if not s or m is None:
            raise ValueError(f"invalid theta string: {text!r}")
        pre, per = m.group(1), m.group(2)

        def ints(chunk):
            if not chunk:
                return ()
            parts = chunk.strip(",").split(",")
            if any(p == "" for p in parts):
                raise ValueError(f"invalid theta string: {text!r}")
            return tuple(int(p) for p in parts)

        try:
            return cls(ints(pre), ints(per) if per else None)
        except ValueError as exc:
            raise ValueError(f"invalid theta string: {text!r}") from exc

    def to_string(self) -> str:
        s = ",".join(str(a) for a in self.partial_quotients)
        if self.period is not None:
            s += "(" + ",".join(str(a) for a in self.period) + ")"
        return s

    # access ---------------------------------------------------------------
    def quotient(self, i: int) -> int:
        """a_i for i >= 1."""
        if i < 1:
            raise IndexError("quotients are indexed from 1")
        n = len(self.partial_quotients)
        if i <= n:
            return self.partial_quotients[i - 1]
        if self.period is None:
            raise IndexError(f"only {n} quotients stored")
        return self.period[(i - n - 1) % len(self.period)]

    def quotients(self, depth: int) -> list[int]:
        return [self.quotient(i) for i in range(1, depth + 1)]

    @property
    def depth(self) -> int | None:
        """Number of stored quotients, None for an infinite periodic expansion."""
        return None if self.period is not None else len(self.partial_quotients)

    @property
    def is_stationary(self) -> bool:
        """All quotients equal (e.g. the golden mean)."""
        allq = set(self.partial_quotients) | set(self.period or ())
        return self.period is not None and len(allq) == 1

    @property
    def bound(self) -> int:
        """beta(theta): the largest stored quotient."""
        return max(self.partial_quotients + (self.period or ()))

    @property
    def value(self) -> mpmath.mpf:
        """theta as a high-precision mpf."""
        if self.user_value is not None:
            with mpmath.workprec(_PREC):
                return mpmath.mpf(self.user_value)
        if self.period is not None:
            return _periodic_value(self.partial_quotients, self.period)
        fr = _cf_value(self.partial_quotients)
        with mpmath.workprec(_PREC):
            return mpmath.mpf(fr.numerator) / fr.denominator

    def __float__(self) -> float:
        return float(self.value)

    def reflect(self) -> "ContinuedFraction":
        """The expansion of 1 - theta."""
        def flip(a):
            if a[0] == 1:
                if len(a) < 2:
                    raise RationalThetaError(0, 1)
                return [a[1] + 1] + a[2:]
            return [1, a[0] - 1] + a[1:]

        if self.period is None:
            return ContinuedFraction(tuple(flip(list(self.partial_quotients))))
        m = max(len(self.partial_quotients), 2) + len(self.period)
        head = flip(self.quotients(m))
        tail = tuple(self.quotient(i) for i in range(m + 1, m + 1 + len(self.period)))
        return ContinuedFraction(tuple(head), tail)


def cf_expand(theta, depth: int) -> ContinuedFraction:
    """Partial quotients of a real theta in (0, 1).

    The input is treated as the exact binary number it is; quotients are then
    produced by exact Euclid.  Once q_n^2 exceeds the reciprocal working
    precision the quotients no longer describe the intended irrational and the
    level is recorded in ``precision_exhausted``.  If the remainder vanishes
    before that point theta is rational and ``RationalThetaError`` is raised.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if isinstance(theta, mpmath.mpf):
        man, exp = theta.man_exp
        x = Fraction(int(man)) * (Fraction(2) ** int(exp))
        eps = Fraction(1, 2 ** theta.context.prec)
    elif isinstance(theta, Fraction):
        x, eps = theta, Fraction(0)
    else:
        x = Fraction(float(theta))
        eps = Fraction(1, 2**52)
    if not 0 < x < 1:
        raise ValueError("theta must lie in (0, 1)")

    quot: list[int] = []
    exhausted = None
    qm1, q0 = 0, 1
    r = x
    for n in range(1, depth + 1):
        if r == 0:
            fr = _cf_value(quot)
            if exhausted is None:
                raise RationalThetaError(fr.numerator, fr.denominator)
            break
        inv = 1 / r
        a = math.floor(inv)
        quot.append(a)
        r = inv - a
        qm1, q0 = q0, a * q0 + qm1
        if exhausted is None and eps and Fraction(q0 * q0) * eps > 1:
            exhausted = n
    if r == 0 and exhausted is None and len(quot) == depth and eps == 0:
        fr = _cf_value(quot)
        raise RationalThetaError(fr.numerator, fr.denominator)
    return ContinuedFraction(tuple(quot), None, user_value=theta, precision_exhausted=exhausted)


@dataclass(frozen=True)
class ConvergentTable:
    """Rows (p_n, q_n, l_n) for n = 0..N with signs of q_n theta - p_n."""

    p: tuple[int, ...]
    q: tuple[int, ...]
    l: tuple[float, ...]
    theta: ContinuedFraction
    l_mp: tuple = field(default=(), repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.q)

    @property
    def rows(self) -> list[tuple[int, int, float]]:
        return list(zip(self.p, self.q, self.l))

    def sign(self, n: int) -> int:
        """sign of q_n theta - p_n, equal to (-1)^n."""
        return 1 if n % 2 == 0 else -1


def convergents(cf: ContinuedFraction, depth: int) -> ConvergentTable:
    """Convergents p_n/q_n, n = 0..depth, and closest returns l_n."""
    if cf.depth is not None and depth > cf.depth:
        raise ValueError(f"depth {depth} exceeds the {cf.depth} stored quotients")
    p = [0]
    q = [1]
    pm, qm = 1, 0
    for n in range(1, depth + 1):
        a = cf.quotient(n)
        p_new, q_new = a * p[-1] + pm, a * q[-1] + qm
        pm, qm = p[-1], q[-1]
        p.append(p_new)
        q.append(q_new)
    with mpmath.workprec(_PREC):
        th = cf.value
        lm = tuple(abs(pn - qn * th) for pn, qn in zip(p, q))
    return ConvergentTable(tuple(p), tuple(q), tuple(float(v) for v in lm), cf, lm)


@dataclass(frozen=True)
class BoundedTypeReport:
    ok: bool
    min_ratio: float | None
    max_ratio: float | None
    ratios: tuple[float, ...]
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def bounded_type_check(table: ConvergentTable, Ctilde: float, C: float) -> BoundedTypeReport:
    """Check Ctilde * l_{n+1} <= l_n <= C * l_{n+1} over the table."""
    if len(table) < 2:
        return BoundedTypeReport(False, None, None, (), "insufficient depth")
    ratios = tuple(float(a / b) for a, b in zip(table.l_mp[:-1], table.l_mp[1:]))
    lo, hi = min(ratios), max(ratios)
    ok = Ctilde <= lo and hi <= C
    reason = "" if ok else f"ratios span [{lo:.6g}, {hi:.6g}] outside [{Ctilde}, {C}]"
    return BoundedTypeReport(ok, lo, hi, ratios, reason)


def circle_order(theta, count: int) -> list[int]:
    """Indices i < count sorted by the angle i*theta mod 1."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if isinstance(theta, ContinuedFraction):
        with mpmath.workprec(_PREC):
            th = theta.value
            keys = [mpmath.frac(i * th) for i in range(count)]
    elif isinstance(theta, Fraction):
        keys = [(i * theta) % 1 for i in range(count)]
    elif isinstance(theta, mpmath.mpf):
        keys = [mpmath.frac(i * theta) for i in range(count)]
    else:
        th = Fraction(float(theta))
        keys = [(i * th) % 1 for i in range(count)]
    order = sorted(range(count), key=lambda i: keys[i])
    for a, b in zip(order, order[1:]):
        if keys[a] == keys[b]:
            raise ValueError(f"equal angles at indices {a} and {b}: theta looks rational")
    return order


def combinatorial_angles(cf: ContinuedFraction, count: int) -> "list[float]":
    """Angles j*theta mod 1 for j < count, accurate in double precision."""
    with mpmath.workprec(_PREC):
        th = cf.value
        return [float(mpmath.frac(j * th)) for j in range(count)]
