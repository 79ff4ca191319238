"""Rotation numbers of analytic circle maps and the Blaschke parameter t_theta.

A circle-preserving rational map f gives the lift L(x) = x + D(x) where
D(x) is the continuous branch of arg(f(e^{2 pi i x}) e^{-2 pi i x}) / 2 pi.
D is periodic with oscillation below one, so a branch centre found once on
a fine grid lets us evaluate it pointwise without unwrapping.
"""
from __future__ import annotations

from dataclasses import dataclass

import mpmath
import numba
import numpy as np

from .cf import ContinuedFraction, convergents
from .rmap import RationalMap, make_blaschke

GRID = 4096


class NotHomeomorphismError(ValueError):
    pass


class BracketError(RuntimeError):
    pass


@numba.njit(cache=True)
def _delta(frac, num, den, center):
    z = np.exp(2j * np.pi * frac)
    a = 0j
    for i in range(len(num) - 1, -1, -1):
        a = a * z + num[i]
    b = 0j
    for i in range(len(den) - 1, -1, -1):
        b = b * z + den[i]
    w = a / b * np.conj(z)
    t = np.arctan2(w.imag, w.real) / (2 * np.pi)
    # pick the branch within half a turn of the centre
    return center + ((t - center + 0.5) % 1.0) - 0.5


@numba.njit(cache=True)
def _orbit(num, den, center, shift, reps, sub, x0, checkpoints, out_int, out_frac):
    """Iterate M(x) = L^reps(x) + reps*shift - sub; record M^k(x0) - x0 at checkpoints."""
    n0 = np.floor(x0)
    f0 = x0 - n0
    n = n0
    frac = f0
    k = 0
    step = 0
    last = checkpoints[len(checkpoints) - 1]
    while step < last:
        for _ in range(reps):
            y = frac + _delta(frac, num, den, center) + shift
            fl = np.floor(y)
            n += fl
            frac = y - fl
        n -= sub
        step += 1
        while k < len(checkpoints) and checkpoints[k] == step:
            out_int[k] = n - n0
            out_frac[k] = frac - f0
            k += 1
    return step * reps


@dataclass(frozen=True, eq=False)
class CircleLift:
    """x -> (L^reps(x) + reps*shift) - sub with L the lift of a circle map.

    ``center`` fixes the branch of the displacement; shift models
    multiplication of the map by e^{2 pi i shift}.
    """

    num: np.ndarray
    den: np.ndarray
    center: float
    shift: float = 0.0
    reps: int = 1
    sub: int = 0

    @classmethod
    def from_map(cls, f: RationalMap, shift: float = 0.0, check: bool = True) -> "CircleLift":
        num = np.ascontiguousarray(f.num, dtype=np.complex128)
        den = np.ascontiguousarray(f.den, dtype=np.complex128)
        x = np.arange(GRID) / GRID
        z = np.exp(2j * np.pi * x)
        w = f(z)
        if check and np.max(np.abs(np.abs(w) - 1)) > 1e-9:
            raise ValueError("map does not preserve the unit circle")
        d = np.unwrap(np.angle(w * np.conj(z))) / (2 * np.pi)
        if abs(d[-1] - d[0]) > 0.5:
            raise NotHomeomorphismError("displacement is not periodic: degree on the circle is not 1")
        d0 = d[0] % 1.0
        d += d0 - d[0]
        lo, hi = float(np.min(d)), float(np.max(d))
        if hi - lo >= 1.0:
            raise NotHomeomorphismError("not a circle homeomorphism for this parameter")
        lift = cls(num, den, 0.5 * (lo + hi), float(shift))
        if check:
            lift.check_monotone()
        return lift

    @classmethod
    def rotation(cls, theta: float) -> "CircleLift":
        """Lift x -> x + theta as the map z -> z (displacement 0) shifted by theta."""
        return cls(np.array([0, 1], np.complex128), np.array([1], np.complex128), 0.0, float(theta))

    def shifted(self, t: float) -> "CircleLift":
        return CircleLift(self.num, self.den, self.center, float(t), self.reps, self.sub)

    def power(self, q: int, p: int = 0) -> "CircleLift":
        """The lift L^q - p."""
        return CircleLift(self.num, self.den, self.center, self.shift, self.reps * q, self.sub * q + p)

    def __call__(self, x):
        """Vectorized evaluation (reps = 1 fast path)."""
        x = np.asarray(x, float)
        out = np.empty_like(x)
        for i, xi in np.ndenumerate(x):
            out[i] = xi + self.displacement(xi)
        return out if out.ndim else float(out)

    def displacement(self, x: float) -> float:
        ck = np.array([1], np.int64)
        oi, of = np.zeros(1), np.zeros(1)
        _orbit(self.num, self.den, self.center, self.shift, self.reps, self.sub, float(x), ck, oi, of)
        return float(oi[0] + of[0])

    def check_monotone(self, n: int = GRID) -> None:
        x = np.arange(n + 1) / n
        y = x + np.array([_delta(xi % 1.0, self.num, self.den, self.center) for xi in x]) \
            + np.floor(x)  # keep L(x+1) = L(x) + 1 on the closing sample
        y[-1] = y[0] + 1.0
        if np.any(np.diff(y) <= 0):
            raise NotHomeomorphismError("not a circle homeomorphism for this parameter")

    def periodicity_defect(self, n: int = 64) -> float:
        x = np.random.default_rng(1).random(n)
        return float(max(abs(self.displacement(xi + 1) - self.displacement(xi)) for xi in x))

    def displacements(self, x0: float, steps) -> tuple[np.ndarray, np.ndarray, int]:
        """Integer and fractional parts of M^k(x0) - x0 for the given sorted k."""
        ck = np.asarray(steps, np.int64)
        oi = np.zeros(len(ck))
        of = np.zeros(len(ck))
        evals = _orbit(self.num, self.den, self.center, self.shift, self.reps, self.sub,
                       float(x0), ck, oi, of)
        return oi, of, evals


@dataclass(frozen=True)
class RotationEstimate:
    value: float
    error: float
    level: int | None
    evaluations: int
    comparison: int = 0  # -1: rho < theta, +1: rho > theta, 0: undecided
    method: str = "birkhoff"

    def __float__(self) -> float:
        return self.value


def compare_with(lift: CircleLift, theta: ContinuedFraction, depth: int, x0: float = 0.0):
    """Closest-return comparison of rho(lift) with theta through level ``depth``.

    Returns (comparison, level reached, evaluations, displacement data).
    """
    tab = convergents(theta, depth)
    qs = np.array(sorted(set(tab.q[1:])), np.int64)
    oi, of, evals = lift.displacements(x0, qs)
    by_q = {int(q): (i, f) for q, i, f in zip(qs, oi, of)}
    for n in range(1, depth + 1):
        i, f = by_q[tab.q[n]]
        v = (i - tab.p[n]) + f
        expect = 1 if n % 2 == 0 else -1
        if v == 0:
            continue
        if np.sign(v) != expect:
            # n even: p/q < theta and rho <= p/q;  n odd: p/q > theta and rho >= p/q
            return (-1 if n % 2 == 0 else 1), n, evals, (qs, oi, of)
    return 0, depth, evals, (qs, oi, of)


def rotation_number(lift: CircleLift, cf_hint: ContinuedFraction | None = None,
                    iterations: int = 1_000_000, tol: float = 1e-12, x0: float = 0.0) -> RotationEstimate:
    """Rotation number of a circle-homeomorphism lift with an error bound."""
    if cf_hint is not None:
        # deepest level whose closest return fits the budget
        depth = 1
        while True:
            tab = convergents(cf_hint, depth + 1)
            if tab.q[-1] > iterations:
                break
            depth += 1
            if 1.0 / (tab.q[-1] * tab.q[-2]) < tol:
                break
        tab = convergents(cf_hint, depth)
        cmp_, level, evals, (qs, oi, of) = compare_with(lift, cf_hint, depth, x0)
        if cmp_ == 0:
            err = 1.0 / (tab.q[depth] * tab.q[depth - 1])
            return RotationEstimate(float(cf_hint.value), err, depth, evals, 0, "closest-return")
        q = int(qs[-1])
        return RotationEstimate(float((oi[-1] + of[-1]) / q), 1.0 / q, level, evals, cmp_, "closest-return")
    N = int(iterations)
    oi, of, evals = lift.displacements(x0, [N])
    return RotationEstimate(float((oi[0] + of[0]) / N), 1.0 / N, None, evals, 0, "birkhoff")


@dataclass(frozen=True)
class BlaschkeParameter:
    t: float
    rho: RotationEstimate
    bracket: tuple[float, float]
    steps: int
    evaluations: int

    def __float__(self) -> float:
        return self.t


def _blaschke_base(d: int) -> CircleLift:
    return CircleLift.from_map(make_blaschke(d, 1.0))


def solve_blaschke_parameter(d: int, theta: ContinuedFraction, tol: float = 1e-10,
                             max_q: int = 200_000, start: float | None = None,
                             rng: np.random.Generator | None = None) -> BlaschkeParameter:
    """t in [0,1) with rho(e^{2 pi i t} B_d) = theta, by bisection on comparisons.

    ``start`` (or a draw from ``rng``) replaces the first midpoint; the
    bisection then proceeds from whichever side it lands on.
    """
    if tol < 1e-10:
        raise ValueError("tol must be >= 1e-10")
    base = _blaschke_base(d)
    depth = 2
    while convergents(theta, depth + 1).q[-1] <= max_q:
        depth += 1
    lo, hi = 0.0, 1.0
    # rho(0) = 0 (1 is fixed) and rho(1) = 1: theta is bracketed
    for t, want in ((lo, -1), (hi, 1)):
        c, *_ = compare_with(base.shifted(t), theta, depth)
        if c != want:
            raise BracketError(f"rotation number at t={t} does not bracket theta")
    evals = 0
    steps = 0
    mid = start if start is not None else (rng.random() if rng is not None else 0.5)
    while hi - lo > 1e-15:
        c, level, ev, _ = compare_with(base.shifted(mid), theta, depth)
        evals += ev
        steps += 1
        if c < 0:
            lo = mid
        elif c > 0:
            hi = mid
        else:
            # undecided at the deepest affordable level: mid is inside the
            # set where all closest returns agree with theta
            break
        mid = 0.5 * (lo + hi)
    est = rotation_number(base.shifted(mid), theta, iterations=max_q, tol=tol)
    if est.comparison != 0 or est.error > tol:
        raise BracketError(f"bisection ended with rho not within {tol} of theta")
    return BlaschkeParameter(mid % 1.0, est, (lo, hi), steps, evals)
