"""Quick checks whose answers are forced analytically (no solver runs)."""
from __future__ import annotations

import math

import numpy as np

from .cf import ContinuedFraction, cf_expand, circle_order, convergents
from .circle import CircleLift, rotation_number
from .render import OrbitClass, classify_orbit
from .rmap import antipode, blaschke_coefficients, make_bbm, make_unicritical, unicritical_coefficients
from .width import WidthProblem, discrete_extremal_width


def _cases():
    g = ContinuedFraction.golden()

    def formula():
        return (blaschke_coefficients(2) == ((0, 0, -3, 1), (1, -3))
                and unicritical_coefficients(2, 4) == ((0, 0, -10, 10, -5, 1), (1, -5)))

    def coincidence():
        return all(unicritical_coefficients(d, d) == blaschke_coefficients(d) for d in range(2, 6))

    def golden_cf():
        return cf_expand((math.sqrt(5) - 1) / 2, 10).partial_quotients == (1,) * 10

    def golden_order():
        return circle_order(g, 5) == [0, 2, 4, 1, 3]

    def convergent_identity():
        t = convergents(g, 12)
        return all(abs(t.p[n] * t.q[n - 1] - t.p[n - 1] * t.q[n]) == 1 for n in range(1, 13))

    def rigid_rotation():
        est = rotation_number(CircleLift.rotation(float(g.value)), g)
        return abs(est.value - float(g.value)) < 1e-10

    def square():
        p = WidthProblem([np.array([0, 1 + 0j])], [np.array([1j, 1 + 1j])], window=(0, 1, 0, 1),
                         resolution=64, far=None)
        return abs(discrete_extremal_width(p).value - 1.0) < 1e-2

    def traps():
        f = make_unicritical(2, 4, -0.386631 - 0.320505j)
        return (classify_orbit(f, 0j, 100)[0] == OrbitClass.ToZero
                and classify_orbit(f, 1e6 + 0j, 100)[0] == OrbitClass.ToInfinity)

    def bbm_antipodal():
        f = make_bbm(-1.26 + 2.94j)
        z = np.array([0.3 + 0.2j, -1.1 + 0.7j, 2.0 - 0.4j])
        return np.allclose(f(antipode(z)), antipode(f(z)), rtol=1e-10)

    return [("formula identity", formula), ("family coincidence d=2..5", coincidence),
            ("golden continued fraction", golden_cf), ("golden cyclic order", golden_order),
            ("convergent determinant", convergent_identity), ("rigid rotation number", rigid_rotation),
            ("unit square width", square), ("basin traps", traps),
            ("antipodal symmetry", bbm_antipodal)]


def run_selftest() -> list[tuple[str, bool, str]]:
    out = []
    for name, fn in _cases():
        try:
            ok, detail = bool(fn()), ""
        except Exception as exc:  # report, keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, ok, detail))
    return out
