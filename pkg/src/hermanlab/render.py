"""Escape-basin classification and raster images.

Every map here fixes 0 and infinity as superattracting points, so each orbit
is classified by its first entry into a trap disk around 0 or infinity.
Trap radii come from a coefficient bound guaranteeing |f(z)| <= |z|/2 on
the disk (and the same in the chart w = 1/z), which makes the disks
invariant.
"""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
from scipy import ndimage

from .rmap import RationalMap, SpherePoint, unicritical_coefficients


class OrbitClass(enum.IntEnum):
    ToZero = 0
    ToInfinity = 1
    Undecided = 2


class TrapError(ValueError):
    pass


# --------------------------------------------------------------------------
# traps

def _contraction_profile(num: np.ndarray, den: np.ndarray, rs: np.ndarray) -> np.ndarray:
    """h(r) with |f(z)| <= h(r) |z| for |z| <= r (inf when the bound fails).

    num must vanish at 0 to order >= 2; den(0) != 0.
    """
    a = np.abs(num)
    b = np.abs(den)
    k = int(np.argmax(a > 0))  # order of vanishing at 0
    out = np.full(len(rs), np.inf)
    for i, r in enumerate(rs):
        M = np.sum(a[k:] * r ** np.arange(len(a) - k))
        m = b[0] - np.sum(b[1:] * r ** np.arange(1, len(b)))
        if m > 0:
            out[i] = r ** (k - 1) * M / m
    return out


def trap_radii(f: RationalMap, samples: int = 1024) -> tuple[float, float]:
    """(eps0, Rinf): the disks |z| < eps0 and |z| > Rinf are forward invariant."""
    rs = np.geomspace(1e-8, 10.0, 2000)
    h0 = _contraction_profile(f.num, f.den, rs)
    ok0 = np.nonzero(h0 <= 0.5)[0]
    hi = _contraction_profile(f._rden, f._rnum, rs)
    oki = np.nonzero(hi <= 0.5)[0]
    if len(ok0) == 0 or len(oki) == 0:
        raise TrapError("no trap disk found from the coefficient bound")
    eps0 = float(rs[ok0[-1]])
    rinf = float(1.0 / rs[oki[-1]])
    check_traps(f, eps0, rinf, samples)
    return eps0, rinf


def check_traps(f: RationalMap, eps0: float, rinf: float, samples: int = 1024) -> None:
    """Coefficient bound plus a one-step invariance test on the trap boundaries."""
    h0 = _contraction_profile(f.num, f.den, np.array([eps0]))[0]
    hi = _contraction_profile(f._rden, f._rnum, np.array([1.0 / rinf]))[0]
    if not (h0 < 1 and hi < 1):
        raise TrapError(f"trap radii eps0={eps0}, Rinf={rinf} are not invariant; choose smaller eps0 / larger Rinf")
    u = np.exp(2j * np.pi * (np.arange(samples) + 0.5) / samples)
    if np.max(np.abs(f(eps0 * u))) >= eps0 or np.min(np.abs(f(rinf * u))) <= rinf:
        raise TrapError(f"trap radii eps0={eps0}, Rinf={rinf} fail the invariance check")


def _unicritical_tables(d0: int, dinf: int, n: int = 4000):
    """h0(r), hinf(r) for G with F_c = c G; traps for c are read off by |c|."""
    inum, iden = unicritical_coefficients(d0, dinf)
    num = np.array(inum, float)
    den = np.array(iden, float)
    d = d0 + dinf - 1
    rnum = np.zeros(d + 1)
    rden = np.zeros(d + 1)
    rnum[d - len(num) + 1:] = num[::-1]
    rden[d - len(den) + 1:] = den[::-1]
    rs = np.geomspace(1e-12, 1.0, n)
    h0 = _contraction_profile(num, den, rs)
    hi = _contraction_profile(rden, rnum, rs)
    # keep the increasing part (the bound is monotone where finite)
    h0 = np.maximum.accumulate(h0)
    hi = np.maximum.accumulate(hi)
    return rs, h0, hi


# --------------------------------------------------------------------------
# kernels

@numba.njit(cache=True)
def _horner(co, z):
    a = 0j
    for i in range(len(co) - 1, -1, -1):
        a = a * z + co[i]
    return a


@numba.njit(cache=True)
def _classify(num, den, z, maxiter, eps0, rinf):
    az = abs(z)
    if az < eps0:
        return 0, 0
    if not az <= rinf:
        return 1, 0
    for k in range(1, maxiter + 1):
        b = _horner(den, z)
        if b == 0:
            return 1, k
        z = _horner(num, z) / b
        az = abs(z)
        if az < eps0:
            return 0, k
        if not az <= rinf:
            return 1, k
    return 2, maxiter


@numba.njit(parallel=True, cache=True)
def _julia_points(num, den, pts, maxiter, eps0, rinf, cls, steps):
    for i in numba.prange(len(pts)):
        c, s = _classify(num, den, pts[i], maxiter, eps0, rinf)
        cls[i] = c
        steps[i] = s


@numba.njit(parallel=True, cache=True)
def _param_points(gnum, gden, pts, maxiter, rs, h0, hi, cls, steps):
    for i in numba.prange(len(pts)):
        c = pts[i]
        ac = abs(c)
        if ac == 0:
            cls[i] = 2
            steps[i] = maxiter
            continue
        # largest tabulated radius with |c| h(r) <= 1/2
        j0 = np.searchsorted(h0, 0.5 / ac, side="right") - 1
        ji = np.searchsorted(hi, 0.5 * ac, side="right") - 1
        eps0 = rs[j0] if j0 >= 0 else 0.0
        rinf = 1.0 / rs[ji] if ji >= 0 else np.inf
        num = gnum * c
        k_cls, k_steps = _classify(num, gden, 1.0 + 0j, maxiter, eps0, rinf)
        cls[i] = k_cls
        steps[i] = k_steps


def set_threads(n: int | None = None) -> int:
    """Apply a thread budget (argument, HERMANLAB_THREADS, or all cores)."""
    if n is None:
        env = os.environ.get("HERMANLAB_THREADS")
        n = int(env) if env else numba.config.NUMBA_NUM_THREADS
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


# --------------------------------------------------------------------------
# public API

def classify_orbit(f: RationalMap, z0, maxiter: int, eps0: float | None = None,
                   rinf: float | None = None) -> tuple[OrbitClass, int]:
    """First trap entered by the orbit of z0 (ToZero / ToInfinity) or Undecided."""
    if eps0 is None or rinf is None:
        e, r = trap_radii(f)
        eps0 = e if eps0 is None else eps0
        rinf = r if rinf is None else rinf
    check_traps(f, eps0, rinf)
    p = z0 if isinstance(z0, SpherePoint) else SpherePoint.from_complex(z0)
    if p.is_infinity:
        return OrbitClass.ToInfinity, 0
    z = p.to_complex()
    c, s = _classify(np.ascontiguousarray(f.num), np.ascontiguousarray(f.den), complex(z),
                     int(maxiter), float(eps0), float(rinf))
    return OrbitClass(int(c)), int(s)


def classify_parameter(d0: int, dinf: int, c: complex, maxiter: int) -> tuple[OrbitClass, int]:
    """Class of the orbit of 1 under F_c."""
    g = classify_parameters(d0, dinf, np.array([complex(c)]), maxiter)
    return OrbitClass(int(g[0][0])), int(g[1][0])


def classify_parameters(d0: int, dinf: int, pts: np.ndarray, maxiter: int):
    inum, iden = unicritical_coefficients(d0, dinf)
    rs, h0, hi = _unicritical_tables(d0, dinf)
    pts = np.ascontiguousarray(np.asarray(pts, complex).ravel())
    cls = np.empty(len(pts), np.uint8)
    steps = np.empty(len(pts), np.int32)
    _param_points(np.array(inum, complex), np.array(iden, complex), pts, int(maxiter), rs, h0, hi, cls, steps)
    return cls, steps


@dataclass(frozen=True)
class Viewport:
    center: complex
    width: float
    w: int
    h: int
    rotation: float = 0.0  # radians, about the centre

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("viewport width must be positive")
        if self.w < 1 or self.h < 1:
            raise ValueError("pixel dimensions must be >= 1")

    @property
    def pixel(self) -> float:
        return self.width / self.w

    def points(self) -> np.ndarray:
        """Pixel centres, row 0 at the top."""
        px = self.pixel
        x = (np.arange(self.w) + 0.5 - self.w / 2) * px
        y = -(np.arange(self.h) + 0.5 - self.h / 2) * px
        grid = x[None, :] + 1j * y[:, None]
        return complex(self.center) + grid * np.exp(1j * self.rotation)

    def pixel_of(self, z: complex) -> tuple[int, int]:
        u = (complex(z) - complex(self.center)) * np.exp(-1j * self.rotation) / self.pixel
        i = int(np.floor(u.real + self.w / 2))
        j = int(np.floor(-u.imag + self.h / 2))
        return j, i

    def to_json(self) -> dict:
        return {"center": [self.center.real, self.center.imag], "width": self.width,
                "w": self.w, "h": self.h, "rotation": self.rotation}


@dataclass
class ImageGrid:
    classes: np.ndarray  # uint8 (h, w) of OrbitClass values
    steps: np.ndarray    # int32 (h, w)
    viewport: Viewport
    maxiter: int
    meta: dict = field(default_factory=dict)

    def fraction(self, cls: OrbitClass) -> float:
        return float(np.mean(self.classes == cls))

    def rgb(self, overlay: np.ndarray | None = None) -> np.ndarray:
        return colorize(self, overlay)


def colorize(img: ImageGrid, overlay: np.ndarray | None = None) -> np.ndarray:
    """Blue basin of 0, white basin of infinity, Undecided black; steps shade."""
    s = np.minimum(img.steps, 64).astype(np.float64) / 64.0
    shade = 1.0 - 0.6 * np.sqrt(s)
    rgb = np.zeros(img.classes.shape + (3,), np.uint8)
    zero = img.classes == OrbitClass.ToZero
    inf = img.classes == OrbitClass.ToInfinity
    rgb[zero] = np.stack([40 * shade[zero], 90 * shade[zero], 255 * shade[zero]], -1).astype(np.uint8)
    rgb[inf] = np.stack([255 * shade[inf]] * 3, -1).astype(np.uint8)
    if overlay is not None:
        rgb[overlay] = (230, 20, 20)
    return rgb


def write_image(rgb: np.ndarray, path, header_comment: str | None = None) -> Path:
    """P6 PPM always; PNG (via Pillow) when the suffix asks for it."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        from PIL import Image  # optional dependency
        Image.fromarray(rgb, "RGB").save(path, optimize=False)
        return path
    h, w = rgb.shape[:2]
    head = b"P6\n"
    if header_comment:
        for line in header_comment.splitlines():
            head += b"# " + line.encode("ascii", "replace") + b"\n"
    head += f"{w} {h}\n255\n".encode()
    with open(path, "wb") as fh:
        fh.write(head + np.ascontiguousarray(rgb, np.uint8).tobytes())
    return path


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    pos += 1
    w, h = int(fields[1]), int(fields[2])
    return np.frombuffer(data[pos:pos + 3 * w * h], np.uint8).reshape(h, w, 3)


def render_julia(f: RationalMap, vp: Viewport, maxiter: int, orbit_overlay=None, out=None,
                 eps0: float | None = None, rinf: float | None = None,
                 comment: str | None = None) -> ImageGrid:
    """Classify every pixel of the dynamical plane."""
    if eps0 is None or rinf is None:
        eps0, rinf = trap_radii(f)
    else:
        check_traps(f, eps0, rinf)
    pts = np.ascontiguousarray(vp.points().ravel())
    cls = np.empty(len(pts), np.uint8)
    steps = np.empty(len(pts), np.int32)
    _julia_points(np.ascontiguousarray(f.num), np.ascontiguousarray(f.den), pts, int(maxiter),
                  float(eps0), float(rinf), cls, steps)
    img = ImageGrid(cls.reshape(vp.h, vp.w), steps.reshape(vp.h, vp.w), vp, int(maxiter),
                    {"eps0": eps0, "rinf": rinf})
    if out is not None:
        mask = None
        if orbit_overlay is not None:
            mask = overlay_mask(vp, getattr(orbit_overlay, "values", orbit_overlay))
        write_image(colorize(img, mask), out, comment)
    return img


def julia_raster(img: ImageGrid) -> np.ndarray:
    """Pixels meeting the Julia set: Undecided, or next to a pixel of the other basin."""
    k = img.classes
    J = k == OrbitClass.Undecided
    dv = k[:-1] != k[1:]
    dh = k[:, :-1] != k[:, 1:]
    J[:-1] |= dv
    J[1:] |= dv
    J[:, :-1] |= dh
    J[:, 1:] |= dh
    return J


def encloses(img: ImageGrid, z: complex) -> bool:
    """True if the raster Julia set separates the pixel of z from the image border."""
    J = julia_raster(img)
    j, i = img.viewport.pixel_of(z)
    if not (0 <= j < J.shape[0] and 0 <= i < J.shape[1]) or J[j, i]:
        return False
    lab, _ = ndimage.label(~J)
    edge = np.concatenate([lab[0], lab[-1], lab[:, 0], lab[:, -1]])
    return bool(lab[j, i] not in set(edge.tolist()))


def overlay_mask(vp: Viewport, pts) -> np.ndarray:
    mask = np.zeros((vp.h, vp.w), bool)
    for z in np.asarray(pts, complex):
        if not np.isfinite(z):
            continue
        j, i = vp.pixel_of(z)
        if 0 <= j < vp.h and 0 <= i < vp.w:
            mask[j, i] = True
    return mask


def render_param(d0: int, dinf: int, vp: Viewport, maxiter: int, out=None,
                 comment: str | None = None) -> ImageGrid:
    """Classify the orbit of 1 under F_c for every pixel c."""
    pts = vp.points()
    cls, steps = classify_parameters(d0, dinf, pts, maxiter)
    img = ImageGrid(cls.reshape(vp.h, vp.w), steps.reshape(vp.h, vp.w), vp, int(maxiter),
                    {"d0": d0, "dinf": dinf, "skipped": int(np.sum(pts == 0))})
    if out is not None:
        write_image(colorize(img), out, comment)
    return img


def julia_maxiter_for_pixel(pixel: float) -> int:
    """Iterations making the undecided band of z^2 about one pixel thick."""
    return max(1, int(np.ceil(np.log2(np.log(2.0) / (pixel / 2)))))
