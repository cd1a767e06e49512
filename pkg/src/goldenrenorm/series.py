"""Truncated complex power series in one and two variables.

Every analytic map in the package is stored as a truncated Taylor expansion
about a chosen center, together with the radius of the disk on which it is
meant to be used.  Coefficient arrays are either ``complex128`` (double
precision) or ``object`` arrays of :class:`mpmath.mpc` (extended precision);
all operations below are written so that both work unchanged.
"""

from __future__ import annotations

import math
from typing import Any, Sequence

import mpmath
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import CriticalCenter, DomainEscape, NonFiniteInput

DEFAULT_DEGREE = 60
DEFAULT_DEGREES_2D = (60, 12)
DEFAULT_SLACK = 0.3
DERIV_TOL = 1e-10

EXTENDED_PREC = 128


# ---------------------------------------------------------------------------
# scalar helpers


def use_extended(prec: int = EXTENDED_PREC) -> None:
    """Set the working precision (bits) of the extended-precision backend."""
    if prec < 128:
        raise ValueError("extended precision needs at least 128 bits")
    mpmath.mp.prec = prec


def is_extended(arr: np.ndarray) -> bool:
    return arr.dtype == object


def to_array(values: Any, extended: bool = False) -> np.ndarray:
    """Convert ``values`` to a complex coefficient array of the requested kind."""
    if extended:
        arr = np.asarray(values, dtype=object)
        out = np.empty(arr.shape, dtype=object)
        flat_in = arr.reshape(-1)
        flat_out = out.reshape(-1)
        for i, v in enumerate(flat_in):
            flat_out[i] = mpmath.mpc(v)
        return out
    arr = np.asarray(values)
    if arr.dtype == object:
        return np.vectorize(complex, otypes=[np.complex128])(arr) if arr.size else arr.astype(np.complex128)
    return arr.astype(np.complex128)


def scalar(v: Any, extended: bool):
    return mpmath.mpc(v) if extended else complex(v)


def _abs(arr: np.ndarray) -> np.ndarray:
    """Elementwise modulus as a float64 array (works for object arrays)."""
    if arr.dtype == object:
        return np.array([float(abs(v)) for v in arr.reshape(-1)], dtype=float).reshape(arr.shape)
    return np.abs(arr)


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(_abs(arr))):
        raise NonFiniteInput(f"{what} has non-finite coefficients")


def _zeros(shape, extended: bool) -> np.ndarray:
    if extended:
        out = np.empty(shape, dtype=object)
        out.fill(mpmath.mpc(0))
        return out
    return np.zeros(shape, dtype=np.complex128)


def _conv_trunc(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """First ``n`` coefficients of the product of two 1D coefficient arrays."""
    out = np.convolve(a, b)[:n]
    if len(out) < n:
        out = np.concatenate([out, _zeros(n - len(out), is_extended(out))])
    return out


def _conv2_trunc(a: np.ndarray, b: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Truncated 2D product; direct summation so small y-terms keep relative accuracy."""
    nx, ny = shape
    if a.dtype != object and b.dtype != object:
        a, b = a[:nx, :ny], b[:nx, :ny]
        na, nb = a.shape[0], b.shape[0]
        # lower-triangular Toeplitz blocks of a, one per y-column, applied to b
        pad = np.zeros((nb - 1 + nx, a.shape[1]), dtype=np.complex128)
        pad[nb - 1:nb - 1 + na] = a
        toep = sliding_window_view(pad, nb, axis=0)[:nx, :, ::-1]
        prod = np.matmul(toep.transpose(1, 0, 2), b)
        out = np.zeros(shape, dtype=np.complex128)
        for j in range(prod.shape[0]):
            m = min(prod.shape[2], ny - j)
            if m > 0:
                out[:, j:j + m] += prod[j, :, :m]
        return out
    out = _zeros(shape, True)
    for k in range(ny):
        acc = None
        for j in range(k + 1):
            if j >= a.shape[1] or k - j >= b.shape[1]:
                continue
            term = _conv_trunc(a[:, j], b[:, k - j], nx)
            acc = term if acc is None else acc + term
        if acc is not None:
            out[:, k] = acc
    return out


def _resize1(c: np.ndarray, n: int) -> np.ndarray:
    if len(c) >= n:
        return c[:n].copy()
    return np.concatenate([c, _zeros(n - len(c), is_extended(c))])


def _resize2(c: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    out = _zeros(shape, is_extended(c))
    mx, my = min(shape[0], c.shape[0]), min(shape[1], c.shape[1])
    out[:mx, :my] = c[:mx, :my]
    return out


# ---------------------------------------------------------------------------
# one variable


class Series1:
    """Truncated power series ``sum_k c_k (x - center)^k`` on a disk.

    Parameters
    ----------
    coeffs : sequence of complex
        Coefficient of ``(x - center)^k`` at index ``k``.
    radius : float
        Radius of the disk of intended validity.
    center : complex
        Expansion center.
    """

    __slots__ = ("coeffs", "radius", "center")

    def __init__(self, coeffs: Sequence[complex] | np.ndarray, radius: float = 1.0,
                 center: complex = 0.0, extended: bool | None = None):
        arr = np.asarray(coeffs)
        if extended is None:
            extended = arr.dtype == object
        arr = to_array(arr, extended)
        if arr.ndim != 1 or len(arr) == 0:
            raise ValueError("coeffs must be a non-empty 1D sequence")
        if not (radius > 0 and math.isfinite(radius)):
            raise ValueError("radius must be positive and finite")
        _check_finite(arr, "Series1")
        arr.setflags(write=False)
        self.coeffs = arr
        self.radius = float(radius)
        self.center = scalar(center, extended)

    # -- constructors -----------------------------------------------------

    @classmethod
    def zero(cls, degree: int = DEFAULT_DEGREE, radius: float = 1.0, center: complex = 0.0,
             extended: bool = False) -> "Series1":
        return cls(_zeros(degree + 1, extended), radius, center)

    @classmethod
    def constant(cls, value: complex, degree: int = DEFAULT_DEGREE, radius: float = 1.0,
                 center: complex = 0.0, extended: bool = False) -> "Series1":
        c = _zeros(degree + 1, extended)
        c[0] = scalar(value, extended)
        return cls(c, radius, center)

    @classmethod
    def identity(cls, degree: int = DEFAULT_DEGREE, radius: float = 1.0, center: complex = 0.0,
                 extended: bool = False) -> "Series1":
        return cls.affine(1.0, 0.0, degree, radius, center, extended)

    @classmethod
    def affine(cls, slope: complex, offset: complex, degree: int = DEFAULT_DEGREE,
               radius: float = 1.0, center: complex = 0.0, extended: bool = False) -> "Series1":
        """The map ``x -> slope * x + offset`` expanded about ``center``."""
        c = _zeros(degree + 1, extended)
        slope = scalar(slope, extended)
        c[0] = slope * scalar(center, extended) + scalar(offset, extended)
        if degree >= 1:
            c[1] = slope
        return cls(c, radius, center)

    @classmethod
    def from_polynomial(cls, poly: Sequence[complex], degree: int = DEFAULT_DEGREE,
                        radius: float = 1.0, center: complex = 0.0,
                        extended: bool = False) -> "Series1":
        """Re-expand a polynomial given by its coefficients at 0 about ``center``."""
        p = cls(_resize1(to_array(poly, extended), max(len(poly), 1)), 1.0, 0.0)
        ident = cls.identity(degree, radius, center, extended)
        return _horner1(p.coeffs, ident - p.center, radius, center, degree)

    # -- basic properties -------------------------------------------------

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def extended(self) -> bool:
        return is_extended(self.coeffs)

    def norm(self, radius: float | None = None) -> float:
        """Majorant norm ``sum |c_k| r^k``, an upper bound for the sup on the disk."""
        r = self.radius if radius is None else radius
        return float(np.sum(_abs(self.coeffs) * r ** np.arange(len(self.coeffs))))

    def with_coeffs(self, coeffs: np.ndarray) -> "Series1":
        return Series1(coeffs, self.radius, self.center)

    def with_domain(self, radius: float | None = None, center: complex | None = None) -> "Series1":
        """Same function, possibly re-expanded about a new center (exact for polynomials)."""
        r = self.radius if radius is None else radius
        if center is None or center == self.center:
            return Series1(self.coeffs, r, self.center)
        ident = Series1.identity(self.degree, r, center, self.extended)
        return _horner1(self.coeffs, ident - self.center, r, center, self.degree)

    def truncate(self, degree: int) -> "Series1":
        return self.with_coeffs(_resize1(self.coeffs, degree + 1))

    def to_extended(self) -> "Series1":
        return Series1(to_array(self.coeffs, True), self.radius, self.center)

    def to_double(self) -> "Series1":
        return Series1(to_array(self.coeffs, False), self.radius, complex(self.center))

    # -- evaluation -------------------------------------------------------

    def __call__(self, x):
        """Evaluate at a scalar or numpy array of points (Horner)."""
        u = x - self.center if not isinstance(x, np.ndarray) else np.asarray(x) - self.center
        acc = self.coeffs[-1] * (u * 0 + 1)
        for c in self.coeffs[-2::-1]:
            acc = acc * u + c
        return acc

    def deriv(self) -> "Series1":
        k = np.arange(1, len(self.coeffs))
        if len(k) == 0:
            return Series1(_zeros(1, self.extended), self.radius, self.center)
        return self.with_coeffs(self.coeffs[1:] * k)

    # -- arithmetic -------------------------------------------------------

    def _coerce(self, other: "Series1") -> np.ndarray:
        if other.center != self.center:
            raise ValueError("series have different expansion centers")
        return _resize1(other.coeffs, len(self.coeffs))

    def __add__(self, other):
        if isinstance(other, Series1):
            return self.with_coeffs(self.coeffs + self._coerce(other))
        c = self.coeffs.copy()
        c[0] = c[0] + other
        return self.with_coeffs(c)

    __radd__ = __add__

    def __neg__(self):
        return self.with_coeffs(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Series1):
            return self.with_coeffs(_conv_trunc(self.coeffs, self._coerce(other), len(self.coeffs)))
        return self.with_coeffs(self.coeffs * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Series1):
            return self * other.reciprocal()
        return self.with_coeffs(self.coeffs / other)

    def reciprocal(self) -> "Series1":
        """Truncated series of ``1/f``; needs ``f(center) != 0``."""
        h = self.coeffs
        if abs(h[0]) == 0:
            raise ZeroDivisionError("reciprocal of a series vanishing at its center")
        n = len(h)
        r = _zeros(n, self.extended)
        r[0] = 1 / h[0]
        for k in range(1, n):
            r[k] = -np.dot(h[1:k + 1], r[k - 1::-1]) / h[0]
        return self.with_coeffs(r)

    def compose(self, g: "Series1", slack: float = DEFAULT_SLACK) -> "Series1":
        return compose1(self, g, slack)

    # -- comparison / io --------------------------------------------------

    def distance(self, other: "Series1") -> float:
        return (self - other).norm()

    def to_json(self) -> dict:
        c = self.coeffs
        out = {
            "coeffs": [[float(v.real), float(v.imag)] for v in c],
            "radius": self.radius,
            "degree": self.degree,
        }
        if self.center != 0:
            out["center"] = [float(self.center.real), float(self.center.imag)]
        return out

    @classmethod
    def from_json(cls, data: dict, extended: bool = False) -> "Series1":
        coeffs = [complex(re, im) for re, im in data["coeffs"]]
        if len(coeffs) != data["degree"] + 1:
            raise ValueError("degree does not match number of coefficients")
        center = complex(*data.get("center", (0.0, 0.0)))
        return cls(to_array(coeffs, extended), data["radius"], center)

    def __repr__(self) -> str:
        return f"Series1(degree={self.degree}, radius={self.radius:g}, center={complex(self.center):g})"


def _horner1(coeffs: np.ndarray, h: "Series1 | Series2", radius, center, degree):
    """``sum_k coeffs[k] h^k`` for a series ``h`` (result lives on ``h``'s domain)."""
    if isinstance(h, Series1):
        acc = Series1.constant(coeffs[-1], degree, radius, center, h.extended)
        acc = Series1(_resize1(acc.coeffs, len(h.coeffs)), h.radius, h.center)
    else:
        acc = h * 0 + coeffs[-1]
    for c in coeffs[-2::-1]:
        acc = acc * h + c
    return acc


def _check_domain(h_norm: float, radius: float, slack: float) -> None:
    if h_norm > radius * (1.0 + slack):
        raise DomainEscape(
            f"inner map reaches distance {h_norm:.4g} from the outer center; "
            f"outer radius is {radius:.4g}")


def compose1(f: Series1, g: Series1, slack: float = DEFAULT_SLACK) -> Series1:
    """Truncated expansion of ``f o g`` about ``g``'s center, to ``f``'s degree.

    Raises
    ------
    DomainEscape
        If the majorant of ``g - f.center`` on ``g``'s disk exceeds ``f.radius``
        by more than ``slack`` (relative).
    """
    g = g.truncate(f.degree)
    h = g - f.center
    _check_domain(h.norm(), f.radius, slack)
    return _horner1(f.coeffs, h, g.radius, g.center, f.degree)


def revert_about(f: Series1, center: complex, radius: float | None = None,
                 deriv_tol: float = DERIV_TOL, max_iter: int = 60) -> Series1:
    """Local inverse of ``f`` near ``center``.

    Returns ``g`` expanded about ``f(center)`` with ``g(f(center)) = center`` and
    ``f(g(x)) = x`` to truncation order.  The branch is the one through
    ``center``.  Computed by Newton iteration on series composition, seeded
    with the linear inverse.

    Raises
    ------
    CriticalCenter
        If ``|f'(center)| <= deriv_tol``.
    """
    ext = f.extended
    center = scalar(center, ext)
    d = f.deriv()(center)
    if abs(d) <= deriv_tol:
        raise CriticalCenter(f"|f'({complex(center):.6g})| = {float(abs(d)):.3g} is below tolerance")
    y0 = f(center)
    if radius is None:
        radius = 0.5 * float(abs(d)) * max(f.radius - float(abs(center - f.center)), 1e-12)
    n = f.degree
    ident = Series1.identity(n, radius, y0, ext)
    g = Series1.affine(1 / d, center - y0 / d, n, radius, y0, ext)
    fp = f.deriv()
    prev = math.inf
    for _ in range(max_iter):
        res = _horner1(f.coeffs, g - f.center, radius, y0, n) - ident
        step = res / _horner1(fp.coeffs, g - f.center, radius, y0, n)
        g = g - step
        size = step.norm()
        if size < 1e-15 * max(g.norm(), 1.0) or size >= prev:
            break
        prev = size
    return g


# ---------------------------------------------------------------------------
# two variables


class Series2:
    """Truncated series ``sum_{j,k} c_{jk} (x - cx)^j (y - cy)^k`` on a bidisk."""

    __slots__ = ("coeffs", "radii", "center")

    def __init__(self, coeffs, radii: tuple[float, float] = (1.0, 1.0),
                 center: tuple[complex, complex] = (0.0, 0.0), extended: bool | None = None):
        arr = np.asarray(coeffs)
        if extended is None:
            extended = arr.dtype == object
        arr = to_array(arr, extended)
        if arr.ndim != 2 or 0 in arr.shape:
            raise ValueError("coeffs must be a non-empty 2D array")
        rx, ry = radii
        if not (rx > 0 and ry > 0 and math.isfinite(rx) and math.isfinite(ry)):
            raise ValueError("radii must be positive and finite")
        _check_finite(arr, "Series2")
        arr.setflags(write=False)
        self.coeffs = arr
        self.radii = (float(rx), float(ry))
        self.center = (scalar(center[0], extended), scalar(center[1], extended))

    # -- constructors -----------------------------------------------------

    @classmethod
    def zero(cls, degrees=DEFAULT_DEGREES_2D, radii=(1.0, 1.0), center=(0.0, 0.0),
             extended: bool = False) -> "Series2":
        return cls(_zeros((degrees[0] + 1, degrees[1] + 1), extended), radii, center)

    @classmethod
    def coordinate(cls, which: int, degrees=DEFAULT_DEGREES_2D, radii=(1.0, 1.0),
                   center=(0.0, 0.0), extended: bool = False) -> "Series2":
        """The coordinate function ``x`` (``which=0``) or ``y`` (``which=1``)."""
        c = _zeros((degrees[0] + 1, degrees[1] + 1), extended)
        c[0, 0] = scalar(center[which], extended)
        if which == 0 and degrees[0] >= 1:
            c[1, 0] = 1
        if which == 1 and degrees[1] >= 1:
            c[0, 1] = 1
        return cls(c, radii, center)

    @classmethod
    def from_series1(cls, f: Series1, degrees=None, ry: float = 1.0, cy: complex = 0.0) -> "Series2":
        """A function of ``x`` alone, viewed as a function of ``(x, y)``."""
        if degrees is None:
            degrees = (f.degree, DEFAULT_DEGREES_2D[1])
        c = _zeros((degrees[0] + 1, degrees[1] + 1), f.extended)
        m = min(degrees[0] + 1, len(f.coeffs))
        c[:m, 0] = f.coeffs[:m]
        return cls(c, (f.radius, ry), (f.center, cy))

    @classmethod
    def from_polynomial(cls, poly, degrees=DEFAULT_DEGREES_2D, radii=(1.0, 1.0),
                        center=(0.0, 0.0), extended: bool = False) -> "Series2":
        """Re-expand a polynomial (2D coefficient array at the origin) about ``center``."""
        poly = to_array(poly, extended)
        x = cls.coordinate(0, degrees, radii, center, extended)
        y = cls.coordinate(1, degrees, radii, center, extended)
        return _horner2(poly, x, y)

    # -- properties -------------------------------------------------------

    @property
    def degrees(self) -> tuple[int, int]:
        return (self.coeffs.shape[0] - 1, self.coeffs.shape[1] - 1)

    @property
    def extended(self) -> bool:
        return is_extended(self.coeffs)

    def _weights(self, radii=None) -> np.ndarray:
        rx, ry = self.radii if radii is None else radii
        nx, ny = self.coeffs.shape
        return np.outer(rx ** np.arange(nx), ry ** np.arange(ny))

    def norm(self, radii=None) -> float:
        return float(np.sum(_abs(self.coeffs) * self._weights(radii)))

    def with_coeffs(self, coeffs) -> "Series2":
        return Series2(coeffs, self.radii, self.center)

    def with_domain(self, radii=None, center=None) -> "Series2":
        radii = self.radii if radii is None else radii
        if center is None or (center[0] == self.center[0] and center[1] == self.center[1]):
            return Series2(self.coeffs, radii, self.center)
        x = Series2.coordinate(0, self.degrees, radii, center, self.extended)
        y = Series2.coordinate(1, self.degrees, radii, center, self.extended)
        return compose2(self, x, y, slack=math.inf)

    def truncate(self, degrees) -> "Series2":
        return self.with_coeffs(_resize2(self.coeffs, (degrees[0] + 1, degrees[1] + 1)))

    def to_extended(self) -> "Series2":
        return Series2(to_array(self.coeffs, True), self.radii, self.center)

    def to_double(self) -> "Series2":
        return Series2(to_array(self.coeffs, False), self.radii,
                       (complex(self.center[0]), complex(self.center[1])))

    def at_y(self, y0: complex = 0.0) -> Series1:
        """Restriction to the horizontal line ``y = y0`` as a one-variable series."""
        v = y0 - self.center[1]
        col = self.coeffs[:, -1].copy()
        for k in range(self.coeffs.shape[1] - 2, -1, -1):
            col = col * v + self.coeffs[:, k]
        return Series1(col, self.radii[0], self.center[0])

    def y_part(self) -> "Series2":
        """The series with its ``y``-independent column removed."""
        c = self.coeffs.copy()
        c[:, 0] = 0
        return self.with_coeffs(c)

    # -- evaluation -------------------------------------------------------

    def __call__(self, x, y):
        if not self.extended and (isinstance(x, np.ndarray) or isinstance(y, np.ndarray)):
            return self._eval_array(np.asarray(x, dtype=np.complex128),
                                    np.asarray(y, dtype=np.complex128))
        u = np.asarray(x) - self.center[0] if isinstance(x, np.ndarray) else x - self.center[0]
        v = np.asarray(y) - self.center[1] if isinstance(y, np.ndarray) else y - self.center[1]
        out = 0
        for j in range(self.coeffs.shape[0] - 1, -1, -1):
            row = self.coeffs[j]
            inner = row[-1] * (v * 0 + 1)
            for c in row[-2::-1]:
                inner = inner * v + c
            out = out * u + inner
        return out

    def _eval_array(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x, y = np.broadcast_arrays(x, y)
        u = (x - self.center[0]).reshape(-1)
        v = (y - self.center[1]).reshape(-1)
        nz = np.nonzero(self.coeffs)
        if len(nz[0]) == 0:
            return np.zeros(x.shape, dtype=np.complex128)
        c = self.coeffs[:nz[0].max() + 1, :nz[1].max() + 1]
        rows = c @ np.vander(v, c.shape[1], increasing=True).T
        out = rows[-1].copy()
        for j in range(rows.shape[0] - 2, -1, -1):
            out = out * u + rows[j]
        return out.reshape(x.shape)

    def partial_x(self) -> "Series2":
        nx, ny = self.coeffs.shape
        if nx == 1:
            return self.with_coeffs(_zeros((1, ny), self.extended))
        return self.with_coeffs(self.coeffs[1:] * np.arange(1, nx)[:, None])

    def partial_y(self) -> "Series2":
        return partial_y(self)

    # -- arithmetic -------------------------------------------------------

    def _coerce(self, other: "Series2") -> np.ndarray:
        if other.center[0] != self.center[0] or other.center[1] != self.center[1]:
            raise ValueError("series have different expansion centers")
        return _resize2(other.coeffs, self.coeffs.shape)

    def __add__(self, other):
        if isinstance(other, Series2):
            return self.with_coeffs(self.coeffs + self._coerce(other))
        c = self.coeffs.copy()
        c[0, 0] = c[0, 0] + other
        return self.with_coeffs(c)

    __radd__ = __add__

    def __neg__(self):
        return self.with_coeffs(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Series2):
            return self.with_coeffs(_conv2_trunc(self.coeffs, self._coerce(other), self.coeffs.shape))
        return self.with_coeffs(self.coeffs * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Series2):
            return self * other.reciprocal()
        return self.with_coeffs(self.coeffs / other)

    def reciprocal(self, max_iter: int = 40) -> "Series2":
        """Truncated series of ``1/F`` by Newton iteration ``r <- r (2 - F r)``."""
        c0 = self.coeffs[0, 0]
        if abs(c0) == 0:
            raise ZeroDivisionError("reciprocal of a series vanishing at its center")
        # exact in x along y = cy, then Newton in the y direction
        first = self.at_y(self.center[1]).reciprocal()
        r = Series2.from_series1(first, self.degrees, self.radii[1], self.center[1])
        prev = math.inf
        settled = 0
        for _ in range(max_iter):
            e = 1 - self * r
            size = e.norm()
            r = r + r * e
            if size == 0 or size >= prev:
                # keep going a little: small y-columns lag behind the total
                settled += 1
                if settled > 2:
                    break
            else:
                prev = size
        return r

    def distance(self, other: "Series2") -> float:
        return (self - other).norm()

    def to_json(self) -> dict:
        c = self.coeffs
        out = {
            "coeffs": [[[float(v.real), float(v.imag)] for v in row] for row in c],
            "radii": list(self.radii),
            "degrees": list(self.degrees),
        }
        if self.center[0] != 0 or self.center[1] != 0:
            out["center"] = [[float(z.real), float(z.imag)] for z in self.center]
        return out

    @classmethod
    def from_json(cls, data: dict, extended: bool = False) -> "Series2":
        coeffs = [[complex(re, im) for re, im in row] for row in data["coeffs"]]
        center = tuple(complex(*z) for z in data.get("center", ((0, 0), (0, 0))))
        arr = to_array(coeffs, extended)
        if tuple(d + 1 for d in data["degrees"]) != arr.shape:
            raise ValueError("degrees do not match coefficient array")
        return cls(arr, tuple(data["radii"]), center)

    def __repr__(self) -> str:
        return (f"Series2(degrees={self.degrees}, radii=({self.radii[0]:g}, {self.radii[1]:g}), "
                f"center=({complex(self.center[0]):g}, {complex(self.center[1]):g}))")


def partial_y(F: Series2) -> Series2:
    """Coefficientwise derivative in ``y``."""
    nx, ny = F.coeffs.shape
    if ny == 1:
        return F.with_coeffs(_zeros((nx, 1), F.extended))
    return F.with_coeffs(F.coeffs[:, 1:] * np.arange(1, ny)[None, :])


def _powers(h: Series2, n: int) -> list[Series2]:
    out = [h * 0 + 1]
    for _ in range(n):
        out.append(out[-1] * h)
    return out


def _horner2(coeffs: np.ndarray, hx: Series2, hy: Series2) -> Series2:
    """``sum_{j,k} coeffs[j,k] hx^j hy^k``."""
    ny = coeffs.shape[1]
    ypow = _powers(hy, ny - 1)
    stack = np.stack([p.coeffs for p in ypow])  # (ny, X, Y)

    def row_series(j):
        return hx.with_coeffs(np.tensordot(coeffs[j], stack, axes=(0, 0)))

    acc = row_series(coeffs.shape[0] - 1)
    for j in range(coeffs.shape[0] - 2, -1, -1):
        acc = acc * hx + row_series(j)
    return acc


def compose2(F: Series2, G1: Series2, G2: Series2, slack: float = DEFAULT_SLACK) -> Series2:
    """Expansion of ``F(G1(x, y), G2(x, y))`` on the domain of ``G1``.

    The result has ``G1``'s degrees, radii and center.
    """
    hx = G1 - F.center[0]
    hy = G2.truncate(G1.degrees) - F.center[1]
    hy = Series2(hy.coeffs, G1.radii, G1.center)
    _check_domain(hx.norm(), F.radii[0], slack)
    _check_domain(hy.norm(), F.radii[1], slack)
    return _horner2(F.coeffs, hx, hy)


def compose_outer1(f: Series1, G: Series2, slack: float = DEFAULT_SLACK) -> Series2:
    """Expansion of ``f(G(x, y))`` for a one-variable ``f``."""
    h = G - f.center
    _check_domain(h.norm(), f.radius, slack)
    acc = h * 0 + f.coeffs[-1]
    for c in f.coeffs[-2::-1]:
        acc = acc * h + c
    return acc


def revert_x(F: Series2, anchor: complex, at: complex, radii: tuple[float, float],
             deriv_tol: float = DERIV_TOL, max_iter: int = 60,
             slack: float = DEFAULT_SLACK, at_y: complex | None = None) -> Series2:
    """Inverse of ``x -> F(x, y)`` for each ``y``, as a series in ``(x, y)``.

    Returns ``G`` expanded about ``(at, at_y)`` (``at_y`` defaults to
    ``F.center[1]``) with ``F(G(x, y), y) = x``.
    The branch is the one passing through ``anchor`` on the line
    ``y = F.center[1]``; ``at`` must be close enough to ``F(anchor, cy)`` for the
    branch to be continued along the segment between them.
    """
    ext = F.extended
    cy = F.center[1]
    f0 = F.at_y(cy)
    fp0 = f0.deriv()
    x = scalar(anchor, ext)
    if abs(fp0(x)) <= deriv_tol:
        raise CriticalCenter("inverting at a critical point of the x-map")
    # continue the scalar branch from f0(anchor) to at
    start = f0(x)
    target = scalar(at, ext)
    steps = 16
    for i in range(1, steps + 1):
        goal = start + (target - start) * i / steps
        for _ in range(50):
            d = fp0(x)
            if abs(d) <= deriv_tol:
                raise CriticalCenter("branch continuation meets a critical point")
            dx = (f0(x) - goal) / d
            x = x - dx
            if abs(dx) <= 1e-15 * max(1.0, float(abs(x))):
                break
    d = fp0(x)
    if abs(d) <= deriv_tol:
        raise CriticalCenter("inverting at a critical point of the x-map")
    degrees = F.degrees
    center = (target, cy if at_y is None else scalar(at_y, ext))
    X = Series2.coordinate(0, degrees, radii, center, ext)
    Y = Series2.coordinate(1, degrees, radii, center, ext)
    G = (X - target) * (1 / d) + x
    Fx = F.partial_x()
    prev = math.inf
    settled = 0  # small y-columns converge a little behind the total norm
    for _ in range(max_iter):
        res = compose2(F, G, Y, slack) - X
        step = res / compose2(Fx, G, Y, slack)
        G = G - step
        size = step.norm()
        if size < 1e-15 * max(G.norm(), 1.0) or size >= prev:
            settled += 1
            if settled > 2:
                break
        else:
            prev = size
    return G
