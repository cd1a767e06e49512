"""Renormalization of Henon-like pairs in two variables.

A pair ``S = (A, B)`` has the structural form ``A = (a, h)`` on
``Omega = Z x U`` and ``B = (b, x)`` on ``Gamma = W x V``; only the three
functions ``a``, ``h`` and ``b`` are stored.  One renormalization step is

    pre-renormalize  (B o A^2, B o A)
    straighten       conjugate by H(x, y) = (a_y^-1(x), y), branch through x = 1
    recenter/rescale conjugate by T_a(x, y) = (x + c_a, y + c_a) and by the
                     scaling with pi_1 B(0) = 1
    project          T_b recentering, then b += c x^3 + d x^4 so that the
                     commutator defects at orders 0 and 2 vanish.

Shifting ``y`` along with ``x`` makes ``T_a`` keep the second coordinate of
``B`` equal to ``x`` exactly, so commuting pairs stay commuting.
Straightening and recentering are done algebraically: with
``k(x, y) = h(a_y^-1(x), y)`` one has

    H^-1 B A^2 H = (a(b(a(x, k), h(x, k)), a(x, k)), a(x, k))
    H^-1 B A H   = (a(b(x, k), x), x).

Pairs come in two kinds.  :class:`Pair2D` stores truncated series and is
renormalized by series composition, which keeps every power of ``y`` in its
own coefficient column, so tiny vertical parts keep their relative accuracy.
:class:`PointPair` stores callables.  It is used when a renormalization is not
analytic on the fixed polydisks (the first step of a Henon pair with a
sizeable ``nu``): the next renormalization is then evaluated through the
nested inverse branches and fitted back to series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import Config
from .errors import CriticalCenter, DegenerateTilt, DomainEscape, RenormError
from .renorm1d import MU_STAR, Pair1D, ZeroScaling, renormalize1d, siegel_c
from .series import Series1, Series2, compose1, compose2, revert_x


class NoCriticalPoint(RenormError):
    """Newton's method found no critical point near 0."""


class SingularCorrection(RenormError):
    """The 2x2 system of the almost-commuting projection is degenerate."""


class SingularDifferential(DegenerateTilt):
    """A microscope differential has a vanishing diagonal entry."""


CRIT_TOL = 1e-13
DEFECT_TOL = 1e-13
SERIES_CHECK_TOL = 1e-7
FD_STEP = 1e-5
MAX_DEPTH = 2
POINT_SHRINK = 0.8

Fun2 = Callable[[np.ndarray, np.ndarray], np.ndarray]
Domain = tuple[tuple[float, float], tuple[complex, complex]]


# ---------------------------------------------------------------------------
# Henon maps


@dataclass(frozen=True)
class HenonMap:
    """``H(x, y) = (x^2 + c - b y, x)`` with fixed-point multipliers ``mu, nu``."""

    mu: complex
    nu: complex
    c: complex
    b: complex

    @classmethod
    def from_multipliers(cls, mu: complex = MU_STAR, nu: complex = 0.0) -> "HenonMap":
        if not abs(nu) < 1:
            raise ValueError("|nu| must be below 1")
        return cls(complex(mu), complex(nu), siegel_c(mu, nu), complex(mu * nu))

    def __call__(self, x, y):
        return x * x + self.c - self.b * y, x

    def inverse(self, x, y):
        return y, (y * y + self.c - x) / self.b

    def iterate(self, x, y, n: int):
        for _ in range(n):
            x, y = x * x + self.c - self.b * y, x
        return x, y

    def differential(self, x, y=0.0) -> np.ndarray:
        return np.array([[2 * x, -self.b], [1.0, 0.0]], dtype=complex)

    @property
    def jacobian(self) -> complex:
        return self.b

    def fixed_point(self) -> tuple[complex, complex]:
        p = (self.mu + self.nu) / 2
        return p, p


# ---------------------------------------------------------------------------
# pointwise helpers


def _arr(v) -> np.ndarray:
    return np.asarray(v, dtype=complex)


def _dx(f) -> Fun2:
    if isinstance(f, Series2):
        return f.partial_x()
    return lambda x, y: (f(_arr(x) + FD_STEP, y) - f(_arr(x) - FD_STEP, y)) / (2 * FD_STEP)


def _dy(f) -> Fun2:
    if isinstance(f, Series2):
        return f.partial_y()
    return lambda x, y: (f(x, _arr(y) + FD_STEP) - f(x, _arr(y) - FD_STEP)) / (2 * FD_STEP)


def _at(f, x: complex, y: complex = 0.0) -> complex:
    return complex(_arr(f(np.array([x], dtype=complex), np.array([y], dtype=complex)))[0])


def _taylor(fun, x0: complex, n: int, radius: float = 0.1, samples: int = 32) -> np.ndarray:
    """First ``n`` Taylor coefficients of ``fun`` at ``x0`` by a discrete Cauchy integral."""
    w = np.exp(2j * np.pi * np.arange(samples) / samples)
    vals = _arr(fun(x0 + radius * w))
    return (np.fft.fft(vals) / samples)[:n] / radius ** np.arange(n)


def _critical_point(fun, seed: complex = 0.0, radius: float = 0.6,
                    tol: float = CRIT_TOL, max_iter: int = 40) -> complex:
    """Zero of ``fun'`` near ``seed`` by Newton's method."""
    x = complex(seed)
    for _ in range(max_iter):
        c = _taylor(fun, x, 3, radius=0.05, samples=16)
        if abs(c[2]) == 0:
            raise NoCriticalPoint("degenerate critical point")
        step = c[1] / (2 * c[2])
        x -= step
        if abs(x - seed) > radius:
            raise NoCriticalPoint(f"critical point search left the disk of radius {radius}")
        if abs(step) <= tol:
            return x
    raise NoCriticalPoint("critical point search did not converge")


def branch_inverse(a, X, Y, anchor: complex = 1.0, steps: int = 12,
                   deriv_tol: float = 1e-10, ax: Fun2 | None = None) -> np.ndarray:
    """Solve ``a(u, Y) = X`` for ``u`` on the branch through ``u = anchor`` at ``y = 0``.

    The branch is continued along straight segments from ``(a(anchor, 0), 0)``.
    """
    X, Y = np.broadcast_arrays(_arr(X), _arr(Y))
    ax = _dx(a) if ax is None else ax
    x0 = _at(a, anchor)
    u = np.full(X.shape, complex(anchor))
    for i in range(1, steps + 1):
        t = i / steps
        Xt = x0 + t * (X - x0)
        Yt = t * Y
        for _ in range(40 if i == steps else 10):
            d = _arr(ax(u, Yt))
            if np.any(np.abs(d) <= deriv_tol):
                raise CriticalCenter("inverse branch meets a critical point")
            du = (_arr(a(u, Yt)) - Xt) / d
            u = u - du
            if np.all(np.abs(du) <= 1e-14 * np.maximum(1.0, np.abs(u))):
                break
    return u


def _torus(domain: Domain, mx: int, my: int, shrink: float = 1.0, phase: float = 0.0):
    (rx, ry), (cx, cy) = domain
    wx = np.exp(2j * np.pi * (np.arange(mx) + phase) / mx)
    wy = np.exp(2j * np.pi * (np.arange(my) + phase) / my)
    x = cx + shrink * rx * wx[:, None] * np.ones(my)[None, :]
    y = cy + shrink * ry * np.ones(mx)[:, None] * wy[None, :]
    return x, y


# ---------------------------------------------------------------------------
# pairs


def _vec_norm(*parts: float) -> float:
    return math.sqrt(sum(p * p for p in parts))


class _PairOps:
    """Operations shared by series pairs and pointwise pairs."""

    a: Fun2
    h: Fun2
    bfun: Fun2

    def A(self, x, y):
        return self.a(x, y), self.h(x, y)

    def B(self, x, y):
        return self.bfun(x, y), _arr(x)

    def commutator(self, x):
        """First coordinate of ``A o B - B o A`` on the line ``y = 0``."""
        x = _arr(x)
        zero = np.zeros_like(x)
        ab = self.a(self.bfun(x, zero), x)
        ax0, hx0 = self.A(x, zero)
        return _arr(ab) - _arr(self.bfun(ax0, hx0))

    def defects(self) -> tuple[complex, complex]:
        """Value and second derivative at 0 of :meth:`commutator`."""
        c = _taylor(self.commutator, 0.0, 3)
        return complex(c[0]), complex(2 * c[2])

    def critical_offsets(self, radius: float = 0.6) -> tuple[float, float]:
        """Distances from 0 of the critical points of ``pi_1 A`` and ``pi_1 B`` on ``y = 0``."""
        out = []
        for f in (self.a, self.bfun):
            g = lambda x, f=f: f(x, np.zeros_like(x))
            out.append(abs(_critical_point(g, 0.0, radius)))
        return out[0], out[1]

    def jac_A(self, x, y):
        return (_dx(self.a)(x, y) * _dy(self.h)(x, y)
                - _dy(self.a)(x, y) * _dx(self.h)(x, y))

    def jac_B(self, x, y):
        return -_dy(self.bfun)(x, y)

    def epsilon(self) -> float:
        """Realized size of the deviation from a degenerate almost-commuting pair."""
        d0, d2 = self.defects()
        ca, cb = self.critical_offsets()
        return max(self.norm_y(), abs(d0), abs(d2), ca, cb)

    def norm_y(self) -> float:  # pragma: no cover - overridden
        raise NotImplementedError


@dataclass(frozen=True)
class Pair2D(_PairOps):
    """``A = (a, h)`` on ``Z x U`` and ``B = (bfun, x)`` on ``W x V``."""

    a: Series2
    h: Series2
    bfun: Series2

    depth = 0

    @property
    def omega(self) -> Domain:
        return self.a.radii, self.a.center

    @property
    def gamma(self) -> Domain:
        return self.bfun.radii, self.bfun.center

    def pi1(self) -> Pair1D:
        return Pair1D(self.a.at_y(0.0), self.bfun.at_y(0.0))

    def _x_sup(self) -> float:
        return abs(self.bfun.center[0]) + self.bfun.radii[0]

    def norm(self) -> float:
        na = _vec_norm(self.a.norm(), self.h.norm())
        nb = _vec_norm(self.bfun.norm(), self._x_sup())
        return 0.5 * (na + nb)

    def norm_y(self) -> float:
        """Majorant bound for ``(sup|d_y A| + sup|d_y B|) / 2``."""
        na = _vec_norm(self.a.partial_y().norm(), self.h.partial_y().norm())
        return 0.5 * (na + self.bfun.partial_y().norm())

    def distance(self, other: "Pair2D") -> float:
        da = _vec_norm(self.a.distance(other.a), self.h.distance(other.h))
        return 0.5 * (da + self.bfun.distance(other.bfun))

    def check_structure(self, tol: float = 1e-10) -> None:
        """Raise unless ``pi_1 B(0) = 1`` and the majorant of ``h`` is below 2."""
        if abs(self.bfun(0.0, 0.0) - 1) > tol:
            raise RenormError("pi_1 B(0) differs from 1")
        if self.h.norm() >= 2:
            raise RenormError("majorant of h is not below 2")

    def to_double(self) -> "Pair2D":
        return Pair2D(self.a.to_double(), self.h.to_double(), self.bfun.to_double())

    def to_json(self) -> dict:
        return {"a": self.a.to_json(), "h": self.h.to_json(), "b": self.bfun.to_json()}

    @classmethod
    def from_json(cls, data: dict) -> "Pair2D":
        return cls(Series2.from_json(data["a"]), Series2.from_json(data["h"]),
                   Series2.from_json(data["b"]))


@dataclass(frozen=True, eq=False)
class PointPair(_PairOps):
    """A pair given by callables.

    ``A_fun(x, y)`` returns both coordinates of ``A`` in one evaluation;
    ``depth`` counts the pointwise renormalizations stacked inside.
    """

    A_fun: Callable
    bfun: Fun2
    omega: Domain
    gamma: Domain
    depth: int = 1

    def a(self, x, y):
        return self.A_fun(x, y)[0]

    def h(self, x, y):
        return self.A_fun(x, y)[1]

    def A(self, x, y):
        return self.A_fun(x, y)

    def norm_y(self, mx: int = 16, my: int = 8) -> float:
        """Sampled ``(sup|d_y A| + sup|d_y B|) / 2`` on a shrunken torus.

        The pair is not analytic on the whole polydisk, so no majorant exists.
        """
        x, y = _torus(self.omega, mx, my, POINT_SHRINK)
        ay = np.abs(_dy(self.a)(x, y)).max()
        hy = np.abs(_dy(self.h)(x, y)).max()
        x, y = _torus(self.gamma, mx, my, POINT_SHRINK)
        by = np.abs(_dy(self.bfun)(x, y)).max()
        return 0.5 * (_vec_norm(ay, hy) + by)


def _domains(cfg: Config) -> tuple[Domain, Domain]:
    d, d2 = cfg.domains, cfg.domains2d
    omega = ((d.z_radius, d2.u_radius), (d.z_center, d2.u_center))
    gamma = ((d.w_radius, d2.v_radius), (d.w_center, d2.v_center))
    return omega, gamma


def _degrees(cfg: Config) -> tuple[int, int]:
    return cfg.degree_x, cfg.degree_y


def henon_pair(mu: complex = MU_STAR, nu: complex = 0.0, cfg: Config | None = None) -> Pair2D:
    """``Lambda(H^2, H)`` for the Henon map with multipliers ``mu, nu``; ``lambda = c``."""
    cfg = cfg or Config()
    hm = HenonMap.from_multipliers(mu, nu)
    c, b = hm.c, hm.b
    if abs(c) < 1e-12:
        raise ZeroScaling("c = 0 gives a degenerate rescaling")
    # a = c^-1 pi_1 H^2(c x, c y), h = c^-1 pi_1 H(c x, c y)
    pa = np.zeros((5, 3), dtype=complex)
    pa[0, 0] = 1 + c
    pa[1, 0] = -b
    pa[2, 0] = 2 * c * c
    pa[4, 0] = c ** 3
    pa[0, 1] = -2 * b * c
    pa[2, 1] = -2 * b * c * c
    pa[0, 2] = b * b * c
    pb = np.zeros((3, 2), dtype=complex)
    pb[0, 0] = 1
    pb[2, 0] = c
    pb[0, 1] = -b
    (ro, co), (rg, cg) = _domains(cfg)
    deg = _degrees(cfg)
    a = Series2.from_polynomial(pa, deg, ro, co)
    h = Series2.from_polynomial(pb, deg, ro, co)
    bf = Series2.from_polynomial(pb, deg, rg, cg)
    return Pair2D(a, h, bf)


def embed_1d(z: Pair1D, cfg: Config | None = None) -> Pair2D:
    """``Lambda((eta xi eta, eta), (eta xi, x))``: a degenerate pair over ``R(z)``."""
    cfg = cfg or Config()
    lam = z.lam
    if abs(lam) < 1e-12:
        raise ZeroScaling("lambda vanishes")
    z1 = renormalize1d(z.to_double(), cfg)
    e = z.eta.to_double()
    scale = Series1.affine(complex(lam), 0, e.degree, e.radius, e.center)
    hser = compose1(e, scale, cfg.slack) / complex(lam)
    (ro, co), (rg, cg) = _domains(cfg)
    deg = _degrees(cfg)
    a = Series2.from_series1(z1.eta.truncate(deg[0]), deg, ro[1], co[1])
    h = Series2.from_series1(hser.truncate(deg[0]), deg, ro[1], co[1])
    b = Series2.from_series1(z1.xi.truncate(deg[0]), deg, rg[1], cg[1])
    return Pair2D(a, h, b)


# ---------------------------------------------------------------------------
# the steps of the operator


@dataclass(frozen=True, eq=False)
class PrePair:
    """Pointwise pre-renormalization ``(B o A^2, B o A)`` of a pair."""

    pair: _PairOps

    def A1(self, x, y):
        S = self.pair
        return S.B(*S.A(*S.A(x, y)))

    def B1(self, x, y):
        S = self.pair
        return S.B(*S.A(x, y))

    def _dA(self, x, y) -> np.ndarray:
        S = self.pair
        return np.array([[_at(_dx(S.a), x, y), _at(_dy(S.a), x, y)],
                         [_at(_dx(S.h), x, y), _at(_dy(S.h), x, y)]])

    def _dB(self, x, y) -> np.ndarray:
        S = self.pair
        return np.array([[_at(_dx(S.bfun), x, y), _at(_dy(S.bfun), x, y)], [1.0, 0.0]])

    def _A(self, x, y):
        p = self.pair.A(np.array([x]), np.array([y]))
        return complex(_arr(p[0])[0]), complex(_arr(p[1])[0])

    def jac_A1(self, x: complex, y: complex) -> complex:
        p1 = self._A(x, y)
        p2 = self._A(*p1)
        return complex(np.linalg.det(self._dB(*p2) @ self._dA(*p1) @ self._dA(x, y)))

    def jac_B1(self, x: complex, y: complex) -> complex:
        p1 = self._A(x, y)
        return complex(np.linalg.det(self._dB(*p1) @ self._dA(x, y)))


def prerenorm2d(S: _PairOps) -> PrePair:
    return PrePair(S)


@dataclass(frozen=True, eq=False)
class Straightened:
    """``(H^-1 B A^2 H, H^-1 B A H)`` with ``H(x, y) = (a_y^-1(x), y)``, pointwise."""

    pair: _PairOps
    anchor: complex = 1.0
    ax: Fun2 | None = None

    def H(self, x, y):
        return branch_inverse(self.pair.a, x, y, self.anchor, ax=self.ax), _arr(y)

    def H_inv(self, x, y):
        return self.pair.a(x, y), _arr(y)

    def _k(self, x, y):
        u, y = self.H(x, y)
        return self.pair.h(u, y)

    def A2(self, x, y):
        S = self.pair
        x = _arr(x)
        k = self._k(x, y)
        ak, hk = S.A(x, k)
        return S.a(S.bfun(ak, hk), ak), ak

    def B2(self, x, y):
        S = self.pair
        x = _arr(x)
        k = self._k(x, y)
        return S.a(S.bfun(x, k), x), x


def straighten(S: _PairOps, anchor: complex = 1.0, deriv_tol: float = 1e-10) -> Straightened:
    ax = _dx(S.a)
    if abs(_at(ax, anchor)) <= deriv_tol:
        raise CriticalCenter("branch anchor is a critical point of a")
    return Straightened(S, anchor, ax)


def _crit_and_scale(st: Straightened, radius: float,
                    max_iter: int = 60) -> tuple[complex, complex]:
    """Recentering ``c_a`` and scaling ``lambda = pi_1 B2(c_a, c_a) - c_a``.

    ``c_a`` is the critical point of ``x -> pi_1 B2 o A2(x, c_a)``, the
    horizontal line through ``T_a(0, 0)``; it is found by iterating on the height.
    """
    ca = 0j
    for _ in range(max_iter):
        f = lambda x, h=ca: st.B2(*st.A2(x, np.full_like(x, h)))[0]
        c = _taylor(f, ca, 3, radius=0.05, samples=16)
        if abs(c[2]) == 0:
            raise NoCriticalPoint("degenerate critical point")
        step = c[1] / (2 * c[2])
        ca -= step
        if abs(ca) > radius:
            raise NoCriticalPoint(f"recentering point lies outside the disk of radius {radius}")
        if abs(step) <= CRIT_TOL:
            break
    else:
        raise NoCriticalPoint("recentering point did not settle")
    lam = _at(lambda x, y: st.B2(x, y)[0], ca, ca) - ca
    if abs(lam) < 1e-12:
        raise ZeroScaling("rescaling factor vanishes")
    return ca, lam


def _coords(degrees, radii, center):
    X = Series2.coordinate(0, degrees, radii, center)
    Y = Series2.coordinate(1, degrees, radii, center)
    return X, Y


def _series_step(S: Pair2D, ca: complex, lam: complex, slack: float) -> Pair2D:
    """``Lambda(T_a^-1 o (A2, B2) o T_a)`` by series composition."""
    a, h, b = S.a, S.h, S.bfun
    out = []
    for dom, which in ((a, "A"), (b, "B")):
        (rx, ry), (cx, cy) = dom.radii, dom.center
        X, Y = _coords(dom.degrees, (rx, ry), (cx, cy))
        Xs = X * lam + ca
        Ys = Y * lam + ca
        G = revert_x(a, 1.0, lam * cx + ca, (abs(lam) * rx, abs(lam) * ry),
                     slack=slack, at_y=lam * cy + ca)
        u = compose2(G, Xs, Ys, slack)
        k = compose2(h, u, Ys, slack)
        if which == "A":
            ak = compose2(a, Xs, k, slack)
            hk = compose2(h, Xs, k, slack)
            bb = compose2(b, ak, hk, slack)
            a2 = compose2(a, bb, ak, slack)
            out += [(a2 - ca) / lam, (ak - ca) / lam]
        else:
            bk = compose2(b, Xs, k, slack)
            b2 = compose2(a, bk, Xs, slack)
            out.append((b2 - ca) / lam)
    return Pair2D(*out)


def _rescaled_pointwise(st: Straightened, ca: complex, lam: complex) -> PointPair:
    """``Lambda(T_a^-1 o (A2, B2) o T_a)`` as callables."""

    def A3(x, y):
        X, Y = st.A2(lam * _arr(x) + ca, lam * _arr(y) + ca)
        return (X - ca) / lam, (Y - ca) / lam

    def b3(x, y):
        return (st.B2(lam * _arr(x) + ca, lam * _arr(y) + ca)[0] - ca) / lam

    S = st.pair
    return PointPair(A3, b3, S.omega, S.gamma, S.depth + 1)


def _boundary_points(domain: Domain, n: int = 8):
    (rx, ry), (cx, cy) = domain
    t = 2 * np.pi * (np.arange(n) + 0.5) / n
    return cx + 0.9 * rx * np.exp(1j * t), cy + 0.9 * ry * np.exp(3j * t)


def _mismatch(Q: Pair2D, P: _PairOps) -> float:
    """Largest difference between a series pair and a pointwise pair near the boundary."""
    x, y = _boundary_points(Q.omega)
    pa, ph = P.A(x, y)
    err = max(np.max(np.abs(Q.a(x, y) - pa)), np.max(np.abs(Q.h(x, y) - ph)))
    x, y = _boundary_points(Q.gamma)
    return float(max(err, np.max(np.abs(Q.bfun(x, y) - P.bfun(x, y)))))


def _fit_samples(n: int) -> int:
    return max(n + 36, 24)


def fit_pair(P: PointPair, cfg: Config | None = None) -> tuple[Pair2D, float]:
    """Fit series on the polydisks of ``P`` by a 2D FFT on the distinguished boundary.

    Returns the pair and its relative fit error: the largest of the coefficient
    tail and the mismatch with ``P`` at points off the sampling grid.
    """
    cfg = cfg or Config()
    nx, ny = cfg.degree_x + 1, cfg.degree_y + 1
    mx, my = _fit_samples(nx), _fit_samples(ny)
    out = []
    for dom, funs in ((P.omega, P.A), (P.gamma, lambda x, y: (P.bfun(x, y),))):
        (rx, ry), (cx, cy) = dom
        x, y = _torus(dom, mx, my)
        w = np.outer(rx ** np.arange(nx), ry ** np.arange(ny))
        for vals in funs(x, y):
            coef = (np.fft.fft2(_arr(vals)) / (mx * my))[:nx, :ny] / w
            out.append(Series2(coef, (rx, ry), (cx, cy)))
    Q = Pair2D(*out)
    err = 0.0
    for F in Q.a, Q.h, Q.bfun:
        c = np.abs(F.coeffs) * F._weights()
        err = max(err, (c[-4:].sum() + c[:, -2:].sum()) / c.sum())
    err = max(err, _mismatch(Q, P) / Q.norm())
    return Q, float(err)


def recenter_rescale(st: Straightened, cfg: Config | None = None):
    """``(Lambda(T_a^-1 A2 T_a, T_a^-1 B2 T_a), c_a, lambda, path)``.

    For a series pair the series composition is tried first and checked
    against pointwise values near the distinguished boundary.  Otherwise the
    pair is sampled pointwise and fitted; when the fit fails (the result is not
    analytic on the polydisks) the pointwise pair itself is returned.
    """
    cfg = cfg or Config()
    ca, lam = _crit_and_scale(st, cfg.crit_radius)
    P = _rescaled_pointwise(st, ca, lam)
    if isinstance(st.pair, Pair2D):
        try:
            Q = _series_step(st.pair, ca, lam, cfg.slack)
            if _mismatch(Q, P) <= SERIES_CHECK_TOL:
                return Q, ca, lam, "series"
        except (DomainEscape, CriticalCenter, ZeroDivisionError, FloatingPointError):
            pass
    Q, err = fit_pair(P, cfg)
    if err <= cfg.fit_tol:
        return Q, ca, lam, "fit"
    if P.depth > MAX_DEPTH:
        raise DomainEscape(f"renormalization is not analytic on the polydisks (fit error {err:.1e})")
    return P, ca, lam, "pointwise"


def _x_monomials(F: Series2):
    p3 = np.zeros((4, 1))
    p3[3, 0] = 1
    p4 = np.zeros((5, 1))
    p4[4, 0] = 1
    return (Series2.from_polynomial(p3, F.degrees, F.radii, F.center),
            Series2.from_polynomial(p4, F.degrees, F.radii, F.center))


@dataclass(frozen=True)
class Projection:
    c_b: complex
    rho: complex
    c: complex
    d: complex
    defect0: complex
    defect2: complex


def _correction_matrix(a0: Callable) -> np.ndarray:
    """Derivative of the two defects with respect to the coefficients of ``x^3, x^4``."""
    t = _taylor(a0, 0.0, 3)
    v, d1, d2 = t[0], t[1], 2 * t[2]
    return np.array([[-v ** 3, -v ** 4],
                     [-(6 * v * d1 ** 2 + 3 * v ** 2 * d2),
                      -(12 * v ** 2 * d1 ** 2 + 4 * v ** 3 * d2)]])


def _solve_corrections(make, a0, tol: float):
    """Newton on ``(c, d)`` so that ``make(c, d)`` has vanishing defects."""
    c = d = 0j
    Q = make(c, d)
    jac = None
    for _ in range(5):
        d0, d2 = Q.defects()
        if max(abs(d0), abs(d2)) <= tol * 1e-2:
            break
        if jac is None:
            jac = _correction_matrix(a0)
            if abs(np.linalg.det(jac)) < 1e-12:
                raise SingularCorrection("a(0,0) or its second derivative nearly vanishes")
        dc, dd = np.linalg.solve(jac, np.array([d0, d2]))
        c, d = c - dc, d - dd
        Q = make(c, d)
    return Q, complex(c), complex(d)


def project_ac(P: _PairOps, cfg: Config | None = None, tol: float = DEFECT_TOL):
    """Recenter at the critical point of ``pi_1 A o B``, then add ``c x^3 + d x^4`` to ``b``.

    The recentering ``A -> (A(rho x, rho y) - (c_b, 0)) / rho`` and
    ``b -> b(rho x + c_b, rho y) / rho`` uses ``rho = b(c_b, 0)``, which keeps
    ``pi_1 B(0) = 1``; the second coordinate of ``B`` stays ``x``.
    """
    cfg = cfg or Config()
    g = lambda x: P.a(P.bfun(x, np.zeros_like(x)), x)
    cb = _critical_point(g, 0.0, cfg.crit_radius)
    rho = 1.0 + 0j
    if isinstance(P, Pair2D):
        a, h, b = P.a, P.h, P.bfun
        if cb != 0:
            rho = complex(b(cb, 0.0))
            if abs(rho) < 1e-12:
                raise ZeroScaling("recentering scale vanishes")
            Xa, Ya = _coords(a.degrees, a.radii, a.center)
            a = (compose2(a, Xa * rho, Ya * rho, cfg.slack) - cb) / rho
            h = compose2(h, Xa * rho, Ya * rho, cfg.slack) / rho
            Xb, Yb = _coords(b.degrees, b.radii, b.center)
            b = compose2(b, Xb * rho + cb, Yb * rho, cfg.slack) / rho
        m3, m4 = _x_monomials(b)
        make = lambda c, d: Pair2D(a, h, b + m3 * c + m4 * d)
        a0 = lambda x: a(x, np.zeros_like(x))
    else:
        rho = _at(P.bfun, cb)
        if abs(rho) < 1e-12:
            raise ZeroScaling("recentering scale vanishes")

        def A4(x, y, P=P, cb=cb, rho=rho):
            X, Y = P.A(rho * _arr(x), rho * _arr(y))
            return (X - cb) / rho, Y / rho

        def b4(x, y, P=P, cb=cb, rho=rho):
            return P.bfun(rho * _arr(x) + cb, rho * _arr(y)) / rho

        def make(c, d):
            bc = lambda x, y: b4(x, y) + c * _arr(x) ** 3 + d * _arr(x) ** 4
            return PointPair(A4, bc, P.omega, P.gamma, P.depth)

        a0 = lambda x: A4(x, np.zeros_like(x))[0]
    Q, c, d = _solve_corrections(make, a0, tol)
    d0, d2 = Q.defects()
    return Q, Projection(complex(cb), complex(rho), c, d, d0, d2)


@dataclass(frozen=True)
class StepRecord:
    level: int
    eps_y: float
    defect0: complex
    defect2: complex
    lam: complex
    c_a: complex
    c_b: complex
    correction_c: complex
    correction_d: complex
    residual_to_embedding: float | None
    path: str
    stage: "Stage" = field(repr=False)

    def to_json(self) -> dict:
        cpx = lambda z: [float(z.real), float(z.imag)]
        return {
            "level": self.level,
            "eps_y": float(self.eps_y),
            "defect0": float(abs(self.defect0)),
            "defect2": float(abs(self.defect2)),
            "lambda": cpx(self.lam),
            "c_a": cpx(self.c_a),
            "c_b": cpx(self.c_b),
            "correction_c": cpx(self.correction_c),
            "correction_d": cpx(self.correction_d),
            "residual_to_embedding": self.residual_to_embedding,
            "path": self.path,
        }


def renormalize2d_step(S: _PairOps, cfg: Config | None = None, level: int = 0,
                       compare_embedding: bool = False) -> tuple[_PairOps, StepRecord]:
    """One application of the 2D operator, with its bookkeeping."""
    cfg = cfg or Config()
    st = straighten(S, deriv_tol=cfg.deriv_tol)
    P, ca, lam, path = recenter_rescale(st, cfg)
    Q, proj = project_ac(P, cfg)
    resid = None
    if compare_embedding and isinstance(S, Pair2D) and isinstance(Q, Pair2D):
        try:
            resid = Q.distance(embed_1d(S.pi1(), cfg))
        except RenormError:
            resid = None
    rec = StepRecord(level, S.norm_y(), proj.defect0, proj.defect2, lam, ca, proj.c_b,
                     proj.c, proj.d, resid, path, Stage(S.a, lam, ca, ax=st.ax))
    return Q, rec


def renormalize2d(S: _PairOps, cfg: Config | None = None) -> _PairOps:
    return renormalize2d_step(S, cfg)[0]


def renorm_orbit(S: _PairOps, n: int, cfg: Config | None = None,
                 compare_embedding: bool = False) -> tuple[list[_PairOps], list[StepRecord]]:
    """``[S, R(S), ..., R^n(S)]`` and the records of the ``n`` steps."""
    pairs, recs = [S], []
    for level in range(n):
        nxt, rec = renormalize2d_step(pairs[-1], cfg, level, compare_embedding)
        pairs.append(nxt)
        recs.append(rec)
    return pairs, recs


def henon_orbit(mu: complex = MU_STAR, nu: complex = 0.0, n: int = 4,
                cfg: Config | None = None) -> tuple[list[_PairOps], list[StepRecord]]:
    """Renormalizations ``Sigma_0, ..., Sigma_n`` of the Henon pair."""
    return renorm_orbit(henon_pair(mu, nu, cfg), n, cfg)


def trace_json(records: list[StepRecord]) -> dict:
    return {"schema_version": 1, "levels": [r.to_json() for r in records]}


# ---------------------------------------------------------------------------
# microscope maps


@dataclass(frozen=True, eq=False)
class Stage:
    """One microscope map ``Phi = H o T_a o s``: ``(x, y) -> (a_Y^-1(l x + c), Y)``, ``Y = l y + c``."""

    a: Fun2
    lam: complex
    shift: complex
    anchor: complex = 1.0
    ax: Fun2 | None = None

    def __call__(self, x, y):
        X = self.lam * _arr(x) + self.shift
        Y = self.lam * _arr(y) + self.shift
        return branch_inverse(self.a, X, Y, self.anchor, ax=self.ax), Y

    def inverse(self, X, Y):
        return (_arr(self.a(X, Y)) - self.shift) / self.lam, (_arr(Y) - self.shift) / self.lam

    def differential(self, x: complex = 1.0, y: complex = 0.0) -> np.ndarray:
        u, Y = self(np.array([x]), np.array([y]))
        u, Y = complex(u[0]), complex(Y[0])
        ax = _at(self.ax or _dx(self.a), u, Y)
        ay = _at(_dy(self.a), u, Y)
        if ax == 0:
            raise SingularDifferential("horizontal derivative of a vanishes")
        lam = complex(self.lam)
        return np.array([[lam / ax, -lam * ay / ax], [0.0, lam]], dtype=complex)

    def phi(self, x):
        """The one-variable part ``x -> a_0^-1(l x + c)``."""
        x = _arr(x)
        return self(x, np.zeros_like(x))[0]


@dataclass(frozen=True)
class Microscope:
    """``Phi^n_k = Phi_k o ... o Phi_{k+n-1}``."""

    stages: tuple[Stage, ...]
    k: int = 0

    @property
    def n(self) -> int:
        return len(self.stages)

    def __call__(self, x, y):
        x = _arr(x)
        y = _arr(y) * np.ones_like(x)
        for st in reversed(self.stages):
            x, y = st(x, y)
        return x, y

    def inverse(self, x, y):
        for st in self.stages:
            x, y = st.inverse(x, y)
        return x, y

    def differential(self, x: complex = 1.0, y: complex = 0.0) -> np.ndarray:
        D = np.eye(2, dtype=complex)
        px, py = np.array([x], dtype=complex), np.array([y], dtype=complex)
        for st in reversed(self.stages):
            D = st.differential(complex(px[0]), complex(py[0])) @ D
            px, py = st(px, py)
        return D

    def prefix(self, n: int) -> "Microscope":
        return Microscope(self.stages[:n], self.k)

    def normalized(self, x, y, lam_star: complex):
        """``(Lambda^n_k)^-1 o T_1^-1 o Phi^n_k o T_1`` with ``Lambda^n_k = diag(lam*^2n, prod lam)``."""
        X, Y = self(_arr(x) + 1, y)
        prod = complex(np.prod([complex(st.lam) for st in self.stages])) if self.stages else 1.0
        return (X - 1) / lam_star ** (2 * self.n), Y / prod


def microscope(S: _PairOps, k: int, n: int, cfg: Config | None = None,
               records: list[StepRecord] | None = None) -> Microscope:
    """Microscope maps of the renormalizations of ``S`` at levels ``k .. k + n - 1``.

    ``records`` from an earlier :func:`renorm_orbit` of ``S`` are reused when given.
    """
    recs = list(records or [])
    if len(recs) < k + n:
        P = S
        recs = []
        for level in range(k + n):
            P, rec = renormalize2d_step(P, cfg, level)
            recs.append(rec)
    return Microscope(tuple(r.stage for r in recs[k:k + n]), k)


@dataclass(frozen=True)
class TiltDecomposition:
    k: int
    u: complex
    v: complex
    s: complex

    def matrix(self) -> np.ndarray:
        return np.array([[1, self.s], [0, 1]]) @ np.diag([self.u, self.v])


def tilt_decomposition(M: Microscope) -> list[TiltDecomposition]:
    """Factor each ``D Phi_k(1, 0)`` as ``[[1, s], [0, 1]] diag(u, v)``."""
    out = []
    for i, st in enumerate(M.stages):
        D = st.differential(1.0, 0.0)
        u, v = D[0, 0], D[1, 1]
        if u == 0 or v == 0:
            raise SingularDifferential("vanishing diagonal entry")
        out.append(TiltDecomposition(M.k + i, complex(u), complex(v), complex(D[0, 1] / v)))
    return out


__all__ = [
    "HenonMap", "Pair2D", "PointPair", "henon_pair", "embed_1d", "prerenorm2d",
    "straighten", "recenter_rescale", "fit_pair", "project_ac", "renormalize2d",
    "renormalize2d_step", "renorm_orbit", "henon_orbit", "trace_json", "StepRecord",
    "Stage", "Microscope", "microscope", "TiltDecomposition", "tilt_decomposition",
    "branch_inverse", "NoCriticalPoint", "SingularCorrection", "SingularDifferential",
]
