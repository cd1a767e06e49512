"""Renormalization arcs, Siegel boundaries, average Jacobians and universality checks.

The arc of a pair ``S`` at level ``n`` is sampled at the left endpoints of the
n-th dynamical partition of ``[-theta, 1]``.  The left endpoint of ``J_n``
corresponds to the critical point ``(0, 0)`` of ``S_n = R^n(S)`` and the left
endpoint of ``I_n`` to ``A_n(0, 0)``; these two points are carried to the
scale of ``S`` by the microscope ``Phi^n_0`` and then moved by the composite
iterates ``S^w`` of the partition words.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import Config
from .errors import DomainEscape, RenormError
from .goldenrot import I_KIND, J_KIND, THETA, Word, fibonacci_q, long_length, partition, short_length
from .renorm1d import MU_STAR, Pair1D, linearize_gstar, quad_renormalized_eval
from .renorm2d import (
    HenonMap,
    Microscope,
    Pair2D,
    StepRecord,
    _arr,
    _dy,
    branch_inverse,
    henon_pair,
    renorm_orbit,
)

UNIT_ROUNDOFF = 2.0 ** -53
NOISE_LIMIT = 0.1
HOLDER_TRIM = 5.0
HOLDER_SCALE = 0.5


class ZeroJacobian(RenormError):
    """A sampled Jacobian vanishes, so its logarithm is undefined."""


class InvalidJacobian(RenormError, ValueError):
    """An average Jacobian outside the punctured unit disk."""


class SignalBelowNoise(RenormError):
    """The vertical part of a renormalization is below the rounding floor."""


class MissingData(RenormError):
    """A report needs a renormalization level that was not computed."""


# ---------------------------------------------------------------------------
# composite iterates


def _inside(x, y, domain, slack: float) -> bool:
    (rx, ry), (cx, cy) = domain
    return bool(np.all(np.abs(_arr(x) - cx) <= (1 + slack) * rx)
                and np.all(np.abs(_arr(y) - cy) <= (1 + slack) * ry))


@dataclass(frozen=True, eq=False)
class Iterate:
    """A composite of the maps ``A`` and ``B`` of a pair.

    ``parts`` are applied right to left.  A base iterate has ``kind`` "A" or
    "B" and no parts.  ``n_a`` and ``n_b`` count the base maps.
    """

    pair: object
    kind: str = ""
    parts: tuple["Iterate", ...] = ()
    n_a: int = 0
    n_b: int = 0
    slack: float | None = None

    @classmethod
    def base(cls, pair, kind: str, slack: float | None = None) -> "Iterate":
        return cls(pair, kind, (), int(kind == "A"), int(kind == "B"), slack)

    def then(self, other: "Iterate") -> "Iterate":
        """``other o self``."""
        return Iterate(self.pair, "", (other, self), self.n_a + other.n_a,
                       self.n_b + other.n_b, self.slack)

    @property
    def henon_count(self) -> int:
        """Number of Henon iterates when ``A = H^2`` and ``B = H``."""
        return 2 * self.n_a + self.n_b

    def _base_eval(self, x, y):
        S = self.pair
        if self.slack is not None:
            dom = S.omega if self.kind == "A" else S.gamma
            if not _inside(x, y, dom, self.slack):
                raise DomainEscape(f"an iterate leaves the domain of {self.kind}")
        return S.A(x, y) if self.kind == "A" else S.B(x, y)

    def __call__(self, x, y):
        x, y = _arr(x), _arr(y)
        if not self.parts:
            X, Y = self._base_eval(x, y)
            return _arr(X), _arr(Y)
        for p in reversed(self.parts):
            x, y = p(x, y)
        return x, y

    def log_jac(self, x, y, logs: "JacobianLogs"):
        """Image of ``(x, y)`` and the log-Jacobian summed along the orbit."""
        x, y = _arr(x), _arr(y)
        if not self.parts:
            L = logs.A(x, y) if self.kind == "A" else logs.B(x, y)
            X, Y = self._base_eval(x, y)
            return _arr(X), _arr(Y), L
        total = np.zeros(np.broadcast(x, y).shape, dtype=complex)
        for p in reversed(self.parts):
            x, y, L = p.log_jac(x, y, logs)
            total = total + L
        return x, y, total

    def jac(self, x, y):
        """Jacobian determinant by the chain rule."""
        x, y = _arr(x), _arr(y)
        if not self.parts:
            S = self.pair
            return _arr(S.jac_A(x, y) if self.kind == "A" else S.jac_B(x, y))
        out = np.ones(np.broadcast(x, y).shape, dtype=complex)
        for p in reversed(self.parts):
            out = out * p.jac(x, y)
            x, y = p(x, y)
        return out


def pre_iterates(S, n: int, slack: float | None = None) -> list[tuple[Iterate, Iterate]]:
    """``[(pA_0, pB_0), ..., (pA_n, pB_n)]`` with ``pA_{k+1} = pB_k pA_k^2``, ``pB_{k+1} = pB_k pA_k``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    pa, pb = Iterate.base(S, "A", slack), Iterate.base(S, "B", slack)
    out = [(pa, pb)]
    for _ in range(n):
        pa, pb = pa.then(pa).then(pb), pa.then(pb)
        out.append((pa, pb))
    return out


def _apply_digits(pre, digits: np.ndarray, x: np.ndarray, y: np.ndarray):
    """Apply ``S^w`` row by row: the leading digit ``alpha_{n-1}`` acts first."""
    x, y = x.copy(), y.copy()
    n = digits.shape[1]
    for i in range(n):
        k = n - 1 - i
        pa = pre[k][0]
        for power in (1, 2):
            m = digits[:, i] >= power
            if np.any(m):
                x[m], y[m] = pa(x[m], y[m])
    return x, y


def word_apply(S, w: Word, z, pre=None, cfg: Config | None = None):
    """``S^w(z) = pA_0^{alpha_0} o ... o pA_{n-1}^{alpha_{n-1}} (z)``."""
    cfg = cfg or Config()
    digits = np.array([d for d in w.digits], dtype=np.int8).reshape(1, -1)
    if w.kind == J_KIND and w.digits == (0,):
        digits = np.zeros((1, 0), dtype=np.int8)
    pre = pre or pre_iterates(S, max(digits.shape[1] - 1, 0), cfg.slack)
    x, y = _apply_digits(pre, digits, _arr([z[0]]), _arr([z[1]]))
    return complex(x[0]), complex(y[0])


# ---------------------------------------------------------------------------
# arcs


@dataclass(frozen=True)
class ArcSample:
    t: float
    point: tuple[complex, complex]
    word: Word
    level: int


@dataclass(frozen=True, eq=False)
class Arc:
    """Samples of the renormalization arc at the left endpoints of the partition."""

    level: int
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    is_j: np.ndarray
    digits: np.ndarray
    end: tuple[complex, complex] = (0j, 0j)  # the point for t = 1

    def __len__(self) -> int:
        return len(self.t)

    def word(self, i: int) -> Word:
        kind = J_KIND if self.is_j[i] else I_KIND
        return Word(tuple(int(d) for d in self.digits[i] if d >= 0), kind)

    def samples(self) -> list[ArcSample]:
        return [ArcSample(float(self.t[i]), (complex(self.x[i]), complex(self.y[i])),
                          self.word(i), self.level) for i in range(len(self))]

    def points(self) -> np.ndarray:
        return np.stack([self.x, self.y], axis=1)

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        i = int(np.argmin(np.abs(self.t - t)))
        if abs(self.t[i] - t) > tol:
            raise KeyError(f"no sample at t = {t}")
        return i

    def max_gap(self) -> float:
        p = self.points()
        return float(np.max(np.linalg.norm(np.diff(p, axis=0), axis=1)))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "word", "level", "x_re", "x_im", "y_re", "y_im"])
            for i in range(len(self)):
                w.writerow([repr(float(self.t[i])), f"{'J' if self.is_j[i] else 'I'}:{self.word(i)}",
                            self.level, repr(float(self.x[i].real)), repr(float(self.x[i].imag)),
                            repr(float(self.y[i].real)), repr(float(self.y[i].imag))])


def _arc_from_starts(S, level: int, start_j, start_i, slack: float | None) -> Arc:
    part = partition(level)
    pre = pre_iterates(S, max(level - 1, 0), slack)
    digits = part.digits
    if level == 0:
        digits = np.zeros((len(part), 0), dtype=np.int8)
    x = np.where(part.is_p, start_j[0], start_i[0]).astype(complex)
    y = np.where(part.is_p, start_j[1], start_i[1]).astype(complex)
    x, y = _apply_digits(pre, digits, x, y)
    # h(1) = B(h(0)); the sample at t = 0 is the leftmost P-interval of J_0
    i0 = int(np.argmin(np.abs(part.left)))
    bx, by = pre[0][1](x[i0:i0 + 1], y[i0:i0 + 1])
    return Arc(level, part.left.copy(), x, y, part.is_p.copy(), part.digits.copy(),
               (complex(bx[0]), complex(by[0])))


@dataclass
class Orbit:
    """Renormalizations ``S_0 .. S_n`` of a pair with their step records."""

    pairs: list
    records: list[StepRecord]

    @property
    def depth(self) -> int:
        return len(self.records)

    def microscope(self, n: int) -> Microscope:
        if n > self.depth:
            raise MissingData(f"level {n} needs {n} renormalizations, have {self.depth}")
        return Microscope(tuple(r.stage for r in self.records[:n]))


def compute_orbit(S, n: int, cfg: Config | None = None) -> Orbit:
    pairs, recs = renorm_orbit(S, n, cfg)
    return Orbit(pairs, recs)


def _extend(orbit: Orbit, n: int, cfg: Config | None) -> Orbit:
    if orbit.depth >= n:
        return orbit
    more = compute_orbit(orbit.pairs[-1], n - orbit.depth, cfg)
    for r in more.records:
        object.__setattr__(r, "level", r.level + orbit.depth)
    return Orbit(orbit.pairs + more.pairs[1:], orbit.records + more.records)


def arc(S, level: int, cfg: Config | None = None, orbit: Orbit | None = None,
        slack: float | None = None) -> Arc:
    """Arc samples of ``S`` at ``level``; ``orbit`` is reused and extended if needed.

    Henon pairs are polynomial, so the words are evaluated without domain
    checks unless ``slack`` is given.
    """
    if level < 0:
        raise ValueError("level must be non-negative")
    cfg = cfg or Config()
    orbit = _extend(orbit or Orbit([S], []), level, cfg)
    M = orbit.microscope(level)
    Sn = orbit.pairs[level]
    pj = M(np.zeros(1, complex), np.zeros(1, complex))
    ax, ay = Sn.A(np.zeros(1, complex), np.zeros(1, complex))
    pi = M(_arr(ax), _arr(ay))
    start_j = (complex(pj[0][0]), complex(pj[1][0]))
    start_i = (complex(pi[0][0]), complex(pi[1][0]))
    return _arc_from_starts(S, level, start_j, start_i, slack)


def arc_points(S, level: int, cfg: Config | None = None, orbit: Orbit | None = None,
               slack: float | None = None) -> list[ArcSample]:
    return arc(S, level, cfg, orbit, slack).samples()


def conjugacy_defect(a: Arc, S) -> tuple[float, int]:
    """Largest ``|S(h(t)) - h(R_0 t)|`` over samples whose rotated parameter is sampled.

    ``S`` acts by ``A`` for ``t >= 0`` and by ``B`` for ``t < 0``.
    Returns the defect and the number of matched samples.
    """
    worst, matched = 0.0, 0
    for i in range(len(a)):
        t = a.t[i]
        tr = t - THETA if t > -1e-12 else t + 1.0
        j = int(np.argmin(np.abs(a.t - tr)))
        if abs(a.t[j] - tr) > 1e-9:
            continue
        z = (a.x[i:i + 1], a.y[i:i + 1])
        X, Y = S.A(*z) if t > -1e-12 else S.B(*z)
        d = math.hypot(abs(complex(_arr(X)[0]) - a.x[j]), abs(complex(_arr(Y)[0]) - a.y[j]))
        worst = max(worst, d)
        matched += 1
    return worst, matched


def bead_diameter(M: Microscope, domain, n_points: int = 16, shrink: float = 0.9) -> float:
    """Diameter of the image under ``M`` of points on the distinguished boundary of ``domain``."""
    (rx, ry), (cx, cy) = domain
    w = np.exp(2j * np.pi * np.arange(n_points) / n_points)
    x = cx + shrink * rx * w
    y = cy + shrink * ry * w[::-1]
    X, Y = M(x, y)
    P = np.stack([X, Y], axis=1)
    d = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=2)
    return float(d.max())


# ---------------------------------------------------------------------------
# degenerate pairs from the quadratic family


def _quad_with_derivative(c: complex, q: int, z: np.ndarray):
    z = np.array(z, dtype=complex)
    d = np.ones_like(z)
    for _ in range(q):
        d = 2 * z * d
        z = z * z + c
    return z, d


@dataclass(frozen=True, eq=False)
class QuadraticPair:
    """``A = (eta, xi)`` and ``B = (xi, x)`` for ``zeta_{f_c}``, evaluated by iterating ``f_c``.

    For ``nu = 0`` this is the Henon pair, written without series.
    """

    c: complex

    def eta(self, x):
        return quad_renormalized_eval(self.c, 0, "eta", _arr(x))

    def xi(self, x):
        return quad_renormalized_eval(self.c, 0, "xi", _arr(x))

    def A(self, x, y):
        return self.eta(x), self.xi(x)

    def B(self, x, y):
        return self.xi(x), _arr(x)


def _quad_level(c: complex, k: int):
    """``(eta_k, eta_k', lambda_k)`` of ``R^k(zeta_{f_c})`` by direct iteration."""
    from .renorm1d import _fib_pair, quad_scaling

    q_eta, _ = _fib_pair(k)
    s = quad_scaling(c, k)
    s_next = quad_scaling(c, k + 1)

    def eta(u, _y=None):
        return _quad_with_derivative(c, q_eta, s * _arr(u))[0] / s

    def deta(u, _y=None):
        return _quad_with_derivative(c, q_eta, s * _arr(u))[1]

    return eta, deta, s_next / s


def degenerate_arc(c: complex, level: int) -> Arc:
    """The arc of the degenerate pair of ``zeta_{f_c}`` through one-variable renormalization.

    Stages are ``x -> eta_k^-1(lambda_k x)`` with the branch through 1, and the
    second coordinate is carried along as in the two-variable microscope.
    """
    pj = np.zeros(1, complex)
    eta_n, _, lam_n = _quad_level(c, level)
    if level == 0:
        pi_x = eta_n(np.zeros(1))
        pi_y = quad_renormalized_eval(c, 0, "xi", np.zeros(1))
    else:
        eta_p, _, lam_p = _quad_level(c, level - 1)
        pi_x = eta_n(np.zeros(1))
        pi_y = eta_p(np.zeros(1)) / lam_p
    xs = np.concatenate([pj, pi_x])
    ys = np.concatenate([np.zeros(1, complex), pi_y])
    for k in range(level - 1, -1, -1):
        eta, deta, lam = _quad_level(c, k)
        X = lam * xs
        xs = branch_inverse(eta, X, np.zeros_like(X), 1.0, ax=deta)
        ys = lam * ys
    P = QuadraticPair(c)
    return _arc_from_starts(P, level, (xs[0], ys[0]), (xs[1], ys[1]), None)


# ---------------------------------------------------------------------------
# Siegel boundary of a Henon map


def henon_orbit_for(hm: HenonMap, n: int, cfg: Config | None = None) -> Orbit:
    return compute_orbit(henon_pair(hm.mu, hm.nu, cfg), n, cfg)


def siegel_boundary(hm: HenonMap, level: int, cfg: Config | None = None,
                    orbit: Orbit | None = None) -> np.ndarray:
    """``s(gamma) + H(s(gamma))`` in Henon coordinates, one point per row.

    ``s`` is multiplication by ``pi_1 H(0) = c``, the chart of the Henon pair.
    """
    cfg = cfg or Config()
    S = henon_pair(hm.mu, hm.nu, cfg)
    a = arc(S, level, cfg, orbit)
    return boundary_from_arc(hm, a)


def boundary_from_arc(hm: HenonMap, a: Arc) -> np.ndarray:
    x, y = hm.c * a.x, hm.c * a.y
    X, Y = hm(x, y)
    return np.concatenate([np.stack([x, y], axis=1), np.stack([X, Y], axis=1)])


def _max_gap(cloud: np.ndarray) -> float:
    half = len(cloud) // 2
    gaps = [np.linalg.norm(np.diff(part, axis=0), axis=1).max() for part in (cloud[:half], cloud[half:])]
    return float(max(gaps))


def invariance_gap(hm: HenonMap, cloud: np.ndarray) -> tuple[float, float]:
    """``(sup_p dist(H(p), cloud), max gap between consecutive samples)``."""
    X, Y = hm(cloud[:, 0], cloud[:, 1])
    img = np.stack([X, Y], axis=1)
    d = np.linalg.norm(img[:, None, :] - cloud[None, :, :], axis=2).min(axis=1)
    return float(d.max()), _max_gap(cloud)


# ---------------------------------------------------------------------------
# average Jacobian


def _closest_branch(z: np.ndarray, ref: complex) -> np.ndarray:
    L = np.log(z)
    return L + 2j * np.pi * np.round((ref - L).imag / (2 * np.pi))


def _unwrap(values: np.ndarray, start: complex) -> np.ndarray:
    """Branches of ``log values`` chosen continuously, starting next to ``start``."""
    out = np.empty(len(values), dtype=complex)
    ref = start
    for i, v in enumerate(values):
        out[i] = _closest_branch(np.array([v]), ref)[0]
        ref = out[i]
    return out


@dataclass(frozen=True, eq=False)
class JacobianLogs:
    """Branches of ``log Jac A`` and ``log Jac B`` fixed by reference values."""

    pair: object
    ref_a: complex
    ref_b: complex

    def _jac(self, which: str, x, y):
        J = _arr(self.pair.jac_A(x, y) if which == "A" else self.pair.jac_B(x, y))
        if np.any(np.abs(J) < 1e-300):
            raise ZeroJacobian(f"Jac {which} vanishes on the arc")
        return J

    def A(self, x, y):
        return _closest_branch(self._jac("A", x, y), self.ref_a)

    def B(self, x, y):
        return _closest_branch(self._jac("B", x, y), self.ref_b)


def jacobian_logs(S, a: Arc) -> JacobianLogs:
    """Principal ``log Jac A`` at ``h(0+)``; ``log Jac B`` at ``h(0-)`` on the nearest branch."""
    i0 = a.index_of(0.0)
    z = (a.x[i0:i0 + 1], a.y[i0:i0 + 1])
    ja = _arr(S.jac_A(*z))[0]
    jb = _arr(S.jac_B(*z))[0]
    if abs(ja) < 1e-300 or abs(jb) < 1e-300:
        raise ZeroJacobian("the Jacobian vanishes at the critical point")
    ra = complex(np.log(ja))
    rb = complex(_closest_branch(np.array([jb]), ra)[0])
    return JacobianLogs(S, ra, rb)


def _trapezoid(t: np.ndarray, f: np.ndarray) -> complex:
    return complex(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(t)))


@dataclass(frozen=True)
class JacobianProfile:
    avg_jacobian: complex
    log_avg: complex
    per_level: list = field(default_factory=list)

    def to_json(self) -> dict:
        cpx = lambda z: [float(z.real), float(z.imag)]
        return {
            "schema_version": 1,
            "avg_jacobian": cpx(self.avg_jacobian),
            "per_level": [{"n": r["n"], "q2n": r["q2n"], "jac_at_witness": cpx(r["jac_at_witness"]),
                           "c_n_estimate": cpx(r["c_n_estimate"])} for r in self.per_level],
        }


def witness_index(a: Arc, n: int) -> int:
    """Sample at the left endpoint of ``I_n = [1 - t_n - s_n, 1 - t_n]``."""
    return a.index_of(1.0 - long_length(n) - short_length(n))


def average_jacobian(S, level: int, cfg: Config | None = None, orbit: Orbit | None = None,
                     arc_data: Arc | None = None) -> JacobianProfile:
    """``b = exp(1/(1+theta) int tau dt)`` by the trapezoid rule over the arc samples.

    ``tau`` is ``log Jac A`` on ``(0, 1]`` and ``log Jac B`` on ``[-theta, 0]``,
    unwrapped along ``t`` away from the principal value at ``t = 0+``.
    """
    a = arc_data if arc_data is not None else arc(S, level, cfg, orbit)
    logs = jacobian_logs(S, a)
    i0 = a.index_of(0.0)
    right = a.t >= a.t[i0]
    tj = np.append(np.maximum(a.t[right], 0.0), 1.0)
    xj = np.append(a.x[right], a.end[0])
    yj = np.append(a.y[right], a.end[1])
    JA = logs._jac("A", xj, yj)
    tau_j = _unwrap(JA, logs.ref_a)
    # I side: walk from t = 0 towards -theta
    ti = np.append(np.minimum(a.t[~right], 0.0), 0.0)[::-1]
    xi = np.append(a.x[~right], a.x[i0])[::-1]
    yi = np.append(a.y[~right], a.y[i0])[::-1]
    JB = logs._jac("B", xi, yi)
    tau_i = _unwrap(JB, logs.ref_b)
    total = _trapezoid(tj, tau_j) - _trapezoid(ti, tau_i)
    log_b = total / (1 + THETA)
    b = complex(np.exp(log_b))
    pre = pre_iterates(S, a.level)
    rows = []
    for n in range(a.level + 1):
        k = witness_index(a, n)
        _, _, L = pre[n][1].log_jac(a.x[k:k + 1], a.y[k:k + 1], logs)
        L = complex(L[0])
        q2n = fibonacci_q(2 * n)
        rows.append({"n": n, "q2n": q2n, "jac_at_witness": complex(np.exp(L)),
                     "log_jac": L, "c_n_estimate": L - q2n * log_b})
    return JacobianProfile(b, complex(log_b), rows)


def jacobian_scaling_check(S, levels: Sequence[int], cfg: Config | None = None,
                           orbit: Orbit | None = None, profile: JacobianProfile | None = None,
                           n_points: int = 8) -> dict:
    """Per level: ``c_n``, and the distortion of ``Jac pB_n`` across ``Gamma^n_0``.

    The distortion is ``max |Jac pB_n(z1) / Jac pB_n(z2) - 1|`` over images under
    ``Phi^n_0`` of points on a shrunken boundary of ``Gamma``.
    """
    cfg = cfg or Config()
    levels = list(levels)
    top = max(levels)
    orbit = _extend(orbit or Orbit([S], []), top, cfg)
    if profile is None:
        profile = average_jacobian(S, top, cfg, orbit)
    pre = pre_iterates(S, top)
    by_n = {r["n"]: r for r in profile.per_level}
    rows = []
    for n in levels:
        M = orbit.microscope(n)
        (rx, ry), (cx, cy) = orbit.pairs[n].gamma
        w = np.exp(2j * np.pi * np.arange(n_points) / n_points)
        X, Y = M(cx + 0.5 * rx * w, cy + 0.5 * ry * w[::-1])
        J = pre[n][1].jac(X, Y)
        dist = float(np.max(np.abs(J[:, None] / J[None, :] - 1)))
        rows.append({"n": n, "q2n": fibonacci_q(2 * n), "c_n": by_n[n]["c_n_estimate"],
                     "distortion": dist})
    cs = np.array([abs(r["c_n"]) for r in rows])
    bound = 2 * abs(math.log(abs(profile.avg_jacobian)))
    return {"avg_jacobian": profile.avg_jacobian, "levels": rows, "c_bound": bound,
            "bounded": bool(np.all(cs <= bound))}


# ---------------------------------------------------------------------------
# universality


def gstar_inverse_branch(zstar: Pair1D):
    """``g*(x) = eta*^-1(lambda* x)`` pointwise (branch through 1) and ``g*'``."""
    eta = zstar.eta.to_double()
    deta = eta.deriv()
    lam = complex(zstar.lam)
    a = lambda u, _y: eta(_arr(u))
    ax = lambda u, _y: deta(_arr(u))

    def g(x):
        X = lam * _arr(x)
        v = branch_inverse(a, X, np.zeros_like(X), 1.0, steps=20, ax=ax)
        return v, lam / deta(v)

    return g


def alpha_universal(zstar: Pair1D, x, u=None, max_iter: int = 60) -> np.ndarray:
    """``alpha(x) = u*'(x - 1) / u*'(xi*(x) - 1)``.

    ``u*`` is the linearizer of ``g*`` centered at its fixed point 1.  Its
    derivative is extended from the series disk by ``u*'(t) =
    lambda*^-2k (g*^k)'(t) u*'(g*^k t)``.
    """
    u = u if u is not None else linearize_gstar(zstar)
    du = u.deriv()
    g = gstar_inverse_branch(zstar)
    lam2 = complex(zstar.lam) ** 2
    inner = 0.5 * u.radius

    def uprime(pts):
        pts = _arr(pts).copy()
        d = np.ones_like(pts)
        k = 0
        while np.any(np.abs(pts - 1) > inner):
            if k >= max_iter:
                raise RenormError("g* iterates do not reach the linearizer disk")
            v, dg = g(pts)
            d, pts, k = d * dg, v, k + 1
        return d * du(pts - 1) / lam2 ** k

    x = _arr(x)
    return uprime(x) / uprime(zstar.xi.to_double()(x))


def noise_estimate(orbit: Orbit, n: int) -> float:
    """Relative rounding error of the vertical part of ``S_n``: ``u / ||S_{n-1}||_y``."""
    if n == 0:
        return UNIT_ROUNDOFF
    prev = float(orbit.pairs[n - 1].norm_y())
    return math.inf if prev == 0 else UNIT_ROUNDOFF / prev


def _e_n(P, x: np.ndarray) -> np.ndarray:
    if isinstance(P, Pair2D):
        return _arr(P.bfun.partial_y()(x, np.zeros_like(x)))
    return _arr(_dy(P.bfun)(x, np.zeros_like(x)))


def universality_report(S, levels: Sequence[int], zstar: Pair1D, cfg: Config | None = None,
                        orbit: Orbit | None = None, x_grid=None, x0: float = 0.3,
                        arc_data: Arc | None = None, profile: JacobianProfile | None = None) -> dict:
    """``e_n(x) = d_y b_n(x, 0)``, the slope of ``log|e_n(x0)|`` against ``q_2n``, and
    ``alpha_n(x) = -e_n(x) / Jac pB_n(w_n)`` compared with the universal ``alpha``.

    Levels whose vertical part is below the rounding floor are reported with
    ``below_noise`` set and left out of the slope and decay ratios.
    """
    cfg = cfg or Config()
    levels = list(levels)
    top = max(levels)
    x_grid = np.linspace(-0.2, 0.35, 12) if x_grid is None else np.asarray(x_grid, float)
    xg = x_grid.astype(complex)
    orbit = _extend(orbit or Orbit([S], []), top, cfg)
    if profile is None:
        a = arc_data if arc_data is not None and arc_data.level >= top else arc(S, top, cfg, orbit)
        profile = average_jacobian(S, top, cfg, orbit, a)
    by_n = {r["n"]: r for r in profile.per_level}
    alpha = alpha_universal(zstar, xg)
    rows = []
    for n in levels:
        if n not in by_n:
            raise MissingData(f"no witness Jacobian for level {n}")
        P = orbit.pairs[n]
        e = _e_n(P, xg)
        e0 = complex(_e_n(P, np.array([x0], complex))[0])
        ah = -e / by_n[n]["jac_at_witness"]
        noise = noise_estimate(orbit, n)
        rows.append({
            "n": n, "q2n": fibonacci_q(2 * n), "e_n_at_grid": e, "e_n_x0": e0,
            "alpha_hat": ah, "alpha_dev": float(np.max(np.abs(ah - alpha))),
            "distortion": float(np.abs(ah).max() / np.abs(ah).min()),
            "noise": noise, "below_noise": bool(noise > NOISE_LIMIT),
        })
    good = [r for r in rows if not r["below_noise"]]
    slope = math.nan
    if len(good) >= 2:
        slope = float(np.polyfit([r["q2n"] for r in good],
                                 [math.log(abs(r["e_n_x0"])) for r in good], 1)[0])
    ratios = [good[i + 1]["alpha_dev"] / good[i]["alpha_dev"] for i in range(len(good) - 1)]
    return {
        "schema_version": 1, "x0": x0, "x_grid": x_grid, "alpha": alpha,
        "avg_jacobian": profile.avg_jacobian, "log_abs_b": math.log(abs(profile.avg_jacobian)),
        "slope": slope, "alpha_dev_ratios": ratios, "levels": rows,
        "skipped": [r["n"] for r in rows if r["below_noise"]],
    }


def universality_json(report: dict) -> dict:
    cpx = lambda z: [float(z.real), float(z.imag)]
    return {
        "schema_version": 1,
        "x0": report["x0"],
        "x_grid": [float(v) for v in report["x_grid"]],
        "avg_jacobian": cpx(report["avg_jacobian"]),
        "slope": report["slope"],
        "log_abs_b": report["log_abs_b"],
        "alpha_dev_ratios": report["alpha_dev_ratios"],
        "skipped": report["skipped"],
        "levels": [{"n": r["n"], "q2n": r["q2n"], "e_n_at_grid": [cpx(v) for v in r["e_n_at_grid"]],
                    "slope": report["slope"], "alpha_dev": r["alpha_dev"],
                    "distortion": r["distortion"], "noise": r["noise"],
                    "below_noise": r["below_noise"]} for r in report["levels"]],
    }


# ---------------------------------------------------------------------------
# Holder exponents


def holder_bound(b1: complex, b2: complex) -> float:
    """``(1 + ln|b1| / ln|b2|) / 2``, the Holder bound for a conjugacy between the arcs."""
    m1, m2 = abs(b1), abs(b2)
    if not (0 < m1 < 1 and 0 < m2 < 1):
        raise InvalidJacobian("average Jacobians must satisfy 0 < |b| < 1")
    return 0.5 * (1 + math.log(m1) / math.log(m2))


def holder_ratios(a1: Arc, a2: Arc, scale: float = HOLDER_SCALE) -> np.ndarray:
    """``log D / log D~`` over sample pairs closer than ``scale`` on both arcs."""
    if len(a1) != len(a2) or np.any(np.abs(a1.t - a2.t) > 1e-12):
        raise ValueError("arcs must be sampled on the same partition")
    p1, p2 = a1.points(), a2.points()
    d1 = np.linalg.norm(p1[:, None, :] - p1[None, :, :], axis=2)
    d2 = np.linalg.norm(p2[:, None, :] - p2[None, :, :], axis=2)
    iu = np.triu_indices(len(a1), 1)
    d1, d2 = d1[iu], d2[iu]
    keep = (d1 > 0) & (d2 > 0) & (d1 < scale) & (d2 < scale)
    return np.log(d1[keep]) / np.log(d2[keep])


def holder_empirical(S1, S2, level: int, cfg: Config | None = None,
                     orbits: tuple[Orbit | None, Orbit | None] = (None, None),
                     arcs: tuple[Arc | None, Arc | None] = (None, None),
                     bounds: tuple[complex, complex] | None = None, slack: float = 0.1) -> dict:
    """Trimmed-minimum estimate of the Holder exponent of the arc conjugacy ``S2 -> S1``.

    The estimate is the 5th percentile of ``log D / log D~`` where ``D`` and
    ``D~`` are distances between samples with the same parameter on the arcs
    of ``S1`` and ``S2``.
    """
    cfg = cfg or Config()
    a1 = arcs[0] or arc(S1, level, cfg, orbits[0])
    a2 = arcs[1] or arc(S2, level, cfg, orbits[1])
    r = holder_ratios(a1, a2)
    alpha_hat = float(np.percentile(r, HOLDER_TRIM)) if len(r) else math.nan
    if bounds is None:
        bounds = (average_jacobian(S1, level, cfg, arc_data=a1).avg_jacobian,
                  average_jacobian(S2, level, cfg, arc_data=a2).avg_jacobian)
    bound = holder_bound(*bounds)
    return {"schema_version": 1, "alpha_hat": alpha_hat, "bound": bound, "binding": bound < 1,
            "within": bool(alpha_hat <= bound + slack), "pairs": int(len(r))}


__all__ = [
    "ZeroJacobian", "InvalidJacobian", "SignalBelowNoise", "MissingData",
    "Iterate", "pre_iterates", "word_apply", "ArcSample", "Arc", "Orbit", "compute_orbit",
    "arc", "arc_points", "conjugacy_defect", "bead_diameter", "QuadraticPair", "degenerate_arc",
    "siegel_boundary", "boundary_from_arc", "invariance_gap", "JacobianLogs", "jacobian_logs",
    "JacobianProfile", "average_jacobian", "witness_index", "jacobian_scaling_check",
    "alpha_universal", "noise_estimate", "universality_report", "universality_json",
    "holder_bound", "holder_ratios", "holder_empirical", "MU_STAR",
]
