"""Golden-mean rotation combinatorics.

The rigid model is the pair of translations ``S_0(x) = x - theta`` on
``J_0 = [0, 1]`` and ``T_0(x) = x + 1`` on ``I_0 = [-theta, 0]``.  Its n-th
pre-renormalization consists of ``S_n(x) = x - s_n`` and ``T_n(x) = x + t_n``
with ``s_n = theta^(2n+1)`` and ``t_n = theta^(2n)``.  Admissible words encode
which translations carry ``J_n`` and ``I_n`` onto the intervals of the n-th
dynamical partition of ``[-theta, 1]``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator

import mpmath
import numpy as np

from .errors import NonPositiveLength, RenormError

THETA = (math.sqrt(5.0) - 1.0) / 2.0
_STATE_PREC = 256
MAX_FIB_INDEX = 90


class QuadratureFailure(RenormError):
    """Quadrature could not reach the requested tolerance."""


def fibonacci_q(n: int) -> int:
    """Closest-return times: ``q_0 = q_1 = 1``, ``q_{n+1} = q_n + q_{n-1}``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > MAX_FIB_INDEX:
        raise OverflowError(f"q_n only supported for n <= {MAX_FIB_INDEX}")
    a, b = 1, 1
    for _ in range(n):
        a, b = b, a + b
    return a


def short_length(n: int) -> float:
    """``s_n = theta^(2n+1)``."""
    return THETA ** (2 * n + 1)


def long_length(n: int) -> float:
    """``t_n = theta^(2n)``."""
    return THETA ** (2 * n)


# ---------------------------------------------------------------------------
# rigid rotation


def _mp(x) -> mpmath.mpf:
    with mpmath.workprec(_STATE_PREC):
        return mpmath.mpf(x)


def _theta_mp() -> mpmath.mpf:
    with mpmath.workprec(_STATE_PREC):
        return (mpmath.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class RotationState:
    """Lengths ``(s, t)`` of the rigid pair at a given level.

    Values are kept at 256-bit precision.  The pre-renormalization map expands
    deviations from the golden direction by ``theta^-4`` per level, so double
    precision would lose the ratio ``s/t = theta`` within a dozen levels.
    """

    s_exact: mpmath.mpf
    t_exact: mpmath.mpf
    level: int = 0

    @classmethod
    def golden(cls) -> "RotationState":
        return cls(_theta_mp(), _mp(1), 0)

    @classmethod
    def from_floats(cls, s: float, t: float, level: int = 0) -> "RotationState":
        if not (s > 0 and t > 0):
            raise NonPositiveLength("lengths must be positive")
        return cls(_mp(s), _mp(t), level)

    @property
    def s(self) -> float:
        return float(self.s_exact)

    @property
    def t(self) -> float:
        return float(self.t_exact)

    @property
    def I(self) -> tuple[float, float]:
        with mpmath.workprec(_STATE_PREC):
            return float(1 - self.t_exact - self.s_exact), float(1 - self.t_exact)

    @property
    def J(self) -> tuple[float, float]:
        return float(1 - self.t_exact), 1.0


def prerenorm_rotation(r: RotationState) -> RotationState:
    """``(s, t) -> (2s - t, t - s)``: first-return lengths one level down."""
    with mpmath.workprec(_STATE_PREC):
        s2 = 2 * r.s_exact - r.t_exact
        t2 = r.t_exact - r.s_exact
    if s2 <= 0 or t2 <= 0:
        raise NonPositiveLength(f"level {r.level + 1}: s' = {float(s2):.6g} is not positive")
    return RotationState(s2, t2, r.level + 1)


def rotation_state(n: int) -> RotationState:
    """The golden state after ``n`` pre-renormalizations."""
    r = RotationState.golden()
    for _ in range(n):
        r = prerenorm_rotation(r)
    return r


# ---------------------------------------------------------------------------
# words

J_KIND = "J"
I_KIND = "I"


@dataclass(frozen=True)
class Word:
    """Digits ``(alpha_{n-1}, ..., alpha_0)``, most significant first."""

    digits: tuple[int, ...]
    kind: str = J_KIND

    def __str__(self) -> str:
        return "".join(str(d) for d in self.digits)

    @property
    def level(self) -> int:
        if self.kind == J_KIND and self.digits == (0,):
            return 0
        return len(self.digits)

    def offset(self) -> float:
        """``sum_k alpha_k s_k``: the total translation of the word."""
        n = len(self.digits)
        return float(sum(d * short_length(n - 1 - i) for i, d in enumerate(self.digits)))

    @classmethod
    def parse(cls, text: str, kind: str = J_KIND) -> "Word":
        w = cls(tuple(int(ch) for ch in text), kind)
        if not is_admissible(w):
            raise ValueError(f"{text!r} is not an admissible {kind}-word")
        return w


def is_admissible(word: Word) -> bool:
    digits = word.digits
    if word.kind == J_KIND and digits == (0,):
        return True
    restricted = word.kind == I_KIND
    for d in digits:
        if d not in ((0, 1) if restricted else (0, 1, 2)):
            return False
        # after a 2, or after a 1 taken from {0, 1}, the choice is restricted
        restricted = d == 2 or (restricted and d == 1)
    return True


def word_array(n: int, kind: str = J_KIND) -> np.ndarray:
    """All admissible words of length ``n`` as rows of an int8 array, in lexicographic order."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if kind not in (J_KIND, I_KIND):
        raise ValueError(f"unknown word kind {kind!r}")
    if n == 0:
        return np.zeros((1, 1 if kind == J_KIND else 0), dtype=np.int8)
    digits = np.zeros((1, 0), dtype=np.int8)
    restricted = np.array([kind == I_KIND])
    for _ in range(n):
        width = np.where(restricted, 2, 3)
        parent = np.repeat(np.arange(len(digits)), width)
        starts = np.cumsum(width) - width
        new = (np.arange(len(parent)) - np.repeat(starts, width)).astype(np.int8)
        prev_restricted = restricted[parent]
        digits = np.concatenate([digits[parent], new[:, None]], axis=1)
        restricted = (new == 2) | (prev_restricted & (new == 1))
    return digits


def words(n: int, kind: str = J_KIND) -> list[Word]:
    """Admissible words of length ``n``, lexicographically ordered."""
    return [Word(tuple(row), kind) for row in word_array(n, kind).tolist()]


def max_word(n: int, kind: str = J_KIND) -> Word:
    """``(2, 1, ..., 1)`` for J-words and ``(1, ..., 1)`` for I-words."""
    if n == 0:
        return Word((0,) if kind == J_KIND else (), kind)
    if kind == J_KIND:
        return Word((2,) + (1,) * (n - 1), kind)
    return Word((1,) * n, kind)


# ---------------------------------------------------------------------------
# dynamical partition


@dataclass(frozen=True)
class Interval:
    left: float
    right: float
    kind: str  # "P" or "Q"
    word: Word


@dataclass(frozen=True)
class Partition:
    """The n-th dynamical partition, sorted left to right."""

    level: int
    left: np.ndarray
    right: np.ndarray
    is_p: np.ndarray
    digits: np.ndarray  # one row per interval; I-words padded with -1 when n == 0

    def __len__(self) -> int:
        return len(self.left)

    def word(self, i: int) -> Word:
        kind = J_KIND if self.is_p[i] else I_KIND
        row = tuple(int(d) for d in self.digits[i] if d >= 0)
        return Word(row, kind)

    def __getitem__(self, i: int) -> Interval:
        return Interval(float(self.left[i]), float(self.right[i]),
                        "P" if self.is_p[i] else "Q", self.word(i))

    def __iter__(self) -> Iterator[Interval]:
        for i in range(len(self)):
            yield self[i]

    @property
    def q_intervals(self) -> np.ndarray:
        return np.stack([self.left[~self.is_p], self.right[~self.is_p]], axis=1)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["level", "kind", "word", "left", "right"])
            for iv in self:
                w.writerow([self.level, iv.kind, str(iv.word), repr(iv.left), repr(iv.right)])


def _offsets(digits: np.ndarray) -> np.ndarray:
    n = digits.shape[1]
    if n == 0:
        return np.zeros(len(digits))
    s = np.array([short_length(n - 1 - i) for i in range(n)])
    return digits.astype(float) @ s


def partition(n: int) -> Partition:
    """Images ``R_0^w(J_n)`` (P-intervals) and ``R_0^w(I_n)`` (Q-intervals)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    s, t = short_length(n), long_length(n)
    if n == 0:
        return Partition(0, np.array([-THETA, 0.0]), np.array([0.0, 1.0]),
                         np.array([False, True]), np.array([[-1], [0]], dtype=np.int8))
    jw = word_array(n, J_KIND)
    iw = word_array(n, I_KIND)
    jl = (1.0 - t) - _offsets(jw)
    il = (1.0 - t - s) - _offsets(iw)
    left = np.concatenate([jl, il])
    right = np.concatenate([jl + t, il + s])
    is_p = np.concatenate([np.ones(len(jl), bool), np.zeros(len(il), bool)])
    digits = np.concatenate([jw, iw])
    order = np.argsort(left, kind="stable")
    return Partition(n, left[order], right[order], is_p[order], digits[order])


def refine_check(n: int, coarse: Partition | None = None, fine: Partition | None = None,
                 tol: float = 1e-12) -> bool:
    """Whether every P-interval of level n splits as [P, Q, P] and every Q as [P, Q]."""
    coarse = partition(n) if coarse is None else coarse
    fine = partition(n + 1) if fine is None else fine
    # the fine partition must itself tile the segment
    if np.any(np.abs(fine.left[1:] - fine.right[:-1]) > tol):
        return False
    if np.any(np.abs(coarse.left[1:] - coarse.right[:-1]) > tol):
        return False
    starts = np.searchsorted(fine.left, coarse.left - tol)
    k = 0
    for i in range(len(coarse)):
        pattern = (True, False, True) if coarse.is_p[i] else (True, False)
        j = starts[i]
        if j != k or j + len(pattern) > len(fine):
            return False
        if tuple(fine.is_p[j:j + len(pattern)]) != pattern:
            return False
        if abs(fine.left[j] - coarse.left[i]) > tol:
            return False
        if abs(fine.right[j + len(pattern) - 1] - coarse.right[i]) > tol:
            return False
        k = j + len(pattern)
    return k == len(fine)


# ---------------------------------------------------------------------------
# equidistribution


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre(k: int):
    if k not in _GL_CACHE:
        _GL_CACHE[k] = np.polynomial.legendre.leggauss(k)
    return _GL_CACHE[k]


def _vectorize(f: Callable) -> Callable:
    def g(x):
        try:
            out = np.asarray(f(x))
            if out.shape == x.shape:
                return out
        except Exception:
            pass
        return np.array([f(v) for v in x.reshape(-1)]).reshape(x.shape)
    return g


def integrate_panels(f: Callable, left: np.ndarray, right: np.ndarray, tol: float = 1e-10,
                     order: int = 10, max_depth: int = 12) -> complex:
    """Sum of integrals of ``f`` over ``[left_i, right_i]`` by Gauss-Legendre panels.

    Each panel is compared against the same rule on its two halves and is
    bisected until the difference is below its share of ``tol``.
    """
    f = _vectorize(f)
    x, w = _gauss_legendre(order)
    left = np.asarray(left, float)
    right = np.asarray(right, float)
    total_len = float(np.sum(right - left)) or 1.0

    def rule(a, b):
        mid = (a + b) / 2
        half = (b - a) / 2
        pts = mid[:, None] + half[:, None] * x[None, :]
        return (f(pts) @ w) * half

    total = 0.0 + 0.0j
    a, b = left, right
    coarse = rule(a, b)
    for _ in range(max_depth):
        m = (a + b) / 2
        fine = rule(a, m) + rule(m, b)
        err = np.abs(fine - coarse)
        ok = err <= tol * (b - a) / total_len
        total += np.sum(fine[ok])
        if np.all(ok):
            return complex(total)
        a, b = np.concatenate([a[~ok], m[~ok]]), np.concatenate([m[~ok], b[~ok]])
        coarse = np.concatenate([rule(a[: len(a) // 2], b[: len(b) // 2]),
                                 rule(a[len(a) // 2:], b[len(b) // 2:])])
    raise QuadratureFailure(f"{len(a)} panels above tolerance after bisection")


def equidist_average(f: Callable, M: float, n: int, tol: float = 1e-10):
    """Average of ``f`` over ``Q_n`` versus its average over ``[-theta, 1]``.

    Returns
    -------
    qavg : complex
        ``(1 / (q_{2n} s_n)) * integral of f over Q_n``.
    favg : complex
        ``(1 / (1 + theta)) * integral of f over [-theta, 1]``.
    bound : float
        ``2 theta^-1 s_n M``, the maximal displacement of the averaging map
        times the derivative bound.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    part = partition(n)
    q = part.q_intervals
    sn = short_length(n)
    qavg = integrate_panels(f, q[:, 0], q[:, 1], tol * sn * len(q)) / (fibonacci_q(2 * n) * sn)
    favg = integrate_panels(f, part.left, part.right, tol) / (1 + THETA)
    return complex(qavg), complex(favg), 2.0 / THETA * sn * M
