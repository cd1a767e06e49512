"""Renormalization of critical commuting pairs in one variable.

A pair ``zeta = (eta, xi)`` is stored as two :class:`Series1` on the disks
``Z`` and ``W``.  The operator is

    R(eta, xi) = (l^-1 eta o xi o eta (l x), l^-1 eta o xi (l x)),  l = eta(xi(0)).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import Config
from .errors import NewtonDivergence, NotAlmostCommuting, RenormError
from .series import Series1, compose1, revert_about, scalar, to_array

THETA = (math.sqrt(5.0) - 1.0) / 2.0
MU_STAR = complex(math.cos(2 * math.pi * THETA), math.sin(2 * math.pi * THETA))


class ZeroScaling(RenormError):
    """The scaling factor of a pair vanishes."""


class NoConvergence(NewtonDivergence):
    """An iteration did not reach its tolerance."""


class SingularJacobian(RenormError):
    """The finite-difference Jacobian is numerically singular."""


@dataclass(frozen=True)
class Pair1D:
    eta: Series1
    xi: Series1

    @property
    def lam(self):
        return self.eta(self.xi(0))

    @property
    def extended(self) -> bool:
        return self.eta.extended

    def norm(self) -> float:
        return max(self.eta.norm(), self.xi.norm())

    def distance(self, other: "Pair1D") -> float:
        return max(self.eta.distance(other.eta), self.xi.distance(other.xi))

    def check_critical(self, tol: float = 1e-10) -> None:
        """Raise :class:`NotAlmostCommuting` unless both maps have a critical point at 0."""
        e1, x1 = self.eta.deriv()(0), self.xi.deriv()(0)
        e2, x2 = self.eta.deriv().deriv()(0), self.xi.deriv().deriv()(0)
        if abs(e1) > tol or abs(x1) > tol:
            raise NotAlmostCommuting("first derivatives do not vanish at 0")
        if abs(e2) <= tol or abs(x2) <= tol:
            raise NotAlmostCommuting("critical point at 0 is degenerate")
        if abs(self.xi(0) - 1) > tol:
            raise NotAlmostCommuting("xi(0) != 1")

    def to_extended(self) -> "Pair1D":
        return Pair1D(self.eta.to_extended(), self.xi.to_extended())

    def to_double(self) -> "Pair1D":
        return Pair1D(self.eta.to_double(), self.xi.to_double())


def siegel_c(mu: complex, nu: complex) -> complex:
    """Parameter ``c`` of the Henon family with fixed-point multipliers ``mu, nu``."""
    m = mu / 2 + nu / 2
    return (1 + mu * nu) * m - m * m


C_STAR = siegel_c(MU_STAR, 0.0)


def quad_pair(c: complex, cfg: Config | None = None) -> Pair1D:
    """The rescaled pair ``(c^-1 f^2(c x), c^-1 f(c x))`` of ``f(x) = x^2 + c``."""
    cfg = cfg or Config()
    if abs(c) < 1e-12:
        raise ZeroScaling("c = 0 gives a degenerate rescaling")
    ext = cfg.extended
    c = scalar(c, ext)
    d = cfg.domains
    eta = Series1.from_polynomial([c + 1, 0, 2 * c * c, 0, c ** 3], cfg.degree,
                                  d.z_radius, d.z_center, ext)
    xi = Series1.from_polynomial([1, 0, c], cfg.degree, d.w_radius, d.w_center, ext)
    return Pair1D(eta, xi)


def _rescale(f: Series1, lam, radius: float, center) -> Series1:
    """The series of ``x -> lam x`` on the disk of ``f``'s shape given."""
    return Series1.affine(lam, 0, f.degree, radius, center, f.extended)


def commutator_defects(z: Pair1D):
    """Values at 0 of ``eta o xi - xi o eta`` and of its second derivative."""
    e, x = z.eta, z.xi
    ex0 = e(x(0))
    xe0 = x(e(0))
    # second derivative of f o g at a critical point 0 of g is f'(g(0)) g''(0)
    d2 = e.deriv()(x(0)) * x.deriv().deriv()(0) - x.deriv()(e(0)) * e.deriv().deriv()(0)
    d0 = ex0 - xe0
    # include the first-derivative terms when the pair is not exactly critical
    d2 = d2 + e.deriv().deriv()(x(0)) * x.deriv()(0) ** 2 - x.deriv().deriv()(e(0)) * e.deriv()(0) ** 2
    return d0, d2


def renormalize1d(z: Pair1D, cfg: Config | None = None) -> Pair1D:
    """One step of the renormalization operator."""
    cfg = cfg or Config()
    lam = z.lam
    if abs(lam) < 1e-12:
        raise ZeroScaling("lambda vanishes")
    e, x = z.eta, z.xi
    sz = _rescale(e, lam, e.radius, e.center)
    sw = _rescale(x, lam, x.radius, x.center)
    eta_new = compose1(e, compose1(x, compose1(e, sz, cfg.slack), cfg.slack), cfg.slack) / lam
    xi_new = compose1(e, compose1(x, sw, cfg.slack), cfg.slack) / lam
    return normalize_pair(Pair1D(eta_new, xi_new))


def normalize_pair(z: Pair1D) -> Pair1D:
    """Re-impose ``eta'(0) = xi'(0) = 0`` and ``xi(0) = 1`` exactly.

    Only the coefficients of degree 0 and 1 of ``xi`` and of degree 1 of ``eta``
    change; for the output of :func:`renormalize1d` the change is of the size
    of the truncation error.
    """
    sl = Slice(z)
    return sl.from_vector(sl.to_vector(z))


# ---------------------------------------------------------------------------
# projection onto almost-commuting pairs


def _monomials(xi: Series1):
    """Series of ``x^3`` and ``x^4`` on the domain of ``xi``."""
    deg, r, c, ext = xi.degree, xi.radius, xi.center, xi.extended
    return (Series1.from_polynomial([0, 0, 0, 1], deg, r, c, ext),
            Series1.from_polynomial([0, 0, 0, 0, 1], deg, r, c, ext))


def project_ac1d(z: Pair1D, iters: int = 8):
    """Add ``c x^3 + d x^4`` to ``xi`` so that both commutator defects vanish.

    Returns the corrected pair and ``(c, d)``.  Criticality and the
    normalization ``xi(0) = 1`` are untouched by the correction.
    """
    m3, m4 = _monomials(z.xi)
    c = d = 0
    xi = z.xi
    e = z.eta
    e0 = e(0)
    for _ in range(iters):
        zz = Pair1D(e, xi)
        d0, d2 = commutator_defects(zz)
        if abs(d0) == 0 and abs(d2) == 0:
            break
        # derivatives of (d0, d2) w.r.t. (c, d): xi o eta terms only, at x = 0
        e2 = e.deriv().deriv()(0)
        jac = [[-e0 ** 3, -e0 ** 4],
               [-3 * e0 ** 2 * e2, -4 * e0 ** 3 * e2]]
        det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0]
        dc = (jac[1][1] * d0 - jac[0][1] * d2) / det
        dd = (-jac[1][0] * d0 + jac[0][0] * d2) / det
        c, d = c - dc, d - dd
        xi = z.xi + m3 * c + m4 * d
    return Pair1D(e, xi), (c, d)


# ---------------------------------------------------------------------------
# coordinates on the normalized slice


class Slice:
    """Coordinates of pairs with ``eta'(0) = xi'(0) = 0`` and ``xi(0) = 1``.

    Free unknowns are all centered Taylor coefficients of ``eta`` except the
    linear one and all of ``xi`` except the constant and linear ones; these are
    recovered from the three constraints.  Coordinates are scaled by
    ``radius^k`` so that the unknown vector is well balanced.
    """

    def __init__(self, template: Pair1D):
        self.template = template
        e, x = template.eta, template.xi
        self.ne = e.degree + 1
        self.nx = x.degree + 1
        self.e_idx = np.array([k for k in range(self.ne) if k != 1])
        self.x_idx = np.arange(2, self.nx)
        self.e_scale = e.radius ** self.e_idx.astype(float)
        self.x_scale = x.radius ** self.x_idx.astype(float)
        ext = template.extended
        # powers (-center)^(k-1) etc. used by the constraints
        self._ze = [scalar(-e.center, ext) ** k for k in range(self.ne)]
        self._zx = [scalar(-x.center, ext) ** k for k in range(self.nx)]

    @property
    def size(self) -> int:
        return len(self.e_idx) + len(self.x_idx)

    def order(self) -> np.ndarray:
        """Unknown indices sorted by Taylor degree (eta and xi interleaved)."""
        degs = np.concatenate([self.e_idx, self.x_idx])
        return np.argsort(degs, kind="stable")

    def to_vector(self, z: Pair1D) -> np.ndarray:
        ve = z.eta.coeffs[self.e_idx] * self.e_scale
        vx = z.xi.coeffs[self.x_idx] * self.x_scale
        return np.concatenate([ve, vx])

    def from_vector(self, v: np.ndarray) -> Pair1D:
        t = self.template
        ext = t.extended
        n_e = len(self.e_idx)
        ce = to_array(np.zeros(self.ne), ext)
        ce[self.e_idx] = v[:n_e] / self.e_scale
        ze = self._ze
        # eta'(0) = sum_k k c_k (-z)^(k-1) = 0
        ce[1] = -sum(k * ce[k] * ze[k - 1] for k in range(2, self.ne))
        cx = to_array(np.zeros(self.nx), ext)
        cx[self.x_idx] = v[n_e:] / self.x_scale
        zx = self._zx
        cx[1] = -sum(k * cx[k] * zx[k - 1] for k in range(2, self.nx))
        # xi(0) = sum_k c_k (-z)^k = 1
        cx[0] = 1 - cx[1] * zx[1] - sum(cx[k] * zx[k] for k in range(2, self.nx))
        eta = Series1(ce, t.eta.radius, t.eta.center)
        xi = Series1(cx, t.xi.radius, t.xi.center)
        return Pair1D(eta, xi)


def _fd_jacobian(fun, v0: np.ndarray, f0: np.ndarray, cols, step: float, threads: int):
    """Complex finite-difference Jacobian of a holomorphic map, selected columns."""
    def column(j):
        v = v0.copy()
        v[j] = v[j] + step
        return (fun(v) - f0) / step

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(column, cols))
    else:
        out = [column(j) for j in cols]
    return np.array(out).T


def renormalize1d_ac(z: Pair1D, cfg: Config | None = None) -> Pair1D:
    """Renormalization followed by the projection onto almost-commuting pairs."""
    return project_ac1d(renormalize1d(z, cfg or Config()))[0]


def fixed_point_residual(z: Pair1D, cfg: Config | None = None) -> float:
    """Pair majorant norm of ``P(R(z)) - z`` (``P`` as in :func:`project_ac1d`)."""
    return renormalize1d_ac(z, cfg).distance(z)


def newton_fixed_point(seed: Pair1D, cfg: Config | None = None, verbose: bool = False):
    """Solve ``P(R(zeta)) = zeta`` on the normalized slice.

    ``P`` is :func:`project_ac1d`.  Truncation lets the plain operator drift off
    the almost-commuting pairs along a direction with multiplier 1, so the
    fixed-point map is taken modulo that drift.  The Jacobian is a complex
    finite-difference matrix (the operator is holomorphic in the coefficients).

    Returns
    -------
    zstar : Pair1D
    lambda_star : complex
    residual : float
        Pair majorant norm of ``P(R(zstar)) - zstar``.
    """
    cfg = cfg or Config()
    sl = Slice(seed)
    v = sl.to_vector(project_ac1d(seed)[0])

    def F(vec):
        return sl.to_vector(renormalize1d_ac(sl.from_vector(vec), cfg)) - vec

    fv = F(v)
    jac = None
    res = math.inf
    for it in range(cfg.max_iters):
        z = sl.from_vector(v)
        res = fixed_point_residual(z, cfg)
        if verbose:
            print(f"newton {it}: residual {res:.3e}")
        if res < cfg.tol:
            return z, z.lam, float(res)
        if jac is None or it < 3:
            jac = _fd_jacobian(F, to_array(v, False), to_array(fv, False), range(sl.size),
                               cfg.fd_step, cfg.threads)
            cond = np.linalg.cond(jac)
            if not np.isfinite(cond) or cond > 1e14:
                raise SingularJacobian(f"Jacobian condition number {cond:.3g}")
        step = np.linalg.solve(jac, to_array(fv, False))
        v = v - to_array(step, z.extended)
        fv = F(v)
        if not np.all(np.isfinite(to_array(fv, False))):
            raise NoConvergence("Newton iterate left the domain")
    raise NoConvergence(f"residual {res:.3e} after {cfg.max_iters} iterations")


# ---------------------------------------------------------------------------
# renormalizations of quadratic pairs by direct iteration


def _fib_pair(n: int) -> tuple[int, int]:
    """``(q_{2n+2}, q_{2n+1})`` with ``q_0 = q_1 = 1``."""
    a, b = 1, 1
    for _ in range(2 * n):
        a, b = b, a + b
    return a + b, b


def _iterate_quadratic(c: complex, q: int, z: np.ndarray) -> np.ndarray:
    z = np.array(z, dtype=np.complex128)
    for _ in range(q):
        z = z * z + c
    return z


def quad_scaling(c: complex, n: int) -> complex:
    """Chart scaling ``f^{q_{2n+1}}(0)`` of the ``n``-th renormalization of ``zeta_{f_c}``."""
    return complex(_iterate_quadratic(c, _fib_pair(n)[1], np.zeros(1))[0])


def quad_renormalized_eval(c: complex, n: int, which: str, x: np.ndarray) -> np.ndarray:
    """Pointwise values of ``R^n(zeta_{f_c})`` computed by iterating ``f_c``.

    ``which`` is ``"eta"`` or ``"xi"``.  This uses the identity
    ``R^n(zeta_{f_c}) = (s^-1 f^{q_{2n+2}}(s x), s^-1 f^{q_{2n+1}}(s x))``
    with ``s = f^{q_{2n+1}}(0)``.
    """
    q_eta, q_xi = _fib_pair(n)
    s = quad_scaling(c, n)
    q = q_eta if which == "eta" else q_xi
    return _iterate_quadratic(c, q, s * np.asarray(x)) / s


def fit_series(fun, degree: int, radius: float, center: complex, samples: int = 512,
               extended: bool = False) -> Series1:
    """Taylor coefficients of ``fun`` about ``center`` from samples on the circle of ``radius``."""
    m = max(samples, 2 * (degree + 1))
    pts = center + radius * np.exp(2j * np.pi * np.arange(m) / m)
    vals = np.asarray(fun(pts), dtype=np.complex128)
    coeffs = np.fft.fft(vals)[: degree + 1] / m / radius ** np.arange(degree + 1)
    return Series1(to_array(coeffs, extended), radius, center)


def quad_renormalized(c: complex, n: int, cfg: Config | None = None) -> Pair1D:
    """``R^n(zeta_{f_c})`` as series on the configured domains."""
    cfg = cfg or Config()
    d = cfg.domains
    if n == 0:
        return quad_pair(c, cfg)
    eta = fit_series(lambda x: quad_renormalized_eval(c, n, "eta", x), cfg.degree,
                     d.z_radius, d.z_center, extended=cfg.extended)
    xi = fit_series(lambda x: quad_renormalized_eval(c, n, "xi", x), cfg.degree,
                    d.w_radius, d.w_center, extended=cfg.extended)
    return Pair1D(eta, xi)


# ---------------------------------------------------------------------------
# spectrum of the differential


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: tuple
    expanding_count: int
    matrix_dim: int
    condition: float

    def to_json(self) -> dict:
        return {
            "eigenvalues": [[float(e.real), float(e.imag)] for e in self.eigenvalues],
            "expanding_count": self.expanding_count,
            "matrix_dim": self.matrix_dim,
            "condition": self.condition,
        }


def _arnoldi(apply, start: np.ndarray, dim: int) -> np.ndarray:
    """Hessenberg matrix of ``apply`` on the Krylov space of ``start`` (two-pass Gram-Schmidt)."""
    n = len(start)
    dim = min(dim, n)
    Q = np.zeros((n, dim + 1), dtype=complex)
    H = np.zeros((dim + 1, dim), dtype=complex)
    Q[:, 0] = start / np.linalg.norm(start)
    for k in range(dim):
        w = apply(Q[:, k])
        for _ in range(2):
            for j in range(k + 1):
                c = np.vdot(Q[:, j], w)
                H[j, k] += c
                w = w - c * Q[:, j]
        H[k + 1, k] = np.linalg.norm(w)
        if H[k + 1, k] < 1e-14:
            return H[: k + 1, : k + 1]
        Q[:, k + 1] = w / H[k + 1, k]
    return H[:dim, :dim]


def differential_matrix(zstar: Pair1D, dim: int, cfg: Config | None = None,
                        project: bool = True, method: str = "krylov") -> np.ndarray:
    """A ``dim x dim`` finite-difference compression of the differential at ``zstar``.

    ``method="krylov"`` projects onto the Krylov space generated from a fixed
    start vector (Rayleigh-Ritz); ``method="galerkin"`` keeps the ``dim``
    lowest-degree slice coordinates and freezes the others.
    """
    cfg = cfg or Config()
    zstar = zstar.to_double()
    sl = Slice(zstar)
    if not 1 <= dim <= sl.size:
        raise ValueError(f"dim must be between 1 and {sl.size}")
    op = renormalize1d_ac if project else renormalize1d
    v0 = sl.to_vector(zstar)
    f0 = sl.to_vector(op(zstar, cfg))

    def fun(vec):
        return sl.to_vector(op(sl.from_vector(vec), cfg))

    if method == "galerkin":
        cols = sl.order()[:dim]
        full = _fd_jacobian(fun, v0, f0, cols, cfg.fd_step, cfg.threads)
        return full[cols, :]
    if method != "krylov":
        raise ValueError(f"unknown method {method!r}")

    def apply(direction):
        h = cfg.fd_step / np.linalg.norm(direction)
        return (fun(v0 + h * direction) - f0) / h

    return _arnoldi(apply, np.ones(sl.size, dtype=complex), dim)


def differential_spectrum(zstar: Pair1D, dim: int = 50, cfg: Config | None = None,
                          project: bool = True, method: str = "krylov") -> SpectrumReport:
    """Eigenvalues of the finite-difference differential, sorted by modulus."""
    mat = differential_matrix(zstar, dim, cfg, project, method)
    eig = np.linalg.eigvals(mat)
    eig = eig[np.argsort(-np.abs(eig), kind="stable")]
    return SpectrumReport(
        eigenvalues=tuple(complex(e) for e in eig),
        expanding_count=int(np.sum(np.abs(eig) > 1.0)),
        matrix_dim=mat.shape[0],
        condition=float(np.linalg.cond(mat)),
    )


# ---------------------------------------------------------------------------
# the map g* and its linearizer


def gstar_series(zstar: Pair1D, radius: float = 0.3) -> Series1:
    """``g*(x) = eta*^-1(lambda* x)`` expanded about its fixed point 1.

    The inverse branch is the one through 1 (where ``eta*(1) = lambda*``).
    """
    lam = zstar.lam
    inv = revert_about(zstar.eta, 1.0, radius=abs(lam) * radius * 1.05)
    scale = Series1.affine(lam, 0, zstar.eta.degree, radius, 1.0, zstar.extended)
    return compose1(inv, scale)


def centered_gstar(zstar: Pair1D, radius: float = 0.3) -> Series1:
    """``x -> g*(x + 1) - 1``, a germ fixing 0 with multiplier ``lambda*^2``."""
    g = gstar_series(zstar, radius)
    return Series1(g.coeffs, g.radius, 0.0) - 1.0


def linearize_gstar(zstar: Pair1D, radius: float = 0.3, tol: float = 1e-11,
                    max_iter: int = 200, history: list | None = None) -> Series1:
    """Linearizer ``u*`` of the centered ``g*``: ``u*(g(x)) = g'(0) u*(x)``.

    Computed as the limit of ``g'(0)^-n g^n`` (``g'(0) = lambda*^2`` up to
    rounding), normalized by ``u*(0) = 0`` and ``u*'(0) = 1``.  Successive
    differences (majorant norm) are appended to ``history`` if given.
    """
    g = centered_gstar(zstar, radius)
    mult = g.coeffs[1]
    it = g
    u = g / mult
    for n in range(2, max_iter):
        it = compose1(g, it)
        nxt = it / mult ** n
        diff = nxt.distance(u)
        if history is not None:
            history.append(diff)
        u = nxt
        if diff < tol:
            c = u.coeffs.copy()
            c[0] = 0
            c[1] = 1
            return u.with_coeffs(c)
    raise NoConvergence("linearizer iteration did not settle")


# ---------------------------------------------------------------------------
# fixed point file


def save_fixed_point(path: str | Path, zstar: Pair1D, residual: float) -> None:
    """Write ``fixedpoint.json``.  Floats are written with ``repr`` so reading back is exact."""
    d = zstar.to_double()
    lam = complex(d.lam)
    data = {
        "schema": 1,
        "schema_version": 1,
        "degree": d.eta.degree,
        "r_z": d.eta.radius,
        "r_w": d.xi.radius,
        "z_center": [d.eta.center.real, d.eta.center.imag],
        "w_center": [d.xi.center.real, d.xi.center.imag],
        "lambda": [lam.real, lam.imag],
        "eta": [[float(c.real), float(c.imag)] for c in d.eta.coeffs],
        "xi": [[float(c.real), float(c.imag)] for c in d.xi.coeffs],
        "residual": float(residual),
    }
    Path(path).write_text(json.dumps(data, indent=1))


def load_fixed_point(path: str | Path, extended: bool = False):
    """Read ``fixedpoint.json``; returns ``(zstar, lambda, residual)``."""
    data = json.loads(Path(path).read_text())
    if data.get("schema_version", data.get("schema")) != 1:
        raise ValueError("unsupported fixed point schema")
    zc = complex(*data.get("z_center", (0.0, 0.0)))
    wc = complex(*data.get("w_center", (0.0, 0.0)))
    eta = Series1(to_array([complex(*c) for c in data["eta"]], extended), data["r_z"], zc)
    xi = Series1(to_array([complex(*c) for c in data["xi"]], extended), data["r_w"], wc)
    if eta.degree != data["degree"] or xi.degree != data["degree"]:
        raise ValueError("degree does not match coefficient count")
    return Pair1D(eta, xi), complex(*data["lambda"]), float(data["residual"])
