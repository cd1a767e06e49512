import json

import numpy as np
import pytest

from goldenrenorm.errors import NotAlmostCommuting
from goldenrenorm.renorm1d import (
    C_STAR, Pair1D, ZeroScaling, centered_gstar, commutator_defects, differential_spectrum,
    fixed_point_residual, gstar_series, linearize_gstar, load_fixed_point, quad_pair,
    quad_renormalized, quad_scaling, renormalize1d, save_fixed_point, siegel_c,
)
from goldenrenorm.series import Series1

# frozen from an independent run: direct f_c iteration at double precision
LAMBDA_STAR = 0.5504634363480881
LEADING_EIGENVALUE = 6.854101966249685  # (1 + sqrt 5)^4 / 16


def test_siegel_c_examples():
    assert abs(C_STAR - (-0.390540870218399 - 0.586787907346969j)) < 1e-12
    assert siegel_c(0, 0) == 0
    assert abs(siegel_c(1, 0) - 0.25) < 1e-15


def test_quad_pair_examples(cfg):
    z = quad_pair(C_STAR, cfg)
    assert abs(z.xi(0) - 1) < 1e-14
    assert abs(z.eta(0) - (1 + C_STAR)) < 1e-14
    d0, d2 = commutator_defects(z)
    assert abs(d0) < 1e-12 and abs(d2) < 1e-12
    z.check_critical()
    with pytest.raises(ZeroScaling):
        quad_pair(0.0, cfg)


def test_defects_vanish_for_equal_maps():
    f = Series1.from_polynomial([1, 0, 0.5], 10, 1.0)
    d0, d2 = commutator_defects(Pair1D(f, f))
    assert d0 == 0 and d2 == 0


def test_check_critical_rejects():
    f = Series1.from_polynomial([1, 0.1, 0.5], 10, 1.0)
    with pytest.raises(NotAlmostCommuting):
        Pair1D(f, f).check_critical()


def test_fixed_point_properties(cfg, fixed_point):
    z, lam, res = fixed_point
    assert res < 1e-11
    assert abs(complex(lam) - LAMBDA_STAR) < 1e-8
    d0, d2 = commutator_defects(z)
    assert abs(d0) < 1e-10 and abs(d2) < 1e-10
    z.check_critical()
    R = renormalize1d(z, cfg)
    assert R.distance(z) < 1e-9
    assert abs(R.lam - lam) < 1e-9
    # componentwise fixed-point equation for eta
    e, x = z.eta, z.xi
    pts = e.center + 0.5 * e.radius * np.exp(2j * np.pi * np.arange(32) / 32)
    lhs = e(x(e(lam * pts))) / lam
    assert np.max(np.abs(lhs - e(pts))) < 1e-10


def test_gstar_multiplier(fixed_point):
    z, lam, _ = fixed_point
    g1 = lam / z.eta.deriv()(1.0)
    assert abs(g1 - lam ** 2) < 1e-8
    assert abs(gstar_series(z).deriv()(1.0) - lam ** 2) < 1e-8


def test_quadratic_renormalizations_converge(cfg, zstar):
    d = [quad_renormalized(C_STAR, n, cfg).distance(zstar) for n in range(1, 9)]
    ratios = np.array(d[1:]) / np.array(d[:-1])
    assert np.all(ratios < 0.9)


def test_lambda_direct_iteration_oracle(fixed_point):
    # lambda_n = s_{n+1} / s_n along R^n(zeta_{f_c*}), with s_n = f^{q_{2n+1}}(0)
    lam = fixed_point[1]
    ln = quad_scaling(C_STAR, 13) / quad_scaling(C_STAR, 12)
    assert abs(ln - lam) < 1e-6


def test_renormalize_quadratic_matches_direct(cfg):
    z = quad_renormalized(C_STAR, 4, cfg)
    R = renormalize1d(z, cfg)
    # majorant distance; its floor is the degree-60 truncation tail
    assert R.distance(quad_renormalized(C_STAR, 5, cfg)) < 1e-8
    # the level-4 input is an FFT fit with error near 1e-11, which the defects inherit
    d0, d2 = commutator_defects(R)
    assert abs(d0) < 1e-10 and abs(d2) < 1e-9


def test_spectrum(zstar, cfg):
    rep = differential_spectrum(zstar, 30, cfg)
    mods = np.abs(rep.eigenvalues)
    assert rep.expanding_count == 1 == int(np.sum(mods > 1))
    assert abs(mods[0] - LEADING_EIGENVALUE) < 1e-4
    assert mods[1] < 0.95
    assert list(mods) == sorted(mods, reverse=True)


def test_linearizer(zstar):
    hist = []
    u = linearize_gstar(zstar, history=hist)
    assert u(0.0) == 0 and u.deriv()(0.0) == 1
    g = centered_gstar(zstar)
    lam2 = complex(zstar.lam) ** 2
    x = 0.2 * np.exp(2j * np.pi * np.arange(24) / 24)
    assert np.max(np.abs(u(g(x)) - lam2 * u(x))) < 1e-9
    r = np.array(hist[5:15]) / np.array(hist[4:14])
    assert np.all(np.abs(r - abs(lam2)) < 0.05)


def test_fixed_point_file_round_trip(tmp_path, fixed_point):
    z, lam, res = fixed_point
    path = tmp_path / "fixedpoint.json"
    save_fixed_point(path, z, res)
    data = json.loads(path.read_text())
    assert data["schema"] == 1 and data["schema_version"] == 1
    assert {"degree", "r_z", "r_w", "lambda", "eta", "xi", "residual"} <= set(data)
    z2, lam2, res2 = load_fixed_point(path)
    assert np.array_equal(z2.eta.coeffs, z.eta.coeffs) and np.array_equal(z2.xi.coeffs, z.xi.coeffs)
    assert lam2 == complex(lam) and res2 == res
    assert fixed_point_residual(z2) == fixed_point_residual(z)
