import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from goldenrenorm.arclab import (
    Arc, InvalidJacobian, MissingData, ZeroJacobian, arc, arc_points, average_jacobian,
    bead_diameter, boundary_from_arc, conjugacy_defect, degenerate_arc, holder_bound,
    holder_empirical, invariance_gap, jacobian_scaling_check, pre_iterates, siegel_boundary,
    universality_json, universality_report, word_apply,
)
from goldenrenorm.goldenrot import I_KIND, J_KIND, THETA, Word, fibonacci_q, max_word, partition
from goldenrenorm.renorm1d import C_STAR, MU_STAR
from goldenrenorm.renorm2d import HenonMap, henon_pair

RNG = np.random.default_rng(11)


def _bead_points(n=10, r=0.3):
    x = r * np.sqrt(RNG.uniform(0, 1, n)) * np.exp(2j * np.pi * RNG.uniform(0, 1, n))
    y = r * np.sqrt(RNG.uniform(0, 1, n)) * np.exp(2j * np.pi * RNG.uniform(0, 1, n))
    return x, y


# ---------------------------------------------------------------------------
# composite iterates and words


def test_pre_iterates_counts(cfg):
    S = henon_pair(MU_STAR, 0.2, cfg)
    pre = pre_iterates(S, 3)
    assert [(pb.henon_count, pa.henon_count) for pa, pb in pre] == [(1, 2), (3, 5), (8, 13), (21, 34)]
    for n, (pa, pb) in enumerate(pre):
        assert pb.henon_count == fibonacci_q(2 * n + 1)
        assert pa.henon_count == fibonacci_q(2 * n + 2)
    x, y = _bead_points(5)
    assert np.allclose(pre[0][0](x, y), S.A(x, y), atol=0)
    assert np.allclose(pre[0][1](x, y), S.B(x, y), atol=0)
    with pytest.raises(ValueError):
        pre_iterates(S, -1)


def test_pre_iterates_jacobian(cfg):
    b = MU_STAR * 0.2
    S = henon_pair(MU_STAR, 0.2, cfg)
    pb2 = pre_iterates(S, 2)[2][1]
    x, y = _bead_points(5, 0.2)
    assert np.allclose(pb2.jac(x, y), b ** 8, rtol=1e-12, atol=0)


def test_pre_iterates_match_henon(cfg):
    hm = HenonMap.from_multipliers(MU_STAR, 0.2)
    S = henon_pair(MU_STAR, 0.2, cfg)
    pa2 = pre_iterates(S, 2)[2][0]
    x, y = _bead_points(4, 0.2)
    X, Y = pa2(x, y)
    # the pair is H in the chart (x, y) -> (c x, c y)
    hx, hy = hm.iterate(hm.c * x, hm.c * y, 13)
    assert np.allclose(X, hx / hm.c, rtol=1e-10) and np.allclose(Y, hy / hm.c, rtol=1e-10)


def test_word_apply_empty_is_identity(cfg):
    S = henon_pair(MU_STAR, 0.2, cfg)
    z = (0.1 + 0.2j, -0.05j)
    assert word_apply(S, Word((0,), J_KIND), z) == z


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_spread_identity(cfg, henon, n):
    for S in (henon_pair(MU_STAR, 0.2, cfg), henon(0.2)[1].pairs[3]):
        pre = pre_iterates(S, n)
        w = max_word(n, J_KIND)
        for x, y in zip(*_bead_points(10, 0.05)):
            X, Y = word_apply(S, w, (x, y), pre=pre)
            bx, by = S.B(np.array([X]), np.array([Y]))
            ax, ay = pre[n][0](np.array([x]), np.array([y]))
            assert abs(bx[0] - ax[0]) <= 1e-9 * abs(ax[0])
            assert abs(by[0] - ay[0]) <= 1e-9 * abs(ay[0])


def test_word_apply_degenerate_ignores_y(cfg):
    S = henon_pair(MU_STAR, 0.0, cfg)
    pre = pre_iterates(S, 3)
    for w in (max_word(3, J_KIND), max_word(3, I_KIND), Word((1, 1, 0), J_KIND)):
        p = word_apply(S, w, (0.1 + 0.1j, 0.0), pre=pre)
        q = word_apply(S, w, (0.1 + 0.1j, 1e-6), pre=pre)
        assert p == q


# ---------------------------------------------------------------------------
# arcs


@pytest.mark.parametrize("level", [0, 1, 2, 3, 4])
def test_arc_counts(henon, cfg, level):
    S, orbit = henon(0.2)
    a = arc(S, level, cfg, orbit)
    assert len(a) == fibonacci_q(2 * level + 1) + fibonacci_q(2 * level)
    assert int(a.is_j.sum()) == fibonacci_q(2 * level + 1)
    assert np.all(np.diff(a.t) > 0)
    assert np.allclose(a.t, partition(level).left, atol=0)
    assert a.t[0] == pytest.approx(-THETA) and a.t[-1] < 1


def test_arc_points_samples(henon, cfg):
    S, orbit = henon(0.2)
    samples = arc_points(S, 3, cfg, orbit)
    assert len(samples) == 34
    part = partition(3)
    for s in samples[:5]:
        assert s.level == 3
        i = int(np.argmin(np.abs(part.left - s.t)))
        assert part.left[i] == s.t


@pytest.mark.parametrize("level", [2, 3, 4, 5])
def test_conjugacy_defect(henon, cfg, level):
    S, orbit = henon(0.2)
    a = arc(S, level, cfg, orbit)
    defect, matched = conjugacy_defect(a, S)
    assert matched >= len(a) - 2
    diam = bead_diameter(orbit.microscope(level), orbit.pairs[level].omega)
    assert defect < diam
    assert defect < 1e-9


def test_arc_level_nesting(henon, cfg):
    S, orbit = henon(0.2)
    for n in (3, 4):
        coarse, fine = arc(S, n, cfg, orbit), arc(S, n + 1, cfg, orbit)
        parent = np.searchsorted(coarse.t, fine.t + 1e-12, side="right") - 1
        d = np.hypot(np.abs(fine.x - coarse.x[parent]), np.abs(fine.y - coarse.y[parent]))
        diam = bead_diameter(orbit.microscope(n), orbit.pairs[n].omega)
        # a word can stretch its bead, so the bound uses the largest arc step too
        assert d.max() <= 2 * max(diam, coarse.max_gap())


def test_arc_csv(tmp_path, henon, cfg):
    S, orbit = henon(0.2)
    a = arc(S, 2, cfg, orbit)
    path = tmp_path / "arc.csv"
    a.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "word", "level", "x_re", "x_im", "y_re", "y_im"]
    assert len(rows) == len(a) + 1
    assert float(rows[1][0]) == a.t[0]
    assert complex(float(rows[1][3]), float(rows[1][4])) == a.x[0]


def test_arc_missing_levels(henon):
    with pytest.raises(MissingData):
        henon(0.2)[1].microscope(40)
    with pytest.raises(ValueError):
        arc(henon(0.2)[0], -1)


def test_degenerate_arc_matches_nu_zero(henon, cfg):
    S, orbit = henon(0.0)
    for level in (0, 2, 4):
        a, d = arc(S, level, cfg, orbit), degenerate_arc(C_STAR, level)
        assert np.max(np.abs(a.x - d.x)) < 1e-10
        assert np.max(np.abs(a.y - d.y)) < 1e-10


# ---------------------------------------------------------------------------
# Siegel boundary


def test_siegel_boundary_counts_and_invariance(henon, cfg):
    hm = HenonMap.from_multipliers(MU_STAR, 0.2)
    S, orbit = henon(0.2)
    cloud = siegel_boundary(hm, 3, cfg, orbit)
    assert cloud.shape == (2 * (fibonacci_q(7) + fibonacci_q(6)), 2)
    gaps = [invariance_gap(hm, boundary_from_arc(hm, arc(S, L, cfg, orbit))) for L in (3, 5)]
    for dist, gap in gaps:
        assert dist <= 3 * gap
    assert gaps[1][0] < gaps[0][0]


def test_siegel_boundary_degenerate(henon, cfg):
    hm = HenonMap.from_multipliers(MU_STAR, 0.0)
    cloud = siegel_boundary(hm, 3, cfg, henon(0.0)[1])
    half = len(cloud) // 2
    # the second half is H of the first: its y coordinates are the first half's x
    assert np.array_equal(cloud[half:, 1], cloud[:half, 0])
    X, _ = hm(cloud[:half, 0], cloud[:half, 1])
    assert np.allclose(X, cloud[:half, 0] ** 2 + hm.c, atol=1e-14)


# ---------------------------------------------------------------------------
# average Jacobian


@pytest.mark.parametrize("nu", [0.1, 0.3])
def test_average_jacobian_level_independent(henon, cfg, nu):
    S, orbit = henon(nu)
    target = (MU_STAR * nu) ** (1 + THETA)
    bs = [average_jacobian(S, level, cfg, orbit).avg_jacobian for level in (4, 5, 6)]
    for b in bs:
        assert abs(b - target) / abs(target) < 1e-10
    assert max(abs(b - bs[0]) for b in bs) / abs(bs[0]) < 1e-10


class _ConstJac:
    """A Henon pair whose Jacobians are replaced by a constant."""

    def __init__(self, S, j):
        self.S, self.j = S, j

    def A(self, x, y):
        return self.S.A(x, y)

    def B(self, x, y):
        return self.S.B(x, y)

    def jac_A(self, x, y):
        return np.full(np.broadcast(x, y).shape, self.j, dtype=complex)

    jac_B = jac_A


def test_average_jacobian_constant_integrand(henon, cfg):
    S, orbit = henon(0.2)
    a = arc(S, 4, cfg, orbit)
    j = 0.3 - 0.2j
    prof = average_jacobian(_ConstJac(S, j), 4, cfg, arc_data=a)
    assert abs(prof.avg_jacobian - j) < 1e-14


def test_average_jacobian_degenerate_raises(henon, cfg):
    S, orbit = henon(0.0)
    with pytest.raises(ZeroJacobian):
        average_jacobian(S, 2, cfg, orbit)


def test_jacobian_profile_fields(henon, cfg):
    S, orbit = henon(0.3)
    prof = average_jacobian(S, 4, cfg, orbit)
    data = prof.to_json()
    assert data["schema_version"] == 1
    assert [r["n"] for r in data["per_level"]] == [0, 1, 2, 3, 4]
    assert [r["q2n"] for r in data["per_level"]] == [fibonacci_q(2 * n) for n in range(5)]


def test_jacobian_scaling_henon(henon, cfg):
    S, orbit = henon(0.3)
    b = MU_STAR * 0.3
    rep = jacobian_scaling_check(S, [1, 2, 3], cfg, orbit)
    assert rep["bounded"]
    assert rep["c_bound"] == pytest.approx(2 * abs(math.log(abs(b))) * (1 + THETA), rel=1e-9)
    for r in rep["levels"]:
        n = r["n"]
        assert abs(r["c_n"]) <= 2 * abs(math.log(abs(b)))
        closed = (fibonacci_q(2 * n + 1) - (1 + THETA) * fibonacci_q(2 * n)) * np.log(b)
        assert abs(r["c_n"] - closed) < 1e-8
        assert r["distortion"] < 1e-12


# ---------------------------------------------------------------------------
# universality


@pytest.fixture(scope="module")
def report03(henon, zstar, cfg):
    S, orbit = henon(0.3)
    return universality_report(S, [1, 2, 3], zstar, cfg, orbit)


def test_universality_report(report03):
    rep = report03
    assert abs(rep["slope"] - rep["log_abs_b"]) <= 0.05 * abs(rep["log_abs_b"])
    assert not rep["skipped"]
    for r in rep["levels"]:
        assert r["distortion"] < 20
    assert all(q < 0.9 for q in rep["alpha_dev_ratios"])


def test_universality_json(report03):
    data = universality_json(report03)
    assert data["schema_version"] == 1
    for r in data["levels"]:
        assert {"n", "q2n", "e_n_at_grid", "slope", "alpha_dev"} <= set(r)
        assert len(r["e_n_at_grid"]) == len(data["x_grid"])


def test_universality_flags_noise(henon, zstar, cfg):
    S, orbit = henon(0.2)
    rep = universality_report(S, [1, 2, 5], zstar, cfg, orbit)
    assert rep["skipped"] == [5]
    assert rep["levels"][-1]["below_noise"]


# ---------------------------------------------------------------------------
# Holder exponents


def test_holder_bound_examples():
    assert holder_bound(0.5, -0.5) == 1.0
    assert holder_bound(0.1, 0.01) == pytest.approx(0.75)
    assert holder_bound(0.01, 0.1) == pytest.approx(1.5)
    for bad in [(0.0, 0.5), (1.0, 0.5), (0.5, 2j)]:
        with pytest.raises(InvalidJacobian):
            holder_bound(*bad)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_holder_bound_symmetry(m1, m2):
    # the two directions average to at least 1
    s = holder_bound(m1, m2) + holder_bound(m2, m1)
    assert s >= 2 - 1e-12
    assert holder_bound(m1, m2) > 0.5


def test_holder_empirical_identical_arcs(henon, cfg):
    S, orbit = henon(0.2)
    a = arc(S, 3, cfg, orbit)
    b = (MU_STAR * 0.2) ** (1 + THETA)
    rep = holder_empirical(S, S, 3, cfg, arcs=(a, a), bounds=(b, b))
    assert rep["alpha_hat"] == pytest.approx(1.0, abs=1e-12)
    assert rep["bound"] == 1.0 and not rep["binding"] and rep["within"]


def test_holder_empirical_mismatched_arcs(henon, cfg):
    S, orbit = henon(0.2)
    a2, a3 = arc(S, 2, cfg, orbit), arc(S, 3, cfg, orbit)
    with pytest.raises(ValueError):
        holder_empirical(S, S, 3, cfg, arcs=(a2, a3), bounds=(0.1, 0.1))


def test_arc_type():
    a = degenerate_arc(C_STAR, 2)
    assert isinstance(a, Arc) and len(a) == 13
    assert a.word(0).kind in (J_KIND, I_KIND)
