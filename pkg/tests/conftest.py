import pytest

from goldenrenorm.arclab import compute_orbit
from goldenrenorm.config import Config
from goldenrenorm.renorm1d import C_STAR, MU_STAR, newton_fixed_point, quad_renormalized
from goldenrenorm.renorm2d import henon_pair

ORBIT_DEPTH = 6


@pytest.fixture(scope="session")
def cfg():
    return Config()


def _solve(cfg):
    return newton_fixed_point(quad_renormalized(C_STAR, 6, cfg), cfg)


@pytest.fixture(scope="session")
def fixed_point(cfg):
    """``(zstar, lambda_star, residual)`` at degree 60."""
    return _solve(cfg)


@pytest.fixture(scope="session")
def zstar(fixed_point):
    return fixed_point[0]


@pytest.fixture(scope="session")
def cfg70():
    return Config(degree=70, degree_x=70)


@pytest.fixture(scope="session")
def fixed_point70(cfg70):
    return _solve(cfg70)


class OrbitCache:
    """Henon pairs and their renormalization orbits, computed once per session."""

    def __init__(self, cfg):
        self.cfg = cfg
        self._data = {}

    def __call__(self, nu: float):
        if nu not in self._data:
            S = henon_pair(MU_STAR, nu, self.cfg)
            self._data[nu] = (S, compute_orbit(S, ORBIT_DEPTH, self.cfg))
        return self._data[nu]


@pytest.fixture(scope="session")
def henon(cfg):
    return OrbitCache(cfg)


@pytest.fixture(scope="session")
def istar_step(zstar, cfg):
    """``(iota(zstar), R(iota(zstar)), record)``."""
    from goldenrenorm.renorm2d import embed_1d, renormalize2d_step

    I = embed_1d(zstar, cfg)
    Q, rec = renormalize2d_step(I, cfg, compare_embedding=True)
    return I, Q, rec


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report_line():
    """Record one pass/fail line; the lines are printed in the terminal summary."""

    def record(criterion: int, ok: bool, detail: str) -> bool:
        line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
