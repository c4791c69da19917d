import numpy as np
import pytest

from projection_filter.polyalg import ModelSpec, Polynomial

CUBIC_NATURAL = ((1,), (2,), (3,), (4,))
GAUSS2_NATURAL = ((0, 1), (0, 2), (1, 0), (1, 1), (2, 0))
VDP_NATURAL = ((0, 1), (0, 2), (0, 3), (0, 4), (1, 0), (1, 1), (1, 2), (1, 3), (2, 0), (2, 1), (2, 2), (3, 0),
               (3, 1), (4, 0))


def poly(text, dim=1):
    return Polynomial.parse(text, dim)


def cubic_model(sigma=0.4, beta=0.8):
    return ModelSpec((poly("0"),), ((poly(f"{sigma}@0"),),), np.eye(1), (poly(f"{beta}@3"),))


def linear2d_model(r=0.01):
    p = lambda t: poly(t, 2)
    return ModelSpec((p("-1@1,0"), p("-1@0,1")), ((p("1@0,0"), p("0")), (p("0"), p("1@0,0"))), np.eye(2),
                     (p("-1@1,0"), p("-1@0,1")), np.array([r, r]))


def vdp_model(mu=0.3):
    p = lambda t: poly(t, 2)
    return ModelSpec((p("1@0,1"), p(f"{mu}@0,1;-{mu}@2,1;-1@1,0")), ((p("0"),), (p("1@0,0"),)), np.eye(1),
                     (p("1@1,0"),))


def scalar_linear_model(a=-1.0, c=-1.0, q=1.0, r=0.01, offset=0.0):
    obs = f"{c}@1" + (f";{offset}@0" if offset else "")
    return ModelSpec((poly(f"{a}@1"),), ((poly("1@0"),),), np.array([[q]]), (poly(obs),), np.array([r]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: list = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
