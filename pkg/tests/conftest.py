import numpy as np
import pytest
from hypothesis import strategies as st

from sosvolume.poly import Polynomial, enumerate_monomials


def random_poly(rng: np.random.Generator, n: int, deg: int, density: float = 0.6) -> Polynomial:
    basis = enumerate_monomials(n, deg)
    # small integers keep products exact in floating point
    c = rng.integers(-5, 6, size=len(basis)).astype(float)
    c[rng.random(len(basis)) > density] = 0.0
    return Polynomial.from_coefficients(basis, c)


@st.composite
def polys(draw, n=None, max_degree=6):
    n = draw(st.integers(1, 3)) if n is None else n
    deg = draw(st.integers(0, max_degree))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_poly(np.random.default_rng(seed), n, deg)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte-Carlo runs with 10^6 samples")


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
