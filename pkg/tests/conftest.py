import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from metrovec.bench import generate_model
from metrovec.model import LayerSpec, SpinModel, build_layered_model

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def ring_layer(P, rng, dist="uniform"):
    """Layer whose positions couple to the next two around a ring."""
    J = np.zeros((P, P), np.float32)
    for a in range(P):
        for d in (1, 2):
            b = (a + d) % P
            if a != b and J[a, b] == 0:
                v = rng.choice([-1.0, 1.0]) if dist == "pm1" else rng.uniform(-1, 1)
                J[a, b] = J[b, a] = v
    h = np.zeros(P) if dist == "pm1" else rng.uniform(-1, 1, P)
    return LayerSpec(h, J)


def random_model(n, rng, density=0.3):
    """Generic (non-layered) model with random couplings and fields."""
    i, j = np.triu_indices(n, 1)
    keep = rng.random(i.size) < density
    i, j = i[keep], j[keep]
    return SpinModel.from_undirected(n, rng.uniform(-1, 1, n), i, j, rng.uniform(-1, 1, i.size))


@pytest.fixture(scope="session")
def small_layered():
    """16 layers x 8 positions, generated."""
    return generate_model(16, 8, (4, 6), "uniform", seed=5)


@pytest.fixture(scope="session")
def two_spin():
    return SpinModel.from_undirected(2, [0.0, 0.0], [0], [1], [1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def layered(P=8, L=16, seed=0, dist="uniform", j_tau=1.0):
    return build_layered_model(ring_layer(P, np.random.default_rng(seed), dist), L, j_tau)


# one line per acceptance criterion, shown in the terminal summary
CRITERIA_LINES: list[str] = []


@pytest.fixture
def criterion():
    def record(number, title, passed, detail=""):
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        CRITERIA_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA_LINES:
            terminalreporter.write_line(line)
