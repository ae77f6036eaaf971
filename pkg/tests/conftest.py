import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kasnerlin.acceptance import Session
from kasnerlin.background import KasnerBackground
from kasnerlin.gauge_cmc import make_initial_data
from kasnerlin.gauge_parabolic import make_initial_data_parabolic
from kasnerlin.integrator import IntegratorOptions

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SEED = 0
K_MAX = 4


class Runs:
    """Lazily computed acceptance trajectories shared across test modules."""

    def __init__(self):
        self.session = Session()
        self._init = {}

    def initial(self, label):
        if label not in self._init:
            if label == "parabolic3":
                self._init[label] = make_initial_data_parabolic(KasnerBackground.flrw(), 3.0, SEED, K_MAX)
            else:
                sigma = float(label.split("=")[1])
                bg = KasnerBackground.flrw() if sigma == 0 else KasnerBackground.from_sigma(sigma)
                self._init[label] = make_initial_data(bg, seed=SEED, k_max=K_MAX)
        return self._init[label]

    def cmc(self, sigma):
        label = f"cmc sigma={sigma}"
        return self.session.run(label, self.initial(f"cmc={sigma}"), IntegratorOptions(t_min=1e-8))

    def parabolic(self):
        return self.session.run("parabolic lambda=3", self.initial("parabolic3"), IntegratorOptions(t_min=1e-6))


@pytest.fixture(scope="session")
def runs():
    return Runs()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def record_criterion():
    def record(result):
        line = result.line()
        ACCEPTANCE_LINES[result.id] = line
        print(line)
        return result
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for cid in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[cid])
